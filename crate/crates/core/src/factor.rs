//! Factor decompositions of a cube: correspondence analysis for denoising and
//! reducing nonnegative spectra, principal components for orthogonalizing
//! parameter maps.
//!
//! Correspondence analysis works on `Q = cube / N` with row masses `r` and
//! column masses `c`. The standardized residual matrix
//! `S = D_r^{-1/2} (Q - r cᵀ) D_c^{-1/2}` is decomposed as `U Σ Vᵀ`; axis `k`
//! has inertia `μ_k = σ_k²`. Pixel factors are row principal coordinates
//! `φ = D_r^{-1/2} U Σ`, computed here through the transition formula
//! `φ_k(x) = Σ_j (p_xj - c_j) v_jk / √c_j` with `p_x` the row profile.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::HyperCube;

/// Relative floor below which an eigenvalue is treated as zero.
pub const EIGEN_FLOOR: f64 = 1e-12;

/// Makes the first maximal-magnitude entry of `v` positive.
fn fix_sign(v: &mut [f64]) {
    let max = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if max == 0.0 {
        return;
    }
    let lead = v
        .iter()
        .position(|x| x.abs() >= max * (1.0 - 1e-9))
        .expect("max attained");
    if v[lead] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Fitted correspondence-analysis model.
///
/// `col_axes[k]` is the unit right singular vector `v_k` (length `L`) of the
/// standardized residual matrix; `eigenvalues[k] = μ_k`. All
/// `min(P, L) - 1` nontrivial axes are stored, `retained` of them are used by
/// [`fca_project`] and [`fca_reconstruct`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FcaModel {
    pub row_masses: Vec<f64>,
    pub col_masses: Vec<f64>,
    pub grand_total: f64,
    pub col_axes: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
    pub retained: usize,
}

impl FcaModel {
    pub fn channels(&self) -> usize {
        self.col_masses.len()
    }

    pub fn total_inertia(&self) -> f64 {
        self.eigenvalues.iter().sum()
    }

    /// Share of total inertia carried by each axis.
    pub fn inertia_ratios(&self) -> Vec<f64> {
        ratios(&self.eigenvalues)
    }

    /// Column principal coordinates `γ_k(j) = σ_k v_jk / √c_j`.
    pub fn column_coordinates(&self, axis: usize) -> Vec<f64> {
        let s = self.eigenvalues[axis].sqrt();
        self.col_axes[axis]
            .iter()
            .zip(&self.col_masses)
            .map(|(v, c)| s * v / c.sqrt())
            .collect()
    }

    /// Same model with a different number of retained axes.
    pub fn with_retained(&self, k: usize) -> Result<Self> {
        check_axes(k, self.col_axes.len())?;
        Ok(Self {
            retained: k,
            ..self.clone()
        })
    }
}

fn ratios(eigenvalues: &[f64]) -> Vec<f64> {
    let total: f64 = eigenvalues.iter().sum();
    if total <= 0.0 {
        return vec![0.0; eigenvalues.len()];
    }
    eigenvalues.iter().map(|e| e / total).collect()
}

fn check_axes(k: usize, max: usize) -> Result<()> {
    if k > max {
        return Err(Error::InvalidParameter(format!(
            "requested {k} factor axes, at most {max} available"
        )));
    }
    Ok(())
}

fn check_nonnegative(cube: &HyperCube) -> Result<()> {
    for (i, p) in cube.pixels().enumerate() {
        for (j, &v) in p.iter().enumerate() {
            if !(v >= 0.0) {
                return Err(Error::NegativeValue {
                    pixel: i,
                    channel: j,
                    value: v,
                });
            }
        }
        if p.iter().sum::<f64>() <= 0.0 {
            return Err(Error::ZeroRow(i));
        }
    }
    Ok(())
}

/// Fits correspondence analysis on a nonnegative cube, retaining `k` axes.
pub fn fca_fit(cube: &HyperCube, k: usize) -> Result<FcaModel> {
    check_nonnegative(cube)?;
    let p = cube.pixel_count();
    let l = cube.channels();
    let max_axes = p.min(l) - 1;
    check_axes(k, max_axes)?;

    let n: f64 = cube.data().iter().sum();
    let mut row = vec![0.0; p];
    let mut col = vec![0.0; l];
    for (i, px) in cube.pixels().enumerate() {
        for (j, &v) in px.iter().enumerate() {
            row[i] += v;
            col[j] += v;
        }
    }
    if let Some(j) = col.iter().position(|&c| c <= 0.0) {
        return Err(Error::ZeroColumn(j));
    }
    row.iter_mut().for_each(|r| *r /= n);
    col.iter_mut().for_each(|c| *c /= n);

    let s = DMatrix::from_fn(p, l, |i, j| {
        let q = cube.pixel(i)[j] / n;
        let e = row[i] * col[j];
        (q - e) / e.sqrt()
    });
    // Eigen-decomposition of the L x L cross product. The tall SVD in
    // nalgebra loses accuracy on some column orders; this form does not,
    // and it stays small when P is large.
    let eig = (s.transpose() * &s).symmetric_eigen();
    let mut axes: Vec<(f64, Vec<f64>)> = (0..l)
        .map(|a| {
            let mu = eig.eigenvalues[a].max(0.0);
            (mu, eig.eigenvectors.column(a).iter().copied().collect())
        })
        .collect();
    axes.sort_by(|a, b| b.0.total_cmp(&a.0));

    // Drop the trivial direction √c (eigenvalue 0), then make the kept
    // axes exactly orthogonal to it and to each other. This only moves axes
    // inside null-space ties; axes with positive inertia are unaffected.
    let sqrt_c: Vec<f64> = col.iter().map(|c| c.sqrt()).collect();
    let top_mu = axes[0].0;
    let tail = axes
        .iter()
        .position(|a| a.0 <= EIGEN_FLOOR * top_mu)
        .unwrap_or(axes.len() - 1);
    let trivial = (tail..axes.len())
        .max_by(|&a, &b| {
            let da = dot(&axes[a].1, &sqrt_c).abs();
            let db = dot(&axes[b].1, &sqrt_c).abs();
            da.total_cmp(&db).then(b.cmp(&a))
        })
        .expect("at least one axis");
    axes.remove(trivial);
    axes.truncate(max_axes);

    let mut basis: Vec<Vec<f64>> = vec![sqrt_c];
    let mut col_axes = Vec::with_capacity(axes.len());
    let mut eigenvalues = Vec::with_capacity(axes.len());
    for (mu, mut v) in axes {
        for b in &basis {
            let d = dot(&v, b);
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= d * y);
        }
        let norm = dot(&v, &v).sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        fix_sign(&mut v);
        basis.push(v.clone());
        col_axes.push(v);
        eigenvalues.push(mu);
    }
    let top = eigenvalues.first().copied().unwrap_or(0.0);
    for e in &mut eigenvalues {
        if *e < EIGEN_FLOOR * top {
            *e = 0.0;
        }
    }

    Ok(FcaModel {
        row_masses: row,
        col_masses: col,
        grand_total: n,
        col_axes,
        eigenvalues,
        retained: k,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Pixel factors on the retained axes, as a `K`-channel cube.
pub fn fca_project(model: &FcaModel, cube: &HyperCube) -> Result<HyperCube> {
    project_axes(model, cube, model.retained)
}

/// Pixel factors on every stored axis.
pub fn fca_project_all(model: &FcaModel, cube: &HyperCube) -> Result<HyperCube> {
    project_axes(model, cube, model.col_axes.len())
}

fn project_axes(model: &FcaModel, cube: &HyperCube, k: usize) -> Result<HyperCube> {
    let l = model.channels();
    if cube.channels() != l {
        return Err(Error::DimensionMismatch {
            expected: l,
            actual: cube.channels(),
        });
    }
    if k == 0 {
        return Err(Error::InvalidParameter(
            "cannot project onto zero factor axes".into(),
        ));
    }
    // Standard column coordinates v_jk / √c_j.
    let std_cols: Vec<Vec<f64>> = model.col_axes[..k]
        .iter()
        .map(|v| v.iter().zip(&model.col_masses).map(|(a, c)| a / c.sqrt()).collect())
        .collect();
    let mut data = Vec::with_capacity(cube.pixel_count() * k);
    for (i, px) in cube.pixels().enumerate() {
        let total: f64 = px.iter().sum();
        if total == 0.0 {
            return Err(Error::ZeroRow(i));
        }
        for axis in &std_cols {
            let f: f64 = px
                .iter()
                .zip(&model.col_masses)
                .zip(axis)
                .map(|((&v, &c), &a)| (v / total - c) * a)
                .sum();
            data.push(f);
        }
    }
    let labels = (1..=k).map(|a| format!("fca{a}")).collect();
    HyperCube::new(cube.width(), cube.height(), k, data)?.with_channel_labels(labels)
}

/// Reconstructs the cube from pixel factors:
/// `f̂(x, j) = N r_x c_j (1 + Σ_k φ_k(x) γ_k(j) / √μ_k)`.
///
/// Uses the model's row masses, so `factors` must be on the fitted grid.
/// Axes with inertia below [`EIGEN_FLOOR`] relative to the largest are skipped.
pub fn fca_reconstruct(model: &FcaModel, factors: &HyperCube) -> Result<HyperCube> {
    let k = factors.channels();
    check_axes(k, model.col_axes.len())?;
    let p = model.row_masses.len();
    if factors.pixel_count() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            actual: factors.pixel_count(),
        });
    }
    let l = model.channels();
    let top = model.eigenvalues.first().copied().unwrap_or(0.0);
    let active: Vec<usize> = (0..k)
        .filter(|&a| model.eigenvalues[a] > EIGEN_FLOOR * top && model.eigenvalues[a] > 0.0)
        .collect();
    // γ_k(j) / √μ_k = v_jk / √c_j
    let std_cols: Vec<Vec<f64>> = active
        .iter()
        .map(|&a| {
            model.col_axes[a]
                .iter()
                .zip(&model.col_masses)
                .map(|(v, c)| v / c.sqrt())
                .collect()
        })
        .collect();
    let mut data = Vec::with_capacity(p * l);
    for (i, phi) in factors.pixels().enumerate() {
        let base = model.grand_total * model.row_masses[i];
        for j in 0..l {
            let corr: f64 = active
                .iter()
                .zip(&std_cols)
                .map(|(&a, col)| phi[a] * col[j])
                .sum();
            data.push(base * model.col_masses[j] * (1.0 + corr));
        }
    }
    HyperCube::new(factors.width(), factors.height(), l, data)
}

/// Reconstruction with no factor axes: the independence model `N r_x c_j`.
pub fn fca_independence(model: &FcaModel, width: usize, height: usize) -> Result<HyperCube> {
    if width * height != model.row_masses.len() {
        return Err(Error::DimensionMismatch {
            expected: model.row_masses.len(),
            actual: width * height,
        });
    }
    let l = model.channels();
    let mut data = Vec::with_capacity(width * height * l);
    for r in &model.row_masses {
        data.extend(model.col_masses.iter().map(|c| model.grand_total * r * c));
    }
    HyperCube::new(width, height, l, data)
}

/// Fits, projects and reconstructs in one go; the usual denoising filter.
///
/// Returns the model, the pixel factors (`None` when `k == 0`) and the
/// reconstructed cube.
pub fn fca_filter(cube: &HyperCube, k: usize) -> Result<(FcaModel, Option<HyperCube>, HyperCube)> {
    let model = fca_fit(cube, k)?;
    if k == 0 {
        let recon = fca_independence(&model, cube.width(), cube.height())?;
        return Ok((model, None, recon));
    }
    let factors = fca_project(&model, cube)?;
    let recon = fca_reconstruct(&model, &factors)?;
    Ok((model, Some(factors), recon))
}

/// Principal component model of per-pixel parameter vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub means: Vec<f64>,
    /// Orthonormal axes, one per entry, each of length `M`.
    pub components: Vec<Vec<f64>>,
    /// Sample variance along each axis (denominator `P - 1`), descending.
    pub eigenvalues: Vec<f64>,
}

impl PcaModel {
    pub fn dims(&self) -> usize {
        self.means.len()
    }

    pub fn inertia_ratios(&self) -> Vec<f64> {
        ratios(&self.eigenvalues)
    }

    /// Inertia ratios as percentages with two decimals, e.g. `"97.24%"`.
    pub fn inertia_report(&self) -> Vec<String> {
        self.inertia_ratios()
            .iter()
            .map(|r| format!("{:.2}%", 100.0 * r))
            .collect()
    }
}

/// Sample covariance (denominator `P - 1`) and channel means of a cube.
pub fn covariance(cube: &HyperCube) -> (Vec<f64>, DMatrix<f64>) {
    let m = cube.channels();
    let p = cube.pixel_count();
    let mut means = vec![0.0; m];
    for px in cube.pixels() {
        means.iter_mut().zip(px).for_each(|(a, v)| *a += v);
    }
    means.iter_mut().for_each(|a| *a /= p as f64);
    let mut cov = DMatrix::zeros(m, m);
    for px in cube.pixels() {
        for a in 0..m {
            let da = px[a] - means[a];
            for b in a..m {
                cov[(a, b)] += da * (px[b] - means[b]);
            }
        }
    }
    let denom = (p.max(2) - 1) as f64;
    for a in 0..m {
        for b in a..m {
            let v = cov[(a, b)] / denom;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    (means, cov)
}

pub fn pca_fit(maps: &HyperCube) -> Result<PcaModel> {
    let m = maps.channels();
    if maps.pixel_count() <= m {
        return Err(Error::InvalidParameter(format!(
            "PCA needs more pixels ({}) than parameters ({m})",
            maps.pixel_count()
        )));
    }
    let (means, cov) = covariance(maps);
    let eig = SymmetricEigen::new(cov);
    let mut pairs: Vec<(f64, Vec<f64>)> = (0..m)
        .map(|a| {
            let mut v: Vec<f64> = eig.eigenvectors.column(a).iter().copied().collect();
            fix_sign(&mut v);
            (eig.eigenvalues[a].max(0.0), v)
        })
        .collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    if pairs[0].0 <= 0.0 {
        return Err(Error::ZeroVariance);
    }
    let (eigenvalues, components) = pairs.into_iter().unzip();
    Ok(PcaModel {
        means,
        components,
        eigenvalues,
    })
}

/// Projects centered pixel vectors onto the first `axes` components.
///
/// With `whiten`, axis `k` is divided by `√eigenvalue_k`; axes whose variance
/// is below the eigenvalue floor cannot be whitened.
pub fn pca_project(model: &PcaModel, maps: &HyperCube, axes: usize, whiten: bool) -> Result<HyperCube> {
    let m = model.dims();
    if maps.channels() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            actual: maps.channels(),
        });
    }
    if axes == 0 || axes > m {
        return Err(Error::InvalidParameter(format!(
            "PCA axes must be in 1..={m}, got {axes}"
        )));
    }
    let top = model.eigenvalues[0];
    let scale: Vec<f64> = model.eigenvalues[..axes]
        .iter()
        .map(|&e| {
            if !whiten {
                Ok(1.0)
            } else if e <= EIGEN_FLOOR * top {
                Err(Error::ZeroVariance)
            } else {
                Ok(1.0 / e.sqrt())
            }
        })
        .collect::<Result<_>>()?;
    let mut data = Vec::with_capacity(maps.pixel_count() * axes);
    for px in maps.pixels() {
        for (comp, s) in model.components[..axes].iter().zip(&scale) {
            let v: f64 = px
                .iter()
                .zip(&model.means)
                .zip(comp)
                .map(|((x, mu), c)| (x - mu) * c)
                .sum();
            data.push(v * s);
        }
    }
    let labels = (1..=axes).map(|a| format!("pc{a}")).collect();
    HyperCube::new(maps.width(), maps.height(), axes, data)?.with_channel_labels(labels)
}

/// Maps unwhitened scores back to parameter space.
pub fn pca_unproject(model: &PcaModel, scores: &HyperCube) -> Result<HyperCube> {
    let m = model.dims();
    let k = scores.channels();
    if k > m {
        return Err(Error::DimensionMismatch {
            expected: m,
            actual: k,
        });
    }
    let mut data = Vec::with_capacity(scores.pixel_count() * m);
    for s in scores.pixels() {
        let mut x = DVector::from_column_slice(&model.means);
        for (score, comp) in s.iter().zip(&model.components) {
            for (xi, ci) in x.iter_mut().zip(comp) {
                *xi += score * ci;
            }
        }
        data.extend(x.iter());
    }
    HyperCube::new(scores.width(), scores.height(), m, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_positive(w: usize, h: usize, l: usize, seed: u64) -> HyperCube {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        HyperCube::from_fn(w, h, l, |_, _, _| rng.random_range(0.5..10.0)).unwrap()
    }

    #[test]
    fn independence_cube_has_no_inertia() {
        let r = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let c = [0.5, 1.5, 2.5, 3.5];
        let cube = HyperCube::from_fn(3, 2, 4, |x, y, j| r[y * 3 + x] * c[j]).unwrap();
        let model = fca_fit(&cube, 3).unwrap();
        assert!(model.eigenvalues.iter().all(|&e| e.abs() < 1e-20));
        let f = fca_project(&model, &cube).unwrap();
        assert!(f.data().iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn two_by_two_hand_example() {
        // Counts [[2,0],[0,2]]: S = [[.5,-.5],[-.5,.5]], single singular value 1.
        let cube = HyperCube::new(2, 1, 2, vec![2.0, 0.0, 0.0, 2.0]).unwrap();
        let model = fca_fit(&cube, 1).unwrap();
        assert_eq!(model.eigenvalues.len(), 1);
        assert!((model.eigenvalues[0] - 1.0).abs() < 1e-12);
        let f = fca_project(&model, &cube).unwrap();
        assert!((f.data()[0] - 1.0).abs() < 1e-12);
        assert!((f.data()[1] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn channel_permutation_keeps_spectrum() {
        let cube = random_positive(5, 4, 6, 1);
        let perm = [3, 0, 5, 1, 4, 2];
        let permuted = cube.select_channels(&perm).unwrap();
        let a = fca_fit(&cube, 2).unwrap();
        let b = fca_fit(&permuted, 2).unwrap();
        for (x, y) in a.eigenvalues.iter().zip(&b.eigenvalues) {
            assert!((x - y).abs() < 1e-12, "{:?} vs {:?}", a.eigenvalues, b.eigenvalues);
        }
        for (k, &j) in perm.iter().enumerate() {
            assert_eq!(b.col_masses[k], a.col_masses[j]);
        }
    }

    #[test]
    fn masses_and_inertia() {
        let cube = random_positive(6, 5, 7, 2);
        let model = fca_fit(&cube, 6).unwrap();
        assert!((model.row_masses.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((model.col_masses.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(model.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
        assert!(model.eigenvalues.iter().all(|&e| e >= 0.0));
        let n = model.grand_total;
        let mut chi2 = 0.0;
        for (i, px) in cube.pixels().enumerate() {
            for (j, &v) in px.iter().enumerate() {
                let e = model.row_masses[i] * model.col_masses[j];
                chi2 += (v / n - e).powi(2) / e;
            }
        }
        assert!((model.total_inertia() - chi2).abs() < 1e-9);
    }

    #[test]
    fn factor_variance_and_centering() {
        let cube = random_positive(8, 6, 5, 3);
        let model = fca_fit(&cube, 4).unwrap();
        let f = fca_project(&model, &cube).unwrap();
        for k in 0..4 {
            let mean: f64 = f.pixels().zip(&model.row_masses).map(|(p, r)| r * p[k]).sum();
            let var: f64 = f.pixels().zip(&model.row_masses).map(|(p, r)| r * p[k] * p[k]).sum();
            assert!(mean.abs() < 1e-10);
            assert!((var - model.eigenvalues[k]).abs() < 1e-9);
        }
    }

    #[test]
    fn reconstruction_full_and_empty() {
        let cube = random_positive(6, 6, 5, 4);
        let model = fca_fit(&cube, 4).unwrap();
        let f = fca_project(&model, &cube).unwrap();
        let back = fca_reconstruct(&model, &f).unwrap();
        for (a, b) in back.data().iter().zip(cube.data()) {
            assert!((a - b).abs() / b.abs() < 1e-8);
        }
        let (m0, _, indep) = fca_filter(&cube, 0).unwrap();
        for (i, px) in indep.pixels().enumerate() {
            for (j, &v) in px.iter().enumerate() {
                let e = m0.grand_total * m0.row_masses[i] * m0.col_masses[j];
                assert!((v - e).abs() < 1e-9 * e);
            }
        }
    }

    #[test]
    fn fit_errors() {
        let zero_row = HyperCube::new(2, 1, 2, vec![0.0, 0.0, 1.0, 2.0]).unwrap();
        assert!(matches!(fca_fit(&zero_row, 0), Err(Error::ZeroRow(0))));
        let zero_col = HyperCube::new(2, 1, 2, vec![1.0, 0.0, 1.0, 0.0]).unwrap();
        assert!(matches!(fca_fit(&zero_col, 0), Err(Error::ZeroColumn(1))));
        let neg = HyperCube::new(2, 1, 2, vec![1.0, -1.0, 1.0, 2.0]).unwrap();
        assert!(matches!(fca_fit(&neg, 0), Err(Error::NegativeValue { .. })));
        let ok = random_positive(3, 3, 4, 5);
        assert!(fca_fit(&ok, 4).is_err());
        let m = fca_fit(&ok, 2).unwrap();
        let wrong = random_positive(3, 3, 5, 5);
        assert!(matches!(fca_project(&m, &wrong), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn model_json_round_trip() {
        let cube = random_positive(4, 4, 4, 6);
        let model = fca_fit(&cube, 2).unwrap();
        let json = serde_json::to_string(&model).unwrap();
        let back: FcaModel = serde_json::from_str(&json).unwrap();
        assert_eq!(back, model);
    }

    #[test]
    fn pca_diagonal_covariance() {
        // Axis-aligned data with variances 4 and 1: (±2, 0) and (0, ±1).
        let pts = [(2.0, 0.0), (-2.0, 0.0), (0.0, 1.0), (0.0, -1.0)];
        let data: Vec<f64> = pts.iter().flat_map(|&(a, b)| [a, b]).collect();
        let cube = HyperCube::new(4, 1, 2, data).unwrap();
        let model = pca_fit(&cube).unwrap();
        // Sample variances with denominator P - 1 = 3: 8/3 and 2/3, ratio 4:1.
        assert!((model.eigenvalues[0] / model.eigenvalues[1] - 4.0).abs() < 1e-12);
        assert!((model.components[0][0] - 1.0).abs() < 1e-12);
        assert!(model.components[0][1].abs() < 1e-12);
        assert!((model.components[1][1] - 1.0).abs() < 1e-12);
        assert_eq!(model.inertia_report(), vec!["80.00%", "20.00%"]);
    }

    #[test]
    fn pca_round_trip_and_orthonormality() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let cube = HyperCube::from_fn(10, 10, 3, |_, _, j| {
            let base: f64 = rng.random_range(-1.0..1.0);
            base * (j as f64 + 1.0) + rng.random_range(-0.3..0.3)
        })
        .unwrap();
        let model = pca_fit(&cube).unwrap();
        for a in 0..3 {
            for b in 0..3 {
                let d = dot(&model.components[a], &model.components[b]);
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!((d - expect).abs() < 1e-10);
            }
        }
        let scores = pca_project(&model, &cube, 3, false).unwrap();
        let back = pca_unproject(&model, &scores).unwrap();
        for (a, b) in back.data().iter().zip(cube.data()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn pca_zero_variance() {
        let cube = HyperCube::from_fn(4, 4, 2, |_, _, j| j as f64).unwrap();
        assert!(matches!(pca_fit(&cube), Err(Error::ZeroVariance)));
        let flat_axis = HyperCube::from_fn(4, 4, 2, |x, y, j| if j == 0 { (x + y) as f64 } else { 1.0 })
            .unwrap();
        let model = pca_fit(&flat_axis).unwrap();
        assert!(pca_project(&model, &flat_axis, 2, true).is_err());
        assert!(pca_project(&model, &flat_axis, 1, true).is_ok());
    }
}
