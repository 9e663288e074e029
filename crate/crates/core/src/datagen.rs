//! Synthetic labeled data with known relevant features.
//!
//! Two generators: independent Gaussian features where relevant features get
//! a class-dependent mean shift sized to hit a target Pearson correlation
//! with the label, and correlated features drawn from a fitted mean plus
//! low-rank factor, with the shift applied inside a region.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::dataset::Dataset;
use crate::error::{param_err, Error, Result};
use crate::rng::{stream, Domain, StreamRng};

/// A dataset together with the indices of its truly relevant features.
#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub dataset: Dataset,
    pub relevant: Vec<usize>,
}

impl SyntheticData {
    /// Shuffles feature columns; the relevant indices follow their columns.
    /// Returns the permutation used (new column j is old column perm[j]).
    pub fn shuffle_columns(&mut self, rng: &mut StreamRng) -> Result<Vec<usize>> {
        let f = self.dataset.feature_count();
        let mut perm: Vec<usize> = (0..f).collect();
        perm.shuffle(rng);
        self.dataset = self.dataset.permute_columns(&perm)?;
        let mut new_index = vec![0; f];
        for (new, &old) in perm.iter().enumerate() {
            new_index[old] = new;
        }
        let mut relevant: Vec<usize> = self.relevant.iter().map(|&old| new_index[old]).collect();
        relevant.sort_unstable();
        self.relevant = relevant;
        Ok(perm)
    }
}

/// Exactly floor(S/2) ones, the rest zeros, in shuffled order.
pub fn balanced_labels(sample_count: usize, rng: &mut StreamRng) -> Vec<u8> {
    let mut labels: Vec<u8> = (0..sample_count).map(|i| u8::from(i < sample_count / 2)).collect();
    labels.shuffle(rng);
    labels
}

/// Mean shift between classes that gives a feature with within-class
/// standard deviation `sd` a point-biserial correlation of `rho` with a
/// balanced binary label.
pub fn effect_size(rho: f64, sd: f64) -> f64 {
    2.0 * rho * sd / (1.0 - rho * rho).sqrt()
}

fn check_rho(rho: f64) -> Result<()> {
    if !(0.0..1.0).contains(&rho) {
        return param_err(format!("rho must be in [0, 1), got {rho}"));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndepGenConfig {
    pub sample_count: usize,
    pub feature_count: usize,
    pub relevant_count: usize,
    pub rho: f64,
    pub sigma: f64,
    pub rng_seed: u64,
}

impl IndepGenConfig {
    pub fn new(sample_count: usize, feature_count: usize, relevant_count: usize, rho: f64) -> Self {
        Self {
            sample_count,
            feature_count,
            relevant_count,
            rho,
            sigma: 5.0,
            rng_seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.rng_seed = seed;
        self
    }
}

/// Independent N(0, sigma^2) features; the last `relevant_count` features are
/// shifted by `effect_size(rho, sigma)` for class-1 samples.
pub fn gen_independent(config: &IndepGenConfig) -> Result<SyntheticData> {
    check_rho(config.rho)?;
    if !(config.sigma > 0.0 && config.sigma.is_finite()) {
        return param_err(format!("sigma must be positive, got {}", config.sigma));
    }
    if config.feature_count == 0 || config.relevant_count > config.feature_count {
        return param_err(format!(
            "need 0 <= relevant ({}) <= features ({}) and at least one feature",
            config.relevant_count, config.feature_count
        ));
    }
    if config.sample_count == 0 {
        return param_err("sample count must be positive");
    }
    let f = config.feature_count;
    let first_relevant = f - config.relevant_count;
    let shift = effect_size(config.rho, config.sigma);
    let mut rng = stream(config.rng_seed, Domain::Data, 0);
    let labels = balanced_labels(config.sample_count, &mut rng);
    let mut features = Vec::with_capacity(config.sample_count * f);
    for &y in &labels {
        for j in 0..f {
            let z: f64 = rng.sample(StandardNormal);
            let mean = if j >= first_relevant && y == 1 { shift } else { 0.0 };
            features.push(mean + config.sigma * z);
        }
    }
    Ok(SyntheticData {
        dataset: Dataset::new(features, labels, f)?,
        relevant: (first_relevant..f).collect(),
    })
}

/// Mean and SVD factor of a feature-by-observation source matrix.
#[derive(Debug, Clone)]
pub struct LatentModel {
    mean: DVector<f64>,
    /// U * Sigma from the thin SVD of the demeaned source.
    factor: DMatrix<f64>,
    /// Diagonal of the empirical covariance X X^T / M.
    diag_cov: Vec<f64>,
    source_columns: usize,
}

impl LatentModel {
    pub fn feature_count(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    pub fn diag_cov(&self) -> &[f64] {
        &self.diag_cov
    }

    pub fn source_columns(&self) -> usize {
        self.source_columns
    }

    /// (U Sigma)(U Sigma)^T / M.
    pub fn covariance(&self) -> DMatrix<f64> {
        &self.factor * self.factor.transpose() / self.source_columns as f64
    }
}

/// Fits mean and factor to `source` (features in rows, observations in columns).
pub fn fit_latent_model(source: &DMatrix<f64>) -> Result<LatentModel> {
    let (f, m) = source.shape();
    if f == 0 || m < 2 {
        return param_err(format!("source needs at least one feature and two columns, got {f}x{m}"));
    }
    if source.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("source matrix has non-finite entries".into()));
    }
    if source.iter().all(|&v| v == 0.0) {
        return Err(Error::Data("source matrix has rank 0".into()));
    }
    let mean = source.column_mean();
    let mut demeaned = source.clone();
    for mut col in demeaned.column_iter_mut() {
        col -= &mean;
    }
    let diag_cov = demeaned
        .row_iter()
        .map(|row| row.iter().map(|v| v * v).sum::<f64>() / m as f64)
        .collect();
    let svd = demeaned.svd(true, false);
    let u = svd
        .u
        .ok_or_else(|| Error::Numerical("SVD did not produce left singular vectors".into()))?;
    let factor = u * DMatrix::from_diagonal(&svd.singular_values);
    Ok(LatentModel {
        mean,
        factor,
        diag_cov,
        source_columns: m,
    })
}

/// Binary mask of relevant features.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Region {
    mask: Vec<bool>,
}

impl Region {
    pub fn empty(feature_count: usize) -> Self {
        Self {
            mask: vec![false; feature_count],
        }
    }

    pub fn from_indices(feature_count: usize, indices: &[usize]) -> Result<Self> {
        let mut mask = vec![false; feature_count];
        for &i in indices {
            if i >= feature_count {
                return param_err(format!("region index {i} out of range for {feature_count} features"));
            }
            mask[i] = true;
        }
        Ok(Self { mask })
    }

    /// The `size` cells of a `grid_size` x `grid_size` grid (row-major)
    /// nearest to `center`, ties broken by cell index. Contiguous for any size.
    pub fn patch(grid_size: usize, center: (usize, usize), size: usize) -> Result<Self> {
        let f = grid_size * grid_size;
        if size > f {
            return param_err(format!("region of {size} cells does not fit a {grid_size}x{grid_size} grid"));
        }
        let (cr, cc) = (center.0 as i64, center.1 as i64);
        let mut cells: Vec<(i64, usize)> = (0..f)
            .map(|i| {
                let dr = (i / grid_size) as i64 - cr;
                let dc = (i % grid_size) as i64 - cc;
                (dr * dr + dc * dc, i)
            })
            .collect();
        cells.sort_unstable();
        let indices: Vec<usize> = cells[..size].iter().map(|&(_, i)| i).collect();
        Self::from_indices(f, &indices)
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn indices(&self) -> Vec<usize> {
        self.mask.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| i).collect()
    }

    pub fn len(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Draws `sample_count` feature vectors `x = (U Sigma) v + mean` with
/// `v ~ N(0, I/M)`, balanced labels, and class-1 samples thinned by
/// `effect_size(rho, sqrt(diag_cov))` inside `region`.
pub fn gen_correlated(
    model: &LatentModel,
    region: &Region,
    rho: f64,
    sample_count: usize,
    rng_seed: u64,
) -> Result<SyntheticData> {
    check_rho(rho)?;
    let f = model.feature_count();
    if region.mask.len() != f {
        return param_err(format!("region covers {} features, model has {f}", region.mask.len()));
    }
    if sample_count == 0 {
        return param_err("sample count must be positive");
    }
    let mut rng = stream(rng_seed, Domain::Data, 0);
    let labels = balanced_labels(sample_count, &mut rng);
    let rank = model.factor.ncols();
    let scale = 1.0 / (model.source_columns as f64).sqrt();
    let latent = DMatrix::from_fn(rank, sample_count, |_, _| scale * rng.sample::<f64, _>(StandardNormal));
    let fields = &model.factor * latent;
    let shift: Vec<f64> = model
        .diag_cov
        .iter()
        .zip(&region.mask)
        .map(|(&var, &inside)| if inside { effect_size(rho, var.sqrt()) } else { 0.0 })
        .collect();
    let mut features = Vec::with_capacity(sample_count * f);
    for (s, &y) in labels.iter().enumerate() {
        let col = fields.column(s);
        for j in 0..f {
            let effect = if y == 1 { shift[j] } else { 0.0 };
            features.push(col[j] + model.mean[j] - effect);
        }
    }
    Ok(SyntheticData {
        dataset: Dataset::new(features, labels, f)?,
        relevant: region.indices(),
    })
}

/// Unit-L2-norm 1-D Gaussian kernel with offsets in [-radius, radius].
fn gaussian_kernel(smoothness: f64, grid_size: usize) -> Vec<f64> {
    if smoothness < 1e-6 {
        return vec![1.0];
    }
    // stay under half the torus so no cell is counted twice
    let radius = ((4.0 * smoothness).ceil() as usize).min(grid_size.saturating_sub(1) / 2);
    let mut k: Vec<f64> = (0..=2 * radius)
        .map(|i| {
            let d = i as f64 - radius as f64;
            (-d * d / (2.0 * smoothness * smoothness)).exp()
        })
        .collect();
    let norm = k.iter().map(|w| w * w).sum::<f64>().sqrt();
    k.iter_mut().for_each(|w| *w /= norm);
    k
}

fn blur_axis(field: &[f64], g: usize, kernel: &[f64], along_rows: bool) -> Vec<f64> {
    let radius = (kernel.len() / 2) as i64;
    let mut out = vec![0.0; g * g];
    for r in 0..g {
        for c in 0..g {
            let mut acc = 0.0;
            for (i, w) in kernel.iter().enumerate() {
                let off = i as i64 - radius;
                let (rr, cc) = if along_rows {
                    (r, (c as i64 + off).rem_euclid(g as i64) as usize)
                } else {
                    ((r as i64 + off).rem_euclid(g as i64) as usize, c)
                };
                acc += w * field[rr * g + cc];
            }
            out[r * g + c] = acc;
        }
    }
    out
}

/// Stand-in source matrix of smooth random fields on a `grid_size` x
/// `grid_size` torus: each column is white noise blurred by a Gaussian of
/// bandwidth `smoothness` cells (unit marginal variance, scaled by 0.5) plus
/// a fixed smooth mean surface.
pub fn make_synthetic_source(grid_size: usize, smoothness: f64, columns: usize, rng_seed: u64) -> Result<DMatrix<f64>> {
    if grid_size == 0 || columns < 2 {
        return param_err("need a nonempty grid and at least two columns");
    }
    if !(smoothness >= 0.0 && smoothness.is_finite()) {
        return param_err(format!("smoothness must be nonnegative, got {smoothness}"));
    }
    let g = grid_size;
    let f = g * g;
    let kernel = gaussian_kernel(smoothness, g);
    let tau = std::f64::consts::TAU;
    let surface: Vec<f64> = (0..f)
        .map(|i| {
            let (r, c) = ((i / g) as f64 / g as f64, (i % g) as f64 / g as f64);
            2.5 + 0.3 * (tau * r).sin() * (tau * c).cos()
        })
        .collect();
    let mut source = DMatrix::zeros(f, columns);
    for m in 0..columns {
        let mut rng = stream(rng_seed, Domain::Source, m as u64);
        let noise: Vec<f64> = (0..f).map(|_| rng.sample(StandardNormal)).collect();
        let smooth = blur_axis(&blur_axis(&noise, g, &kernel, true), g, &kernel, false);
        for i in 0..f {
            source[(i, m)] = surface[i] + 0.5 * smooth[i];
        }
    }
    Ok(source)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::pearson;

    #[test]
    fn null_independent_has_no_relevant_features() {
        let d = gen_independent(&IndepGenConfig::new(40, 6, 0, 0.5).with_seed(1)).unwrap();
        assert!(d.relevant.is_empty());
        assert_eq!(d.dataset.feature_count(), 6);
        assert_eq!(d.dataset.labels().iter().filter(|&&y| y == 1).count(), 20);
    }

    #[test]
    fn relevant_features_sit_at_the_tail() {
        let d = gen_independent(&IndepGenConfig::new(11, 10, 3, 0.4).with_seed(2)).unwrap();
        assert_eq!(d.relevant, vec![7, 8, 9]);
        assert_eq!(d.dataset.labels().iter().filter(|&&y| y == 1).count(), 5);
    }

    #[test]
    fn rho_zero_means_no_shift_and_rho_one_is_rejected() {
        assert_eq!(effect_size(0.0, 5.0), 0.0);
        assert!(gen_independent(&IndepGenConfig::new(10, 3, 1, 1.0)).is_err());
        assert!(gen_independent(&IndepGenConfig::new(10, 3, 4, 0.5)).is_err());
    }

    #[test]
    fn independent_generation_is_deterministic() {
        let cfg = IndepGenConfig::new(30, 5, 2, 0.3).with_seed(9);
        assert_eq!(gen_independent(&cfg).unwrap().dataset, gen_independent(&cfg).unwrap().dataset);
    }

    #[test]
    fn shuffle_columns_tracks_truth() {
        let mut d = gen_independent(&IndepGenConfig::new(20, 8, 2, 0.9).with_seed(3)).unwrap();
        let before = d.clone();
        let perm = d.shuffle_columns(&mut stream(5, Domain::Columns, 0)).unwrap();
        for &r in &d.relevant {
            let old = perm[r];
            assert!(before.relevant.contains(&old));
            for s in 0..20 {
                assert_eq!(d.dataset.value(s, r), before.dataset.value(s, old));
            }
        }
    }

    #[test]
    fn latent_model_of_identical_columns() {
        let col = [1.0, -2.0, 3.5];
        let source = DMatrix::from_fn(3, 4, |i, _| col[i]);
        let model = fit_latent_model(&source).unwrap();
        assert_eq!(model.mean().as_slice(), &col);
        assert!(model.factor().iter().all(|&v| v.abs() < 1e-12));
        assert!(model.diag_cov().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn latent_model_rejects_degenerate_sources() {
        assert!(fit_latent_model(&DMatrix::zeros(3, 4)).is_err());
        assert!(fit_latent_model(&DMatrix::from_element(3, 1, 1.0)).is_err());
        let mut m = DMatrix::from_element(2, 3, 1.0);
        m[(0, 0)] = f64::INFINITY;
        assert!(fit_latent_model(&m).is_err());
    }

    #[test]
    fn latent_model_reproduces_small_covariance() {
        let mut rng = stream(11, Domain::Source, 0);
        let source = DMatrix::from_fn(3, 5, |_, _| rng.sample::<f64, _>(StandardNormal));
        let model = fit_latent_model(&source).unwrap();
        let mut x = source.clone();
        let mean = source.column_mean();
        for mut c in x.column_iter_mut() {
            c -= &mean;
        }
        let direct = &x * x.transpose() / 5.0;
        let cov = model.covariance();
        for (a, b) in cov.iter().zip(direct.iter()) {
            assert!((a - b).abs() < 1e-10);
        }
        assert!(model.diag_cov().iter().all(|&v| v >= 0.0));
        for i in 0..3 {
            assert!((model.diag_cov()[i] - direct[(i, i)]).abs() < 1e-12);
        }
    }

    #[test]
    fn region_patch_is_centered_and_sized() {
        let r = Region::patch(8, (4, 4), 5).unwrap();
        assert_eq!(r.len(), 5);
        assert!(r.mask()[4 * 8 + 4]);
        assert!(Region::patch(3, (1, 1), 10).is_err());
        assert!(Region::from_indices(4, &[4]).is_err());
        assert!(Region::empty(4).is_empty());
    }

    #[test]
    fn correlated_with_zero_rho_ignores_region() {
        let source = make_synthetic_source(4, 1.0, 10, 1).unwrap();
        let model = fit_latent_model(&source).unwrap();
        let region = Region::patch(4, (2, 2), 3).unwrap();
        let a = gen_correlated(&model, &region, 0.0, 20, 5).unwrap();
        let b = gen_correlated(&model, &Region::empty(16), 0.0, 20, 5).unwrap();
        assert_eq!(a.dataset, b.dataset);
        assert_eq!(a.relevant, region.indices());
        assert!(gen_correlated(&model, &region, 1.0, 20, 5).is_err());
        assert!(gen_correlated(&model, &Region::empty(5), 0.2, 20, 5).is_err());
    }

    fn neighbor_correlation(source: &DMatrix<f64>, g: usize) -> f64 {
        let mut total = 0.0;
        let mut n = 0;
        for r in 0..g {
            for c in 0..g - 1 {
                let a: Vec<f64> = source.row(r * g + c).iter().copied().collect();
                let b: Vec<f64> = source.row(r * g + c + 1).iter().copied().collect();
                total += pearson(&a, &b);
                n += 1;
            }
        }
        total / n as f64
    }

    #[test]
    fn source_smoothness_controls_neighbor_correlation() {
        let rough = make_synthetic_source(10, 0.0, 400, 3).unwrap();
        assert!(neighbor_correlation(&rough, 10).abs() < 0.05);
        let smooth = make_synthetic_source(10, 4.0, 400, 3).unwrap();
        assert!(neighbor_correlation(&smooth, 10) > 0.9);
    }

    #[test]
    fn source_is_deterministic() {
        let a = make_synthetic_source(6, 1.5, 4, 8).unwrap();
        let b = make_synthetic_source(6, 1.5, 4, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, make_synthetic_source(6, 1.5, 4, 9).unwrap());
    }
}
