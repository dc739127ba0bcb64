//! Generative Topographic Mapping.
//!
//! A uniform 2D latent grid `x_k` is mapped into data space through a
//! radial-basis network, `y(x) = φ(x)ᵀ W`, and each image is the centre of an
//! isotropic Gaussian with inverse variance `β`. EM fits `W` and `β`; a data
//! vector is projected to the responsibility-weighted mean of the grid.
//!
//! The M-step uses a fixed ridge `λ` on `W`. Together with the matching `β`
//! update this is EM on the penalized objective `L − (λβ/2)‖W‖²`, which is what
//! the training trace reports; with `λ = 0` it is the plain log-likelihood.

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::artifact::{read_bytes, write_bytes, BinReader, BinWriter};
use crate::features::Standardizer;
use crate::linalg::{pca, weighted_ridge_lstsq};
use crate::{Error, Result};

pub const BETA_MIN: f64 = 1e-8;
pub const BETA_MAX: f64 = 1e12;
pub const MODEL_MAGIC: &[u8; 4] = b"TSGM";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GtmConfig {
    pub latent_grid: (usize, usize),
    pub basis_grid: (usize, usize),
    /// Basis width as a multiple of the basis-centre spacing.
    pub width_factor: f64,
    pub lambda: f64,
    pub max_iter: usize,
    pub rel_tol: f64,
}

impl Default for GtmConfig {
    fn default() -> Self {
        GtmConfig {
            latent_grid: (20, 20),
            basis_grid: (6, 6),
            width_factor: 2.0,
            lambda: 1e-4,
            max_iter: 200,
            rel_tol: 1e-5,
        }
    }
}

/// `a × b` points spaced uniformly over `[-1, 1]²`, first axis fastest.
pub fn uniform_grid(a: usize, b: usize) -> DMatrix<f64> {
    let coord = |i: usize, n: usize| {
        if n == 1 {
            0.0
        } else {
            -1.0 + 2.0 * i as f64 / (n - 1) as f64
        }
    };
    let mut g = DMatrix::zeros(a * b, 2);
    for j in 0..b {
        for i in 0..a {
            g[(j * a + i, 0)] = coord(i, a);
            g[(j * a + i, 1)] = coord(j, b);
        }
    }
    g
}

/// Distance between adjacent centres of a [`uniform_grid`].
pub fn grid_spacing(a: usize, b: usize) -> f64 {
    match (a, b) {
        (1, 1) => 2.0,
        (1, n) | (n, 1) => 2.0 / (n - 1) as f64,
        (a, b) => (2.0 / (a - 1) as f64).min(2.0 / (b - 1) as f64),
    }
}

/// RBF activations of `points` plus a trailing bias column.
pub fn design_matrix(points: &DMatrix<f64>, centers: &DMatrix<f64>, sigma: f64) -> DMatrix<f64> {
    let m = centers.nrows();
    DMatrix::from_fn(points.nrows(), m + 1, |k, j| {
        if j == m {
            1.0
        } else {
            let dx = points[(k, 0)] - centers[(j, 0)];
            let dy = points[(k, 1)] - centers[(j, 1)];
            (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp()
        }
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GtmModel {
    pub latent_grid: (usize, usize),
    pub basis_grid: (usize, usize),
    /// `K × 2`.
    pub latent: DMatrix<f64>,
    /// `M × 2`.
    pub centers: DMatrix<f64>,
    pub sigma: f64,
    pub lambda: f64,
    /// `K × (M+1)`.
    pub phi: DMatrix<f64>,
    /// `(M+1) × D`.
    pub w: DMatrix<f64>,
    pub beta: f64,
}

/// `N × K` posterior probabilities; rows sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct Responsibilities(pub DMatrix<f64>);

impl GtmModel {
    pub fn k(&self) -> usize {
        self.latent.nrows()
    }

    pub fn m(&self) -> usize {
        self.centers.nrows()
    }

    pub fn dim(&self) -> usize {
        self.w.ncols()
    }

    /// `K × D` images `y(x_k)`.
    pub fn images(&self) -> DMatrix<f64> {
        &self.phi * &self.w
    }

    /// Image of an arbitrary latent point.
    pub fn map(&self, x: [f64; 2]) -> DVector<f64> {
        let p = DMatrix::from_row_slice(1, 2, &x);
        (design_matrix(&p, &self.centers, self.sigma) * &self.w)
            .row(0)
            .transpose()
    }

    /// Penalty term subtracted from the log-likelihood in the training objective.
    pub fn penalty(&self) -> f64 {
        0.5 * self.lambda * self.beta * self.w.norm_squared()
    }

    /// Responsibilities of the latent points for one data vector.
    pub fn posterior(&self, images: &DMatrix<f64>, t: &[f64]) -> Vec<f64> {
        let (mut logits, lse) = log_components(images, t, self.beta);
        for l in logits.iter_mut() {
            *l = (*l - lse).exp();
        }
        logits
    }

    /// Posterior-mean latent position of `t`.
    pub fn project(&self, t: &[f64]) -> Result<[f64; 2]> {
        if t.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: t.len(),
            });
        }
        Ok(self.project_with(&self.images(), t))
    }

    fn project_with(&self, images: &DMatrix<f64>, t: &[f64]) -> [f64; 2] {
        let r = self.posterior(images, t);
        let mut x = [0.0, 0.0];
        for (k, rk) in r.iter().enumerate() {
            x[0] += rk * self.latent[(k, 0)];
            x[1] += rk * self.latent[(k, 1)];
        }
        // guard against rounding just outside the grid hull
        x.map(|v| v.clamp(-1.0, 1.0))
    }

    /// Projects every row of `data`.
    pub fn project_all(&self, data: &DMatrix<f64>) -> Result<Vec<[f64; 2]>> {
        check_dim(self, data)?;
        let images = self.images();
        Ok((0..data.nrows())
            .into_par_iter()
            .map(|n| {
                let t: Vec<f64> = data.row(n).iter().copied().collect();
                self.project_with(&images, &t)
            })
            .collect())
    }

    pub fn to_bytes(&self, input_hash: &str, standardizer: &Standardizer) -> Vec<u8> {
        let mut w = BinWriter::new(MODEL_MAGIC, MODEL_VERSION);
        w.str(input_hash);
        w.u64(self.latent_grid.0 as u64)
            .u64(self.latent_grid.1 as u64);
        w.u64(self.basis_grid.0 as u64)
            .u64(self.basis_grid.1 as u64);
        w.u64(self.dim() as u64);
        w.f64(self.sigma).f64(self.lambda).f64(self.beta);
        for m in [&self.latent, &self.centers, &self.w] {
            for i in 0..m.nrows() {
                for j in 0..m.ncols() {
                    w.f64(m[(i, j)]);
                }
            }
        }
        w.f64s(&standardizer.mean).f64s(&standardizer.std);
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<SavedModel> {
        let mut r = BinReader::open(bytes, "gtm model", MODEL_MAGIC, MODEL_VERSION)?;
        let input_hash = r.str()?;
        let latent_grid = (r.usize()?, r.usize()?);
        let basis_grid = (r.usize()?, r.usize()?);
        let d = r.usize()?;
        let (sigma, lambda, beta) = (r.f64()?, r.f64()?, r.f64()?);
        let k = latent_grid.0 * latent_grid.1;
        let m = basis_grid.0 * basis_grid.1;
        let latent = DMatrix::from_row_slice(k, 2, &r.f64s(k * 2)?);
        let centers = DMatrix::from_row_slice(m, 2, &r.f64s(m * 2)?);
        let w = DMatrix::from_row_slice(m + 1, d, &r.f64s((m + 1) * d)?);
        let mean = r.f64s(d)?;
        let std = r.f64s(d)?;
        r.finish()?;
        let phi = design_matrix(&latent, &centers, sigma);
        Ok(SavedModel {
            model: GtmModel {
                latent_grid,
                basis_grid,
                latent,
                centers,
                sigma,
                lambda,
                phi,
                w,
                beta,
            },
            standardizer: Standardizer { mean, std },
            input_hash,
        })
    }
}

/// A model file: the model, the standardizer its inputs went through, and
/// the content hash of the feature matrix it was trained on.
#[derive(Debug, Clone, PartialEq)]
pub struct SavedModel {
    pub model: GtmModel,
    pub standardizer: Standardizer,
    pub input_hash: String,
}

impl SavedModel {
    pub fn save(&self, path: &Path) -> Result<()> {
        write_bytes(
            path,
            &self.model.to_bytes(&self.input_hash, &self.standardizer),
        )
    }

    pub fn load(path: &Path) -> Result<Self> {
        GtmModel::from_bytes(&read_bytes(path)?)
    }

    /// Standardize a raw feature vector and project it.
    pub fn project_raw(&self, raw: &[f64]) -> Result<[f64; 2]> {
        self.model.project(&self.standardizer.apply(raw))
    }
}

fn check_dim(model: &GtmModel, data: &DMatrix<f64>) -> Result<()> {
    if data.ncols() != model.dim() {
        return Err(Error::Dimension {
            expected: model.dim(),
            got: data.ncols(),
        });
    }
    Ok(())
}

/// Returns `-β/2 ‖y_k − t‖²` for every `k` and their log-sum-exp.
fn log_components(images: &DMatrix<f64>, t: &[f64], beta: f64) -> (Vec<f64>, f64) {
    let k = images.nrows();
    let mut logits = Vec::with_capacity(k);
    for i in 0..k {
        let mut d2 = 0.0;
        for (j, tj) in t.iter().enumerate() {
            let e = images[(i, j)] - tj;
            d2 += e * e;
        }
        logits.push(-0.5 * beta * d2);
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    (logits, lse)
}

/// Linear initialization: the images of the grid span the plane of the two
/// leading principal components, scaled by their standard deviations.
pub fn init(data: &DMatrix<f64>, cfg: &GtmConfig) -> Result<GtmModel> {
    let (n, d) = data.shape();
    let (k1, k2) = cfg.latent_grid;
    let (m1, m2) = cfg.basis_grid;
    if k1 == 0 || k2 == 0 || m1 == 0 || m2 == 0 {
        return Err(Error::Params("grid sizes must be positive".into()));
    }
    if !(cfg.width_factor > 0.0) || !(cfg.lambda >= 0.0) {
        return Err(Error::Params(
            "width factor must be positive and lambda non-negative".into(),
        ));
    }
    if d < 2 {
        return Err(Error::NotEnough {
            what: "data dimensions",
            needed: 2,
            got: d,
        });
    }
    if n <= d {
        return Err(Error::NotEnough {
            what: "data points (must exceed the dimension)",
            needed: d + 1,
            got: n,
        });
    }
    let (mean, vals, vecs) = pca(data);
    let max_var = (0..d)
        .map(|j| {
            let c = data.column(j);
            let mu = c.mean();
            c.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / n as f64
        })
        .collect::<Vec<_>>();
    let top = max_var.iter().copied().fold(0.0, f64::max);
    let live = max_var
        .iter()
        .filter(|&&v| top > 0.0 && v > 1e-12 * top)
        .count();
    if live < 3 {
        return Err(Error::NotEnough {
            what: "non-degenerate data dimensions",
            needed: 3,
            got: live,
        });
    }

    let latent = uniform_grid(k1, k2);
    let centers = uniform_grid(m1, m2);
    let sigma = cfg.width_factor * grid_spacing(m1, m2);
    let phi = design_matrix(&latent, &centers, sigma);
    let k = latent.nrows();

    let mut target = DMatrix::zeros(k, d);
    for i in 0..k {
        for j in 0..d {
            target[(i, j)] = mean[j]
                + latent[(i, 0)] * vals[0].sqrt() * vecs[(j, 0)]
                + latent[(i, 1)] * vals[1].sqrt() * vecs[(j, 1)];
        }
    }
    let svd = phi.clone().svd(true, true);
    let eps = 1e-12 * svd.singular_values.max();
    let w = svd
        .solve(&target, eps)
        .map_err(|e| Error::Params(e.to_string()))?;

    let images = &phi * &w;
    let mut neighbor = Vec::new();
    for j in 0..k2 {
        for i in 0..k1 {
            let a = j * k1 + i;
            if i + 1 < k1 {
                neighbor.push((images.row(a) - images.row(a + 1)).norm_squared());
            }
            if j + 1 < k2 {
                neighbor.push((images.row(a) - images.row(a + k1)).norm_squared());
            }
        }
    }
    let half_mean = if neighbor.is_empty() {
        0.0
    } else {
        0.5 * neighbor.iter().sum::<f64>() / neighbor.len() as f64
    };
    let third = vals.get(2).copied().unwrap_or(0.0);
    let inv_beta = third.max(half_mean);
    let beta = if inv_beta > 0.0 {
        (1.0 / inv_beta).clamp(BETA_MIN, BETA_MAX)
    } else {
        BETA_MAX
    };

    Ok(GtmModel {
        latent_grid: (k1, k2),
        basis_grid: (m1, m2),
        latent,
        centers,
        sigma,
        lambda: cfg.lambda,
        phi,
        w,
        beta,
    })
}

/// Responsibilities and log-likelihood of `data` under `model`.
pub fn e_step(model: &GtmModel, data: &DMatrix<f64>) -> Result<(Responsibilities, f64)> {
    check_dim(model, data)?;
    let (n, d) = data.shape();
    let k = model.k();
    let images = model.images();
    let rows: Vec<(Vec<f64>, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let t: Vec<f64> = data.row(i).iter().copied().collect();
            let (mut logits, lse) = log_components(&images, &t, model.beta);
            for l in logits.iter_mut() {
                *l = (*l - lse).exp();
            }
            (logits, lse)
        })
        .collect();
    let norm = 0.5 * d as f64 * (model.beta / (2.0 * PI)).ln() - (k as f64).ln();
    let mut ll = 0.0;
    let mut r = DMatrix::zeros(n, k);
    for (i, (row, lse)) in rows.into_iter().enumerate() {
        ll += lse + norm;
        for (j, v) in row.into_iter().enumerate() {
            r[(i, j)] = v;
        }
    }
    if !ll.is_finite() {
        return Err(Error::Params("log-likelihood is not finite".into()));
    }
    Ok((Responsibilities(r), ll))
}

/// New `W` and `β` from responsibilities.
pub fn m_step(model: &GtmModel, r: &Responsibilities, data: &DMatrix<f64>) -> Result<GtmModel> {
    check_dim(model, data)?;
    let r = &r.0;
    if r.ncols() != model.k() || r.nrows() != data.nrows() {
        return Err(Error::Dimension {
            expected: model.k(),
            got: r.ncols(),
        });
    }
    let (n, d) = data.shape();
    let g: Vec<f64> = r.column_iter().map(|c| c.sum()).collect();
    // responsibility-weighted mean of the data for each latent point
    let mut means = r.transpose() * data;
    for (k, mut row) in means.row_iter_mut().enumerate() {
        if g[k] > 0.0 {
            row /= g[k];
        }
    }
    let w = weighted_ridge_lstsq(&model.phi, &g, &means, model.lambda)?;
    let images = &model.phi * &w;
    let sse: f64 = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut s = 0.0;
            for k in 0..images.nrows() {
                let rk = r[(i, k)];
                if rk == 0.0 {
                    continue;
                }
                let mut d2 = 0.0;
                for j in 0..d {
                    let e = images[(k, j)] - data[(i, j)];
                    d2 += e * e;
                }
                s += rk * d2;
            }
            s
        })
        .collect::<Vec<_>>()
        .into_iter()
        .sum();
    let inv_beta = (sse + model.lambda * w.norm_squared()) / (n * d) as f64;
    let beta = if inv_beta > 0.0 {
        (1.0 / inv_beta).clamp(BETA_MIN, BETA_MAX)
    } else {
        BETA_MAX
    };
    Ok(GtmModel {
        w,
        beta,
        ..model.clone()
    })
}

/// EM until the relative objective improvement drops below `rel_tol` or
/// `max_iter` iterations ran. The trace holds the objective of the initial
/// model followed by one value per iteration.
pub fn train(
    model: GtmModel,
    data: &DMatrix<f64>,
    max_iter: usize,
    rel_tol: f64,
) -> Result<(GtmModel, Vec<f64>)> {
    if max_iter == 0 {
        return Err(Error::Params("max_iter must be at least 1".into()));
    }
    let (mut r, ll) = e_step(&model, data)?;
    let mut model = model;
    let mut trace = vec![ll - model.penalty()];
    for _ in 0..max_iter {
        let next = m_step(&model, &r, data)?;
        let (r_next, ll) = e_step(&next, data)?;
        let obj = ll - next.penalty();
        let prev = *trace.last().expect("non-empty");
        model = next;
        r = r_next;
        trace.push(obj);
        if (obj - prev) / prev.abs().max(f64::MIN_POSITIVE) < rel_tol {
            break;
        }
    }
    Ok((model, trace))
}

/// [`init`] followed by [`train`].
pub fn fit(data: &DMatrix<f64>, cfg: &GtmConfig) -> Result<(GtmModel, Vec<f64>)> {
    train(init(data, cfg)?, data, cfg.max_iter, cfg.rel_tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn wavy(n: usize, d: usize) -> DMatrix<f64> {
        DMatrix::from_fn(n, d, |i, j| {
            let t = i as f64 / n as f64;
            ((j + 1) as f64 * 3.1 * t).sin() + 0.3 * ((i * (j + 5)) as f64 * 0.77).cos()
        })
    }

    fn small_cfg() -> GtmConfig {
        GtmConfig {
            latent_grid: (5, 5),
            basis_grid: (3, 3),
            max_iter: 20,
            ..GtmConfig::default()
        }
    }

    #[test]
    fn shapes() {
        let m = init(&wavy(100, 4), &GtmConfig::default()).unwrap();
        assert_eq!(m.k(), 400);
        assert_eq!(m.phi.shape(), (400, 37));
        assert_eq!(m.w.shape(), (37, 4));
        let g = uniform_grid(20, 20);
        assert!(g.iter().all(|v| (-1.0..=1.0).contains(v)));
        assert_eq!(grid_spacing(9, 9), 0.25);
        let m = init(
            &wavy(100, 4),
            &GtmConfig {
                basis_grid: (9, 9),
                ..GtmConfig::default()
            },
        )
        .unwrap();
        assert_eq!(m.sigma, 0.5);
    }

    #[test]
    fn init_rejects_degenerate_data() {
        let flat = DMatrix::from_fn(50, 3, |i, j| {
            if j == 2 {
                1.0
            } else {
                i as f64 * (j + 1) as f64
            }
        });
        assert!(matches!(
            init(&flat, &small_cfg()),
            Err(Error::NotEnough { .. })
        ));
        assert!(init(&wavy(3, 4), &small_cfg()).is_err());
    }

    #[test]
    fn planar_data_initializes_in_plane() {
        // plane spanned by a and b through c, in 3D with all columns live
        let (a, b, c) = ([1.0, 2.0, -1.0], [0.5, -1.0, 0.3], [0.1, 0.2, 0.3]);
        let data = DMatrix::from_fn(200, 3, |i, j| {
            let s = (i as f64 * 0.37).sin();
            let t = (i as f64 * 0.11).cos();
            c[j] + s * a[j] + t * b[j]
        });
        let m = init(&data, &small_cfg()).unwrap();
        let normal = nalgebra::Vector3::from(a)
            .cross(&nalgebra::Vector3::from(b))
            .normalize();
        let y = m.images();
        for k in 0..m.k() {
            let off: f64 = (0..3).map(|j| (y[(k, j)] - c[j]) * normal[j]).sum();
            assert!(off.abs() <= 1e-6, "image {k} off plane by {off}");
        }
    }

    #[test]
    fn single_component_responsibilities() {
        let data = wavy(30, 3);
        let mut m = init(
            &data,
            &GtmConfig {
                latent_grid: (1, 1),
                ..small_cfg()
            },
        )
        .unwrap();
        m.beta = 3.0;
        let (r, _) = e_step(&m, &data).unwrap();
        assert!(r.0.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn equidistant_point_is_uniform_and_projects_to_origin() {
        let data = wavy(30, 3);
        let mut m = init(
            &data,
            &GtmConfig {
                latent_grid: (2, 2),
                ..small_cfg()
            },
        )
        .unwrap();
        // images at the corners of a square centred on the origin
        m.phi = DMatrix::identity(4, 4);
        m.w = DMatrix::from_row_slice(
            4,
            3,
            &[
                1.0, 1.0, 0.0, -1.0, 1.0, 0.0, 1.0, -1.0, 0.0, -1.0, -1.0, 0.0,
            ],
        );
        let r = m.posterior(&m.images(), &[0.0, 0.0, 5.0]);
        assert!(r.iter().all(|&v| (v - 0.25).abs() < 1e-15));
        let x = m.project(&[0.0, 0.0, 5.0]).unwrap();
        assert!(x[0].abs() < 1e-15 && x[1].abs() < 1e-15);
    }

    #[test]
    fn recovers_exact_weights() {
        let cfg = small_cfg();
        let data0 = wavy(80, 3);
        let base = init(&data0, &cfg).unwrap();
        let w_star = DMatrix::from_fn(base.m() + 1, 3, |i, j| ((i * 3 + j) as f64 * 0.7).sin());
        let mut truth = base.clone();
        truth.w = w_star.clone();
        truth.beta = 1e12;
        truth.lambda = 0.0;
        // one data point at every latent image
        let data = truth.images();
        let (r, _) = e_step(&truth, &data).unwrap();
        let next = m_step(&truth, &r, &data).unwrap();
        assert!(
            (&next.w - &w_star).amax() < 1e-6,
            "{}",
            (&next.w - &w_star).amax()
        );
    }

    #[test]
    fn huge_tolerance_runs_one_iteration() {
        let data = wavy(60, 4);
        let (_, trace) = train(init(&data, &small_cfg()).unwrap(), &data, 50, 1e300).unwrap();
        assert_eq!(trace.len(), 2);
        assert!(train(init(&data, &small_cfg()).unwrap(), &data, 0, 0.0).is_err());
    }

    #[test]
    fn projection_concentrates_with_large_beta() {
        let data = wavy(60, 4);
        let (mut m, _) = fit(&data, &small_cfg()).unwrap();
        m.beta = 1e9;
        let y = m.images();
        let spacing = grid_spacing(5, 5);
        for k in [0, 7, 12, 24] {
            let t: Vec<f64> = y.row(k).iter().copied().collect();
            let x = m.project(&t).unwrap();
            assert!((x[0] - m.latent[(k, 0)]).abs() <= spacing / 100.0);
            assert!((x[1] - m.latent[(k, 1)]).abs() <= spacing / 100.0);
        }
    }

    #[test]
    fn model_file_round_trip() {
        let data = wavy(60, 4);
        let (m, _) = fit(&data, &small_cfg()).unwrap();
        let st = Standardizer {
            mean: vec![0.5; 4],
            std: vec![2.0; 4],
        };
        let saved = GtmModel::from_bytes(&m.to_bytes("abc", &st)).unwrap();
        assert_eq!(saved.model, m);
        assert_eq!(saved.standardizer, st);
        assert_eq!(saved.input_hash, "abc");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn em_is_monotone_and_rows_normalized(seed in 0u64..1000, lambda in prop_oneof![Just(0.0), Just(1e-4), Just(1e-1)]) {
            let data = DMatrix::from_fn(60, 4, |i, j| {
                let h = crate::synth::noise_at(seed, (i * 4 + j) as u64);
                h + if j == 0 { (i as f64 * 0.1).sin() } else { 0.0 }
            });
            let cfg = GtmConfig { lambda, rel_tol: 0.0, max_iter: 15, ..small_cfg() };
            let model = init(&data, &cfg).unwrap();
            let (r, _) = e_step(&model, &data).unwrap();
            for row in r.0.row_iter() {
                prop_assert!((row.sum() - 1.0).abs() < 1e-12);
                prop_assert!(row.iter().all(|&v| v >= 0.0));
            }
            let (m, trace) = train(model, &data, cfg.max_iter, cfg.rel_tol).unwrap();
            for w in trace.windows(2) {
                prop_assert!(w[1] >= w[0] - 1e-9, "{} -> {}", w[0], w[1]);
            }
            for _ in 0..20 {
                let t = [3.0, -2.0, 0.5, 10.0];
                let x = m.project(&t).unwrap();
                prop_assert!(x.iter().all(|v| (-1.0..=1.0).contains(v)));
            }
        }
    }
}
