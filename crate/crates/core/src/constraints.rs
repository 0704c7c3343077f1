//! Search for parameters that make the hidden templates orthogonal to the
//! end templates (`zeta_i = eta_i = 0`).
//!
//! For fixed `alpha`, `gamma` the defects `zeta_i`, `eta_i` are linear in
//! `beta`, so `beta = 0` is always a (useless) root. The search therefore
//! works with the defects divided by `|beta|`, which only depend on the
//! direction of `beta`.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::basis::{ScalingBasis, Templates};
use crate::error::{Error, Result};
use crate::ifs::HiddenParams;
use crate::space::FunctionSpace;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchConfig {
    pub n: usize,
    /// First starting point; random starts follow if it fails.
    pub start: Option<HiddenParams>,
    pub seed: u64,
    /// Number of random starts.
    pub starts: usize,
    pub max_iter: usize,
    /// Target for the largest absolute residual.
    pub tol: f64,
    /// Central-difference step for the Jacobian.
    pub fd_step: f64,
    /// Also require `<T_0, T_N> = 0`, needed for orthogonal translates of
    /// the two-piece scaling function.
    pub end_orthogonality: bool,
    /// Random starts are drawn inside `|alpha|, |gamma|, |beta| + |gamma| < bound`.
    pub bound: f64,
}

impl SearchConfig {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            start: None,
            seed: 0,
            starts: 20,
            max_iter: 200,
            tol: 1e-12,
            fd_step: 1e-6,
            end_orthogonality: false,
            bound: 0.95,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReport {
    pub params: HiddenParams,
    /// `zeta_1.., eta_1.., [<T_0, T_N>]`.
    pub residuals: Vec<f64>,
    pub max_residual: f64,
    pub iterations: usize,
    /// 0 for the configured start, `k` for the `k`-th random start.
    pub start_index: usize,
}

/// `zeta_1..zeta_{N-1}, eta_1..eta_{N-1}` and optionally `<T_0, T_N>`.
pub fn constraint_residuals(params: &HiddenParams, end_orthogonality: bool) -> Result<Vec<f64>> {
    let space = FunctionSpace::new(params.clone())?;
    let t = Templates::solve(&space)?;
    let (mut r, eta) = t.zeta_eta(&space)?;
    r.extend(eta);
    if end_orthogonality {
        let n = space.n();
        let t0 = space.coords(&t.data(0))?.0;
        let tn = space.coords(&t.data(n))?.0;
        r.push(space.inner(&t0, &tn));
    }
    Ok(r)
}

fn pack(p: &HiddenParams) -> DVector<f64> {
    DVector::from_iterator(3 * p.n(), p.alpha.iter().chain(&p.beta).chain(&p.gamma).copied())
}

fn unpack(x: &DVector<f64>, n: usize) -> HiddenParams {
    HiddenParams::new(x.rows(0, n).iter().copied().collect(), x.rows(n, n).iter().copied().collect(), x.rows(2 * n, n).iter().copied().collect())
}

/// Strict contractivity with a small margin, so that central differences
/// stay admissible.
fn inside(p: &HiddenParams) -> bool {
    let b = 1.0 - 1e-4;
    (0..p.n()).all(|j| p.alpha[j].abs() < b && p.gamma[j].abs() < b && p.beta[j].abs() + p.gamma[j].abs() < b)
}

fn beta_norm(p: &HiddenParams) -> f64 {
    p.beta.iter().map(|b| b * b).sum::<f64>().sqrt()
}

/// Residuals seen by the search: the `beta`-linear defects scaled by
/// `1 / |beta|`.
fn scaled_residuals(p: &HiddenParams, cfg: &SearchConfig) -> Option<DVector<f64>> {
    let bn = beta_norm(p);
    if bn < 1e-8 || !inside(p) {
        return None;
    }
    let r = constraint_residuals(p, cfg.end_orthogonality).ok()?;
    let m = 2 * (cfg.n - 1);
    Some(DVector::from_iterator(r.len(), r.iter().enumerate().map(|(i, v)| if i < m { v / bn } else { *v })))
}

fn pinv_step(j: &DMatrix<f64>, r: &DVector<f64>) -> DVector<f64> {
    let svd = j.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let u = svd.u.as_ref().expect("u requested");
    let vt = svd.v_t.as_ref().expect("v_t requested");
    let mut step = DVector::zeros(j.ncols());
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > 1e-12 * smax {
            let coef = u.column(k).dot(r) / s;
            step.axpy(-coef, &vt.row(k).transpose(), 1.0);
        }
    }
    step
}

/// Damped Gauss–Newton from one start. Returns the final point, its scaled
/// residual and the iteration count.
fn descend(start: &HiddenParams, cfg: &SearchConfig) -> Option<(HiddenParams, f64, usize)> {
    let n = cfg.n;
    let mut x = pack(start);
    let mut r = scaled_residuals(start, cfg)?;
    let done = |r: &DVector<f64>, p: &HiddenParams| -> bool {
        let bn = beta_norm(p).max(1.0);
        r.amax() * bn <= cfg.tol && r.amax() <= cfg.tol
    };
    for it in 0..cfg.max_iter {
        let p = unpack(&x, n);
        if done(&r, &p) {
            return Some((p, r.amax(), it));
        }
        let mut jac = DMatrix::zeros(r.len(), x.len());
        for k in 0..x.len() {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[k] += cfg.fd_step;
            xm[k] -= cfg.fd_step;
            let rp = scaled_residuals(&unpack(&xp, n), cfg)?;
            let rm = scaled_residuals(&unpack(&xm, n), cfg)?;
            jac.set_column(k, &((rp - rm) / (2.0 * cfg.fd_step)));
        }
        let step = pinv_step(&jac, &r);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let xn = &x + &step * t;
            if let Some(rn) = scaled_residuals(&unpack(&xn, n), cfg) {
                if rn.norm() < r.norm() {
                    x = xn;
                    r = rn;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            let p = unpack(&x, n);
            return Some((p, r.amax(), it));
        }
    }
    let p = unpack(&x, n);
    Some((p, r.amax(), cfg.max_iter))
}

/// Finds admissible parameters with `zeta_i = eta_i = 0` (and `<T_0, T_N> =
/// 0` when requested) whose templates give a full scaling basis.
pub fn solve_constraints(cfg: &SearchConfig) -> Result<SolveReport> {
    if cfg.n < 2 {
        return Err(Error::Unsupported("constraint search needs N >= 2".into()));
    }
    if let Some(s) = &cfg.start {
        s.validate(cfg.n)?;
        if !s.is_nondegenerate() {
            return Err(Error::Degenerate("alpha_j + beta_j = gamma_j for every j".into()));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut best = f64::INFINITY;
    let mut best_iters = 0;
    let starts = cfg.start.iter().cloned().map(|s| (0, s)).chain((1..=cfg.starts).map(|k| {
        let mut p = HiddenParams::random(cfg.n, 0.8 * cfg.bound, &mut rng);
        for b in p.beta.iter_mut() {
            *b *= 0.9;
        }
        (k, p)
    }));
    for (k, start) in starts {
        if !start.is_nondegenerate() {
            continue;
        }
        let Some((p, _, iters)) = descend(&start, cfg) else {
            continue;
        };
        let raw = constraint_residuals(&p, cfg.end_orthogonality)?;
        let max_residual = raw.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let scaled = scaled_residuals(&p, cfg).map(|r| r.amax()).unwrap_or(f64::INFINITY);
        if scaled < best {
            best = scaled;
            best_iters = iters;
        }
        let ok = max_residual <= cfg.tol && scaled <= cfg.tol;
        let degenerate = (0..cfg.n).all(|j| (p.alpha[j] + p.beta[j] - p.gamma[j]).abs() < 1e-9);
        if ok && !degenerate && ScalingBasis::build(p.clone(), false).is_ok() {
            return Ok(SolveReport {
                params: p,
                residuals: raw,
                max_residual,
                iterations: iters,
                start_index: k,
            });
        }
    }
    Err(Error::NoConvergence {
        best_residual: best,
        iterations: best_iters,
    })
}
