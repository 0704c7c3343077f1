//! Structural checks on a scaling basis: dimension of the CHFIF space,
//! orthogonality of translates, two-scale nesting, Riesz bounds and the
//! expansion of constants.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::basis::{gs_sources, ScalingBasis};
use crate::error::{Error, Result};
use crate::eval::refine;
use crate::ifs::{build_system, DataPoints, HiddenParams, Knots};
use crate::piecewise::{Component, Piecewise};

/// Depth of the sampling grid used by [`dimension_check`].
pub const DIMENSION_DEPTH: u32 = 6;
/// Singular values below this fraction of the largest count as zero.
pub const RANK_CUT: f64 = 1e-9;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DimensionReport {
    pub n: usize,
    /// Number of free data values, `2N + 2`.
    pub data_dim: usize,
    pub rank: usize,
    /// Dimension of the kernel of `data -> f1`.
    pub kernel: usize,
    /// Dimension of the space of first components (equal to `rank`).
    pub dimension: usize,
    pub singular_values: Vec<f64>,
    /// Data vectors `(y_0..y_N, z_0..z_N)` spanning the kernel.
    pub kernel_basis: Vec<Vec<f64>>,
    /// Whether the rank was unchanged under `trials` random changes of
    /// the data basis.
    pub trials_agree: bool,
}

fn numeric_rank(m: &DMatrix<f64>) -> (usize, Vec<f64>, DMatrix<f64>) {
    let svd = m.clone().svd(false, true);
    let sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let rank = sv.iter().filter(|&&s| s > RANK_CUT * smax).count();
    (rank, sv, svd.v_t.expect("v_t requested"))
}

/// Rank of the map from the `2N + 2` data values to depth-6 samples of
/// `f1`, on uniform knots.
pub fn dimension_check(params: &HiddenParams, trials: usize) -> Result<DimensionReport> {
    let n = params.n();
    let knots = Knots::uniform(n);
    let cols = 2 * n + 2;
    let mut columns = Vec::with_capacity(cols);
    for k in 0..cols {
        let s = build_system(knots.clone(), params.clone(), DataPoints::unit(n + 1, k))?;
        columns.push(refine(&s, DIMENSION_DEPTH)?.f1);
    }
    let rows = columns[0].len();
    let m = DMatrix::from_fn(rows, cols, |i, j| columns[j][i]);
    let (rank, singular_values, v_t) = numeric_rank(&m);

    let mut order: Vec<usize> = (0..singular_values.len()).collect();
    order.sort_by(|&a, &b| singular_values[b].total_cmp(&singular_values[a]));
    let kernel_basis = order[rank..].iter().map(|&k| v_t.row(k).iter().copied().collect()).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut trials_agree = true;
    for _ in 0..trials {
        let q = DMatrix::from_fn(cols, cols, |_, _| rng.random_range(-1.0..1.0));
        if q.clone().svd(false, false).singular_values.min() < 1e-6 {
            continue;
        }
        trials_agree &= numeric_rank(&(&m * q)).0 == rank;
    }
    Ok(DimensionReport {
        n,
        data_dim: cols,
        rank,
        kernel: cols - rank,
        dimension: rank,
        singular_values,
        kernel_basis,
        trials_agree,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MraConfig {
    /// Translate Gram matrices are computed for `|l| <= max_shift`.
    pub max_shift: i64,
    pub frame_draws: usize,
    pub frame_len: usize,
    pub seed: u64,
    /// Grid depth for the one quadrature in the Riesz estimate.
    pub quad_depth: u32,
}

impl Default for MraConfig {
    fn default() -> Self {
        Self {
            max_shift: 2,
            frame_draws: 100,
            frame_len: 16,
            seed: 1,
            quad_depth: 12,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TranslateGram {
    pub shift: i64,
    pub gram: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RieszReport {
    /// `||phi_N||` of the unnormalized two-piece function.
    pub norm_phi_n: f64,
    /// Smallest eigenvalue of the 2x2 matrix built from the plain integrals.
    pub tau_plain: f64,
    /// Smallest eigenvalue with square roots taken entrywise.
    pub tau_sqrt: f64,
    pub a_plain: f64,
    pub a_sqrt: f64,
    pub b: f64,
    /// Extremes of `||sum c_l phi_N(. - l)|| / ||c||` over the draws.
    pub frame_min: f64,
    pub frame_max: f64,
    pub frame_ok_plain: bool,
    pub frame_ok_sqrt: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstantsReport {
    /// Hidden values `z_1..z_{N-1}` used for the check.
    pub z: Vec<f64>,
    /// `C_i = 1 - r_i - s_i - sum_j u_{j,i} z_j`.
    pub c: Vec<f64>,
    /// `||f - (T_0 + T_N + sum C_i T_i + sum z_j T_{N+1+j})||` on `[0, 1]`.
    pub template_residual: f64,
    /// Largest difference between the coefficients predicted from `C`, `z`
    /// and the projections `<f, phi_k> / ||phi_k||^2`.
    pub coefficient_mismatch: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MraReport {
    /// Gram matrices of the normalized functions at each shift.
    pub translate_gram: Vec<TranslateGram>,
    pub max_offdiag: f64,
    /// Relative residual of the least-squares fit of `phi_i(x / N)` by
    /// translates of all `phi_j`.
    pub two_scale: Vec<f64>,
    pub riesz: RieszReport,
    pub constants: ConstantsReport,
}

/// Translates of `funcs` whose support meets `[lo, hi]`.
fn overlapping_translates(funcs: &[Piecewise], n: usize, lo: f64, hi: f64) -> Vec<Piecewise> {
    let mut out = Vec::new();
    for f in funcs {
        let Some((a, b)) = f.support(n) else { continue };
        let first = (lo - b).floor() as i64;
        let last = (hi - a).ceil() as i64;
        for l in first..=last {
            if a + (l as f64) < hi && b + (l as f64) > lo {
                out.push(f.shifted(n, l));
            }
        }
    }
    out
}

/// Least-squares fit of `g` by `cands`; returns `||g - fit||`.
pub fn fit_residual(basis: &ScalingBasis, g: &Piecewise, cands: &[Piecewise]) -> f64 {
    let sp = basis.space();
    let k = cands.len();
    let gram = DMatrix::from_fn(k, k, |i, j| cands[i].inner(sp, Component::First, &cands[j], Component::First));
    let rhs = DVector::from_fn(k, |i, _| cands[i].inner(sp, Component::First, g, Component::First));
    let coef = gram.svd(true, true).solve(&rhs, 1e-12).expect("svd computed with u and v");
    let mut r = g.clone();
    for (c, f) in coef.iter().zip(cands) {
        r = r.add_scaled(sp, f, -c);
    }
    r.norm_sq(sp, Component::First).max(0.0).sqrt()
}

/// Relative two-scale residual of `phi_{i+1}(x / N)` in `V_0`.
pub fn two_scale_residual(basis: &ScalingBasis, i: usize) -> f64 {
    let sp = basis.space();
    let n = basis.n();
    let hats: Vec<_> = (0..basis.len()).map(|j| basis.phi_hat(j)).collect();
    let g = hats[i].stretched(sp);
    let (lo, hi) = g.support(n).expect("nonzero function");
    let cands = overlapping_translates(&hats, n, lo, hi);
    fit_residual(basis, &g, &cands) / (n as f64).sqrt()
}

fn smallest_eig(m: [[f64; 2]; 2]) -> f64 {
    let tr = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let disc = ((m[0][0] - m[1][1]).powi(2) + 4.0 * m[0][1] * m[1][0]).max(0.0).sqrt();
    if tr > 0.0 {
        det / (0.5 * (tr + disc))
    } else {
        0.5 * (tr - disc)
    }
}

fn riesz(basis: &ScalingBasis, cfg: &MraConfig) -> Result<RieszReport> {
    let sp = basis.space();
    let n = basis.n();
    let t = basis.templates();
    let t0 = sp.coords(&t.data(0))?.0;
    let tn = sp.coords(&t.data(n))?.0;
    let n00 = sp.norm_sq(&t0);
    let nnn = sp.norm_sq(&tn);
    let norm_sq = n00 + nnn;
    let cs = sp.samples(cfg.quad_depth)?;
    let m = cs.intervals();
    let h = 1.0 / m as f64;
    let mut abs_cross = 0.0;
    for i in 0..=m {
        let w = if i == 0 || i == m { 0.5 * h } else { h };
        abs_cross += w * (cs.value(&t0, i) * cs.value(&tn, i)).abs();
    }
    let plain = [[n00 / norm_sq, abs_cross / norm_sq], [abs_cross / norm_sq, nnn / norm_sq]];
    let sqrt = [
        [n00.sqrt() / norm_sq, abs_cross.sqrt() / norm_sq],
        [abs_cross.sqrt() / norm_sq, nnn.sqrt() / norm_sq],
    ];
    let tau_plain = smallest_eig(plain);
    let tau_sqrt = smallest_eig(sqrt);

    let phi_n = basis.phi(basis.len() - 1);
    let norm_phi = basis.norm(basis.len() - 1);
    let scale = norm_phi / norm_sq.sqrt();
    let a_plain = tau_plain.max(0.0).sqrt() * norm_phi;
    let a_sqrt = tau_sqrt.max(0.0).sqrt() * norm_phi;
    let b = 3f64.sqrt() * norm_phi;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (mut fmin, mut fmax) = (f64::INFINITY, 0.0f64);
    for _ in 0..cfg.frame_draws {
        let c: Vec<f64> = (0..cfg.frame_len).map(|_| rng.random_range(-1.0..1.0)).collect();
        let cn = c.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut sum = Piecewise::zero();
        for (l, cl) in c.iter().enumerate() {
            sum = sum.add_scaled(sp, &phi_n.shifted(n, l as i64), *cl);
        }
        let ratio = sum.norm_sq(sp, Component::First).sqrt() / cn;
        fmin = fmin.min(ratio);
        fmax = fmax.max(ratio);
    }
    let slack = 1e-12 * b;
    Ok(RieszReport {
        norm_phi_n: norm_phi / scale,
        tau_plain,
        tau_sqrt,
        a_plain,
        a_sqrt,
        b,
        frame_min: fmin,
        frame_max: fmax,
        frame_ok_plain: a_plain <= fmin + slack && fmax <= b + slack,
        frame_ok_sqrt: a_sqrt <= fmin + slack && fmax <= b + slack,
    })
}

fn constants(basis: &ScalingBasis, seed: u64) -> Result<ConstantsReport> {
    let sp = basis.space();
    let n = basis.n();
    let t = basis.templates();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z: Vec<f64> = (1..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let c: Vec<f64> = (1..n)
        .map(|i| 1.0 - t.r[i - 1] - t.s[i - 1] - (1..n).map(|j| t.u[j][i - 1] * z[j - 1]).sum::<f64>())
        .collect();

    let mut data = DataPoints::new(vec![1.0; n + 1], vec![0.0; n + 1]);
    data.z[1..n].copy_from_slice(&z);
    let f = sp.coords(&data)?.0;
    let coord = |k: usize| sp.coords(&t.data(k)).map(|v| v.0);
    let mut e = coord(0)? + coord(n)?;
    for i in 1..n {
        e.axpy(c[i - 1], &coord(i)?, 1.0);
        e.axpy(z[i - 1], &coord(n + 1 + i)?, 1.0);
    }
    let template_residual = sp.norm_sq(&(&f - &e)).max(0.0).sqrt();

    // Source coefficients in Gram–Schmidt order, mapped to phi coefficients.
    let src = gs_sources(n);
    let a = DVector::from_iterator(src.len(), src.iter().map(|&k| if k < n { c[k - 1] } else { z[k - n - 2] }));
    let l = basis.gs_coeffs();
    let predicted = l
        .clone()
        .transpose()
        .solve_upper_triangular(&a)
        .ok_or_else(|| Error::Singular("Gram-Schmidt coefficients".into()))?;
    let mut mismatch = 0.0f64;
    for k in 0..src.len() {
        let phi = &basis.phi(k).pieces().next().expect("one piece").1.first;
        let proj = sp.inner(&f, phi) / basis.norm(k).powi(2);
        mismatch = mismatch.max((proj - predicted[k]).abs());
    }
    Ok(ConstantsReport {
        z,
        c,
        template_residual,
        coefficient_mismatch: mismatch,
    })
}

/// Runs all structural checks on `basis`.
pub fn verify_mra(basis: &ScalingBasis, cfg: &MraConfig) -> Result<MraReport> {
    let sp = basis.space();
    let n = basis.n();
    let hats: Vec<_> = (0..basis.len()).map(|j| basis.phi_hat(j)).collect();
    let mut translate_gram = Vec::new();
    let mut max_offdiag = 0.0f64;
    for l in -cfg.max_shift..=cfg.max_shift {
        let k = hats.len();
        let g = DMatrix::from_fn(k, k, |i, j| hats[i].inner(sp, Component::First, &hats[j].shifted(n, l), Component::First));
        for i in 0..k {
            for j in 0..k {
                if l != 0 || i != j {
                    max_offdiag = max_offdiag.max(g[(i, j)].abs());
                }
            }
        }
        translate_gram.push(TranslateGram {
            shift: l,
            gram: g.row_iter().map(|r| r.iter().copied().collect()).collect(),
        });
    }
    let two_scale = (0..basis.len()).map(|i| two_scale_residual(basis, i)).collect();
    Ok(MraReport {
        translate_gram,
        max_offdiag,
        two_scale,
        riesz: riesz(basis, cfg)?,
        constants: constants(basis, cfg.seed)?,
    })
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn sorted_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}
