//! Projection of sampled signals onto `V_k` and the two-channel split
//! `V_{k-1} -> V_k (+) W_k`.
//!
//! Level `k` uses the functions `N^{-k/2} phi_i(N^{-k} x - l)` with
//! normalized `phi_i`, so every level has the same coefficient scale. A
//! larger `k` is coarser.
//!
//! With orthonormal fine functions `e_{i,m}` and coarse functions `b_{j,l}`
//! the filters are
//!
//! ```text
//! H_ji(p) = <phi_j, sqrt(N) phi_i(N . - p)>
//! G_ji(p) = <psi_j, sqrt(N) phi_i(N . - p)>
//! ```
//!
//! and `v_l = sum_p H(p) c_{N l + p}`; reconstruction applies the
//! transposes.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::ScalingBasis;
use crate::error::{Error, Result};
use crate::piecewise::{Component, Piecewise};
use crate::wavelet::{assemble_psi, WaveletSolution, WAVELETS};

/// Coefficient vectors keyed by shift.
pub type Coeffs = BTreeMap<i64, Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalCoefficients {
    pub level: i32,
    /// `K_{l,i}` for `N^{-k/2} phi_i(N^{-k} x - l)`.
    pub scaling: Coeffs,
    /// Wavelet coefficients at the same level, if split.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wavelet: Option<Coeffs>,
}

impl SignalCoefficients {
    pub fn new(level: i32, scaling: Coeffs) -> Self {
        Self {
            level,
            scaling,
            wavelet: None,
        }
    }

    /// Sum of squares over both parts.
    pub fn energy(&self) -> f64 {
        energy(&self.scaling) + self.wavelet.as_ref().map_or(0.0, energy)
    }
}

pub fn energy(c: &Coeffs) -> f64 {
    c.values().flatten().map(|v| v * v).sum()
}

/// Largest entrywise difference, treating missing shifts as zero.
pub fn max_difference(a: &Coeffs, b: &Coeffs) -> f64 {
    let mut m = 0.0f64;
    for k in a.keys().chain(b.keys()) {
        let (x, y) = (a.get(k), b.get(k));
        let len = x.map_or(0, Vec::len).max(y.map_or(0, Vec::len));
        for i in 0..len {
            let u = x.and_then(|v| v.get(i)).copied().unwrap_or(0.0);
            let w = y.and_then(|v| v.get(i)).copied().unwrap_or(0.0);
            m = m.max((u - w).abs());
        }
    }
    m
}

/// Two-channel filter bank with matrix taps.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FilterBank {
    pub n: usize,
    /// Number of scaling functions (width of the input vectors).
    pub r: usize,
    /// `H(p)`, `r x r`.
    pub lowpass: Vec<(i64, DMatrix<f64>)>,
    /// `G(p)`, `q x r`.
    pub highpass: Vec<(i64, DMatrix<f64>)>,
}

impl FilterBank {
    pub fn new(n: usize, lowpass: Vec<(i64, DMatrix<f64>)>, highpass: Vec<(i64, DMatrix<f64>)>) -> Result<Self> {
        let r = lowpass.first().map(|(_, m)| m.ncols()).ok_or_else(|| Error::Shape("empty lowpass filter".into()))?;
        let q = highpass.first().map_or(0, |(_, m)| m.nrows());
        for (_, m) in &lowpass {
            if m.shape() != (r, r) {
                return Err(Error::Shape(format!("lowpass tap is {:?}, expected ({r}, {r})", m.shape())));
            }
        }
        for (_, m) in &highpass {
            if m.shape() != (q, r) {
                return Err(Error::Shape(format!("highpass tap is {:?}, expected ({q}, {r})", m.shape())));
            }
        }
        Ok(Self { n, r, lowpass, highpass })
    }

    /// Filters from a scaling basis and, for `N = 2`, its wavelets.
    pub fn from_basis(basis: &ScalingBasis, wavelets: Option<&WaveletSolution>) -> Result<Self> {
        let n = basis.n();
        let sp = basis.space();
        let r = basis.len();
        let phis: Vec<_> = (0..r).map(|i| basis.phi_hat(i)).collect();
        let psis: Vec<Piecewise> = match wavelets {
            Some(sol) => (1..=WAVELETS).map(|i| assemble_psi(sol, basis, i)).collect::<Result<_>>()?,
            None => Vec::new(),
        };
        let fine = |i: usize, p: i64| -> Piecewise {
            let f = phis[i].compressed();
            f.shifted_cells(p * (n as i64).pow(phis[i].level())).scaled((n as f64).sqrt())
        };
        let taps = |coarse: &[Piecewise]| -> Vec<(i64, DMatrix<f64>)> {
            if coarse.is_empty() {
                return Vec::new();
            }
            let (lo, hi) = coarse.iter().filter_map(|f| f.support(n)).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), (x, y)| (a.min(x), b.max(y)));
            let width = phis.iter().filter_map(|f| f.support(n)).fold(0.0f64, |m, (_, b)| m.max(b));
            let ps = ((n as f64 * lo - width).floor() as i64)..=((n as f64 * hi).ceil() as i64);
            ps.into_par_iter()
                .filter_map(|p| {
                    let m = DMatrix::from_fn(coarse.len(), r, |j, i| coarse[j].inner(sp, Component::First, &fine(i, p), Component::First));
                    (m.amax() > 0.0).then_some((p, m))
                })
                .collect()
        };
        let lowpass = taps(&phis);
        let highpass = taps(&psis);
        Self::new(n, lowpass, highpass)
    }

    pub fn wavelet_count(&self) -> usize {
        self.highpass.first().map_or(0, |(_, m)| m.nrows())
    }

    /// Largest deviation of `sum_p F(p) F'(p + N l)^T` from `delta`, over
    /// both channels: zero for an orthonormal split.
    pub fn orthogonality_defect(&self) -> f64 {
        let n = self.n as i64;
        let mut worst = 0.0f64;
        let chans = [&self.lowpass, &self.highpass];
        for (a, fa) in chans.iter().enumerate() {
            for (b, fb) in chans.iter().enumerate() {
                if fa.is_empty() || fb.is_empty() {
                    continue;
                }
                let span = fa.iter().chain(fb.iter()).map(|(p, _)| p.abs()).max().unwrap_or(0) / n + 2;
                for l in -span..=span {
                    let mut acc = DMatrix::zeros(fa[0].1.nrows(), fb[0].1.nrows());
                    for (p, ma) in fa.iter() {
                        if let Some((_, mb)) = fb.iter().find(|(q, _)| *q == p + n * l) {
                            acc += ma * mb.transpose();
                        }
                    }
                    if a == b && l == 0 {
                        acc -= DMatrix::identity(acc.nrows(), acc.ncols());
                    }
                    worst = worst.max(acc.amax());
                }
            }
        }
        worst
    }

    fn analyze(&self, taps: &[(i64, DMatrix<f64>)], c: &Coeffs) -> Coeffs {
        let n = self.n as i64;
        let mut out: BTreeMap<i64, DVector<f64>> = BTreeMap::new();
        for (&m, v) in c {
            let v = DVector::from_column_slice(v);
            for (p, h) in taps {
                if (m - p).rem_euclid(n) == 0 {
                    let l = (m - p).div_euclid(n);
                    let e = out.entry(l).or_insert_with(|| DVector::zeros(h.nrows()));
                    *e += h * &v;
                }
            }
        }
        out.into_iter().map(|(k, v)| (k, v.as_slice().to_vec())).collect()
    }

    fn synthesize(&self, taps: &[(i64, DMatrix<f64>)], v: &Coeffs, out: &mut BTreeMap<i64, DVector<f64>>) {
        let n = self.n as i64;
        for (&l, x) in v {
            let x = DVector::from_column_slice(x);
            for (p, h) in taps {
                let e = out.entry(n * l + p).or_insert_with(|| DVector::zeros(self.r));
                *e += h.transpose() * &x;
            }
        }
    }

    fn check_width(&self, c: &Coeffs, w: usize, what: &'static str) -> Result<()> {
        match c.values().find(|v| v.len() != w) {
            Some(v) => Err(Error::LengthMismatch {
                what,
                expected: w,
                found: v.len(),
            }),
            None => Ok(()),
        }
    }

    /// Level `k - 1` scaling coefficients to level `k` scaling and wavelet
    /// coefficients.
    pub fn decompose(&self, c: &SignalCoefficients) -> Result<SignalCoefficients> {
        if self.highpass.is_empty() {
            return Err(Error::Unsupported("filter bank has no wavelet channel".into()));
        }
        self.check_width(&c.scaling, self.r, "scaling coefficients")?;
        Ok(SignalCoefficients {
            level: c.level + 1,
            scaling: self.analyze(&self.lowpass, &c.scaling),
            wavelet: Some(self.analyze(&self.highpass, &c.scaling)),
        })
    }

    /// Inverse of [`Self::decompose`].
    pub fn reconstruct(&self, c: &SignalCoefficients) -> Result<SignalCoefficients> {
        self.check_width(&c.scaling, self.r, "scaling coefficients")?;
        let mut out = BTreeMap::new();
        self.synthesize(&self.lowpass, &c.scaling, &mut out);
        if let Some(w) = &c.wavelet {
            self.check_width(w, self.wavelet_count(), "wavelet coefficients")?;
            self.synthesize(&self.highpass, w, &mut out);
        }
        Ok(SignalCoefficients::new(c.level - 1, out.into_iter().map(|(k, v)| (k, v.as_slice().to_vec())).collect()))
    }

    /// `levels` successive splits; returns the wavelet parts finest first
    /// and the final coarse approximation.
    pub fn multilevel(&self, c: &SignalCoefficients, levels: usize) -> Result<MultilevelCoefficients> {
        let mut cur = SignalCoefficients::new(c.level, c.scaling.clone());
        let mut details = Vec::with_capacity(levels);
        for _ in 0..levels {
            let mut d = self.decompose(&cur)?;
            details.push(SignalCoefficients {
                level: d.level,
                scaling: d.wavelet.take().expect("decompose fills the wavelet part"),
                wavelet: None,
            });
            cur = d;
        }
        Ok(MultilevelCoefficients {
            approximation: cur,
            details,
        })
    }

    /// Inverse of [`Self::multilevel`].
    pub fn multilevel_inverse(&self, m: &MultilevelCoefficients) -> Result<SignalCoefficients> {
        let mut cur = m.approximation.clone();
        for d in m.details.iter().rev() {
            if d.level != cur.level {
                return Err(Error::Shape(format!("detail level {} does not match approximation level {}", d.level, cur.level)));
            }
            cur.wavelet = Some(d.scaling.clone());
            cur = self.reconstruct(&cur)?;
        }
        Ok(cur)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultilevelCoefficients {
    pub approximation: SignalCoefficients,
    /// Wavelet coefficients, finest level first (stored in `scaling`).
    pub details: Vec<SignalCoefficients>,
}

/// Default depth of the scaling-function samples used by [`project`].
pub const PROJECTION_DEPTH: u32 = 12;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Projection {
    pub coefficients: SignalCoefficients,
    pub warnings: Vec<String>,
}

fn uniform_step(xs: &[f64]) -> Result<f64> {
    if xs.len() < 2 {
        return Err(Error::Shape("at least two samples are required".into()));
    }
    let h = (xs[xs.len() - 1] - xs[0]) / (xs.len() - 1) as f64;
    if !(h > 0.0) || xs.windows(2).any(|w| ((w[1] - w[0]) - h).abs() > 1e-9 * h.max(1.0)) {
        return Err(Error::Shape("samples must lie on an increasing uniform grid".into()));
    }
    Ok(h)
}

/// Least-squares projection of `(x, value)` samples onto level `level`.
///
/// Inner products are trapezoid sums over the sample grid with the scaling
/// functions sampled at `depth`; the coefficients solve the normal equations
/// with the Gram matrix of the same sums. Elements of `V_level` are
/// therefore reproduced up to rounding even where the trapezoid rule itself
/// is inaccurate (strongly coupled hidden components converge slowly).
pub fn project(samples: &[(f64, f64)], basis: &ScalingBasis, level: i32, depth: u32) -> Result<Projection> {
    let xs: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let h = uniform_step(&xs)?;
    let n = basis.n();
    let nf = n as f64;
    let scale = nf.powi(-level);
    let mut warnings = Vec::new();
    if h * scale > nf.powi(-4) {
        warnings.push(format!("sample spacing {h} is coarser than the level-{level} detail {}; coefficients are inaccurate", nf.powi(level - 4)));
    }
    let cs = basis.space().samples(depth)?;
    let phis: Vec<_> = (0..basis.len()).map(|i| basis.phi_hat(i)).collect();
    let (x0, x1) = (xs[0] * scale, xs[xs.len() - 1] * scale);
    let mut shifts = Vec::new();
    let mut truncated = 0;
    for (i, f) in phis.iter().enumerate() {
        let (a, b) = f.support(n).expect("nonzero scaling function");
        for l in (x0 - b).floor() as i64..=(x1 - a).ceil() as i64 {
            let (lo, hi) = (a + l as f64, b + l as f64);
            if x0 < hi && x1 > lo {
                shifts.push((l, i));
                if lo < x0 || hi > x1 {
                    truncated += 1;
                }
            }
        }
    }
    if truncated > 0 {
        warnings.push(format!("{truncated} translates extend past the sampled interval and are truncated"));
    }
    let k = samples.len();
    let norm = scale.sqrt();
    // Samples of each translate as (first index, values), trapezoid weight
    // folded in.
    let cols: Vec<(usize, Vec<f64>)> = shifts
        .par_iter()
        .map(|&(l, i)| {
            let (a, b) = phis[i].support(n).expect("nonzero scaling function");
            let first = (((a + l as f64) / scale - xs[0]) / h).floor().max(0.0) as usize;
            let last = ((((b + l as f64) / scale - xs[0]) / h).ceil().max(0.0) as usize).min(k - 1);
            let vals = (first..=last.max(first))
                .map(|j| {
                    let w = if j == 0 || j == k - 1 { 0.5 } else { 1.0 };
                    (w * h).sqrt() * norm * phis[i].value_at(&cs, n, Component::First, xs[j] * scale - l as f64)
                })
                .collect();
            (first, vals)
        })
        .collect();
    let m = cols.len();
    let mut gram = DMatrix::zeros(m, m);
    let mut rhs = DVector::zeros(m);
    for a in 0..m {
        let (fa, va) = &cols[a];
        rhs[a] = va
            .iter()
            .enumerate()
            .map(|(t, v)| {
                let j = fa + t;
                let w = if j == 0 || j == k - 1 { 0.5 } else { 1.0 };
                v * (w * h).sqrt() * samples[j].1
            })
            .sum();
        for b in a..m {
            let (fb, vb) = &cols[b];
            let lo = (*fa).max(*fb);
            let hi = (fa + va.len()).min(fb + vb.len());
            let g: f64 = (lo..hi).map(|j| va[j - fa] * vb[j - fb]).sum();
            gram[(a, b)] = g;
            gram[(b, a)] = g;
        }
    }
    let coef = match gram.clone().cholesky() {
        Some(c) => c.solve(&rhs),
        None => {
            warnings.push("discrete Gram matrix is singular; using a pseudo-inverse".into());
            gram.svd(true, true).solve(&rhs, 1e-12).map_err(|e| Error::Singular(e.into()))?
        }
    };
    let mut scaling: Coeffs = BTreeMap::new();
    for (c, &(l, i)) in coef.iter().zip(&shifts) {
        scaling.entry(l).or_insert_with(|| vec![0.0; phis.len()])[i] = *c;
    }
    Ok(Projection {
        coefficients: SignalCoefficients::new(level, scaling),
        warnings,
    })
}

/// Values of `sum K_{l,i} N^{-k/2} phi_i(N^{-k} x - l)` at `xs`.
pub fn synthesize(c: &SignalCoefficients, basis: &ScalingBasis, xs: &[f64], depth: u32) -> Result<Vec<f64>> {
    let n = basis.n();
    let cs = basis.space().samples(depth)?;
    let phis: Vec<_> = (0..basis.len()).map(|i| basis.phi_hat(i)).collect();
    let scale = (n as f64).powi(-c.level);
    Ok(xs
        .par_iter()
        .map(|&x| {
            c.scaling
                .iter()
                .map(|(&l, k)| {
                    k.iter()
                        .zip(&phis)
                        .map(|(a, f)| a * f.value_at(&cs, n, Component::First, x * scale - l as f64))
                        .sum::<f64>()
                })
                .sum::<f64>()
                * scale.sqrt()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::published_point;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn haar2() -> FilterBank {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let m = |v: f64| DMatrix::from_element(1, 1, v);
        FilterBank::new(2, vec![(0, m(s)), (1, m(s))], vec![(0, m(s)), (1, m(-s))]).unwrap()
    }

    /// Orthonormal 3-band filters from the rows of an orthogonal matrix.
    fn haar3() -> FilterBank {
        let q = 1.0 / 3f64.sqrt();
        let rows = [[q, q, q], [1.0 / 2f64.sqrt(), 0.0, -1.0 / 2f64.sqrt()], [1.0 / 6f64.sqrt(), -2.0 / 6f64.sqrt(), 1.0 / 6f64.sqrt()]];
        let low = (0..3).map(|p| (p as i64, DMatrix::from_element(1, 1, rows[0][p]))).collect();
        let high = (0..3).map(|p| (p as i64, DMatrix::from_column_slice(2, 1, &[rows[1][p], rows[2][p]]))).collect();
        FilterBank::new(3, low, high).unwrap()
    }

    fn random_coeffs(rng: &mut ChaCha8Rng, len: i64, width: usize) -> Coeffs {
        (-len..len).map(|l| (l, (0..width).map(|_| rng.random_range(-1.0..1.0)).collect())).collect()
    }

    #[test]
    fn haar_banks_reconstruct_perfectly() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for fb in [haar2(), haar3()] {
            assert!(fb.orthogonality_defect() < 1e-15);
            let c = SignalCoefficients::new(0, random_coeffs(&mut rng, 13, 1));
            let d = fb.decompose(&c).unwrap();
            assert_eq!(d.level, 1);
            assert!((d.energy() - c.energy()).abs() < 1e-12);
            let back = fb.reconstruct(&d).unwrap();
            assert_eq!(back.level, 0);
            assert!(max_difference(&back.scaling, &c.scaling) < 1e-14);
        }
    }

    #[test]
    fn haar_multilevel_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let fb = haar2();
        let c = SignalCoefficients::new(-2, random_coeffs(&mut rng, 32, 1));
        let m = fb.multilevel(&c, 3).unwrap();
        assert_eq!(m.details.len(), 3);
        assert_eq!(m.approximation.level, 1);
        let total = m.approximation.energy() + m.details.iter().map(SignalCoefficients::energy).sum::<f64>();
        assert!((total - c.energy()).abs() < 1e-12);
        let back = fb.multilevel_inverse(&m).unwrap();
        assert!(max_difference(&back.scaling, &c.scaling) < 1e-14);
    }

    #[test]
    fn zero_in_zero_out() {
        let fb = haar3();
        let c = SignalCoefficients::new(0, BTreeMap::new());
        let d = fb.decompose(&c).unwrap();
        assert!(d.scaling.is_empty() && d.wavelet.as_ref().unwrap().is_empty());
    }

    #[test]
    fn width_mismatch_is_rejected() {
        let fb = haar2();
        let c = SignalCoefficients::new(0, [(0, vec![1.0, 2.0])].into_iter().collect());
        assert!(matches!(fb.decompose(&c), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn projection_of_a_scaling_function_is_a_unit_vector() {
        let b = ScalingBasis::build(published_point(), true).unwrap();
        let m = 1usize << 12;
        let cs = b.space().samples(11).unwrap();
        let phi = b.phi_hat(0);
        let samples: Vec<(f64, f64)> = (0..=2 * m)
            .map(|j| {
                let x = j as f64 / m as f64;
                (x, phi.value_at(&cs, 2, Component::First, x))
            })
            .collect();
        let p = project(&samples, &b, 0, PROJECTION_DEPTH).unwrap();
        assert!(p.warnings.iter().all(|w| w.contains("truncated")));
        for (&l, k) in &p.coefficients.scaling {
            for (i, v) in k.iter().enumerate() {
                let want = if l == 0 && i == 0 { 1.0 } else { 0.0 };
                assert!((v - want).abs() < 1e-10, "l={l} i={i} v={v}");
            }
        }
    }

    #[test]
    fn coarse_samples_warn() {
        let b = ScalingBasis::build(published_point(), true).unwrap();
        let samples: Vec<(f64, f64)> = (0..=4).map(|j| (j as f64 / 2.0, 1.0)).collect();
        assert!(!project(&samples, &b, 0, 6).unwrap().warnings.is_empty());
    }

    #[test]
    fn nonuniform_grid_is_rejected() {
        let b = ScalingBasis::build(published_point(), true).unwrap();
        assert!(project(&[(0.0, 1.0), (0.1, 1.0), (0.3, 1.0)], &b, 0, 6).is_err());
    }
}
