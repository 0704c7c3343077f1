//! Interpolation problems and the affine maps of their iterated function system.
//!
//! A [`CoalescenceSystem`] bundles knots `x_0 < ... < x_N`, the vertical
//! scaling parameters `alpha`, `beta`, `gamma` and generalized data `(y_i, z_i)`.
//! The maps are
//!
//! ```text
//! L_n(x)       = a_n x + b_n
//! F_n(x, y, z) = (alpha_n y + beta_n z + p_n(x), gamma_n z + q_n(x))
//! ```
//!
//! with `p_n(x) = c_n x + d_n` and `q_n(x) = e_n x + h_n` chosen so that the
//! endpoints of the graph are mapped onto consecutive data points.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Strictly increasing abscissae `x_0 < ... < x_N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Knots {
    x: Vec<f64>,
}

impl Knots {
    pub fn new(x: Vec<f64>) -> Result<Self> {
        if x.len() < 2 {
            return Err(Error::InvalidKnots(format!("{} entries", x.len())));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidKnots("non-finite entry".into()));
        }
        if let Some(w) = x.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::InvalidKnots(format!("{} is not above {}", w[1], w[0])));
        }
        Ok(Self { x })
    }

    /// Knots `i/N` on the unit interval.
    pub fn uniform(n: usize) -> Self {
        assert!(n >= 1, "at least one interval");
        Self {
            x: (0..=n).map(|i| i as f64 / n as f64).collect(),
        }
    }

    /// Number of intervals `N`.
    pub fn n(&self) -> usize {
        self.x.len() - 1
    }

    pub fn values(&self) -> &[f64] {
        &self.x
    }

    pub fn first(&self) -> f64 {
        self.x[0]
    }

    pub fn last(&self) -> f64 {
        self.x[self.x.len() - 1]
    }

    pub fn length(&self) -> f64 {
        self.last() - self.first()
    }

    /// Slope `a_n` of `L_n`, for `n` in `1..=N`.
    pub fn a(&self, n: usize) -> f64 {
        (self.x[n] - self.x[n - 1]) / self.length()
    }

    /// Offset `b_n` of `L_n`, for `n` in `1..=N`.
    pub fn b(&self, n: usize) -> f64 {
        (self.last() * self.x[n - 1] - self.first() * self.x[n]) / self.length()
    }

    /// `L_n(x)`. Endpoints map exactly onto `x_{n-1}` and `x_n`.
    pub fn map(&self, n: usize, x: f64) -> f64 {
        if x == self.first() {
            self.x[n - 1]
        } else if x == self.last() {
            self.x[n]
        } else {
            self.a(n) * x + self.b(n)
        }
    }

    /// Whether the knots are `i/N` exactly.
    pub fn is_uniform_unit(&self) -> bool {
        let n = self.n() as f64;
        self.x
            .iter()
            .enumerate()
            .all(|(i, &v)| v == i as f64 / n)
    }
}

impl TryFrom<Vec<f64>> for Knots {
    type Error = Error;
    fn try_from(x: Vec<f64>) -> Result<Self> {
        Knots::new(x)
    }
}

impl From<Knots> for Vec<f64> {
    fn from(k: Knots) -> Self {
        k.x
    }
}

/// Vertical scaling parameters, one per interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HiddenParams {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
}

impl HiddenParams {
    pub fn new(alpha: Vec<f64>, beta: Vec<f64>, gamma: Vec<f64>) -> Self {
        Self { alpha, beta, gamma }
    }

    pub fn zeros(n: usize) -> Self {
        Self::new(vec![0.0; n], vec![0.0; n], vec![0.0; n])
    }

    pub fn n(&self) -> usize {
        self.alpha.len()
    }

    /// Checks lengths and the strict bounds `|alpha| < 1`, `|gamma| < 1`,
    /// `|beta| + |gamma| < 1`.
    pub fn validate(&self, n: usize) -> Result<()> {
        for (what, v) in [("alpha", &self.alpha), ("beta", &self.beta), ("gamma", &self.gamma)] {
            if v.len() != n {
                return Err(Error::LengthMismatch {
                    what,
                    expected: n,
                    found: v.len(),
                });
            }
        }
        for i in 0..n {
            let (a, b, g) = (self.alpha[i], self.beta[i], self.gamma[i]);
            if !(a.abs() < 1.0) {
                return Err(Error::Contractivity {
                    index: i + 1,
                    bound: "|alpha| < 1",
                    value: a.abs(),
                });
            }
            if !(g.abs() < 1.0) {
                return Err(Error::Contractivity {
                    index: i + 1,
                    bound: "|gamma| < 1",
                    value: g.abs(),
                });
            }
            if !(b.abs() + g.abs() < 1.0) {
                return Err(Error::Contractivity {
                    index: i + 1,
                    bound: "|beta| + |gamma| < 1",
                    value: b.abs() + g.abs(),
                });
            }
        }
        Ok(())
    }

    /// Random admissible parameters: `alpha`, `gamma` uniform in
    /// `(-amp, amp)`, `beta` uniform in `±0.99 (1 - |gamma|)`.
    pub fn random<R: rand::Rng + ?Sized>(n: usize, amp: f64, rng: &mut R) -> Self {
        let alpha: Vec<f64> = (0..n).map(|_| rng.random_range(-amp..amp)).collect();
        let gamma: Vec<f64> = (0..n).map(|_| rng.random_range(-amp..amp)).collect();
        let beta = gamma
            .iter()
            .map(|g| rng.random_range(-1.0..1.0) * 0.99 * (1.0 - g.abs()))
            .collect();
        Self { alpha, beta, gamma }
    }

    /// True when `alpha_j + beta_j != gamma_j` for at least one `j`.
    pub fn is_nondegenerate(&self) -> bool {
        (0..self.n()).any(|j| self.alpha[j] + self.beta[j] != self.gamma[j])
    }

    /// Contraction modulus `max(|alpha_n| + |beta_n|, |gamma_n|)`.
    pub fn modulus(&self) -> f64 {
        (0..self.n())
            .map(|j| (self.alpha[j].abs() + self.beta[j].abs()).max(self.gamma[j].abs()))
            .fold(0.0, f64::max)
    }
}

/// Interpolation ordinates `y` and hidden ordinates `z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataPoints {
    pub y: Vec<f64>,
    pub z: Vec<f64>,
}

impl DataPoints {
    pub fn new(y: Vec<f64>, z: Vec<f64>) -> Self {
        Self { y, z }
    }

    pub fn zeros(len: usize) -> Self {
        Self::new(vec![0.0; len], vec![0.0; len])
    }

    /// Unit data: entry `k < len` sets `y_k = 1`, entry `len + k` sets `z_k = 1`.
    pub fn unit(len: usize, k: usize) -> Self {
        let mut d = Self::zeros(len);
        if k < len {
            d.y[k] = 1.0;
        } else {
            d.z[k - len] = 1.0;
        }
        d
    }

    /// `y` followed by `z`.
    pub fn to_vec(&self) -> Vec<f64> {
        self.y.iter().chain(&self.z).copied().collect()
    }

    pub fn from_slice(v: &[f64]) -> Self {
        let m = v.len() / 2;
        Self::new(v[..m].to_vec(), v[m..].to_vec())
    }
}

/// Coefficients of `p_n(x) = c_n x + d_n` and `q_n(x) = e_n x + h_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapCoefficients {
    pub c: Vec<f64>,
    pub d: Vec<f64>,
    pub e: Vec<f64>,
    pub h: Vec<f64>,
}

/// One interpolation problem with all derived map coefficients.
///
/// Immutable once built; every accessor returns borrowed data.
#[derive(Debug, Clone, PartialEq)]
pub struct CoalescenceSystem {
    knots: Knots,
    params: HiddenParams,
    data: DataPoints,
    coeffs: MapCoefficients,
}

/// Solves the join-up conditions and returns the full system.
///
/// For every interval `n` the four equations
/// `F_n(x_0, y_0, z_0) = (y_{n-1}, z_{n-1})` and `F_n(x_N, y_N, z_N) = (y_n, z_n)`
/// are solved in closed form.
pub fn build_system(knots: Knots, params: HiddenParams, data: DataPoints) -> Result<CoalescenceSystem> {
    let n = knots.n();
    params.validate(n)?;
    for (what, v) in [("y", &data.y), ("z", &data.z)] {
        if v.len() != n + 1 {
            return Err(Error::LengthMismatch {
                what,
                expected: n + 1,
                found: v.len(),
            });
        }
    }
    let coeffs = solve_join_up(&knots, &params, &data);
    Ok(CoalescenceSystem {
        knots,
        params,
        data,
        coeffs,
    })
}

fn solve_join_up(knots: &Knots, params: &HiddenParams, data: &DataPoints) -> MapCoefficients {
    let n = knots.n();
    let (x0, len) = (knots.first(), knots.length());
    let (y, z) = (&data.y, &data.z);
    let mut m = MapCoefficients {
        c: vec![0.0; n],
        d: vec![0.0; n],
        e: vec![0.0; n],
        h: vec![0.0; n],
    };
    for i in 0..n {
        let (al, be, ga) = (params.alpha[i], params.beta[i], params.gamma[i]);
        let p_left = y[i] - al * y[0] - be * z[0];
        let p_right = y[i + 1] - al * y[n] - be * z[n];
        let q_left = z[i] - ga * z[0];
        let q_right = z[i + 1] - ga * z[n];
        m.c[i] = (p_right - p_left) / len;
        m.d[i] = p_left - m.c[i] * x0;
        m.e[i] = (q_right - q_left) / len;
        m.h[i] = q_left - m.e[i] * x0;
    }
    m
}

impl CoalescenceSystem {
    pub fn knots(&self) -> &Knots {
        &self.knots
    }

    pub fn params(&self) -> &HiddenParams {
        &self.params
    }

    pub fn data(&self) -> &DataPoints {
        &self.data
    }

    pub fn coeffs(&self) -> &MapCoefficients {
        &self.coeffs
    }

    pub fn n(&self) -> usize {
        self.knots.n()
    }

    /// Same knots and parameters, different data.
    pub fn with_data(&self, data: DataPoints) -> Result<Self> {
        build_system(self.knots.clone(), self.params.clone(), data)
    }

    /// `p_n(x)` for `n` in `1..=N`.
    pub fn p(&self, n: usize, x: f64) -> f64 {
        self.coeffs.c[n - 1] * x + self.coeffs.d[n - 1]
    }

    /// `q_n(x)` for `n` in `1..=N`.
    pub fn q(&self, n: usize, x: f64) -> f64 {
        self.coeffs.e[n - 1] * x + self.coeffs.h[n - 1]
    }

    /// `omega_n` without bounds checks; shared by refinement and point evaluation
    /// so both produce bitwise identical values.
    #[inline]
    pub(crate) fn omega(&self, n: usize, x: f64, y: f64, z: f64) -> (f64, f64, f64) {
        let i = n - 1;
        let p = &self.params;
        let m = &self.coeffs;
        (
            self.knots.map(n, x),
            p.alpha[i] * y + p.beta[i] * z + (m.c[i] * x + m.d[i]),
            p.gamma[i] * z + (m.e[i] * x + m.h[i]),
        )
    }

    /// Recomputes the coefficients from knots, parameters and data and
    /// compares them with the stored ones.
    pub fn is_consistent(&self) -> bool {
        solve_join_up(&self.knots, &self.params, &self.data) == self.coeffs
    }

    pub fn to_spec(&self) -> SystemSpec {
        SystemSpec {
            knots: self.knots.values().to_vec(),
            alpha: self.params.alpha.clone(),
            beta: self.params.beta.clone(),
            gamma: self.params.gamma.clone(),
            y: self.data.y.clone(),
            z: self.data.z.clone(),
        }
    }
}

/// `omega_n(x, y, z) = (L_n(x), F_n(x, y, z))` for `n` in `1..=N`.
pub fn apply_map(sys: &CoalescenceSystem, n: usize, point: (f64, f64, f64)) -> Result<(f64, f64, f64)> {
    if n == 0 || n > sys.n() {
        return Err(Error::IndexOutOfRange { index: n, max: sys.n() });
    }
    let (x, y, z) = point;
    let (lo, hi) = (sys.knots.first(), sys.knots.last());
    if !(lo..=hi).contains(&x) {
        return Err(Error::OutOfDomain { x, lo, hi });
    }
    Ok(sys.omega(n, x, y, z))
}

/// Flat JSON form of a system:
/// `{"knots":[...], "alpha":[...], "beta":[...], "gamma":[...], "y":[...], "z":[...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemSpec {
    pub knots: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
}

impl SystemSpec {
    pub fn build(&self) -> Result<CoalescenceSystem> {
        build_system(
            Knots::new(self.knots.clone())?,
            HiddenParams::new(self.alpha.clone(), self.beta.clone(), self.gamma.clone()),
            DataPoints::new(self.y.clone(), self.z.clone()),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hat() -> CoalescenceSystem {
        build_system(
            Knots::uniform(2),
            HiddenParams::zeros(2),
            DataPoints::new(vec![0.0, 1.0, 0.0], vec![0.0; 3]),
        )
        .unwrap()
    }

    #[test]
    fn hat_polynomials() {
        let s = hat();
        let m = s.coeffs();
        assert_eq!((m.c[0], m.d[0]), (1.0, 0.0));
        assert_eq!((m.c[1], m.d[1]), (-1.0, 1.0));
        assert!(m.e.iter().chain(&m.h).all(|&v| v == 0.0));
    }

    #[test]
    fn left_template_first_polynomial() {
        let al1 = 0.3;
        let r1 = -0.2;
        let s = build_system(
            Knots::uniform(2),
            HiddenParams::new(vec![al1, -0.1], vec![0.0; 2], vec![0.0; 2]),
            DataPoints::new(vec![1.0, r1, 0.0], vec![0.0; 3]),
        )
        .unwrap();
        let m = s.coeffs();
        assert!((m.c[0] - (r1 + al1 - 1.0)).abs() < 1e-15);
        assert!((m.d[0] - (1.0 - al1)).abs() < 1e-15);
    }

    #[test]
    fn zero_data_zero_coefficients() {
        let s = build_system(
            Knots::uniform(3),
            HiddenParams::new(vec![0.2, -0.4, 0.5], vec![0.1, 0.2, -0.3], vec![0.5, -0.6, 0.4]),
            DataPoints::zeros(4),
        )
        .unwrap();
        let m = s.coeffs();
        assert!(m.c.iter().chain(&m.d).chain(&m.e).chain(&m.h).all(|&v| v == 0.0));
    }

    #[test]
    fn contractivity_is_strict() {
        let err = build_system(
            Knots::uniform(2),
            HiddenParams::new(vec![0.0; 2], vec![0.5, 0.0], vec![0.5, 0.0]),
            DataPoints::zeros(3),
        )
        .unwrap_err();
        match err {
            Error::Contractivity { index, bound, .. } => {
                assert_eq!(index, 1);
                assert_eq!(bound, "|beta| + |gamma| < 1");
            }
            e => panic!("unexpected {e}"),
        }
        assert!(matches!(
            HiddenParams::new(vec![1.0, 0.0], vec![0.0; 2], vec![0.0; 2]).validate(2),
            Err(Error::Contractivity { bound: "|alpha| < 1", .. })
        ));
    }

    #[test]
    fn knots_must_increase() {
        assert!(Knots::new(vec![0.0, 0.5, 0.5, 1.0]).is_err());
        assert!(Knots::new(vec![0.0]).is_err());
        assert!(Knots::new(vec![0.0, f64::NAN]).is_err());
    }

    #[test]
    fn hat_maps_right_endpoint() {
        let s = hat();
        assert_eq!(apply_map(&s, 1, (1.0, 0.0, 0.0)).unwrap(), (0.5, 1.0, 0.0));
        assert_eq!(apply_map(&s, 1, (0.0, 0.0, 0.0)).unwrap(), (0.0, 0.0, 0.0));
    }

    #[test]
    fn map_index_checked() {
        let s = hat();
        assert!(matches!(apply_map(&s, 0, (0.0, 0.0, 0.0)), Err(Error::IndexOutOfRange { .. })));
        assert!(matches!(apply_map(&s, 3, (0.0, 0.0, 0.0)), Err(Error::IndexOutOfRange { .. })));
        assert!(matches!(apply_map(&s, 1, (1.5, 0.0, 0.0)), Err(Error::OutOfDomain { .. })));
    }

    #[test]
    fn spec_roundtrip() {
        let s = hat();
        let json = serde_json::to_string(&s.to_spec()).unwrap();
        let back: SystemSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back.build().unwrap(), s);
    }

    #[test]
    fn nonuniform_knots_map_endpoints() {
        let k = Knots::new(vec![-1.0, 0.25, 2.0, 3.5]).unwrap();
        for n in 1..=3 {
            assert_eq!(k.map(n, -1.0), k.values()[n - 1]);
            assert_eq!(k.map(n, 3.5), k.values()[n]);
        }
        let total: f64 = (1..=3).map(|n| k.a(n)).sum();
        assert!((total - 1.0).abs() < 1e-15);
    }
}
