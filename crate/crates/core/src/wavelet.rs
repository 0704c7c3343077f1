//! Wavelets for `N = 2` on `[0, 2]`.
//!
//! `psi_i` is made of four pieces on the half-unit intervals of `[0, 2]`.
//! Piece `j` (`j = 0..4`) is the fixed point on `[j/2, (j+1)/2]` with the
//! basis parameters, first-component data `(A_{2j}, A_{2j+1}, A_{2j+2})` and
//! hidden data `(B_{2j}, B_{2j+1}, B_{2j+2})`, where `A_0 = A_8 = 0` and
//! `B_0 = B_8 = 0`. The knot value `A_l` sits at `x = l/4`.
//!
//! The unknowns `A_{i,l}`, `B_{i,l}` (`i = 1..3`, `l = 1..7`) are fixed by
//!
//! ```text
//! (A) <psi_i, phi_j(. - l)> = 0         all j, all overlapping l
//! (B) <psi_i, psi_j> = 0                i < j
//! (C) <psi_i hidden, phi_2 hidden(. - l)> = 0   overlapping l
//! (D) <psi_i hidden, phi_j> = 0          j = 1, 2
//!     ||psi_i||^2 = 1
//! ```
//!
//! with `phi_j` the unnormalized scaling functions.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::basis::ScalingBasis;
use crate::error::{Error, Result};
use crate::ifs::DataPoints;
use crate::piecewise::{Component, Piece, Piecewise};

/// Number of wavelets.
pub const WAVELETS: usize = 3;
/// Interior knot values per wavelet.
pub const KNOTS: usize = 7;
/// Orthogonality conditions (A)-(D).
pub const ORTHOGONALITY_CONDITIONS: usize = 36;
/// Unknowns `A_{i,l}` and `B_{i,l}`.
pub const UNKNOWNS: usize = 2 * WAVELETS * KNOTS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Array {
    A,
    B,
}

/// One pinned unknown, `row` in `1..=3`, `col` in `1..=7`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaugePin {
    pub array: Array,
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

impl GaugePin {
    fn index(&self) -> usize {
        let base = match self.array {
            Array::A => 0,
            Array::B => WAVELETS * KNOTS,
        };
        base + (self.row - 1) * KNOTS + (self.col - 1)
    }
}

/// Zero pins following the published table: `A_{2,1} = A_{2,2} = A_{3,1} = 0`.
pub fn default_gauge() -> Vec<GaugePin> {
    [(2, 1), (2, 2), (3, 1)]
        .iter()
        .map(|&(row, col)| GaugePin {
            array: Array::A,
            row,
            col,
            value: 0.0,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveletSolution {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    pub gauge: Vec<GaugePin>,
}

impl WaveletSolution {
    pub fn zeros() -> Self {
        Self {
            a: vec![vec![0.0; KNOTS]; WAVELETS],
            b: vec![vec![0.0; KNOTS]; WAVELETS],
            gauge: default_gauge(),
        }
    }

    /// The published knot values at the `paper-sec4` parameters.
    pub fn published_table() -> Self {
        Self {
            a: vec![
                vec![-1.04784, 0.0125935, -1.04663, 0.0231596, 0.00599567, -0.00795969, 0.00391617],
                vec![0.0, 0.0, -0.298716, 1.32346, -2.4746, 1.12432, -0.553166],
                vec![0.0, 0.0, 0.0, 0.0, 1.06312, 0.0, 0.983686],
            ],
            b: vec![
                vec![19.1929, -21.6229, 11.8901, -11.1171, -4.93066, 1.19803, 0.567807],
                vec![0.0, 0.0, 0.0, 0.0, -11.6825, -15.2071, -3.19525],
                vec![0.0, 0.0, 0.0, 0.0, -13.3015, 33.9169, -11.0405],
            ],
            gauge: default_gauge(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |m: &Vec<Vec<f64>>| m.len() == WAVELETS && m.iter().all(|r| r.len() == KNOTS && r.iter().all(|v| v.is_finite()));
        if !ok(&self.a) || !ok(&self.b) {
            return Err(Error::Shape(format!("A and B must be {WAVELETS}x{KNOTS} finite arrays")));
        }
        for g in &self.gauge {
            if !(1..=WAVELETS).contains(&g.row) || !(1..=KNOTS).contains(&g.col) {
                return Err(Error::IndexOutOfRange {
                    index: g.row.max(g.col),
                    max: KNOTS,
                });
            }
        }
        Ok(())
    }

    /// `A` row-major followed by `B` row-major.
    pub fn to_vec(&self) -> Vec<f64> {
        self.a.iter().chain(&self.b).flatten().copied().collect()
    }

    pub fn from_vec(v: &[f64], gauge: Vec<GaugePin>) -> Self {
        assert_eq!(v.len(), UNKNOWNS);
        let rows = |off: usize| (0..WAVELETS).map(|i| v[off + i * KNOTS..off + (i + 1) * KNOTS].to_vec()).collect();
        Self {
            a: rows(0),
            b: rows(WAVELETS * KNOTS),
            gauge,
        }
    }

    /// Largest entrywise difference to `other`.
    pub fn max_drift(&self, other: &Self) -> f64 {
        self.to_vec().iter().zip(other.to_vec()).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

fn require_n2(basis: &ScalingBasis) -> Result<()> {
    if basis.n() != 2 {
        return Err(Error::Unsupported("wavelets are constructed for N = 2".into()));
    }
    Ok(())
}

/// `psi_i` (`i` in `1..=3`) with both components.
pub fn assemble_psi(sol: &WaveletSolution, basis: &ScalingBasis, i: usize) -> Result<Piecewise> {
    require_n2(basis)?;
    sol.validate()?;
    if !(1..=WAVELETS).contains(&i) {
        return Err(Error::IndexOutOfRange { index: i, max: WAVELETS });
    }
    let pad = |row: &[f64]| {
        let mut v = vec![0.0; KNOTS + 2];
        v[1..=KNOTS].copy_from_slice(row);
        v
    };
    let a = pad(&sol.a[i - 1]);
    let b = pad(&sol.b[i - 1]);
    let sp = basis.space();
    let mut pieces = Vec::with_capacity(4);
    for j in 0..4 {
        let data = DataPoints::new(a[2 * j..2 * j + 3].to_vec(), b[2 * j..2 * j + 3].to_vec());
        let (first, hidden) = sp.coords(&data)?;
        pieces.push((j as i64, Piece { first, hidden }));
    }
    Ok(Piecewise::from_pieces(1, pieces))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    /// `<psi_i, phi_j(. - l)>`
    A { i: usize, j: usize, l: i64 },
    /// `<psi_i, psi_j>`
    B { i: usize, j: usize },
    /// `<psi_i hidden, phi_2 hidden(. - l)>`
    C { i: usize, l: i64 },
    /// `<psi_i hidden, phi_j>`
    D { i: usize, j: usize },
    /// `||psi_i||^2 - 1`
    Norm { i: usize },
}

impl Kind {
    fn label(&self) -> String {
        match *self {
            Kind::A { i, j, l } => format!("A psi{} phi{}(.-{l})", i + 1, j + 1),
            Kind::B { i, j } => format!("B psi{} psi{}", i + 1, j + 1),
            Kind::C { i, l } => format!("C psi{}_2 phi2_2(.-{l})", i + 1),
            Kind::D { i, j } => format!("D psi{}_2 phi{}", i + 1, j + 1),
            Kind::Norm { i } => format!("norm psi{}", i + 1),
        }
    }
}

/// Shifts `l` for which `[a + l, b + l]` meets `(0, 2)` in an interval.
fn overlapping_shifts(a: f64, b: f64) -> Vec<i64> {
    ((-b).floor() as i64..=(2.0 - a).ceil() as i64).filter(|&l| a + (l as f64) < 2.0 && b + (l as f64) > 0.0).collect()
}

/// The residual map for one basis, with the scaling-function translates
/// precomputed at the wavelet level.
pub struct WaveletSystem<'a> {
    basis: &'a ScalingBasis,
    conds: Vec<Kind>,
    translates: Vec<((usize, i64), Piecewise)>,
}

impl<'a> WaveletSystem<'a> {
    pub fn new(basis: &'a ScalingBasis) -> Result<Self> {
        require_n2(basis)?;
        let sp = basis.space();
        let n = basis.n();
        let mut conds = Vec::new();
        let mut translates = Vec::new();
        let phis: Vec<_> = (0..basis.len()).map(|j| basis.phi_raw(j)).collect();
        let need = |j: usize, l: i64, translates: &mut Vec<((usize, i64), Piecewise)>| {
            if !translates.iter().any(|(k, _)| *k == (j, l)) {
                translates.push(((j, l), phis[j].shifted(n, l).refined(sp, 1)));
            }
        };
        for i in 0..WAVELETS {
            for (j, phi) in phis.iter().enumerate() {
                let (a, b) = phi.support(n).expect("nonzero scaling function");
                for l in overlapping_shifts(a, b) {
                    need(j, l, &mut translates);
                    conds.push(Kind::A { i, j, l });
                }
            }
        }
        for i in 0..WAVELETS {
            for j in i + 1..WAVELETS {
                conds.push(Kind::B { i, j });
            }
        }
        let (a2, b2) = phis[1].support(n).expect("nonzero scaling function");
        for i in 0..WAVELETS {
            for l in overlapping_shifts(a2, b2) {
                need(1, l, &mut translates);
                conds.push(Kind::C { i, l });
            }
        }
        for i in 0..WAVELETS {
            for j in 0..2 {
                need(j, 0, &mut translates);
                conds.push(Kind::D { i, j });
            }
        }
        if conds.len() != ORTHOGONALITY_CONDITIONS {
            return Err(Error::ConditionCount {
                expected: ORTHOGONALITY_CONDITIONS,
                found: conds.len(),
            });
        }
        conds.extend((0..WAVELETS).map(|i| Kind::Norm { i }));
        Ok(Self { basis, conds, translates })
    }

    pub fn labels(&self) -> Vec<String> {
        self.conds.iter().map(Kind::label).collect()
    }

    pub fn len(&self) -> usize {
        self.conds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.conds.is_empty()
    }

    fn translate(&self, j: usize, l: i64) -> &Piecewise {
        &self.translates.iter().find(|(k, _)| *k == (j, l)).expect("precomputed").1
    }

    /// The 36 orthogonality residuals followed by the 3 norm residuals.
    pub fn residuals(&self, sol: &WaveletSolution) -> Result<Vec<f64>> {
        let psi: Vec<_> = (1..=WAVELETS).map(|i| assemble_psi(sol, self.basis, i)).collect::<Result<_>>()?;
        let sp = self.basis.space();
        use Component::{First, Hidden};
        Ok(self
            .conds
            .iter()
            .map(|c| match *c {
                Kind::A { i, j, l } => psi[i].inner(sp, First, self.translate(j, l), First),
                Kind::B { i, j } => psi[i].inner(sp, First, &psi[j], First),
                Kind::C { i, l } => psi[i].inner(sp, Hidden, self.translate(1, l), Hidden),
                Kind::D { i, j } => psi[i].inner(sp, Hidden, self.translate(j, 0), First),
                Kind::Norm { i } => psi[i].norm_sq(sp, First) - 1.0,
            })
            .collect())
    }

    /// Central-difference Jacobian of [`Self::residuals`] in the 42 unknowns.
    pub fn jacobian(&self, sol: &WaveletSolution, step: f64) -> Result<DMatrix<f64>> {
        let x = sol.to_vec();
        let mut jac = DMatrix::zeros(self.len(), UNKNOWNS);
        for k in 0..UNKNOWNS {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[k] += step;
            xm[k] -= step;
            let rp = self.residuals(&WaveletSolution::from_vec(&xp, sol.gauge.clone()))?;
            let rm = self.residuals(&WaveletSolution::from_vec(&xm, sol.gauge.clone()))?;
            for r in 0..self.len() {
                jac[(r, k)] = (rp[r] - rm[r]) / (2.0 * step);
            }
        }
        Ok(jac)
    }
}

/// Residuals of conditions (A)-(D) and the norms; see [`WaveletSystem`].
pub fn residuals(sol: &WaveletSolution, basis: &ScalingBasis) -> Result<Vec<f64>> {
    WaveletSystem::new(basis)?.residuals(sol)
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Seed {
    Published,
    Random(u64),
    Given(WaveletSolution),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveOptions {
    pub seed: Seed,
    pub gauge: Vec<GaugePin>,
    /// Random starts tried when `seed` is `Random`.
    pub starts: usize,
    pub max_iter: usize,
    /// Accept when the largest residual is at most this.
    pub tol: f64,
    pub fd_step: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            seed: Seed::Published,
            gauge: default_gauge(),
            starts: 20,
            max_iter: 300,
            tol: 1e-10,
            fd_step: 1e-7,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WaveletReport {
    pub solution: WaveletSolution,
    pub max_residual: f64,
    pub iterations: usize,
    /// Index of the successful start (0 for published or given seeds).
    pub start_index: usize,
}

/// Levenberg–Marquardt on the 39 residuals plus the gauge rows.
fn levenberg_marquardt(sys: &WaveletSystem, start: &WaveletSolution, opts: &SolveOptions) -> Result<(WaveletSolution, f64, usize)> {
    let gauge = opts.gauge.clone();
    let full = |x: &[f64]| -> Result<DVector<f64>> {
        let sol = WaveletSolution::from_vec(x, gauge.clone());
        let mut r = sys.residuals(&sol)?;
        r.extend(gauge.iter().map(|g| x[g.index()] - g.value));
        Ok(DVector::from_vec(r))
    };
    // Pins are met to rounding by the extra rows; set them exactly before
    // reporting.
    let finish = |mut x: Vec<f64>, it: usize| -> Result<(WaveletSolution, f64, usize)> {
        for g in &gauge {
            x[g.index()] = g.value;
        }
        let sol = WaveletSolution::from_vec(&x, gauge.clone());
        let res = max_abs(&sys.residuals(&sol)?);
        Ok((sol, res, it))
    };
    let mut x = start.to_vec();
    let mut r = full(&x)?;
    let mut lambda = 1e-3;
    let m = sys.len();
    for it in 0..opts.max_iter {
        let worst = r.amax();
        if worst <= opts.tol {
            return finish(x, it);
        }
        let mut jac = sys.jacobian(&WaveletSolution::from_vec(&x, gauge.clone()), opts.fd_step)?;
        jac = jac.insert_rows(m, gauge.len(), 0.0);
        for (k, g) in gauge.iter().enumerate() {
            jac[(m + k, g.index())] = 1.0;
        }
        let jt = jac.transpose();
        let jtj = &jt * &jac;
        let grad = &jt * &r;
        let mut improved = false;
        for _ in 0..30 {
            let mut a = jtj.clone();
            for d in 0..UNKNOWNS {
                a[(d, d)] += lambda * jtj[(d, d)].max(1e-12);
            }
            let Some(step) = a.cholesky().map(|c| c.solve(&(-&grad))) else {
                lambda *= 10.0;
                continue;
            };
            let xn: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let rn = full(&xn)?;
            if rn.norm() < r.norm() {
                x = xn;
                r = rn;
                lambda = (lambda / 3.0).max(1e-15);
                improved = true;
                break;
            }
            lambda *= 4.0;
        }
        if !improved {
            return finish(x, it);
        }
    }
    finish(x, opts.max_iter)
}

/// Solves for the knot values. Non-convergence reports the best residual.
pub fn solve_wavelets(basis: &ScalingBasis, opts: &SolveOptions) -> Result<WaveletReport> {
    let sys = WaveletSystem::new(basis)?;
    let mut starts: Vec<WaveletSolution> = match &opts.seed {
        Seed::Published => vec![WaveletSolution::published_table()],
        Seed::Given(s) => {
            s.validate()?;
            vec![s.clone()]
        }
        Seed::Random(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            (0..opts.starts)
                .map(|_| {
                    let v: Vec<f64> = (0..UNKNOWNS).map(|_| rng.random_range(-1.0..1.0)).collect();
                    WaveletSolution::from_vec(&v, opts.gauge.clone())
                })
                .collect()
        }
    };
    for s in starts.iter_mut() {
        s.gauge = opts.gauge.clone();
        let mut v = s.to_vec();
        for g in &opts.gauge {
            v[g.index()] = g.value;
        }
        *s = WaveletSolution::from_vec(&v, opts.gauge.clone());
    }
    let mut best = (f64::INFINITY, 0usize);
    for (k, s) in starts.iter().enumerate() {
        let (sol, res, iters) = levenberg_marquardt(&sys, s, opts)?;
        let sp = basis.space();
        let collapsed = (1..=WAVELETS).any(|i| {
            assemble_psi(&sol, basis, i)
                .map(|p| p.norm_sq(sp, Component::First) < 0.25)
                .unwrap_or(true)
        });
        if res <= opts.tol && !collapsed {
            return Ok(WaveletReport {
                solution: sol,
                max_residual: res,
                iterations: iters,
                start_index: k,
            });
        }
        if res < best.0 {
            best = (res, iters);
        }
    }
    Err(Error::NoConvergence {
        best_residual: best.0,
        iterations: best.1,
    })
}

/// Rank and nullity of the 39 x 42 residual Jacobian at `sol`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NullityReport {
    pub rank: usize,
    pub nullity: usize,
    pub singular_values: Vec<f64>,
}

/// Singular values below `rel_cut * max` count as zero.
pub fn jacobian_nullity(basis: &ScalingBasis, sol: &WaveletSolution, step: f64, rel_cut: f64) -> Result<NullityReport> {
    let sys = WaveletSystem::new(basis)?;
    let jac = sys.jacobian(sol, step)?;
    let mut sv: Vec<f64> = jac.svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    let smax = sv.first().copied().unwrap_or(0.0);
    let rank = sv.iter().filter(|&&s| s > rel_cut * smax).count();
    Ok(NullityReport {
        rank,
        nullity: UNKNOWNS - rank,
        singular_values: sv,
    })
}

/// Samples of `psi_1..psi_3` (first components) on `[0, 2]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PsiSamples {
    pub xs: Vec<f64>,
    pub psi: Vec<Vec<f64>>,
}

impl PsiSamples {
    /// Writes `x,psi1,psi2,psi3` rows with a header.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "psi1", "psi2", "psi3"])?;
        for (k, x) in self.xs.iter().enumerate() {
            w.serialize((x, self.psi[0][k], self.psi[1][k], self.psi[2][k]))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Grid values at spacing `2^-(depth + 2)` on `[0, 2]`.
pub fn sample_psi(sol: &WaveletSolution, basis: &ScalingBasis, depth: u32) -> Result<PsiSamples> {
    let cs = basis.space().samples(depth)?;
    let m = cs.intervals();
    let mut xs = Vec::with_capacity(4 * m + 1);
    for j in 0..4 {
        for k in usize::from(j > 0)..=m {
            xs.push((j as f64 + k as f64 / m as f64) / 2.0);
        }
    }
    let mut psi = Vec::with_capacity(WAVELETS);
    for i in 1..=WAVELETS {
        let p = assemble_psi(sol, basis, i)?;
        let mut vals = Vec::with_capacity(xs.len());
        for (j, piece) in p.pieces() {
            for k in usize::from(j > 0)..=m {
                vals.push(cs.value(&piece.first, k));
            }
        }
        psi.push(vals);
    }
    Ok(PsiSamples { xs, psi })
}

/// Largest relative residual of fitting each of `targets` by `span`.
pub fn span_residual(basis: &ScalingBasis, targets: &[Piecewise], span: &[Piecewise]) -> f64 {
    let sp = basis.space();
    targets
        .iter()
        .map(|t| crate::mra::fit_residual(basis, t, span) / t.norm_sq(sp, Component::First).sqrt())
        .fold(0.0, f64::max)
}
