//! Orthogonal scaling functions on uniform knots.
//!
//! Templates (data `y`, `z` per index `k` in `0..2N+2`):
//!
//! ```text
//! k = 0          y = (1, r_1, ..., r_{N-1}, 0)      z = 0
//! k = 1..N-1     y = e_k                            z = 0
//! k = N          y = (0, s_1, ..., s_{N-1}, 1)      z = 0
//! k = N+1+i      y = (0, u_{i,1}, ..., u_{i,N-1}, 0) z = e_i   (i = 0..N)
//! ```
//!
//! `r`, `s` and `u` make every interior template `k = 1..N-1` orthogonal to
//! templates `0`, `N` and the hidden templates. The rows `i = 0` and
//! `i = N` of `u` are solved the same way but are not used by the basis.
//!
//! The scaling functions are the Gram–Schmidt outputs of templates
//! `1..N-1, N+2..2N` (supported on `[0, 1]`), followed by the two-piece
//! function equal to template `N` on `[0, 1)` and template `0` shifted to
//! `[1, 2)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ifs::{build_system, DataPoints, HiddenParams, Knots};
use crate::inner::cross_inner;
use crate::piecewise::{Component, Piece, Piecewise};
use crate::space::FunctionSpace;

/// Values of `r`, `s` and `u` for one parameter set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Templates {
    pub n: usize,
    pub r: Vec<f64>,
    pub s: Vec<f64>,
    /// `u[i][j-1]` is `u_{i,j}` for `i = 0..=N`, `j = 1..N-1`.
    pub u: Vec<Vec<f64>>,
}

impl Templates {
    /// Solves the interior orthogonality conditions in `space`.
    pub fn solve(space: &FunctionSpace) -> Result<Self> {
        let n = space.n();
        if n < 2 {
            return Err(Error::Unsupported("templates need N >= 2".into()));
        }
        let g = space.gram();
        let m = n - 1;
        let interior = DMatrix::from_fn(m, m, |a, b| g[(a + 1, b + 1)]);
        let chol = interior
            .cholesky()
            .ok_or_else(|| Error::Singular("interior template Gram".into()))?;
        // Coordinate `c` of the first component; the result cancels its
        // inner products with every interior template.
        let solve = |c: usize| -> Vec<f64> {
            let rhs = DVector::from_fn(m, |j, _| -g[(c, j + 1)]);
            chol.solve(&rhs).iter().copied().collect()
        };
        Ok(Self {
            n,
            r: solve(0),
            s: solve(n),
            u: (0..=n).map(|i| solve(n + 1 + i)).collect(),
        })
    }

    /// Number of templates, `2N + 2`.
    pub fn count(&self) -> usize {
        2 * self.n + 2
    }

    /// Data of template `k`.
    pub fn data(&self, k: usize) -> DataPoints {
        let n = self.n;
        let mut d = DataPoints::zeros(n + 1);
        match k {
            0 => {
                d.y[0] = 1.0;
                d.y[1..n].copy_from_slice(&self.r);
            }
            k if k < n => d.y[k] = 1.0,
            k if k == n => {
                d.y[n] = 1.0;
                d.y[1..n].copy_from_slice(&self.s);
            }
            k => {
                let i = k - n - 1;
                assert!(i <= n, "template index out of range");
                d.y[1..n].copy_from_slice(&self.u[i]);
                d.z[i] = 1.0;
            }
        }
        d
    }

    /// `zeta_i = <T_{N+1+i}, T_0>` and `eta_i = <T_{N+1+i}, T_N>` for
    /// `i = 1..N-1`, first components.
    pub fn zeta_eta(&self, space: &FunctionSpace) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = self.n;
        let t0 = space.coords(&self.data(0))?.0;
        let tn = space.coords(&self.data(n))?.0;
        let mut zeta = Vec::with_capacity(n - 1);
        let mut eta = Vec::with_capacity(n - 1);
        for i in 1..n {
            let h = space.coords(&self.data(n + 1 + i))?.0;
            zeta.push(space.inner(&h, &t0));
            eta.push(space.inner(&h, &tn));
        }
        Ok((zeta, eta))
    }
}

fn n2_alpha(alpha: &[f64]) -> (f64, f64) {
    assert_eq!(alpha.len(), 2, "closed forms are for N = 2");
    (alpha[0], alpha[1])
}

/// Closed-form `(r_1, s_1)` for `N = 2`.
pub fn solve_r_s(alpha: &[f64]) -> (f64, f64) {
    let (a1, a2) = n2_alpha(alpha);
    let den = 4.0 * (-4.0 + a1 * a1 - a1 * a2 + a2 * a2);
    let r = (4.0 - 4.0 * a1 * a1 - 6.0 * a2 - 2.0 * a1 * a2 + 3.0 * a1 * a1 * a2 - 4.0 * a2 * a2 + 3.0 * a2.powi(3)) / den;
    let s = (4.0 - 6.0 * a1 - 4.0 * a1 * a1 + 3.0 * a1.powi(3) - 2.0 * a1 * a2 - 4.0 * a2 * a2 + 3.0 * a1 * a2 * a2) / den;
    (r, s)
}

/// Numerator polynomial of `<T_0, T_2>` for `N = 2`; it vanishes exactly
/// when the two end templates are orthogonal.
pub fn rho(alpha: &[f64]) -> f64 {
    let (a1, a2) = n2_alpha(alpha);
    8.0 + 12.0 * a1 - 28.0 * a1.powi(2) + 6.0 * a1.powi(3) + 2.0 * a1.powi(4) + 12.0 * a2 - 14.0 * a1 * a2
        + 18.0 * a1.powi(2) * a2
        - 7.0 * a1.powi(3) * a2
        - 28.0 * a2.powi(2)
        + 18.0 * a1 * a2.powi(2)
        + 6.0 * a2.powi(3)
        - 7.0 * a1 * a2.powi(3)
        + 2.0 * a2.powi(4)
}

/// `<T_0, T_2>` written through `rho`, for `N = 2`.
pub fn end_template_inner(alpha: &[f64]) -> f64 {
    let (a1, a2) = n2_alpha(alpha);
    rho(alpha) / (12.0 * (-4.0 + a1 * a1 - a1 * a2 + a2 * a2) * (8.0 - 6.0 * a1 + a1 * a1 - 6.0 * a2 + 2.0 * a1 * a2 + a2 * a2))
}

/// Hidden-template parameter and its two orthogonality defects for `N = 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UZetaEta {
    pub u11: f64,
    pub zeta: f64,
    pub eta: f64,
}

/// Solves `<T_1, T_3(u)> = 0` for `u = u_{1,1}` (the equation is affine in
/// `u`) and evaluates `zeta = <T_0, T_3>`, `eta = <T_2, T_3>` there, where
/// `T_3` is the hidden template with `z = (0, 1, 0)`.
pub fn solve_u_zeta_eta(params: &HiddenParams) -> Result<UZetaEta> {
    if params.n() != 2 {
        return Err(Error::Unsupported("u, zeta, eta closed system is for N = 2".into()));
    }
    let knots = Knots::uniform(2);
    let sys = |y: Vec<f64>, z: Vec<f64>| build_system(knots.clone(), params.clone(), DataPoints::new(y, z));
    let (r1, s1) = solve_r_s(&params.alpha);
    let t0 = sys(vec![1.0, r1, 0.0], vec![0.0; 3])?;
    let t1 = sys(vec![0.0, 1.0, 0.0], vec![0.0; 3])?;
    let t2 = sys(vec![0.0, s1, 1.0], vec![0.0; 3])?;
    let hidden = |u: f64| sys(vec![0.0, u, 0.0], vec![0.0, 1.0, 0.0]);
    let g0 = cross_inner(&t1, &hidden(0.0)?)?.ip11;
    let g1 = cross_inner(&t1, &hidden(1.0)?)?.ip11;
    let slope = g1 - g0;
    if slope.abs() < 1e-300 {
        return Err(Error::Degenerate("<T_1, T_3(u)> does not depend on u".into()));
    }
    let u11 = -g0 / slope;
    let t3 = hidden(u11)?;
    Ok(UZetaEta {
        u11,
        zeta: cross_inner(&t0, &t3)?.ip11,
        eta: cross_inner(&t2, &t3)?.ip11,
    })
}

/// Gram–Schmidt on abstract vectors given by their Gram matrix.
///
/// Returns the lower-triangular matrix `L` whose row `k` holds the
/// coefficients of output `k` in the inputs `0..=k`. Without normalization
/// the diagonal is 1, so each output has positive inner product with its
/// source.
pub fn gram_schmidt(gram: &DMatrix<f64>, normalize: bool) -> Result<DMatrix<f64>> {
    let k = gram.nrows();
    let mut l = DMatrix::<f64>::zeros(k, k);
    for i in 0..k {
        let mut v = DVector::<f64>::zeros(k);
        v[i] = 1.0;
        for j in 0..i {
            let lj = l.row(j).transpose();
            let num = (v.transpose() * gram * &lj)[(0, 0)];
            let den = (lj.transpose() * gram * &lj)[(0, 0)];
            if num != 0.0 {
                v.axpy(-num / den, &lj, 1.0);
            }
        }
        let nsq = (v.transpose() * gram * &v)[(0, 0)];
        if !(nsq > 1e-14 * gram[(i, i)].abs()) || gram[(i, i)] <= 0.0 {
            return Err(Error::RankDeficient(format!("input {i} is dependent on earlier inputs")));
        }
        if normalize {
            v /= nsq.sqrt();
        }
        l.set_row(i, &v.transpose());
    }
    Ok(l)
}

/// Template indices fed to Gram–Schmidt, in processing order.
pub fn gs_sources(n: usize) -> Vec<usize> {
    (1..n).chain(n + 2..=2 * n).collect()
}

/// Scaling functions `phi_1 .. phi_{2N-1}` for one parameter set.
#[derive(Debug, Clone)]
pub struct ScalingBasis {
    space: FunctionSpace,
    templates: Templates,
    gs_coeffs: DMatrix<f64>,
    normalized: bool,
    phi: Vec<Piecewise>,
    norms: Vec<f64>,
    /// Factor taking `phi_i` to its unnormalized Gram–Schmidt form.
    raw_scale: Vec<f64>,
}

impl ScalingBasis {
    /// Solves the templates and orthogonalizes them.
    pub fn build(params: HiddenParams, normalize: bool) -> Result<Self> {
        let space = FunctionSpace::new(params)?;
        let templates = Templates::solve(&space)?;
        Self::assemble(space, templates, normalize)
    }

    fn assemble(space: FunctionSpace, templates: Templates, normalize: bool) -> Result<Self> {
        let n = space.n();
        let src = gs_sources(n);
        let coords: Vec<_> = src
            .iter()
            .map(|&k| space.coords(&templates.data(k)))
            .collect::<Result<_>>()?;
        let g = DMatrix::from_fn(src.len(), src.len(), |a, b| space.inner(&coords[a].0, &coords[b].0));
        let gs_coeffs = gram_schmidt(&g, normalize)?;

        let dim = space.dim();
        let mut phi = Vec::with_capacity(2 * n - 1);
        for row in 0..src.len() {
            let mut first = DVector::zeros(dim);
            let mut hidden = DVector::zeros(dim);
            for (c, (f, h)) in coords.iter().enumerate().take(row + 1) {
                first.axpy(gs_coeffs[(row, c)], f, 1.0);
                hidden.axpy(gs_coeffs[(row, c)], h, 1.0);
            }
            phi.push(Piecewise::from_pieces(0, [(0, Piece { first, hidden })]));
        }
        let (tn, tn_h) = space.coords(&templates.data(n))?;
        let (t0, t0_h) = space.coords(&templates.data(0))?;
        let mut joined = Piecewise::from_pieces(
            0,
            [
                (0, Piece { first: tn, hidden: tn_h }),
                (1, Piece { first: t0, hidden: t0_h }),
            ],
        );
        let mut raw_scale: Vec<f64> = (0..src.len()).map(|k| 1.0 / gs_coeffs[(k, k)]).collect();
        if normalize {
            let nrm = joined.norm_sq(&space, Component::First).sqrt();
            joined = joined.scaled(1.0 / nrm);
            raw_scale.push(nrm);
        } else {
            raw_scale.push(1.0);
        }
        phi.push(joined);
        let norms = phi.iter().map(|p| p.norm_sq(&space, Component::First).sqrt()).collect();
        Ok(Self {
            space,
            templates,
            gs_coeffs,
            normalized: normalize,
            phi,
            norms,
            raw_scale,
        })
    }

    pub fn n(&self) -> usize {
        self.space.n()
    }

    pub fn params(&self) -> &HiddenParams {
        self.space.params()
    }

    pub fn space(&self) -> &FunctionSpace {
        &self.space
    }

    pub fn templates(&self) -> &Templates {
        &self.templates
    }

    pub fn gs_coeffs(&self) -> &DMatrix<f64> {
        &self.gs_coeffs
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Number of scaling functions, `2N - 1`.
    pub fn len(&self) -> usize {
        self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi.is_empty()
    }

    /// `phi_{i+1}` for `i` in `0..2N-1` (the two-piece function is last).
    pub fn phi(&self, i: usize) -> &Piecewise {
        &self.phi[i]
    }

    pub fn phis(&self) -> &[Piecewise] {
        &self.phi
    }

    /// `phi_{i+1}` without normalization: Gram–Schmidt output with unit
    /// leading coefficient, or the plain two-piece function.
    pub fn phi_raw(&self, i: usize) -> Piecewise {
        self.phi[i].scaled(self.raw_scale[i])
    }

    /// `||phi_{i+1}||`.
    pub fn norm(&self, i: usize) -> f64 {
        self.norms[i]
    }

    /// `phi_{i+1} / ||phi_{i+1}||`.
    pub fn phi_hat(&self, i: usize) -> Piecewise {
        self.phi[i].scaled(1.0 / self.norms[i])
    }

    /// Labels `phi1 .. phi{2N-1}`.
    pub fn labels(&self) -> Vec<String> {
        (1..=self.len()).map(|i| format!("phi{i}")).collect()
    }

    /// Gram matrix of the first components at shift `l`:
    /// `G[i][j] = <phi_i, phi_j(. - l)>`.
    pub fn translate_gram(&self, l: i64) -> DMatrix<f64> {
        let n = self.n();
        let k = self.len();
        DMatrix::from_fn(k, k, |i, j| {
            self.phi[i].inner(&self.space, Component::First, &self.phi[j].shifted(n, l), Component::First)
        })
    }

    pub fn to_record(&self) -> BasisRecord {
        let p = self.params();
        BasisRecord {
            n: self.n(),
            knots: self.space.knots().values().to_vec(),
            alpha: p.alpha.clone(),
            beta: p.beta.clone(),
            gamma: p.gamma.clone(),
            templates: self.templates.clone(),
            gs_coeffs: self.gs_coeffs.row_iter().map(|r| r.iter().copied().collect()).collect(),
            normalized: self.normalized,
            labels: self.labels(),
        }
    }

    /// Rebuilds a basis from a record, checking the stored template values
    /// and coefficients against a fresh linear solve.
    pub fn from_record(rec: &BasisRecord) -> Result<Self> {
        let params = HiddenParams::new(rec.alpha.clone(), rec.beta.clone(), rec.gamma.clone());
        if params.n() != rec.n {
            return Err(Error::LengthMismatch {
                what: "alpha",
                expected: rec.n,
                found: params.n(),
            });
        }
        if rec.knots != Knots::uniform(rec.n).values() {
            return Err(Error::Unsupported("basis records need uniform knots i/N".into()));
        }
        let basis = Self::build(params, rec.normalized)?;
        let close = |a: &[f64], b: &[f64]| a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-9 * (1.0 + y.abs()));
        let t = &basis.templates;
        let stored = &rec.templates;
        let gs_ok = rec.gs_coeffs.len() == basis.gs_coeffs.nrows()
            && rec
                .gs_coeffs
                .iter()
                .enumerate()
                .all(|(i, row)| close(row, &basis.gs_coeffs.row(i).iter().copied().collect::<Vec<_>>()));
        let u_ok = stored.u.len() == t.u.len() && stored.u.iter().zip(&t.u).all(|(a, b)| close(a, b));
        if !(close(&stored.r, &t.r) && close(&stored.s, &t.s) && u_ok && gs_ok) {
            return Err(Error::Shape("stored template values disagree with the parameters".into()));
        }
        Ok(basis)
    }
}

/// Serialized form of a [`ScalingBasis`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisRecord {
    pub n: usize,
    pub knots: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub templates: Templates,
    pub gs_coeffs: Vec<Vec<f64>>,
    pub normalized: bool,
    pub labels: Vec<String>,
}
