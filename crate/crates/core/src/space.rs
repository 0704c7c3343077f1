//! Coordinates for functions built from one parameter set on uniform knots.
//!
//! Fix `N`, the knots `i/N` and `(alpha, beta, gamma)`. For unit data `e_k`
//! (`k < N+1` sets `y_k = 1`, `k >= N+1` sets `z_{k-N-1} = 1`) let `U_k` be the
//! fixed point. Every first or hidden component that appears on a unit
//! interval lies in the span of
//!
//! ```text
//! U_k.f1   for k in 0..2N+2
//! U_k.f2   for k in N+1..2N+2   (the f2 of y-units vanishes)
//! ```
//!
//! which is closed under restriction to a sub-interval: `f1(L_n t)` and
//! `f2(L_n t)` are given by the functional equations, and the linear
//! polynomials they produce are themselves fixed points (constant data and
//! data `y_k = x_k` reproduce `1` and `t`). Restriction is therefore a
//! matrix on coordinate vectors, and inner products of coordinate vectors on
//! `[0, 1]` are given by one Gram matrix computed exactly.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::eval::refine;
use crate::ifs::{build_system, CoalescenceSystem, DataPoints, HiddenParams, Knots};
use crate::inner::cross_inner;

/// Relative eigenvalue cut below which Gram directions count as null.
const NULL_CUT: f64 = 1e-13;

/// Function space on uniform knots with a fixed parameter set.
#[derive(Debug, Clone)]
pub struct FunctionSpace {
    n: usize,
    knots: Knots,
    params: HiddenParams,
    units: Vec<CoalescenceSystem>,
    gram: DMatrix<f64>,
    whiten: DMatrix<f64>,
    restrict: Vec<DMatrix<f64>>,
}

impl FunctionSpace {
    pub fn new(params: HiddenParams) -> Result<Self> {
        let n = params.n();
        if n < 1 {
            return Err(Error::Unsupported("at least one interval".into()));
        }
        let knots = Knots::uniform(n);
        params.validate(n)?;
        let units: Vec<_> = (0..2 * n + 2)
            .map(|k| build_system(knots.clone(), params.clone(), DataPoints::unit(n + 1, k)))
            .collect::<Result<_>>()?;

        let dim = 3 * n + 3;
        let hid = |k: usize| k + n + 1; // unit index (>= N+1) -> coordinate of its f2
        let mut gram = DMatrix::zeros(dim, dim);
        for i in 0..2 * n + 2 {
            for j in i..2 * n + 2 {
                let t = cross_inner(&units[i], &units[j])?;
                gram[(i, j)] = t.ip11;
                gram[(j, i)] = t.ip11;
                if j > n {
                    gram[(i, hid(j))] = t.ip12;
                    gram[(hid(j), i)] = t.ip12;
                }
                if i > n {
                    gram[(hid(i), j)] = t.ip21;
                    gram[(j, hid(i))] = t.ip21;
                    if j > n {
                        gram[(hid(i), hid(j))] = t.ip22;
                        gram[(hid(j), hid(i))] = t.ip22;
                    }
                }
            }
        }

        let eig = SymmetricEigen::new(gram.clone());
        let top = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
        let keep: Vec<usize> = (0..dim).filter(|&i| eig.eigenvalues[i] > NULL_CUT * top).collect();
        let mut whiten = DMatrix::zeros(keep.len(), dim);
        for (r, &i) in keep.iter().enumerate() {
            let s = eig.eigenvalues[i].sqrt();
            for c in 0..dim {
                whiten[(r, c)] = s * eig.eigenvectors[(c, i)];
            }
        }

        let mut space = Self {
            n,
            knots,
            params,
            units,
            gram,
            whiten,
            restrict: Vec::new(),
        };
        space.restrict = (1..=n).map(|m| space.restriction_matrix(m)).collect();
        Ok(space)
    }

    fn restriction_matrix(&self, m: usize) -> DMatrix<f64> {
        let n = self.n;
        let dim = self.dim();
        let i = m - 1;
        let (al, be, ga) = (self.params.alpha[i], self.params.beta[i], self.params.gamma[i]);
        let one = self.constant();
        let t = self.identity_fn();
        let mut r = DMatrix::zeros(dim, dim);
        for k in 0..2 * n + 2 {
            let u = &self.units[k];
            r[(k, k)] += al;
            if k > n {
                r[(k + n + 1, k)] += be;
            }
            let (c, d) = (u.coeffs().c[i], u.coeffs().d[i]);
            for row in 0..dim {
                r[(row, k)] += d * one[row] + c * t[row];
            }
        }
        for j in 0..=n {
            let col = 2 * n + 2 + j;
            let u = &self.units[n + 1 + j];
            r[(col, col)] += ga;
            let (e, h) = (u.coeffs().e[i], u.coeffs().h[i]);
            for row in 0..dim {
                r[(row, col)] += h * one[row] + e * t[row];
            }
        }
        r
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn params(&self) -> &HiddenParams {
        &self.params
    }

    pub fn knots(&self) -> &Knots {
        &self.knots
    }

    /// Length of a coordinate vector, `3N + 3`.
    pub fn dim(&self) -> usize {
        3 * self.n + 3
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// Matrix `W` with `W^T W = G` restricted to the non-null directions.
    pub fn whitening(&self) -> &DMatrix<f64> {
        &self.whiten
    }

    /// Coordinate map for restriction to sub-interval `m` in `1..=N`.
    pub fn restriction(&self, m: usize) -> &DMatrix<f64> {
        &self.restrict[m - 1]
    }

    pub fn unit_system(&self, k: usize) -> &CoalescenceSystem {
        &self.units[k]
    }

    /// Builds a system with these parameters and the given data.
    pub fn system(&self, data: DataPoints) -> Result<CoalescenceSystem> {
        build_system(self.knots.clone(), self.params.clone(), data)
    }

    /// Coordinates of the constant function 1.
    pub fn constant(&self) -> DVector<f64> {
        let mut v = DVector::zeros(self.dim());
        for k in 0..=self.n {
            v[k] = 1.0;
        }
        v
    }

    /// Coordinates of `t -> t` on `[0, 1]`.
    pub fn identity_fn(&self) -> DVector<f64> {
        let mut v = DVector::zeros(self.dim());
        for (k, &x) in self.knots.values().iter().enumerate() {
            v[k] = x;
        }
        v
    }

    /// Coordinates of `(f1, f2)` for the fixed point with `data`.
    pub fn coords(&self, data: &DataPoints) -> Result<(DVector<f64>, DVector<f64>)> {
        let n = self.n;
        if data.y.len() != n + 1 || data.z.len() != n + 1 {
            return Err(Error::LengthMismatch {
                what: "data",
                expected: n + 1,
                found: data.y.len().min(data.z.len()),
            });
        }
        let mut first = DVector::zeros(self.dim());
        let mut hidden = DVector::zeros(self.dim());
        for k in 0..=n {
            first[k] = data.y[k];
            first[n + 1 + k] = data.z[k];
            hidden[2 * n + 2 + k] = data.z[k];
        }
        Ok((first, hidden))
    }

    /// `<u, v>` on `[0, 1]` for coordinate vectors.
    pub fn inner(&self, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        (u.transpose() * &self.gram * v)[(0, 0)]
    }

    /// `||u||^2` on `[0, 1]`, computed as a sum of squares.
    pub fn norm_sq(&self, u: &DVector<f64>) -> f64 {
        (&self.whiten * u).norm_squared()
    }

    /// Samples of every coordinate function at grid depth `depth`.
    pub fn samples(&self, depth: u32) -> Result<CoordinateSamples> {
        let n = self.n;
        let grids: Vec<_> = self.units.iter().map(|u| refine(u, depth)).collect::<Result<_>>()?;
        let mut values = Vec::with_capacity(self.dim());
        for g in &grids {
            values.push(g.f1.clone());
        }
        for g in &grids[n + 1..] {
            values.push(g.f2.clone());
        }
        Ok(CoordinateSamples {
            n,
            depth,
            values,
        })
    }
}

/// Grid values of the coordinate functions on `[0, 1]`.
#[derive(Debug, Clone)]
pub struct CoordinateSamples {
    n: usize,
    depth: u32,
    values: Vec<Vec<f64>>,
}

impl CoordinateSamples {
    pub fn depth(&self) -> u32 {
        self.depth
    }

    /// Number of grid intervals on `[0, 1]`.
    pub fn intervals(&self) -> usize {
        self.n.pow(self.depth + 1)
    }

    /// Value of `u` at grid index `i`.
    pub fn value(&self, u: &DVector<f64>, i: usize) -> f64 {
        u.iter().zip(&self.values).map(|(c, col)| c * col[i]).sum()
    }

    /// Value of `u` at the grid point nearest to `t` in `[0, 1]`.
    pub fn value_at(&self, u: &DVector<f64>, t: f64) -> f64 {
        let m = self.intervals();
        let i = (t.clamp(0.0, 1.0) * m as f64).round() as usize;
        self.value(u, i.min(m))
    }
}
