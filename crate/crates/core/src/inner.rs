//! Exact L2 inner products and moments of fixed points, plus a trapezoid oracle.
//!
//! Substituting `f(L_n(xi))` from the functional equations into
//! `integral_I g = sum_n a_n integral_I g(L_n(xi)) d xi` turns every inner
//! product and every moment `integral_I f_i(x) x^m dx` into a linear equation
//! in the unknown integrals. With linear `p_n`, `q_n` the equations close over
//! `<f1,g1>, <f1,g2>, <f2,g1>, <f2,g2>` and the moments of degree 0 and 1 of
//! both components of both systems, giving a 12 x 12 system. Polynomial
//! pieces are integrated exactly over `I = [x_0, x_N]`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::GridSamples;
use crate::ifs::CoalescenceSystem;

/// `integral f1 x^m` and `integral f2 x^m` for `m = 0..=maxdeg`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub f1: Vec<f64>,
    pub f2: Vec<f64>,
}

/// Cross inner products of two systems and the moments of each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InnerProductTable {
    pub ip11: f64,
    pub ip12: f64,
    pub ip21: f64,
    pub ip22: f64,
    pub moments_a: Moments,
    pub moments_b: Moments,
}

fn binom(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `integral_{lo}^{hi} sum_k coef[k] x^k dx`.
fn poly_integral(coef: &[f64], lo: f64, hi: f64) -> f64 {
    coef.iter()
        .enumerate()
        .map(|(k, c)| {
            let e = (k + 1) as i32;
            c * (hi.powi(e) - lo.powi(e)) / e as f64
        })
        .sum()
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut r = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            r[i + j] += x * y;
        }
    }
    r
}

/// `(a x + b)^m` as coefficients in `x`.
fn affine_pow(a: f64, b: f64, m: usize) -> Vec<f64> {
    (0..=m)
        .map(|k| binom(m, k) * a.powi(k as i32) * b.powi((m - k) as i32))
        .collect()
}

struct Pieces {
    p: Vec<[f64; 2]>,
    q: Vec<[f64; 2]>,
}

fn pieces(sys: &CoalescenceSystem) -> Pieces {
    let m = sys.coeffs();
    Pieces {
        p: (0..sys.n()).map(|i| [m.d[i], m.c[i]]).collect(),
        q: (0..sys.n()).map(|i| [m.h[i], m.e[i]]).collect(),
    }
}

/// Moments `integral_I f_i(x) x^m dx` for `m = 0..=maxdeg`.
///
/// Solved degree by degree: the degree-`m` moment of `f2` depends only on
/// lower moments of `f2`, and that of `f1` additionally on the moments of `f2`
/// up to degree `m`. The pivot `1 - sum a_n^(m+1) alpha_n` is bounded away from
/// zero for admissible parameters.
pub fn moments(sys: &CoalescenceSystem, maxdeg: usize) -> Result<Moments> {
    if maxdeg < 1 {
        return Err(Error::Unsupported("moments need maxdeg >= 1".into()));
    }
    let k = sys.knots();
    let (x0, xn) = (k.first(), k.last());
    let par = sys.params();
    let pc = pieces(sys);
    let n = sys.n();
    let mut m1 = vec![0.0; maxdeg + 1];
    let mut m2 = vec![0.0; maxdeg + 1];
    for m in 0..=maxdeg {
        // f2 first: the f1 equation of degree m needs the f2 moment of degree m.
        for hidden in [true, false] {
            let mut pivot = 1.0;
            let mut rhs = 0.0;
            for i in 0..n {
                let (a, b) = (k.a(i + 1), k.b(i + 1));
                let w = affine_pow(a, b, m);
                let (scale, poly, own) = if hidden {
                    (par.gamma[i], &pc.q[i], &m2)
                } else {
                    (par.alpha[i], &pc.p[i], &m1)
                };
                pivot -= a * scale * w[m];
                for (kk, wk) in w.iter().enumerate().take(m) {
                    rhs += a * scale * wk * own[kk];
                }
                if !hidden {
                    for (kk, wk) in w.iter().enumerate() {
                        rhs += a * par.beta[i] * wk * m2[kk];
                    }
                }
                rhs += a * poly_integral(&poly_mul(poly, &w), x0, xn);
            }
            if pivot.abs() < 1e-300 {
                return Err(Error::Singular(format!("moment of degree {m}")));
            }
            if hidden {
                m2[m] = rhs / pivot;
            } else {
                m1[m] = rhs / pivot;
            }
        }
    }
    Ok(Moments { f1: m1, f2: m2 })
}

// Unknown layout of the coupled system.
const IP11: usize = 0;
const IP12: usize = 1;
const IP21: usize = 2;
const IP22: usize = 3;
const fn mom(sys: usize, comp: usize, deg: usize) -> usize {
    4 + sys * 4 + (comp - 1) * 2 + deg
}

/// Solves the coupled linear system for the cross inner products of `a`
/// and `b` and the degree-0/1 moments of both.
///
/// The `<f1, g1>` row is the identity
/// `<f1,g1> (1 - sum a_n alpha_n alpha^_n) = sum a_n (alpha_n beta^_n <f1,g2> + ...)`
/// with every bracket taken over `I` after the change of variables.
pub fn cross_inner(a: &CoalescenceSystem, b: &CoalescenceSystem) -> Result<InnerProductTable> {
    if a.knots() != b.knots() {
        return Err(Error::KnotMismatch);
    }
    let k = a.knots();
    let (x0, xn) = (k.first(), k.last());
    let n = a.n();
    let (pa, pb) = (a.params(), b.params());
    let (ca, cb) = (pieces(a), pieces(b));
    let mut mat = DMatrix::<f64>::identity(12, 12);
    let mut rhs = DVector::<f64>::zeros(12);

    // <h, poly> as (coefficient of unknown deg-0, deg-1 moments).
    let bracket = |row: usize, m: &mut DMatrix<f64>, w: f64, s: usize, comp: usize, poly: &[f64; 2]| {
        m[(row, mom(s, comp, 0))] -= w * poly[0];
        m[(row, mom(s, comp, 1))] -= w * poly[1];
    };

    for (s, par, pc) in [(0usize, pa, &ca), (1, pb, &cb)] {
        for i in 0..n {
            let (an, bn) = (k.a(i + 1), k.b(i + 1));
            for deg in 0..=1usize {
                let w = affine_pow(an, bn, deg);
                let r2 = mom(s, 2, deg);
                let r1 = mom(s, 1, deg);
                for (kk, wk) in w.iter().enumerate() {
                    mat[(r2, mom(s, 2, kk))] -= an * par.gamma[i] * wk;
                    mat[(r1, mom(s, 1, kk))] -= an * par.alpha[i] * wk;
                    mat[(r1, mom(s, 2, kk))] -= an * par.beta[i] * wk;
                }
                rhs[r2] += an * poly_integral(&poly_mul(&pc.q[i], &w), x0, xn);
                rhs[r1] += an * poly_integral(&poly_mul(&pc.p[i], &w), x0, xn);
            }
        }
    }

    for i in 0..n {
        let an = k.a(i + 1);
        let (al, be, ga) = (pa.alpha[i], pa.beta[i], pa.gamma[i]);
        let (ah, bh, gh) = (pb.alpha[i], pb.beta[i], pb.gamma[i]);
        let (p, q) = (&ca.p[i], &ca.q[i]);
        let (ph, qh) = (&cb.p[i], &cb.q[i]);

        mat[(IP11, IP11)] -= an * al * ah;
        mat[(IP11, IP12)] -= an * al * bh;
        mat[(IP11, IP21)] -= an * be * ah;
        mat[(IP11, IP22)] -= an * be * bh;
        bracket(IP11, &mut mat, an * al, 0, 1, ph);
        bracket(IP11, &mut mat, an * be, 0, 2, ph);
        bracket(IP11, &mut mat, an * ah, 1, 1, p);
        bracket(IP11, &mut mat, an * bh, 1, 2, p);
        rhs[IP11] += an * poly_integral(&poly_mul(p, ph), x0, xn);

        mat[(IP12, IP12)] -= an * al * gh;
        mat[(IP12, IP22)] -= an * be * gh;
        bracket(IP12, &mut mat, an * al, 0, 1, qh);
        bracket(IP12, &mut mat, an * be, 0, 2, qh);
        bracket(IP12, &mut mat, an * gh, 1, 2, p);
        rhs[IP12] += an * poly_integral(&poly_mul(p, qh), x0, xn);

        mat[(IP21, IP21)] -= an * ga * ah;
        mat[(IP21, IP22)] -= an * ga * bh;
        bracket(IP21, &mut mat, an * ga, 0, 2, ph);
        bracket(IP21, &mut mat, an * ah, 1, 1, q);
        bracket(IP21, &mut mat, an * bh, 1, 2, q);
        rhs[IP21] += an * poly_integral(&poly_mul(q, ph), x0, xn);

        mat[(IP22, IP22)] -= an * ga * gh;
        bracket(IP22, &mut mat, an * ga, 0, 2, qh);
        bracket(IP22, &mut mat, an * gh, 1, 2, q);
        rhs[IP22] += an * poly_integral(&poly_mul(q, qh), x0, xn);
    }

    let sol = mat
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Singular("cross inner product system".into()))?;
    if sol.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular("cross inner product system".into()));
    }
    Ok(InnerProductTable {
        ip11: sol[IP11],
        ip12: sol[IP12],
        ip21: sol[IP21],
        ip22: sol[IP22],
        moments_a: Moments {
            f1: vec![sol[mom(0, 1, 0)], sol[mom(0, 1, 1)]],
            f2: vec![sol[mom(0, 2, 0)], sol[mom(0, 2, 1)]],
        },
        moments_b: Moments {
            f1: vec![sol[mom(1, 1, 0)], sol[mom(1, 1, 1)]],
            f2: vec![sol[mom(1, 2, 0)], sol[mom(1, 2, 1)]],
        },
    })
}

/// Residual of the `<f1, g1>` identity evaluated with the entries of `t`:
/// left side `<f1,g1> (1 - sum a_n alpha_n alpha^_n)` minus the right side.
pub fn eq_i_residual(a: &CoalescenceSystem, b: &CoalescenceSystem, t: &InnerProductTable) -> f64 {
    let k = a.knots();
    let (x0, xn) = (k.first(), k.last());
    let (pa, pb) = (a.params(), b.params());
    let (ca, cb) = (pieces(a), pieces(b));
    let with = |m: &Moments, comp: usize, poly: &[f64; 2]| {
        let v = if comp == 1 { &m.f1 } else { &m.f2 };
        poly[0] * v[0] + poly[1] * v[1]
    };
    let mut denom = 1.0;
    let mut num = 0.0;
    for i in 0..a.n() {
        let an = k.a(i + 1);
        let (al, be) = (pa.alpha[i], pa.beta[i]);
        let (ah, bh) = (pb.alpha[i], pb.beta[i]);
        let (p, ph) = (&ca.p[i], &cb.p[i]);
        denom -= an * al * ah;
        num += an
            * (al * bh * t.ip12
                + be * ah * t.ip21
                + be * bh * t.ip22
                + al * with(&t.moments_a, 1, ph)
                + ah * with(&t.moments_b, 1, p)
                + be * with(&t.moments_a, 2, ph)
                + bh * with(&t.moments_b, 2, p)
                + poly_integral(&poly_mul(p, ph), x0, xn));
    }
    t.ip11 * denom - num
}

/// Composite trapezoid integral of `sa.component(ca) * sb.component(cb)`.
pub fn quad_inner(sa: &GridSamples, sb: &GridSamples, ca: usize, cb: usize) -> Result<f64> {
    if sa.depth != sb.depth || sa.xs.len() != sb.xs.len() || sa.xs != sb.xs {
        return Err(Error::Shape(format!(
            "grids differ (depth {} / {}, {} / {} samples)",
            sa.depth,
            sb.depth,
            sa.len(),
            sb.len()
        )));
    }
    if !(1..=2).contains(&ca) || !(1..=2).contains(&cb) {
        return Err(Error::Shape("component must be 1 or 2".into()));
    }
    let (u, v) = (sa.component(ca), sb.component(cb));
    let xs = &sa.xs;
    let mut acc = 0.0;
    for i in 0..xs.len() - 1 {
        acc += 0.5 * (xs[i + 1] - xs[i]) * (u[i] * v[i] + u[i + 1] * v[i + 1]);
    }
    Ok(acc)
}

/// `integral_R f1(x) g1(x - shift) dx` for systems on `[0, 1]` extended by zero.
pub fn translated_inner(a: &CoalescenceSystem, b: &CoalescenceSystem, shift: i64) -> Result<f64> {
    let k = a.knots();
    if k.first() != 0.0 || k.last() != 1.0 {
        return Err(Error::Unsupported("translated inner products need knots spanning [0, 1]".into()));
    }
    if shift != 0 {
        if a.knots() != b.knots() {
            return Err(Error::KnotMismatch);
        }
        return Ok(0.0);
    }
    Ok(cross_inner(a, b)?.ip11)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::refine;
    use crate::ifs::{build_system, DataPoints, HiddenParams, Knots};

    fn hat() -> CoalescenceSystem {
        build_system(
            Knots::uniform(2),
            HiddenParams::zeros(2),
            DataPoints::new(vec![0.0, 1.0, 0.0], vec![0.0; 3]),
        )
        .unwrap()
    }

    fn coupled(y: Vec<f64>, z: Vec<f64>) -> CoalescenceSystem {
        build_system(
            Knots::uniform(2),
            HiddenParams::new(vec![0.3, -0.4], vec![0.2, -0.3], vec![-0.5, 0.6]),
            DataPoints::new(y, z),
        )
        .unwrap()
    }

    #[test]
    fn hat_values() {
        let t = cross_inner(&hat(), &hat()).unwrap();
        assert!((t.ip11 - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(t.ip22, 0.0);
        let m = moments(&hat(), 1).unwrap();
        assert!((m.f1[0] - 0.5).abs() < 1e-15);
        assert!((m.f1[1] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn joint_moments_match_recurrence() {
        let a = coupled(vec![1.0, -0.5, 2.0], vec![0.3, 1.0, -0.2]);
        let b = coupled(vec![0.0, 1.0, 0.5], vec![-1.0, 0.4, 0.0]);
        let t = cross_inner(&a, &b).unwrap();
        let ma = moments(&a, 1).unwrap();
        let mb = moments(&b, 1).unwrap();
        for (x, y) in ma.f1.iter().chain(&ma.f2).zip(t.moments_a.f1.iter().chain(&t.moments_a.f2)) {
            assert!((x - y).abs() < 1e-14);
        }
        for (x, y) in mb.f1.iter().chain(&mb.f2).zip(t.moments_b.f1.iter().chain(&t.moments_b.f2)) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn higher_moments_against_quadrature() {
        let a = coupled(vec![1.0, -0.5, 2.0], vec![0.3, 1.0, -0.2]);
        let m = moments(&a, 3).unwrap();
        let g = refine(&a, 14).unwrap();
        for deg in 0..=3 {
            let w: Vec<f64> = g.xs.iter().map(|x| x.powi(deg as i32)).collect();
            let q = (0..g.len() - 1)
                .map(|i| 0.5 * (g.xs[i + 1] - g.xs[i]) * (g.f1[i] * w[i] + g.f1[i + 1] * w[i + 1]))
                .sum::<f64>();
            assert!((q - m.f1[deg]).abs() < 1e-4, "degree {deg}: {q} vs {}", m.f1[deg]);
        }
    }

    #[test]
    fn all_four_products_against_quadrature() {
        let a = coupled(vec![1.0, -0.5, 2.0], vec![0.3, 1.0, -0.2]);
        let b = coupled(vec![0.0, 1.0, 0.5], vec![-1.0, 0.4, 0.0]);
        let t = cross_inner(&a, &b).unwrap();
        let (ga, gb) = (refine(&a, 14).unwrap(), refine(&b, 14).unwrap());
        let exact = [t.ip11, t.ip12, t.ip21, t.ip22];
        for (idx, (i, j)) in [(1, 1), (1, 2), (2, 1), (2, 2)].into_iter().enumerate() {
            let q = quad_inner(&ga, &gb, i, j).unwrap();
            assert!((q - exact[idx]).abs() < 1e-4, "<{i},{j}>: {q} vs {}", exact[idx]);
        }
    }

    #[test]
    fn identity_row_holds() {
        let a = coupled(vec![1.0, -0.5, 2.0], vec![0.3, 1.0, -0.2]);
        let b = coupled(vec![0.0, 1.0, 0.5], vec![-1.0, 0.4, 0.0]);
        let t = cross_inner(&a, &b).unwrap();
        assert!(eq_i_residual(&a, &b, &t).abs() < 1e-12);
    }

    #[test]
    fn knots_must_match() {
        let b = build_system(
            Knots::uniform(3),
            HiddenParams::zeros(3),
            DataPoints::zeros(4),
        )
        .unwrap();
        assert!(matches!(cross_inner(&hat(), &b), Err(Error::KnotMismatch)));
    }

    #[test]
    fn hat_quadrature() {
        let g = refine(&hat(), 11).unwrap();
        assert!((quad_inner(&g, &g, 1, 1).unwrap() - 1.0 / 3.0).abs() < 1e-6);
        let z = refine(&hat().with_data(DataPoints::zeros(3)).unwrap(), 11).unwrap();
        assert_eq!(quad_inner(&z, &g, 1, 1).unwrap(), 0.0);
        let short = refine(&hat(), 10).unwrap();
        assert!(quad_inner(&short, &g, 1, 1).is_err());
    }

    #[test]
    fn translates() {
        let h = hat();
        assert_eq!(translated_inner(&h, &h, 1).unwrap(), 0.0);
        assert_eq!(translated_inner(&h, &h, -3).unwrap(), 0.0);
        assert_eq!(translated_inner(&h, &h, 0).unwrap(), cross_inner(&h, &h).unwrap().ip11);
    }
}
