//! Compactly supported functions made of fixed-point pieces on N-adic intervals.
//!
//! A [`Piecewise`] function at level `L` stores, for each interval
//! `[m N^-L, (m+1) N^-L]`, coordinate vectors (see [`FunctionSpace`]) for
//! its first and hidden components in the local variable
//! `t = N^L x - m`. Translation by integers, dilation by `N` and
//! restriction to finer levels are exact coordinate operations.

use std::collections::BTreeMap;

use nalgebra::DVector;

use crate::error::Result;
use crate::ifs::DataPoints;
use crate::space::{CoordinateSamples, FunctionSpace};

/// Which component of the pair `(f1, f2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    First,
    Hidden,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Piece {
    pub first: DVector<f64>,
    pub hidden: DVector<f64>,
}

impl Piece {
    fn get(&self, c: Component) -> &DVector<f64> {
        match c {
            Component::First => &self.first,
            Component::Hidden => &self.hidden,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Piecewise {
    level: u32,
    pieces: BTreeMap<i64, Piece>,
}

impl Piecewise {
    pub fn zero() -> Self {
        Self::default()
    }

    /// The fixed point with `data` placed on interval `index` of `level`.
    pub fn from_data(space: &FunctionSpace, data: &DataPoints, level: u32, index: i64) -> Result<Self> {
        let (first, hidden) = space.coords(data)?;
        let mut pieces = BTreeMap::new();
        pieces.insert(index, Piece { first, hidden });
        Ok(Self { level, pieces })
    }

    /// Builds a function from `(index, piece)` pairs at `level`.
    pub fn from_pieces(level: u32, pieces: impl IntoIterator<Item = (i64, Piece)>) -> Self {
        Self {
            level,
            pieces: pieces.into_iter().collect(),
        }
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn pieces(&self) -> impl Iterator<Item = (i64, &Piece)> {
        self.pieces.iter().map(|(k, v)| (*k, v))
    }

    pub fn is_zero(&self) -> bool {
        self.pieces.values().all(|p| p.first.iter().chain(p.hidden.iter()).all(|&v| v == 0.0))
    }

    /// Closed support hull `[lo, hi]` of the stored pieces.
    pub fn support(&self, n: usize) -> Option<(f64, f64)> {
        let w = (n as f64).powi(-(self.level as i32));
        let lo = *self.pieces.keys().next()?;
        let hi = *self.pieces.keys().next_back()?;
        Some((lo as f64 * w, (hi + 1) as f64 * w))
    }

    /// The same function stored at a finer `level`.
    pub fn refined(&self, space: &FunctionSpace, level: u32) -> Self {
        assert!(level >= self.level, "cannot coarsen");
        let n = space.n() as i64;
        let mut cur = self.clone();
        while cur.level < level {
            let mut next = BTreeMap::new();
            for (&m, p) in &cur.pieces {
                for sub in 1..=space.n() {
                    let r = space.restriction(sub);
                    next.insert(
                        m * n + (sub as i64 - 1),
                        Piece {
                            first: r * &p.first,
                            hidden: r * &p.hidden,
                        },
                    );
                }
            }
            cur = Self {
                level: cur.level + 1,
                pieces: next,
            };
        }
        cur
    }

    /// `s * self`.
    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        for p in out.pieces.values_mut() {
            p.first *= s;
            p.hidden *= s;
        }
        out
    }

    /// `self + s * other`.
    pub fn add_scaled(&self, space: &FunctionSpace, other: &Piecewise, s: f64) -> Self {
        let level = self.level.max(other.level);
        let mut out = self.refined(space, level);
        let other = other.refined(space, level);
        let dim = space.dim();
        for (m, p) in other.pieces {
            let e = out.pieces.entry(m).or_insert_with(|| Piece {
                first: DVector::zeros(dim),
                hidden: DVector::zeros(dim),
            });
            e.first.axpy(s, &p.first, 1.0);
            e.hidden.axpy(s, &p.hidden, 1.0);
        }
        out
    }

    /// `x -> self(x - shift)`.
    pub fn shifted(&self, n: usize, shift: i64) -> Self {
        let step = (n as i64).pow(self.level) * shift;
        Self {
            level: self.level,
            pieces: self.pieces.iter().map(|(m, p)| (m + step, p.clone())).collect(),
        }
    }

    /// Shift by `cells` intervals of the current level, `x -> self(x - cells N^-L)`.
    pub fn shifted_cells(&self, cells: i64) -> Self {
        Self {
            level: self.level,
            pieces: self.pieces.iter().map(|(m, p)| (m + cells, p.clone())).collect(),
        }
    }

    /// `x -> self(N x)`.
    pub fn compressed(&self) -> Self {
        Self {
            level: self.level + 1,
            pieces: self.pieces.clone(),
        }
    }

    /// `x -> self(x / N)`.
    pub fn stretched(&self, space: &FunctionSpace) -> Self {
        if self.level > 0 {
            return Self {
                level: self.level - 1,
                pieces: self.pieces.clone(),
            };
        }
        let fine = self.refined(space, 1);
        Self {
            level: 0,
            pieces: fine.pieces,
        }
    }

    /// `<self.ca, other.cb>` over the real line.
    pub fn inner(&self, space: &FunctionSpace, ca: Component, other: &Piecewise, cb: Component) -> f64 {
        let level = self.level.max(other.level);
        let a = self.refined_overlap(space, other, level);
        let b = other.refined_overlap(space, self, level);
        let w = (space.n() as f64).powi(-(level as i32));
        let mut acc = 0.0;
        for (m, pa) in &a.pieces {
            if let Some(pb) = b.pieces.get(m) {
                acc += w * space.inner(pa.get(ca), pb.get(cb));
            }
        }
        acc
    }

    /// `||self.c||^2`, accumulated as a sum of squares so that small norms of
    /// differences keep their relative accuracy.
    pub fn norm_sq(&self, space: &FunctionSpace, c: Component) -> f64 {
        let w = (space.n() as f64).powi(-(self.level as i32));
        self.pieces.values().map(|p| w * space.norm_sq(p.get(c))).sum()
    }

    /// Refines only the pieces that overlap `other`'s support.
    fn refined_overlap(&self, space: &FunctionSpace, other: &Piecewise, level: u32) -> Self {
        let n = space.n() as i64;
        let keep: BTreeMap<i64, Piece> = self
            .pieces
            .iter()
            .filter(|(&m, _)| {
                let (lo, hi) = scale_range(m, self.level, level, n);
                let (olo, ohi) = match (other.pieces.keys().next(), other.pieces.keys().next_back()) {
                    (Some(&a), Some(&b)) => (scale_range(a, other.level, level, n).0, scale_range(b, other.level, level, n).1),
                    _ => return false,
                };
                lo <= ohi && olo <= hi
            })
            .map(|(m, p)| (*m, p.clone()))
            .collect();
        Self {
            level: self.level,
            pieces: keep,
        }
        .refined(space, level)
    }

    /// Value of component `c` at `x`, using grid samples of the coordinate
    /// functions (nearest grid point inside the piece).
    pub fn value_at(&self, samples: &CoordinateSamples, n: usize, c: Component, x: f64) -> f64 {
        let scale = (n as f64).powi(self.level as i32);
        let s = x * scale;
        let m = s.floor() as i64;
        let t = s - m as f64;
        if let Some(p) = self.pieces.get(&m) {
            samples.value_at(p.get(c), t)
        } else if t == 0.0 {
            self.pieces
                .get(&(m - 1))
                .map(|p| samples.value_at(p.get(c), 1.0))
                .unwrap_or(0.0)
        } else {
            0.0
        }
    }
}

/// Index range at `to` covered by interval `m` at `from`.
fn scale_range(m: i64, from: u32, to: u32, n: i64) -> (i64, i64) {
    let f = n.pow(to - from);
    (m * f, m * f + f - 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ifs::HiddenParams;

    fn space() -> FunctionSpace {
        FunctionSpace::new(HiddenParams::new(vec![0.3, -0.45], vec![0.2, -0.25], vec![-0.6, 0.5])).unwrap()
    }

    fn bump(sp: &FunctionSpace) -> Piecewise {
        Piecewise::from_data(sp, &DataPoints::new(vec![0.5, -1.0, 2.0], vec![0.3, 1.0, -0.2]), 0, 0).unwrap()
    }

    #[test]
    fn refinement_preserves_inner_products() {
        let sp = space();
        let f = bump(&sp);
        let g = f.refined(&sp, 3);
        let a = f.inner(&sp, Component::First, &f, Component::First);
        let b = g.inner(&sp, Component::First, &g, Component::First);
        assert!((a - b).abs() < 1e-12);
        assert!((f.norm_sq(&sp, Component::First) - g.norm_sq(&sp, Component::First)).abs() < 1e-12);
    }

    #[test]
    fn dilation_scales_norm() {
        let sp = space();
        let f = bump(&sp);
        let n2 = f.norm_sq(&sp, Component::First);
        let s = f.stretched(&sp);
        let c = f.compressed();
        assert!((s.norm_sq(&sp, Component::First) - 2.0 * n2).abs() < 1e-12);
        assert!((c.norm_sq(&sp, Component::First) - 0.5 * n2).abs() < 1e-12);
        assert_eq!(s.support(2), Some((0.0, 2.0)));
        let back = s.compressed();
        assert!((back.inner(&sp, Component::First, &f, Component::First) - n2).abs() < 1e-12);
    }

    #[test]
    fn disjoint_translates_vanish() {
        let sp = space();
        let f = bump(&sp);
        assert_eq!(f.inner(&sp, Component::First, &f.shifted(2, 1), Component::First), 0.0);
        assert_eq!(f.inner(&sp, Component::Hidden, &f.shifted(2, -2), Component::First), 0.0);
    }

    #[test]
    fn difference_norm_is_small_when_equal() {
        let sp = space();
        let f = bump(&sp);
        let g = f.refined(&sp, 2).scaled(3.0);
        let d = g.add_scaled(&sp, &f, -3.0);
        assert!(d.norm_sq(&sp, Component::First).sqrt() < 1e-13);
    }

    #[test]
    fn values_follow_placement() {
        let sp = space();
        let cs = sp.samples(4).unwrap();
        let f = bump(&sp).shifted(2, 3);
        assert_eq!(f.value_at(&cs, 2, Component::First, 3.0), 0.5);
        assert_eq!(f.value_at(&cs, 2, Component::First, 3.5), -1.0);
        assert_eq!(f.value_at(&cs, 2, Component::First, 4.0), 2.0);
        assert_eq!(f.value_at(&cs, 2, Component::First, 4.25), 0.0);
        let c = f.compressed();
        assert_eq!(c.value_at(&cs, 2, Component::Hidden, 1.75), 1.0);
    }
}
