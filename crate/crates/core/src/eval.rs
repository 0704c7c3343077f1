//! Exact values of the fixed point `(f1, f2)` on N-adic grids.
//!
//! The depth-0 grid is the knot set; every further level applies the maps
//! `omega_n` once more, so depth `d` holds `N^(d+1) + 1` samples. Block
//! endpoints are pinned to the knot data, which makes every level an exact
//! restriction of the next one.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ifs::CoalescenceSystem;

/// Default limit on the number of samples produced by [`refine`].
pub const DEFAULT_SAMPLE_CAP: usize = 1 << 24;

const PAR_THRESHOLD: usize = 1 << 14;

/// Samples of `(f1, f2)` on the depth-`d` grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSamples {
    pub depth: u32,
    pub xs: Vec<f64>,
    pub f1: Vec<f64>,
    pub f2: Vec<f64>,
}

impl GridSamples {
    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn component(&self, c: usize) -> &[f64] {
        match c {
            1 => &self.f1,
            2 => &self.f2,
            _ => panic!("component must be 1 or 2"),
        }
    }

    /// Every `step`-th sample, starting at the first.
    pub fn subsample(&self, step: usize) -> GridSamples {
        let pick = |v: &[f64]| v.iter().step_by(step).copied().collect::<Vec<_>>();
        GridSamples {
            depth: self.depth,
            xs: pick(&self.xs),
            f1: pick(&self.f1),
            f2: pick(&self.f2),
        }
    }

    /// Writes `x,f1,f2` rows with a header.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "f1", "f2"])?;
        for i in 0..self.len() {
            w.serialize((self.xs[i], self.f1[i], self.f2[i]))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Number of samples at `depth`, or `None` on overflow.
pub fn sample_count(n: usize, depth: u32) -> Option<u128> {
    (n as u128).checked_pow(depth + 1).and_then(|v| v.checked_add(1))
}

/// Samples of the fixed point at depth `depth` with the default memory cap.
pub fn refine(sys: &CoalescenceSystem, depth: u32) -> Result<GridSamples> {
    refine_capped(sys, depth, DEFAULT_SAMPLE_CAP)
}

/// As [`refine`], failing when more than `cap` samples would be produced.
pub fn refine_capped(sys: &CoalescenceSystem, depth: u32, cap: usize) -> Result<GridSamples> {
    let n = sys.n();
    let requested = sample_count(n, depth).unwrap_or(u128::MAX);
    if requested > cap as u128 {
        return Err(Error::MemoryCap { requested, cap });
    }
    let knots = sys.knots().values();
    let data = sys.data();
    let mut xs = knots.to_vec();
    let mut f1 = data.y.clone();
    let mut f2 = data.z.clone();
    for _ in 0..depth {
        let m = xs.len();
        let block = |blk: usize| {
            let cnt = if blk == 1 { m } else { m - 1 };
            let mut bx = Vec::with_capacity(cnt);
            let mut b1 = Vec::with_capacity(cnt);
            let mut b2 = Vec::with_capacity(cnt);
            let start = if blk == 1 { 0 } else { 1 };
            for j in start..m {
                let (x, y, z) = sys.omega(blk, xs[j], f1[j], f2[j]);
                bx.push(x);
                b1.push(y);
                b2.push(z);
            }
            if blk == 1 {
                bx[0] = knots[0];
                b1[0] = data.y[0];
                b2[0] = data.z[0];
            }
            let last = bx.len() - 1;
            bx[last] = knots[blk];
            b1[last] = data.y[blk];
            b2[last] = data.z[blk];
            (bx, b1, b2)
        };
        let blocks: Vec<_> = if m >= PAR_THRESHOLD {
            (1..=n).into_par_iter().map(block).collect()
        } else {
            (1..=n).map(block).collect()
        };
        let total = n * (m - 1) + 1;
        let (mut nx, mut n1, mut n2) = (
            Vec::with_capacity(total),
            Vec::with_capacity(total),
            Vec::with_capacity(total),
        );
        for (bx, b1, b2) in blocks {
            nx.extend(bx);
            n1.extend(b1);
            n2.extend(b2);
        }
        xs = nx;
        f1 = n1;
        f2 = n2;
    }
    Ok(GridSamples { depth, xs, f1, f2 })
}

/// Index of the depth-`depth` grid point nearest to `x`.
pub fn nearest_index(sys: &CoalescenceSystem, x: f64, depth: u32) -> Result<u128> {
    let k = sys.knots();
    let (lo, hi) = (k.first(), k.last());
    if !(lo..=hi).contains(&x) || x.is_nan() {
        return Err(Error::OutOfDomain { x, lo, hi });
    }
    let n = sys.n();
    let kv = k.values();
    sample_count(n, depth).ok_or_else(|| Error::Unsupported(format!("depth {depth} overflows grid index")))?;
    let mut t = x;
    let mut idx: u128 = 0;
    for _ in 0..depth {
        let cell = kv[1..].partition_point(|&v| v < t).min(n - 1) + 1;
        idx = idx * n as u128 + (cell - 1) as u128;
        t = ((t - k.b(cell)) / k.a(cell)).clamp(lo, hi);
    }
    let cell = kv[1..].partition_point(|&v| v < t).min(n - 1);
    let nearest = if (t - kv[cell]) <= (kv[cell + 1] - t) { cell } else { cell + 1 };
    Ok(idx * n as u128 + nearest as u128)
}

/// Value of the fixed point at grid index `i` of depth `depth`, computed with
/// the same operations as [`refine`].
pub fn value_at_index(sys: &CoalescenceSystem, i: u128, depth: u32) -> (f64, f64, f64) {
    let n = sys.n() as u128;
    let knots = sys.knots().values();
    let data = sys.data();
    let mut maps = Vec::with_capacity(depth as usize);
    let mut i = i;
    let mut d = depth;
    let base = loop {
        if d == 0 {
            break i as usize;
        }
        let block = n.pow(d);
        if i.is_multiple_of(block) {
            break (i / block) as usize;
        }
        maps.push((i / block) as usize + 1);
        i %= block;
        d -= 1;
    };
    let (mut x, mut y, mut z) = (knots[base], data.y[base], data.z[base]);
    for &m in maps.iter().rev() {
        (x, y, z) = sys.omega(m, x, y, z);
    }
    (x, y, z)
}

/// `(f1, f2)` at the depth-`depth` grid point nearest to `x`.
///
/// The distance to the true value at `x` is `O(c^depth)` with
/// `c = max(|alpha_n| + |beta_n|, |gamma_n|, a_n)`, the contraction modulus of
/// the system.
pub fn evaluate_at(sys: &CoalescenceSystem, x: f64, depth: u32) -> Result<(f64, f64)> {
    let i = nearest_index(sys, x, depth)?;
    let (_, f1, f2) = value_at_index(sys, i, depth);
    Ok((f1, f2))
}
