#![allow(dead_code)]

use chfif::ifs::{DataPoints, HiddenParams, Knots};
use proptest::prelude::*;

/// Admissible parameters with a margin: `|alpha|, |gamma| <= 0.8`,
/// `|beta| + |gamma| <= 0.9`.
pub fn params(n: usize) -> impl Strategy<Value = HiddenParams> {
    let one = (-0.8f64..0.8, -0.8f64..0.8, -1.0f64..1.0).prop_map(|(a, g, t)| (a, t * (0.9 - g.abs()), g));
    prop::collection::vec(one, n).prop_map(|v| {
        HiddenParams::new(v.iter().map(|p| p.0).collect(), v.iter().map(|p| p.1).collect(), v.iter().map(|p| p.2).collect())
    })
}

pub fn data(n: usize) -> impl Strategy<Value = DataPoints> {
    (prop::collection::vec(-2.0f64..2.0, n + 1), prop::collection::vec(-2.0f64..2.0, n + 1)).prop_map(|(y, z)| DataPoints::new(y, z))
}

/// Increasing knots starting at 0 with gaps in `[0.2, 1]`.
pub fn knots(n: usize) -> impl Strategy<Value = Knots> {
    prop::collection::vec(0.2f64..1.0, n).prop_map(|gaps| {
        let mut x = vec![0.0];
        for g in gaps {
            x.push(x.last().unwrap() + g);
        }
        Knots::new(x).unwrap()
    })
}
