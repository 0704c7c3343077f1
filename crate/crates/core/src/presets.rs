//! Named parameter sets, stored as exact expressions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::eval_all;
use crate::ifs::HiddenParams;

/// Hidden-variable parameters written as expressions such as `"sqrt7-3"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamExprs {
    pub alpha: Vec<String>,
    pub beta: Vec<String>,
    pub gamma: Vec<String>,
}

impl ParamExprs {
    pub fn evaluate(&self) -> Result<HiddenParams> {
        let p = HiddenParams::new(eval_all(&self.alpha)?, eval_all(&self.beta)?, eval_all(&self.gamma)?);
        p.validate(p.n())?;
        Ok(p)
    }
}

/// Name of the published N = 2 orthogonal parameter point.
pub const PUBLISHED_PRESET: &str = "paper-sec4";

/// The published N = 2 point where the templates are mutually orthogonal.
pub fn published_point_exprs() -> ParamExprs {
    let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect();
    ParamExprs {
        alpha: s(&["0", "sqrt7-3"]),
        beta: s(&["1/20", "(3-sqrt7)/20"]),
        gamma: s(&["-9/10", "(-67+29*sqrt7)/10"]),
    }
}

pub fn published_point() -> HiddenParams {
    published_point_exprs().evaluate().expect("preset expressions are valid")
}

/// Looks up a preset by name.
pub fn by_name(name: &str) -> Result<ParamExprs> {
    match name {
        PUBLISHED_PRESET => Ok(published_point_exprs()),
        other => Err(Error::Unsupported(format!("unknown preset '{other}'"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn published_point_values() {
        let p = published_point();
        let s7 = 7f64.sqrt();
        assert_eq!(p.alpha, vec![0.0, s7 - 3.0]);
        assert_eq!(p.beta, vec![0.05, (3.0 - s7) / 20.0]);
        assert_eq!(p.gamma, vec![-0.9, (-67.0 + 29.0 * s7) / 10.0]);
        assert!(p.is_nondegenerate());
    }

    #[test]
    fn exprs_round_trip_through_json() {
        let e = published_point_exprs();
        let back: ParamExprs = serde_json::from_str(&serde_json::to_string(&e).unwrap()).unwrap();
        assert_eq!(back.evaluate().unwrap(), published_point());
        assert!(by_name("nope").is_err());
    }
}
