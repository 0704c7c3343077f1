//! Constants written as arithmetic expressions, such as `(-67+29*sqrt7)/10`.
//!
//! `sqrtK` with a literal integer `K` is shorthand for `sqrt(K)`.

use crate::error::{Error, Result};

/// Evaluates an expression to `f64`.
pub fn eval(expr: &str) -> Result<f64> {
    let rewritten = expand_sqrt_shorthand(expr);
    let v = meval::eval_str(&rewritten).map_err(|e| Error::Expression {
        expr: expr.to_string(),
        reason: e.to_string(),
    })?;
    if !v.is_finite() {
        return Err(Error::Expression {
            expr: expr.to_string(),
            reason: "not finite".into(),
        });
    }
    Ok(v)
}

/// Evaluates a list of expressions.
pub fn eval_all<S: AsRef<str>>(exprs: &[S]) -> Result<Vec<f64>> {
    exprs.iter().map(|e| eval(e.as_ref())).collect()
}

fn expand_sqrt_shorthand(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 8);
    let mut rest = s;
    while let Some(pos) = rest.find("sqrt") {
        out.push_str(&rest[..pos + 4]);
        rest = &rest[pos + 4..];
        let digits = rest.bytes().take_while(u8::is_ascii_digit).count();
        if digits > 0 {
            out.push('(');
            out.push_str(&rest[..digits]);
            out.push(')');
            rest = &rest[digits..];
        }
    }
    out.push_str(rest);
    out
}
