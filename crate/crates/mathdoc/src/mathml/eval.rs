//! Expression evaluation and static dimension analysis.
//!
//! Evaluation is strict and deterministic: arguments evaluate left to right,
//! aggregates fold left in document order, and integer exponents go through
//! `f64::powi`. Running the same expression against the same context twice
//! gives bit-identical results.
//!
//! Dimension errors are detected where they occur: addition and comparison
//! demand equal dimensions, multiplication and division combine them, and
//! transcendental functions accept only dimensionless input. Units ride
//! along only through operations that preserve them exactly (same-unit
//! addition, `abs`, min/max); everything else drops the unit label while
//! keeping the dimension.

use super::ast::{Expr, Head, Ident, Number, Op, QuantKind, Quantified, Symbol};
use super::context::Context;
use super::dict::ConvertError;
use super::dimension::Dimension;
use super::value::{Scalar, Value};
use std::collections::HashMap;

#[derive(Debug, Clone, thiserror::Error)]
pub enum EvalError {
    #[error("unbound variable `{0}`")]
    Unbound(String),
    #[error("function key `{0}` is already registered")]
    DuplicateFunction(String),
    #[error("no registered function for `{symbol}` (tried {})", tried.join(", "))]
    UnregisteredFunction { symbol: String, tried: Vec<String> },
    #[error("{what}: expected {expected} argument(s), got {got}")]
    Arity { what: String, expected: usize, got: usize },
    #[error("{what}: expected {expected}, got {got}")]
    Type { what: String, expected: &'static str, got: String },
    #[error("{what}: dimension mismatch ({detail})")]
    DimensionMismatch { what: String, detail: String },
    #[error("{what}: {msg}")]
    Domain { what: String, msg: String },
    #[error(transparent)]
    Unit(#[from] ConvertError),
    #[error("domain `{name}` of {kind} is {got}, not a sequence")]
    NotASequence { name: String, kind: String, got: String },
}

pub fn eval(expr: &Expr, ctx: &Context) -> Result<Value, EvalError> {
    match expr {
        Expr::Number(n) => eval_number(n, ctx),
        Expr::Identifier(i) => ctx
            .lookup(&i.name)
            .cloned()
            .ok_or_else(|| EvalError::Unbound(i.name.clone())),
        Expr::Apply { head, args } => {
            let mut vals = Vec::with_capacity(args.len());
            for a in args {
                vals.push(eval(a, ctx)?);
            }
            match head {
                Head::Op(op) => eval_op(*op, &vals),
                Head::Symbol(sym) => eval_symbol(sym, &vals, ctx),
            }
        }
        Expr::Quantified(q) => eval_quantified(q, ctx),
    }
}

fn eval_number(n: &Number, ctx: &Context) -> Result<Value, EvalError> {
    match &n.unit {
        Some(u) => Ok(Value::Scalar(ctx.dicts().to_canonical_scalar(n.value, u)?)),
        None => Ok(Value::Scalar(Scalar::dimensionless(n.value))),
    }
}

fn eval_symbol(sym: &Symbol, args: &[Value], ctx: &Context) -> Result<Value, EvalError> {
    let keys = sym.keys();
    match ctx.function_by_keys(&keys) {
        Some(f) => f.call(args),
        None => Err(EvalError::UnregisteredFunction {
            symbol: sym.display.clone(),
            tried: keys.iter().map(|k| (*k).to_owned()).collect(),
        }),
    }
}

fn scalar_arg<'a>(what: &str, v: &'a Value) -> Result<&'a Scalar, EvalError> {
    v.as_scalar().ok_or_else(|| EvalError::Type {
        what: what.into(),
        expected: "a number",
        got: v.kind(),
    })
}

fn bool_arg(what: &str, v: &Value) -> Result<bool, EvalError> {
    match v {
        Value::Bool(b) => Ok(*b),
        other => Err(EvalError::Type {
            what: what.into(),
            expected: "a boolean",
            got: other.kind(),
        }),
    }
}

fn exact_arity(op: Op, args: &[Value], n: usize) -> Result<(), EvalError> {
    if args.len() != n {
        return Err(EvalError::Arity { what: op.tag().into(), expected: n, got: args.len() });
    }
    Ok(())
}

fn same_dim(op: Op, xs: &[&Scalar]) -> Result<Dimension, EvalError> {
    let dim = xs[0].dim;
    for x in &xs[1..] {
        if x.dim != dim {
            return Err(EvalError::DimensionMismatch {
                what: op.tag().into(),
                detail: format!("{} vs {}", dim, x.dim),
            });
        }
    }
    Ok(dim)
}

/// Unit label survives only when every operand agrees on it.
fn common_unit(xs: &[&Scalar]) -> Option<String> {
    let first = xs[0].unit.as_deref()?;
    xs[1..]
        .iter()
        .all(|x| x.unit.as_deref() == Some(first))
        .then(|| first.to_owned())
}

fn eval_op(op: Op, args: &[Value]) -> Result<Value, EvalError> {
    use Op::*;
    match op {
        Plus | Min | Max => {
            let xs: Vec<&Scalar> =
                args.iter().map(|v| scalar_arg(op.tag(), v)).collect::<Result<_, _>>()?;
            let dim = same_dim(op, &xs)?;
            let value = match op {
                Plus => xs[1..].iter().fold(xs[0].value, |a, x| a + x.value),
                Min => xs[1..].iter().fold(xs[0].value, |a, x| a.min(x.value)),
                _ => xs[1..].iter().fold(xs[0].value, |a, x| a.max(x.value)),
            };
            Ok(Value::Scalar(Scalar { value, dim, unit: common_unit(&xs) }))
        }
        Minus => {
            if args.is_empty() || args.len() > 2 {
                return Err(EvalError::Arity {
                    what: "minus".into(),
                    expected: 2,
                    got: args.len(),
                });
            }
            let xs: Vec<&Scalar> =
                args.iter().map(|v| scalar_arg("minus", v)).collect::<Result<_, _>>()?;
            let dim = same_dim(op, &xs)?;
            let value = match xs.as_slice() {
                [x] => -x.value,
                [x, y] => x.value - y.value,
                _ => unreachable!(),
            };
            Ok(Value::Scalar(Scalar { value, dim, unit: common_unit(&xs) }))
        }
        Times => {
            let xs: Vec<&Scalar> =
                args.iter().map(|v| scalar_arg("times", v)).collect::<Result<_, _>>()?;
            let value = xs[1..].iter().fold(xs[0].value, |a, x| a * x.value);
            let dim = xs[1..].iter().fold(xs[0].dim, |a, x| a.mul(x.dim));
            Ok(Value::Scalar(Scalar { value, dim, unit: None }))
        }
        Divide => {
            exact_arity(op, args, 2)?;
            let x = scalar_arg("divide", &args[0])?;
            let y = scalar_arg("divide", &args[1])?;
            if y.value == 0.0 {
                return Err(EvalError::Domain {
                    what: "divide".into(),
                    msg: "division by zero".into(),
                });
            }
            Ok(Value::Scalar(Scalar::new(x.value / y.value, x.dim.div(y.dim))))
        }
        Power => {
            exact_arity(op, args, 2)?;
            let base = scalar_arg("power", &args[0])?;
            let expo = scalar_arg("power", &args[1])?;
            if !expo.dim.is_dimensionless() {
                return Err(EvalError::DimensionMismatch {
                    what: "power".into(),
                    detail: format!("exponent has dimension {}", expo.dim),
                });
            }
            if expo.value.fract() == 0.0 && expo.value.abs() <= i32::MAX as f64 {
                let k = expo.value as i32;
                return Ok(Value::Scalar(Scalar::new(base.value.powi(k), base.dim.pow(k))));
            }
            if !base.dim.is_dimensionless() {
                return Err(EvalError::DimensionMismatch {
                    what: "power".into(),
                    detail: format!(
                        "base has dimension {} but the exponent is not an integer",
                        base.dim
                    ),
                });
            }
            if base.value < 0.0 {
                return Err(EvalError::Domain {
                    what: "power".into(),
                    msg: "negative base with non-integer exponent".into(),
                });
            }
            Ok(Value::Scalar(Scalar::dimensionless(base.value.powf(expo.value))))
        }
        Root => {
            exact_arity(op, args, 1)?;
            let x = scalar_arg("root", &args[0])?;
            if x.value < 0.0 {
                return Err(EvalError::Domain {
                    what: "root".into(),
                    msg: "square root of a negative number".into(),
                });
            }
            let dim = x.dim.root(2).ok_or_else(|| EvalError::DimensionMismatch {
                what: "root".into(),
                detail: format!("{} has no square root", x.dim),
            })?;
            Ok(Value::Scalar(Scalar::new(x.value.sqrt(), dim)))
        }
        Abs => {
            exact_arity(op, args, 1)?;
            let x = scalar_arg("abs", &args[0])?;
            Ok(Value::Scalar(Scalar { value: x.value.abs(), dim: x.dim, unit: x.unit.clone() }))
        }
        Sin | Cos | Tan | Arccos | Exp | Ln => {
            exact_arity(op, args, 1)?;
            let x = scalar_arg(op.tag(), &args[0])?;
            if !x.dim.is_dimensionless() {
                return Err(EvalError::DimensionMismatch {
                    what: op.tag().into(),
                    detail: format!("argument has dimension {}", x.dim),
                });
            }
            let v = x.value;
            let value = match op {
                Sin => v.sin(),
                Cos => v.cos(),
                Tan => v.tan(),
                Arccos => {
                    if !(-1.0..=1.0).contains(&v) {
                        return Err(EvalError::Domain {
                            what: "arccos".into(),
                            msg: format!("argument {v:?} is outside [-1, 1]"),
                        });
                    }
                    v.acos()
                }
                Exp => v.exp(),
                _ => {
                    if v <= 0.0 {
                        return Err(EvalError::Domain {
                            what: "ln".into(),
                            msg: "argument must be positive".into(),
                        });
                    }
                    v.ln()
                }
            };
            Ok(Value::Scalar(Scalar::dimensionless(value)))
        }
        Eq => {
            exact_arity(op, args, 2)?;
            match (&args[0], &args[1]) {
                (Value::Bool(a), Value::Bool(b)) => Ok(Value::Bool(a == b)),
                (Value::Scalar(a), Value::Scalar(b)) => {
                    same_dim(op, &[a, b])?;
                    Ok(Value::Bool(a.value == b.value))
                }
                (a, b) => Err(EvalError::Type {
                    what: "eq".into(),
                    expected: "two numbers or two booleans",
                    got: format!("{} and {}", a.kind(), b.kind()),
                }),
            }
        }
        Lt | Gt | Leq | Geq => {
            exact_arity(op, args, 2)?;
            let a = scalar_arg(op.tag(), &args[0])?;
            let b = scalar_arg(op.tag(), &args[1])?;
            same_dim(op, &[a, b])?;
            let r = match op {
                Lt => a.value < b.value,
                Gt => a.value > b.value,
                Leq => a.value <= b.value,
                _ => a.value >= b.value,
            };
            Ok(Value::Bool(r))
        }
        And | Or => {
            let bs: Vec<bool> =
                args.iter().map(|v| bool_arg(op.tag(), v)).collect::<Result<_, _>>()?;
            let r = if op == And { bs.iter().all(|b| *b) } else { bs.iter().any(|b| *b) };
            Ok(Value::Bool(r))
        }
        Not => {
            exact_arity(op, args, 1)?;
            Ok(Value::Bool(!bool_arg("not", &args[0])?))
        }
    }
}

fn eval_quantified(q: &Quantified, ctx: &Context) -> Result<Value, EvalError> {
    let domain = ctx
        .lookup(&q.domain.name)
        .ok_or_else(|| EvalError::Unbound(q.domain.name.clone()))?;
    let items = match domain {
        Value::Seq(items) => items.clone(),
        other => {
            return Err(EvalError::NotASequence {
                name: q.domain.name.clone(),
                kind: q.kind.tag().into(),
                got: other.kind(),
            })
        }
    };

    if items.is_empty() {
        return Ok(Value::Scalar(match q.kind {
            // The sum of nothing is zero *of the body's dimension* so that a
            // downstream addition does not suddenly fail on empty input.
            QuantKind::Sum => Scalar::new(0.0, empty_body_dim(q, ctx)),
            QuantKind::Product => Scalar::dimensionless(1.0),
        }));
    }

    let what = q.kind.tag();
    let mut acc: Option<Scalar> = None;
    for item in items {
        let inner = ctx.bind(&q.bvar, item);
        let v = eval(&q.body, &inner)?;
        let s = scalar_arg(what, &v)?.clone();
        acc = Some(match acc {
            None => s,
            Some(a) => match q.kind {
                QuantKind::Sum => {
                    if a.dim != s.dim {
                        return Err(EvalError::DimensionMismatch {
                            what: what.into(),
                            detail: format!("{} vs {}", a.dim, s.dim),
                        });
                    }
                    let unit = common_unit(&[&a, &s]);
                    Scalar { value: a.value + s.value, dim: a.dim, unit }
                }
                QuantKind::Product => Scalar::new(a.value * s.value, a.dim.mul(s.dim)),
            },
        });
    }
    Ok(Value::Scalar(acc.unwrap()))
}

fn empty_body_dim(q: &Quantified, ctx: &Context) -> Dimension {
    let look = |name: &str| -> Option<DimInfo> {
        if name == q.bvar {
            Some(DimInfo::Unknown)
        } else {
            ctx.lookup(name).map(dim_of_value)
        }
    };
    let mut findings = Vec::new();
    match infer(&q.body, &look, ctx, &mut findings) {
        DimInfo::Known(d) => d,
        _ => Dimension::DIMENSIONLESS,
    }
}

/// What static analysis knows about an expression's result.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DimInfo {
    Known(Dimension),
    Boolean,
    Sequence,
    Opaque,
    Unknown,
}

pub fn dim_of_value(v: &Value) -> DimInfo {
    match v {
        Value::Scalar(s) => DimInfo::Known(s.dim),
        Value::Bool(_) => DimInfo::Boolean,
        Value::Seq(_) => DimInfo::Sequence,
        Value::Object(_) => DimInfo::Opaque,
    }
}

/// Checks an expression without evaluating it: unbound names, unregistered
/// symbols, arity, and dimension consistency wherever dimensions are
/// statically known. Returns human-readable findings; empty means clean.
pub fn static_check(
    expr: &Expr,
    env: &HashMap<String, DimInfo>,
    ctx: &Context,
) -> Vec<String> {
    static_check_with_dim(expr, env, ctx).0
}

/// Like `static_check`, but also reports what the analysis inferred for the
/// whole expression, so callers can match it against a declared dimension.
pub fn static_check_with_dim(
    expr: &Expr,
    env: &HashMap<String, DimInfo>,
    ctx: &Context,
) -> (Vec<String>, DimInfo) {
    let mut findings = Vec::new();
    let look = |name: &str| env.get(name).copied();
    let dim = infer(expr, &look, ctx, &mut findings);
    (findings, dim)
}

fn known(i: &DimInfo) -> Option<Dimension> {
    match i {
        DimInfo::Known(d) => Some(*d),
        _ => None,
    }
}

fn numberish(i: &DimInfo) -> bool {
    matches!(i, DimInfo::Known(_) | DimInfo::Unknown)
}

fn infer(
    expr: &Expr,
    look: &dyn Fn(&str) -> Option<DimInfo>,
    ctx: &Context,
    findings: &mut Vec<String>,
) -> DimInfo {
    match expr {
        Expr::Number(n) => infer_number(n, ctx, findings),
        Expr::Identifier(i) => infer_ident(i, look, findings),
        Expr::Apply { head: Head::Op(op), args } => {
            let infos: Vec<DimInfo> =
                args.iter().map(|a| infer(a, look, ctx, findings)).collect();
            infer_op(*op, args, &infos, findings)
        }
        Expr::Apply { head: Head::Symbol(sym), args } => {
            for a in args {
                infer(a, look, ctx, findings);
            }
            infer_symbol(sym, args.len(), ctx, findings)
        }
        Expr::Quantified(q) => infer_quantified(q, look, ctx, findings),
    }
}

fn infer_number(n: &Number, ctx: &Context, findings: &mut Vec<String>) -> DimInfo {
    match &n.unit {
        None => DimInfo::Known(Dimension::DIMENSIONLESS),
        Some(u) => match ctx.dicts().unit_dim(u) {
            Some(d) => DimInfo::Known(d),
            None => {
                findings.push(format!("unknown unit `{u}`"));
                DimInfo::Unknown
            }
        },
    }
}

fn infer_ident(
    i: &Ident,
    look: &dyn Fn(&str) -> Option<DimInfo>,
    findings: &mut Vec<String>,
) -> DimInfo {
    match look(&i.name) {
        Some(info) => info,
        None => {
            findings.push(format!("unbound variable `{}`", i.name));
            DimInfo::Unknown
        }
    }
}

fn infer_symbol(
    sym: &Symbol,
    argc: usize,
    ctx: &Context,
    findings: &mut Vec<String>,
) -> DimInfo {
    let keys = sym.keys();
    match ctx.function_by_keys(&keys) {
        None => {
            findings.push(format!(
                "no registered function for `{}` (tried {})",
                sym.display,
                keys.join(", ")
            ));
            DimInfo::Unknown
        }
        Some(f) => {
            if f.arity != argc {
                findings.push(format!(
                    "`{}` expects {} argument(s), got {}",
                    f.name, f.arity, argc
                ));
            }
            match f.result_dim {
                Some(d) => DimInfo::Known(d),
                None => DimInfo::Unknown,
            }
        }
    }
}

fn infer_quantified(
    q: &Quantified,
    look: &dyn Fn(&str) -> Option<DimInfo>,
    ctx: &Context,
    findings: &mut Vec<String>,
) -> DimInfo {
    match look(&q.domain.name) {
        None => findings.push(format!("unbound domain `{}`", q.domain.name)),
        Some(DimInfo::Sequence) | Some(DimInfo::Unknown) => {}
        Some(other) => findings.push(format!(
            "domain `{}` of {} is {:?}, not a sequence",
            q.domain.name,
            q.kind.tag(),
            other
        )),
    }
    let inner = |name: &str| -> Option<DimInfo> {
        if name == q.bvar {
            Some(DimInfo::Unknown)
        } else {
            look(name)
        }
    };
    let body = infer(&q.body, &inner, ctx, findings);
    if body == DimInfo::Boolean || body == DimInfo::Sequence {
        findings.push(format!("body of {} is {:?}, not a number", q.kind.tag(), body));
        return DimInfo::Unknown;
    }
    match q.kind {
        QuantKind::Sum => body,
        QuantKind::Product => match known(&body) {
            Some(d) if d.is_dimensionless() => DimInfo::Known(d),
            _ => DimInfo::Unknown,
        },
    }
}

fn infer_op(
    op: Op,
    args: &[Expr],
    infos: &[DimInfo],
    findings: &mut Vec<String>,
) -> DimInfo {
    use Op::*;

    let arity_ok = |findings: &mut Vec<String>, n: usize| {
        if infos.len() != n {
            findings.push(format!(
                "`{}` expects {} argument(s), got {}",
                op.tag(),
                n,
                infos.len()
            ));
            false
        } else {
            true
        }
    };
    let want_numbers = |findings: &mut Vec<String>| {
        for i in infos {
            if !numberish(i) {
                findings.push(format!("`{}` applied to {:?}", op.tag(), i));
            }
        }
    };
    let common = |findings: &mut Vec<String>| -> DimInfo {
        let mut dim: Option<Dimension> = None;
        for i in infos {
            if let Some(d) = known(i) {
                match dim {
                    None => dim = Some(d),
                    Some(prev) if prev != d => {
                        findings.push(format!(
                            "`{}` mixes dimensions ({} vs {})",
                            op.tag(),
                            prev,
                            d
                        ));
                        return DimInfo::Unknown;
                    }
                    _ => {}
                }
            }
        }
        match dim {
            Some(d) if infos.iter().all(|i| known(i).is_some()) => DimInfo::Known(d),
            _ => DimInfo::Unknown,
        }
    };

    match op {
        Plus | Min | Max => {
            want_numbers(findings);
            common(findings)
        }
        Minus => {
            if infos.is_empty() || infos.len() > 2 {
                findings.push(format!("`minus` expects 1 or 2 arguments, got {}", infos.len()));
            }
            want_numbers(findings);
            common(findings)
        }
        Times => {
            want_numbers(findings);
            infos
                .iter()
                .try_fold(Dimension::DIMENSIONLESS, |acc, i| known(i).map(|d| acc.mul(d)))
                .map_or(DimInfo::Unknown, DimInfo::Known)
        }
        Divide => {
            if arity_ok(findings, 2) {
                want_numbers(findings);
                match (known(&infos[0]), known(&infos[1])) {
                    (Some(a), Some(b)) => DimInfo::Known(a.div(b)),
                    _ => DimInfo::Unknown,
                }
            } else {
                DimInfo::Unknown
            }
        }
        Power => {
            if !arity_ok(findings, 2) {
                return DimInfo::Unknown;
            }
            want_numbers(findings);
            if let Some(d) = known(&infos[1]) {
                if !d.is_dimensionless() {
                    findings.push(format!("`power` exponent has dimension {d}"));
                    return DimInfo::Unknown;
                }
            }
            let literal_int = match &args[1] {
                Expr::Number(n) if n.integer => Some(n.value as i32),
                _ => None,
            };
            match (known(&infos[0]), literal_int) {
                (Some(base), Some(k)) => DimInfo::Known(base.pow(k)),
                (Some(base), None) if base.is_dimensionless() => DimInfo::Known(base),
                _ => DimInfo::Unknown,
            }
        }
        Root => {
            if !arity_ok(findings, 1) {
                return DimInfo::Unknown;
            }
            want_numbers(findings);
            match known(&infos[0]) {
                Some(d) => match d.root(2) {
                    Some(r) => DimInfo::Known(r),
                    None => {
                        findings.push(format!("`root`: {d} has no square root"));
                        DimInfo::Unknown
                    }
                },
                None => DimInfo::Unknown,
            }
        }
        Abs => {
            if arity_ok(findings, 1) {
                want_numbers(findings);
                infos[0]
            } else {
                DimInfo::Unknown
            }
        }
        Sin | Cos | Tan | Arccos | Exp | Ln => {
            if arity_ok(findings, 1) {
                want_numbers(findings);
                if let Some(d) = known(&infos[0]) {
                    if !d.is_dimensionless() {
                        findings.push(format!(
                            "`{}` argument has dimension {d}",
                            op.tag()
                        ));
                    }
                }
            }
            DimInfo::Known(Dimension::DIMENSIONLESS)
        }
        Eq | Lt | Gt | Leq | Geq => {
            if arity_ok(findings, 2) && op != Eq {
                want_numbers(findings);
            }
            if let (Some(a), Some(b)) = (
                infos.first().and_then(known),
                infos.get(1).and_then(known),
            ) {
                if a != b {
                    findings.push(format!(
                        "`{}` compares different dimensions ({a} vs {b})",
                        op.tag()
                    ));
                }
            }
            DimInfo::Boolean
        }
        And | Or | Not => {
            if op == Not {
                arity_ok(findings, 1);
            }
            for i in infos {
                if matches!(i, DimInfo::Known(_) | DimInfo::Sequence) {
                    findings.push(format!("`{}` applied to {:?}", op.tag(), i));
                }
            }
            DimInfo::Boolean
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::dict::{parse_dictionary, DictionarySet};
    use super::super::parse::parse_mathml;
    use super::*;
    use crate::mathml::context::NativeFn;
    use std::sync::Arc;

    fn unit_set() -> DictionarySet {
        let src = r#"<dictionary xmlns="http://www.xml-cml.org/schema" prefix="u" title="units">
            <entry term="ang" description="angstrom" dimension="length"/>
            <entry term="nm" description="nanometre" dimension="length" canonicalUnit="u:ang">
              <convert><math xmlns="http://www.w3.org/1998/Math/MathML">
                <apply><times/><cn>10</cn><ci>x</ci></apply>
              </math></convert>
            </entry>
          </dictionary>"#;
        let mut set = DictionarySet::empty();
        set.add(parse_dictionary(src).unwrap()).unwrap();
        set
    }

    fn ctx() -> Context {
        Context::new(Arc::new(unit_set()))
    }

    fn run(src: &str, ctx: &Context) -> Result<Value, EvalError> {
        eval(&parse_mathml(src).unwrap(), ctx)
    }

    fn num(src: &str, ctx: &Context) -> f64 {
        run(src, ctx).unwrap().as_scalar().unwrap().value
    }

    #[test]
    fn arithmetic_matches_hand_computation() {
        let c = ctx();
        assert_eq!(num("<apply><plus/><cn>2</cn><cn>2</cn></apply>", &c), 4.0);
        assert_eq!(
            num("<apply><minus/><cn>10</cn><cn>4.5</cn></apply>", &c),
            5.5
        );
        assert_eq!(num("<apply><minus/><cn>3</cn></apply>", &c), -3.0);
        assert_eq!(
            num("<apply><times/><cn>3</cn><cn>4</cn><cn>5</cn></apply>", &c),
            60.0
        );
        assert_eq!(num("<apply><divide/><cn>1</cn><cn>8</cn></apply>", &c), 0.125);
        // integer exponent goes through powi; the oracle is powi itself
        assert_eq!(
            num("<apply><power/><cn>2</cn><cn>10</cn></apply>", &c),
            2.0f64.powi(10)
        );
        assert_eq!(
            num("<apply><power/><cn type=\"real\">1.37</cn><cn>12</cn></apply>", &c)
                .to_bits(),
            1.37f64.powi(12).to_bits()
        );
        assert_eq!(num("<apply><root/><cn>9</cn></apply>", &c), 3.0);
        assert_eq!(
            num("<apply><min/><cn>3</cn><cn>-2</cn><cn>7</cn></apply>", &c),
            -2.0
        );
        assert_eq!(
            num("<apply><max/><cn>3</cn><cn>-2</cn><cn>7</cn></apply>", &c),
            7.0
        );
        assert_eq!(num("<apply><abs/><cn>-4</cn></apply>", &c), 4.0);
    }

    #[test]
    fn comparisons_and_logic() {
        let c = ctx();
        for (src, want) in [
            ("<apply><lt/><cn>1</cn><cn>2</cn></apply>", true),
            ("<apply><geq/><cn>2</cn><cn>2</cn></apply>", true),
            ("<apply><eq/><cn>2</cn><cn>3</cn></apply>", false),
            (
                "<apply><and/><apply><lt/><cn>1</cn><cn>2</cn></apply><apply><gt/><cn>1</cn><cn>2</cn></apply></apply>",
                false,
            ),
            (
                "<apply><or/><apply><lt/><cn>1</cn><cn>2</cn></apply><apply><gt/><cn>1</cn><cn>2</cn></apply></apply>",
                true,
            ),
            ("<apply><not/><apply><eq/><cn>1</cn><cn>1</cn></apply></apply>", false),
        ] {
            assert_eq!(run(src, &c).unwrap(), Value::Bool(want), "{src}");
        }
    }

    #[test]
    fn units_convert_on_entry() {
        let c = ctx();
        let v = run("<cn units=\"u:nm\">2.5</cn>", &c).unwrap();
        let s = v.as_scalar().unwrap();
        assert_eq!(s.value, 25.0);
        assert_eq!(s.unit.as_deref(), Some("u:ang"));
        assert_eq!(s.dim, Dimension::LENGTH);

        // mixed-unit addition works after conversion because both arrive
        // canonical; the label survives since both are now u:ang
        let sum = run(
            "<apply><plus/><cn units=\"u:ang\">1</cn><cn units=\"u:nm\">0.1</cn></apply>",
            &c,
        )
        .unwrap();
        let s = sum.as_scalar().unwrap();
        assert_eq!(s.value, 2.0);
        assert_eq!(s.unit.as_deref(), Some("u:ang"));
    }

    #[test]
    fn dimension_errors() {
        let c = ctx();
        let plus = run(
            "<apply><plus/><cn units=\"u:ang\">1</cn><cn>1</cn></apply>",
            &c,
        );
        assert!(matches!(plus, Err(EvalError::DimensionMismatch { .. })));

        let sin = run("<apply><sin/><cn units=\"u:ang\">1</cn></apply>", &c);
        assert!(matches!(sin, Err(EvalError::DimensionMismatch { .. })));

        let frac_pow = run(
            "<apply><power/><cn units=\"u:ang\">4</cn><cn type=\"real\">0.5</cn></apply>",
            &c,
        );
        assert!(matches!(frac_pow, Err(EvalError::DimensionMismatch { .. })));

        // but an integer power of a length is fine
        let v = run(
            "<apply><power/><cn units=\"u:ang\">3</cn><cn>2</cn></apply>",
            &c,
        )
        .unwrap();
        let s = v.as_scalar().unwrap();
        assert_eq!(s.value, 9.0);
        assert_eq!(s.dim, Dimension::LENGTH.pow(2));
    }

    #[test]
    fn domain_errors() {
        let c = ctx();
        for src in [
            "<apply><divide/><cn>1</cn><cn>0</cn></apply>",
            "<apply><ln/><cn>0</cn></apply>",
            "<apply><arccos/><cn type=\"real\">1.5</cn></apply>",
            "<apply><root/><cn>-1</cn></apply>",
        ] {
            assert!(matches!(run(src, &c), Err(EvalError::Domain { .. })), "{src}");
        }
    }

    #[test]
    fn transcendentals_match_std() {
        let c = ctx();
        assert_eq!(
            num("<apply><cos/><cn type=\"real\">0.5</cn></apply>", &c).to_bits(),
            0.5f64.cos().to_bits()
        );
        assert_eq!(
            num("<apply><exp/><cn>1</cn></apply>", &c).to_bits(),
            1f64.exp().to_bits()
        );
        assert_eq!(
            num("<apply><arccos/><cn type=\"real\">-0.25</cn></apply>", &c).to_bits(),
            (-0.25f64).acos().to_bits()
        );
    }

    #[test]
    fn sum_folds_left_in_order() {
        let c = ctx();
        let xs = [0.1, 0.2, 0.3, 7.5, -2.25];
        let seq = Value::Seq(xs.iter().map(|v| Value::scalar(*v)).collect());
        let c = c.bind("xs", seq);
        let got = num(
            "<apply><sum/><bvar><ci>x</ci></bvar><condition><apply><in/><ci>x</ci><ci>xs</ci></apply></condition><ci>x</ci></apply>",
            &c,
        );
        let oracle = xs[1..].iter().fold(xs[0], |a, b| a + b);
        assert_eq!(got.to_bits(), oracle.to_bits());
    }

    #[test]
    fn product_and_empty_aggregates() {
        let c = ctx();
        let empty = c.bind("xs", Value::Seq(vec![]));
        let zero = run(
            "<apply><sum/><bvar><ci>x</ci></bvar><condition><apply><in/><ci>x</ci><ci>xs</ci></apply></condition><ci>x</ci></apply>",
            &empty,
        )
        .unwrap();
        assert_eq!(zero, Value::scalar(0.0));

        let one = run(
            "<apply><product/><bvar><ci>x</ci></bvar><condition><apply><in/><ci>x</ci><ci>xs</ci></apply></condition><ci>x</ci></apply>",
            &empty,
        )
        .unwrap();
        assert_eq!(one, Value::scalar(1.0));

        // the zero of an empty sum carries the body's dimension when the
        // analyzer can see it
        let with_dim = empty.bind(
            "c",
            Value::Scalar(Scalar::new(3.0, Dimension::LENGTH)),
        );
        let zero_len = run(
            "<apply><sum/><bvar><ci>x</ci></bvar><condition><apply><in/><ci>x</ci><ci>xs</ci></apply></condition><ci>c</ci></apply>",
            &with_dim,
        )
        .unwrap();
        assert_eq!(zero_len.as_scalar().unwrap().dim, Dimension::LENGTH);
        assert_eq!(zero_len.as_scalar().unwrap().value, 0.0);
    }

    #[test]
    fn bvar_shadows_outer_binding() {
        let c = ctx().bind("x", Value::scalar(100.0)).bind(
            "xs",
            Value::Seq(vec![Value::scalar(1.0), Value::scalar(2.0)]),
        );
        let got = num(
            "<apply><sum/><bvar><ci>x</ci></bvar><condition><apply><in/><ci>x</ci><ci>xs</ci></apply></condition><ci>x</ci></apply>",
            &c,
        );
        assert_eq!(got, 3.0);
        // and the outer binding is untouched afterwards
        assert_eq!(c.lookup("x").unwrap().as_scalar().unwrap().value, 100.0);
    }

    #[test]
    fn csymbol_dispatch_and_key_priority() {
        let c = ctx();
        let double = NativeFn::new("double", 1, None, |args| {
            let s = args[0].as_scalar().unwrap();
            Ok(Value::scalar(s.value * 2.0))
        });
        let c = c.register_function("urn:test#double", double).unwrap();

        // resolved through definitionURL even though the short name is absent
        let got = num(
            "<apply><csymbol definitionURL=\"urn:test#double\">dbl</csymbol><cn>21</cn></apply>",
            &c,
        );
        assert_eq!(got, 42.0);

        let missing = run(
            "<apply><csymbol>nosuch</csymbol><cn>1</cn></apply>",
            &c,
        )
        .unwrap_err();
        match missing {
            EvalError::UnregisteredFunction { tried, .. } => {
                assert_eq!(tried, vec!["nosuch".to_owned()]);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn unbound_and_type_errors() {
        let c = ctx();
        assert!(matches!(
            run("<ci>ghost</ci>", &c),
            Err(EvalError::Unbound(n)) if n == "ghost"
        ));
        let c = c.bind("b", Value::Bool(true));
        assert!(matches!(
            run("<apply><plus/><ci>b</ci><cn>1</cn></apply>", &c),
            Err(EvalError::Type { .. })
        ));
        let c = c.bind("notseq", Value::scalar(1.0));
        assert!(matches!(
            run(
                "<apply><sum/><bvar><ci>x</ci></bvar><condition><apply><in/><ci>x</ci><ci>notseq</ci></apply></condition><ci>x</ci></apply>",
                &c,
            ),
            Err(EvalError::NotASequence { .. })
        ));
    }

    #[test]
    fn static_check_reports_problems() {
        let c = ctx();
        let mut env = HashMap::new();
        env.insert("r".to_owned(), DimInfo::Known(Dimension::LENGTH));
        env.insert("pairs".to_owned(), DimInfo::Sequence);

        let clean = parse_mathml(
            "<apply><times/><ci>r</ci><ci>r</ci></apply>",
        )
        .unwrap();
        assert!(static_check(&clean, &env, &c).is_empty());

        let mixed = parse_mathml(
            "<apply><plus/><ci>r</ci><cn>1</cn></apply>",
        )
        .unwrap();
        let findings = static_check(&mixed, &env, &c);
        assert_eq!(findings.len(), 1);
        assert!(findings[0].contains("mixes dimensions"), "{findings:?}");

        let unreg = parse_mathml(
            "<apply><csymbol>mystery</csymbol><ci>r</ci></apply>",
        )
        .unwrap();
        let findings = static_check(&unreg, &env, &c);
        assert!(findings[0].contains("mystery"), "{findings:?}");

        let unbound = parse_mathml("<ci>ghost</ci>").unwrap();
        assert!(static_check(&unbound, &env, &c)[0].contains("ghost"));
    }

    #[test]
    fn static_check_sees_through_aggregates() {
        let c = ctx();
        let mut env = HashMap::new();
        env.insert("xs".to_owned(), DimInfo::Sequence);
        env.insert("r".to_owned(), DimInfo::Known(Dimension::LENGTH));

        // sin of a length inside a sum body
        let e = parse_mathml(
            "<apply><sum/><bvar><ci>x</ci></bvar><condition><apply><in/><ci>x</ci><ci>xs</ci></apply></condition><apply><sin/><ci>r</ci></apply></apply>",
        )
        .unwrap();
        let findings = static_check(&e, &env, &c);
        assert_eq!(findings.len(), 1);
        assert!(findings[0].contains("sin"), "{findings:?}");
    }
}
