//! The expression engine: a small executable subset of content MathML.
//!
//! Expressions are parsed from XML into an [`ast::Expr`] tree, checked and
//! evaluated against an immutable [`context::Context`], and produce typed
//! [`value::Value`]s that carry physical dimensions. Unit terms resolve
//! through standoff [`dict::Dictionary`] files, and every quantity is
//! converted to its canonical unit the moment it enters evaluation.

pub mod ast;
pub mod context;
pub mod dict;
pub mod dimension;
pub mod eval;
pub mod parse;
pub mod value;

pub const MATHML_NS: &str = "http://www.w3.org/1998/Math/MathML";

pub use ast::{Expr, Head, Ident, Number, Op, QuantKind, Quantified, Symbol};
pub use context::{Context, NativeFn};
pub use dict::{parse_dictionary, Affine, ConvertError, DictEntry, Dictionary, DictionarySet};
pub use dimension::Dimension;
pub use eval::{eval, static_check, static_check_with_dim, DimInfo, EvalError};
pub use parse::{expr_from_node, expr_to_node, parse_mathml, serialize_mathml, MathParseError};
pub use value::{DomainObject, ObjectHandle, Scalar, Value};
