//! Expression AST for the content-MathML subset.

/// Operators available as empty head elements inside `<apply>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Op {
    Plus,
    Minus,
    Times,
    Divide,
    Power,
    Root,
    Sin,
    Cos,
    Tan,
    Arccos,
    Exp,
    Ln,
    Abs,
    Min,
    Max,
    Eq,
    Lt,
    Gt,
    Leq,
    Geq,
    And,
    Or,
    Not,
}

impl Op {
    pub fn tag(self) -> &'static str {
        match self {
            Op::Plus => "plus",
            Op::Minus => "minus",
            Op::Times => "times",
            Op::Divide => "divide",
            Op::Power => "power",
            Op::Root => "root",
            Op::Sin => "sin",
            Op::Cos => "cos",
            Op::Tan => "tan",
            Op::Arccos => "arccos",
            Op::Exp => "exp",
            Op::Ln => "ln",
            Op::Abs => "abs",
            Op::Min => "min",
            Op::Max => "max",
            Op::Eq => "eq",
            Op::Lt => "lt",
            Op::Gt => "gt",
            Op::Leq => "leq",
            Op::Geq => "geq",
            Op::And => "and",
            Op::Or => "or",
            Op::Not => "not",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Op> {
        Some(match tag {
            "plus" => Op::Plus,
            "minus" => Op::Minus,
            "times" => Op::Times,
            "divide" => Op::Divide,
            "power" => Op::Power,
            "root" => Op::Root,
            "sin" => Op::Sin,
            "cos" => Op::Cos,
            "tan" => Op::Tan,
            "arccos" => Op::Arccos,
            "exp" => Op::Exp,
            "ln" => Op::Ln,
            "abs" => Op::Abs,
            "min" => Op::Min,
            "max" => Op::Max,
            "eq" => Op::Eq,
            "lt" => Op::Lt,
            "gt" => Op::Gt,
            "leq" => Op::Leq,
            "geq" => Op::Geq,
            "and" => Op::And,
            "or" => Op::Or,
            "not" => Op::Not,
            _ => return None,
        })
    }
}

/// `<cn>` literal. `integer` records the lexical class (`7` vs `7.0`) so the
/// literal round-trips; integer literals are exact in the f64 domain until
/// mixed with reals.
#[derive(Debug, Clone, PartialEq)]
pub struct Number {
    pub value: f64,
    pub integer: bool,
    /// `units` attribute: a dictionary unit term such as `u:deg`.
    pub unit: Option<String>,
}

impl Number {
    pub fn int(v: i64) -> Number {
        Number { value: v as f64, integer: true, unit: None }
    }

    pub fn real(v: f64) -> Number {
        Number { value: v, integer: false, unit: None }
    }
}

/// `<ci>` identifier with its optional `type` hint.
#[derive(Debug, Clone, PartialEq)]
pub struct Ident {
    pub name: String,
    pub type_hint: Option<String>,
}

impl Ident {
    pub fn new(name: impl Into<String>) -> Ident {
        Ident { name: name.into(), type_hint: None }
    }
}

/// `<csymbol>` head. The function is identified by the `func` attribute
/// (name form), the `definitionURL` attribute (URI form), or, failing both,
/// the display text itself.
#[derive(Debug, Clone, PartialEq)]
pub struct Symbol {
    pub func: Option<String>,
    pub definition_url: Option<String>,
    /// Rendered symbol (element text), e.g. `w` for a getMass call.
    pub display: String,
}

impl Symbol {
    /// Resolution keys in priority order: exact name first, then URI, then
    /// the display text when no name was given.
    pub fn keys(&self) -> Vec<&str> {
        let mut keys = Vec::new();
        if let Some(f) = &self.func {
            keys.push(f.as_str());
        }
        if let Some(u) = &self.definition_url {
            keys.push(u.as_str());
        }
        if self.func.is_none() && !self.display.is_empty() {
            keys.push(self.display.as_str());
        }
        keys
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Head {
    Op(Op),
    Symbol(Symbol),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuantKind {
    Sum,
    Product,
}

impl QuantKind {
    pub fn tag(self) -> &'static str {
        match self {
            QuantKind::Sum => "sum",
            QuantKind::Product => "product",
        }
    }
}

/// `<apply><sum/><bvar>…</bvar><condition>…</condition>body</apply>`:
/// iteration of `body` with `bvar` bound to each element of the sequence
/// named by `domain`.
#[derive(Debug, Clone, PartialEq)]
pub struct Quantified {
    pub kind: QuantKind,
    pub bvar: String,
    pub domain: Ident,
    pub body: Box<Expr>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Number(Number),
    Identifier(Ident),
    Apply { head: Head, args: Vec<Expr> },
    Quantified(Quantified),
}

impl Expr {
    pub fn apply(op: Op, args: Vec<Expr>) -> Expr {
        Expr::Apply { head: Head::Op(op), args }
    }

    pub fn int(v: i64) -> Expr {
        Expr::Number(Number::int(v))
    }

    pub fn real(v: f64) -> Expr {
        Expr::Number(Number::real(v))
    }

    pub fn ident(name: &str) -> Expr {
        Expr::Identifier(Ident::new(name))
    }

    /// Call of a named blackbox function, name form.
    pub fn call(func: &str, display: &str, args: Vec<Expr>) -> Expr {
        Expr::Apply {
            head: Head::Symbol(Symbol {
                func: Some(func.to_owned()),
                definition_url: None,
                display: display.to_owned(),
            }),
            args,
        }
    }

    /// Short description used in error messages ("plus", "getMass", ...).
    pub fn describe(&self) -> String {
        match self {
            Expr::Number(n) => format!("literal {:?}", n.value),
            Expr::Identifier(i) => format!("identifier `{}`", i.name),
            Expr::Apply { head: Head::Op(op), .. } => format!("`{}`", op.tag()),
            Expr::Apply { head: Head::Symbol(s), .. } => {
                format!("`{}`", s.keys().first().copied().unwrap_or("csymbol"))
            }
            Expr::Quantified(q) => format!("`{}`", q.kind.tag()),
        }
    }
}
