//! Runtime values produced by evaluation.

use super::dimension::Dimension;
use std::any::Any;
use std::fmt;
use std::sync::Arc;

/// A dimensioned number. The `unit` label is informational (it names the
/// canonical unit the value is expressed in); correctness checks run on the
/// dimension vector, and values are converted to canonical units at the
/// boundaries where they enter the system.
#[derive(Debug, Clone, PartialEq)]
pub struct Scalar {
    pub value: f64,
    pub dim: Dimension,
    pub unit: Option<String>,
}

impl Scalar {
    pub fn dimensionless(value: f64) -> Scalar {
        Scalar { value, dim: Dimension::DIMENSIONLESS, unit: None }
    }

    pub fn new(value: f64, dim: Dimension) -> Scalar {
        Scalar { value, dim, unit: None }
    }

    pub fn with_unit(value: f64, dim: Dimension, unit: impl Into<String>) -> Scalar {
        Scalar { value, dim, unit: Some(unit.into()) }
    }
}

/// Opaque domain object passed through evaluation into blackbox functions
/// (atoms, molecules, interaction terms, parameter sets).
pub trait DomainObject: Any + Send + Sync + fmt::Debug {
    /// Short kind tag for error messages: "atom", "molecule", ...
    fn kind(&self) -> &'static str;
    fn as_any(&self) -> &dyn Any;
}

/// Shared handle to a domain object. Identity, not content, defines equality.
#[derive(Clone, Debug)]
pub struct ObjectHandle(Arc<dyn DomainObject>);

impl ObjectHandle {
    pub fn new(o: impl DomainObject) -> ObjectHandle {
        ObjectHandle(Arc::new(o))
    }

    pub fn kind(&self) -> &'static str {
        self.0.kind()
    }

    pub fn downcast_ref<T: DomainObject>(&self) -> Option<&T> {
        self.0.as_any().downcast_ref::<T>()
    }
}

impl PartialEq for ObjectHandle {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Scalar(Scalar),
    Bool(bool),
    Seq(Vec<Value>),
    Object(ObjectHandle),
}

impl Value {
    pub fn scalar(v: f64) -> Value {
        Value::Scalar(Scalar::dimensionless(v))
    }

    /// Kind tag for error messages.
    pub fn kind(&self) -> String {
        match self {
            Value::Scalar(_) => "scalar".into(),
            Value::Bool(_) => "boolean".into(),
            Value::Seq(_) => "sequence".into(),
            Value::Object(o) => format!("object({})", o.kind()),
        }
    }

    pub fn as_scalar(&self) -> Option<&Scalar> {
        match self {
            Value::Scalar(s) => Some(s),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Scalar(s) => {
                write!(f, "{:?}", s.value)?;
                if let Some(u) = &s.unit {
                    write!(f, " {u}")?;
                } else if !s.dim.is_dimensionless() {
                    write!(f, " [{}]", s.dim)?;
                }
                Ok(())
            }
            Value::Bool(b) => write!(f, "{b}"),
            Value::Seq(items) => {
                f.write_str("(")?;
                for (i, v) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{v}")?;
                }
                f.write_str(")")
            }
            Value::Object(o) => write!(f, "<{}>", o.kind()),
        }
    }
}
