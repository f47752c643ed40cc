//! Evaluation contexts.
//!
//! A context is an immutable chain of frames. Binding a variable or
//! registering a function returns a *new* context that shares the tail, so
//! callers can hand a context to a subexpression without fear of mutation and
//! inner bindings shadow outer ones naturally.

use super::dict::DictionarySet;
use super::dimension::Dimension;
use super::eval::EvalError;
use super::value::Value;
use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

type NativeImpl = Arc<dyn Fn(&[Value]) -> Result<Value, EvalError> + Send + Sync>;

/// A host function callable from `csymbol` applications.
#[derive(Clone)]
pub struct NativeFn {
    pub name: String,
    pub arity: usize,
    /// Result dimension when statically known; used by the integrity checker
    /// and by empty aggregates, never enforced at runtime.
    pub result_dim: Option<Dimension>,
    f: NativeImpl,
}

impl NativeFn {
    pub fn new<F>(name: &str, arity: usize, result_dim: Option<Dimension>, f: F) -> NativeFn
    where
        F: Fn(&[Value]) -> Result<Value, EvalError> + Send + Sync + 'static,
    {
        NativeFn { name: name.into(), arity, result_dim, f: Arc::new(f) }
    }

    pub fn call(&self, args: &[Value]) -> Result<Value, EvalError> {
        if args.len() != self.arity {
            return Err(EvalError::Arity {
                what: self.name.clone(),
                expected: self.arity,
                got: args.len(),
            });
        }
        (self.f)(args)
    }
}

impl fmt::Debug for NativeFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NativeFn")
            .field("name", &self.name)
            .field("arity", &self.arity)
            .field("result_dim", &self.result_dim)
            .finish_non_exhaustive()
    }
}

#[derive(Debug)]
struct Frame {
    bindings: HashMap<String, Value>,
    functions: HashMap<String, NativeFn>,
    dicts: Option<Arc<DictionarySet>>,
    parent: Option<Context>,
}

/// Cheap to clone; all frames are shared behind `Arc`.
#[derive(Debug, Clone)]
pub struct Context {
    frame: Arc<Frame>,
}

impl Context {
    pub fn new(dicts: Arc<DictionarySet>) -> Context {
        Context {
            frame: Arc::new(Frame {
                bindings: HashMap::new(),
                functions: HashMap::new(),
                dicts: Some(dicts),
                parent: None,
            }),
        }
    }

    fn child(&self) -> Frame {
        Frame {
            bindings: HashMap::new(),
            functions: HashMap::new(),
            dicts: None,
            parent: Some(self.clone()),
        }
    }

    /// Returns a context extended with one binding. Shadows any outer
    /// binding of the same name.
    pub fn bind(&self, name: &str, value: Value) -> Context {
        let mut f = self.child();
        f.bindings.insert(name.into(), value);
        Context { frame: Arc::new(f) }
    }

    /// Extends with several bindings at once (one new frame).
    pub fn bind_all<I>(&self, pairs: I) -> Context
    where
        I: IntoIterator<Item = (String, Value)>,
    {
        let mut f = self.child();
        f.bindings.extend(pairs);
        Context { frame: Arc::new(f) }
    }

    /// Registers a host function under a key (its name or a URI). Re-using a
    /// key that is already visible is an error: silently shadowing a
    /// function would change the meaning of expressions already checked.
    pub fn register_function(&self, key: &str, f: NativeFn) -> Result<Context, EvalError> {
        if self.function(key).is_some() {
            return Err(EvalError::DuplicateFunction(key.into()));
        }
        let mut frame = self.child();
        frame.functions.insert(key.into(), f);
        Ok(Context { frame: Arc::new(frame) })
    }

    pub fn lookup(&self, name: &str) -> Option<&Value> {
        let mut cur = self;
        loop {
            if let Some(v) = cur.frame.bindings.get(name) {
                return Some(v);
            }
            cur = cur.frame.parent.as_ref()?;
        }
    }

    pub fn function(&self, key: &str) -> Option<&NativeFn> {
        let mut cur = self;
        loop {
            if let Some(f) = cur.frame.functions.get(key) {
                return Some(f);
            }
            cur = cur.frame.parent.as_ref()?;
        }
    }

    /// First function registered under any of `keys`, tried in order.
    pub fn function_by_keys(&self, keys: &[&str]) -> Option<&NativeFn> {
        keys.iter().find_map(|k| self.function(k))
    }

    pub fn dicts(&self) -> &DictionarySet {
        let mut cur = self;
        loop {
            if let Some(d) = &cur.frame.dicts {
                return d;
            }
            cur = cur
                .frame
                .parent
                .as_ref()
                .expect("root context always carries a dictionary set");
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::value::{Scalar, Value};
    use super::*;

    fn base() -> Context {
        Context::new(Arc::new(DictionarySet::empty()))
    }

    #[test]
    fn binding_is_persistent_and_shadows() {
        let root = base();
        let a = root.bind("x", Value::Scalar(Scalar::dimensionless(1.0)));
        let b = a.bind("x", Value::Scalar(Scalar::dimensionless(2.0)));

        assert_eq!(a.lookup("x").unwrap().as_scalar().unwrap().value, 1.0);
        assert_eq!(b.lookup("x").unwrap().as_scalar().unwrap().value, 2.0);
        assert!(root.lookup("x").is_none());
    }

    #[test]
    fn function_registration_rejects_duplicates() {
        let root = base();
        let f = NativeFn::new("f", 1, None, |args| Ok(args[0].clone()));
        let with_f = root.register_function("f", f.clone()).unwrap();
        assert!(with_f.function("f").is_some());
        assert!(matches!(
            with_f.register_function("f", f),
            Err(EvalError::DuplicateFunction(_))
        ));
        // the original context is untouched
        assert!(root.function("f").is_none());
    }

    #[test]
    fn native_call_checks_arity() {
        let f = NativeFn::new("g", 2, None, |args| Ok(args[0].clone()));
        let err = f.call(&[Value::Bool(true)]).unwrap_err();
        assert!(matches!(err, EvalError::Arity { expected: 2, got: 1, .. }));
    }
}
