//! Execution stages: integrity findings, computations, asserts, writers.
//!
//! `check_integrity` never mutates and never fails; it returns findings a
//! human can act on before anything runs. `run_computations` is the only
//! stage that changes the tree, and it is transactional per computation:
//! results are buffered and attached only once every target of that
//! computation has evaluated, so an error leaves either a complete
//! computation or no trace of it. Completed computations are stamped
//! `sem:applied` and skipped by later runs and by the integrity checker,
//! which is what turns a finished document into a reproducible record
//! instead of a one-shot script.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use super::objects::{base_context, DocObj};
use super::prepare::{is_applied, mark_applied, sem_attr};
use super::{selector_prefixes, CompDoc, PipelineError, SEM_NS};
use crate::chem::{molecule_to_node, Molecule, CML_NS};
use crate::mathml::eval::dim_of_value;
use crate::mathml::{
    eval, expr_from_node, static_check_with_dim, Context, DimInfo, Dimension, EvalError, Expr,
    ObjectHandle, Scalar, Value,
};
use crate::optimizer::{optimize, OptConfig, StopReason, TraceRecord};
use crate::selector::{compile_selector, Selector};
use crate::xml::{serialize_fragment, Document, NodeId, QName};

fn elements_in(doc: &Document, ns: &str, local: &str) -> Vec<NodeId> {
    doc.element_descendants_or_self(doc.root())
        .into_iter()
        .filter(|&el| doc.name(el).unwrap().matches(Some(ns), local))
        .collect()
}

fn target_name(doc: &Document, target: NodeId) -> String {
    doc.attr(target, "id").map(str::to_owned).unwrap_or_else(|| doc.node_path(target))
}

fn comp_label(doc: &Document, comp: NodeId, index: usize) -> String {
    doc.attr(comp, "id")
        .map(str::to_owned)
        .unwrap_or_else(|| format!("computation {}", index + 1))
}

fn comp_err(label: &str, detail: impl Into<String>) -> PipelineError {
    PipelineError::Computation { label: label.to_owned(), detail: detail.into() }
}

// ----------------------------------------------------------- computations

#[derive(Clone, Copy, PartialEq, Eq)]
enum Mode {
    SinglePoint,
    Optimize,
}

fn mode_of(cd: &CompDoc, comp: NodeId) -> Result<Mode, String> {
    match cd.doc.attr(comp, "mode").unwrap_or("singlePoint") {
        "singlePoint" => Ok(Mode::SinglePoint),
        "optimize" => Ok(Mode::Optimize),
        other => Err(format!("unknown mode `{other}` (expected singlePoint or optimize)")),
    }
}

fn targets_selector(cd: &CompDoc, comp: NodeId) -> Result<Selector, String> {
    let Some(text) = cd.doc.attr(comp, "targets") else {
        return Err("missing the targets attribute".into());
    };
    let sel = compile_selector(text, &selector_prefixes())
        .map_err(|e| format!("targets selector `{text}`: {e}"))?;
    if sel.is_attribute() {
        return Err(format!("targets selector `{text}` selects attribute values, not elements"));
    }
    Ok(sel)
}

fn functional_form(cd: &CompDoc, comp: NodeId) -> Result<Expr, String> {
    let doc = &cd.doc;
    let forms: Vec<NodeId> = doc
        .child_elements(comp)
        .filter(|&el| doc.name(el).unwrap().matches(Some(SEM_NS), "functionalForm"))
        .collect();
    let [form] = forms.as_slice() else {
        return Err(format!(
            "expected exactly one sem:functionalForm child, found {}",
            forms.len()
        ));
    };
    let inner: Vec<NodeId> = doc.child_elements(*form).collect();
    let [math] = inner.as_slice() else {
        return Err(format!(
            "sem:functionalForm must hold exactly one expression, found {} children",
            inner.len()
        ));
    };
    expr_from_node(doc, *math).map_err(|e| e.to_string())
}

/// A binding declaration: `name` either selected out of the document or
/// produced by applying a host function to earlier bindings.
struct Binding {
    name: String,
    form: BindForm,
}

enum BindForm {
    Select(Selector),
    Call { func: String, args: Vec<String> },
}

/// Reads the `sem:bind` children in order. Structural problems do not stop
/// the walk; they come back beside the bindings that are usable, so the
/// integrity checker can report all of them while `run_computations` fails
/// on the first.
fn parse_bindings(cd: &CompDoc, comp: NodeId, fns: &Context) -> (Vec<Binding>, Vec<String>) {
    let doc = &cd.doc;
    let mut out: Vec<Binding> = Vec::new();
    let mut issues = Vec::new();
    let binds: Vec<NodeId> = doc
        .child_elements(comp)
        .filter(|&el| doc.name(el).unwrap().matches(Some(SEM_NS), "bind"))
        .collect();
    for (i, &el) in binds.iter().enumerate() {
        let which = doc
            .attr(el, "name")
            .map(|n| format!("binding `{n}`"))
            .unwrap_or_else(|| format!("binding {}", i + 1));
        let Some(name) = doc.attr(el, "name") else {
            issues.push(format!("{which} has no name attribute"));
            continue;
        };
        let form = match (doc.attr(el, "select"), doc.attr(el, "call")) {
            (Some(s), None) => match compile_selector(s, &selector_prefixes()) {
                Ok(sel) if sel.is_attribute() => {
                    issues.push(format!(
                        "{which}: selector `{s}` selects attribute values, not elements"
                    ));
                    continue;
                }
                Ok(sel) => BindForm::Select(sel),
                Err(e) => {
                    issues.push(format!("{which}: {e}"));
                    continue;
                }
            },
            (None, Some(fname)) => {
                let args: Vec<String> = doc
                    .attr(el, "args")
                    .unwrap_or("")
                    .split_whitespace()
                    .map(str::to_owned)
                    .collect();
                match fns.function(fname) {
                    None => {
                        issues.push(format!("{which}: no function named `{fname}`"));
                        continue;
                    }
                    Some(f) if f.arity != args.len() => {
                        issues.push(format!(
                            "{which}: `{fname}` expects {} argument(s), got {}",
                            f.arity,
                            args.len()
                        ));
                        continue;
                    }
                    Some(_) => {}
                }
                if let Some(bad) = args.iter().find(|a| !out.iter().any(|b| b.name == **a)) {
                    issues.push(format!(
                        "{which}: argument `{bad}` does not name an earlier binding"
                    ));
                    continue;
                }
                BindForm::Call { func: fname.to_owned(), args }
            }
            _ => {
                issues.push(format!("{which} needs exactly one of select/call"));
                continue;
            }
        };
        if out.iter().any(|b| b.name == name) {
            issues.push(format!("{which} is defined twice"));
            continue;
        }
        out.push(Binding { name: name.to_owned(), form });
    }
    (out, issues)
}

/// A binding fixed to its per-target value. Select forms resolve once;
/// call forms stay symbolic so the optimizer can re-derive them from a
/// moved molecule on every probe.
struct ResolvedBinding {
    name: String,
    /// Nodes a select form matched; empty for call forms.
    nodes: Vec<NodeId>,
    form: ResolvedForm,
}

enum ResolvedForm {
    Fixed(Value),
    Call { func: String, args: Vec<String> },
}

fn resolve_bindings(
    cd: &CompDoc,
    bindings: &[Binding],
    target: NodeId,
) -> Result<Vec<ResolvedBinding>, String> {
    let mut out = Vec::with_capacity(bindings.len());
    for b in bindings {
        out.push(match &b.form {
            BindForm::Select(sel) => {
                let (nodes, value) = resolve_select(cd, &b.name, sel, target)?;
                ResolvedBinding { name: b.name.clone(), nodes, form: ResolvedForm::Fixed(value) }
            }
            BindForm::Call { func, args } => ResolvedBinding {
                name: b.name.clone(),
                nodes: Vec::new(),
                form: ResolvedForm::Call { func: func.clone(), args: args.clone() },
            },
        });
    }
    Ok(out)
}

fn resolve_select(
    cd: &CompDoc,
    name: &str,
    sel: &Selector,
    target: NodeId,
) -> Result<(Vec<NodeId>, Value), String> {
    let nodes = sel.select(&cd.doc, target);
    if nodes.is_empty() {
        return Err(format!("binding `{name}`: selector `{}` matches nothing", sel.source()));
    }
    let mut values = Vec::with_capacity(nodes.len());
    for &n in &nodes {
        values.push(value_of_node(cd, name, n)?);
    }
    let value = if values.len() == 1 { values.pop().unwrap() } else { Value::Seq(values) };
    Ok((nodes, value))
}

fn value_of_node(cd: &CompDoc, name: &str, node: NodeId) -> Result<Value, String> {
    if let Some(dec) = cd.decorations.get(&node) {
        return Ok(Value::Object(dec.handle()));
    }
    let doc = &cd.doc;
    if doc.name(node).is_some_and(|n| n.matches(Some(CML_NS), "scalar")) {
        let text = doc.text_content(node);
        let raw: f64 = text.trim().parse().map_err(|_| {
            format!(
                "binding `{name}`: scalar at {} has non-numeric content `{}`",
                doc.node_path(node),
                text.trim()
            )
        })?;
        return match doc.attr(node, "units") {
            Some(u) => cd
                .dicts
                .to_canonical_scalar(raw, u)
                .map(Value::Scalar)
                .map_err(|e| format!("binding `{name}`: {e}")),
            None => Ok(Value::scalar(raw)),
        };
    }
    Err(format!(
        "binding `{name}`: {} is neither a decorated object nor a cml:scalar",
        doc.node_path(node)
    ))
}

fn call_native(ctx: &Context, func: &str, args: &[String]) -> Result<Value, EvalError> {
    let f = ctx.function(func).cloned().ok_or_else(|| EvalError::UnregisteredFunction {
        symbol: func.to_owned(),
        tried: vec![func.to_owned()],
    })?;
    let mut argv = Vec::with_capacity(args.len());
    for a in args {
        argv.push(ctx.lookup(a).cloned().ok_or_else(|| EvalError::Unbound(a.clone()))?);
    }
    f.call(&argv)
}

/// Builds the evaluation context for one target, optionally substituting
/// the value of one binding (how the optimizer swaps in a moved molecule).
/// Call forms are applied here, after the substitution, so they always see
/// the geometry being probed.
fn instantiate(
    base: &Context,
    resolved: &[ResolvedBinding],
    replace: Option<(&str, &Value)>,
) -> Result<Context, EvalError> {
    let mut ctx = base.clone();
    for rb in resolved {
        let value = match (&rb.form, replace) {
            (_, Some((name, v))) if rb.name == name => v.clone(),
            (ResolvedForm::Fixed(v), _) => v.clone(),
            (ResolvedForm::Call { func, args }, _) => call_native(&ctx, func, args)?,
        };
        ctx = ctx.bind(&rb.name, value);
    }
    Ok(ctx)
}

/// Optimizer settings given on the command line; document attributes win
/// over these, and these win over the defaults.
#[derive(Debug, Clone, Default)]
pub struct OptOverrides {
    pub initial_step: Option<f64>,
    pub step_shrink: Option<f64>,
    pub min_step: Option<f64>,
    pub max_evaluations: Option<u64>,
    pub convergence: Option<f64>,
}

impl OptOverrides {
    fn apply(&self, cfg: &mut OptConfig) {
        if let Some(v) = self.initial_step {
            cfg.initial_step = v;
        }
        if let Some(v) = self.step_shrink {
            cfg.step_shrink = v;
        }
        if let Some(v) = self.min_step {
            cfg.min_step = v;
        }
        if let Some(v) = self.max_evaluations {
            cfg.max_evaluations = v;
        }
        if let Some(v) = self.convergence {
            cfg.convergence = v;
        }
    }
}

fn opt_config_from(
    cd: &CompDoc,
    comp: NodeId,
    overrides: &OptOverrides,
) -> Result<OptConfig, String> {
    let mut cfg = OptConfig::default();
    overrides.apply(&mut cfg);
    let doc = &cd.doc;
    fn attr_num<T: std::str::FromStr>(
        doc: &Document,
        comp: NodeId,
        attr: &str,
    ) -> Result<Option<T>, String> {
        match doc.attr(comp, attr) {
            None => Ok(None),
            Some(t) => t
                .trim()
                .parse()
                .map(Some)
                .map_err(|_| format!("attribute {attr}=\"{t}\" is not a number")),
        }
    }
    if let Some(v) = attr_num(doc, comp, "initialStep")? {
        cfg.initial_step = v;
    }
    if let Some(v) = attr_num(doc, comp, "stepShrink")? {
        cfg.step_shrink = v;
    }
    if let Some(v) = attr_num(doc, comp, "minStep")? {
        cfg.min_step = v;
    }
    if let Some(v) = attr_num(doc, comp, "maxEvaluations")? {
        cfg.max_evaluations = v;
    }
    if let Some(v) = attr_num(doc, comp, "convergence")? {
        cfg.convergence = v;
    }
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

/// Step-by-step record of one optimization, printable as columnar text.
#[derive(Debug, Clone)]
pub struct OptimizeTrace {
    pub label: String,
    pub target: String,
    pub records: Vec<TraceRecord>,
    pub reason: StopReason,
    pub evaluations: u64,
    pub converged: bool,
    pub initial_energy: f64,
    pub final_energy: f64,
}

impl fmt::Display for OptimizeTrace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "# {} on {}: {} evaluations, {}",
            self.label, self.target, self.evaluations, self.reason
        )?;
        writeln!(f, "# evaluations best_energy step")?;
        for r in &self.records {
            writeln!(f, "{} {:?} {:?}", r.evaluations, r.best_energy, r.step)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ComputationRecord {
    pub label: String,
    pub mode: String,
    pub target: String,
    /// One human-readable line describing the attached result.
    pub summary: String,
    pub trace: Option<OptimizeTrace>,
}

#[derive(Debug, Clone, Default)]
pub struct RunLog {
    pub records: Vec<ComputationRecord>,
}

impl RunLog {
    pub fn traces(&self) -> impl Iterator<Item = &OptimizeTrace> {
        self.records.iter().filter_map(|r| r.trace.as_ref())
    }
}

impl fmt::Display for RunLog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.records {
            writeln!(f, "{}", r.summary)?;
        }
        Ok(())
    }
}

/// Evaluates every unapplied `sem:computation` in document order. Stops at
/// the first failure; computations that already completed keep their
/// results and their `sem:applied` stamp, the failing one leaves nothing.
pub fn run_computations(
    cd: &mut CompDoc,
    overrides: &OptOverrides,
) -> Result<RunLog, PipelineError> {
    let mut log = RunLog::default();
    let comps = elements_in(&cd.doc, SEM_NS, "computation");
    for (i, comp) in comps.into_iter().enumerate() {
        if is_applied(&cd.doc, comp) {
            continue;
        }
        let label = comp_label(&cd.doc, comp, i);
        run_one(cd, comp, &label, overrides, &mut log)?;
    }
    Ok(log)
}

struct Comp<'a> {
    node: NodeId,
    label: &'a str,
    targets: Vec<NodeId>,
    expr: Expr,
    bindings: Vec<Binding>,
    base: Context,
}

fn run_one(
    cd: &mut CompDoc,
    comp: NodeId,
    label: &str,
    overrides: &OptOverrides,
    log: &mut RunLog,
) -> Result<(), PipelineError> {
    let mode = mode_of(cd, comp).map_err(|d| comp_err(label, d))?;
    let sel = targets_selector(cd, comp).map_err(|d| comp_err(label, d))?;
    let targets = sel.select(&cd.doc, cd.doc.root());
    if targets.is_empty() {
        return Err(comp_err(
            label,
            format!("targets selector `{}` matches nothing", sel.source()),
        ));
    }
    let expr = functional_form(cd, comp).map_err(|d| comp_err(label, d))?;
    let base = base_context(cd.dicts.clone());
    let (bindings, issues) = parse_bindings(cd, comp, &base);
    if let Some(first) = issues.into_iter().next() {
        return Err(comp_err(label, first));
    }
    let c = Comp { node: comp, label, targets, expr, bindings, base };
    match mode {
        Mode::SinglePoint => run_single_point(cd, &c, log),
        Mode::Optimize => run_optimize(cd, &c, overrides, log),
    }
}

fn eval_err(label: &str, target: &str, source: EvalError) -> PipelineError {
    PipelineError::Eval { label: label.to_owned(), target: target.to_owned(), source }
}

fn run_single_point(cd: &mut CompDoc, c: &Comp, log: &mut RunLog) -> Result<(), PipelineError> {
    let label = c.label;
    let dict_ref = cd
        .doc
        .attr(c.node, "resultDictRef")
        .ok_or_else(|| comp_err(label, "singlePoint computations need a resultDictRef attribute"))?
        .to_owned();
    let entry = cd.dicts.lookup(&dict_ref).ok_or_else(|| {
        comp_err(label, format!("resultDictRef `{dict_ref}` has no dictionary entry"))
    })?;
    let want_dim = entry.dim;
    let units = entry.canonical_unit.clone();

    let mut ready: Vec<(NodeId, Scalar)> = Vec::new();
    for &target in &c.targets {
        let tname = target_name(&cd.doc, target);
        let resolved = resolve_bindings(cd, &c.bindings, target)
            .map_err(|d| comp_err(label, format!("on {tname}: {d}")))?;
        let ctx = instantiate(&c.base, &resolved, None).map_err(|e| eval_err(label, &tname, e))?;
        let v = eval(&c.expr, &ctx).map_err(|e| eval_err(label, &tname, e))?;
        let s = match v {
            Value::Scalar(s) => s,
            other => {
                return Err(comp_err(
                    label,
                    format!("on {tname}: result is {}, not a number", other.kind()),
                ))
            }
        };
        if !s.value.is_finite() {
            return Err(PipelineError::NonFinite { label: label.to_owned(), value: s.value });
        }
        if s.dim != want_dim {
            return Err(comp_err(
                label,
                format!(
                    "on {tname}: result dimension {} does not match the {} declared by `{dict_ref}`",
                    s.dim, want_dim
                ),
            ));
        }
        ready.push((target, s));
    }

    // Attach only now, once every target went through.
    for (target, s) in ready {
        let tname = target_name(&cd.doc, target);
        attach_property(&mut cd.doc, target, &dict_ref, units.as_deref(), s.value, label);
        let unit_suffix = units.as_deref().map(|u| format!(" {u}")).unwrap_or_default();
        log.records.push(ComputationRecord {
            label: label.to_owned(),
            mode: "singlePoint".into(),
            target: tname.clone(),
            summary: format!("{label}: {tname} {dict_ref} = {:?}{unit_suffix}", s.value),
            trace: None,
        });
    }
    mark_applied(&mut cd.doc, c.node);
    Ok(())
}

fn run_optimize(
    cd: &mut CompDoc,
    c: &Comp,
    overrides: &OptOverrides,
    log: &mut RunLog,
) -> Result<(), PipelineError> {
    let label = c.label;
    let cfg = opt_config_from(cd, c.node, overrides).map_err(|d| comp_err(label, d))?;

    let mut ready: Vec<(NodeId, Molecule, OptimizeTrace)> = Vec::new();
    for &target in &c.targets {
        let tname = target_name(&cd.doc, target);
        let mol = cd
            .decorations
            .get(&target)
            .and_then(|d| d.as_molecule())
            .cloned()
            .ok_or_else(|| {
                comp_err(label, format!("optimize target {tname} is not a decorated molecule"))
            })?;
        let resolved = resolve_bindings(cd, &c.bindings, target)
            .map_err(|d| comp_err(label, format!("on {tname}: {d}")))?;
        // The binding that selected exactly the target is the one the search
        // rebinds on every probe; it must be unambiguous.
        let rebound: Vec<&ResolvedBinding> = resolved
            .iter()
            .filter(|rb| rb.nodes.len() == 1 && rb.nodes[0] == target)
            .collect();
        let rebound_name = match rebound.as_slice() {
            [one] => one.name.clone(),
            [] => {
                return Err(comp_err(
                    label,
                    format!(
                        "no binding selects the target {tname}; optimize rebinds that name during the search"
                    ),
                ))
            }
            many => {
                let names: Vec<String> =
                    many.iter().map(|rb| format!("`{}`", rb.name)).collect();
                return Err(comp_err(
                    label,
                    format!(
                        "bindings {} all select the target {tname}; optimize needs exactly one",
                        names.join(", ")
                    ),
                ));
            }
        };

        // The starting geometry must evaluate cleanly to a molar energy;
        // during the search a failing probe is merely rejected.
        let ctx0 = instantiate(&c.base, &resolved, None).map_err(|e| eval_err(label, &tname, e))?;
        let v0 = eval(&c.expr, &ctx0).map_err(|e| eval_err(label, &tname, e))?;
        let s0 = match v0 {
            Value::Scalar(s) => s,
            other => {
                return Err(comp_err(
                    label,
                    format!("on {tname}: energy is {}, not a number", other.kind()),
                ))
            }
        };
        if s0.dim != Dimension::MOLAR_ENERGY {
            return Err(comp_err(
                label,
                format!(
                    "on {tname}: the functional form has dimension {}, not a molar energy",
                    s0.dim
                ),
            ));
        }
        if !s0.value.is_finite() {
            return Err(PipelineError::NonFinite { label: label.to_owned(), value: s0.value });
        }

        let energy = |coords: &[f64]| -> f64 {
            let probe = match mol.with_coords_flat(coords) {
                Ok(m) => m,
                Err(_) => return f64::NAN,
            };
            let handle = Value::Object(ObjectHandle::new(DocObj::Molecule(Arc::new(probe))));
            let ctx = match instantiate(&c.base, &resolved, Some((&rebound_name, &handle))) {
                Ok(ctx) => ctx,
                Err(_) => return f64::NAN,
            };
            match eval(&c.expr, &ctx) {
                Ok(Value::Scalar(s)) if s.dim == Dimension::MOLAR_ENERGY => s.value,
                _ => f64::NAN,
            }
        };
        let out = optimize(energy, &mol.coords_flat(), &cfg)
            .map_err(|e| PipelineError::Optimizer { label: label.to_owned(), source: e })?;
        let mut best =
            mol.with_coords_flat(&out.coords).map_err(|e| comp_err(label, e.to_string()))?;
        best.id = mol.id.as_ref().map(|id| format!("{id}-opt"));
        ready.push((
            target,
            best,
            OptimizeTrace {
                label: label.to_owned(),
                target: tname,
                records: out.records,
                reason: out.reason,
                evaluations: out.evaluations,
                converged: out.converged,
                initial_energy: s0.value,
                final_energy: out.energy,
            },
        ));
    }

    for (target, best, trace) in ready {
        attach_molecule(&mut cd.doc, target, &best, label);
        log.records.push(ComputationRecord {
            label: label.to_owned(),
            mode: "optimize".into(),
            target: trace.target.clone(),
            summary: format!(
                "{label}: {} energy {:?} -> {:?} in {} evaluations ({})",
                trace.target, trace.initial_energy, trace.final_energy, trace.evaluations,
                trace.reason
            ),
            trace: Some(trace),
        });
    }
    mark_applied(&mut cd.doc, c.node);
    // Register the appended copies so later computations can target them.
    super::decorate(cd)
}

/// Prefix for CML elements created next to `target`: the target's own
/// prefix when it is itself CML, the conventional `cml` otherwise.
fn cml_prefix(doc: &Document, target: NodeId) -> Option<String> {
    let name = doc.name(target).unwrap();
    if name.ns.as_deref() == Some(CML_NS) {
        name.prefix.clone()
    } else {
        Some("cml".into())
    }
}

fn attach_property(
    doc: &mut Document,
    target: NodeId,
    dict_ref: &str,
    units: Option<&str>,
    value: f64,
    label: &str,
) {
    let prefix = cml_prefix(doc, target);
    let name = |local: &str| QName::new(Some(CML_NS), prefix.as_deref(), local);
    let prop = doc.create_element(name("property"));
    doc.append_child(target, prop);
    doc.set_attr(prop, QName::plain("dictRef"), dict_ref);
    doc.set_attr(prop, sem_attr("resultOf"), label);
    doc.ensure_prefix(prop, prefix.as_deref().unwrap_or(""), CML_NS);
    doc.ensure_prefix(prop, "sem", SEM_NS);
    let scalar = doc.create_element(name("scalar"));
    doc.append_child(prop, scalar);
    doc.set_attr(scalar, QName::plain("dictRef"), dict_ref);
    if let Some(u) = units {
        doc.set_attr(scalar, QName::plain("units"), u);
    }
    let text = doc.create_text(format!("{value:?}"));
    doc.append_child(scalar, text);
}

fn attach_molecule(doc: &mut Document, target: NodeId, m: &Molecule, label: &str) {
    let parent = doc.parent(target).expect("computation targets sit below the root");
    let prefix = cml_prefix(doc, target);
    let node = molecule_to_node(m, doc, parent, prefix.as_deref());
    doc.set_attr(node, sem_attr("resultOf"), label);
    doc.ensure_prefix(node, "sem", SEM_NS);
    doc.detach(node);
    let idx = doc
        .children(parent)
        .iter()
        .position(|&ch| ch == target)
        .expect("target is a child of its parent");
    doc.insert_child(parent, idx + 1, node);
}

// -------------------------------------------------------------- integrity

/// Findings from the static pass; empty means the document looks runnable.
#[derive(Debug, Clone, Default)]
pub struct IntegrityReport {
    pub findings: Vec<String>,
}

impl IntegrityReport {
    pub fn is_clean(&self) -> bool {
        self.findings.is_empty()
    }
}

impl fmt::Display for IntegrityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.findings.is_empty() {
            return writeln!(f, "integrity: clean");
        }
        writeln!(f, "integrity: {} finding(s)", self.findings.len())?;
        for x in &self.findings {
            writeln!(f, "  - {x}")?;
        }
        Ok(())
    }
}

/// Checks every unapplied computation, every assert and every writer
/// without evaluating a single formula body: selectors must compile and
/// match, bindings must resolve, and the statically known dimensions must
/// fit together. Runtime surprises remain possible (a probe geometry can
/// still collapse), but a clean report means the document's wiring is
/// sound.
pub fn check_integrity(cd: &CompDoc) -> IntegrityReport {
    let mut findings = Vec::new();
    let base = base_context(cd.dicts.clone());

    let comps = elements_in(&cd.doc, SEM_NS, "computation");
    for (i, &comp) in comps.iter().enumerate() {
        if is_applied(&cd.doc, comp) {
            continue;
        }
        let label = comp_label(&cd.doc, comp, i);
        check_computation(cd, comp, &label, &base, &mut findings);
    }

    for node in elements_in(&cd.doc, SEM_NS, "assert") {
        let at = assert_location(&cd.doc, node);
        match parse_assert(cd, node) {
            Err(msg) => findings.push(format!("assert {at}: {msg}")),
            Ok(spec) => match &spec.expect {
                Expect::Scalar { units: Some(u), .. } => {
                    if cd.dicts.lookup(u).is_none() {
                        findings.push(format!("assert {at}: unknown units `{u}`"));
                    }
                }
                Expect::File(rel) => {
                    let path = golden_path(cd, rel);
                    if !path.exists() {
                        findings.push(format!(
                            "assert {at}: golden file {} does not exist",
                            path.display()
                        ));
                    }
                }
                Expect::Scalar { .. } => {}
            },
        }
    }

    for node in elements_in(&cd.doc, SEM_NS, "writer") {
        if let Err(msg) = parse_writer(cd, node) {
            findings.push(format!("writer at {}: {msg}", cd.doc.node_path(node)));
        }
    }

    let mut seen = HashSet::new();
    findings.retain(|x| seen.insert(x.clone()));
    IntegrityReport { findings }
}

fn check_computation(
    cd: &CompDoc,
    comp: NodeId,
    label: &str,
    base: &Context,
    findings: &mut Vec<String>,
) {
    let mode = match mode_of(cd, comp) {
        Ok(m) => Some(m),
        Err(msg) => {
            findings.push(format!("{label}: {msg}"));
            None
        }
    };

    let targets = match targets_selector(cd, comp) {
        Ok(sel) => {
            let nodes = sel.select(&cd.doc, cd.doc.root());
            if nodes.is_empty() {
                findings.push(format!(
                    "{label}: targets selector `{}` matches nothing",
                    sel.source()
                ));
            }
            nodes
        }
        Err(msg) => {
            findings.push(format!("{label}: {msg}"));
            Vec::new()
        }
    };

    let expr = match functional_form(cd, comp) {
        Ok(e) => Some(e),
        Err(msg) => {
            findings.push(format!("{label}: {msg}"));
            None
        }
    };

    let (bindings, issues) = parse_bindings(cd, comp, base);
    findings.extend(issues.into_iter().map(|m| format!("{label}: {m}")));

    let mut declared = None;
    if mode == Some(Mode::SinglePoint) {
        match cd.doc.attr(comp, "resultDictRef") {
            None => findings
                .push(format!("{label}: singlePoint computations need a resultDictRef attribute")),
            Some(dr) => match cd.dicts.lookup(dr) {
                None => findings
                    .push(format!("{label}: resultDictRef `{dr}` has no dictionary entry")),
                Some(entry) => declared = Some((dr.to_owned(), entry.dim)),
            },
        }
    }
    if mode == Some(Mode::Optimize) {
        if let Err(msg) = opt_config_from(cd, comp, &OptOverrides::default()) {
            findings.push(format!("{label}: {msg}"));
        }
    }

    for &target in &targets {
        let tname = target_name(&cd.doc, target);
        let mut env: HashMap<String, DimInfo> = HashMap::new();
        let mut ctx = base.clone();
        let mut rebound = 0usize;
        for b in &bindings {
            let info = match &b.form {
                BindForm::Select(sel) => match resolve_select(cd, &b.name, sel, target) {
                    Ok((nodes, v)) => {
                        if nodes.len() == 1 && nodes[0] == target {
                            rebound += 1;
                        }
                        ctx = ctx.bind(&b.name, v.clone());
                        dim_of_value(&v)
                    }
                    Err(msg) => {
                        findings.push(format!("{label} on {tname}: {msg}"));
                        DimInfo::Unknown
                    }
                },
                BindForm::Call { func, args } => match call_native(&ctx, func, args) {
                    Ok(v) => {
                        ctx = ctx.bind(&b.name, v.clone());
                        dim_of_value(&v)
                    }
                    Err(e) => {
                        findings.push(format!("{label} on {tname}: binding `{}`: {e}", b.name));
                        DimInfo::Unknown
                    }
                },
            };
            env.insert(b.name.clone(), info);
        }

        if let Some(expr) = &expr {
            let (msgs, dim) = static_check_with_dim(expr, &env, base);
            findings.extend(msgs.into_iter().map(|m| format!("{label} on {tname}: {m}")));
            if let (Some((dr, want)), DimInfo::Known(got)) = (&declared, dim) {
                if got != *want {
                    findings.push(format!(
                        "{label} on {tname}: formula has dimension {got} but resultDictRef `{dr}` declares {want}"
                    ));
                }
            }
        }

        if mode == Some(Mode::Optimize) {
            if cd.decorations.get(&target).and_then(|d| d.as_molecule()).is_none() {
                findings.push(format!(
                    "{label}: optimize target {tname} is not a decorated molecule"
                ));
            }
            if rebound != 1 {
                findings.push(format!(
                    "{label}: {rebound} bindings select the target {tname}; optimize needs exactly one to rebind"
                ));
            }
        }
    }
}

// ------------------------------------------------------------------ asserts

const DEFAULT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct AssertResult {
    pub location: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Default)]
pub struct AssertReport {
    pub results: Vec<AssertResult>,
}

impl AssertReport {
    pub fn all_passed(&self) -> bool {
        self.results.iter().all(|r| r.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &AssertResult> {
        self.results.iter().filter(|r| !r.passed)
    }
}

impl fmt::Display for AssertReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.results {
            let status = if r.passed { "PASS" } else { "FAIL" };
            writeln!(f, "{status} {}: {}", r.location, r.detail)?;
        }
        Ok(())
    }
}

struct AssertSpec {
    sel: Selector,
    expect: Expect,
}

enum Expect {
    Scalar { want: f64, tol: f64, units: Option<String> },
    File(String),
}

fn assert_location(doc: &Document, node: NodeId) -> String {
    doc.attr(node, "id").map(str::to_owned).unwrap_or_else(|| doc.node_path(node))
}

fn parse_assert(cd: &CompDoc, node: NodeId) -> Result<AssertSpec, String> {
    let doc = &cd.doc;
    let sel_text = doc.attr(node, "select").ok_or("missing the select attribute")?;
    let sel =
        compile_selector(sel_text, &selector_prefixes()).map_err(|e| e.to_string())?;
    let expect = match (doc.attr(node, "value"), doc.attr(node, "file")) {
        (Some(v), None) => {
            let want: f64 =
                v.trim().parse().map_err(|_| format!("value `{v}` is not a number"))?;
            let tol = match doc.attr(node, "tolerance") {
                None => DEFAULT_TOLERANCE,
                Some(t) => {
                    let tol: f64 = t
                        .trim()
                        .parse()
                        .map_err(|_| format!("tolerance `{t}` is not a number"))?;
                    if !(tol >= 0.0 && tol.is_finite()) {
                        return Err(format!("tolerance `{t}` must be finite and nonnegative"));
                    }
                    tol
                }
            };
            Expect::Scalar { want, tol, units: doc.attr(node, "units").map(str::to_owned) }
        }
        (None, Some(path)) => {
            if sel.is_attribute() {
                return Err("file comparison needs an element selector".into());
            }
            Expect::File(path.to_owned())
        }
        _ => return Err("needs exactly one of value/file".into()),
    };
    Ok(AssertSpec { sel, expect })
}

fn golden_path(cd: &CompDoc, rel: &str) -> PathBuf {
    let p = Path::new(rel);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        cd.path.parent().unwrap_or(Path::new(".")).join(p)
    }
}

/// Evaluates every `sem:assert` in document order. Nothing here is fatal:
/// structural problems (bad selector, ambiguous match, unreadable golden
/// file) are failures in the report, and the caller maps them to an exit
/// code.
pub fn run_asserts(cd: &CompDoc) -> AssertReport {
    let mut results = Vec::new();
    for node in elements_in(&cd.doc, SEM_NS, "assert") {
        let location = assert_location(&cd.doc, node);
        let (passed, detail) = match check_assert(cd, node) {
            Ok(pair) => pair,
            Err(detail) => (false, detail),
        };
        results.push(AssertResult { location, passed, detail });
    }
    AssertReport { results }
}

fn match_count(source: &str, n: usize) -> String {
    format!("selector `{source}` matches {n} node(s), need exactly one")
}

fn check_assert(cd: &CompDoc, node: NodeId) -> Result<(bool, String), String> {
    let spec = parse_assert(cd, node)?;
    let doc = &cd.doc;
    let nodes = spec.sel.select(doc, doc.root());
    match &spec.expect {
        Expect::Scalar { want, tol, units } => {
            let (got_text, got_units) = if spec.sel.is_attribute() {
                let values = spec.sel.select_values(doc, doc.root());
                let [one] = values.as_slice() else {
                    return Err(match_count(spec.sel.source(), values.len()));
                };
                (one.clone(), None)
            } else {
                let [one] = nodes.as_slice() else {
                    return Err(match_count(spec.sel.source(), nodes.len()));
                };
                (doc.text_content(*one), doc.attr(*one, "units").map(str::to_owned))
            };
            let raw: f64 = got_text
                .trim()
                .parse()
                .map_err(|_| format!("selected content `{}` is not a number", got_text.trim()))?;
            let got = match &got_units {
                Some(u) => cd.dicts.to_canonical_scalar(raw, u).map_err(|e| e.to_string())?,
                None => Scalar::dimensionless(raw),
            };
            let want = match units {
                Some(u) => cd.dicts.to_canonical_scalar(*want, u).map_err(|e| e.to_string())?,
                None => Scalar::dimensionless(*want),
            };
            if got_units.is_some() && units.is_some() && got.dim != want.dim {
                return Ok((
                    false,
                    format!(
                        "dimension mismatch: selected value is {}, expected {}",
                        got.dim, want.dim
                    ),
                ));
            }
            let limit = tol * want.value.abs().max(1.0);
            let passed = (got.value - want.value).abs() <= limit;
            Ok((
                passed,
                format!("got {:?}, want {:?} (tolerance {tol:?})", got.value, want.value),
            ))
        }
        Expect::File(rel) => {
            let [one] = nodes.as_slice() else {
                return Err(match_count(spec.sel.source(), nodes.len()));
            };
            let path = golden_path(cd, rel);
            let text = std::fs::read_to_string(&path)
                .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
            let golden = crate::xml::parse_document(&text)
                .map_err(|e| format!("cannot parse {}: {e}", path.display()))?;
            let want = serialize_fragment(&golden, golden.root());
            let frag = doc.extract_fragment(*one);
            let got = serialize_fragment(&frag, frag.root());
            if got == want {
                Ok((true, format!("matches {rel}")))
            } else {
                Ok((
                    false,
                    format!(
                        "canonical form differs from {rel} ({} vs {} bytes)",
                        got.len(),
                        want.len()
                    ),
                ))
            }
        }
    }
}

// ------------------------------------------------------------------ writers

fn parse_writer(cd: &CompDoc, node: NodeId) -> Result<(Selector, String), String> {
    let doc = &cd.doc;
    let sel_text = doc.attr(node, "select").ok_or("missing the select attribute")?;
    let sel =
        compile_selector(sel_text, &selector_prefixes()).map_err(|e| e.to_string())?;
    if sel.is_attribute() {
        return Err(format!("selector `{sel_text}` selects attribute values, not elements"));
    }
    let to = doc.attr(node, "to").ok_or("missing the to attribute")?;
    if to.is_empty() {
        return Err("the to attribute is empty".into());
    }
    Ok((sel, to.to_owned()))
}

/// Serializes each `sem:writer`'s unique match as a standalone canonical
/// fragment under `out_dir`. A selector that matches nothing produces a
/// warning and no file; more than one match is an error, because silently
/// picking one would hide a document problem.
pub fn write_outputs(cd: &CompDoc, out_dir: &Path) -> Result<Vec<String>, PipelineError> {
    let mut warnings = Vec::new();
    for node in elements_in(&cd.doc, SEM_NS, "writer") {
        let at = cd.doc.node_path(node);
        let (sel, to) = parse_writer(cd, node)
            .map_err(|detail| PipelineError::Write { path: at.clone(), detail })?;
        let nodes = sel.select(&cd.doc, cd.doc.root());
        match nodes.as_slice() {
            [] => warnings.push(format!(
                "writer at {at}: selector `{}` matches nothing; {to} not written",
                sel.source()
            )),
            [one] => {
                let frag = cd.doc.extract_fragment(*one);
                let path = {
                    let p = Path::new(&to);
                    if p.is_absolute() { p.to_path_buf() } else { out_dir.join(p) }
                };
                let write_err = |e: std::io::Error| PipelineError::Write {
                    path: path.display().to_string(),
                    detail: e.to_string(),
                };
                if let Some(dir) = path.parent() {
                    std::fs::create_dir_all(dir).map_err(write_err)?;
                }
                let mut text = serialize_fragment(&frag, frag.root());
                text.push('\n');
                std::fs::write(&path, text).map_err(write_err)?;
            }
            many => {
                return Err(PipelineError::Write {
                    path: to.clone(),
                    detail: format!(
                        "selector `{}` matches {} nodes; a writer needs exactly one",
                        sel.source(),
                        many.len()
                    ),
                })
            }
        }
    }
    Ok(warnings)
}
