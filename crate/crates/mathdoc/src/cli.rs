//! Command-line front end: `run`, `validate`, `eval`.
//!
//! Exit codes are part of the interface and are kept strict so scripts can
//! branch on them: 0 clean, 1 pipeline error, 2 assert failures, 3 integrity
//! findings. When several apply the smallest (most severe) wins.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use crate::docpipe::{
    base_context, check_integrity, load_document, prepare, run_asserts, run_computations,
    write_outputs, CompDoc, FileResolver, OptOverrides, PipelineError,
};
use crate::mathml::{eval, expr_from_node, DictionarySet, Value};
use crate::xml::{parse_document, serialize_document};

#[derive(Parser)]
#[command(name = "mathdoc", version, about = "Executes computational XML documents")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a document end to end and print its reports
    Run(RunArgs),
    /// Stop after the integrity check and print the report
    Validate(ValidateArgs),
    /// Evaluate one MathML file, optionally against a bindings file
    Eval(EvalArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Input document
    document: PathBuf,
    /// Refuse to run computations when the integrity report is nonempty
    #[arg(long)]
    strict: bool,
    /// Allow http(s) references during transclusion
    #[arg(long)]
    allow_remote: bool,
    /// Write the final document here (also the base directory for writers)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write optimizer traces here as structured text
    #[arg(long)]
    trace: Option<PathBuf>,
    #[command(flatten)]
    opt: OptFlags,
}

/// Optimizer defaults for documents that do not pin their own; an attribute
/// on the computation always wins over a flag.
#[derive(Args, Default)]
struct OptFlags {
    /// Initial probe step, in Angstrom
    #[arg(long)]
    initial_step: Option<f64>,
    /// Step shrink factor, in (0, 1)
    #[arg(long)]
    step_shrink: Option<f64>,
    /// Stop when the step falls below this, in Angstrom
    #[arg(long)]
    min_step: Option<f64>,
    /// Energy evaluation budget
    #[arg(long)]
    max_evaluations: Option<u64>,
    /// Stop when an accepted improvement falls below this, in kcal/mol
    #[arg(long)]
    convergence: Option<f64>,
}

impl OptFlags {
    fn overrides(&self) -> OptOverrides {
        OptOverrides {
            initial_step: self.initial_step,
            step_shrink: self.step_shrink,
            min_step: self.min_step,
            max_evaluations: self.max_evaluations,
            convergence: self.convergence,
        }
    }
}

#[derive(Args)]
struct ValidateArgs {
    /// Input document
    document: PathBuf,
    /// Allow http(s) references during transclusion
    #[arg(long)]
    allow_remote: bool,
}

#[derive(Args)]
struct EvalArgs {
    /// MathML file holding one expression
    mathml: PathBuf,
    /// XML file of scalar bindings: <bind name="x" value="2" units="u:ang"/>
    bindings: Option<PathBuf>,
}

pub fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run(args) => run(args),
        Command::Validate(args) => validate(args),
        Command::Eval(args) => eval_command(args),
    }
}

fn fail(e: &PipelineError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(1)
}

fn load_and_prepare(path: &Path, allow_remote: bool) -> Result<CompDoc, PipelineError> {
    let mut cd = load_document(path)?;
    prepare(&mut cd, &FileResolver { allow_remote })?;
    Ok(cd)
}

fn write_document(cd: &CompDoc, path: &Path) -> Result<(), PipelineError> {
    std::fs::write(path, serialize_document(&cd.doc)).map_err(|e| PipelineError::Io {
        path: path.display().to_string(),
        detail: e.to_string(),
    })
}

fn run(args: RunArgs) -> ExitCode {
    let mut cd = match load_and_prepare(&args.document, args.allow_remote) {
        Ok(cd) => cd,
        Err(e) => return fail(&e),
    };

    let integrity = check_integrity(&cd);
    print!("{integrity}");
    if !integrity.is_clean() && args.strict {
        return ExitCode::from(3);
    }

    let log = match run_computations(&mut cd, &args.opt.overrides()) {
        Ok(log) => log,
        Err(e) => {
            // computations that completed keep their results; write them out
            // so the failure can be inspected and the run resumed
            if let Some(out) = &args.out {
                if let Err(we) = write_document(&cd, out) {
                    eprintln!("error: {we}");
                }
            }
            return fail(&e);
        }
    };
    print!("{log}");

    if let Some(path) = &args.trace {
        let text: String = log.traces().map(|t| t.to_string()).collect();
        if let Err(e) = std::fs::write(path, text) {
            eprintln!("error: cannot write {}: {e}", path.display());
            return ExitCode::from(1);
        }
    }
    if let Some(out) = &args.out {
        if let Err(e) = write_document(&cd, out) {
            return fail(&e);
        }
    }

    let asserts = run_asserts(&cd);
    print!("{asserts}");

    let out_dir = args
        .out
        .as_deref()
        .unwrap_or(&args.document)
        .parent()
        .unwrap_or(Path::new("."))
        .to_path_buf();
    let warnings = match write_outputs(&cd, &out_dir) {
        Ok(w) => w,
        Err(e) => return fail(&e),
    };
    for w in &warnings {
        println!("warning: {w}");
    }

    if !asserts.all_passed() {
        return ExitCode::from(2);
    }
    if !integrity.is_clean() {
        return ExitCode::from(3);
    }
    ExitCode::SUCCESS
}

fn validate(args: ValidateArgs) -> ExitCode {
    let cd = match load_and_prepare(&args.document, args.allow_remote) {
        Ok(cd) => cd,
        Err(e) => return fail(&e),
    };
    let report = check_integrity(&cd);
    print!("{report}");
    if report.is_clean() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(3)
    }
}

fn eval_command(args: EvalArgs) -> ExitCode {
    match eval_file(&args.mathml, args.bindings.as_deref()) {
        Ok(text) => {
            println!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn eval_file(mathml: &Path, bindings: Option<&Path>) -> Result<String, String> {
    let read = |p: &Path| {
        std::fs::read_to_string(p).map_err(|e| format!("cannot read {}: {e}", p.display()))
    };
    let doc = parse_document(&read(mathml)?).map_err(|e| e.to_string())?;
    let expr = expr_from_node(&doc, doc.root()).map_err(|e| e.to_string())?;

    let dicts = Arc::new(DictionarySet::core());
    let mut ctx = base_context(dicts.clone());
    if let Some(path) = bindings {
        let bdoc = parse_document(&read(path)?).map_err(|e| e.to_string())?;
        for el in bdoc.element_descendants_or_self(bdoc.root()) {
            if bdoc.name(el).unwrap().local != "bind" {
                continue;
            }
            let name = bdoc.attr(el, "name").ok_or("binding without a name attribute")?;
            let text = bdoc
                .attr(el, "value")
                .ok_or_else(|| format!("binding `{name}` has no value attribute"))?;
            let raw: f64 = text
                .trim()
                .parse()
                .map_err(|_| format!("binding `{name}`: `{text}` is not a number"))?;
            let value = match bdoc.attr(el, "units") {
                Some(u) => Value::Scalar(
                    dicts.to_canonical_scalar(raw, u).map_err(|e| format!("binding `{name}`: {e}"))?,
                ),
                None => Value::scalar(raw),
            };
            ctx = ctx.bind(name, value);
        }
    }
    let v = eval(&expr, &ctx).map_err(|e| e.to_string())?;
    Ok(render(&v))
}

fn render(v: &Value) -> String {
    match v {
        Value::Scalar(s) => match s.unit.as_deref() {
            Some(u) => format!("{:?} {u}", s.value),
            None => format!("{:?}", s.value),
        },
        Value::Bool(b) => b.to_string(),
        Value::Seq(items) => items.iter().map(render).collect::<Vec<_>>().join("\n"),
        Value::Object(_) => format!("object({})", v.kind()),
    }
}
