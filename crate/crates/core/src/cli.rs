//! The `synchrone-rc` command line.
//!
//! Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | diagnostics (syntax, typing, annotations, malformed bytecode) |
//! | 2 | read-once condition fails |
//! | 3 | I/O error |
//! | 4 | termination or quasi-interpretation analysis fails |
//! | 5 | fuel exhausted |
//! | 6 | VM fault |
//! | 7 | bytecode verification fails |

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::analysis::{analyze_program, merge_annotations, AnalyzeOptions};
use crate::ast::Annotations;
use crate::bytecode::{compile_program, Module};
use crate::cfa::{build_call_graph, check_read_once};
use crate::frontend::{self, check_annotations, parse_annotations, Diagnostic, TypedProgram};
use crate::interp::{self, InterpError, Trace};
use crate::qi;
use crate::shape::{verify, VerifyOptions};
use crate::termination::DEFAULT_SEARCH_BOUND;
use crate::vm::{run_vm, VmError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DIAGNOSTICS: i32 = 1;
pub const EXIT_READ_ONCE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_ANALYSIS: i32 = 4;
pub const EXIT_FUEL: i32 = 5;
pub const EXIT_VM_FAULT: i32 = 6;
pub const EXIT_VERIFY: i32 = 7;

pub const DEFAULT_FUEL: u64 = 10_000_000;

#[derive(Parser, Debug)]
#[command(name = "synchrone-rc", version, about = "Synchronous cooperative threads: analyses, compiler and VM")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Parse, type check and run the read-once analysis.
    Check {
        #[command(flatten)]
        common: Common,
        files: Vec<PathBuf>,
    },
    /// Interpret a program and print its trace.
    Run {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        exec: ExecFlags,
        file: PathBuf,
    },
    /// Control points, termination, quasi-interpretation and bounds.
    Analyze {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        ann: AnnotationFlags,
        files: Vec<PathBuf>,
    },
    /// Compile a program to text bytecode.
    Compile {
        #[command(flatten)]
        common: Common,
        /// Output path; `-` writes to standard output. Defaults to `<name>.sbc`.
        #[arg(short = 'o', long = "output")]
        output: Option<PathBuf>,
        file: PathBuf,
    },
    /// Run bytecode (`.sbc`, or a source file compiled on the fly).
    Exec {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        exec: ExecFlags,
        file: PathBuf,
    },
    /// Check flow properties and shapes of bytecode, then its constraints.
    Verify {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        ann: AnnotationFlags,
        file: PathBuf,
    },
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Skip the read-once condition.
    #[arg(long, global = true)]
    pub no_read_once: bool,
    /// Output format of reports and traces.
    #[arg(long, value_enum, default_value_t = Format::Text, global = true)]
    pub format: Format,
    /// Format of diagnostics.
    #[arg(long, value_enum, default_value_t = DiagFormat::Text, global = true)]
    pub diag_format: DiagFormat,
}

#[derive(Args, Debug, Clone)]
pub struct ExecFlags {
    /// Number of instants to run.
    #[arg(long, default_value_t = 10)]
    pub instants: usize,
    /// Step budget per instant.
    #[arg(long, default_value_t = DEFAULT_FUEL)]
    pub fuel: u64,
    /// Report the largest configuration size of each instant (VM only).
    #[arg(long)]
    pub meter: bool,
}

#[derive(Args, Debug, Clone)]
pub struct AnnotationFlags {
    /// Precedence file; defaults to `<name>.prec` when present.
    #[arg(long)]
    pub prec: Option<PathBuf>,
    /// Quasi-interpretation file; defaults to `<name>.qi` when present.
    #[arg(long)]
    pub qi: Option<PathBuf>,
    /// Seed for refutation sampling in quasi-interpretation checks.
    #[arg(long, default_value_t = qi::SAMPLE_SEED)]
    pub seed: u64,
    /// Largest number of symbols for precedence search.
    #[arg(long, default_value_t = DEFAULT_SEARCH_BOUND)]
    pub search_bound: usize,
    /// Candidate budget for quasi-interpretation synthesis.
    #[arg(long, default_value_t = qi::DEFAULT_BUDGET)]
    pub qi_budget: u64,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Text,
    Records,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum DiagFormat {
    Text,
    Json,
}

/// Output streams of one invocation.
pub struct Io<'a> {
    pub out: &'a mut dyn Write,
    pub err: &'a mut dyn Write,
}

macro_rules! say {
    ($w:expr, $($arg:tt)*) => {{
        let _ = write!($w, $($arg)*);
    }};
}

fn print_diags(io: &mut Io, file: &Path, ds: &[Diagnostic], fmt: DiagFormat) {
    let name = file.display().to_string();
    for d in ds {
        match fmt {
            DiagFormat::Text => say!(io.err, "{}\n", d.render(&name)),
            DiagFormat::Json => {
                let mut v = serde_json::to_value(d).unwrap_or_default();
                v["file"] = serde_json::json!(name);
                say!(io.err, "{v}\n");
            }
        }
    }
}

fn read(io: &mut Io, file: &Path) -> Result<String, i32> {
    std::fs::read_to_string(file).map_err(|e| {
        say!(io.err, "{}: error: {e}\n", file.display());
        EXIT_IO
    })
}

fn load(io: &mut Io, file: &Path, fmt: DiagFormat) -> Result<TypedProgram, i32> {
    let src = read(io, file)?;
    match frontend::load(&src) {
        Ok(tp) => {
            print_diags(io, file, &tp.warnings, fmt);
            Ok(tp)
        }
        Err(ds) => {
            print_diags(io, file, &ds, fmt);
            Err(EXIT_DIAGNOSTICS)
        }
    }
}

fn enforce_read_once(io: &mut Io, file: &Path, tp: &TypedProgram) -> Result<(), i32> {
    let r = check_read_once(&build_call_graph(&tp.program));
    if r.pass {
        Ok(())
    } else {
        say!(io.err, "{}: {}\n", file.display(), r.render());
        Err(EXIT_READ_ONCE)
    }
}

fn sidecar(file: &Path, ext: &str) -> PathBuf {
    file.with_extension(ext)
}

/// Annotations from explicit files or `<name>.prec` / `<name>.qi`.
fn sidecar_annotations(io: &mut Io, file: &Path, flags: &AnnotationFlags) -> Result<Annotations, i32> {
    let mut out = Annotations::default();
    for (given, ext) in [(&flags.prec, "prec"), (&flags.qi, "qi")] {
        let path = match given {
            Some(p) => p.clone(),
            None => {
                let p = sidecar(file, ext);
                if !p.exists() {
                    continue;
                }
                p
            }
        };
        let text = read(io, &path)?;
        match parse_annotations(&text) {
            Ok(a) => {
                out.order.extend(a.order);
                out.qi.extend(a.qi);
            }
            Err(d) => {
                print_diags(io, &path, &[d], DiagFormat::Text);
                return Err(EXIT_DIAGNOSTICS);
            }
        }
    }
    Ok(out)
}

fn cmd_check(io: &mut Io, common: &Common, files: &[PathBuf]) -> i32 {
    let mut code = EXIT_OK;
    for f in files {
        let rc = match load(io, f, common.diag_format) {
            Err(rc) => rc,
            Ok(tp) => {
                let r = check_read_once(&build_call_graph(&tp.program));
                match common.format {
                    Format::Text => say!(io.out, "{}: {}\n", f.display(), r.render()),
                    Format::Records => {
                        let rec = serde_json::json!({"file": f.display().to_string(), "kind": "read-once",
                            "pass": r.pass, "witness": r.witness});
                        say!(io.out, "{rec}\n");
                    }
                }
                if r.pass || common.no_read_once {
                    EXIT_OK
                } else {
                    EXIT_READ_ONCE
                }
            }
        };
        code = code.max(rc);
    }
    code
}

fn print_trace(io: &mut Io, t: &Trace, fmt: Format) {
    match fmt {
        Format::Text => say!(io.out, "{}", t.render_text()),
        Format::Records => say!(io.out, "{}", t.render_records()),
    }
}

fn cmd_run(io: &mut Io, common: &Common, exec: &ExecFlags, file: &Path) -> Result<i32, i32> {
    let tp = load(io, file, common.diag_format)?;
    if !common.no_read_once {
        enforce_read_once(io, file, &tp)?;
    }
    match interp::run(&tp, exec.instants, exec.fuel) {
        Ok(t) => {
            print_trace(io, &t, common.format);
            Ok(EXIT_OK)
        }
        Err(e @ InterpError::FuelExhausted { .. }) => {
            say!(io.err, "{}: error: {e}\n", file.display());
            Err(EXIT_FUEL)
        }
        Err(e) => {
            say!(io.err, "{}: error: {e}\n", file.display());
            Err(EXIT_ANALYSIS)
        }
    }
}

fn cmd_analyze(io: &mut Io, common: &Common, ann: &AnnotationFlags, files: &[PathBuf]) -> i32 {
    let mut code = EXIT_OK;
    for f in files {
        let rc = analyze_one(io, common, ann, f).unwrap_or_else(|rc| rc);
        code = code.max(rc);
    }
    code
}

fn analyze_one(io: &mut Io, common: &Common, ann: &AnnotationFlags, file: &Path) -> Result<i32, i32> {
    let tp = load(io, file, common.diag_format)?;
    let side = sidecar_annotations(io, file, ann)?;
    let annotations = merge_annotations(&tp.program.annotations, &side);
    let ds = check_annotations(&tp, &annotations);
    if ds.iter().any(Diagnostic::is_error) {
        print_diags(io, file, &ds, common.diag_format);
        return Err(EXIT_DIAGNOSTICS);
    }
    let opts = AnalyzeOptions {
        enforce_read_once: !common.no_read_once,
        annotations,
        search_bound: ann.search_bound,
        qi_budget: ann.qi_budget,
        seed: ann.seed,
    };
    let r = analyze_program(&tp, &opts);
    match common.format {
        Format::Text => say!(io.out, "{}", r.render()),
        Format::Records => say!(io.out, "{}", r.render_records()),
    }
    if !r.read_once.pass && !common.no_read_once {
        return Err(EXIT_READ_ONCE);
    }
    if !r.pass() {
        if r.read_once.pass {
            say!(io.err, "{}: analysis failed; supply a precedence (.prec) or assignment (.qi), or fix the program\n", file.display());
        }
        return Err(EXIT_ANALYSIS);
    }
    Ok(EXIT_OK)
}

fn cmd_compile(io: &mut Io, common: &Common, output: &Option<PathBuf>, file: &Path) -> Result<i32, i32> {
    let tp = load(io, file, common.diag_format)?;
    if !common.no_read_once {
        enforce_read_once(io, file, &tp)?;
    }
    let m = compile_program(&tp).map_err(|e| {
        say!(io.err, "{}: error: {e}\n", file.display());
        EXIT_DIAGNOSTICS
    })?;
    let text = m.render();
    let target = output.clone().unwrap_or_else(|| file.with_extension("sbc"));
    if target == Path::new("-") {
        say!(io.out, "{text}");
    } else {
        std::fs::write(&target, text).map_err(|e| {
            say!(io.err, "{}: error: {e}\n", target.display());
            EXIT_IO
        })?;
    }
    Ok(EXIT_OK)
}

/// A bytecode module from `.sbc` text, or compiled from a source file.
fn load_module(io: &mut Io, common: &Common, file: &Path) -> Result<Module, i32> {
    if file.extension().is_some_and(|e| e == "sct") {
        let tp = load(io, file, common.diag_format)?;
        return compile_program(&tp).map_err(|e| {
            say!(io.err, "{}: error: {e}\n", file.display());
            EXIT_DIAGNOSTICS
        });
    }
    let text = read(io, file)?;
    Module::parse(&text).map_err(|e| {
        say!(io.err, "{}:{}:1: error: {}\n", file.display(), e.line, e.message);
        EXIT_DIAGNOSTICS
    })
}

fn cmd_exec(io: &mut Io, common: &Common, exec: &ExecFlags, file: &Path) -> Result<i32, i32> {
    let m = load_module(io, common, file)?;
    match run_vm(&m, exec.instants, exec.fuel, exec.meter) {
        Ok(t) => {
            print_trace(io, &t, common.format);
            Ok(EXIT_OK)
        }
        Err(e) => {
            say!(io.err, "{}: error: {e}\n", file.display());
            Err(match e {
                VmError::FuelExhausted { .. } => EXIT_FUEL,
                VmError::Fault { .. } => EXIT_VM_FAULT,
            })
        }
    }
}

fn cmd_verify(io: &mut Io, common: &Common, ann: &AnnotationFlags, file: &Path) -> Result<i32, i32> {
    let mut m = load_module(io, common, file)?;
    let side = sidecar_annotations(io, file, ann)?;
    m.annotations = merge_annotations(&m.annotations, &side);
    let opts = VerifyOptions {
        read_once: !common.no_read_once,
        precedence: None,
        assignment: None,
        search_bound: ann.search_bound,
        qi_budget: ann.qi_budget,
        seed: ann.seed,
    };
    let r = verify(&m, &opts);
    match common.format {
        Format::Text => say!(io.out, "{}", r.render()),
        Format::Records => say!(io.out, "{}", r.render_records()),
    }
    if r.pass() {
        Ok(EXIT_OK)
    } else {
        Err(EXIT_VERIFY)
    }
}

/// Run one invocation and return its exit code.
pub fn run(cli: Cli, io: &mut Io) -> i32 {
    let rc = match &cli.command {
        Command::Check { common, files } => Ok(cmd_check(io, common, files)),
        Command::Run { common, exec, file } => cmd_run(io, common, exec, file),
        Command::Analyze { common, ann, files } => Ok(cmd_analyze(io, common, ann, files)),
        Command::Compile { common, output, file } => cmd_compile(io, common, output, file),
        Command::Exec { common, exec, file } => cmd_exec(io, common, exec, file),
        Command::Verify { common, ann, file } => cmd_verify(io, common, ann, file),
    };
    rc.unwrap_or_else(|rc| rc)
}

/// Parse `args` (including the program name) and run.
pub fn main_with<I, T>(args: I, io: &mut Io) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(cli, io),
        Err(e) => {
            let code = if e.use_stderr() { EXIT_DIAGNOSTICS } else { EXIT_OK };
            say!(if e.use_stderr() { &mut *io.err } else { &mut *io.out }, "{}", e.render());
            code
        }
    }
}
