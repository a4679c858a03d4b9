use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::Value;

use mde::{Dag, EngineConfig};
use mde_pta::generate::LoopBench;
use mde_pta::{BackendKind, Program};

use crate::demo::{self, DemoKind};
use crate::error::CliError;
use crate::verify::{verify, VerifyConfig};
use crate::{analyze, bench, state};

#[derive(Parser, Debug)]
#[command(name = "mde", version, about = "Deduplicated set engine: demos, analyses, verification, benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Output {
    /// Write output here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Human-readable text instead of JSON.
    #[arg(long)]
    pretty: bool,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum BackendArg {
    Naive,
    SingleLevel,
    MultiLevel,
}

impl From<BackendArg> for BackendKind {
    fn from(b: BackendArg) -> Self {
        match b {
            BackendArg::Naive => BackendKind::Naive,
            BackendArg::SingleLevel => BackendKind::SingleLevel,
            BackendArg::MultiLevel => BackendKind::MultiLevel,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Points-to and liveness facts of a program file.
    Analyze {
        program: PathBuf,
        #[arg(long, value_enum, default_value = "multi-level")]
        backend: BackendArg,
        /// Points the footprint covers, e.g. `6-9` or `1,3`. Default: all.
        #[arg(long)]
        points: Option<String>,
        #[arg(long)]
        state_in: Option<PathBuf>,
        #[arg(long)]
        state_out: Option<PathBuf>,
        #[command(flatten)]
        output: Output,
    },
    /// Run a scripted example and print the final engine configuration.
    Demo {
        #[arg(value_enum)]
        which: DemoKind,
        #[arg(long)]
        state_in: Option<PathBuf>,
        #[arg(long)]
        state_out: Option<PathBuf>,
        #[command(flatten)]
        output: Output,
    },
    /// Check engines and analyses against plain-set oracles.
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Random operations per fuzzer.
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        /// Random programs for the backend comparison.
        #[arg(long, default_value_t = 200)]
        programs: usize,
        /// Skip the exhaustive sweep over small nested maps.
        #[arg(long)]
        no_nested_sweep: bool,
        #[command(flatten)]
        engine: EngineArgs,
        #[command(flatten)]
        output: Output,
    },
    /// Loop-heavy benchmark across backends and forced-ratio scripts.
    Bench {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Run only this backend.
        #[arg(long, value_enum)]
        backend: Option<BackendArg>,
        #[arg(long, default_value_t = LoopBench::default().loops)]
        loops: usize,
        #[arg(long, default_value_t = LoopBench::default().arm_len)]
        arm_len: usize,
        #[arg(long, default_value_t = LoopBench::default().vars)]
        vars: usize,
        #[arg(long, default_value_t = LoopBench::default().sites)]
        sites: usize,
        /// Times the forced-redundancy union is repeated.
        #[arg(long, default_value_t = 100)]
        repeat: usize,
        /// Leave out wall-clock times.
        #[arg(long)]
        no_timing: bool,
        #[command(flatten)]
        output: Output,
    },
    /// Write an engine snapshot: after a demo, after analyzing a program, or
    /// of a fresh engine.
    DumpState {
        #[arg(long, value_enum, conflicts_with = "program")]
        demo: Option<DemoKind>,
        #[arg(long)]
        program: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "multi-level")]
        backend: BackendArg,
        #[arg(long)]
        state_in: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Load a snapshot, summarize it and optionally write it back out.
    LoadState {
        #[arg(long)]
        state_in: PathBuf,
        #[arg(long)]
        state_out: Option<PathBuf>,
        #[command(flatten)]
        output: Output,
    },
}

#[derive(Args, Debug)]
struct EngineArgs {
    /// Ignore known subset relations when answering queries.
    #[arg(long)]
    no_subset_shortcuts: bool,
    /// Largest set `contains` scans linearly.
    #[arg(long)]
    contains_threshold: Option<usize>,
}

impl EngineArgs {
    fn config(&self) -> EngineConfig {
        let mut c = EngineConfig {
            subset_shortcuts: !self.no_subset_shortcuts,
            ..EngineConfig::default()
        };
        if let Some(t) = self.contains_threshold {
            c.contains_linear_threshold = t;
        }
        c
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn read_program(path: &Path) -> Result<Program, CliError> {
    Program::parse(&read(path)?).map_err(|source| CliError::Program {
        path: path.display().to_string(),
        source,
    })
}

fn emit(output: &Output, json: &Value, pretty: impl FnOnce(&Value) -> String, stdout: &mut dyn Write) -> Result<(), CliError> {
    let text = if output.pretty {
        pretty(json)
    } else {
        let mut t = serde_json::to_string_pretty(json).expect("values always serialize");
        t.push('\n');
        t
    };
    match &output.out {
        Some(path) => write(path, &text),
        None => stdout.write_all(text.as_bytes()).map_err(|source| CliError::Io {
            path: PathBuf::from("<stdout>"),
            source,
        }),
    }
}

fn demo_dag(kind: DemoKind, state_in: Option<&Path>) -> Result<Dag<String>, CliError> {
    match state_in {
        Some(p) => state::load_strings(&read(p)?),
        None => Ok(demo::fresh(kind)),
    }
}

fn dispatch(command: Command, stdout: &mut dyn Write) -> Result<(), CliError> {
    match command {
        Command::Analyze {
            program,
            backend,
            points,
            state_in,
            state_out,
            output,
        } => {
            let mut prog = read_program(&program)?;
            let points = points.as_deref().map(analyze::parse_points).transpose()?;
            let backend = BackendKind::from(backend);
            if backend == BackendKind::Naive && state_out.is_some() {
                return Err(CliError::Usage("the naive backend keeps no engine state".into()));
            }
            let saved = state_in.as_deref().map(read).transpose()?;
            let run = analyze::run(&mut prog, backend, saved.as_deref())?;
            let json = analyze::report(&prog, backend, &run, points.as_deref())?;
            if let (Some(path), Some(dag)) = (&state_out, &run.state) {
                write(path, &analyze::dump_state(&prog, dag))?;
            }
            emit(&output, &json, analyze::pretty, stdout)
        }
        Command::Demo {
            which,
            state_in,
            state_out,
            output,
        } => {
            let mut dag = demo_dag(which, state_in.as_deref())?;
            let json = demo::report(which, &mut dag)?;
            if let Some(path) = &state_out {
                write(path, &state::dump(&dag, |s| s.clone()))?;
            }
            emit(
                &output,
                &json,
                |j| format!("{}\n{}", state::pretty_state(&j["state"]), state::pretty_metrics(&j["metrics"])),
                stdout,
            )
        }
        Command::Verify {
            seed,
            trials,
            programs,
            no_nested_sweep,
            engine,
            output,
        } => {
            let cfg = VerifyConfig {
                seed,
                trials,
                programs,
                engine: engine.config(),
                nested_sweep: !no_nested_sweep,
            };
            let report = verify(&cfg);
            let json = serde_json::to_value(&report).expect("report always serializes");
            emit(&output, &json, pretty_verify, stdout)?;
            if report.passed {
                Ok(())
            } else {
                Err(CliError::VerifyFailed)
            }
        }
        Command::Bench {
            seed,
            backend,
            loops,
            arm_len,
            vars,
            sites,
            repeat,
            no_timing,
            output,
        } => {
            let cfg = bench::BenchConfig {
                program: LoopBench {
                    seed,
                    loops,
                    arm_len,
                    vars,
                    sites,
                },
                repeat,
                backends: match backend {
                    Some(b) => vec![b.into()],
                    None => BackendKind::ALL.to_vec(),
                },
                timing: !no_timing,
                ..bench::BenchConfig::default()
            };
            let json = bench::bench(&cfg)?;
            emit(&output, &json, bench::pretty, stdout)
        }
        Command::DumpState {
            demo: which,
            program,
            backend,
            state_in,
            out,
        } => {
            let text = match (which, program) {
                (Some(kind), _) => {
                    let mut dag = demo_dag(kind, state_in.as_deref())?;
                    demo::run(kind, &mut dag)?;
                    state::dump(&dag, |s| s.clone())
                }
                (None, Some(path)) => {
                    let mut prog = read_program(&path)?;
                    let saved = state_in.as_deref().map(read).transpose()?;
                    let run = analyze::run(&mut prog, backend.into(), saved.as_deref())?;
                    let dag = run
                        .state
                        .ok_or_else(|| CliError::Usage("the naive backend keeps no engine state".into()))?;
                    analyze::dump_state(&prog, &dag)
                }
                (None, None) => match state_in {
                    Some(p) => state::dump(&state::load_strings(&read(&p)?)?, |s| s.clone()),
                    None => {
                        let mut dag: Dag<String> = Dag::new();
                        dag.add_flat(demo::BASIC_NODE).expect("fresh dag");
                        state::dump(&dag, |s| s.clone())
                    }
                },
            };
            match out {
                Some(path) => write(&path, &text),
                None => stdout.write_all(text.as_bytes()).map_err(|source| CliError::Io {
                    path: PathBuf::from("<stdout>"),
                    source,
                }),
            }
        }
        Command::LoadState {
            state_in,
            state_out,
            output,
        } => {
            let dag = state::load_strings(&read(&state_in)?)?;
            if let Some(path) = &state_out {
                write(path, &state::dump(&dag, |s| s.clone()))?;
            }
            let json = state::summary(&dag);
            emit(
                &output,
                &json,
                |j| serde_json::to_string_pretty(&j["nodes"]).unwrap_or_default() + "\n",
                stdout,
            )
        }
    }
}

fn pretty_verify(report: &Value) -> String {
    let mut out = format!(
        "seed {}  trials {}  subset shortcuts {}\n",
        report["seed"], report["trials"], report["subset_shortcuts"]
    );
    for c in report["checks"].as_array().into_iter().flatten() {
        let status = if c["passed"] == Value::Bool(true) { "PASS" } else { "FAIL" };
        out += &format!(
            "{status}  {:<14} {:>8} cases  {:>6} subset entries\n",
            c["name"].as_str().unwrap_or("?"),
            c["cases"].to_string(),
            c["subset_entries_checked"].to_string()
        );
        if let Some(ce) = c["counterexample"].as_str() {
            out += ce;
            out += "\n";
        }
    }
    out
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(stderr, "{e}");
                return 2;
            }
            let _ = write!(stdout, "{e}");
            return 0;
        }
    };
    match dispatch(cli.command, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
