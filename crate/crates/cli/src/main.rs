use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use membrane_gne::builder::{build_gne_system, build_mult_system, GameSpec};
use membrane_gne::engine::{Engine, RunOptions};
use membrane_gne::harness::{
    compare_engines, run_gne, run_mult, EngineChoice, ExperimentConfig, Preset,
};
use membrane_gne::oracle::simulate;
use membrane_gne::pspec;

#[derive(Parser)]
#[command(name = "mgne", version, about = "P systems for GNE seeking under BNN dynamics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the GNE P system (or a multiplier) as .pspec text.
    Build {
        #[command(flatten)]
        inst: Instance,
        /// Build the stand-alone multiplier for M·N instead.
        #[arg(long, num_args = 2, value_names = ["M", "N"])]
        mult: Option<Vec<u64>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a .pspec system to quiescence.
    Run {
        file: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        max_steps: usize,
        /// Write step records here.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        strict: bool,
    },
    /// Multiply with the peasant-multiplication P system.
    Mult { m: u64, n: u64 },
    /// Integrate the discretized dynamics directly; CSV on stdout or --out.
    Oracle {
        #[command(flatten)]
        inst: Instance,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run both engines and report the first divergence.
    Compare {
        #[command(flatten)]
        inst: Instance,
        #[arg(long)]
        strict: bool,
    },
    /// Full experiment: CSVs, stage timings and diff into --out.
    Experiment {
        #[command(flatten)]
        inst: Instance,
        #[arg(long, value_enum, default_value_t = EngineArg::Both)]
        engine: EngineArg,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        strict: bool,
    },
}

#[derive(Args)]
struct Instance {
    /// Game spec (TOML). Without it the instance is sampled from --seed.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = PresetArg::Experiment)]
    preset: PresetArg,
    #[arg(long)]
    loops: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetArg {
    /// Three players, five slots.
    Experiment,
    /// Two players, two strategies each.
    Duopoly,
}

#[derive(Clone, Copy, ValueEnum)]
enum EngineArg {
    Psystem,
    Oracle,
    Both,
}

impl Instance {
    fn config(&self) -> ExperimentConfig {
        let default_loops = 10;
        let preset = match self.preset {
            PresetArg::Experiment => Preset::experiment(default_loops),
            PresetArg::Duopoly => Preset::duopoly(default_loops),
        };
        ExperimentConfig {
            spec_path: self.spec.clone(),
            seed: self.seed,
            preset,
            loops: self.loops,
            engine: EngineChoice::Both,
            out: None,
            trace: None,
            strict: false,
        }
    }

    fn spec(&self) -> Result<GameSpec, String> {
        self.config().resolve_spec().map_err(|e| e.to_string())
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), String> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| format!("{}: {e}", p.display())),
        None => {
            use std::io::Write;
            match std::io::stdout().lock().write_all(text.as_bytes()) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.to_string()),
                _ => Ok(()),
            }
        }
    }
}

fn execute(cmd: Command) -> Result<bool, String> {
    match cmd {
        Command::Build { inst, mult, out } => {
            let sys = match mult.as_deref() {
                Some(&[m, n]) => build_mult_system(m, n),
                _ => build_gne_system(&inst.spec()?).map_err(|e| e.to_string())?,
            };
            emit(out.as_deref(), &pspec::serialize(&sys))?;
            Ok(true)
        }
        Command::Run {
            file,
            max_steps,
            trace,
            strict,
        } => {
            let text =
                std::fs::read_to_string(&file).map_err(|e| format!("{}: {e}", file.display()))?;
            let sys = pspec::parse(&text).map_err(|e| format!("{}:{e}", file.display()))?;
            let engine = Engine::new(sys).map_err(|e| e.to_string())?;
            let t = engine
                .run(RunOptions::new(max_steps).strict(strict))
                .map_err(|e| e.to_string())?;
            println!("{} steps, {:?}", t.steps_executed(), t.halting);
            let fc = t.final_config();
            println!("skin: {}", fc.skin());
            println!("environment: {}", fc.environment());
            if let Some(p) = trace {
                emit(Some(&p), &t.export_steps())?;
            }
            Ok(t.halting == membrane_gne::engine::Halting::Quiescent)
        }
        Command::Mult { m, n } => {
            let r = run_mult(m, n).map_err(|e| e.to_string())?;
            print!("{r}");
            Ok(r.ok())
        }
        Command::Oracle { inst, out } => {
            let t = simulate(&inst.spec()?).map_err(|e| e.to_string())?;
            emit(out.as_deref(), &t.to_csv())?;
            Ok(true)
        }
        Command::Compare { inst, strict } => {
            let d = compare_engines(&inst.spec()?, strict).map_err(|e| e.to_string())?;
            print!("{d}");
            Ok(d.agrees())
        }
        Command::Experiment {
            inst,
            engine,
            out,
            trace,
            strict,
        } => {
            let mut cfg = inst.config();
            cfg.engine = match engine {
                EngineArg::Psystem => EngineChoice::PSystem,
                EngineArg::Oracle => EngineChoice::Oracle,
                EngineArg::Both => EngineChoice::Both,
            };
            cfg.out = out;
            cfg.trace = trace;
            cfg.strict = strict;
            let outcome = run_gne(&cfg).map_err(|e| e.to_string())?;
            print!("{}", outcome.report);
            Ok(outcome.ok())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
