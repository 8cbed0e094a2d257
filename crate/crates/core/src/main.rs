use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use kdalloc::codec;
use kdalloc::harness::bounds::{bounds_table, render};
use kdalloc::harness::certify::{certify, Level};
use kdalloc::harness::experiment::{
    self as exp, HarnessError, InstanceSource, TieSpec, EXIT_CERTIFICATION, EXIT_INPUT, EXIT_OK,
};
use kdalloc::harness::{run_experiment, ExperimentSpec};
use kdalloc::par::Execution;
use kdalloc::rational::{self, Q};
use kdalloc::trace::{self, Algo};
use kdalloc::{Params, RunOptions};

#[derive(Parser)]
#[command(name = "kdalloc", version, about = "Online ad allocation on (k,d)-bounded graphs")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write a generated instance (and its tie script, if any) to disk.
    Generate {
        #[command(flatten)]
        gen: GenArgs,
        /// Instance file to write.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Where to write the generator's tie script.
        #[arg(long)]
        script_out: Option<PathBuf>,
    },
    /// Run one algorithm once and optionally save its trace.
    Run {
        #[command(flatten)]
        src: SourceArgs,
        #[command(flatten)]
        algo: AlgoArgs,
        #[arg(long)]
        trace_out: Option<PathBuf>,
        /// Save the instance as run; for adaptive sources this is the
        /// realized instance a saved trace certifies against.
        #[arg(long)]
        instance_out: Option<PathBuf>,
    },
    /// Check a saved trace against its instance.
    Certify {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, default_value = "full")]
        verify: Level,
    },
    /// Closed-form guarantees and the two asymptotic curves.
    Bounds {
        /// Bid ratios, e.g. `--r 1/2 --r 1/3`.
        #[arg(long = "r", value_parser = parse_q)]
        rs: Vec<Q>,
        /// `k,d` pairs, e.g. `--kd 7,4`.
        #[arg(long = "kd", value_parser = parse_kd)]
        kds: Vec<(u32, u32)>,
        /// Emit JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Run, certify and compare against the best known optimum; emits CSV.
    Experiment {
        #[command(flatten)]
        src: SourceArgs,
        #[command(flatten)]
        algo: AlgoArgs,
        #[arg(long, default_value_t = 1)]
        trials: u32,
        /// CSV report path; printed to stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Evaluate trials on one thread.
        #[arg(long)]
        sequential: bool,
    },
}

#[derive(Args)]
struct GenArgs {
    /// Generator name (see `--gen list`).
    #[arg(long = "gen")]
    name: String,
    /// Generator parameter as key=value; repeatable.
    #[arg(long = "param", value_parser = parse_kv)]
    params: Vec<(String, String)>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SourceArgs {
    /// Instance file.
    #[arg(long, conflicts_with = "gen")]
    instance: Option<PathBuf>,
    /// Generator name, used instead of an instance file.
    #[arg(long = "gen")]
    gen: Option<String>,
    #[arg(long = "param", value_parser = parse_kv)]
    params: Vec<(String, String)>,
    /// Generator seed; defaults to `--seed`.
    #[arg(long)]
    gen_seed: Option<u64>,
}

#[derive(Args)]
struct AlgoArgs {
    #[arg(long)]
    algo: Algo,
    #[arg(long)]
    k: Option<u32>,
    #[arg(long)]
    d: Option<u32>,
    /// lowest | highest-degree | script[:file] | seeded[:n]
    #[arg(long, default_value = "lowest")]
    tie: TieSpec,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "ratio")]
    verify: Level,
}

fn parse_q(s: &str) -> Result<Q, String> {
    rational::parse(s).map_err(|e| e.to_string())
}

fn parse_kd(s: &str) -> Result<(u32, u32), String> {
    let (k, d) = s.split_once(',').ok_or("expected k,d")?;
    Ok((
        k.trim().parse().map_err(|e| format!("k: {e}"))?,
        d.trim().parse().map_err(|e| format!("d: {e}"))?,
    ))
}

fn parse_kv(s: &str) -> Result<(String, String), String> {
    s.split_once('=')
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .ok_or_else(|| format!("expected key=value, got `{s}`"))
}

fn source(src: &SourceArgs, seed: u64) -> Result<InstanceSource, HarnessError> {
    match (&src.instance, &src.gen) {
        (Some(p), _) => Ok(InstanceSource::File(p.clone())),
        (None, Some(name)) => Ok(InstanceSource::Generator {
            name: name.clone(),
            params: src.params.iter().cloned().collect(),
            seed: src.gen_seed.unwrap_or(seed),
        }),
        (None, None) => Err(HarnessError::Input("pass --instance or --gen".into())),
    }
}

fn io_err(path: &std::path::Path, source: std::io::Error) -> HarnessError {
    codec::CodecError::Io {
        path: path.display().to_string(),
        source,
    }
    .into()
}

fn generate(gen: &GenArgs, out: Option<&PathBuf>, script_out: Option<&PathBuf>) -> Result<i32, HarnessError> {
    if gen.name == "list" {
        for g in exp::GENERATORS {
            println!("{g}");
        }
        return Ok(EXIT_OK);
    }
    let out = out.ok_or_else(|| HarnessError::Input("--out is required".into()))?;
    let params: BTreeMap<String, String> = gen.params.iter().cloned().collect();
    let prepared = exp::generate(&gen.name, &params, gen.seed)?;
    codec::save(&prepared.to_instance()?, out)?;
    if let Some(path) = script_out {
        match &prepared {
            exp::Prepared::Static {
                script: Some(s), ..
            } => std::fs::write(path, codec::tie_script_to_json(s)).map_err(|e| io_err(path, e))?,
            _ => return Err(HarnessError::Input(format!("{} emits no tie script", gen.name))),
        }
    }
    eprintln!("wrote {}", out.display());
    Ok(EXIT_OK)
}

fn run_once(
    src: &SourceArgs,
    a: &AlgoArgs,
    trace_out: Option<&PathBuf>,
    instance_out: Option<&PathBuf>,
) -> Result<i32, HarnessError> {
    let prepared = exp::prepare(&source(src, a.seed)?)?;
    let defaults = prepared.default_params()?;
    let params = Params::new(a.k.unwrap_or(defaults.k), a.d.unwrap_or(defaults.d));
    let opts = RunOptions {
        tie: exp::resolve_tie(&a.tie, &prepared, a.seed)?,
        seed: a.seed,
        ..RunOptions::default()
    };
    let (run, instance) = exp::run_prepared(&prepared, a.algo, params, &opts)?;
    println!("algorithm\t{}", a.algo);
    println!("k,d\t{},{}", params.k, params.d);
    println!("revenue\t{}", rational::format(&run.allocation.revenue));
    println!(
        "matched\t{}/{}",
        run.allocation.matched_advertisers(),
        instance.num_advertisers()
    );
    if let Some(duals) = &run.duals {
        println!("dual\t{}", rational::format(&run.trace.dual_total()));
        println!("max_z\t{}", rational::format(&duals.max_z()));
    }
    if let Some(path) = trace_out {
        trace::save(&run.trace, path)?;
    }
    if let Some(path) = instance_out {
        codec::save(&instance, path)?;
    }
    if a.verify > Level::Off {
        let rep = certify(&instance, &run.trace, a.verify)?;
        print!("{}", rep.render());
        if !rep.passed() {
            return Ok(EXIT_CERTIFICATION);
        }
    }
    Ok(EXIT_OK)
}

fn certify_files(trace_path: &Path, instance: &Path, level: Level) -> Result<i32, HarnessError> {
    let inst = codec::load(instance)?;
    let tr = trace::load(trace_path).map_err(|e| HarnessError::Input(format!("{}: {e}", trace_path.display())))?;
    let rep = certify(&inst, &tr, level)?;
    print!("{}", rep.render());
    Ok(if rep.passed() { EXIT_OK } else { EXIT_CERTIFICATION })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.cmd {
        Cmd::Generate {
            gen,
            out,
            script_out,
        } => generate(gen, out.as_ref(), script_out.as_ref()),
        Cmd::Run {
            src,
            algo,
            trace_out,
            instance_out,
        } => run_once(src, algo, trace_out.as_ref(), instance_out.as_ref()),
        Cmd::Certify {
            trace,
            instance,
            verify,
        } => certify_files(trace, instance, *verify),
        Cmd::Bounds { rs, kds, json } => bounds_table(rs, kds)
            .map_err(|e| HarnessError::Input(e.to_string()))
            .map(|rows| {
                if *json {
                    println!("{}", serde_json::to_string_pretty(&rows).expect("rows serialize"));
                } else {
                    print!("{}", render(&rows));
                }
                EXIT_OK
            }),
        Cmd::Experiment {
            src,
            algo,
            trials,
            out,
            sequential,
        } => source(src, algo.seed).and_then(|s| {
            let mut spec = ExperimentSpec::new(s, algo.algo);
            spec.k = algo.k;
            spec.d = algo.d;
            spec.tie = algo.tie.clone();
            spec.verify = algo.verify;
            spec.trials = *trials;
            spec.seed = algo.seed;
            spec.report = out.clone();
            if *sequential {
                spec.exec = Execution::Sequential;
            }
            let rep = run_experiment(&spec)?;
            if out.is_none() {
                print!("{}", rep.csv());
            }
            if let Some(c) = rep.certification.as_ref().filter(|c| !c.passed()) {
                eprint!("{}", c.render());
            }
            if let Some(t) = &rep.trials {
                eprintln!("{}", t.comparison);
            }
            Ok(rep.exit_code())
        }),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_INPUT as u8)
        }
    }
}
