use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use saqd::code::{brute_force_distance, build_code, CodeError, DistanceBound};
use saqd::decoder::{DecoderKind, DecoderPair};
use saqd::experiment::{
    configure_threads, crossing_threshold, curves_for, parse_grid, parse_list, read_results, rescale_threshold, run_sweep,
    ExperimentError, RunConfig, Z95,
};
use saqd::lattice::{Manifold, ManifoldKind};

const EXIT_FAILURE: u8 = 1;
const EXIT_MISMATCH: u8 = 2;
const EXIT_CONTRACT: u8 = 3;
const EXIT_CONFIG: u8 = 4;

#[derive(Parser)]
#[command(name = "saqd", version, about = "Subsystem qudit color codes: construction checks and Monte Carlo sweeps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep logical failure rates over a (d, L, t, p) grid.
    Run(RunArgs),
    /// Check (n, k) of every requested code against the closed forms.
    Verify(VerifyArgs),
    /// Brute-force dressed distance up to a cap.
    Distance(DistanceArgs),
    /// Crossing thresholds of every curve family in a results file.
    Threshold(ThresholdArgs),
    /// Write a code as JSON.
    Dump(DumpArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML file with the same keys as the flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    manifold: Option<String>,
    /// Comma-separated local dimensions.
    #[arg(long)]
    d: Option<String>,
    /// Comma-separated linear sizes.
    #[arg(long = "L")]
    l: Option<String>,
    /// `start:stop:step` or a comma-separated list.
    #[arg(long)]
    p: Option<String>,
    /// Comma-separated numbers of noisy cycles.
    #[arg(long)]
    t: Option<String>,
    #[arg(long)]
    trials: Option<u64>,
    /// Validation decoder: clustering or matching.
    #[arg(long)]
    val: Option<String>,
    /// Correction decoder: clustering or matching.
    #[arg(long)]
    corr: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Results CSV; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// A manifold name or `all`.
    #[arg(long, default_value = "all")]
    manifold: String,
    #[arg(long = "L", default_value = "2,4")]
    l: String,
    #[arg(long, default_value = "2,3,5,16")]
    d: String,
}

#[derive(Args)]
struct DistanceArgs {
    #[arg(long)]
    manifold: String,
    #[arg(long = "L")]
    l: usize,
    #[arg(long)]
    d: u32,
    #[arg(long)]
    cap: usize,
    /// Index of a single logical qudit; all when absent.
    #[arg(long)]
    logical: Option<usize>,
}

#[derive(Args)]
struct ThresholdArgs {
    /// Results CSV written by `saqd run`.
    input: PathBuf,
}

#[derive(Args)]
struct DumpArgs {
    #[arg(long)]
    manifold: String,
    #[arg(long = "L")]
    l: usize,
    #[arg(long)]
    d: u32,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug)]
enum CliError {
    Mismatch(usize),
    Experiment(ExperimentError),
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        Self::Experiment(e)
    }
}

impl From<CodeError> for CliError {
    fn from(e: CodeError) -> Self {
        Self::Experiment(e.into())
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        Self::Experiment(e.into())
    }
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Experiment(ExperimentError::Config(msg.into()))
}

fn exit_code(e: &CliError) -> u8 {
    match e {
        CliError::Mismatch(_) | CliError::Experiment(ExperimentError::Code(CodeError::TableMismatch { .. })) => EXIT_MISMATCH,
        CliError::Experiment(e) if e.is_decoder_contract() => EXIT_CONTRACT,
        CliError::Experiment(ExperimentError::Config(_) | ExperimentError::NoCrossing) => EXIT_CONFIG,
        CliError::Experiment(ExperimentError::Code(
            CodeError::Lattice(_) | CodeError::BadDimension(_) | CodeError::CapTooLarge { .. } | CodeError::WrongManifold { .. } | CodeError::NoLogicals,
        )) => EXIT_CONFIG,
        CliError::Experiment(_) => EXIT_FAILURE,
    }
}

fn manifold(s: &str) -> Result<ManifoldKind, CliError> {
    ManifoldKind::parse(s).map_err(|e| config_err(e.to_string()))
}

fn decoder(s: &str) -> Result<DecoderKind, CliError> {
    DecoderKind::parse(s).ok_or_else(|| config_err(format!("unknown decoder {s:?}")))
}

fn run_config(a: &RunArgs) -> Result<RunConfig, CliError> {
    let mut cfg = match &a.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
            RunConfig::parse_toml(&text)?
        }
        None => {
            let missing = |f: &str| config_err(format!("--{f} is required without --config"));
            RunConfig {
                manifold: manifold(a.manifold.as_deref().ok_or_else(|| missing("manifold"))?)?,
                d: parse_list(a.d.as_deref().ok_or_else(|| missing("d"))?)?,
                l: parse_list(a.l.as_deref().ok_or_else(|| missing("L"))?)?,
                p: parse_grid(a.p.as_deref().ok_or_else(|| missing("p"))?)?,
                t: parse_list(a.t.as_deref().ok_or_else(|| missing("t"))?)?,
                trials: a.trials.ok_or_else(|| missing("trials"))?,
                validator: decoder(a.val.as_deref().ok_or_else(|| missing("val"))?)?,
                corrector: decoder(a.corr.as_deref().ok_or_else(|| missing("corr"))?)?,
                seed: a.seed.unwrap_or(0),
                out: None,
                z: Z95,
            }
        }
    };
    if let Some(m) = &a.manifold {
        cfg.manifold = manifold(m)?;
    }
    if let Some(v) = &a.d {
        cfg.d = parse_list(v)?;
    }
    if let Some(v) = &a.l {
        cfg.l = parse_list(v)?;
    }
    if let Some(v) = &a.p {
        cfg.p = parse_grid(v)?;
    }
    if let Some(v) = &a.t {
        cfg.t = parse_list(v)?;
    }
    if let Some(v) = a.trials {
        cfg.trials = v;
    }
    if let Some(v) = &a.val {
        cfg.validator = decoder(v)?;
    }
    if let Some(v) = &a.corr {
        cfg.corrector = decoder(v)?;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if a.out.is_some() {
        cfg.out = a.out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(a: RunArgs) -> Result<(), CliError> {
    let cfg = run_config(&a)?;
    let workers = configure_threads()?;
    eprintln!("saqd run: {} with {}/{}, {workers} workers", cfg.manifold, cfg.validator, cfg.corrector);
    let started = Instant::now();
    let progress = |r: &saqd::experiment::DataPoint| {
        eprintln!(
            "[{:>7.1}s] d={} L={} t={} p={} failures {}/{} pfail {:.5} [{:.5}, {:.5}]",
            started.elapsed().as_secs_f64(),
            r.d,
            r.l,
            r.t,
            r.p,
            r.failures,
            r.trials,
            r.pfail,
            r.ci_lo,
            r.ci_hi
        )
    };
    match &cfg.out {
        Some(path) => {
            let file = File::create(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
            run_sweep(&cfg, BufWriter::new(file), progress)?;
        }
        None => {
            run_sweep(&cfg, io::stdout().lock(), progress)?;
        }
    }
    Ok(())
}

fn verify(a: VerifyArgs) -> Result<(), CliError> {
    let kinds = if a.manifold.eq_ignore_ascii_case("all") { ManifoldKind::ALL.to_vec() } else { vec![manifold(&a.manifold)?] };
    let ls: Vec<usize> = parse_list(&a.l)?;
    let ds: Vec<u32> = parse_list(&a.d)?;
    let started = Instant::now();
    let mut mismatches = 0;
    let mut out = io::stdout().lock();
    writeln!(out, "{:<11} {:>2} {:>3} {:>6} {:>3} {:>10} {:>10} {:>4}  status", "manifold", "L", "d", "n", "k", "expected_n", "expected_k", "wmax")?;
    for &kind in &kinds {
        for &l in &ls {
            for &d in &ds {
                let code = build_code(Manifold::new(kind, l).map_err(CodeError::from)?, d)?;
                let r = code.verify_parameters()?;
                let ok = r.params.n == r.expected_n && r.params.k == r.expected_k;
                mismatches += usize::from(!ok);
                writeln!(
                    out,
                    "{:<11} {:>2} {:>3} {:>6} {:>3} {:>10} {:>10} {:>4}  {}",
                    kind.name(),
                    l,
                    d,
                    r.params.n,
                    r.params.k,
                    r.expected_n,
                    r.expected_k,
                    r.max_gauge_weight,
                    if ok { "ok" } else { "MISMATCH" }
                )?;
            }
        }
    }
    writeln!(out, "{} cases in {:.2}s", kinds.len() * ls.len() * ds.len(), started.elapsed().as_secs_f64())?;
    if mismatches > 0 {
        return Err(CliError::Mismatch(mismatches));
    }
    Ok(())
}

fn distance(a: DistanceArgs) -> Result<(), CliError> {
    let code = build_code(Manifold::new(manifold(&a.manifold)?, a.l).map_err(CodeError::from)?, a.d)?;
    if let Some(i) = a.logical {
        if i >= code.bare.len() {
            return Err(config_err(format!("logical {i} out of range; the code has {}", code.bare.len())));
        }
    }
    let started = Instant::now();
    let bound = brute_force_distance(&code, a.cap, a.logical)?;
    let scope = a.logical.map_or("all logicals".to_string(), |i| format!("logical {} ({})", i, code.bare[i].label));
    match bound {
        DistanceBound::Exact(w) => println!("{} d={} {scope}: dressed distance = {w}", code.manifold(), a.d),
        DistanceBound::AboveCap(c) => println!("{} d={} {scope}: dressed distance > {c}", code.manifold(), a.d),
    }
    for p in &code.bare {
        println!("  bare {} witness weights: X {} Z {}", p.label, p.x.weight(), p.z.weight());
    }
    for p in &code.dressed {
        println!("  dressed {} witness weights: X {} Z {}", p.label, p.x.weight(), p.z.weight());
    }
    eprintln!("{:.2}s", started.elapsed().as_secs_f64());
    Ok(())
}

fn threshold(a: ThresholdArgs) -> Result<(), CliError> {
    let rows = read_results(&a.input)?;
    let mut families: Vec<(ManifoldKind, u32, usize, DecoderPair)> = Vec::new();
    for r in &rows {
        let key = (r.manifold, r.d, r.t, DecoderPair { validator: r.validator, corrector: r.corrector });
        if !families.contains(&key) {
            families.push(key);
        }
    }
    for (m, d, t, pair) in families {
        let curves = curves_for(&rows, m, d, t, pair);
        let label = format!("{m} d={d} t={t} {}/{}", pair.validator, pair.corrector);
        match crossing_threshold(&curves) {
            Ok(est) => {
                let scaled = rescale_threshold(est.p_th, d)?;
                println!(
                    "{label}: p_th = {:.5} +- {:.5} (L {} vs {}), rescaled {:.5}",
                    est.p_th, est.uncertainty, est.sizes.0, est.sizes.1, scaled
                );
            }
            Err(e) => println!("{label}: {e}"),
        }
    }
    Ok(())
}

fn dump(a: DumpArgs) -> Result<(), CliError> {
    let code = build_code(Manifold::new(manifold(&a.manifold)?, a.l).map_err(CodeError::from)?, a.d)?;
    let json = code.dump_json();
    match a.out {
        Some(path) => std::fs::write(path, json)?,
        None => println!("{json}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Verify(a) => verify(a),
        Command::Distance(a) => distance(a),
        Command::Threshold(a) => threshold(a),
        Command::Dump(a) => dump(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match &e {
                CliError::Mismatch(n) => eprintln!("error: {n} parameter mismatches"),
                CliError::Experiment(inner) => eprintln!("error: {inner}"),
            }
            ExitCode::from(exit_code(&e))
        }
    }
}
