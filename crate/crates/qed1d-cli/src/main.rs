//! Command line front end: single runs and one-parameter sweeps.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use qed1d::scenarios::{self, RunOptions, RunResult, ScenarioConfig};

#[derive(Parser)]
#[command(name = "qed1d", version, about = "1D quantized-field emitter dynamics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute one scenario and write its artifacts.
    Run(RunArgs),
    /// Repeat a scenario over a list of values for one config key.
    Sweep(SweepArgs),
}

#[derive(Args, Clone)]
struct RunArgs {
    /// Scenario config file (TOML).
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in scenario name; `esd` selects by --env.
    #[arg(long)]
    preset: Option<String>,
    /// Environment for the `esd` preset: free-space or lossy-cavity.
    #[arg(long)]
    env: Option<String>,
    /// Mirror geometry: atom height above the mirror (wavelengths).
    #[arg(long = "h")]
    height: Option<f64>,
    /// Wall conductivity.
    #[arg(long)]
    sigma: Option<f64>,
    /// Number of atoms.
    #[arg(long = "N")]
    n_atoms: Option<usize>,
    /// Atom spacing (wavelengths).
    #[arg(long = "d")]
    spacing: Option<f64>,
    /// Atom or cavity separation (wavelengths), alias of --d.
    #[arg(long = "p", conflicts_with = "spacing")]
    separation: Option<f64>,
    /// Mode families to keep: bama, ma, or ba.
    #[arg(long)]
    variant: Option<String>,
    /// Extra `section.key=value` overrides, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Output directory for CSVs, plot scripts, and the summary.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Mode cache directory.
    #[arg(long)]
    cache: Option<PathBuf>,
    /// Worker threads for frequency solves (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Config key to sweep, e.g. atoms.offset_lam or geometry.sigma.
    #[arg(long)]
    param: String,
    /// Comma-separated values for the swept key.
    #[arg(long, value_delimiter = ',')]
    values: Vec<String>,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => {
            init_threads(args.threads)?;
            let config = build_config(&args)?;
            let result = execute(&config, &args)?;
            print_report(&result);
        }
        Command::Sweep(args) => {
            init_threads(args.run.threads)?;
            if args.values.is_empty() {
                bail!("sweep needs at least one value");
            }
            let base = build_config(&args.run)?;
            for value in &args.values {
                let mut config = base.clone();
                config
                    .apply_overrides(&[(args.param.clone(), value.clone())])
                    .with_context(|| format!("override {} = {}", args.param, value))?;
                config.name = format!("{}-{}-{}", base.name, sanitize(&args.param), sanitize(value));
                let mut sub = args.run.clone();
                sub.out = args
                    .run
                    .out
                    .as_ref()
                    .map(|d| d.join(format!("{}-{}", sanitize(&args.param), sanitize(value))));
                let result = execute(&config, &sub)?;
                println!("--- {} = {} ---", args.param, value);
                print_report(&result);
            }
        }
    }
    Ok(())
}

/// A config key or value as a filesystem-safe name fragment.
fn sanitize(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect()
}

fn init_threads(threads: Option<usize>) -> Result<()> {
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("thread pool")?;
    }
    Ok(())
}

/// Preset or config file, then flag overrides on top.
fn build_config(args: &RunArgs) -> Result<ScenarioConfig> {
    let mut config = match (&args.preset, &args.config) {
        (Some(name), None) => {
            let resolved = resolve_preset(name, args.env.as_deref())?;
            scenarios::preset(&resolved)?
        }
        (None, Some(path)) => {
            ScenarioConfig::load(path).with_context(|| format!("loading {}", path.display()))?
        }
        _ => bail!("provide exactly one of --preset or --config"),
    };

    let mut overrides: Vec<(String, String)> = Vec::new();
    if let Some(h) = args.height {
        overrides.push(("atoms.offset_lam".into(), h.to_string()));
    }
    if let Some(s) = args.sigma {
        overrides.push(("geometry.sigma".into(), s.to_string()));
    }
    if let Some(n) = args.n_atoms {
        overrides.push(("atoms.count".into(), n.to_string()));
    }
    if let Some(d) = args.spacing.or(args.separation) {
        overrides.push(("atoms.spacing_lam".into(), d.to_string()));
    }
    if let Some(v) = &args.variant {
        overrides.push(("variant".into(), v.clone()));
    }
    for kv in &args.sets {
        let (k, v) = kv
            .split_once('=')
            .with_context(|| format!("expected KEY=VALUE, got '{kv}'"))?;
        overrides.push((k.to_string(), v.to_string()));
    }
    config.apply_overrides(&overrides)?;
    Ok(config)
}

fn resolve_preset(name: &str, env: Option<&str>) -> Result<String> {
    if name != "esd" {
        if env.is_some() {
            bail!("--env only applies to the esd preset");
        }
        return Ok(name.to_string());
    }
    match env.unwrap_or("free-space") {
        "free-space" => Ok("esd-free-space".into()),
        "lossy-cavity" => Ok("esd-lossy-cavity".into()),
        other => bail!("unknown esd environment '{other}'"),
    }
}

fn execute(config: &ScenarioConfig, args: &RunArgs) -> Result<RunResult> {
    let options = RunOptions {
        out_dir: args.out.clone(),
        cache_dir: args.cache.clone(),
    };
    let result = scenarios::run(config, &options);
    match result {
        Ok(r) => Ok(r),
        Err(e) => match e.stage() {
            Some(stage) => Err(anyhow::Error::new(e).context(format!("stage '{stage}' failed"))),
            None => Err(e.into()),
        },
    }
}

fn print_report(result: &RunResult) {
    let r = &result.record;
    println!(
        "{}: {} freqs, {} modes ({} raw), blocks {:?}, {} steps in {} ms{}",
        r.name,
        r.n_frequencies,
        r.n_modes,
        r.n_modes_raw,
        r.block_dims,
        r.n_steps,
        r.wall_ms,
        if r.cache_hit { " [cache hit]" } else { "" },
    );
    if let Some(w) = &r.grid_warning {
        println!("  warning: {w}");
    }
    if let (Some(wc), Some(k)) = (r.omega_c, r.kappa) {
        println!("  scan peak: omega_c = {wc:.6}, kappa = {k:.6e}");
    }
    if let Some(g) = r.gamma_lifetime {
        println!("  decay rate (1/e): {g:.6e}");
    }
    if let Some(g) = r.gamma_regression {
        println!("  decay rate (regression): {g:.6e}");
    }
    if let Some(v) = r.visibility {
        println!("  oscillation visibility: {v:.4}");
    }
    if let Some(t0) = r.first_concurrence_zero {
        println!("  first concurrence zero: t = {t0:.6}");
    }
    if !r.rebirth_peaks.is_empty() {
        let peaks: Vec<String> = r.rebirth_peaks.iter().map(|p| format!("{p:.4}")).collect();
        println!("  concurrence rebirth peaks: [{}]", peaks.join(", "));
    }
    println!("  norm drift: {:.3e}", r.norm_drift);
    if !r.outputs.is_empty() {
        println!("  outputs: {}", r.outputs.join(", "));
    }
}
