use clap::{Args, Parser, Subcommand};
use mimo_aging::cli::{config_help, parse_config, read_config, write_manifest, write_outputs, Overrides};
use mimo_aging::experiments::{run, ExperimentSpec};
use mimo_aging::numerics::{bessel_j0, RngStream};
use mimo_aging::phase_noise::evolve_phase;
use mimo_aging::{Error, Result};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

#[derive(Parser)]
#[command(
    name = "mimo-aging",
    version,
    about = "Downlink massive MIMO under channel aging and phase noise: Monte-Carlo and closed-form rates",
    after_help = config_help()
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run(RunArgs),
    /// Run a named preset (fig1, fig2, fig3, scaling).
    Preset {
        name: String,
        #[command(flatten)]
        args: RunArgs,
    },
    /// Resolve and check a config without running it.
    Validate(RunArgs),
    /// Print J0(x) on a grid.
    #[command(name = "j0-table")]
    J0Table {
        #[arg(long, default_value_t = 20.0)]
        max: f64,
        #[arg(long, default_value_t = 0.5)]
        step: f64,
    },
}

#[derive(Args, Clone)]
struct RunArgs {
    /// Config file (key = value lines).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Preset used as the starting point.
    #[arg(long)]
    preset: Option<String>,
    /// Monte-Carlo coherence blocks.
    #[arg(long)]
    trials: Option<usize>,
    /// Root seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Allow M up to 300 and T_c = 1 ms in symbols.
    #[arg(long)]
    paper_scale: bool,
    /// Also write one block of phase-noise samples for the base config.
    #[arg(long)]
    dump_phase: Option<PathBuf>,
}

fn resolve(args: &RunArgs, preset_name: Option<&str>) -> Result<ExperimentSpec> {
    let overrides = Overrides {
        preset: preset_name.map(str::to_string).or_else(|| args.preset.clone()),
        trials: args.trials,
        seed: args.seed,
        paper_scale: args.paper_scale,
    };
    let text = match &args.config {
        Some(path) => read_config(path)?,
        None if overrides.preset.is_some() => String::new(),
        None => {
            return Err(Error::InvalidArgument("give --config or --preset".into()));
        }
    };
    parse_config(&text, &overrides)
}

fn execute(args: &RunArgs, preset_name: Option<&str>) -> Result<()> {
    let spec = resolve(args, preset_name)?;
    if let Some(threads) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build_global()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    }
    let started = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let clock = Instant::now();
    let table = run(&spec)?;
    let mut files = write_outputs(&spec, &table, &args.out)?;
    if let Some(path) = &args.dump_phase {
        let phase = evolve_phase(&spec.phase_cases[spec.phase_cases.len() - 1].apply(&spec.base), &RngStream::new(spec.seed).child(7), None)?;
        let file = std::fs::File::create(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        phase
            .write_csv(std::io::BufWriter::new(file))
            .map_err(|source| Error::Io {
                path: path.display().to_string(),
                source,
            })?;
        files.push(path.clone());
    }
    let manifest = write_manifest(&spec, &files, &args.out, started, clock.elapsed().as_secs_f64())?;
    for f in files.iter().chain(std::iter::once(&manifest)) {
        println!("{}", f.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => execute(args, None),
        Command::Preset { name, args } => execute(args, Some(name)),
        Command::Validate(args) => resolve(args, None).map(|spec| {
            for (k, v) in mimo_aging::cli::config_entries(&spec) {
                println!("{k} = {v}");
            }
        }),
        Command::J0Table { max, step } => j0_table(*max, *step),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.to_string().replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}

fn j0_table(max: f64, step: f64) -> Result<()> {
    if !(step > 0.0) || !(max >= 0.0) {
        return Err(Error::InvalidArgument("need step > 0 and max >= 0".into()));
    }
    println!("x,j0");
    let count = (max / step + 1e-9).floor() as usize;
    for i in 0..=count {
        let x = i as f64 * step;
        println!("{x},{:.15e}", bessel_j0(x)?);
    }
    Ok(())
}
