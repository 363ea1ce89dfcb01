use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use modelsr::experiments::emit::{save_json, Format};
use modelsr::experiments::noise::{gen_noise, noise_with_norm};
use modelsr::experiments::svg::{line_plot, Series, ESTIMATE_COLOR};
use modelsr::experiments::{emit, run_scenario, ExperimentConfig, PRESETS};
use modelsr::grid::{FrequencyGrid, Measurement};
use modelsr::render::{extrapolate, synthesize, PhysicalGrid};
use modelsr::solver::{nesterov_solve, SolveOptions};
use modelsr::stability::stability_report;
use modelsr::ModelInstance;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Parser)]
#[command(name = "modelsr", version, about = "Model-based super-resolution of Fourier data")]
struct Cli {
    /// Master random seed (default 0; experiments default to their
    /// configured seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file or directory (depends on the command).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Artefact format.
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::All)]
    format: OutputFormat,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Csv,
    Json,
    Svg,
    All,
}

impl From<OutputFormat> for Format {
    fn from(f: OutputFormat) -> Self {
        match f {
            OutputFormat::Csv => Format::Csv,
            OutputFormat::Json => Format::Json,
            OutputFormat::Svg => Format::Svg,
            OutputFormat::All => Format::All,
        }
    }
}

#[derive(Args)]
struct NoiseArgs {
    /// Target SNR in dB, `10 log10(||signal|| / ||noise||)`.
    #[arg(long, conflicts_with = "sigma")]
    snr_db: Option<f64>,
    /// Noise vector norm.
    #[arg(long)]
    sigma: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a model on `|k| <= K_L` and add noise; writes the measurement CSV.
    Simulate {
        /// Model JSON file.
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        k_low: usize,
        #[command(flatten)]
        noise: NoiseArgs,
    },
    /// Fit a model to a measurement starting from an initial guess; writes the
    /// solve report as JSON.
    Solve {
        /// Initial model JSON file.
        #[arg(long)]
        init: PathBuf,
        /// Measurement CSV file.
        #[arg(long)]
        data: PathBuf,
        /// Solver options JSON file; unspecified fields keep their defaults.
        #[arg(long)]
        options: Option<PathBuf>,
        #[arg(long)]
        max_iters: Option<usize>,
        /// Noise level for the admissibility check.
        #[arg(long)]
        sigma: Option<f64>,
    },
    /// Sample a fitted model on `|k| <= K_H`; writes the spectrum CSV.
    Extrapolate {
        /// Model JSON file, or a solve report.
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        k_high: usize,
    },
    /// Synthesize a spectrum on a uniform physical grid.
    Render {
        /// Spectrum or measurement CSV file.
        #[arg(long)]
        spectrum: PathBuf,
        /// Number of grid points (at least `2K + 1`).
        #[arg(long)]
        points: Option<usize>,
    },
    /// Stability and convexity report for a fitted model.
    Verify {
        /// Fitted model JSON file, or a solve report.
        #[arg(long)]
        model: PathBuf,
        /// Measurement CSV file the model was fitted to.
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        k_high: usize,
        /// Sampled pairs for the empirical Lipschitz constant.
        #[arg(long, default_value_t = 10_000)]
        pairs: usize,
    },
    /// Run a preset (`point-groups`, `multipole`, `chirp`) or a JSON config.
    Experiment {
        scenario: String,
        /// Override the number of trials.
        #[arg(long)]
        trials: Option<usize>,
    },
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// A model file, or the fitted model inside a solve report.
fn read_model(path: &Path) -> Result<ModelInstance> {
    let value: serde_json::Value = read_json(path)?;
    let inner = value.get("theta_hat").cloned().unwrap_or(value);
    let model: ModelInstance =
        serde_json::from_value(inner).with_context(|| format!("parsing model in {}", path.display()))?;
    model.validate()?;
    Ok(model)
}

fn write_measurement(m: &Measurement, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => m.save_csv(p)?,
        None => {
            let mut buf = Vec::new();
            m.write_csv(&mut buf)?;
            write_text(&String::from_utf8(buf)?, None)?;
        }
    }
    Ok(())
}

fn write_text(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => match std::io::stdout().lock().write_all(text.as_bytes()) {
            Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => return Err(e.into()),
            _ => {}
        },
    }
    Ok(())
}

fn write_json<T: serde::Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => save_json(p, value)?,
        None => write_text(&format!("{}\n", serde_json::to_string_pretty(value)?), None)?,
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let out = cli.out.as_deref();
    let seed = cli.seed.unwrap_or(0);
    match cli.command {
        Command::Simulate { model, k_low, noise } => {
            let model = read_model(&model)?;
            let clean = model.forward(&FrequencyGrid::full(k_low))?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let y = match (noise.snr_db, noise.sigma) {
                (Some(s), _) => {
                    let (n, sigma) = gen_noise(&clean, s, &mut rng)?;
                    log::info!("sigma = {sigma:e}");
                    clean.add(&n)?
                }
                (None, Some(s)) => clean.add(&noise_with_norm(&clean, s, &mut rng)?)?,
                (None, None) => clean,
            };
            write_measurement(&y, out)
        }
        Command::Solve {
            init,
            data,
            options,
            max_iters,
            sigma,
        } => {
            let init = read_model(&init)?;
            let y = Measurement::load_csv(&data)?;
            let mut opts: SolveOptions = match options {
                Some(p) => read_json(&p)?,
                None => SolveOptions::default(),
            };
            if let Some(m) = max_iters {
                opts.max_iters = m;
            }
            if sigma.is_some() {
                opts.sigma = sigma;
            }
            opts.reinit.seed = seed;
            let report = nesterov_solve(&init, &y, &opts)?;
            eprintln!(
                "{:?} after {} iterations, phi = {:.3e}, |grad| = {:.3e}",
                report.status, report.iterations, report.final_objective, report.grad_norm_final
            );
            write_json(&report, out)
        }
        Command::Extrapolate { model, k_high } => {
            let spectrum = extrapolate(&read_model(&model)?, k_high)?;
            write_measurement(&spectrum.measurement, out)
        }
        Command::Render { spectrum, points } => {
            let m = Measurement::load_csv(&spectrum)?;
            let grid = match points {
                Some(n) => PhysicalGrid::new(n)?,
                None => PhysicalGrid::for_k_max(m.grid().k_max()),
            };
            let values = synthesize(&m, &grid)?;
            let x = grid.points();
            if cli.format == OutputFormat::Svg {
                let pts = x.iter().zip(&values).map(|(&x, v)| (x, v.re)).collect();
                let svg = line_plot(
                    &format!("{}", spectrum.display()),
                    "x",
                    "Re s(x)",
                    &[Series::line("signal", ESTIMATE_COLOR, pts)],
                );
                return write_text(&svg, out);
            }
            let mut text = String::from("x,re,im\n");
            for (x, v) in x.iter().zip(&values) {
                text.push_str(&format!("{x:.16e},{:.16e},{:.16e}\n", v.re, v.im));
            }
            write_text(&text, out)
        }
        Command::Verify {
            model,
            data,
            k_high,
            pairs,
        } => {
            let model = read_model(&model)?;
            let y = Measurement::load_csv(&data)?;
            let report = stability_report(&model, &y, k_high, pairs, seed)?;
            write_json(&report, out)
        }
        Command::Experiment { scenario, trials } => {
            let mut config = match ExperimentConfig::preset(&scenario) {
                Some(c) => c,
                None if Path::new(&scenario).is_file() => ExperimentConfig::load(Path::new(&scenario))?,
                None => bail!(
                    "`{scenario}` is neither a preset ({}) nor a config file",
                    PRESETS.join(", ")
                ),
            };
            if let Some(t) = trials {
                config.trials = t;
            }
            if let Some(s) = cli.seed {
                config.seed = s;
            }
            config.validate()?;
            let dir = out
                .map(Path::to_path_buf)
                .or_else(|| config.output.clone())
                .unwrap_or_else(|| PathBuf::from(format!("out/{}", config.scenario.name())));
            let output = run_scenario(&config)?;
            let files = emit(&output, cli.format.into(), &dir)?;
            let s = &output.summary;
            eprintln!(
                "{}: {} trials, {} failed, {} admissible; {} files in {}",
                config.scenario.name(),
                s.trials,
                s.failed,
                s.admissible,
                files.len(),
                dir.display()
            );
            Ok(())
        }
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
