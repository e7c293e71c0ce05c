//! Command-line front end. Results go to stdout, diagnostics to stderr.
//!
//! Exit codes: 0 success, 2 usage, 3 configuration, 4 file or container,
//! 5 computation.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use drus::acoustic::{build_beamformer, build_pulse, build_system_matrix, das_beamform, simulate_rf, LinearOperator};
use drus::ddrm::{default_schedule, patchwise_shrinkage_denoiser, Sampler, SamplerConfig};
use drus::experiment::{run_experiment, ForwardModel};
use drus::io::{
    read_container, render_png, write_container, ConfigError, Container, ContainerError, ContainerKind,
    ExperimentConfig, PhantomKind,
};
use drus::metrics::{occlusion_metrics, scatterer_metrics, DEFAULT_GCNR_BINS};
use drus::phantom::{apply_multiplicative_noise, make_occlusion_phantom, make_scatterer_phantom};
use drus::rng;
use drus::variance::{drus_mean, drus_var, SampleEnsemble, VarianceModelParams};
use drus::{EchogenicityMap, ReflectivityMap};

#[derive(Parser)]
#[command(name = "drus", version, about = "Diffusion-based ultrasound speckle restoration toolkit")]
struct Cli {
    /// TOML configuration file; missing keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the configured echogenicity phantom.
    Phantom(OutArgs),
    /// Apply multiplicative Gaussian speckle to an echogenicity map.
    Speckle {
        #[command(flatten)]
        io: InOutArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Simulate plane-wave RF channel data from a reflectivity map.
    Simulate {
        #[command(flatten)]
        io: InOutArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.0)]
        noise_std: f64,
    },
    /// Beamform RF channel data onto the image grid.
    Beamform {
        #[command(flatten)]
        io: InOutArgs,
        #[arg(long, value_enum, default_value_t = Method::Das)]
        method: Method,
    },
    /// Draw restoration samples and write the ensemble, DRUSmean and DRUSvar.
    Reconstruct(ReconstructArgs),
    /// Print image-quality metrics for an image against the configured phantom.
    Metrics {
        #[arg(long)]
        input: PathBuf,
    },
    /// Render an image container as a log-compressed PNG.
    Render {
        #[command(flatten)]
        io: InOutArgs,
        #[arg(long, default_value_t = 60.0)]
        dynamic_range: f64,
    },
    /// Run the configured noise-level and speckle-seed sweep.
    Experiment {
        /// Overrides the configured output directory.
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
}

#[derive(Args)]
struct OutArgs {
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct InOutArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    /// Delay-and-sum with receive apodization.
    Das,
    /// The matched-filter matrix `B` applied to the RF vector.
    Matrix,
}

#[derive(Args)]
struct ReconstructArgs {
    /// Image-domain measurement, or RF data when the operator is dense.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output_dir: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    samples: usize,
    #[arg(long, default_value_t = 50)]
    steps: usize,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    eta_b: Option<f64>,
    /// Standard deviation of the additive measurement noise.
    #[arg(long, default_value_t = 0.0)]
    noise_std: f64,
    #[arg(long)]
    dynamic_range: Option<f64>,
}

struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn config(e: impl std::fmt::Display) -> Self {
        Self { code: 3, message: e.to_string() }
    }
    fn file(e: impl std::fmt::Display) -> Self {
        Self { code: 4, message: e.to_string() }
    }
    fn compute(e: impl std::fmt::Display) -> Self {
        Self { code: 5, message: e.to_string() }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

fn load_config(path: Option<&Path>) -> CliResult<ExperimentConfig> {
    match path {
        Some(p) => ExperimentConfig::load(p).map_err(|e| match e {
            ConfigError::Read { .. } => CliError::file(e),
            _ => CliError::config(e),
        }),
        None => Ok(ExperimentConfig::default()),
    }
}

fn read(path: &Path) -> CliResult<Container> {
    read_container(path).map_err(|e| CliError::file(format!("{}: {e}", path.display())))
}

fn write(path: &Path, c: &Container) -> CliResult {
    write_container(path, c).map_err(|e| CliError::file(format!("{}: {e}", path.display())))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn read_image(path: &Path, cfg: &ExperimentConfig) -> CliResult<ReflectivityMap> {
    let grid = cfg.grid.build().map_err(CliError::config)?;
    read(path)?.to_image(&grid).map_err(|e| CliError::file(format!("{}: {e}", path.display())))
}

fn phantom(cfg: &ExperimentConfig) -> CliResult<EchogenicityMap> {
    let grid = cfg.grid.build().map_err(CliError::config)?;
    match cfg.experiment.phantom {
        PhantomKind::Occlusion => make_occlusion_phantom(&grid, &cfg.occlusion_spec()),
        PhantomKind::Scatterers => make_scatterer_phantom(&grid, &cfg.scatterer_spec()),
    }
    .map_err(CliError::config)
}

fn reconstruct(cfg: &mut ExperimentConfig, a: &ReconstructArgs) -> CliResult {
    cfg.experiment.samples = a.samples;
    cfg.sampler.num_steps = a.steps;
    if let Some(b) = a.beta {
        cfg.variance.beta = b;
    }
    if let Some(e) = a.eta {
        cfg.sampler.eta = e;
    }
    if let Some(e) = a.eta_b {
        cfg.sampler.eta_b = e;
    }
    if let Some(d) = a.dynamic_range {
        cfg.experiment.dynamic_range_db = d;
    }
    cfg.validate().map_err(CliError::config)?;
    let grid = cfg.grid.build().map_err(CliError::config)?;

    let model = ForwardModel::build(cfg).map_err(CliError::compute)?;
    let input = read(&a.input)?;
    let measurement = match (&model, input.kind()) {
        (ForwardModel::Dense { b, .. }, ContainerKind::Rf) => {
            let rf = input.to_rf(cfg.probe.sampling_rate_hz).map_err(CliError::file)?;
            b.apply(rf.values()).map_err(CliError::compute)?
        }
        _ => input.to_image(&grid).map_err(CliError::file)?.into_values(),
    };
    let svd = model.svd();
    let ybar = svd.to_spectral(&measurement).map_err(CliError::compute)?;
    let schedule = default_schedule(&ybar, a.steps).map_err(CliError::compute)?;
    let denoiser = patchwise_shrinkage_denoiser(cfg.denoiser.threshold_scale).map_err(CliError::config)?;
    let sampler_cfg = SamplerConfig {
        eta: cfg.sampler.eta,
        eta_b: cfg.sampler.eta_b,
        num_steps: a.steps,
        measurement_noise_std: model.effective_noise(a.noise_std),
        seed: a.seed,
    };
    let sampler = Sampler::new(svd, &denoiser, &schedule, sampler_cfg, grid).map_err(CliError::config)?;
    let samples = (0..a.samples)
        .map(|c| sampler.run(&ybar, rng::derive_seed(a.seed, rng::TAG_SAMPLE, c as u64)))
        .collect::<Result<Vec<_>, _>>()
        .map_err(CliError::compute)?;
    let ensemble = SampleEnsemble::new(samples).map_err(CliError::compute)?;
    let mean = drus_mean(&ensemble).map_err(CliError::compute)?;
    let params = VarianceModelParams::new(cfg.variance.beta).map_err(CliError::config)?;
    let var = drus_var(&ensemble, params).map_err(CliError::compute)?;

    std::fs::create_dir_all(&a.output_dir).map_err(CliError::file)?;
    let ens = Container::from_ensemble(ensemble.samples()).map_err(CliError::compute)?;
    write(&a.output_dir.join("ensemble.usir"), &ens)?;
    write(&a.output_dir.join("drus_mean.usir"), &Container::from_image(&mean))?;
    write(&a.output_dir.join("drus_var.usir"), &Container::image_values(&grid, var.values().to_vec()))?;
    Ok(())
}

fn run(cli: Cli) -> CliResult {
    let mut cfg = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Phantom(o) => {
            let p = phantom(&cfg)?;
            write(&o.output, &Container::image_values(p.grid(), p.values().to_vec()))
        }
        Command::Speckle { io, seed } => {
            let img = read_image(&io.input, &cfg)?;
            let p = EchogenicityMap::new(*img.grid(), img.into_values()).map_err(CliError::file)?;
            write(&io.output, &Container::from_image(&apply_multiplicative_noise(&p, seed)))
        }
        Command::Simulate { io, seed, noise_std } => {
            let o = read_image(&io.input, &cfg)?;
            let pulse = build_pulse(&cfg.probe);
            let h = build_system_matrix(&cfg.probe, o.grid(), &pulse).map_err(CliError::compute)?;
            let rf = simulate_rf(&h, &cfg.probe, &o, noise_std, seed).map_err(CliError::compute)?;
            write(&io.output, &Container::from_rf(&rf))
        }
        Command::Beamform { io, method } => {
            let grid = cfg.grid.build().map_err(CliError::config)?;
            let rf = read(&io.input)?.to_rf(cfg.probe.sampling_rate_hz).map_err(CliError::file)?;
            let image = match method {
                Method::Das => das_beamform(&rf, &cfg.probe, &grid, &cfg.apodization).map_err(CliError::compute)?,
                Method::Matrix => {
                    let pulse = build_pulse(&cfg.probe);
                    let h = build_system_matrix(&cfg.probe, &grid, &pulse).map_err(CliError::compute)?;
                    let (b, _) = build_beamformer(&h, &cfg.probe, &grid, &cfg.apodization).map_err(CliError::compute)?;
                    let values = b.apply(rf.values()).map_err(CliError::compute)?;
                    ReflectivityMap::new(grid, values).map_err(CliError::compute)?
                }
            };
            write(&io.output, &Container::from_image(&image))
        }
        Command::Reconstruct(a) => reconstruct(&mut cfg, &a),
        Command::Metrics { input } => {
            let img = read_image(&input, &cfg)?;
            let (a, b) = match cfg.experiment.phantom {
                PhantomKind::Occlusion => {
                    occlusion_metrics(img.values(), img.grid(), &cfg.occlusion_spec(), &cfg.regions, DEFAULT_GCNR_BINS)
                }
                PhantomKind::Scatterers => scatterer_metrics(img.values(), img.grid(), &cfg.scatterer_spec()),
            };
            println!("{a}\n{b}");
            Ok(())
        }
        Command::Render { io, dynamic_range } => {
            let c = read(&io.input)?;
            let grid = cfg.grid.build().map_err(CliError::config)?;
            let img = c.to_image(&grid).map_err(|e: ContainerError| CliError::file(e))?;
            render_png(img.values(), &grid, dynamic_range, &io.output).map_err(CliError::file)?;
            println!("wrote {}", io.output.display());
            Ok(())
        }
        Command::Experiment { output_dir } => {
            if let Some(d) = output_dir {
                cfg.experiment.output_dir = d;
            }
            let report = run_experiment(&cfg).map_err(|e| match e {
                drus::experiment::ExperimentError::Config(_) | drus::experiment::ExperimentError::Workers(_) => {
                    CliError::config(e)
                }
                drus::experiment::ExperimentError::Io(_) => CliError::file(e),
                _ => CliError::compute(e),
            })?;
            print!("{}", report.summary());
            if report.failures() > 0 {
                return Err(CliError::compute(format!("{} of {} cells failed", report.failures(), report.cells.len())));
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("drus: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
