use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};
use rfd_bench::config::{ModelName, ModelSpec};
use rfd_bench::{run_experiment, BenchError, ConfigError, ExperimentConfig};
use rfd_core::blue::predict_curve;
use rfd_core::step_size::{closed_form_step, numeric_step, StepMethod, NUMERIC_TOL};
use rfd_core::{GrfSampler, IsotropicModel, NoiseSpec};

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

#[derive(Parser)]
#[command(name = "rfd", version, about = "Random function descent experiments and diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Multi-seed optimizer benchmarks.
    Bench {
        #[command(subcommand)]
        action: BenchAction,
    },
    /// Step sizes from the closed form and from numeric minimization.
    Stepsize {
        #[command(subcommand)]
        action: StepsizeAction,
    },
    /// Gaussian random function samples.
    Grf {
        #[command(subcommand)]
        action: GrfAction,
    },
    /// Conditional loss prediction.
    Blue {
        #[command(subcommand)]
        action: BlueAction,
    },
}

#[derive(Subcommand)]
enum BenchAction {
    /// Run every optimizer on every seed and write CSVs.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override a config entry, `key=value`. Repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Add `w_0..` iterate columns to trajectory files.
        #[arg(long)]
        dump_iterates: bool,
        /// Output directory (overrides the config).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum StepsizeAction {
    /// Print `xi -> eta` as CSV.
    Table {
        #[command(flatten)]
        model: ModelArgs,
        /// Comma separated values of xi.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, default_value = "0,-0.1,-1,-10")]
        xi: Vec<f64>,
    },
}

#[derive(Subcommand)]
enum GrfAction {
    /// Evaluate one sample path at the given points, in order.
    Sample {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        dim: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        mean: f64,
        /// Points separated by `;`, coordinates by `,`.
        #[arg(long, allow_hyphen_values = true)]
        points: String,
    },
}

#[derive(Subcommand)]
enum BlueAction {
    /// Conditional mean and 2-sigma band along the negative gradient.
    Curve {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        mu: f64,
        #[arg(long, allow_negative_numbers = true)]
        loss: f64,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
        grad: Vec<f64>,
        #[arg(long, default_value_t = 0.0)]
        noise_value_var: f64,
        #[arg(long, default_value_t = 0.0)]
        noise_grad_var: f64,
        /// Largest offset along the search direction.
        #[arg(long, default_value_t = 3.0)]
        max_offset: f64,
        #[arg(long, default_value_t = 31)]
        points: usize,
    },
}

#[derive(Args)]
struct ModelArgs {
    /// sqexp, matern32, matern52, rq or grq
    #[arg(long, default_value = "sqexp")]
    model: ModelName,
    #[arg(long, default_value_t = 1.0)]
    variance: f64,
    #[arg(long, default_value_t = 1.0)]
    length_scale: f64,
    /// Shape parameter of rq and grq.
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
}

impl ModelArgs {
    fn build(&self) -> Result<IsotropicModel, ConfigError> {
        let spec = ModelSpec {
            name: self.model,
            variance: self.variance,
            length_scale: self.length_scale,
            beta: self.beta,
        };
        spec.build().map_err(|e| ConfigError::Invalid {
            key: "model".into(),
            message: e.to_string(),
        })
    }
}

fn parse_points(text: &str, dim: usize) -> Result<Vec<Vec<f64>>, ConfigError> {
    let bad = |message: String| ConfigError::Invalid {
        key: "points".into(),
        message,
    };
    text.split(';')
        .map(|p| {
            let v = p
                .split(',')
                .map(|x| x.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| bad(format!("`{p}`: {e}")))?;
            if v.len() != dim {
                return Err(bad(format!("`{p}` has {} coordinates, expected {dim}", v.len())));
            }
            Ok(v)
        })
        .collect()
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn bench_run(config: PathBuf, mut overrides: Vec<String>, dump: bool, out: Option<PathBuf>) -> Result<()> {
    if dump {
        overrides.push("dump_iterates=true".into());
    }
    if let Some(o) = out {
        overrides.push(format!("output_dir={}", o.display()));
    }
    let cfg = ExperimentConfig::from_file(&config, &overrides)?;
    let report = run_experiment(&cfg)?;
    for name in cfg.optimizers.iter().map(|o| o.name()) {
        let finals: Vec<f64> = report
            .runs_of(name)
            .map(|r| r.trajectory.records.last().map_or(f64::NAN, |x| x.loss_true))
            .collect();
        let mean = finals.iter().sum::<f64>() / finals.len() as f64;
        eprintln!("{name}: mean final loss {mean:.6} over {} seeds", finals.len());
    }
    eprintln!("wrote {} files to {}", report.files.len(), cfg.output_dir.display());
    Ok(())
}

fn stepsize_table(model: &ModelArgs, xis: &[f64]) -> Result<()> {
    let m = model.build()?;
    println!("model,length_scale,xi,eta_closed,method,eta_numeric");
    for &xi in xis {
        let closed = closed_form_step(&m, xi)?;
        let method = match closed.method {
            StepMethod::ClosedForm => "closed_form",
            StepMethod::NumericFallback => "numeric_fallback",
        };
        let numeric = if m.has_finite_step() {
            Some(numeric_step(&m, xi, NUMERIC_TOL)?.eta)
        } else {
            None
        };
        println!(
            "{},{},{},{},{},{}",
            model.model.as_str(),
            model.length_scale,
            xi,
            closed.eta,
            method,
            fmt_opt(numeric)
        );
    }
    Ok(())
}

fn grf_sample(model: &ModelArgs, dim: usize, seed: u64, mean: f64, points: &str) -> Result<()> {
    let pts = parse_points(points, dim)?;
    let mut s = GrfSampler::new(model.build()?, dim, seed)
        .map_err(|e| ConfigError::Invalid {
            key: "model".into(),
            message: e.to_string(),
        })?
        .with_mean(mean);
    let mut header = vec!["point".to_string()];
    header.extend((0..dim).map(|i| format!("w_{i}")));
    header.push("value".into());
    header.extend((0..dim).map(|i| format!("g_{i}")));
    println!("{}", header.join(","));
    for (i, p) in pts.iter().enumerate() {
        let r = s.eval(p)?;
        let fields: Vec<String> = std::iter::once(i.to_string())
            .chain(p.iter().map(f64::to_string))
            .chain(std::iter::once(r.value.to_string()))
            .chain(r.grad.iter().map(f64::to_string))
            .collect();
        println!("{}", fields.join(","));
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn blue_curve(
    model: &ModelArgs,
    mu: f64,
    loss: f64,
    grad: &[f64],
    value_var: f64,
    grad_var: f64,
    max_offset: f64,
    points: usize,
) -> Result<()> {
    let m = model.build()?;
    let noise = NoiseSpec::new(value_var, grad_var).map_err(|e| ConfigError::Invalid {
        key: "noise".into(),
        message: e.to_string(),
    })?;
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm == 0.0 {
        bail!(ConfigError::Invalid {
            key: "grad".into(),
            message: "zero gradient has no descent direction".into(),
        });
    }
    if points < 2 || !(max_offset > 0.0) {
        bail!(ConfigError::Invalid {
            key: "points".into(),
            message: "need at least 2 points and a positive max offset".into(),
        });
    }
    let dir: Vec<f64> = grad.iter().map(|g| -g / norm).collect();
    let grid: Vec<f64> = (0..points)
        .map(|i| max_offset * i as f64 / (points - 1) as f64)
        .collect();
    println!("offset,mean,lower,upper");
    for p in predict_curve(&m, &noise, mu, loss, grad, &grid, &dir)? {
        println!("{},{},{},{}", p.offset, p.mean, p.mean - p.two_sigma, p.mean + p.two_sigma);
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<ConfigError>() {
            return EXIT_CONFIG;
        }
        if let Some(b) = cause.downcast_ref::<BenchError>() {
            return match b {
                BenchError::Config(_) | BenchError::OutputDir { .. } => EXIT_CONFIG,
                BenchError::Numeric { .. } => EXIT_NUMERIC,
                _ => 1,
            };
        }
        if cause.is::<rfd_core::Error>() {
            return EXIT_NUMERIC;
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Bench {
            action: BenchAction::Run {
                config,
                overrides,
                dump_iterates,
                out,
            },
        } => bench_run(config, overrides, dump_iterates, out),
        Command::Stepsize {
            action: StepsizeAction::Table { model, xi },
        } => stepsize_table(&model, &xi),
        Command::Grf {
            action: GrfAction::Sample {
                model,
                dim,
                seed,
                mean,
                points,
            },
        } => grf_sample(&model, dim, seed, mean, &points),
        Command::Blue {
            action: BlueAction::Curve {
                model,
                mu,
                loss,
                grad,
                noise_value_var,
                noise_grad_var,
                max_offset,
                points,
            },
        } => blue_curve(
            &model,
            mu,
            loss,
            &grad,
            noise_value_var,
            noise_grad_var,
            max_offset,
            points,
        ),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
