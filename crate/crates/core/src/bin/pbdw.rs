use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;

use pbdw::background::pod_spectrum;
use pbdw::bench::{compare_formulations, run_sweep, write_outputs, ExperimentConfig, ProblemId};
use pbdw::bundle::{build, load_meta, load_operator, save_operator, snapshots_for, stability_sweep, BuildConfig};
use pbdw::io::{load_vector, save_matrix, save_vector};
use pbdw::models::{AdvectionDiffusion, Helmholtz, ParametricModel};
use pbdw::{PbdwError, Result, Scalar};

#[derive(Parser)]
#[command(name = "pbdw", version, about = "PBDW state estimation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the seed of the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the best-knowledge model on the training parameters.
    Snapshots,
    /// Assemble an operator bundle.
    Build,
    /// Write the ordered sensor centers with per-step inf-sup constants.
    PlaceSensors,
    /// Apply an operator bundle to a measurement vector.
    Reconstruct {
        #[arg(long)]
        operator: PathBuf,
        #[arg(long)]
        measurements: PathBuf,
    },
    /// Stability constants over the configured ξ values.
    Stability,
    /// Error sweep over N, SNR and ξ.
    Sweep,
    /// Paired linear and box-constrained sweep.
    Compare,
}

fn read_config<C: DeserializeOwned>(path: Option<&Path>) -> Result<C> {
    let path = path.ok_or_else(|| PbdwError::InvalidArgument("--config is required".into()))?;
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

macro_rules! with_model {
    ($problem:expr, $grid:expr, |$m:ident| $body:expr) => {
        match $problem {
            ProblemId::AdvectionDiffusion => {
                let $m = AdvectionDiffusion::new($grid)?;
                $body
            }
            ProblemId::Helmholtz => {
                let $m = Helmholtz::new($grid)?;
                $body
            }
        }
    };
}

fn snapshots<M: ParametricModel>(model: &M, cfg: &BuildConfig, out: &Path) -> Result<()> {
    let snaps = snapshots_for(model, cfg)?;
    save_matrix(out.join("snapshots.mat"), snaps.fields())?;
    std::fs::write(out.join("parameters.json"), serde_json::to_string_pretty(snaps.parameters())?)?;
    let spectrum = pod_spectrum(&model.space()?, &snaps)?;
    let mut csv = String::from("index,eigenvalue\n");
    for (i, v) in spectrum.iter().enumerate() {
        csv.push_str(&format!("{},{}\n", i + 1, v));
    }
    std::fs::write(out.join("pod_spectrum.csv"), csv)?;
    Ok(())
}

fn build_cmd<M: ParametricModel>(model: &M, cfg: &BuildConfig, out: &Path) -> Result<()> {
    let built = build(model, cfg)?;
    save_operator(&out.join("operator"), &built.operator, &built.centers, Some(cfg.width))
}

fn place_sensors<M: ParametricModel>(model: &M, cfg: &BuildConfig, out: &Path) -> Result<()> {
    let built = build(model, cfg)?;
    let mut csv = String::from("index,x,y,beta\n");
    for (i, c) in built.centers.iter().enumerate() {
        let beta = built.betas.as_ref().map_or_else(String::new, |b| b[i].to_string());
        csv.push_str(&format!("{},{},{},{}\n", i + 1, c[0], c[1], beta));
    }
    std::fs::write(out.join("sensors.csv"), csv)?;
    Ok(())
}

fn stability<M: ParametricModel>(model: &M, cfg: &BuildConfig, out: &Path) -> Result<()> {
    let built = build(model, cfg)?;
    let reports = stability_sweep(&built, &cfg.xi_values())?;
    std::fs::write(out.join("stability.json"), serde_json::to_string_pretty(&reports)?)?;
    let mut csv = String::from("n,m,xi,lambda2,lambda_u,lambda_bias,beta,lambda_nl\n");
    for r in &reports {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.n, r.m, r.xi, r.lambda2, r.lambda_u, r.lambda_bias, r.beta, r.lambda_nl
        ));
    }
    std::fs::write(out.join("stability.csv"), csv)?;
    Ok(())
}

fn reconstruct<T: Scalar>(operator: &Path, measurements: &Path, out: &Path) -> Result<()> {
    let op = load_operator::<T>(operator)?;
    let y = load_vector::<T>(measurements)?;
    let est = op.solve(&y)?;
    let parts = |v: &nalgebra::DVector<T>| -> Vec<[f64; 2]> { v.iter().map(|x| [x.re(), x.im()]).collect() };
    let json = serde_json::json!({
        "coefficients": parts(&est.z),
        "update": parts(&est.eta),
        "residual": parts(&est.residual),
        "objective": est.objective,
        "qp_iterations": est.qp_iterations,
        "kkt_residual": est.kkt_residual,
    });
    std::fs::write(out.join("estimate.json"), serde_json::to_string_pretty(&json)?)?;
    if let Some(state) = &est.state {
        save_vector(out.join("state.mat"), state)?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    std::fs::create_dir_all(&cli.out)?;
    let out = cli.out.as_path();
    let build_config = || -> Result<BuildConfig> {
        let mut cfg: BuildConfig = read_config(cli.config.as_deref())?;
        if let Some(s) = cli.seed {
            cfg.seed = s;
        }
        Ok(cfg)
    };
    let experiment_config = || -> Result<ExperimentConfig> {
        let mut cfg: ExperimentConfig = read_config(cli.config.as_deref())?;
        if let Some(s) = cli.seed {
            cfg.seed = s;
        }
        Ok(cfg)
    };
    match &cli.command {
        Command::Snapshots => {
            let cfg = build_config()?;
            with_model!(cfg.problem, cfg.grid_n, |m| snapshots(&m, &cfg, out))
        }
        Command::Build => {
            let cfg = build_config()?;
            with_model!(cfg.problem, cfg.grid_n, |m| build_cmd(&m, &cfg, out))
        }
        Command::PlaceSensors => {
            let cfg = build_config()?;
            with_model!(cfg.problem, cfg.grid_n, |m| place_sensors(&m, &cfg, out))
        }
        Command::Stability => {
            let cfg = build_config()?;
            with_model!(cfg.problem, cfg.grid_n, |m| stability(&m, &cfg, out))
        }
        Command::Reconstruct { operator, measurements } => match load_meta(operator)?.field.as_str() {
            "complex" => reconstruct::<num_complex::Complex64>(operator, measurements, out),
            _ => reconstruct::<f64>(operator, measurements, out),
        },
        Command::Sweep => {
            let cfg = experiment_config()?;
            let rows = run_sweep(&cfg)?;
            write_outputs(out, "sweep", &cfg, &rows)
        }
        Command::Compare => {
            let cfg = experiment_config()?;
            let report = compare_formulations(&cfg)?;
            write_outputs(out, "compare_rows", &cfg, &report.results)?;
            let mut csv = String::from("n,m,snr,xi,linear_e_avg,box_e_avg,ratio\n");
            for r in &report.rows {
                let snr = if r.snr.is_noiseless() { "inf".to_string() } else { r.snr.0.to_string() };
                csv.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    r.n, r.m, snr, r.xi, r.linear_e_avg, r.box_e_avg, r.ratio
                ));
            }
            std::fs::write(out.join("compare.csv"), csv)?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let body = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            let _ = writeln!(std::io::stderr(), "{body}");
            ExitCode::FAILURE
        }
    }
}
