use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;
use serde_json::json;

use super::config::{DenoiserSpec, ExperimentConfig, ImageSource, KernelSpec, Model, OutputFormat, Task};
use super::trace::{format_timing, format_trace};
use crate::energy::{summarize, EnergySummary};
use crate::error::Error;
use crate::imaging::{self, kernels, synthetic, BitDepth, DegradationModel, Downsampler};
use crate::priors::{
    gaussian_smoother, linear_denoiser, BoxIndicator, ConvPotential, DenoiserPrior, DenoiserSlot, GradStepDenoiser,
    HuberTv, LeastSquares, LinearOperator, Tikhonov, TotalVariation,
};
use crate::problem::{CompositeObjective, SmoothTerm};
use crate::solver::{solve, Hooks, SolveOutput, StopReason, StopRule};
use crate::stepsize::{
    certified_at, gamma_threshold, lambda_of_gamma, pnp_nonsmooth_constants,
    pnp_nonsmooth_gamma_threshold, Constants, StepParams,
};
use crate::tensor::{CirculantOperator, Tensor};

use super::ConfigError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    /// Inputs that cannot be turned into a problem: missing files, bad shapes,
    /// uncertified parameters without `--uncertified`.
    #[error("setup failed: {0}")]
    Setup(Error),
    #[error("solver failed: {0}")]
    Solver(Error),
    #[error("cannot write output: {0}")]
    Output(Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Setup(_) => 2,
            CliError::Solver(_) | CliError::Output(_) => 3,
        }
    }
}

/// A fully assembled experiment, ready to solve.
pub struct Prepared {
    pub truth: Tensor,
    pub observation: Tensor,
    /// Starting point: `b`, or `b` upsampled by nearest neighbor for super-resolution.
    pub x0: Tensor,
    pub problem: CompositeObjective,
    pub params: StepParams,
    pub stop: StopRule,
    pub denoiser: Option<DenoiserInfo>,
}

#[derive(Clone, Debug, Serialize)]
pub struct DenoiserInfo {
    pub kind: String,
    pub sigma: f64,
    pub lipschitz: f64,
}

pub struct RunResult {
    pub prepared: Prepared,
    pub output: SolveOutput,
    pub energy: EnergySummary,
    pub psnr_degraded: f64,
    pub psnr_final: f64,
    pub ssim_degraded: Option<f64>,
    pub ssim_final: Option<f64>,
}

fn setup<T>(r: crate::Result<T>) -> Result<T, CliError> {
    r.map_err(CliError::Setup)
}

fn load_truth(cfg: &ExperimentConfig) -> Result<Tensor, CliError> {
    match &cfg.image {
        ImageSource::Synthetic { h, w } => Ok(synthetic::phantom(*h, *w)),
        ImageSource::File(p) => setup(imaging::load_image(p)),
    }
}

fn blur_kernel(spec: &KernelSpec, h: usize, w: usize) -> Result<CirculantOperator, CliError> {
    let small = match spec {
        KernelSpec::Identity => return Ok(CirculantOperator::identity(h, w)),
        KernelSpec::Gaussian { width } => setup(kernels::gaussian(*width, h, w))?,
        KernelSpec::Motion { length, angle } => setup(kernels::motion(*length, *angle))?,
        KernelSpec::Uniform { size } => setup(kernels::uniform(*size))?,
        KernelSpec::File(p) => setup(kernels::load_kernel(p))?,
    };
    setup(CirculantOperator::from_kernel(&small, h, w))
}

fn build_denoiser(cfg: &ExperimentConfig, h: usize, w: usize) -> Result<(GradStepDenoiser, DenoiserInfo), CliError> {
    let sigma = cfg.sigma_nu() * cfg.nu;
    let d = match &cfg.denoiser {
        DenoiserSpec::Linear => {
            let g = setup(gaussian_smoother(h, w, cfg.sigma_nu()))?;
            setup(linear_denoiser(cfg.denoiser_c(), &g, sigma))?
        }
        DenoiserSpec::Weights(p) => {
            let pot = setup(ConvPotential::read(p))?;
            setup(GradStepDenoiser::new(Arc::new(pot), sigma))?
        }
    };
    if !(d.lipschitz() < 1.0) {
        return Err(CliError::Setup(Error::InvalidParameter(format!(
            "denoiser Lipschitz constant must be below 1, got {}",
            d.lipschitz()
        ))));
    }
    let kind = match &cfg.denoiser {
        DenoiserSpec::Linear => "linear".to_string(),
        DenoiserSpec::Weights(p) => format!("weights:{}", p.display()),
    };
    let info = DenoiserInfo { kind, sigma, lipschitz: d.lipschitz() };
    Ok((d, info))
}

/// Chooses `γ` and builds the step parameters. With neither `gamma` nor
/// `gamma_nu` set, `γ` is 0.99 of the largest certified step.
fn step_params(
    cfg: &ExperimentConfig,
    constants_at: &dyn Fn(f64) -> crate::Result<Constants>,
    default_gamma: &dyn Fn() -> crate::Result<f64>,
) -> Result<StepParams, CliError> {
    let gamma = match (cfg.gamma, cfg.gamma_nu) {
        (Some(g), _) => g,
        (None, Some(gn)) => cfg.nu * cfg.nu / gn,
        (None, None) => 0.99 * setup(default_gamma())?,
    };
    let c = setup(constants_at(gamma))?;
    match certified_at(gamma, cfg.alpha_fraction, c) {
        Ok(p) => Ok(p),
        Err(Error::Uncertified(msg)) if cfg.uncertified => {
            log::warn!("running with uncertified parameters: {msg}");
            let lambda = setup(lambda_of_gamma(gamma, c.l_f1, c.l_h, c.l))?;
            setup(StepParams::uncertified(gamma, cfg.alpha_fraction * lambda.max(0.0), c))
        }
        Err(Error::Uncertified(msg)) => Err(CliError::Setup(Error::Uncertified(format!(
            "{msg}; pass --uncertified to run anyway"
        )))),
        Err(e) => Err(CliError::Setup(e)),
    }
}

pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared, CliError> {
    cfg.validate()?;
    let truth = load_truth(cfg)?;
    let (h, w, _) = truth.spatial();
    let blur = blur_kernel(&cfg.kernel, h, w)?;
    let s = cfg.scale();
    let down = match cfg.task {
        Task::Superres => Some(setup(Downsampler::new(s))?),
        Task::Deblur => None,
    };
    let model = DegradationModel { blur: blur.clone(), down, nu: cfg.nu, seed: cfg.seed };
    let observation = setup(imaging::degrade(&model, &truth))?;
    let (op, x0) = match down {
        Some(d) => (LinearOperator::Subsampled { blur, down: d }, setup(imaging::upsample_nearest(&observation, s))?),
        None => (LinearOperator::Blur(blur), observation.clone()),
    };
    let data = setup(LeastSquares::new(op, observation.clone(), cfg.nu))?;
    let (ld, ll) = (data.lipschitz(), data.lower_curvature());
    let stop = setup(StopRule::new(cfg.eps, cfg.k_max))?;
    let bx = setup(BoxIndicator::new(cfg.box_lo, cfg.box_hi))?;

    let (problem, params, denoiser) = match cfg.model {
        Model::TvTik => {
            let c = Constants::new(ld, cfg.beta, ll);
            let params = step_params(cfg, &|_| Ok(c), &|| gamma_threshold(ld, cfg.beta, ll))?;
            let tv = setup(TotalVariation::new(cfg.tv_weight))?.with_inner(cfg.tv_inner, 1e-12);
            (CompositeObjective::new(data, tv, Tikhonov::new(cfg.beta)), params, None)
        }
        Model::TvBox => {
            let huber = HuberTv::new(cfg.tv_weight, cfg.huber_eps);
            let c = Constants::new(huber.lipschitz(), ld, huber.lower_curvature());
            let params = step_params(cfg, &|_| Ok(c), &|| gamma_threshold(c.l_f1, c.l_h, c.l))?;
            (CompositeObjective::new(huber, bx, data), params, None)
        }
        Model::DeTik => {
            let (d, info) = build_denoiser(cfg, h, w)?;
            let c = Constants::new(ld, cfg.beta, ll);
            let params = step_params(cfg, &|_| Ok(c), &|| gamma_threshold(ld, cfg.beta, ll))?;
            let prior = setup(DenoiserPrior::new(d, params.gamma(), DenoiserSlot::Second))?;
            (CompositeObjective::new(data, prior, Tikhonov::new(cfg.beta)), params, Some(info))
        }
        Model::DeBox => {
            let (d, info) = build_denoiser(cfg, h, w)?;
            let lip = d.lipschitz();
            let params = step_params(
                cfg,
                &|g| pnp_nonsmooth_constants(lip, g).map(|(lf, l)| Constants::new(lf, ld, l)),
                &|| pnp_nonsmooth_gamma_threshold(lip, ld),
            )?;
            let prior = setup(DenoiserPrior::new(d, params.gamma(), DenoiserSlot::First))?;
            (CompositeObjective::new(prior, bx, data), params, Some(info))
        }
    };
    Ok(Prepared { truth, observation, x0, problem, params, stop, denoiser })
}

/// Solves a prepared experiment without touching the file system.
pub fn run(cfg: &ExperimentConfig) -> Result<RunResult, CliError> {
    let prepared = prepare(cfg)?;
    let truth = prepared.truth.clone();
    let quality = move |z: &Tensor| imaging::psnr(z, &truth, 1.0).unwrap_or(f64::NAN);
    let mut hooks = Hooks { sink: None, quality: Some(&quality) };
    let output = solve(&prepared.problem, &prepared.params, prepared.x0.clone(), prepared.stop, &mut hooks)
        .map_err(CliError::Solver)?;
    let energy = summarize(&prepared.problem, &prepared.params, &output.trace);
    let z = &output.state.z;
    let psnr = |x: &Tensor| imaging::psnr(x, &prepared.truth, 1.0).map_err(CliError::Solver);
    let ssim = |x: &Tensor| imaging::ssim(x, &prepared.truth).ok();
    Ok(RunResult {
        psnr_degraded: psnr(&prepared.x0)?,
        psnr_final: psnr(z)?,
        ssim_degraded: ssim(&prepared.x0),
        ssim_final: ssim(z),
        energy,
        output,
        prepared,
    })
}

fn write(path: PathBuf, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
    std::fs::write(&path, bytes).map_err(|e| CliError::Output(Error::io(&path, e)))
}

pub fn report_json(cfg: &ExperimentConfig, r: &RunResult) -> serde_json::Value {
    let p = &r.prepared.params;
    json!({
        "config": cfg,
        "effective": {
            "scale": cfg.scale(),
            "gamma": p.gamma(),
            "gamma_nu": cfg.nu * cfg.nu / p.gamma(),
            "alpha": p.alpha(),
            "alpha_fraction": cfg.alpha_fraction,
            "tau": p.tau(),
            "lambda_gamma": p.lambda_gamma(),
            "xi": p.xi(),
            "constants": p.constants(),
            "certified": p.is_certified(),
            "sigma_nu": cfg.model.uses_denoiser().then(|| cfg.sigma_nu()),
            "denoiser_c": cfg.model.uses_denoiser().then(|| cfg.denoiser_c()),
            "denoiser": r.prepared.denoiser,
            "initialization": match cfg.task {
                Task::Deblur => "observation",
                Task::Superres => "observation upsampled by nearest neighbor",
            },
            "objective_evaluated_at": "z",
        },
        "iterations": r.output.state.k,
        "stop_reason": r.output.stop_reason,
        "wall_time_s": r.output.elapsed_s.last().copied().unwrap_or(0.0),
        "psnr_degraded": r.psnr_degraded,
        "psnr_final": r.psnr_final,
        "ssim_degraded": r.ssim_degraded,
        "ssim_final": r.ssim_final,
        "monotone_theta": r.energy.monotone_theta,
        "energy": r.energy,
    })
}

/// Runs one experiment and writes `trace.csv`, `timing.csv`, `report.json`,
/// `observation.*` and `restored.*` into `out`.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path) -> Result<RunResult, CliError> {
    let r = run(cfg)?;
    std::fs::create_dir_all(out).map_err(|e| CliError::Output(Error::io(out, e)))?;
    write(out.join("trace.csv"), format_trace(&r.output.trace))?;
    write(out.join("timing.csv"), format_timing(&r.output.elapsed_s))?;
    let report = serde_json::to_string_pretty(&report_json(cfg, &r)).expect("report serializes");
    write(out.join("report.json"), report + "\n")?;
    let ext = match cfg.output_format {
        OutputFormat::Png => "png",
        OutputFormat::Pgm => "pgm",
    };
    for (name, img) in [("restored", &r.output.state.z), ("observation", &r.prepared.observation)] {
        imaging::save_image(out.join(format!("{name}.{ext}")), img, BitDepth::Eight).map_err(CliError::Output)?;
    }
    Ok(r)
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepEntry {
    pub value: String,
    pub iterations: usize,
    pub stop_reason: StopReason,
    pub psnr_final: f64,
    pub ssim_final: Option<f64>,
    pub monotone_theta: bool,
    pub certified: bool,
}

/// Runs one experiment per value of `key`, in parallel, each writing into
/// `out/<key>=<value>/`. Also writes `sweep.csv` and `sweep.json`; the latter
/// reports whether iteration counts are nonincreasing along the sweep.
pub fn run_sweep(cfg: &ExperimentConfig, key: &str, values: &[String], out: &Path) -> Result<Vec<SweepEntry>, CliError> {
    let mut cfgs = Vec::with_capacity(values.len());
    for v in values {
        let mut c = cfg.clone();
        c.set(key, v).map_err(|message| ConfigError { origin: format!("--sweep {key}"), message })?;
        c.validate()?;
        cfgs.push(c);
    }
    let results: Vec<Result<SweepEntry, CliError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = cfgs
            .iter()
            .zip(values)
            .map(|(c, v)| {
                let dir = out.join(format!("{key}={v}"));
                scope.spawn(move || {
                    let r = run_experiment(c, &dir)?;
                    Ok(SweepEntry {
                        value: v.clone(),
                        iterations: r.output.state.k,
                        stop_reason: r.output.stop_reason,
                        psnr_final: r.psnr_final,
                        ssim_final: r.ssim_final,
                        monotone_theta: r.energy.monotone_theta,
                        certified: r.prepared.params.is_certified(),
                    })
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("sweep worker panicked")).collect()
    });
    let entries = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let mut csv = format!("{key},iterations,stop_reason,psnr_final,ssim_final,monotone_theta,certified\n");
    for e in &entries {
        csv.push_str(&format!(
            "{},{},{},{:.16e},{},{},{}\n",
            e.value,
            e.iterations,
            serde_json::to_value(e.stop_reason).unwrap().as_str().unwrap_or(""),
            e.psnr_final,
            e.ssim_final.map_or(String::new(), |s| format!("{s:.16e}")),
            e.monotone_theta,
            e.certified
        ));
    }
    write(out.join("sweep.csv"), csv)?;
    let nonincreasing = entries.windows(2).all(|p| p[1].iterations <= p[0].iterations);
    let summary = json!({ "key": key, "entries": entries, "iterations_nonincreasing": nonincreasing });
    write(out.join("sweep.json"), serde_json::to_string_pretty(&summary).unwrap() + "\n")?;
    Ok(entries)
}
