//! Experiment configuration: a flat `key = value` file plus overrides.
//!
//! Grammar: one `key = value` pair per line; `#` starts a comment (whole line
//! or trailing); blank lines are ignored; keys may appear once per file.
//! Overrides (`--set key=value`) are applied afterwards in order.
//!
//! | key              | values                                                    | default                 |
//! |------------------|-----------------------------------------------------------|-------------------------|
//! | `task`           | `deblur`, `superres`                                      | `deblur`                |
//! | `model`          | `tvtik`, `detik`, `tvbox`, `debox`                        | `detik`                 |
//! | `image`          | `synthetic` or a `.pgm`/`.png` path                       | `synthetic`             |
//! | `size`           | synthetic image size `N` or `HxW`                         | `32`                    |
//! | `kernel`         | `gaussian:W`, `motion:LEN:ANGLE`, `uniform:N`, `identity`, `file:PATH` | `gaussian:1.6` |
//! | `s`              | scale factor (super-resolution)                           | `1` (deblur), `2` (superres) |
//! | `nu`             | noise level on `[0, 1]`                                   | `0.01`                  |
//! | `beta`           | Tikhonov weight                                           | `0.001`                 |
//! | `tv_weight`      | TV weight (TVTik, TVBox)                                  | `20`                    |
//! | `huber_eps`      | Huber smoothing of TV in TVBox                            | `0.001`                 |
//! | `tv_inner`       | split Bregman iterations per TV prox                      | `100`                   |
//! | `gamma`          | step size                                                 | certified default       |
//! | `gamma_nu`       | `ν²/γ`, alternative to `gamma`                            |                         |
//! | `alpha_fraction` | `α / Λ(γ)` in `[0, 1)`                                    | `0.99`                  |
//! | `denoiser`       | `linear` or `weights:PATH`                                | `linear`                |
//! | `sigma_nu`       | smoother width in pixels; denoiser level `σ = sigma_nu·ν` | `1.4` (detik), `1` (debox) |
//! | `denoiser_c`     | strength `c` of the linear denoiser                       | `0.1` (detik), `0.05` (debox) |
//! | `box_lo`, `box_hi` | box constraint (TVBox, DeBox)                           | `0`, `1`                |
//! | `eps`, `k_max`   | stopping rule                                             | `1e-8`, `1000`          |
//! | `seed`           | noise seed                                                | `0`                     |
//! | `output_format`  | `png`, `pgm`                                              | `png`                   |

use std::fmt;
use std::path::PathBuf;

use serde::Serialize;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigError {
    /// `line N`, `--set key` or a similar locator.
    pub origin: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.origin, self.message)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Deblur,
    Superres,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    TvTik,
    DeTik,
    TvBox,
    DeBox,
}

impl Model {
    pub fn uses_denoiser(self) -> bool {
        matches!(self, Model::DeTik | Model::DeBox)
    }

    pub fn name(self) -> &'static str {
        match self {
            Model::TvTik => "tvtik",
            Model::DeTik => "detik",
            Model::TvBox => "tvbox",
            Model::DeBox => "debox",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ImageSource {
    Synthetic { h: usize, w: usize },
    File(PathBuf),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelSpec {
    Gaussian { width: f64 },
    Motion { length: f64, angle: f64 },
    Uniform { size: usize },
    Identity,
    File(PathBuf),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DenoiserSpec {
    Linear,
    Weights(PathBuf),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Png,
    Pgm,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub task: Task,
    pub model: Model,
    pub image: ImageSource,
    pub kernel: KernelSpec,
    pub scale: Option<usize>,
    pub nu: f64,
    pub beta: f64,
    pub tv_weight: f64,
    pub huber_eps: f64,
    pub tv_inner: usize,
    pub gamma: Option<f64>,
    pub gamma_nu: Option<f64>,
    pub alpha_fraction: f64,
    pub denoiser: DenoiserSpec,
    pub sigma_nu: Option<f64>,
    pub denoiser_c: Option<f64>,
    pub box_lo: f64,
    pub box_hi: f64,
    pub eps: f64,
    pub k_max: usize,
    pub seed: u64,
    pub output_format: OutputFormat,
    /// Run even when the step-size conditions fail.
    pub uncertified: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            task: Task::Deblur,
            model: Model::DeTik,
            image: ImageSource::Synthetic { h: 32, w: 32 },
            kernel: KernelSpec::Gaussian { width: 1.6 },
            scale: None,
            nu: 0.01,
            beta: 0.001,
            tv_weight: 20.0,
            huber_eps: 1e-3,
            tv_inner: 100,
            gamma: None,
            gamma_nu: None,
            alpha_fraction: 0.99,
            denoiser: DenoiserSpec::Linear,
            sigma_nu: None,
            denoiser_c: None,
            box_lo: 0.0,
            box_hi: 1.0,
            eps: 1e-8,
            k_max: 1000,
            seed: 0,
            output_format: OutputFormat::Png,
            uncertified: false,
        }
    }
}

fn num<T: std::str::FromStr>(v: &str) -> Result<T, String> {
    v.parse::<T>().map_err(|_| format!("cannot parse {v:?} as a number"))
}

fn positive(v: &str) -> Result<f64, String> {
    let x: f64 = num(v)?;
    if !(x > 0.0) || !x.is_finite() {
        return Err(format!("must be positive, got {v}"));
    }
    Ok(x)
}

fn parse_kernel(v: &str) -> Result<KernelSpec, String> {
    let parts: Vec<&str> = v.split(':').collect();
    match parts.as_slice() {
        ["identity"] => Ok(KernelSpec::Identity),
        ["gaussian", w] => Ok(KernelSpec::Gaussian { width: positive(w)? }),
        ["motion", l, a] => Ok(KernelSpec::Motion { length: positive(l)?, angle: num(a)? }),
        ["uniform", n] => Ok(KernelSpec::Uniform { size: num(n)? }),
        ["file", ..] if v.len() > 5 => Ok(KernelSpec::File(PathBuf::from(&v[5..]))),
        _ => Err(format!("unknown kernel spec {v:?}")),
    }
}

fn parse_size(v: &str) -> Result<(usize, usize), String> {
    let (h, w) = match v.split_once('x') {
        Some((h, w)) => (num(h)?, num(w)?),
        None => {
            let n = num(v)?;
            (n, n)
        }
    };
    if h == 0 || w == 0 {
        return Err(format!("size must be positive, got {v}"));
    }
    Ok((h, w))
}

impl ExperimentConfig {
    /// Sets one key; the error message does not include the origin.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let v = value.trim();
        match key {
            "task" => {
                self.task = match v {
                    "deblur" => Task::Deblur,
                    "superres" => Task::Superres,
                    _ => return Err(format!("unknown task {v:?} (deblur, superres)")),
                }
            }
            "model" => {
                self.model = match v {
                    "tvtik" => Model::TvTik,
                    "detik" => Model::DeTik,
                    "tvbox" => Model::TvBox,
                    "debox" => Model::DeBox,
                    _ => return Err(format!("unknown model {v:?} (tvtik, detik, tvbox, debox)")),
                }
            }
            "image" => {
                self.image = if v == "synthetic" {
                    match self.image {
                        ImageSource::Synthetic { .. } => self.image.clone(),
                        ImageSource::File(_) => ImageSource::Synthetic { h: 32, w: 32 },
                    }
                } else {
                    ImageSource::File(PathBuf::from(v))
                }
            }
            "size" => {
                let (h, w) = parse_size(v)?;
                match self.image {
                    ImageSource::Synthetic { .. } => self.image = ImageSource::Synthetic { h, w },
                    ImageSource::File(_) => return Err("size applies to the synthetic image only".into()),
                }
            }
            "kernel" => self.kernel = parse_kernel(v)?,
            "s" => {
                let s: usize = num(v)?;
                if s == 0 {
                    return Err("scale must be at least 1".into());
                }
                self.scale = Some(s);
            }
            "nu" => self.nu = positive(v)?,
            "beta" => {
                let b: f64 = num(v)?;
                if !(b >= 0.0) || !b.is_finite() {
                    return Err(format!("beta must be nonnegative, got {v}"));
                }
                self.beta = b;
            }
            "tv_weight" => self.tv_weight = positive(v)?,
            "huber_eps" => self.huber_eps = positive(v)?,
            "tv_inner" => self.tv_inner = num(v)?,
            "gamma" => self.gamma = Some(positive(v)?),
            "gamma_nu" => self.gamma_nu = Some(positive(v)?),
            "alpha_fraction" => {
                let a: f64 = num(v)?;
                if !(0.0..1.0).contains(&a) {
                    return Err(format!("alpha_fraction must lie in [0, 1), got {v}"));
                }
                self.alpha_fraction = a;
            }
            "denoiser" => {
                self.denoiser = match v.split_once(':') {
                    None if v == "linear" => DenoiserSpec::Linear,
                    Some(("weights", p)) if !p.is_empty() => DenoiserSpec::Weights(PathBuf::from(p)),
                    _ => return Err(format!("unknown denoiser {v:?} (linear, weights:PATH)")),
                }
            }
            "sigma_nu" => self.sigma_nu = Some(positive(v)?),
            "denoiser_c" => self.denoiser_c = Some(positive(v)?),
            "box_lo" => self.box_lo = num(v)?,
            "box_hi" => self.box_hi = num(v)?,
            "eps" => self.eps = positive(v)?,
            "k_max" => {
                let k: usize = num(v)?;
                if k == 0 {
                    return Err("k_max must be at least 1".into());
                }
                self.k_max = k;
            }
            "seed" => self.seed = num(v)?,
            "output_format" => {
                self.output_format = match v {
                    "png" => OutputFormat::Png,
                    "pgm" => OutputFormat::Pgm,
                    _ => return Err(format!("unknown output format {v:?} (png, pgm)")),
                }
            }
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    /// Parses a config file, then applies `key=value` overrides.
    pub fn parse(text: &str, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut cfg = ExperimentConfig::default();
        let mut seen = std::collections::HashMap::new();
        for (no, raw) in text.lines().enumerate() {
            let origin = format!("line {}", no + 1);
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError { origin, message: format!("expected `key = value`, found {line:?}") });
            };
            let key = key.trim();
            if let Some(first) = seen.insert(key.to_string(), no + 1) {
                return Err(ConfigError { origin, message: format!("`{key}` already set on line {first}") });
            }
            cfg.set(key, value).map_err(|message| ConfigError { origin, message })?;
        }
        for o in overrides {
            cfg.apply_override(o)?;
        }
        Ok(cfg)
    }

    pub fn apply_override(&mut self, pair: &str) -> Result<(), ConfigError> {
        let Some((key, value)) = pair.split_once('=') else {
            return Err(ConfigError { origin: "--set".into(), message: format!("expected key=value, found {pair:?}") });
        };
        let key = key.trim();
        self.set(key, value).map_err(|message| ConfigError { origin: format!("--set {key}"), message })
    }

    pub fn scale(&self) -> usize {
        self.scale.unwrap_or(match self.task {
            Task::Deblur => 1,
            Task::Superres => 2,
        })
    }

    pub fn sigma_nu(&self) -> f64 {
        self.sigma_nu.unwrap_or(if self.model == Model::DeBox { 1.0 } else { 1.4 })
    }

    pub fn denoiser_c(&self) -> f64 {
        self.denoiser_c.unwrap_or(if self.model == Model::DeBox { 0.05 } else { 0.1 })
    }

    /// Cross-field checks that single keys cannot catch.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let err = |origin: &str, message: String| Err(ConfigError { origin: origin.into(), message });
        if self.gamma.is_some() && self.gamma_nu.is_some() {
            return err("gamma", "set either gamma or gamma_nu, not both".into());
        }
        if !(self.box_lo < self.box_hi) {
            return err("box_lo", format!("box bounds out of order: [{}, {}]", self.box_lo, self.box_hi));
        }
        if self.task == Task::Deblur && self.scale() != 1 {
            return err("s", "deblurring uses s = 1; set task = superres".into());
        }
        if self.model.uses_denoiser() && self.denoiser_c() >= 1.0 {
            return err("denoiser_c", format!("must be below 1, got {}", self.denoiser_c()));
        }
        if self.tv_inner == 0 {
            return err("tv_inner", "must be at least 1".into());
        }
        Ok(())
    }
}
