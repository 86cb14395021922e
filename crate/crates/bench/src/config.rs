//! Flat `key = value` experiment configuration.
//!
//! Blank lines and text after `#` are ignored. Every key is optional except
//! the learning rate of a selected `gd` or `nesterov` baseline. Overrides given
//! as `key=value` strings replace file values before validation.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rfd_core::optimizers::{BaselineKind, Hyper};
use rfd_core::{IsotropicModel, NoiseSpec};
use thiserror::Error;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "RFD_BENCH_OUT";
const DEFAULT_OUT_DIR: &str = "bench_out";

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("unknown config keys: {}", .0.join(", "))]
    UnknownKeys(Vec<String>),
    #[error("invalid value for `{key}`: {message}")]
    Invalid { key: String, message: String },
    #[error("missing required key `{0}`")]
    Missing(String),
    #[error("cannot read config {path}: {message}")]
    Read { path: PathBuf, message: String },
}

type Result<T> = std::result::Result<T, ConfigError>;

const KNOWN_KEYS: &[&str] = &[
    "loss",
    "model",
    "variance",
    "length_scale",
    "rq_beta",
    "dim",
    "seeds",
    "steps",
    "mu",
    "noise_value_var",
    "noise_grad_var",
    "independent_gradient",
    "xi_ema",
    "jitter",
    "start",
    "optimizers",
    "conservative.epsilon",
    "regularized.reg_var",
    "gd.lr",
    "nesterov.lr",
    "adam.lr",
    "adam.beta1",
    "adam.beta2",
    "adam.eps",
    "nadam.lr",
    "nadam.beta1",
    "nadam.beta2",
    "nadam.eps",
    "toy.m",
    "toy.sigma",
    "toy.sigma_eps",
    "output_dir",
    "dump_iterates",
    "similarity",
    "threads",
];

/// Covariance model selection shared by the config file and the CLI.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelSpec {
    pub name: ModelName,
    pub variance: f64,
    pub length_scale: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelName {
    SqExp,
    Matern32,
    Matern52,
    Rq,
    Grq,
}

impl FromStr for ModelName {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "sqexp" => Ok(ModelName::SqExp),
            "matern32" => Ok(ModelName::Matern32),
            "matern52" => Ok(ModelName::Matern52),
            "rq" => Ok(ModelName::Rq),
            "grq" => Ok(ModelName::Grq),
            other => Err(format!(
                "unknown model `{other}` (expected sqexp, matern32, matern52, rq or grq)"
            )),
        }
    }
}

impl ModelName {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelName::SqExp => "sqexp",
            ModelName::Matern32 => "matern32",
            ModelName::Matern52 => "matern52",
            ModelName::Rq => "rq",
            ModelName::Grq => "grq",
        }
    }
}

impl ModelSpec {
    pub fn build(&self) -> rfd_core::Result<IsotropicModel> {
        match self.name {
            ModelName::SqExp => IsotropicModel::squared_exponential(self.variance, self.length_scale),
            ModelName::Matern32 => IsotropicModel::matern(1, self.variance, self.length_scale),
            ModelName::Matern52 => IsotropicModel::matern(2, self.variance, self.length_scale),
            ModelName::Rq => IsotropicModel::rational_quadratic(self.beta, self.variance, self.length_scale),
            ModelName::Grq => IsotropicModel::generalized_rational_quadratic(self.beta),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    Grf,
    Toy,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToySpec {
    /// Number of samples; defaults to `dim`.
    pub m: usize,
    pub sigma: f64,
    pub sigma_eps: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimizerSpec {
    Rfd,
    RfmStar,
    Conservative { epsilon: f64 },
    Regularized { reg_var: f64 },
    Baseline { kind: BaselineKind, hyper: Hyper },
}

impl OptimizerSpec {
    pub fn name(&self) -> &'static str {
        match self {
            OptimizerSpec::Rfd => "rfd",
            OptimizerSpec::RfmStar => "rfm_star",
            OptimizerSpec::Conservative { .. } => "conservative",
            OptimizerSpec::Regularized { .. } => "regularized",
            OptimizerSpec::Baseline { kind, .. } => kind.name(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub loss: LossKind,
    pub model: ModelSpec,
    pub dim: usize,
    pub seeds: Vec<u64>,
    pub steps: usize,
    pub mu: f64,
    pub noise: NoiseSpec,
    pub independent_gradient: bool,
    pub xi_ema: Option<f64>,
    /// Relative GRF jitter (times `C(0)`).
    pub jitter: f64,
    /// Every coordinate of the starting point.
    pub start: f64,
    pub optimizers: Vec<OptimizerSpec>,
    pub toy: ToySpec,
    pub output_dir: PathBuf,
    pub dump_iterates: bool,
    pub similarity: bool,
    /// Worker threads; 0 picks the number of cores.
    pub threads: usize,
}

/// Parses `key = value` lines into a map, rejecting duplicates.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line: i + 1,
            message: format!("expected `key = value`, got `{line}`"),
        })?;
        let key = k.trim().to_string();
        if key.is_empty() {
            return Err(ConfigError::Syntax {
                line: i + 1,
                message: "empty key".into(),
            });
        }
        if map.insert(key.clone(), v.trim().to_string()).is_some() {
            return Err(ConfigError::Syntax {
                line: i + 1,
                message: format!("duplicate key `{key}`"),
            });
        }
    }
    Ok(map)
}

/// Applies `key=value` overrides on top of `map`.
pub fn apply_overrides(map: &mut BTreeMap<String, String>, overrides: &[String]) -> Result<()> {
    for o in overrides {
        let (k, v) = o.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line: 0,
            message: format!("override `{o}` is not `key=value`"),
        })?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(())
}

struct Lookup<'a> {
    map: &'a BTreeMap<String, String>,
}

impl Lookup<'_> {
    fn raw(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(String::as_str).filter(|v| !v.is_empty())
    }

    fn parse<T: FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|e: T::Err| ConfigError::Invalid {
                key: key.into(),
                message: format!("`{v}`: {e}"),
            }),
        }
    }

    fn required<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let v = self.raw(key).ok_or_else(|| ConfigError::Missing(key.into()))?;
        v.parse().map_err(|e: T::Err| ConfigError::Invalid {
            key: key.into(),
            message: format!("`{v}`: {e}"),
        })
    }
}

fn invalid(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.into(),
        message: message.into(),
    }
}

fn hyper(l: &Lookup, prefix: &str, required_lr: bool) -> Result<Hyper> {
    let d = Hyper::default();
    let lr_key = format!("{prefix}.lr");
    let lr = if required_lr {
        l.required(&lr_key)?
    } else {
        l.parse(&lr_key, d.lr)?
    };
    let h = Hyper {
        lr,
        beta1: l.parse(&format!("{prefix}.beta1"), d.beta1)?,
        beta2: l.parse(&format!("{prefix}.beta2"), d.beta2)?,
        eps: l.parse(&format!("{prefix}.eps"), d.eps)?,
    };
    if !(h.lr >= 0.0 && h.lr.is_finite()) {
        return Err(invalid(&lr_key, format!("learning rate must be nonnegative, got {}", h.lr)));
    }
    Ok(h)
}

impl ExperimentConfig {
    pub fn from_text(text: &str, overrides: &[String]) -> Result<Self> {
        let mut map = parse_pairs(text)?;
        apply_overrides(&mut map, overrides)?;
        Self::from_map(&map)
    }

    pub fn from_file(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Self::from_text(&text, overrides)
    }

    pub fn from_map(map: &BTreeMap<String, String>) -> Result<Self> {
        let unknown: Vec<String> = map
            .keys()
            .filter(|k| !KNOWN_KEYS.contains(&k.as_str()))
            .cloned()
            .collect();
        if !unknown.is_empty() {
            return Err(ConfigError::UnknownKeys(unknown));
        }
        let l = Lookup { map };

        let loss = match l.raw("loss").unwrap_or("grf") {
            "grf" => LossKind::Grf,
            "toy" => LossKind::Toy,
            other => return Err(invalid("loss", format!("expected grf or toy, got `{other}`"))),
        };
        let model = ModelSpec {
            name: l.parse("model", ModelName::SqExp)?,
            variance: l.parse("variance", 1.0)?,
            length_scale: l.parse("length_scale", 1.0)?,
            beta: l.parse("rq_beta", 1.0)?,
        };
        let built = model.build().map_err(|e| invalid("model", e.to_string()))?;

        let dim: usize = l.parse("dim", 10)?;
        if dim == 0 {
            return Err(invalid("dim", "must be at least 1"));
        }
        let seeds = match l.raw("seeds") {
            None => vec![0],
            Some(v) => v
                .split(',')
                .map(|s| s.trim().parse::<u64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| invalid("seeds", format!("`{v}`: {e}")))?,
        };
        if seeds.is_empty() {
            return Err(invalid("seeds", "need at least one seed"));
        }
        let mut sorted = seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != seeds.len() {
            return Err(invalid("seeds", "seeds must be distinct"));
        }

        let noise = NoiseSpec::new(l.parse("noise_value_var", 0.0)?, l.parse("noise_grad_var", 0.0)?)
            .map_err(|e| invalid("noise_value_var", e.to_string()))?;
        let xi_ema = match l.raw("xi_ema") {
            None | Some("none") => None,
            Some(_) => {
                let f: f64 = l.required("xi_ema")?;
                if !(0.0..1.0).contains(&f) {
                    return Err(invalid("xi_ema", format!("must lie in [0, 1), got {f}")));
                }
                Some(f)
            }
        };
        let jitter: f64 = l.parse("jitter", rfd_core::grf::DEFAULT_RELATIVE_JITTER)?;
        if !(jitter >= 0.0 && jitter.is_finite()) {
            return Err(invalid("jitter", format!("must be nonnegative, got {jitter}")));
        }

        let names = l.raw("optimizers").unwrap_or("rfd");
        let mut optimizers = Vec::new();
        for name in names.split(',').map(str::trim) {
            let spec = match name {
                "rfd" => OptimizerSpec::Rfd,
                "rfm_star" => OptimizerSpec::RfmStar,
                "conservative" => {
                    let epsilon: f64 = l.parse("conservative.epsilon", 0.9)?;
                    if !(epsilon > 0.0 && epsilon < 1.0) {
                        return Err(invalid("conservative.epsilon", format!("must lie in (0, 1), got {epsilon}")));
                    }
                    OptimizerSpec::Conservative { epsilon }
                }
                "regularized" => {
                    let reg_var: f64 = l.required("regularized.reg_var")?;
                    if !(reg_var >= 0.0 && reg_var.is_finite()) {
                        return Err(invalid("regularized.reg_var", format!("must be nonnegative, got {reg_var}")));
                    }
                    OptimizerSpec::Regularized { reg_var }
                }
                "gd" => OptimizerSpec::Baseline {
                    kind: BaselineKind::Gd,
                    hyper: hyper(&l, "gd", true)?,
                },
                "nesterov" => OptimizerSpec::Baseline {
                    kind: BaselineKind::Nesterov,
                    hyper: hyper(&l, "nesterov", true)?,
                },
                "adam" => OptimizerSpec::Baseline {
                    kind: BaselineKind::Adam,
                    hyper: hyper(&l, "adam", false)?,
                },
                "nadam" => OptimizerSpec::Baseline {
                    kind: BaselineKind::Nadam,
                    hyper: hyper(&l, "nadam", false)?,
                },
                other => return Err(invalid("optimizers", format!("unknown optimizer `{other}`"))),
            };
            if optimizers.iter().any(|o: &OptimizerSpec| o.name() == spec.name()) {
                return Err(invalid("optimizers", format!("`{name}` listed twice")));
            }
            optimizers.push(spec);
        }
        if xi_ema.is_some()
            && optimizers
                .iter()
                .any(|o| matches!(o, OptimizerSpec::Conservative { .. } | OptimizerSpec::Regularized { .. }))
        {
            return Err(invalid("xi_ema", "only supported by rfd and rfm_star"));
        }
        if !built.is_stationary()
            && optimizers
                .iter()
                .any(|o| matches!(o, OptimizerSpec::Conservative { .. } | OptimizerSpec::Regularized { .. }))
        {
            return Err(invalid("model", "conservative and regularized runs need a stationary model"));
        }
        if loss == LossKind::Grf && !built.has_finite_second_derivative_at_zero() {
            return Err(invalid("model", "GRF simulation needs a model with finite C''(0)"));
        }
        if loss == LossKind::Grf && !built.is_stationary() {
            return Err(invalid("model", "GRF simulation needs a stationary model"));
        }

        let toy = ToySpec {
            m: l.parse("toy.m", dim)?,
            sigma: l.parse("toy.sigma", 1.0)?,
            sigma_eps: l.parse("toy.sigma_eps", 0.0)?,
        };
        if loss == LossKind::Toy && toy.m < dim {
            return Err(invalid("toy.m", format!("must be at least dim = {dim}, got {}", toy.m)));
        }

        let output_dir = match l.raw("output_dir") {
            Some(v) => PathBuf::from(v),
            None => std::env::var_os(OUT_DIR_ENV)
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR)),
        };

        Ok(Self {
            loss,
            model,
            dim,
            seeds,
            steps: l.parse("steps", 30)?,
            mu: l.parse("mu", 0.0)?,
            noise,
            independent_gradient: l.parse("independent_gradient", false)?,
            xi_ema,
            jitter,
            start: l.parse("start", 0.0)?,
            optimizers,
            toy,
            output_dir,
            dump_iterates: l.parse("dump_iterates", false)?,
            similarity: l.parse("similarity", true)?,
            threads: l.parse("threads", 0)?,
        })
    }

    pub fn build_model(&self) -> IsotropicModel {
        self.model.build().expect("validated at parse time")
    }

    /// Canonical `key = value` rendering of every resolved setting. Parsing it
    /// back yields the same config.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        put("loss", match self.loss {
            LossKind::Grf => "grf".into(),
            LossKind::Toy => "toy".into(),
        });
        put("model", self.model.name.as_str().into());
        put("variance", self.model.variance.to_string());
        put("length_scale", self.model.length_scale.to_string());
        put("rq_beta", self.model.beta.to_string());
        put("dim", self.dim.to_string());
        put(
            "seeds",
            self.seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(","),
        );
        put("steps", self.steps.to_string());
        put("mu", self.mu.to_string());
        put("noise_value_var", self.noise.value_var.to_string());
        put("noise_grad_var", self.noise.grad_var.to_string());
        put("independent_gradient", self.independent_gradient.to_string());
        put("xi_ema", self.xi_ema.map_or("none".into(), |f| f.to_string()));
        put("jitter", self.jitter.to_string());
        put("start", self.start.to_string());
        put(
            "optimizers",
            self.optimizers.iter().map(|o| o.name()).collect::<Vec<_>>().join(","),
        );
        for o in &self.optimizers {
            match o {
                OptimizerSpec::Conservative { epsilon } => put("conservative.epsilon", epsilon.to_string()),
                OptimizerSpec::Regularized { reg_var } => put("regularized.reg_var", reg_var.to_string()),
                OptimizerSpec::Baseline { kind, hyper } => {
                    let p = kind.name();
                    put(&format!("{p}.lr"), hyper.lr.to_string());
                    if matches!(kind, BaselineKind::Adam | BaselineKind::Nadam) {
                        put(&format!("{p}.beta1"), hyper.beta1.to_string());
                        put(&format!("{p}.beta2"), hyper.beta2.to_string());
                        put(&format!("{p}.eps"), hyper.eps.to_string());
                    }
                }
                OptimizerSpec::Rfd | OptimizerSpec::RfmStar => {}
            }
        }
        put("toy.m", self.toy.m.to_string());
        put("toy.sigma", self.toy.sigma.to_string());
        put("toy.sigma_eps", self.toy.sigma_eps.to_string());
        put("output_dir", self.output_dir.display().to_string());
        put("dump_iterates", self.dump_iterates.to_string());
        put("similarity", self.similarity.to_string());
        put("threads", self.threads.to_string());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_comments() {
        let c = ExperimentConfig::from_text("# nothing\n\ndim = 3  # small\noutput_dir = x\n", &[]).unwrap();
        assert_eq!(c.dim, 3);
        assert_eq!(c.seeds, vec![0]);
        assert_eq!(c.optimizers, vec![OptimizerSpec::Rfd]);
        assert_eq!(c.output_dir, PathBuf::from("x"));
    }

    #[test]
    fn unknown_keys_listed_by_name() {
        let err = ExperimentConfig::from_text("dim = 2\nfoo = 1\nbar.baz = 2\n", &[]).unwrap_err();
        assert_eq!(err, ConfigError::UnknownKeys(vec!["bar.baz".into(), "foo".into()]));
        assert_eq!(err.to_string(), "unknown config keys: bar.baz, foo");
    }

    #[test]
    fn overrides_win() {
        let c = ExperimentConfig::from_text("dim = 2\n", &["dim=7".into(), "seeds=4,5".into()]).unwrap();
        assert_eq!(c.dim, 7);
        assert_eq!(c.seeds, vec![4, 5]);
    }

    #[test]
    fn syntax_errors() {
        assert!(matches!(
            ExperimentConfig::from_text("dim 2\n", &[]),
            Err(ConfigError::Syntax { line: 1, .. })
        ));
        assert!(matches!(
            ExperimentConfig::from_text("dim = 2\ndim = 3\n", &[]),
            Err(ConfigError::Syntax { line: 2, .. })
        ));
    }

    #[test]
    fn invalid_values() {
        for text in [
            "dim = 0",
            "seeds = 1,x",
            "seeds = 1,1",
            "model = cubic",
            "model = matern32",
            "optimizers = rfd,sgd",
            "optimizers = gd",
            "optimizers = conservative\nconservative.epsilon = 1",
            "loss = toy\ndim = 5\ntoy.m = 2",
            "xi_ema = 1",
            "noise_value_var = -1",
        ] {
            assert!(ExperimentConfig::from_text(text, &[]).is_err(), "{text}");
        }
        assert_eq!(
            ExperimentConfig::from_text("optimizers = regularized", &[]).unwrap_err(),
            ConfigError::Missing("regularized.reg_var".into())
        );
    }

    #[test]
    fn render_round_trips() {
        let text = "loss = toy\ndim = 4\nseeds = 3,1\noptimizers = rfd,adam,gd,conservative\ngd.lr = 0.05\nxi_ema = none\noutput_dir = out\nmu = -0.25\n";
        let c = ExperimentConfig::from_text(text, &[]).unwrap();
        let again = ExperimentConfig::from_text(&c.render(), &[]).unwrap();
        assert_eq!(c, again);
        assert_eq!(c.render(), again.render());
    }
}
