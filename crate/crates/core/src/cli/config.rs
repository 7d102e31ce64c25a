//! Flat `key = value` experiment configs.
//!
//! Blank lines and `#` comments are ignored; every other line must be
//! `key = value`. Unknown keys and duplicate keys are errors. The full key
//! list is in the README.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::network::NetworkSpec;
use crate::optimizers::{AdamSettings, CombinedSettings, LbfgsSettings};
use crate::problems::{
    make_allen_cahn, make_convection, make_heat1d_nl, make_heat2d_hf, make_heat3d, make_reaction, PdeProblem,
    ProblemError,
};
use crate::sampling::{DataSizes, ResamplePolicy};
use crate::training::{FormalInit, LossWeights, PtSchedule, StageSettings};
use crate::Real;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: key `{key}`: {message}")]
    Value { line: usize, key: String, message: String },
    #[error("key `{key}`: {message}")]
    Invalid { key: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchmarkKind {
    Heat3d,
    Reaction,
    Heat2dHighFrequency,
    Heat1dNonlinear,
    AllenCahn,
    Convection,
}

impl BenchmarkKind {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "heat3d" => Self::Heat3d,
            "reaction" => Self::Reaction,
            "heat2d_hf" => Self::Heat2dHighFrequency,
            "heat1d_nl" => Self::Heat1dNonlinear,
            "allen_cahn" => Self::AllenCahn,
            "convection" => Self::Convection,
            _ => return None,
        })
    }

    pub fn spatial_dim(self) -> usize {
        match self {
            Self::Heat3d => 3,
            Self::Heat2dHighFrequency => 2,
            _ => 1,
        }
    }

    /// Network used for the benchmark unless overridden.
    pub fn default_network(self) -> NetworkSpec {
        let input = self.spatial_dim() + 1;
        match self {
            Self::Heat3d => NetworkSpec::mlp(input, 6, 50),
            Self::Heat2dHighFrequency | Self::Convection => NetworkSpec::resnet(input, 5, 50),
            _ => NetworkSpec::mlp(input, 5, 50),
        }
    }

    /// `(n_i, n_b, n_r)` unless overridden.
    pub fn default_sizes(self) -> (usize, usize, usize) {
        match self {
            Self::Heat3d => (100, 300, 500),
            Self::Reaction => (400, 200, 1000),
            Self::Heat2dHighFrequency => (400, 800, 4000),
            Self::Heat1dNonlinear => (400, 400, 1000),
            Self::AllenCahn => (400, 200, 4000),
            Self::Convection => (400, 400, 2000),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Standard,
    PtPinn,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkChoice {
    pub kind: BenchmarkKind,
    pub rho: Real,
    pub beta: Real,
    pub l: u32,
    pub reference: PathBuf,
}

impl BenchmarkChoice {
    pub fn build(&self) -> Result<PdeProblem, ProblemError> {
        match self.kind {
            BenchmarkKind::Heat3d => Ok(make_heat3d()),
            BenchmarkKind::Reaction => make_reaction(self.rho),
            BenchmarkKind::Heat2dHighFrequency => Ok(make_heat2d_hf()),
            BenchmarkKind::Heat1dNonlinear => make_heat1d_nl(self.l),
            BenchmarkKind::AllenCahn => make_allen_cahn(&self.reference),
            BenchmarkKind::Convection => make_convection(self.beta),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    pub repeats: usize,
    pub seed: u64,
    pub test_seed: Option<u64>,
    pub test_size: usize,
    /// A replicate fails when its final loss exceeds this multiple of the
    /// median final loss.
    pub failure_factor: Real,
    /// Failed replicates tolerated before the run is reported as failed.
    pub max_failures: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub benchmark: BenchmarkChoice,
    pub method: Method,
    /// Row label in result tables.
    pub label: String,
    pub schedule: PtSchedule,
    pub formal_init: FormalInit,
    pub run: RunSettings,
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    /// Settings of the single stage a standard run uses.
    pub fn standard_stage(&self) -> &StageSettings {
        &self.schedule.formal
    }

    /// `output.dir`, placed under `root` when relative.
    pub fn resolved_output_dir(&self, root: Option<&Path>) -> PathBuf {
        match root {
            Some(r) if self.output_dir.is_relative() => r.join(&self.output_dir),
            _ => self.output_dir.clone(),
        }
    }
}

struct Entries {
    map: BTreeMap<String, (usize, String)>,
}

impl Entries {
    fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut map = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((k, v)) = content.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line,
                    message: format!("expected `key = value`, found `{content}`"),
                });
            };
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() || k.contains(char::is_whitespace) {
                return Err(ConfigError::Syntax {
                    line,
                    message: format!("malformed key `{k}`"),
                });
            }
            if let Some((first, _)) = map.insert(k.to_string(), (line, v.to_string())) {
                return Err(ConfigError::Syntax {
                    line,
                    message: format!("duplicate key `{k}` (first set on line {first})"),
                });
            }
        }
        for (key, &(line, _)) in &map {
            let known = match key.strip_prefix("stage.") {
                Some(rest) => rest.split_once('.').is_some_and(|(_, f)| STAGE_FIELDS.contains(&f)),
                None => KNOWN_KEYS.contains(&key.as_str()),
            };
            if !known {
                let message = if key.starts_with("stage.") {
                    format!("unknown stage field (known: {})", STAGE_FIELDS.join(", "))
                } else {
                    "unknown key".to_string()
                };
                return Err(ConfigError::Value {
                    line,
                    key: key.clone(),
                    message,
                });
            }
        }
        Ok(Self { map })
    }

    fn take_raw(&mut self, key: &str) -> Option<(usize, String)> {
        self.map.remove(key)
    }

    fn take<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        match self.take_raw(key) {
            None => Ok(None),
            Some((line, v)) => v.parse::<T>().map(Some).map_err(|e| ConfigError::Value {
                line,
                key: key.to_string(),
                message: format!("cannot parse `{v}`: {e}"),
            }),
        }
    }

    fn take_or<T: std::str::FromStr>(&mut self, key: &str, default: T) -> Result<T, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.take(key)?.unwrap_or(default))
    }

    fn line_of(&self, key: &str) -> Option<usize> {
        self.map.get(key).map(|(l, _)| *l)
    }
}

fn invalid(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.to_string(),
        message: message.into(),
    }
}

fn parse_bool(key: &str, line: usize, v: &str) -> Result<bool, ConfigError> {
    match v {
        "true" | "on" | "yes" | "1" => Ok(true),
        "false" | "off" | "no" | "0" => Ok(false),
        _ => Err(ConfigError::Value {
            line,
            key: key.into(),
            message: format!("expected true/false, found `{v}`"),
        }),
    }
}

/// Stage-level values that `stage.<i>.<field>` can override.
#[derive(Clone)]
struct StageDefaults {
    sizes: DataSizes,
    adam_steps: usize,
    adam: AdamSettings,
    lbfgs: LbfgsSettings,
    use_lbfgs: bool,
    eta: Real,
    k: usize,
    f: Option<usize>,
    weights: LossWeights,
}

const KNOWN_KEYS: [&str; 42] = [
    "benchmark",
    "adam.decay_rate",
    "adam.decay_steps",
    "adam.lr",
    "adam.pre_steps",
    "adam.steps",
    "benchmark.beta",
    "benchmark.l",
    "benchmark.reference",
    "benchmark.rho",
    "data.n_b",
    "data.n_i",
    "data.n_r",
    "data.n_sp",
    "formal.init",
    "lbfgs.enabled",
    "lbfgs.ftol",
    "lbfgs.gtol",
    "lbfgs.max_iter",
    "lbfgs.memory",
    "method",
    "network.blocks",
    "network.hidden_layers",
    "network.kind",
    "network.width",
    "output.dir",
    "precision",
    "resample.eta",
    "resample.f",
    "resample.k",
    "run.failure_factor",
    "run.label",
    "run.max_failures",
    "run.repeats",
    "run.seed",
    "run.test_seed",
    "run.test_size",
    "schedule.intervals",
    "weights.b",
    "weights.i",
    "weights.r",
    "weights.sp",
];

const STAGE_FIELDS: [&str; 14] = [
    "n_i",
    "n_b",
    "n_r",
    "n_sp",
    "adam_steps",
    "lr",
    "eta",
    "k",
    "f",
    "w_i",
    "w_b",
    "w_r",
    "w_sp",
    "lbfgs",
];

fn stage_from(e: &mut Entries, prefix: &str, base: &StageDefaults, t_end: Real) -> Result<StageSettings, ConfigError> {
    let key = |f: &str| format!("{prefix}.{f}");
    let mut s = base.clone();
    s.sizes.n_i = e.take_or(&key("n_i"), s.sizes.n_i)?;
    s.sizes.n_b = e.take_or(&key("n_b"), s.sizes.n_b)?;
    s.sizes.n_r = e.take_or(&key("n_r"), s.sizes.n_r)?;
    s.sizes.n_sp = e.take_or(&key("n_sp"), s.sizes.n_sp)?;
    s.adam_steps = e.take_or(&key("adam_steps"), s.adam_steps)?;
    s.adam.lr = e.take_or(&key("lr"), s.adam.lr)?;
    s.eta = e.take_or(&key("eta"), s.eta)?;
    s.k = e.take_or(&key("k"), s.k)?;
    if let Some(f) = e.take(&key("f"))? {
        s.f = Some(f);
    }
    s.weights.initial = e.take_or(&key("w_i"), s.weights.initial)?;
    s.weights.boundary = e.take_or(&key("w_b"), s.weights.boundary)?;
    s.weights.residual = e.take_or(&key("w_r"), s.weights.residual)?;
    s.weights.supervised = e.take_or(&key("w_sp"), s.weights.supervised)?;
    if let Some((line, v)) = e.take_raw(&key("lbfgs")) {
        s.use_lbfgs = parse_bool(&key("lbfgs"), line, &v)?;
    }
    // F defaults to 4/5 of the Adam steps, as in the 5000/4000 setting
    let f = s.f.unwrap_or(s.adam_steps * 4 / 5);
    let stage = StageSettings {
        t_end,
        sizes: s.sizes,
        optimizer: CombinedSettings {
            adam: s.adam,
            adam_steps: s.adam_steps,
            lbfgs: s.lbfgs,
            use_lbfgs: s.use_lbfgs,
        },
        resample: ResamplePolicy { eta: s.eta, k: s.k, f },
        weights: s.weights,
    };
    stage.validate().map_err(|err| invalid(prefix, err.to_string()))?;
    Ok(stage)
}

fn parse_intervals(key: &str, line: usize, v: &str) -> Result<Vec<Real>, ConfigError> {
    v.split(',')
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<Real>().map_err(|e| ConfigError::Value {
                line,
                key: key.into(),
                message: format!("cannot parse `{s}`: {e}"),
            })
        })
        .collect()
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let mut e = Entries::parse(text)?;

    let (bline, bname) = e.take_raw("benchmark").ok_or_else(|| {
        invalid(
            "benchmark",
            "missing (heat3d, reaction, heat2d_hf, heat1d_nl, allen_cahn, convection)",
        )
    })?;
    let kind = BenchmarkKind::parse(&bname).ok_or_else(|| ConfigError::Value {
        line: bline,
        key: "benchmark".into(),
        message: format!("unknown benchmark `{bname}`"),
    })?;
    let benchmark = BenchmarkChoice {
        kind,
        rho: e.take_or("benchmark.rho", 1.0)?,
        beta: e.take_or("benchmark.beta", 1.0)?,
        l: e.take_or("benchmark.l", 0)?,
        reference: e.take_or("benchmark.reference", PathBuf::from("data/allen_cahn_reference.txt"))?,
    };
    for (key, applies) in [
        ("benchmark.rho", kind == BenchmarkKind::Reaction),
        ("benchmark.beta", kind == BenchmarkKind::Convection),
    ] {
        let v = if key.ends_with("rho") {
            benchmark.rho
        } else {
            benchmark.beta
        };
        if applies && !(v > 0.0) {
            return Err(invalid(key, format!("must be > 0, got {v}")));
        }
    }
    if kind == BenchmarkKind::Heat1dNonlinear && benchmark.l > 4 {
        return Err(invalid(
            "benchmark.l",
            format!("must lie in 0..=4, got {}", benchmark.l),
        ));
    }

    let method = match e.take_raw("method") {
        None => Method::PtPinn,
        Some((_, v)) if v == "standard" => Method::Standard,
        Some((_, v)) if v == "pt_pinn" => Method::PtPinn,
        Some((line, v)) => {
            return Err(ConfigError::Value {
                line,
                key: "method".into(),
                message: format!("expected `standard` or `pt_pinn`, found `{v}`"),
            })
        }
    };

    let input = kind.spatial_dim() + 1;
    let mut network = kind.default_network();
    if let Some((line, v)) = e.take_raw("network.kind") {
        let (blocks, width, hidden) = match &network {
            NetworkSpec::Mlp(m) => (5, m.width, m.hidden_layers),
            NetworkSpec::ResNet(r) => (r.blocks, r.width, 5),
        };
        network = match v.as_str() {
            "mlp" => NetworkSpec::mlp(input, hidden, width),
            "resnet" => NetworkSpec::resnet(input, blocks, width),
            _ => {
                return Err(ConfigError::Value {
                    line,
                    key: "network.kind".into(),
                    message: format!("expected `mlp` or `resnet`, found `{v}`"),
                })
            }
        };
    }
    match &mut network {
        NetworkSpec::Mlp(m) => {
            m.hidden_layers = e.take_or("network.hidden_layers", m.hidden_layers)?;
            m.width = e.take_or("network.width", m.width)?;
            if let Some(l) = e.line_of("network.blocks") {
                return Err(ConfigError::Value {
                    line: l,
                    key: "network.blocks".into(),
                    message: "only valid for resnet".into(),
                });
            }
        }
        NetworkSpec::ResNet(r) => {
            r.blocks = e.take_or("network.blocks", r.blocks)?;
            r.width = e.take_or("network.width", r.width)?;
            if let Some(l) = e.line_of("network.hidden_layers") {
                return Err(ConfigError::Value {
                    line: l,
                    key: "network.hidden_layers".into(),
                    message: "only valid for mlp".into(),
                });
            }
        }
    }
    network.validate().map_err(|err| invalid("network", err.to_string()))?;

    let (n_i, n_b, n_r) = kind.default_sizes();
    let adam = AdamSettings {
        lr: e.take_or("adam.lr", 1e-3)?,
        decay_rate: e.take_or("adam.decay_rate", 0.98)?,
        decay_steps: e.take_or("adam.decay_steps", 50)?,
        ..AdamSettings::default()
    };
    if adam.decay_steps == 0 {
        return Err(invalid("adam.decay_steps", "must be >= 1"));
    }
    let lbfgs_default = LbfgsSettings::default();
    let lbfgs = LbfgsSettings {
        memory: e.take_or("lbfgs.memory", lbfgs_default.memory)?,
        gtol: e.take_or("lbfgs.gtol", lbfgs_default.gtol)?,
        ftol: e.take_or("lbfgs.ftol", lbfgs_default.ftol)?,
        max_iter: e.take_or("lbfgs.max_iter", lbfgs_default.max_iter)?,
        ..lbfgs_default
    };
    if lbfgs.memory == 0 {
        return Err(invalid("lbfgs.memory", "must be >= 1"));
    }
    let use_lbfgs = match e.take_raw("lbfgs.enabled") {
        None => true,
        Some((line, v)) => parse_bool("lbfgs.enabled", line, &v)?,
    };
    let weights = LossWeights {
        initial: e.take_or("weights.i", 1.0)?,
        boundary: e.take_or("weights.b", 1.0)?,
        residual: e.take_or("weights.r", 1.0)?,
        supervised: e.take_or("weights.sp", 1.0)?,
    };
    let formal_defaults = StageDefaults {
        sizes: DataSizes {
            n_i: e.take_or("data.n_i", n_i)?,
            n_b: e.take_or("data.n_b", n_b)?,
            n_r: e.take_or("data.n_r", n_r)?,
            n_sp: e.take_or("data.n_sp", 0)?,
        },
        adam_steps: e.take_or("adam.steps", 5000)?,
        adam,
        lbfgs,
        use_lbfgs,
        // a standard PINN keeps its residual points fixed
        eta: e.take_or("resample.eta", if method == Method::Standard { 0.0 } else { 0.6 })?,
        k: e.take_or("resample.k", 200)?,
        f: e.take("resample.f")?,
        weights,
    };
    let pre_defaults = StageDefaults {
        adam_steps: e.take_or("adam.pre_steps", 2000)?,
        // F scales with the stage's own step count unless set explicitly
        ..formal_defaults.clone()
    };

    let intervals = match e.take_raw("schedule.intervals") {
        None => Vec::new(),
        Some((line, v)) => parse_intervals("schedule.intervals", line, &v)?,
    };
    if method == Method::PtPinn && intervals.is_empty() {
        return Err(invalid(
            "schedule.intervals",
            "pt_pinn needs at least one pre-training end time",
        ));
    }
    let mut pretrain = Vec::with_capacity(intervals.len());
    for (i, &t) in intervals.iter().enumerate() {
        pretrain.push(stage_from(&mut e, &format!("stage.{}", i + 1), &pre_defaults, t)?);
    }
    let formal = stage_from(&mut e, "stage.formal", &formal_defaults, 1.0)?;
    let schedule = PtSchedule {
        network,
        pretrain,
        formal,
    };

    let formal_init = match e.take_raw("formal.init") {
        None => FormalInit::Pretrained,
        Some((_, v)) if v == "pretrained" => FormalInit::Pretrained,
        Some((_, v)) if v == "random" => FormalInit::Random,
        Some((line, v)) => {
            return Err(ConfigError::Value {
                line,
                key: "formal.init".into(),
                message: format!("expected `pretrained` or `random`, found `{v}`"),
            })
        }
    };
    let run = RunSettings {
        repeats: e.take_or("run.repeats", 1)?,
        seed: e.take_or("run.seed", 0)?,
        test_seed: e.take("run.test_seed")?,
        test_size: e.take_or("run.test_size", crate::metrics::TEST_SET_SIZE)?,
        failure_factor: e.take_or("run.failure_factor", 10.0)?,
        max_failures: e.take_or("run.max_failures", 0)?,
    };
    if run.repeats == 0 {
        return Err(invalid("run.repeats", "must be >= 1"));
    }
    if !(run.failure_factor > 1.0) {
        return Err(invalid("run.failure_factor", "must be > 1"));
    }
    let default_label = match method {
        Method::Standard => "standard".to_string(),
        Method::PtPinn => format!("pt_pinn_k{}", schedule.pretrain.len()),
    };
    let label = e.take_or("run.label", default_label)?;
    let output_dir = e.take_or("output.dir", PathBuf::from(format!("results/{}_{}", bname, label)))?;
    if let Some((line, v)) = e.take_raw("precision") {
        if v != crate::PRECISION {
            return Err(ConfigError::Value {
                line,
                key: "precision".into(),
                message: format!(
                    "this build computes in {}; rebuild {} the `f32` feature for `{v}`",
                    crate::PRECISION,
                    if v == "f32" { "with" } else { "without" }
                ),
            });
        }
    }

    if let Some((key, (line, _))) = e.map.iter().next() {
        // field names were checked on parsing, so only the stage index is left
        let idx = key.trim_start_matches("stage.").split('.').next().unwrap_or("");
        let hint = format!(
            "no stage `{idx}`: {} pre-training interval(s) configured",
            intervals.len()
        );
        return Err(ConfigError::Value {
            line: *line,
            key: key.clone(),
            message: hint,
        });
    }

    Ok(ExperimentConfig {
        benchmark,
        method,
        label,
        schedule,
        formal_init,
        run,
        output_dir,
    })
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, Box<dyn std::error::Error + Send + Sync>> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    Ok(parse_config(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TABLE5: &str = "
        # Allen-Cahn, 2-interval schedule
        benchmark = allen_cahn
        benchmark.reference = grid.txt
        method = pt_pinn
        data.n_i = 400
        data.n_b = 200
        data.n_r = 4000
        data.n_sp = 1000
        schedule.intervals = 0.25, 0.5
        stage.1.n_r = 2000
        stage.2.n_r = 3000
        run.repeats = 5
    ";

    #[test]
    fn parses_schedule_with_overrides() {
        let c = parse_config(TABLE5).unwrap();
        assert_eq!(c.benchmark.kind, BenchmarkKind::AllenCahn);
        assert_eq!(c.label, "pt_pinn_k2");
        let s = &c.schedule;
        assert_eq!(s.endpoints(), vec![0.25, 0.5, 1.0]);
        assert_eq!(s.pretrain[0].sizes, DataSizes::new(400, 200, 2000, 1000));
        assert_eq!(s.pretrain[1].sizes, DataSizes::new(400, 200, 3000, 1000));
        assert_eq!(s.formal.sizes, DataSizes::new(400, 200, 4000, 1000));
        assert_eq!(s.pretrain[0].optimizer.adam_steps, 2000);
        assert_eq!(s.formal.optimizer.adam_steps, 5000);
        assert_eq!(
            s.formal.resample,
            ResamplePolicy {
                eta: 0.6,
                k: 200,
                f: 4000
            }
        );
        assert_eq!(s.pretrain[0].resample.f, 1600);
        assert_eq!(c.run.repeats, 5);
        assert_eq!(s.network, NetworkSpec::mlp(2, 5, 50));
    }

    #[test]
    fn errors_name_line_and_key() {
        let err = parse_config("benchmark = reaction\nschedule.intervals = 0.1\nnetwork.width = fifty\n").unwrap_err();
        assert_eq!(
            err,
            ConfigError::Value {
                line: 3,
                key: "network.width".into(),
                message: "cannot parse `fifty`: invalid digit found in string".into()
            }
        );
        let err = parse_config("benchmark = reaction\nmethod = standard\nbogus = 1\n").unwrap_err();
        assert!(matches!(err, ConfigError::Value { line: 3, .. }), "{err}");
        let err = parse_config("benchmark = reaction\nmethod = standard\nstage.3.n_r = 5\n").unwrap_err();
        assert!(err.to_string().contains("no stage `3`"), "{err}");
        let err = parse_config("benchmark = reaction\nmethod = standard\nnot a pair\n").unwrap_err();
        assert!(matches!(err, ConfigError::Syntax { line: 3, .. }));
        let err = parse_config("benchmark = heat1d_nl\nbenchmark.l = 7\nmethod = standard\n").unwrap_err();
        assert!(err.to_string().contains("benchmark.l"));
        let err = parse_config("benchmark = reaction\nmethod = pt_pinn\n").unwrap_err();
        assert!(err.to_string().contains("schedule.intervals"));
        let err = parse_config("benchmark = reaction\nmethod = standard\nresample.f = 9000\n").unwrap_err();
        assert!(err.to_string().contains("exceeds"), "{err}");
        let err = parse_config("benchmark = reaction\nmethod = standard\nmethod = pt_pinn\n").unwrap_err();
        assert!(err.to_string().contains("duplicate"));
    }

    #[test]
    fn precision_must_match_build() {
        let ok = format!(
            "benchmark = heat3d\nmethod = standard\nprecision = {}\n",
            crate::PRECISION
        );
        assert!(parse_config(&ok).is_ok());
        let other = if crate::PRECISION == "f64" { "f32" } else { "f64" };
        let bad = format!("benchmark = heat3d\nmethod = standard\nprecision = {other}\n");
        assert!(parse_config(&bad).is_err());
    }

    #[test]
    fn network_defaults_and_overrides() {
        let c = parse_config("benchmark = convection\nbenchmark.beta = 30\nmethod = standard\n").unwrap();
        assert_eq!(c.schedule.network, NetworkSpec::resnet(2, 5, 50));
        let c = parse_config("benchmark = heat3d\nmethod = standard\nnetwork.hidden_layers = 2\nnetwork.width = 8\n")
            .unwrap();
        assert_eq!(c.schedule.network, NetworkSpec::mlp(4, 2, 8));
        let c = parse_config("benchmark = reaction\nmethod = standard\nnetwork.kind = resnet\nnetwork.blocks = 2\n")
            .unwrap();
        assert_eq!(c.schedule.network, NetworkSpec::resnet(2, 2, 50));
        assert!(parse_config("benchmark = reaction\nmethod = standard\nnetwork.blocks = 2\n").is_err());
    }
}
