//! Flat `key = value` configuration files and run manifests.
//!
//! Keys mirror the long flag names (`delta-lower`, `steps-per-update`, ...).
//! Floats are written in Rust's shortest round-trip form, so a manifest read
//! back yields the identical configuration.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use pporpe::net::Activation;
use pporpe::surrogate::Method;
use pporpe::trainer::TrainerConfig;

use crate::error::CliError;

pub const VERSION: &str = concat!("pporpe-cli ", env!("CARGO_PKG_VERSION"));

/// Keys that describe a run rather than configure it.
const META_KEYS: [&str; 3] = ["version", "timestamp", "out"];

/// Splits `key = value` lines. Blank lines and `#` comments are skipped.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>, CliError> {
    let mut pairs = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::Usage(format!("config line {}: expected `key = value`", i + 1))
        })?;
        pairs.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(pairs)
}

pub fn read_pairs(path: &Path) -> Result<Vec<(String, String)>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_pairs(&text)
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| CliError::Usage(format!("invalid value `{value}` for `{key}`")))
}

/// Parses a CLI method tag. The library-only ablation is rejected.
pub fn parse_method(value: &str) -> Result<Method, CliError> {
    match value.parse::<Method>()? {
        Method::Unregularized => Err(pporpe::Error::UnknownMethod(value.into()).into()),
        m => Ok(m),
    }
}

/// Sets one configuration key.
pub fn apply(config: &mut TrainerConfig, key: &str, value: &str) -> Result<(), CliError> {
    match key {
        "env" => config.env = value.to_string(),
        "method" => config.surrogate.method = parse_method(value)?,
        "epsilon" => config.surrogate.epsilon = parse(key, value)?,
        "beta" => config.surrogate.beta = parse(key, value)?,
        "eta" => config.surrogate.eta = parse(key, value)?,
        "log-ratio-clamp" => config.surrogate.log_ratio_clamp = parse(key, value)?,
        "kappa" => config.threshold.kappa = parse(key, value)?,
        "lambda" => config.threshold.lambda = parse(key, value)?,
        "delta-lower" => config.threshold.delta_lower = parse(key, value)?,
        "threshold-per-sample" => config.threshold_per_sample = parse(key, value)?,
        "episodes" => config.episodes = parse(key, value)?,
        "steps-per-update" => config.steps_per_update = parse(key, value)?,
        "batch" => config.batch_size = parse(key, value)?,
        "warmup" => config.warmup_steps = parse(key, value)?,
        "capacity" => config.capacity = parse(key, value)?,
        "alpha" => config.learning_rate = parse(key, value)?,
        "gamma" => config.gamma = parse(key, value)?,
        "actor-polyak" => config.actor_polyak = parse(key, value)?,
        "critic-polyak" => config.critic_polyak = parse(key, value)?,
        "entropy" => config.entropy_bonus = parse(key, value)?,
        "hidden" => {
            config.hidden = if value.is_empty() {
                Vec::new()
            } else {
                value
                    .split(',')
                    .map(|w| parse(key, w.trim()))
                    .collect::<Result<_, _>>()?
            }
        }
        "activation" => {
            config.activation = Activation::from_tag(value).ok_or_else(|| {
                CliError::Usage(format!("unknown activation `{value}` (expected tanh or swish)"))
            })?
        }
        "seed" => config.seed = parse(key, value)?,
        other => return Err(CliError::Usage(format!("unknown config key `{other}`"))),
    }
    Ok(())
}

/// Applies pairs in order on top of `base`, skipping manifest metadata.
pub fn apply_all(
    mut base: TrainerConfig,
    pairs: &[(String, String)],
) -> Result<TrainerConfig, CliError> {
    for (k, v) in pairs {
        if !META_KEYS.contains(&k.as_str()) {
            apply(&mut base, k, v)?;
        }
    }
    Ok(base)
}

/// Every configuration key with its value, in a fixed order.
pub fn to_pairs(config: &TrainerConfig) -> Vec<(&'static str, String)> {
    let hidden: Vec<String> = config.hidden.iter().map(|w| w.to_string()).collect();
    vec![
        ("env", config.env.clone()),
        ("method", config.surrogate.method.tag().to_string()),
        ("epsilon", format!("{:?}", config.surrogate.epsilon)),
        ("beta", format!("{:?}", config.surrogate.beta)),
        ("eta", format!("{:?}", config.surrogate.eta)),
        ("log-ratio-clamp", format!("{:?}", config.surrogate.log_ratio_clamp)),
        ("kappa", format!("{:?}", config.threshold.kappa)),
        ("lambda", format!("{:?}", config.threshold.lambda)),
        ("delta-lower", format!("{:?}", config.threshold.delta_lower)),
        ("threshold-per-sample", config.threshold_per_sample.to_string()),
        ("episodes", config.episodes.to_string()),
        ("steps-per-update", config.steps_per_update.to_string()),
        ("batch", config.batch_size.to_string()),
        ("warmup", config.warmup_steps.to_string()),
        ("capacity", config.capacity.to_string()),
        ("alpha", format!("{:?}", config.learning_rate)),
        ("gamma", format!("{:?}", config.gamma)),
        ("actor-polyak", format!("{:?}", config.actor_polyak)),
        ("critic-polyak", format!("{:?}", config.critic_polyak)),
        ("entropy", format!("{:?}", config.entropy_bonus)),
        ("hidden", hidden.join(",")),
        ("activation", config.activation.tag().to_string()),
        ("seed", config.seed.to_string()),
    ]
}

/// Resolved configuration plus run metadata, written before training.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub config: TrainerConfig,
    pub version: String,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    pub out_dir: PathBuf,
}

impl RunManifest {
    pub fn new(config: TrainerConfig, out_dir: PathBuf) -> Self {
        let timestamp = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Self {
            config,
            version: VERSION.to_string(),
            timestamp,
            out_dir,
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "version = {}", self.version);
        let _ = writeln!(out, "timestamp = {}", self.timestamp);
        let _ = writeln!(out, "out = {}", self.out_dir.display());
        for (k, v) in to_pairs(&self.config) {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let pairs = parse_pairs(text)?;
        let meta = |key: &str| {
            pairs
                .iter()
                .find(|(k, _)| k == key)
                .map(|(_, v)| v.clone())
                .ok_or_else(|| CliError::Usage(format!("manifest is missing `{key}`")))
        };
        Ok(Self {
            version: meta("version")?,
            timestamp: parse("timestamp", &meta("timestamp")?)?,
            out_dir: PathBuf::from(meta("out")?),
            config: apply_all(TrainerConfig::default(), &pairs)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use pporpe::surrogate::SurrogateConfig;

    #[test]
    fn pairs_skip_comments_and_blanks() {
        let p = parse_pairs("# c\n\n env = cartpole \nbeta=0.3\n").unwrap();
        assert_eq!(p, vec![("env".into(), "cartpole".into()), ("beta".into(), "0.3".into())]);
        assert!(parse_pairs("novalue").is_err());
    }

    #[test]
    fn ablation_is_not_a_cli_method() {
        assert!(parse_method("rpe_fixed").is_ok());
        let err = parse_method("unregularized").unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(parse_method("ppos").unwrap_err().to_string().contains("rpe_adaptive"));
    }

    #[test]
    fn unknown_key_rejected() {
        let mut cfg = TrainerConfig::default();
        assert!(apply(&mut cfg, "learning_rate", "1").is_err());
        assert!(apply(&mut cfg, "alpha", "fast").is_err());
    }

    #[test]
    fn manifest_round_trips() {
        let cfg = TrainerConfig {
            env: "cartpole".into(),
            surrogate: SurrogateConfig {
                epsilon: 0.1 + 0.2,
                ..SurrogateConfig::new(Method::PpoRb)
            },
            learning_rate: 3e-4,
            hidden: vec![17, 5, 3],
            activation: Activation::Tanh,
            threshold_per_sample: true,
            seed: u64::MAX,
            ..Default::default()
        };
        let m = RunManifest::new(cfg, PathBuf::from("runs/x y/1"));
        assert_eq!(RunManifest::parse(&m.to_text()).unwrap(), m);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn float_fields_round_trip(eps in 1e-6f64..1.0, alpha in 1e-9f64..1.0, gamma in 0.0f64..1.0) {
                let mut cfg = TrainerConfig::default();
                cfg.surrogate.epsilon = eps;
                cfg.learning_rate = alpha;
                cfg.gamma = gamma;
                let pairs: Vec<(String, String)> = to_pairs(&cfg)
                    .into_iter()
                    .map(|(k, v)| (k.to_string(), v))
                    .collect();
                prop_assert_eq!(apply_all(TrainerConfig::default(), &pairs).unwrap(), cfg);
            }
        }
    }
}
