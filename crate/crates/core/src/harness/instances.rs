use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{BaiError, Result};
use crate::family::{BanditInstance, RewardFamily};

/// How a trial's arm means are produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum InstanceSpec {
    /// Ten Bernoulli arms: `mu_1 = 0.5`, the rest uniform on [0.2, 0.4].
    Uniform10,
    /// Ten Bernoulli arms: `mu_1 = 0.6`, the rest drawn from N(0.2, 0.2^2) and clipped to [0, 0.4].
    Normal10,
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedInstance {
    pub instance: BanditInstance,
    /// Set when an explicit mean list has no unique maximum; oracle consumers will fail on it.
    pub tied_maximum: bool,
}

impl InstanceSpec {
    /// Reward family the spec implies; named specs are always Bernoulli.
    pub fn default_family(&self) -> RewardFamily {
        RewardFamily::Bernoulli
    }

    /// Whether every call yields the same instance.
    pub fn is_fixed(&self) -> bool {
        matches!(self, InstanceSpec::Explicit(_))
    }
}

/// Draws an instance. `family` only applies to explicit mean lists.
pub fn make_instance<R: Rng + ?Sized>(
    spec: &InstanceSpec,
    family: RewardFamily,
    rng: &mut R,
) -> Result<GeneratedInstance> {
    let (family, means) = match spec {
        InstanceSpec::Uniform10 => {
            let mut means = vec![0.5];
            means.extend((0..9).map(|_| rng.gen_range(0.2..=0.4)));
            (RewardFamily::Bernoulli, means)
        }
        InstanceSpec::Normal10 => {
            let normal = Normal::new(0.2_f64, 0.2).expect("valid normal parameters");
            let mut means = vec![0.6];
            means.extend((0..9).map(|_| normal.sample(rng).clamp(0.0, 0.4)));
            (RewardFamily::Bernoulli, means)
        }
        InstanceSpec::Explicit(means) => (family, means.clone()),
    };
    let instance = BanditInstance::new(family, means)?;
    let tied_maximum = instance.unique_best().is_none();
    Ok(GeneratedInstance {
        instance,
        tied_maximum,
    })
}

impl fmt::Display for InstanceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InstanceSpec::Uniform10 => f.write_str("uniform10"),
            InstanceSpec::Normal10 => f.write_str("normal10"),
            InstanceSpec::Explicit(means) => {
                let list: Vec<String> = means.iter().map(|m| m.to_string()).collect();
                write!(f, "means={}", list.join(";"))
            }
        }
    }
}

impl FromStr for InstanceSpec {
    type Err = BaiError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "uniform10" | "uniform" => Ok(InstanceSpec::Uniform10),
            "normal10" | "normal" => Ok(InstanceSpec::Normal10),
            other => {
                let list = other.strip_prefix("means=").unwrap_or(other);
                let means = list
                    .split([',', ';'])
                    .map(|m| {
                        m.trim()
                            .parse::<f64>()
                            .map_err(|_| BaiError::Config(format!("bad mean `{m}` in `{s}`")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(InstanceSpec::Explicit(means))
            }
        }
    }
}

impl TryFrom<String> for InstanceSpec {
    type Error = BaiError;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<InstanceSpec> for String {
    fn from(spec: InstanceSpec) -> String {
        spec.to_string()
    }
}
