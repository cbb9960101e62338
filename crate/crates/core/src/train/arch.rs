//! The four reference architectures and their textual form.

use std::fmt;
use std::str::FromStr;

use super::config::KeyValues;
use crate::error::{Error, Result};
use crate::qfilter::{Ansatz, AnsatzKind, Encoding};

/// Where the 3D stack places its 2× max pools.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum PoolPlan {
    /// After each of the first three convolution stages.
    All,
    /// After the third stage only.
    Last,
    /// `All` when the input is large enough for it, otherwise `Last`.
    #[default]
    Auto,
}

impl FromStr for PoolPlan {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(PoolPlan::All),
            "last" => Ok(PoolPlan::Last),
            "auto" => Ok(PoolPlan::Auto),
            other => Err(Error::usage(format!("unknown pool plan {other:?} (all, last, auto)"))),
        }
    }
}

impl fmt::Display for PoolPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PoolPlan::All => "all",
            PoolPlan::Last => "last",
            PoolPlan::Auto => "auto",
        })
    }
}

/// Knobs of the 3D stack that the input resolution may force.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Stack3d {
    pub pools: PoolPlan,
    /// Stride of the fourth (classical or quantum) convolution.
    pub fourth_stride: usize,
}

impl Default for Stack3d {
    fn default() -> Self {
        Self {
            pools: PoolPlan::Auto,
            fourth_stride: 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Architecture {
    /// conv(2×2, stride 2, 4 filters) → flatten → linear.
    Classical2d,
    /// Quantum conv (2×2, stride 2, 4 qubits) → flatten → linear.
    Qccnn2d { encoding: Encoding<f64>, ansatz: Ansatz },
    /// Three conv/BN/ReLU/pool/dropout stages, a grouped 64-filter conv, BN,
    /// dropout, linear.
    Classical3d { stack: Stack3d },
    /// As `Classical3d` with the fourth conv replaced by an angle-encoded,
    /// strongly entangling quantum conv of `layers` layers.
    Qccnn3d { layers: usize, stack: Stack3d },
}

pub const ARCH_NAMES: &[&str] = &["classical2d", "qccnn2d", "classical3d", "qccnn3d"];

/// Keys an architecture description may use.
pub const ARCH_KEYS: &[&str] = &[
    "arch",
    "encoding",
    "threshold_t",
    "ansatz",
    "layers",
    "pool3d",
    "fourth_stride",
];

pub fn parse_encoding(name: &str, threshold: f64) -> Result<Encoding<f64>> {
    match name {
        "threshold" => Ok(Encoding::Threshold(threshold)),
        "angle" => Ok(Encoding::Angle),
        "higher-order" | "higher_order" => Ok(Encoding::HigherOrder),
        other => Err(Error::usage(format!(
            "unknown encoding {other:?} (threshold, angle, higher-order)"
        ))),
    }
}

pub fn encoding_name(e: &Encoding<f64>) -> &'static str {
    match e {
        Encoding::Threshold(_) => "threshold",
        Encoding::Angle => "angle",
        Encoding::HigherOrder => "higher-order",
    }
}

pub fn parse_ansatz_kind(name: &str) -> Result<AnsatzKind> {
    match name {
        "basic" => Ok(AnsatzKind::BasicEntangling),
        "strong" => Ok(AnsatzKind::StronglyEntangling),
        other => Err(Error::usage(format!("unknown ansatz {other:?} (basic, strong)"))),
    }
}

impl Architecture {
    pub fn name(&self) -> &'static str {
        match self {
            Architecture::Classical2d => "classical2d",
            Architecture::Qccnn2d { .. } => "qccnn2d",
            Architecture::Classical3d { .. } => "classical3d",
            Architecture::Qccnn3d { .. } => "qccnn3d",
        }
    }

    pub fn spatial_dims(&self) -> usize {
        match self {
            Architecture::Classical2d | Architecture::Qccnn2d { .. } => 2,
            _ => 3,
        }
    }

    pub fn is_quantum(&self) -> bool {
        matches!(self, Architecture::Qccnn2d { .. } | Architecture::Qccnn3d { .. })
    }

    /// Reads the keys in [`ARCH_KEYS`]; missing ones take their defaults
    /// (higher-order encoding, basic ansatz, one layer, t = 0, auto pools,
    /// fourth stride 1).
    pub fn from_config(kv: &KeyValues) -> Result<Self> {
        let name = kv
            .get("arch")
            .ok_or_else(|| Error::usage("missing architecture (arch)"))?;
        let layers = kv.parsed::<usize>("layers")?.unwrap_or(1);
        if layers == 0 {
            return Err(Error::usage("layers must be at least 1"));
        }
        let stack = Stack3d {
            pools: kv.parsed("pool3d")?.unwrap_or_default(),
            fourth_stride: kv.parsed::<usize>("fourth_stride")?.unwrap_or(1),
        };
        if stack.fourth_stride == 0 {
            return Err(Error::usage("fourth_stride must be at least 1"));
        }
        match name {
            "classical2d" => Ok(Architecture::Classical2d),
            "qccnn2d" => {
                let t = kv.parsed::<f64>("threshold_t")?.unwrap_or(0.0);
                let encoding = parse_encoding(kv.get("encoding").unwrap_or("higher-order"), t)?;
                let kind = parse_ansatz_kind(kv.get("ansatz").unwrap_or("basic"))?;
                Ok(Architecture::Qccnn2d {
                    encoding,
                    ansatz: Ansatz::new(kind, layers)?,
                })
            }
            "classical3d" => Ok(Architecture::Classical3d { stack }),
            "qccnn3d" => {
                // The 3D quantum layer is pinned to angle encoding and the
                // strongly entangling ansatz.
                if let Some(e) = kv.get("encoding") {
                    if e != "angle" {
                        return Err(Error::usage("qccnn3d uses angle encoding"));
                    }
                }
                if let Some(a) = kv.get("ansatz") {
                    if a != "strong" {
                        return Err(Error::usage("qccnn3d uses the strong ansatz"));
                    }
                }
                Ok(Architecture::Qccnn3d { layers, stack })
            }
            other => Err(Error::usage(format!(
                "unknown architecture {other:?} ({})",
                ARCH_NAMES.join(", ")
            ))),
        }
    }

    pub fn to_config(&self) -> KeyValues {
        let mut kv = KeyValues::new();
        kv.set("arch", self.name());
        match self {
            Architecture::Classical2d => {}
            Architecture::Qccnn2d { encoding, ansatz } => {
                kv.set("encoding", encoding_name(encoding));
                if let Encoding::Threshold(t) = encoding {
                    kv.set("threshold_t", t);
                }
                kv.set("ansatz", ansatz.kind);
                kv.set("layers", ansatz.layers);
            }
            Architecture::Classical3d { stack } => {
                kv.set("pool3d", stack.pools);
                kv.set("fourth_stride", stack.fourth_stride);
            }
            Architecture::Qccnn3d { layers, stack } => {
                kv.set("encoding", "angle");
                kv.set("ansatz", "strong");
                kv.set("layers", layers);
                kv.set("pool3d", stack.pools);
                kv.set("fourth_stride", stack.fourth_stride);
            }
        }
        kv
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Architecture::Classical2d => f.write_str("classical2d"),
            Architecture::Qccnn2d { encoding, ansatz } => {
                write!(f, "qccnn2d({encoding}, {}×{})", ansatz.kind, ansatz.layers)
            }
            Architecture::Classical3d { stack } => write!(f, "classical3d(pools={})", stack.pools),
            Architecture::Qccnn3d { layers, stack } => {
                write!(f, "qccnn3d(strong×{layers}, pools={})", stack.pools)
            }
        }
    }
}
