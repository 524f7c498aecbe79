use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::backend::Aggregator;
use crate::error::{HotError, Result};
use crate::tensor::Representation;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Arch {
    Ngnn,
    Gnnak,
    Dssgnn,
    Sun,
    I2gnn,
    Drfwl,
    Sswl,
    Ppgn,
    Ngat,
}

impl Arch {
    pub const ALL: [Arch; 9] = [
        Arch::Ngnn,
        Arch::Gnnak,
        Arch::Dssgnn,
        Arch::Sun,
        Arch::I2gnn,
        Arch::Drfwl,
        Arch::Sswl,
        Arch::Ppgn,
        Arch::Ngat,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Arch::Ngnn => "NGNN",
            Arch::Gnnak => "GNNAK",
            Arch::Dssgnn => "DSSGNN",
            Arch::Sun => "SUN",
            Arch::I2gnn => "I2GNN",
            Arch::Drfwl => "DRFWL",
            Arch::Sswl => "SSWL",
            Arch::Ppgn => "PPGN",
            Arch::Ngat => "NGAT",
        }
    }

    /// Representation the architecture is defined on.
    pub fn native_representation(self) -> Representation {
        match self {
            Arch::Sswl | Arch::Ppgn => Representation::Dense,
            _ => Representation::Sparse,
        }
    }

    pub fn tuple_order(self) -> usize {
        if self == Arch::I2gnn {
            3
        } else {
            2
        }
    }
}

impl fmt::Display for Arch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Arch {
    type Err = HotError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        Arch::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| HotError::Config(format!("unknown architecture `{s}`")))
    }
}

/// Statistics used by the normalization step inside each MLP.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormMode {
    /// Over all existing tuples of the batch.
    Batch,
    /// Over the existing tuples of each graph separately.
    PerGraph,
    Off,
}

impl fmt::Display for NormMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NormMode::Batch => "batch",
            NormMode::PerGraph => "per-graph",
            NormMode::Off => "off",
        })
    }
}

impl FromStr for NormMode {
    type Err = HotError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "batch" => Ok(NormMode::Batch),
            "per-graph" | "per_graph" | "graph" => Ok(NormMode::PerGraph),
            "off" | "none" => Ok(NormMode::Off),
            other => Err(HotError::Config(format!("unknown norm mode `{other}`"))),
        }
    }
}

pub fn parse_representation(s: &str) -> Result<Representation> {
    match s.trim() {
        "sparse" => Ok(Representation::Sparse),
        "dense" => Ok(Representation::Dense),
        other => Err(HotError::Config(format!("unknown representation `{other}`"))),
    }
}

pub fn representation_name(r: Representation) -> &'static str {
    match r {
        Representation::Sparse => "sparse",
        Representation::Dense => "dense",
    }
}

/// Model hyperparameters, stored as `key = value` lines.
///
/// Required keys: `arch`, `layers`, `hidden`, `aggregator`, `representation`,
/// `seed`. Optional: `norm` (default `batch`) and `cross_representation`
/// (default `false`), which allows running an architecture on the other
/// representation.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub arch: Arch,
    pub num_layers: usize,
    pub hidden: usize,
    pub aggregator: Aggregator,
    pub representation: Representation,
    pub seed: u64,
    pub norm: NormMode,
    pub cross_representation: bool,
}

impl ModelConfig {
    /// Two layers of width 16, sum aggregation, native representation.
    pub fn new(arch: Arch) -> Self {
        let aggregator = if arch == Arch::Ngat { Aggregator::SoftmaxWeighted } else { Aggregator::Sum };
        Self {
            arch,
            num_layers: 2,
            hidden: 16,
            aggregator,
            representation: arch.native_representation(),
            seed: 0,
            norm: NormMode::Batch,
            cross_representation: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_layers == 0 || self.hidden == 0 {
            return Err(HotError::Config("layers and hidden must be positive".into()));
        }
        if self.representation != self.arch.native_representation() && !self.cross_representation {
            return Err(HotError::Config(format!(
                "{} is defined on the {} representation; set cross_representation = true to override",
                self.arch,
                representation_name(self.arch.native_representation())
            )));
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        std::fs::read_to_string(path)?.parse()
    }
}

impl FromStr for ModelConfig {
    type Err = HotError;

    fn from_str(text: &str) -> Result<Self> {
        let mut arch = None;
        let mut layers = None;
        let mut hidden = None;
        let mut aggregator = None;
        let mut representation = None;
        let mut seed = None;
        let mut norm = NormMode::Batch;
        let mut cross = false;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| HotError::Parse { line: i + 1, msg: "expected key = value".into() })?;
            let value = value.trim();
            let num = |v: &str| v.parse::<u64>().map_err(|e| HotError::Parse { line: i + 1, msg: e.to_string() });
            match key.trim() {
                "arch" => arch = Some(value.parse()?),
                "layers" => layers = Some(num(value)? as usize),
                "hidden" => hidden = Some(num(value)? as usize),
                "aggregator" => aggregator = Some(value.parse()?),
                "representation" => representation = Some(parse_representation(value)?),
                "seed" => seed = Some(num(value)?),
                "norm" => norm = value.parse()?,
                "cross_representation" => {
                    cross = value
                        .parse()
                        .map_err(|_| HotError::Parse { line: i + 1, msg: format!("`{value}` is not true/false") })?
                }
                other => return Err(HotError::Config(format!("unknown config key `{other}`"))),
            }
        }
        let missing = |k: &str| HotError::Config(format!("missing config key `{k}`"));
        let cfg = ModelConfig {
            arch: arch.ok_or_else(|| missing("arch"))?,
            num_layers: layers.ok_or_else(|| missing("layers"))?,
            hidden: hidden.ok_or_else(|| missing("hidden"))?,
            aggregator: aggregator.ok_or_else(|| missing("aggregator"))?,
            representation: representation.ok_or_else(|| missing("representation"))?,
            seed: seed.ok_or_else(|| missing("seed"))?,
            norm,
            cross_representation: cross,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl fmt::Display for ModelConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "arch = {}", self.arch)?;
        writeln!(f, "layers = {}", self.num_layers)?;
        writeln!(f, "hidden = {}", self.hidden)?;
        writeln!(f, "aggregator = {}", self.aggregator)?;
        writeln!(f, "representation = {}", representation_name(self.representation))?;
        writeln!(f, "seed = {}", self.seed)?;
        writeln!(f, "norm = {}", self.norm)?;
        writeln!(f, "cross_representation = {}", self.cross_representation)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        for arch in Arch::ALL {
            let mut cfg = ModelConfig::new(arch);
            cfg.seed = 77;
            cfg.norm = NormMode::PerGraph;
            assert_eq!(cfg.to_string().parse::<ModelConfig>().unwrap(), cfg);
        }
    }

    #[test]
    fn minimal_text() {
        let text = "arch = ngnn\nlayers = 3 # three\nhidden=8\naggregator = mean\nrepresentation = sparse\nseed = 5\n";
        let cfg: ModelConfig = text.parse().unwrap();
        assert_eq!(cfg.arch, Arch::Ngnn);
        assert_eq!((cfg.num_layers, cfg.hidden, cfg.seed), (3, 8, 5));
        assert_eq!(cfg.norm, NormMode::Batch);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!("arch = NGNN".parse::<ModelConfig>().is_err());
        let base = "arch = SSWL\nlayers = 1\nhidden = 4\naggregator = sum\nseed = 0\n";
        assert!(format!("{base}representation = sparse\n").parse::<ModelConfig>().is_err());
        let ok = format!("{base}representation = sparse\ncross_representation = true\n");
        assert!(ok.parse::<ModelConfig>().is_ok());
        assert!(format!("{base}representation = dense\ncolour = red\n").parse::<ModelConfig>().is_err());
        assert!(format!("{base}representation = dense\nlayers = x\n").parse::<ModelConfig>().is_err());
    }
}
