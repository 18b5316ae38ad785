//! Flat sectioned key-value run configuration.
//!
//! The format is line-oriented: `[section]` headers, `key = value` pairs,
//! `#` comments. Unknown sections or keys are errors so that typos in sweep
//! grids surface immediately. The full schema is documented in
//! `docs/config.md`.

use std::collections::BTreeMap;
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("unknown section `[{0}]`")]
    UnknownSection(String),
    #[error("unknown key `{section}.{key}`")]
    UnknownKey { section: String, key: String },
    #[error("missing key `{section}.{key}`")]
    MissingKey { section: String, key: String },
    #[error("key `{section}.{key}`: {reason}")]
    BadValue {
        section: String,
        key: String,
        reason: String,
    },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub enum OracleKind {
    Quadratic,
    LogisticSynthetic,
    LogisticLibsvm,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Topology {
    Geometric,
    RingStar,
    CyclicGeometric,
    Complete,
    File,
}

#[derive(Debug, Clone, PartialEq)]
pub enum AlgorithmKind {
    Adom,
    Pngd,
    Dgd,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InnerKind {
    Exact,
    Gd,
    Agd,
}

#[derive(Debug, Clone)]
pub struct OracleSection {
    pub kind: OracleKind,
    pub n: usize,
    pub d: usize,
    pub m: usize,
    pub target_kappa: f64,
    pub mu: f64,
    pub r: Option<f64>,
    pub dataset: Option<PathBuf>,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct NetworkSection {
    pub topology: Topology,
    pub radius: f64,
    pub target_chi: Option<f64>,
    pub switch_period: usize,
    pub num_graphs: usize,
    pub file: Option<PathBuf>,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct AlgorithmSection {
    pub kind: AlgorithmKind,
    pub inner: InnerKind,
    /// Inner iterations for inexact oracles; 0 picks a per-solver default.
    pub t_inner: usize,
    pub dgd_step: f64,
    pub alpha: Option<f64>,
    pub eta: Option<f64>,
    pub theta: Option<f64>,
    pub sigma: Option<f64>,
    pub tau: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RunSection {
    pub iterations: usize,
    pub diagnostics: crate::algorithms::DiagnosticsMode,
    pub eps: f64,
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Default)]
pub struct GridSection {
    pub kappa: Vec<f64>,
    pub chi: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub name: String,
    pub oracle: OracleSection,
    pub network: NetworkSection,
    pub algorithm: AlgorithmSection,
    pub run: RunSection,
    pub grid: Option<GridSection>,
}

type Raw = BTreeMap<String, BTreeMap<String, (String, usize)>>;

fn parse_raw(text: &str) -> Result<Raw, ConfigError> {
    let mut raw: Raw = BTreeMap::new();
    let mut section: Option<String> = None;
    for (idx, line_raw) in text.lines().enumerate() {
        let line = line_raw.trim();
        let lineno = idx + 1;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            section = Some(name.trim().to_string());
            raw.entry(name.trim().to_string()).or_default();
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError::Parse {
                line: lineno,
                reason: format!("expected `key = value`, got `{line}`"),
            });
        };
        let Some(section) = &section else {
            return Err(ConfigError::Parse {
                line: lineno,
                reason: "key before any [section] header".into(),
            });
        };
        let prev = raw
            .get_mut(section)
            .unwrap()
            .insert(key.trim().to_string(), (value.trim().to_string(), lineno));
        if prev.is_some() {
            return Err(ConfigError::Parse {
                line: lineno,
                reason: format!("duplicate key `{}`", key.trim()),
            });
        }
    }
    Ok(raw)
}

struct Section<'a> {
    name: &'a str,
    entries: BTreeMap<String, (String, usize)>,
}

impl<'a> Section<'a> {
    fn take(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key).map(|(v, _)| v)
    }

    fn required(&mut self, key: &str) -> Result<String, ConfigError> {
        self.take(key).ok_or_else(|| ConfigError::MissingKey {
            section: self.name.to_string(),
            key: key.to_string(),
        })
    }

    fn parse<T: std::str::FromStr>(&mut self, key: &str, default: T) -> Result<T, ConfigError> {
        match self.take(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| self.bad(key, &v)),
        }
    }

    fn parse_opt<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<T>, ConfigError> {
        match self.take(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|_| self.bad(key, &v)),
        }
    }

    fn parse_required<T: std::str::FromStr>(&mut self, key: &str) -> Result<T, ConfigError> {
        let v = self.required(key)?;
        v.parse().map_err(|_| self.bad(key, &v))
    }

    fn bad(&self, key: &str, value: &str) -> ConfigError {
        ConfigError::BadValue {
            section: self.name.to_string(),
            key: key.to_string(),
            reason: format!("cannot parse `{value}`"),
        }
    }

    fn finish(self) -> Result<(), ConfigError> {
        if let Some(key) = self.entries.keys().next() {
            return Err(ConfigError::UnknownKey {
                section: self.name.to_string(),
                key: key.clone(),
            });
        }
        Ok(())
    }
}

fn float_list(sec: &mut Section, key: &str) -> Result<Vec<f64>, ConfigError> {
    match sec.take(key) {
        None => Ok(Vec::new()),
        Some(v) => v
            .split(',')
            .map(|tok| tok.trim().parse::<f64>().map_err(|_| sec.bad(key, &v)))
            .collect(),
    }
}

impl RunConfig {
    pub fn from_path(path: &std::path::Path) -> Result<Self, ConfigError> {
        Self::from_str(&std::fs::read_to_string(path)?)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn from_str(text: &str) -> Result<Self, ConfigError> {
        let mut raw = parse_raw(text)?;
        fn section(raw: &mut Raw, name: &'static str) -> Section<'static> {
            Section {
                name,
                entries: raw.remove(name).unwrap_or_default(),
            }
        }

        let mut exp = section(&mut raw, "experiment");
        let name = exp.take("name").unwrap_or_else(|| "unnamed".into());
        exp.finish()?;

        let mut o = section(&mut raw, "oracle");
        let kind = match o.required("kind")?.as_str() {
            "quadratic" => OracleKind::Quadratic,
            "logistic-synthetic" => OracleKind::LogisticSynthetic,
            "logistic-libsvm" => OracleKind::LogisticLibsvm,
            other => {
                return Err(ConfigError::BadValue {
                    section: "oracle".into(),
                    key: "kind".into(),
                    reason: format!("unknown oracle kind `{other}`"),
                })
            }
        };
        let oracle = OracleSection {
            n: o.parse_required("n")?,
            d: o.parse_required("d")?,
            m: o.parse("m", 10)?,
            target_kappa: o.parse("target_kappa", 10.0)?,
            mu: o.parse("mu", 1.0)?,
            r: o.parse_opt("r")?,
            dataset: o.take("dataset").map(PathBuf::from),
            seed: o.parse("seed", 0)?,
            kind,
        };
        o.finish()?;

        let mut net = section(&mut raw, "network");
        let topology = match net.required("topology")?.as_str() {
            "geometric" => Topology::Geometric,
            "ring-star" => Topology::RingStar,
            "cyclic-geometric" => Topology::CyclicGeometric,
            "complete" => Topology::Complete,
            "file" => Topology::File,
            other => {
                return Err(ConfigError::BadValue {
                    section: "network".into(),
                    key: "topology".into(),
                    reason: format!("unknown topology `{other}`"),
                })
            }
        };
        let network = NetworkSection {
            radius: net.parse("radius", 0.3)?,
            target_chi: net.parse_opt("target_chi")?,
            switch_period: net.parse("switch_period", 1)?,
            num_graphs: net.parse("num_graphs", 10)?,
            file: net.take("file").map(PathBuf::from),
            seed: net.parse("seed", 0)?,
            topology,
        };
        net.finish()?;

        let mut alg = section(&mut raw, "algorithm");
        let kind = match alg.parse("kind", "adom".to_string())?.as_str() {
            "adom" => AlgorithmKind::Adom,
            "pngd" => AlgorithmKind::Pngd,
            "dgd" => AlgorithmKind::Dgd,
            other => {
                return Err(ConfigError::BadValue {
                    section: "algorithm".into(),
                    key: "kind".into(),
                    reason: format!("unknown algorithm `{other}`"),
                })
            }
        };
        let inner = match alg.parse("inner", "exact".to_string())?.as_str() {
            "exact" => InnerKind::Exact,
            "gd" => InnerKind::Gd,
            "agd" => InnerKind::Agd,
            other => {
                return Err(ConfigError::BadValue {
                    section: "algorithm".into(),
                    key: "inner".into(),
                    reason: format!("unknown inner solver `{other}`"),
                })
            }
        };
        let algorithm = AlgorithmSection {
            t_inner: alg.parse("t_inner", 0)?,
            dgd_step: alg.parse("dgd_step", 0.0)?,
            alpha: alg.parse_opt("alpha")?,
            eta: alg.parse_opt("eta")?,
            theta: alg.parse_opt("theta")?,
            sigma: alg.parse_opt("sigma")?,
            tau: alg.parse_opt("tau")?,
            kind,
            inner,
        };
        alg.finish()?;

        let mut runsec = section(&mut raw, "run");
        let diagnostics = match runsec.parse("diagnostics", "off".to_string())?.as_str() {
            "off" => crate::algorithms::DiagnosticsMode::Off,
            "observe" => crate::algorithms::DiagnosticsMode::Observe,
            "enforce" => crate::algorithms::DiagnosticsMode::Enforce,
            other => {
                return Err(ConfigError::BadValue {
                    section: "run".into(),
                    key: "diagnostics".into(),
                    reason: format!("unknown diagnostics mode `{other}`"),
                })
            }
        };
        let run = RunSection {
            iterations: runsec.parse_required("iterations")?,
            eps: runsec.parse("eps", 1e-6)?,
            output: runsec.take("output").map(PathBuf::from),
            diagnostics,
        };
        runsec.finish()?;

        let grid = if raw.contains_key("grid") {
            let mut g = section(&mut raw, "grid");
            let grid = GridSection {
                kappa: float_list(&mut g, "kappa")?,
                chi: float_list(&mut g, "chi")?,
            };
            g.finish()?;
            Some(grid)
        } else {
            None
        };

        if let Some(sec) = raw.keys().next() {
            return Err(ConfigError::UnknownSection(sec.clone()));
        }

        let cfg = RunConfig {
            name,
            oracle,
            network,
            algorithm,
            run,
            grid,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let bad = |section: &str, key: &str, reason: String| ConfigError::BadValue {
            section: section.into(),
            key: key.into(),
            reason,
        };
        if self.oracle.n < 1 || self.oracle.d < 1 {
            return Err(bad("oracle", "n", "n and d must be >= 1".into()));
        }
        if self.oracle.kind == OracleKind::LogisticLibsvm && self.oracle.dataset.is_none() {
            return Err(ConfigError::MissingKey {
                section: "oracle".into(),
                key: "dataset".into(),
            });
        }
        if let Some(path) = &self.oracle.dataset {
            if !path.exists() {
                return Err(bad(
                    "oracle",
                    "dataset",
                    format!("file not found: {}", path.display()),
                ));
            }
        }
        if self.network.topology == Topology::File {
            match &self.network.file {
                None => {
                    return Err(ConfigError::MissingKey {
                        section: "network".into(),
                        key: "file".into(),
                    })
                }
                Some(path) if !path.exists() => {
                    return Err(bad(
                        "network",
                        "file",
                        format!("file not found: {}", path.display()),
                    ))
                }
                _ => {}
            }
        }
        if self.network.switch_period < 1 {
            return Err(bad("network", "switch_period", "must be >= 1".into()));
        }
        if self.algorithm.kind == AlgorithmKind::Dgd && self.algorithm.dgd_step < 0.0 {
            return Err(bad("algorithm", "dgd_step", "must be >= 0".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "\
[experiment]
name = smoke
[oracle]
kind = quadratic
n = 4
d = 2
target_kappa = 100
[network]
topology = complete
[algorithm]
kind = adom
[run]
iterations = 10
";

    #[test]
    fn parses_minimal() {
        let cfg = RunConfig::from_str(MINIMAL).unwrap();
        assert_eq!(cfg.name, "smoke");
        assert_eq!(cfg.oracle.kind, OracleKind::Quadratic);
        assert_eq!(cfg.oracle.n, 4);
        assert_eq!(cfg.run.iterations, 10);
        assert!(cfg.grid.is_none());
    }

    #[test]
    fn rejects_unknown_key() {
        let text = format!("{MINIMAL}typo_key = 3\n");
        match RunConfig::from_str(&text).unwrap_err() {
            ConfigError::UnknownKey { section, key } => {
                assert_eq!(section, "run");
                assert_eq!(key, "typo_key");
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn rejects_unknown_section() {
        let text = format!("{MINIMAL}[plotting]\nstyle = fancy\n");
        assert!(matches!(
            RunConfig::from_str(&text),
            Err(ConfigError::UnknownSection(s)) if s == "plotting"
        ));
    }

    #[test]
    fn missing_dataset_is_named() {
        let text = MINIMAL.replace("kind = quadratic", "kind = logistic-libsvm");
        match RunConfig::from_str(&text).unwrap_err() {
            ConfigError::MissingKey { key, .. } => assert_eq!(key, "dataset"),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn nonexistent_dataset_is_an_error() {
        let text = MINIMAL.replace(
            "kind = quadratic",
            "kind = logistic-libsvm\ndataset = /nonexistent/a6a",
        );
        match RunConfig::from_str(&text).unwrap_err() {
            ConfigError::BadValue { key, .. } => assert_eq!(key, "dataset"),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn grid_lists() {
        let text = format!("{MINIMAL}[grid]\nkappa = 10, 100\nchi = 8\n");
        let cfg = RunConfig::from_str(&text).unwrap();
        let grid = cfg.grid.unwrap();
        assert_eq!(grid.kappa, vec![10.0, 100.0]);
        assert_eq!(grid.chi, vec![8.0]);
    }
}
