//! Plain-text run manifests.
//!
//! One `key = value` per line, `#` starts a comment:
//!
//! ```text
//! input.DJIA = data/djia.csv
//! input.SNP = data/snp.csv
//! basket = DJIA, SNP
//! measures = mse, mmse, catastrophe
//! targets = DJIA
//! output_dir = out
//! format = both
//! crisis.COVID = 2020-01-01, 2021-12-31
//! entropy.r = 0.15
//! ```
//!
//! Relative paths resolve against the manifest's directory. `targets`
//! defaults to every input. Crisis periods give inclusive first and last
//! days; declaring any replaces the default registry.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::{Days, NaiveDate};

use crate::config::{is_key, Settings};
use crate::error::{Result, StressError};
use crate::series::{CrisisRegistry, MarketPeriod};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Task {
    Mse,
    Mmse,
    Det,
    Alis,
    Catastrophe,
}

impl Task {
    pub const ALL: [Task; 5] = [Task::Mse, Task::Mmse, Task::Det, Task::Alis, Task::Catastrophe];

    pub fn as_str(self) -> &'static str {
        match self {
            Task::Mse => "mse",
            Task::Mmse => "mmse",
            Task::Det => "det",
            Task::Alis => "alis",
            Task::Catastrophe => "catastrophe",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = StressError;

    fn from_str(s: &str) -> Result<Self> {
        Task::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| StressError::InvalidParameter(format!("unknown measure {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    Csv,
    Svg,
    #[default]
    Both,
}

impl OutputFormat {
    pub fn csv(self) -> bool {
        self != OutputFormat::Svg
    }

    pub fn svg(self) -> bool {
        self != OutputFormat::Csv
    }
}

impl fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Svg => "svg",
            OutputFormat::Both => "both",
        })
    }
}

impl FromStr for OutputFormat {
    type Err = StressError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "svg" => Ok(OutputFormat::Svg),
            "both" => Ok(OutputFormat::Both),
            _ => Err(StressError::InvalidParameter(format!(
                "format must be csv, svg or both, got {s:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Input {
    pub id: String,
    /// As written in the manifest.
    pub declared: String,
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub inputs: Vec<Input>,
    pub basket: Vec<String>,
    pub targets: Vec<String>,
    pub measures: BTreeSet<Task>,
    pub output_dir: PathBuf,
    pub format: OutputFormat,
    pub registry: CrisisRegistry,
    /// Configuration keys (including `seed`) set by the manifest.
    pub config: BTreeMap<String, String>,
}

fn list(value: &str) -> Vec<String> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(String::from)
        .collect()
}

fn date(s: &str) -> Option<NaiveDate> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d").ok()
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| StressError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    /// Parses and validates a manifest; every problem found is reported.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut problems = Vec::new();
        let mut seen = BTreeSet::new();
        let mut inputs = Vec::new();
        let mut basket = Vec::new();
        let mut targets = None;
        let mut measures = BTreeSet::new();
        let mut output_dir = None;
        let mut format = OutputFormat::default();
        let mut periods = Vec::new();
        let mut config = BTreeMap::new();

        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let lineno = n + 1;
            let Some((key, value)) = line.split_once('=') else {
                problems.push(format!("line {lineno}: expected key = value"));
                continue;
            };
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                problems.push(format!("line {lineno}: {key} declared twice"));
                continue;
            }
            if let Some(id) = key.strip_prefix("input.") {
                if id.is_empty() || value.is_empty() {
                    problems.push(format!("line {lineno}: input needs an id and a path"));
                } else {
                    inputs.push(Input {
                        id: id.to_string(),
                        declared: value.to_string(),
                        path: base.join(value),
                    });
                }
            } else if let Some(label) = key.strip_prefix("crisis.") {
                let bounds: Vec<Option<NaiveDate>> = value.split(',').map(date).collect();
                match bounds.as_slice() {
                    [Some(start), Some(last)] if start <= last && !label.is_empty() => {
                        periods.push(MarketPeriod {
                            label: label.to_string(),
                            start: *start,
                            end: *last + Days::new(1),
                        })
                    }
                    _ => problems.push(format!(
                        "line {lineno}: {key} needs first and last dates, YYYY-MM-DD, in order"
                    )),
                }
            } else {
                match key {
                    "basket" => basket = list(value),
                    "targets" => targets = Some(list(value)),
                    "measures" => {
                        for m in list(value) {
                            match m.parse::<Task>() {
                                Ok(t) => {
                                    measures.insert(t);
                                }
                                Err(e) => problems.push(format!("line {lineno}: {e}")),
                            }
                        }
                    }
                    "output_dir" => output_dir = Some(base.join(value)),
                    "format" => match value.parse() {
                        Ok(f) => format = f,
                        Err(e) => problems.push(format!("line {lineno}: {e}")),
                    },
                    k if is_key(k) => {
                        config.insert(k.to_string(), value.to_string());
                    }
                    k => problems.push(format!("line {lineno}: unknown key {k}")),
                }
            }
        }

        let ids: BTreeSet<&str> = inputs.iter().map(|i| i.id.as_str()).collect();
        let targets = targets.unwrap_or_else(|| inputs.iter().map(|i| i.id.clone()).collect());
        if inputs.is_empty() {
            problems.push("no input.* declared".into());
        }
        if measures.is_empty() {
            problems.push("measures is empty".into());
        }
        if output_dir.is_none() {
            problems.push("output_dir is missing".into());
        }
        for id in basket.iter().filter(|b| !ids.contains(b.as_str())) {
            problems.push(format!("basket member {id} is not an input"));
        }
        for id in targets.iter().filter(|t| !ids.contains(t.as_str())) {
            problems.push(format!("target {id} is not an input"));
        }
        let needs_basket = measures.contains(&Task::Mmse) || measures.contains(&Task::Catastrophe);
        if needs_basket && basket.len() < 2 {
            problems.push("mmse and catastrophe need a basket of at least 2 inputs".into());
        }
        if measures.contains(&Task::Catastrophe) && targets.is_empty() {
            problems.push("catastrophe needs at least one target".into());
        }
        let registry = if periods.is_empty() {
            Some(CrisisRegistry::crisis_segments())
        } else {
            CrisisRegistry::new(periods)
                .map_err(|e| problems.push(e.to_string()))
                .ok()
        };
        if let Err(StressError::InvalidConfig(mut p)) = Settings::resolve(&config, &BTreeMap::new()) {
            problems.append(&mut p);
        }

        if !problems.is_empty() {
            return Err(StressError::InvalidConfig(problems));
        }
        Ok(Self {
            inputs,
            basket,
            targets,
            measures,
            output_dir: output_dir.expect("checked above"),
            format,
            registry: registry.expect("checked above"),
            config,
        })
    }

    pub fn input(&self, id: &str) -> Option<&Input> {
        self.inputs.iter().find(|i| i.id == id)
    }
}
