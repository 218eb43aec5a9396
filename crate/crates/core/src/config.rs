//! Resolved run configuration: every tunable under a dotted key, layered
//! flag > manifest > default.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::alis::{AlisConfig, BandSpec};
use crate::embedding::EmbeddingSpec;
use crate::entropy::SampEnConfig;
use crate::error::{Result, StressError};
use crate::rqa::{RqaConfig, Selection, SelectionGrid, PARSIMONY_SE};
use crate::series::{format_value, TradingCalendar};

/// Every configuration key, in metadata order, with a one-line description.
pub const KEYS: &[(&str, &str)] = &[
    ("calendar.year_length", "trading days per year"),
    ("calendar.month_length", "trading days per month"),
    ("entropy.m", "embedding dimension per channel"),
    ("entropy.l", "embedding delay per channel"),
    ("entropy.r", "match tolerance, in standardized units"),
    ("entropy.tau", "moving-average detrending scale"),
    ("entropy.window", "rolling window length (default four years)"),
    ("entropy.increment", "rolling window step"),
    ("rqa.m", "embedding dimension when selection is fixed"),
    ("rqa.l", "embedding delay when selection is fixed"),
    ("rqa.selection", "fixed or auto (differential-entropy grid search)"),
    ("rqa.epsilon_fraction", "recurrence threshold as a fraction of mean distance"),
    ("rqa.jmin", "shortest diagonal counted as a line"),
    ("rqa.tau", "moving-average detrending scale"),
    ("rqa.window", "rolling window length (default four years)"),
    ("rqa.increment", "rolling window step"),
    ("alis.lf_cut", "upper edge of the low band, cycles per day"),
    ("alis.hf_lo", "lower edge of the high band, cycles per day"),
    ("alis.hf_hi", "upper edge of the high band, cycles per day"),
    ("alis.trim", "fraction dropped from each tail of a window"),
    ("alis.detrend_tau", "detrending scale (default one year)"),
    ("alis.window", "trimmed-mean window (default four years)"),
    ("alis.increment", "trimmed-mean step (default one month)"),
    ("catastrophe.smoothing", "centred moving-mean length before pairing"),
    ("seed", "base seed for surrogate ensembles"),
];

pub fn is_key(key: &str) -> bool {
    KEYS.iter().any(|(k, _)| *k == key)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Default,
    Manifest,
    Flag,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Source::Default => "default",
            Source::Manifest => "manifest",
            Source::Flag => "flag",
        })
    }
}

/// A fully resolved, validated configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    values: BTreeMap<&'static str, (String, Source)>,
    pub calendar: TradingCalendar,
    pub entropy: SampEnConfig,
    pub rqa: RqaConfig,
    pub alis: AlisConfig,
    pub smoothing: usize,
    pub seed: u64,
}

fn default_for(key: &str, cal: &TradingCalendar) -> String {
    let bands = BandSpec::default();
    match key {
        "calendar.year_length" => cal.year_length.to_string(),
        "calendar.month_length" => cal.month_length.to_string(),
        "entropy.m" | "rqa.m" | "rqa.jmin" => "2".into(),
        "entropy.l" | "rqa.l" | "entropy.increment" | "rqa.increment" => "1".into(),
        "entropy.r" => "0.15".into(),
        "entropy.tau" | "rqa.tau" => "5".into(),
        "entropy.window" | "rqa.window" | "alis.window" => cal.years(4).to_string(),
        "rqa.selection" => Selection::Fixed.to_string(),
        "rqa.epsilon_fraction" => "0.6".into(),
        "alis.lf_cut" => format_value(bands.lf_high_cut),
        "alis.hf_lo" => format_value(bands.hf_low_cut),
        "alis.hf_hi" => format_value(bands.hf_high_cut),
        "alis.trim" => "0.2".into(),
        "alis.detrend_tau" => cal.year_length.to_string(),
        "alis.increment" => cal.month_length.to_string(),
        "catastrophe.smoothing" => "21".into(),
        "seed" => "0".into(),
        _ => unreachable!("unlisted key {key}"),
    }
}

struct Parser<'a> {
    values: &'a BTreeMap<&'static str, (String, Source)>,
    problems: Vec<String>,
}

impl Parser<'_> {
    fn get<T: FromStr + Default>(&mut self, key: &str) -> T {
        let (raw, source) = &self.values[key];
        match raw.trim().parse() {
            Ok(v) => v,
            Err(_) => {
                self.problems
                    .push(format!("{key} = {raw:?} ({source}) does not parse"));
                T::default()
            }
        }
    }

    fn selection(&mut self) -> Selection {
        let (raw, source) = &self.values["rqa.selection"];
        raw.trim().parse().unwrap_or_else(|_| {
            self.problems
                .push(format!("rqa.selection = {raw:?} ({source}) must be fixed or auto"));
            Selection::Fixed
        })
    }

    fn check(&mut self, r: Result<()>) {
        if let Err(e) = r {
            self.problems.push(e.to_string());
        }
    }
}

impl Settings {
    /// Resolves every key from `flags`, then `manifest`, then the defaults,
    /// and validates the result; all problems are reported together.
    pub fn resolve(
        manifest: &BTreeMap<String, String>,
        flags: &BTreeMap<String, String>,
    ) -> Result<Self> {
        let mut problems: Vec<String> = manifest
            .keys()
            .chain(flags.keys())
            .filter(|k| !is_key(k))
            .map(|k| format!("unknown configuration key {k}"))
            .collect();

        let pick = |key: &str| -> Option<(String, Source)> {
            flags
                .get(key)
                .map(|v| (v.clone(), Source::Flag))
                .or_else(|| manifest.get(key).map(|v| (v.clone(), Source::Manifest)))
        };
        // calendar first: other defaults are expressed in its units
        let mut cal_parser_values = BTreeMap::new();
        for key in ["calendar.year_length", "calendar.month_length"] {
            let d = TradingCalendar::default();
            cal_parser_values.insert(key, pick(key).unwrap_or_else(|| (default_for(key, &d), Source::Default)));
        }
        let mut p = Parser {
            values: &cal_parser_values,
            problems: Vec::new(),
        };
        let year: usize = p.get("calendar.year_length");
        let month: usize = p.get("calendar.month_length");
        problems.append(&mut p.problems);
        let calendar = TradingCalendar::new(year, month).unwrap_or_else(|e| {
            problems.push(e.to_string());
            TradingCalendar::default()
        });

        let values: BTreeMap<&'static str, (String, Source)> = KEYS
            .iter()
            .map(|(k, _)| (*k, pick(k).unwrap_or_else(|| (default_for(k, &calendar), Source::Default))))
            .collect();
        let mut p = Parser {
            values: &values,
            problems: Vec::new(),
        };

        let (m, l): (usize, usize) = (p.get("entropy.m"), p.get("entropy.l"));
        let embedding = EmbeddingSpec::uniform(1, m, l).unwrap_or_else(|e| {
            p.problems.push(format!("entropy: {e}"));
            EmbeddingSpec::uniform(1, 2, 1).expect("valid fallback")
        });
        let entropy = SampEnConfig {
            embedding,
            r: p.get("entropy.r"),
            tau: p.get("entropy.tau"),
            window: p.get("entropy.window"),
            increment: p.get("entropy.increment"),
        };
        let seed: u64 = p.get("seed");
        let rqa = RqaConfig {
            m: p.get("rqa.m"),
            l: p.get("rqa.l"),
            epsilon_fraction: p.get("rqa.epsilon_fraction"),
            j_min: p.get("rqa.jmin"),
            selection: p.selection(),
            grid: SelectionGrid::default(),
            tau: p.get("rqa.tau"),
            window: p.get("rqa.window"),
            increment: p.get("rqa.increment"),
            seed,
        };
        let alis = AlisConfig {
            bands: BandSpec {
                lf_high_cut: p.get("alis.lf_cut"),
                hf_low_cut: p.get("alis.hf_lo"),
                hf_high_cut: p.get("alis.hf_hi"),
            },
            trim: p.get("alis.trim"),
            detrend_tau: p.get("alis.detrend_tau"),
            window: p.get("alis.window"),
            increment: p.get("alis.increment"),
        };
        let smoothing: usize = p.get("catastrophe.smoothing");
        if p.problems.is_empty() {
            p.check(entropy.validate().map_err(|e| prefix("entropy", e)));
            p.check(rqa.validate().map_err(|e| prefix("rqa", e)));
            p.check(alis.validate().map_err(|e| prefix("alis", e)));
            if smoothing == 0 {
                p.problems.push("catastrophe.smoothing must be at least 1".into());
            }
        }
        problems.append(&mut p.problems);
        if !problems.is_empty() {
            return Err(StressError::InvalidConfig(problems));
        }
        Ok(Self {
            values,
            calendar,
            entropy,
            rqa,
            alis,
            smoothing,
            seed,
        })
    }

    pub fn defaults() -> Self {
        Self::resolve(&BTreeMap::new(), &BTreeMap::new()).expect("defaults validate")
    }

    /// The resolved value of `key` as written, and where it came from.
    pub fn get(&self, key: &str) -> Option<(&str, Source)> {
        self.values.get(key).map(|(v, s)| (v.as_str(), *s))
    }

    /// `key=value` lines for every key, followed by the value's source and
    /// the fixed conventions that are not configurable.
    pub fn metadata(&self) -> Vec<(String, String)> {
        let mut out: Vec<(String, String)> = KEYS
            .iter()
            .map(|(k, _)| (k.to_string(), self.values[k].0.trim().to_string()))
            .collect();
        out.extend(
            KEYS.iter()
                .map(|(k, _)| (format!("source.{k}"), self.values[k].1.to_string())),
        );
        let fixed = [
            ("entropy.standardization", "per window, per channel, population deviation".to_string()),
            ("entropy.extension", "per-channel m+1 families, matches counted within each family and pooled, n* = (max m + 1) * max l".into()),
            ("rqa.selection.criterion", format!(
                "nearest-neighbour differential entropy of the embedding over the mean of {} iid N(0,1) surrogates, plus m*ln(Q)/Q; smallest m within {} standard errors of the minimum",
                self.rqa.grid.surrogates, PARSIMONY_SE
            )),
            ("rqa.selection.grid", format!(
                "m {}..{}, l {}..{}",
                self.rqa.grid.dims.first().unwrap_or(&0),
                self.rqa.grid.dims.last().unwrap_or(&0),
                self.rqa.grid.delays.first().unwrap_or(&0),
                self.rqa.grid.delays.last().unwrap_or(&0)
            )),
            ("rqa.selection.window_seed", "splitmix64 of seed and window start".into()),
            ("rqa.threshold", "distance <= epsilon recurs; identity line excluded".into()),
            ("alis.filter", "Kaiser-windowed FIR, 180 dB stop band, one-octave transitions, zero phase".into()),
            ("alis.offset_rule", "subtract_first".into()),
            ("alis.trim_rule", "per tail".into()),
            ("alis.month_date", "last day of the central month of each window".into()),
        ];
        out.extend(fixed.into_iter().map(|(k, v)| (k.to_string(), v)));
        out
    }
}

fn prefix(section: &str, e: StressError) -> StressError {
    StressError::InvalidParameter(format!("{section}: {e}"))
}
