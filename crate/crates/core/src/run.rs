//! Batch orchestration of a manifest: ingest, compute, write artifacts and a
//! metadata file recording the resolved configuration.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::alis::ia_alis;
use crate::catastrophe::{build_path, emit_svg, path_csv, slice_crises, PlotSeries, SvgStyle};
use crate::config::Settings;
use crate::entropy::{rolling_mod_mmse, rolling_mod_mse};
use crate::error::{Result, StressError};
use crate::manifest::{OutputFormat, RunManifest, Task};
use crate::rqa::rolling_det;
use crate::series::{ingest_csv, write_file, Ingested};
use crate::stress::StressSeries;

pub const METADATA_FILE: &str = "metadata.txt";
pub const MMSE_FILE: &str = "basket.mmse.csv";

/// Command-line overrides applied on top of a manifest.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOptions {
    pub output_dir: Option<PathBuf>,
    pub format: Option<OutputFormat>,
    /// Configuration keys given as flags; they beat the manifest.
    pub flags: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunReport {
    pub output_dir: PathBuf,
    /// Files written, metadata last.
    pub artifacts: Vec<PathBuf>,
    /// One line per requested artifact that could not be produced.
    pub failures: Vec<String>,
    pub warnings: Vec<String>,
}

impl RunReport {
    pub fn success(&self) -> bool {
        self.failures.is_empty()
    }
}

type Outcome<T> = std::result::Result<T, String>;

/// Files, failures and warnings from one target.
type TargetOutcome = (BTreeMap<String, Vec<u8>>, Vec<String>, Vec<String>);

/// Everything a run writes, keyed by file name.
struct Planned {
    files: BTreeMap<String, Vec<u8>>,
    failures: Vec<String>,
    warnings: Vec<String>,
}

fn needed_inputs(m: &RunManifest) -> BTreeSet<String> {
    let mut ids = BTreeSet::new();
    if m.measures.iter().any(|t| *t != Task::Mmse) {
        ids.extend(m.targets.iter().cloned());
    }
    if m.measures.contains(&Task::Mmse) || m.measures.contains(&Task::Catastrophe) {
        ids.extend(m.basket.iter().cloned());
    }
    ids
}

fn ingest_all(m: &RunManifest) -> BTreeMap<String, Outcome<Ingested>> {
    let ids: Vec<String> = needed_inputs(m).into_iter().collect();
    ids.par_iter()
        .map(|id| {
            let input = m.input(id).expect("validated manifest");
            let got = ingest_csv(&input.path)
                .map(|ing| Ingested {
                    series: ing.series.with_id(id.clone()),
                    fill_count: ing.fill_count,
                })
                .map_err(|e| e.to_string());
            (id.clone(), got)
        })
        .collect()
}

fn plan(m: &RunManifest, s: &Settings, format: OutputFormat, ingested: &BTreeMap<String, Outcome<Ingested>>) -> Planned {
    let input = |id: &str| -> Outcome<&Ingested> {
        ingested[id]
            .as_ref()
            .map_err(|e| format!("input {id} failed to ingest: {e}"))
    };
    let wants = |t: Task| m.measures.contains(&t);
    let mut files = BTreeMap::new();
    let mut failures = Vec::new();
    let mut warnings = Vec::new();

    let mmse: Option<Outcome<StressSeries>> = (wants(Task::Mmse) || wants(Task::Catastrophe)).then(|| {
        let channels = m
            .basket
            .iter()
            .map(|id| input(id).map(|i| i.series.clone()))
            .collect::<Outcome<Vec<_>>>()?;
        rolling_mod_mmse(&channels, &s.entropy).map_err(|e| format!("basket mmse: {e}"))
    });
    if wants(Task::Mmse) {
        match &mmse {
            Some(Ok(series)) => {
                files.insert(MMSE_FILE.to_string(), series.to_csv().into_bytes());
            }
            Some(Err(e)) => failures.push(format!("{MMSE_FILE}: {e}")),
            None => {}
        }
    }

    let per_target: Vec<TargetOutcome> = m
        .targets
        .par_iter()
        .map(|id| {
            let mut files = BTreeMap::new();
            let mut failures = Vec::new();
            let mut warnings = Vec::new();
            let mut record = |name: String, got: Outcome<Vec<u8>>| match got {
                Ok(bytes) => {
                    files.insert(name, bytes);
                }
                Err(e) => failures.push(format!("{name}: {e}")),
            };
            let series = input(id).map(|i| &i.series);
            let mse = (wants(Task::Mse) || wants(Task::Catastrophe)).then(|| {
                series.clone().and_then(|x| rolling_mod_mse(x, &s.entropy).map_err(|e| e.to_string()))
            });
            if wants(Task::Mse) {
                let got = mse.clone().expect("computed above").map(|r| r.to_csv().into_bytes());
                record(format!("{id}.mse.csv"), got);
            }
            if wants(Task::Det) {
                let got = series
                    .clone()
                    .and_then(|x| rolling_det(x, &s.rqa).map_err(|e| e.to_string()))
                    .map(|r| r.to_csv().into_bytes());
                record(format!("{id}.det.csv"), got);
            }
            if wants(Task::Alis) {
                let got = series
                    .clone()
                    .and_then(|x| ia_alis(x, &s.alis).map_err(|e| e.to_string()))
                    .map(|r| r.to_csv().into_bytes());
                record(format!("{id}.alis.csv"), got);
            }
            if wants(Task::Catastrophe) {
                let path = mse.expect("computed above").and_then(|perf| {
                    let arousal = match &mmse {
                        Some(Ok(e)) => e.reciprocal().map_err(|e| e.to_string())?,
                        Some(Err(e)) => return Err(e.clone()),
                        None => unreachable!("mmse computed for catastrophe"),
                    };
                    build_path(&perf, &arousal, smoothing_entries(s)).map_err(|e| e.to_string())
                });
                if format.csv() {
                    record(
                        format!("{id}.path.csv"),
                        path.clone().map(|p| path_csv(&p, &m.registry).into_bytes()),
                    );
                }
                if format.svg() {
                    let svg = path.and_then(|p| {
                        let sliced = slice_crises(&p, &m.registry);
                        warnings.extend(sliced.warnings);
                        let series: Vec<PlotSeries> = if sliced.segments.is_empty() {
                            vec![PlotSeries::from(&p)]
                        } else {
                            sliced.segments.iter().map(PlotSeries::from).collect()
                        };
                        let style = SvgStyle {
                            title: Some(format!("{id}: external stress against performance")),
                            ..SvgStyle::default()
                        };
                        emit_svg(&series, &style).map_err(|e| e.to_string())
                    });
                    record(format!("{id}.path.svg"), svg.map(String::into_bytes));
                }
            }
            (files, failures, warnings)
        })
        .collect();
    for (f, mut fail, mut warn) in per_target {
        files.extend(f);
        failures.append(&mut fail);
        warnings.append(&mut warn);
    }
    Planned {
        files,
        failures,
        warnings,
    }
}

/// The smoothing span in trading days, converted to rolling-series entries.
pub fn smoothing_entries(s: &Settings) -> usize {
    (s.smoothing / s.entropy.increment).max(1)
}

fn metadata(
    m: &RunManifest,
    s: &Settings,
    format: OutputFormat,
    ingested: &BTreeMap<String, Outcome<Ingested>>,
    planned: &Planned,
) -> String {
    let mut out = String::new();
    let mut kv = |k: &str, v: &str| {
        let _ = writeln!(out, "{k}={v}");
    };
    kv("version", env!("CARGO_PKG_VERSION"));
    let measures: Vec<&str> = m.measures.iter().map(|t| t.as_str()).collect();
    kv("measures", &measures.join(","));
    kv("format", &format.to_string());
    for i in &m.inputs {
        kv(&format!("input.{}", i.id), &i.declared);
    }
    kv("basket", &m.basket.join(","));
    kv("targets", &m.targets.join(","));
    for (id, got) in ingested {
        match got {
            Ok(ing) => {
                kv(&format!("ingest.{id}.days"), &ing.series.len().to_string());
                kv(&format!("ingest.{id}.filled"), &ing.fill_count.to_string());
            }
            Err(_) => kv(&format!("ingest.{id}.days"), "failed"),
        }
    }
    for (k, v) in s.metadata() {
        kv(&k, &v);
    }
    kv("catastrophe.smoothing_entries", &smoothing_entries(s).to_string());
    for p in m.registry.periods() {
        kv(&format!("registry.{}", p.label), &format!("{},{}", p.start, p.end));
    }
    kv("registry.interval", "start inclusive, end exclusive");
    kv(
        "registry.note",
        "default IBB period starts 2000 with a two-year span, matching the other crisis segments",
    );
    for (n, name) in planned.files.keys().enumerate() {
        kv(&format!("artifact.{}", n + 1), name);
    }
    for (n, f) in planned.failures.iter().enumerate() {
        kv(&format!("failure.{}", n + 1), f);
    }
    for (n, w) in planned.warnings.iter().enumerate() {
        kv(&format!("warning.{}", n + 1), w);
    }
    kv("status", if planned.failures.is_empty() { "complete" } else { "incomplete" });
    out
}

/// Runs a validated manifest. Per-item failures are collected in the
/// report; only configuration and output-directory problems abort.
pub fn run(manifest: &RunManifest, opts: &RunOptions) -> Result<RunReport> {
    let settings = Settings::resolve(&manifest.config, &opts.flags)?;
    let mut m = manifest.clone();
    m.targets.sort();
    m.targets.dedup();
    let format = opts.format.unwrap_or(m.format);
    let out_dir = opts.output_dir.clone().unwrap_or_else(|| m.output_dir.clone());
    fs::create_dir_all(&out_dir).map_err(|e| StressError::Io {
        path: out_dir.clone(),
        message: e.to_string(),
    })?;

    let ingested = ingest_all(&m);
    let planned = plan(&m, &settings, format, &ingested);
    let meta = metadata(&m, &settings, format, &ingested, &planned);

    let mut report = RunReport {
        output_dir: out_dir.clone(),
        failures: planned.failures.clone(),
        warnings: planned.warnings.clone(),
        ..RunReport::default()
    };
    for (name, bytes) in planned.files.iter().map(|(n, b)| (n.as_str(), b.as_slice())).chain([(METADATA_FILE, meta.as_bytes())]) {
        let path = out_dir.join(name);
        match write_file(&path, bytes) {
            Ok(()) => report.artifacts.push(path),
            Err(e) => report.failures.push(e.to_string()),
        }
    }
    Ok(report)
}

/// Convenience for tests and the CLI: load, then run.
pub fn run_manifest_file(path: &Path, opts: &RunOptions) -> Result<RunReport> {
    run(&RunManifest::load(path)?, opts)
}
