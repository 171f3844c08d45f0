//! Subcommand execution and report files.

use std::fs;
use std::path::{Path, PathBuf};

use franson_core::experiment::{run_chain_experiment, run_timed_experiment, LhvSource, PairSource, QuantumSource};
use franson_core::inequalities::{
    bound_for, critical_visibility, evaluate, threshold_efficiency, CorrelationTable, ModelClass, Verdict,
};
use franson_core::lhv::aklz_strategy;
use franson_core::quantum::{chained_quantum_value, Visibility};
use franson_core::setups::SetupSource;
use franson_core::spacetime::{classify_event_order, EventTimeline};
use franson_core::strategyopt::{verify_bound, BoundReport, GameSpec};
use franson_core::timing::EfficiencyReport;
use franson_core::{chain_settings, RandomSource, SettingsChain};
use serde::Serialize;

use crate::config::{RunConfig, SourceKind};
use crate::error::{CliError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Bounds,
    Visibility,
    VerifyBounds,
    Geometry,
    /// Bounds, simulation and, when configured, the geometry check.
    Report,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Bounds => "bounds",
            Command::Visibility => "visibility",
            Command::VerifyBounds => "verify-bounds",
            Command::Geometry => "geometry",
            Command::Report => "report",
        }
    }
}

const SIGNIFICANCE_NOTE: &str = "significance is excess over the quadrature sum of per-term binomial standard errors, \
under a Gaussian approximation";
const GEOMETRY_NOTE: &str = "the check assumes the late setting comes from a randomness source independent of the \
early one; spacelike separation of the two choices is not modelled";

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundsRow {
    pub terms: usize,
    pub plain_bound: f64,
    pub emission_time_bound: f64,
    pub outcomes_only_bound: f64,
    pub quantum_value: f64,
    pub critical_visibility: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassBound {
    pub model_class: ModelClass,
    pub terms: usize,
    pub bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundsSection {
    pub rows: Vec<BoundsRow>,
    pub inefficiency_threshold: f64,
    pub delays_threshold: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub class_bound: Option<ClassBound>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimulationSection {
    /// `quantum`, `aklz`, or a setup variant name.
    pub source: String,
    pub terms: usize,
    pub visibility: Option<f64>,
    pub trials_per_pair: u64,
    pub timed: bool,
    pub coincidence_fraction: f64,
    pub verdicts: Vec<Verdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub efficiency: Option<EfficiencyReport>,
    pub table: CorrelationTable,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VisibilityPoint {
    pub visibility: f64,
    pub predicted: f64,
    pub statistic: f64,
    pub std_error: f64,
    pub violated: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VisibilitySection {
    pub terms: usize,
    pub bound: f64,
    pub critical_visibility: f64,
    pub trials_per_pair: u64,
    pub points: Vec<VisibilityPoint>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub command: &'static str,
    pub config: RunConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bounds: Option<BoundsSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub visibility: Option<VisibilitySection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub strategy_search: Option<BoundReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub geometry: Option<EventTimeline>,
    pub notes: Vec<String>,
}

pub fn bounds_section(c: &RunConfig) -> Result<BoundsSection> {
    let mut rows = Vec::with_capacity(c.terms_list.len());
    for &terms in &c.terms_list {
        rows.push(BoundsRow {
            terms,
            plain_bound: bound_for(&ModelClass::PlainLocalRealism, terms)?,
            emission_time_bound: bound_for(&ModelClass::EmissionTimeRealism, terms)?,
            outcomes_only_bound: bound_for(&ModelClass::OutcomesOnly, terms)?,
            quantum_value: chained_quantum_value(terms)?,
            critical_visibility: critical_visibility(terms)?,
        });
    }
    let class_bound = match c.model_class()? {
        Some(mc) => Some(ClassBound { model_class: mc, terms: c.terms, bound: bound_for(&mc, c.terms)? }),
        None => None,
    };
    Ok(BoundsSection {
        rows,
        inefficiency_threshold: threshold_efficiency(&ModelClass::Inefficiency { eta: 1.0 })?,
        delays_threshold: threshold_efficiency(&ModelClass::Delays { eta: 1.0 })?,
        class_bound,
    })
}

fn verdict_classes(c: &RunConfig, measured_eta: Option<f64>) -> Result<Vec<ModelClass>> {
    if let Some(mc) = c.model_class()? {
        return Ok(vec![mc]);
    }
    let mut classes = vec![
        ModelClass::PlainLocalRealism,
        ModelClass::PathRealism,
        ModelClass::EmissionTimeRealism,
        ModelClass::OutcomesOnly,
    ];
    if let (Some(eta), 4) = (measured_eta, c.terms) {
        if eta > 0.0 {
            classes.insert(1, ModelClass::Delays { eta });
        }
    }
    Ok(classes)
}

fn run_source(
    c: &RunConfig,
    source: &dyn PairSource,
    chain: &SettingsChain,
    rs: &RandomSource,
) -> Result<(CorrelationTable, f64, Option<EfficiencyReport>)> {
    match &c.timing {
        Some(timing) => {
            let r = run_timed_experiment(source, chain, c.trials, rs, timing)?;
            let total: u64 = r.tallies.iter().map(|t| t.coincidences).sum();
            let trials = c.trials * chain.len() as u64;
            Ok((r.table, total as f64 / trials as f64, Some(r.efficiency)))
        }
        None => {
            let r = run_chain_experiment(source, chain, c.trials, rs)?;
            let fraction = r.coincidence_fraction();
            Ok((r.table, fraction, None))
        }
    }
}

pub fn simulation_section(c: &RunConfig) -> Result<SimulationSection> {
    let chain = chain_settings(c.terms)?;
    let rs = RandomSource::new(c.seed, 0);
    let vis = Visibility::new(c.visibility)?;
    let strategy = aklz_strategy();
    let (name, visibility, (table, coincidence_fraction, efficiency)) = match (c.variant, c.source) {
        (Some(v), _) => (v.name().to_string(), Some(c.visibility), run_source(c, &SetupSource::new(v, vis), &chain, &rs)?),
        (None, SourceKind::Quantum) => {
            ("quantum".to_string(), Some(c.visibility), run_source(c, &QuantumSource { visibility: vis }, &chain, &rs)?)
        }
        (None, SourceKind::Aklz) => ("aklz".to_string(), None, run_source(c, &LhvSource(&strategy), &chain, &rs)?),
    };
    let mut classes = verdict_classes(c, efficiency.as_ref().map(|e| e.eta))?;
    if let Some(v) = c.variant {
        if !classes.contains(&v.model_class()) {
            classes.insert(0, v.model_class());
        }
    }
    let verdicts = classes.iter().map(|mc| evaluate(&table, &chain, mc)).collect::<franson_core::Result<Vec<_>>>()?;
    Ok(SimulationSection {
        source: name,
        terms: c.terms,
        visibility,
        trials_per_pair: c.trials,
        timed: c.timing.is_some(),
        coincidence_fraction,
        verdicts,
        efficiency,
        table,
    })
}

pub fn visibility_section(c: &RunConfig) -> Result<VisibilitySection> {
    let chain = chain_settings(c.terms)?;
    let mc = ModelClass::EmissionTimeRealism;
    let bound = bound_for(&mc, c.terms)?;
    let quantum = chained_quantum_value(c.terms)?;
    let mut points = Vec::with_capacity(c.visibility_sweep.len());
    for (k, &v) in c.visibility_sweep.iter().enumerate() {
        let source = QuantumSource { visibility: Visibility::new(v)? };
        let r = run_chain_experiment(&source, &chain, c.trials, &RandomSource::new(c.seed, 1 + k as u64))?;
        let verdict = evaluate(&r.table, &chain, &mc)?;
        points.push(VisibilityPoint {
            visibility: v,
            predicted: v * quantum,
            statistic: verdict.statistic,
            std_error: verdict.std_error,
            violated: verdict.violated,
        });
    }
    Ok(VisibilitySection {
        terms: c.terms,
        bound,
        critical_visibility: critical_visibility(c.terms)?,
        trials_per_pair: c.trials,
        points,
    })
}

pub fn strategy_search(c: &RunConfig) -> Result<BoundReport> {
    let mc = c.model_class()?.unwrap_or(ModelClass::EmissionTimeRealism);
    let game = GameSpec::new(mc, chain_settings(c.terms)?)?;
    Ok(verify_bound(&game, &c.budget())?)
}

pub fn geometry_section(c: &RunConfig) -> Result<EventTimeline> {
    match &c.geometry {
        Some(g) => Ok(classify_event_order(g)),
        None => Err(CliError::Config("geometry command needs a 'geometry' object in the config".into())),
    }
}

pub fn build_report(command: Command, c: &RunConfig) -> Result<Report> {
    let mut r = Report {
        command: command.name(),
        config: c.clone(),
        bounds: None,
        simulation: None,
        visibility: None,
        strategy_search: None,
        geometry: None,
        notes: Vec::new(),
    };
    match command {
        Command::Simulate => r.simulation = Some(simulation_section(c)?),
        Command::Bounds => r.bounds = Some(bounds_section(c)?),
        Command::Visibility => r.visibility = Some(visibility_section(c)?),
        Command::VerifyBounds => r.strategy_search = Some(strategy_search(c)?),
        Command::Geometry => r.geometry = Some(geometry_section(c)?),
        Command::Report => {
            r.bounds = Some(bounds_section(c)?);
            r.simulation = Some(simulation_section(c)?);
            if c.geometry.is_some() {
                r.geometry = Some(geometry_section(c)?);
            }
        }
    }
    if r.simulation.is_some() || r.visibility.is_some() {
        r.notes.push(SIGNIFICANCE_NOTE.into());
    }
    if r.geometry.is_some() {
        r.notes.push(GEOMETRY_NOTE.into());
    }
    Ok(r)
}

#[derive(Serialize)]
struct CorrelationRow {
    term: usize,
    setting1: f64,
    setting2: f64,
    estimate: f64,
    std_error: f64,
    count: u64,
}

#[derive(Serialize)]
struct PlotRow {
    x: f64,
    y: f64,
    yerr: f64,
}

fn io_error(path: &Path, e: impl Into<std::io::Error>) -> CliError {
    CliError::Io { path: path.display().to_string(), source: e.into() }
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_error(path, std::io::Error::other(e)))?;
    for row in rows {
        w.serialize(row).map_err(|e| io_error(path, std::io::Error::other(e)))?;
    }
    w.flush().map_err(|e| io_error(path, e))
}

/// Writes `report.json` plus the CSV files for the sections present and
/// returns their paths.
pub fn write_report(report: &Report, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    let mut written = Vec::new();
    let path = dir.join("report.json");
    let mut json = serde_json::to_string_pretty(report).expect("report serializes");
    json.push('\n');
    fs::write(&path, json).map_err(|e| io_error(&path, e))?;
    written.push(path);

    if let Some(sim) = &report.simulation {
        let chain = chain_settings(sim.terms)?;
        let entries: Vec<_> = chain
            .pairs()
            .enumerate()
            .filter_map(|(k, (a, b))| sim.table.get(a, b).map(|e| (k, e)))
            .collect();
        let rows: Vec<CorrelationRow> = entries
            .iter()
            .map(|(k, e)| CorrelationRow {
                term: *k,
                // + 0.0 turns -0.0 into 0.0
                setting1: e.setting1.radians() + 0.0,
                setting2: e.setting2.radians() + 0.0,
                estimate: e.estimate,
                std_error: e.std_error,
                count: e.count,
            })
            .collect();
        let path = dir.join("correlations.csv");
        write_csv(&path, &rows)?;
        written.push(path);
        let plot: Vec<PlotRow> =
            entries.iter().map(|(k, e)| PlotRow { x: *k as f64, y: e.estimate, yerr: e.std_error }).collect();
        let path = dir.join("plot_correlations.csv");
        write_csv(&path, &plot)?;
        written.push(path);
    }
    if let Some(vis) = &report.visibility {
        let plot: Vec<PlotRow> =
            vis.points.iter().map(|p| PlotRow { x: p.visibility, y: p.statistic, yerr: p.std_error }).collect();
        let path = dir.join("plot_visibility.csv");
        write_csv(&path, &plot)?;
        written.push(path);
    }
    if let Some(b) = &report.bounds {
        let plot: Vec<PlotRow> =
            b.rows.iter().map(|r| PlotRow { x: r.terms as f64, y: r.critical_visibility, yerr: 0.0 }).collect();
        let path = dir.join("plot_critical_visibility.csv");
        write_csv(&path, &plot)?;
        written.push(path);
    }
    Ok(written)
}

/// One-line-per-result summary for the terminal.
pub fn summary(report: &Report) -> Vec<String> {
    let mut lines = Vec::new();
    if let Some(b) = &report.bounds {
        for r in &b.rows {
            lines.push(format!(
                "terms {:>2}: bound {:>2}, quantum {:.4}, critical visibility {:.4}",
                r.terms, r.emission_time_bound, r.quantum_value, r.critical_visibility
            ));
        }
        lines.push(format!(
            "efficiency thresholds: inefficiency {:.5}, delays {:.5}",
            b.inefficiency_threshold, b.delays_threshold
        ));
    }
    if let Some(s) = &report.simulation {
        lines.push(format!("{} source, coincidence fraction {:.4}", s.source, s.coincidence_fraction));
        if let Some(e) = &s.efficiency {
            lines.push(format!("apparent efficiency {:.4}", e.eta));
        }
        for v in &s.verdicts {
            lines.push(format!(
                "{}: statistic {:.4} +- {:.4}, bound {}, violated={}",
                v.model_class, v.statistic, v.std_error, v.bound, v.violated
            ));
        }
    }
    if let Some(v) = &report.visibility {
        for p in &v.points {
            lines.push(format!(
                "visibility {:.3}: statistic {:.4} +- {:.4}, bound {}, violated={}",
                p.visibility, p.statistic, p.std_error, v.bound, p.violated
            ));
        }
        lines.push(format!("critical visibility {:.4}", v.critical_visibility));
    }
    if let Some(s) = &report.strategy_search {
        lines.push(format!(
            "{} with {} terms: best {:.9}, bound {}, exact={}, pass={}",
            s.model_class, s.terms, s.best, s.bound, s.exact, s.pass
        ));
    }
    if let Some(g) = &report.geometry {
        lines.push(format!("emission-time premise satisfied={}, margin {} ns", g.premise.satisfied, g.premise.margin_ns));
    }
    lines
}
