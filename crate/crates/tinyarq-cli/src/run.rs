//! The three experiments: parameter sweep, delay CCDF and coded-vs-uncoded
//! comparison.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use tinyarq::gf::DiffMode;
use tinyarq::protocols::{analyze, AnalysisConfig, Protocol};
use tinyarq::sim::{ccdf, simulate, SimConfig};
use tinyarq::stats::{fit_subgaussian, TailFit};

use crate::config::{ChannelKind, SweepSpec};
use crate::format::{float, opt};
use crate::svg::{render, Chart, Series, Style};
use crate::CliError;

/// Sweep CSV columns, in order.
pub const SWEEP_COLUMNS: [&str; 17] = [
    "protocol",
    "eps",
    "r",
    "k",
    "T",
    "eta_analytic",
    "eta_sim",
    "eta_sim_se",
    "dbar_analytic",
    "dbar_sim",
    "dbar_sim_se",
    "var_analytic",
    "var_sim",
    "dhat_analytic",
    "dhat_sim",
    "v_fit",
    "wallclock_ms",
];

/// Comparison CSV columns, in order.
pub const COMPARE_COLUMNS: [&str; 10] = [
    "eps",
    "r",
    "k",
    "T",
    "eta_uncoded_analytic",
    "eta_coded_analytic",
    "gain_analytic",
    "eta_uncoded_sim",
    "eta_coded_sim",
    "gain_sim",
];

/// One `(protocol, ε, channel, k, T)` grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    /// Protocol.
    pub protocol: Protocol,
    /// Stationary erasure rate.
    pub eps: f64,
    /// Channel family.
    pub channel: ChannelKind,
    /// RTT parameter.
    pub k: u32,
    /// Timeout.
    pub t: u32,
}

impl std::fmt::Display for GridPoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} eps={} r={} k={} T={}",
            self.protocol,
            float(self.eps),
            self.channel,
            self.k,
            self.t
        )
    }
}

/// Simulated side of a row.
#[derive(Debug, Clone, PartialEq)]
pub struct SimSummary {
    /// Empirical throughput.
    pub eta: f64,
    /// Its standard error.
    pub eta_se: f64,
    /// Mean delay.
    pub dbar: f64,
    /// Its standard error.
    pub dbar_se: f64,
    /// Delay variance.
    pub var: f64,
    /// Empirical guaranteeable delay.
    pub dhat: f64,
    /// Sub-Gaussian tail fit (invalid when the tail is too short).
    pub fit: TailFit,
    /// Empirical CCDF.
    pub ccdf: Vec<(u64, f64)>,
    /// Delay samples above the histogram cap.
    pub overflow: u64,
}

/// One evaluated grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    /// Grid point.
    pub point: GridPoint,
    /// Analytic throughput.
    pub eta: f64,
    /// Analytic mean delay.
    pub dbar: f64,
    /// Analytic delay variance.
    pub var: f64,
    /// Analytic guaranteeable delay.
    pub dhat: f64,
    /// Simulation results, when simulated.
    pub sim: Option<SimSummary>,
    /// Wall-clock time, when timing was requested.
    pub wallclock_ms: Option<f64>,
}

impl SweepRow {
    fn record(&self) -> Vec<String> {
        let p = &self.point;
        let s = self.sim.as_ref();
        vec![
            p.protocol.name().to_string(),
            float(p.eps),
            p.channel.label(),
            p.k.to_string(),
            p.t.to_string(),
            float(self.eta),
            opt(s.map(|s| s.eta)),
            opt(s.map(|s| s.eta_se)),
            float(self.dbar),
            opt(s.map(|s| s.dbar)),
            opt(s.map(|s| s.dbar_se)),
            float(self.var),
            opt(s.map(|s| s.var)),
            float(self.dhat),
            opt(s.map(|s| s.dhat)),
            opt(s.and_then(|s| s.fit.valid.then_some(s.fit.v))),
            opt(self.wallclock_ms),
        ]
    }
}

/// Evaluate one grid point: analysis, and simulation when configured.
pub fn evaluate(point: GridPoint, spec: &SweepSpec) -> Result<SweepRow, CliError> {
    let start = Instant::now();
    let annotate = |e: String| CliError::Numerical {
        point: point.to_string(),
        message: e,
    };
    let channel = point.channel.channel(point.eps)?;
    let mut cfg = AnalysisConfig::new(point.protocol, point.k, point.t, channel)
        .map_err(|e| CliError::Config(format!("{point}: {e}")))?;
    if point.protocol == Protocol::HarqChase {
        cfg = cfg
            .with_harq_alpha(spec.alpha.alpha(point.eps))
            .map_err(|e| CliError::Config(format!("{point}: {e}")))?;
    }
    let metrics = analyze(&cfg, DiffMode::Analytic).map_err(|e| annotate(e.to_string()))?;
    let sim = match spec.sim {
        None => None,
        Some(s) => {
            let sim_cfg = SimConfig::new(cfg, s.units, s.seed)
                .and_then(|c| c.with_replications(s.replications))
                .map_err(|e| CliError::Config(format!("{point}: {e}")))?;
            let result = simulate(&sim_cfg).map_err(|e| annotate(e.to_string()))?;
            let curve = ccdf(&result).map_err(|e| annotate(e.to_string()))?;
            let fit = fit_subgaussian(&curve, result.rtt)
                .unwrap_or_else(|_| TailFit::invalid(curve.last().map_or(0, |c| c.0)));
            Some(SimSummary {
                eta: result.empirical_throughput,
                eta_se: result.throughput_se,
                dbar: result.delay_mean,
                dbar_se: result.delay_mean_se,
                var: result.delay_variance,
                dhat: result.guaranteeable_delay(),
                fit,
                ccdf: curve,
                overflow: result.delays.overflow_count(),
            })
        }
    };
    Ok(SweepRow {
        point,
        eta: metrics.throughput,
        dbar: metrics.mean_delay,
        var: metrics.delay_variance,
        dhat: metrics.guaranteeable_delay,
        sim,
        wallclock_ms: spec.timing.then(|| start.elapsed().as_secs_f64() * 1e3),
    })
}

/// Grid points of a spec in output order: channel, `(k, T)`, protocol, ε.
pub fn grid(spec: &SweepSpec, protocols: &[Protocol]) -> Vec<GridPoint> {
    let mut points = Vec::new();
    for &channel in &spec.channels {
        for &(k, t) in &spec.kt_pairs {
            for &protocol in protocols {
                for &eps in &spec.eps_values {
                    points.push(GridPoint {
                        protocol,
                        eps,
                        channel,
                        k,
                        t,
                    });
                }
            }
        }
    }
    points
}

fn evaluate_all(points: &[GridPoint], spec: &SweepSpec) -> Result<Vec<SweepRow>, CliError> {
    points.par_iter().map(|&p| evaluate(p, spec)).collect()
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Output {
        path: dir.to_path_buf(),
        message: e.to_string(),
    })
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::Output {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn write_csv(path: &Path, header: &[&str], records: &[Vec<String>]) -> Result<(), CliError> {
    let output_err = |e: &dyn std::fmt::Display| CliError::Output {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let mut w = csv::Writer::from_path(path).map_err(|e| output_err(&e))?;
    w.write_record(header).map_err(|e| output_err(&e))?;
    for r in records {
        w.write_record(r).map_err(|e| output_err(&e))?;
    }
    w.flush().map_err(|e| output_err(&e))
}

fn point_stem(channel: ChannelKind, k: u32, t: u32) -> String {
    format!("r{}_k{k}_T{t}", channel.label())
}

/// Files written by an experiment, plus warnings worth showing.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Outputs {
    /// CSV files.
    pub csv: Vec<PathBuf>,
    /// SVG files.
    pub svg: Vec<PathBuf>,
    /// Human-readable warnings (e.g. histogram overflow).
    pub warnings: Vec<String>,
}

/// Result of [`run_sweep`].
#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    /// Rows in CSV order.
    pub rows: Vec<SweepRow>,
    /// Files written.
    pub outputs: Outputs,
}

/// Run a sweep: one CSV row per grid point, optional plots and CCDF files.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepReport, CliError> {
    ensure_dir(&spec.out)?;
    let points = grid(spec, &spec.protocols);
    let rows = evaluate_all(&points, spec)?;
    let mut outputs = Outputs::default();
    let csv_path = spec.out.join("sweep.csv");
    let records: Vec<Vec<String>> = rows.iter().map(SweepRow::record).collect();
    write_csv(&csv_path, &SWEEP_COLUMNS, &records)?;
    outputs.csv.push(csv_path);
    for row in &rows {
        if let Some(s) = &row.sim {
            if s.overflow > 0 {
                outputs.warnings.push(format!(
                    "{}: {} delay sample(s) above the histogram cap",
                    row.point, s.overflow
                ));
            }
            if spec.ccdf {
                let (csv, svg) = write_ccdf(&spec.out, &row.point, s)?;
                outputs.csv.push(csv);
                outputs.svg.push(svg);
            }
        }
    }
    if spec.plots {
        outputs.svg.extend(write_sweep_plots(spec, &rows)?);
    }
    Ok(SweepReport { rows, outputs })
}

fn write_sweep_plots(spec: &SweepSpec, rows: &[SweepRow]) -> Result<Vec<PathBuf>, CliError> {
    type Pick = fn(&SweepRow) -> (f64, Option<f64>);
    let metrics: [(&str, &str, Pick); 3] = [
        ("eta", "throughput", |r| {
            (r.eta, r.sim.as_ref().map(|s| s.eta))
        }),
        ("dbar", "mean delay (slots)", |r| {
            (r.dbar, r.sim.as_ref().map(|s| s.dbar))
        }),
        ("dhat", "guaranteeable delay (slots)", |r| {
            (r.dhat, r.sim.as_ref().map(|s| s.dhat))
        }),
    ];
    let mut paths = Vec::new();
    for &channel in &spec.channels {
        for &(k, t) in &spec.kt_pairs {
            for (name, y_label, pick) in metrics {
                let mut series = Vec::new();
                for (colour, &protocol) in spec.protocols.iter().enumerate() {
                    let group: Vec<&SweepRow> = rows
                        .iter()
                        .filter(|r| {
                            r.point.protocol == protocol
                                && r.point.channel == channel
                                && (r.point.k, r.point.t) == (k, t)
                        })
                        .collect();
                    series.push(Series {
                        label: format!("{protocol} (analysis)"),
                        points: group.iter().map(|r| (r.point.eps, pick(r).0)).collect(),
                        style: Style::Line,
                        colour,
                    });
                    let sim: Vec<(f64, f64)> = group
                        .iter()
                        .filter_map(|r| pick(r).1.map(|v| (r.point.eps, v)))
                        .collect();
                    if !sim.is_empty() {
                        series.push(Series {
                            label: format!("{protocol} (sim)"),
                            points: sim,
                            style: Style::Markers,
                            colour,
                        });
                    }
                }
                let chart = Chart {
                    title: format!("{y_label}, r = {channel}, k = {k}, T = {t}"),
                    x_label: "erasure rate ε".into(),
                    y_label: y_label.into(),
                    log_y: false,
                    series,
                };
                let path = spec
                    .out
                    .join(format!("{name}_{}.svg", point_stem(channel, k, t)));
                write_file(&path, &render(&chart))?;
                paths.push(path);
            }
        }
    }
    Ok(paths)
}

fn write_ccdf(
    dir: &Path,
    point: &GridPoint,
    s: &SimSummary,
) -> Result<(PathBuf, PathBuf), CliError> {
    let stem = format!(
        "ccdf_{}_eps{}_{}",
        point.protocol,
        float(point.eps),
        point_stem(point.channel, point.k, point.t)
    );
    let csv_path = dir.join(format!("{stem}.csv"));
    let mut header = vec!["d", "ccdf"];
    if s.fit.valid {
        header.push("gaussian_bound");
    }
    let records: Vec<Vec<String>> = s
        .ccdf
        .iter()
        .map(|&(d, p)| {
            let mut r = vec![d.to_string(), float(p)];
            if let Some(b) = s.fit.bound(d) {
                r.push(float(b));
            }
            r
        })
        .collect();
    write_csv(&csv_path, &header, &records)?;
    let mut series = vec![Series {
        label: "empirical".into(),
        points: s.ccdf.iter().map(|&(d, p)| (d as f64, p)).collect(),
        style: Style::Line,
        colour: 0,
    }];
    if s.fit.valid {
        series.push(Series {
            label: format!("exp(-{}·d²)", float(s.fit.v)),
            points: s
                .ccdf
                .iter()
                .filter_map(|&(d, _)| s.fit.bound(d).map(|b| (d as f64, b)))
                .collect(),
            style: Style::Dashed,
            colour: 1,
        });
    }
    let chart = Chart {
        title: format!("delay CCDF, {point}"),
        x_label: "d (slots)".into(),
        y_label: "P(D > d)".into(),
        log_y: true,
        series,
    };
    let svg_path = dir.join(format!("{stem}.svg"));
    write_file(&svg_path, &render(&chart))?;
    Ok((csv_path, svg_path))
}

/// Result of [`run_ccdf`].
#[derive(Debug, Clone, PartialEq)]
pub struct CcdfReport {
    /// The evaluated point.
    pub row: SweepRow,
    /// Files written.
    pub outputs: Outputs,
}

/// Simulate one grid point and write its CCDF with the fitted Gaussian bound.
pub fn run_ccdf(spec: &SweepSpec) -> Result<CcdfReport, CliError> {
    if spec.sim.is_none() {
        return Err(CliError::Config(
            "ccdf needs simulation (drop `no-sim`)".into(),
        ));
    }
    let points = grid(spec, &spec.protocols);
    let [point] = points.as_slice() else {
        return Err(CliError::Config(format!(
            "ccdf needs exactly one protocol, eps, r and (k, T); the spec has {} points",
            points.len()
        )));
    };
    ensure_dir(&spec.out)?;
    let row = evaluate(*point, spec)?;
    let sim = row.sim.as_ref().expect("simulation requested");
    let (csv, svg) = write_ccdf(&spec.out, point, sim)?;
    let mut outputs = Outputs {
        csv: vec![csv],
        svg: vec![svg],
        warnings: Vec::new(),
    };
    if !sim.fit.valid {
        outputs
            .warnings
            .push(format!("{point}: tail too short for a sub-Gaussian fit"));
    }
    Ok(CcdfReport { row, outputs })
}

/// One comparison row.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    /// Uncoded evaluation.
    pub uncoded: SweepRow,
    /// Coded evaluation at the same point.
    pub coded: SweepRow,
}

impl CompareRow {
    /// Analytic relative gain `η_C/η_U − 1`.
    pub fn gain_analytic(&self) -> f64 {
        self.coded.eta / self.uncoded.eta - 1.0
    }

    /// Simulated relative gain, when simulated.
    pub fn gain_sim(&self) -> Option<f64> {
        Some(self.coded.sim.as_ref()?.eta / self.uncoded.sim.as_ref()?.eta - 1.0)
    }

    fn record(&self) -> Vec<String> {
        let p = &self.uncoded.point;
        vec![
            float(p.eps),
            p.channel.label(),
            p.k.to_string(),
            p.t.to_string(),
            float(self.uncoded.eta),
            float(self.coded.eta),
            float(self.gain_analytic()),
            opt(self.uncoded.sim.as_ref().map(|s| s.eta)),
            opt(self.coded.sim.as_ref().map(|s| s.eta)),
            opt(self.gain_sim()),
        ]
    }
}

/// Result of [`run_compare`].
#[derive(Debug, Clone, PartialEq)]
pub struct CompareReport {
    /// One row per `(ε, r, k, T)`.
    pub rows: Vec<CompareRow>,
    /// Largest gain (simulated when available, else analytic) and its row index.
    pub max_gain: (f64, usize),
    /// One-line summary.
    pub summary: String,
    /// Files written.
    pub outputs: Outputs,
}

/// Relative throughput gain of coded over uncoded ARQ at every grid point.
pub fn run_compare(spec: &SweepSpec) -> Result<CompareReport, CliError> {
    for p in [Protocol::Uncoded, Protocol::Coded] {
        if !spec.protocols.contains(&p) {
            return Err(CliError::Config(format!(
                "compare needs protocol {p} in the spec"
            )));
        }
    }
    ensure_dir(&spec.out)?;
    let points = grid(spec, &[Protocol::Uncoded, Protocol::Coded]);
    let mut evaluated = evaluate_all(&points, spec)?.into_iter();
    let mut rows = Vec::new();
    // `grid` lists all uncoded points of a (channel, k, T) block, then the
    // coded ones, in the same ε order.
    let n_eps = spec.eps_values.len();
    while evaluated.len() > 0 {
        let uncoded: Vec<SweepRow> = evaluated.by_ref().take(n_eps).collect();
        let coded: Vec<SweepRow> = evaluated.by_ref().take(n_eps).collect();
        rows.extend(
            uncoded
                .into_iter()
                .zip(coded)
                .map(|(uncoded, coded)| CompareRow { uncoded, coded }),
        );
    }
    let gain = |r: &CompareRow| r.gain_sim().unwrap_or_else(|| r.gain_analytic());
    let max_gain = rows
        .iter()
        .enumerate()
        .map(|(i, r)| (gain(r), i))
        .fold((f64::NEG_INFINITY, 0), |a, b| if b.0 > a.0 { b } else { a });
    let source = if spec.sim.is_some() {
        "simulated"
    } else {
        "analytic"
    };
    let best = &rows[max_gain.1].uncoded.point;
    let summary = format!(
        "max {source} gain of coded over uncoded ARQ: {:.2}% at eps={} r={} k={} T={}",
        100.0 * max_gain.0,
        float(best.eps),
        best.channel,
        best.k,
        best.t
    );
    let path = spec.out.join("compare.csv");
    let records: Vec<Vec<String>> = rows.iter().map(CompareRow::record).collect();
    write_csv(&path, &COMPARE_COLUMNS, &records)?;
    Ok(CompareReport {
        rows,
        max_gain,
        summary,
        outputs: Outputs {
            csv: vec![path],
            ..Outputs::default()
        },
    })
}
