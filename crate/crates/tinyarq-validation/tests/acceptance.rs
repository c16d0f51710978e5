//! The ten acceptance criteria, each at its stated tolerance. Prints one
//! PASS/FAIL line per criterion (with indented details) and exits non-zero
//! when any criterion fails.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::Instant;

use tinyarq::channel::{composite, ge_from_target_erasure, memoryless, CompositeChannel};
use tinyarq::gf::{DiffMode, Metrics};
use tinyarq::protocols::closed_forms::{
    cf_closed_forms, cf_mean_delay_series, cf_moments, coded_alpha, coded_beta, coded_closed_forms,
    coded_delay_variance_rational, coded_mean_delay_series, coded_moments,
    coded_throughput_alpha_beta, harq_closed_forms, uncoded_closed_forms,
    uncoded_delay_variance_expanded, uncoded_mean_delay, uncoded_throughput,
};
use tinyarq::protocols::{analyze, normalization, AnalysisConfig, Protocol};
use tinyarq::sim::{ccdf, simulate, SimConfig, SimResult};
use tinyarq::stats::fit_subgaussian;
use tinyarq_cli::{run_sweep, SweepSpec};

const EPS_GRID: [f64; 10] = [0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5];
const KT_GRID: [(u32, u32); 8] = [
    (5, 8),
    (5, 15),
    (5, 16),
    (5, 30),
    (10, 8),
    (10, 15),
    (10, 16),
    (10, 30),
];
const UNITS: u64 = 1_000_000;
const SEED: u64 = 1;

/// One acceptance criterion.
type Check = fn() -> Outcome;

struct Outcome {
    pass: bool,
    details: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Outcome {
            pass: true,
            details: Vec::new(),
        }
    }

    /// Record a sub-check; any failing sub-check fails the criterion.
    fn check(&mut self, ok: bool, detail: String) {
        self.pass &= ok;
        let tag = if ok { "ok  " } else { "FAIL" };
        self.details.push(format!("{tag} {detail}"));
    }

    /// Informational line that does not affect the verdict.
    fn note(&mut self, detail: String) {
        self.details.push(format!("info {detail}"));
    }
}

fn channel(eps: f64, r: Option<f64>) -> CompositeChannel {
    match r {
        None => memoryless(eps).unwrap(),
        Some(r) => composite(&ge_from_target_erasure(r, 0.0, 1.0, eps).unwrap()),
    }
}

fn label(r: Option<f64>) -> String {
    r.map_or_else(|| "memoryless".to_string(), |r| format!("r={r}"))
}

fn config(protocol: Protocol, eps: f64, r: Option<f64>, k: u32, t: u32) -> Option<AnalysisConfig> {
    AnalysisConfig::new(protocol, k, t, channel(eps, r)).ok()
}

fn metrics(cfg: &AnalysisConfig) -> Metrics {
    analyze(cfg, DiffMode::Analytic).unwrap()
}

fn sim(cfg: &AnalysisConfig) -> SimResult {
    simulate(&SimConfig::new(cfg.clone(), UNITS, SEED).unwrap()).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// Largest error (or signed excess) and where it occurred.
struct Worst {
    err: f64,
    at: String,
}

impl Default for Worst {
    fn default() -> Self {
        Worst {
            err: f64::NEG_INFINITY,
            at: String::new(),
        }
    }
}

impl Worst {
    fn update(&mut self, err: f64, at: impl FnOnce() -> String) {
        if err > self.err || err.is_nan() {
            self.err = err;
            self.at = at();
        }
    }
}

fn criterion_1() -> Outcome {
    let mut out = Outcome::new();
    let mut forms: BTreeMap<&str, Worst> = BTreeMap::new();
    let mut oracle = Worst::default();
    for &eps in &EPS_GRID {
        for &(k, t) in &KT_GRID {
            let at = || format!("eps={eps} k={k} T={t}");
            if let Some(cfg) = config(Protocol::Uncoded, eps, None, k, t) {
                let m = metrics(&cfg);
                forms
                    .entry("uncoded throughput (closed form)")
                    .or_default()
                    .update(rel(m.throughput, uncoded_throughput(eps, k, t)), at);
                forms
                    .entry("uncoded mean delay (closed form)")
                    .or_default()
                    .update(rel(m.mean_delay, uncoded_mean_delay(eps, k, t)), at);
                forms
                    .entry("uncoded delay variance (expanded reference form)")
                    .or_default()
                    .update(
                        rel(m.delay_variance, uncoded_delay_variance_expanded(eps, k, t)),
                        at,
                    );
                let exact = uncoded_closed_forms(eps, k, t);
                oracle.update(max_rel(&m, &exact), || format!("uncoded {}", at()));
            }
            if let Some(cfg) = config(Protocol::Coded, eps, None, k, t) {
                let m = metrics(&cfg);
                forms
                    .entry("coded throughput (alpha/beta form)")
                    .or_default()
                    .update(
                        rel(m.throughput, coded_throughput_alpha_beta(eps, k, t)),
                        at,
                    );
                forms
                    .entry("coded delay variance (rational reference form)")
                    .or_default()
                    .update(
                        rel(m.delay_variance, coded_delay_variance_rational(eps, k, t)),
                        at,
                    );
                let exact = coded_closed_forms(eps, k, t);
                oracle.update(max_rel(&m, &exact), || format!("coded {}", at()));
            }
            if let Some(cfg) = config(Protocol::CumulativeFeedback, eps, None, k, t) {
                let exact = cf_closed_forms(eps, k, t);
                oracle.update(max_rel(&metrics(&cfg), &exact), || format!("cf {}", at()));
            }
            if let Some(cfg) = config(Protocol::HarqChase, eps, None, k, t) {
                let exact = harq_closed_forms(
                    eps,
                    k,
                    t,
                    cfg.harq_alpha,
                    cfg.series_tol,
                    cfg.series_max_terms,
                )
                .unwrap();
                oracle.update(max_rel(&metrics(&cfg), &exact), || format!("harq {}", at()));
            }
        }
    }
    for (name, w) in &forms {
        out.check(
            w.err <= 1e-9,
            format!("{name}: max rel err {:.3e} at {}", w.err, w.at),
        );
    }
    out.note(format!(
        "flow graphs vs exact renewal oracles (all four protocols): max rel err {:.3e} at {}",
        oracle.err, oracle.at
    ));
    out
}

fn max_rel(a: &Metrics, b: &Metrics) -> f64 {
    rel(a.throughput, b.throughput)
        .max(rel(a.mean_delay, b.mean_delay))
        .max(rel(a.delay_variance, b.delay_variance))
}

fn criterion_2() -> Outcome {
    let mut out = Outcome::new();
    for r in [None, Some(0.1), Some(0.3)] {
        for protocol in Protocol::ALL {
            let tol = if protocol == Protocol::HarqChase {
                1e-8
            } else {
                1e-9
            };
            let mut worst = Worst::default();
            for &eps in &EPS_GRID {
                for &(k, t) in &KT_GRID {
                    if let Some(cfg) = config(protocol, eps, r, k, t) {
                        let (tau, delay) = normalization(&cfg).unwrap();
                        let err = (tau - 1.0).abs().max((delay - 1.0).abs());
                        worst.update(err, || format!("eps={eps} k={k} T={t}"));
                    }
                }
            }
            out.check(
                worst.err <= tol,
                format!(
                    "{protocol} {}: max |phi(1) - 1| = {:.3e} (tol {tol:.0e})",
                    label(r),
                    worst.err
                ),
            );
        }
    }
    out
}

fn criterion_3() -> Outcome {
    let mut out = Outcome::new();
    for protocol in Protocol::ALL {
        let mut worst = Worst::default();
        for r in [None, Some(0.1), Some(0.3)] {
            for &eps in &EPS_GRID {
                for &(k, t) in &KT_GRID {
                    if let Some(cfg) = config(protocol, eps, r, k, t) {
                        let a = metrics(&cfg);
                        let n = analyze(&cfg, DiffMode::Numeric).unwrap();
                        worst.update(max_rel(&n, &a), || {
                            format!("eps={eps} {} k={k} T={t}", label(r))
                        });
                    }
                }
            }
        }
        out.check(
            worst.err < 1e-6,
            format!("{protocol}: max rel err {:.3e} at {}", worst.err, worst.at),
        );
    }
    out
}

fn criterion_4() -> Outcome {
    let mut out = Outcome::new();
    for r in [Some(0.3), None, Some(0.1)] {
        let exempt = r == Some(0.1);
        for protocol in Protocol::ALL {
            for eps in [0.1, 0.3, 0.5] {
                let cfg = config(protocol, eps, r, 5, 15).unwrap();
                let m = metrics(&cfg);
                let s = sim(&cfg);
                let eta_tol = (3.0 * s.throughput_se).max(0.01 * m.throughput);
                let d_tol = (3.0 * s.delay_mean_se).max(0.01 * m.mean_delay);
                let eta_err = (s.empirical_throughput - m.throughput).abs();
                let d_err = (s.delay_mean - m.mean_delay).abs();
                let ok = eta_err <= eta_tol && d_err <= d_tol;
                let detail = format!(
                    "{protocol} eps={eps} {}: eta {:.5} vs {:.5} ({:.2} SE), dbar {:.4} vs {:.4} ({:.2} SE)",
                    label(r),
                    s.empirical_throughput,
                    m.throughput,
                    eta_err / s.throughput_se,
                    s.delay_mean,
                    m.mean_delay,
                    d_err / s.delay_mean_se
                );
                if exempt {
                    out.note(format!(
                        "{} [exempt] {detail}",
                        if ok { "within" } else { "outside" }
                    ));
                } else {
                    out.check(ok, detail);
                }
            }
        }
    }
    out
}

fn criterion_5() -> Outcome {
    let mut out = Outcome::new();
    for r in [None, Some(0.3)] {
        for protocol in Protocol::ALL {
            let cfg = config(protocol, 0.5, r, 5, 15).unwrap();
            let s = sim(&cfg);
            let fit = fit_subgaussian(&ccdf(&s).unwrap(), s.rtt);
            match fit {
                Ok(fit) => out.check(
                    fit.v >= 3e-4,
                    format!(
                        "{protocol} {}: fitted v = {:.3e} (support up to d = {})",
                        label(r),
                        fit.v,
                        fit.support_max
                    ),
                ),
                Err(e) => out.check(false, format!("{protocol} {}: {e}", label(r))),
            }
        }
    }
    out
}

fn criterion_6() -> Outcome {
    let mut out = Outcome::new();
    for r in [None, Some(0.1), Some(0.3)] {
        let mut capacity = Worst::default();
        let mut cf_over_uncoded = Worst::default();
        let mut coded_over_cf = Worst::default();
        for &eps in &EPS_GRID {
            for &(k, t) in &KT_GRID {
                let at = || format!("eps={eps} k={k} T={t}");
                let Some(u) = config(Protocol::Uncoded, eps, r, k, t) else {
                    continue;
                };
                let eta_u = metrics(&u).throughput;
                capacity.update(eta_u - (1.0 - eps), at);
                if let (Some(cf), Some(c)) = (
                    config(Protocol::CumulativeFeedback, eps, r, k, t),
                    config(Protocol::Coded, eps, r, k, t),
                ) {
                    let (eta_cf, eta_c) = (metrics(&cf).throughput, metrics(&c).throughput);
                    cf_over_uncoded.update(eta_u - eta_cf, at);
                    coded_over_cf.update(eta_cf - eta_c, at);
                }
            }
        }
        let ch = label(r);
        out.check(
            capacity.err <= 1e-12,
            format!(
                "{ch}: max eta_U - (1 - eps) = {:+.3e} at {}",
                capacity.err, capacity.at
            ),
        );
        out.check(
            cf_over_uncoded.err <= 1e-12,
            format!(
                "{ch}: max eta_U - eta_CF = {:+.3e} at {}",
                cf_over_uncoded.err, cf_over_uncoded.at
            ),
        );
        out.check(
            coded_over_cf.err <= 1e-12,
            format!(
                "{ch}: max eta_CF - eta_Coded = {:+.3e} at {}",
                coded_over_cf.err, coded_over_cf.at
            ),
        );
    }
    let samples: Vec<f64> = (0..100).map(|i| 0.5 * f64::from(i) / 99.0).collect();
    let (a_lo, a_hi) = min_max(samples.iter().map(|&e| coded_alpha(e)));
    let (b_lo, b_hi) = min_max(samples.iter().map(|&e| coded_beta(e)));
    out.check(
        a_lo >= 0.75 && a_hi <= 1.0,
        format!("alpha_C over 100 points in [0, 0.5]: [{a_lo:.6}, {a_hi:.6}] within [3/4, 1]"),
    );
    out.check(
        b_lo >= 0.5 && b_hi < 0.65,
        format!("beta_C over 100 points in [0, 0.5]: [{b_lo:.6}, {b_hi:.6}] within [1/2, 13/20)"),
    );
    out
}

fn min_max(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    })
}

fn criterion_7() -> Outcome {
    let mut out = Outcome::new();
    let mut best = (f64::NEG_INFINITY, 0.0);
    for eps in [0.3, 0.4, 0.5] {
        let u = config(Protocol::Uncoded, eps, Some(0.1), 10, 30).unwrap();
        let c = config(Protocol::Coded, eps, Some(0.1), 10, 30).unwrap();
        let (su, sc) = (sim(&u), sim(&c));
        let gain = sc.empirical_throughput / su.empirical_throughput - 1.0;
        let analytic = metrics(&c).throughput / metrics(&u).throughput - 1.0;
        out.note(format!(
            "eps={eps}: simulated gain {:+.2}% (analytic {:+.2}%)",
            100.0 * gain,
            100.0 * analytic
        ));
        if gain > best.0 {
            best = (gain, eps);
        }
    }
    out.check(
        (0.25..=0.55).contains(&best.0),
        format!(
            "max simulated gain {:+.2}% at eps={} (band [25%, 55%])",
            100.0 * best.0,
            best.1
        ),
    );
    out
}

fn criterion_8() -> Outcome {
    let mut out = Outcome::new();
    for r in [0.1, 0.3] {
        for (k, t) in [(5, 15), (10, 30)] {
            let u = config(Protocol::Uncoded, 0.5, Some(r), k, t).unwrap();
            let c = config(Protocol::Coded, 0.5, Some(r), k, t).unwrap();
            let (mu, mc) = (metrics(&u), metrics(&c));
            out.check(
                mc.guaranteeable_delay < mu.guaranteeable_delay,
                format!(
                    "analytic r={r} k={k} T={t}: Dhat coded {:.3} vs uncoded {:.3}",
                    mc.guaranteeable_delay, mu.guaranteeable_delay
                ),
            );
            let (su, sc) = (sim(&u), sim(&c));
            // Standard error of mean + 3·sd, by the delta method with the
            // sample sd's standard error approximated as sd/sqrt(2n).
            let se = |s: &SimResult| {
                let sd_se = s.delay_variance.sqrt() / (2.0 * s.units as f64).sqrt();
                (s.delay_mean_se.powi(2) + (3.0 * sd_se).powi(2)).sqrt()
            };
            let slack = 3.0 * (se(&su).powi(2) + se(&sc).powi(2)).sqrt();
            out.check(
                sc.guaranteeable_delay() < su.guaranteeable_delay() + slack,
                format!(
                    "simulated r={r} k={k} T={t}: Dhat coded {:.3} vs uncoded {:.3} (3 SE = {slack:.3})",
                    sc.guaranteeable_delay(),
                    su.guaranteeable_delay()
                ),
            );
        }
    }
    out
}

fn criterion_9() -> Outcome {
    let mut out = Outcome::new();
    let points = [0.01, 0.02, 0.04];
    type Exact = fn(f64, u32, u32) -> f64;
    type Series = fn(f64, u32, u32, u32) -> f64;
    let cases: [(&str, Exact, Series); 2] = [
        (
            "cf mean delay",
            |e, k, t| cf_moments(e, k, t).1.mean,
            cf_mean_delay_series,
        ),
        (
            "coded mean delay",
            |e, k, t| coded_moments(e, k, t).1.mean,
            coded_mean_delay_series,
        ),
    ];
    for (name, exact, series) in cases {
        for (k, t) in [(5, 8), (5, 15), (10, 16), (10, 30)] {
            let res: Vec<f64> = points
                .iter()
                .map(|&e| exact(e, k, t) - series(e, k, t, 2))
                .collect();
            let ratios = [res[1] / res[0], res[2] / res[1]];
            let scaled: Vec<String> = points
                .iter()
                .zip(&res)
                .map(|(e, r)| format!("{:.3e}", r / e.powi(3)))
                .collect();
            out.check(
                ratios.iter().all(|q| (6.0..=10.0).contains(q)),
                format!(
                    "{name} k={k} T={t}: successive residual ratios {:.3}, {:.3}; residual/eps^3 = [{}]",
                    ratios[0],
                    ratios[1],
                    scaled.join(", ")
                ),
            );
        }
    }
    out
}

fn criterion_10() -> Outcome {
    let mut out = Outcome::new();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let spec = |dir: &std::path::Path| {
        let map: BTreeMap<String, String> = [
            ("eps", "0.1,0.3,0.5"),
            ("r", "memoryless,0.3"),
            ("units", "20000"),
            ("seed", "7"),
            ("plots", "true"),
            ("ccdf", "true"),
            ("out", dir.to_str().unwrap()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
        SweepSpec::from_map(&map).unwrap()
    };
    let ra = run_sweep(&spec(a.path())).unwrap();
    let rb = run_sweep(&spec(b.path())).unwrap();
    let files_a: Vec<_> = ra.outputs.csv.iter().chain(&ra.outputs.svg).collect();
    let files_b: Vec<_> = rb.outputs.csv.iter().chain(&rb.outputs.svg).collect();
    let identical = files_a.len() == files_b.len()
        && files_a.iter().zip(&files_b).all(|(x, y)| {
            x.file_name() == y.file_name() && std::fs::read(x).unwrap() == std::fs::read(y).unwrap()
        });
    out.check(
        identical,
        format!(
            "{} CSV/SVG files compared byte for byte across two runs",
            files_a.len()
        ),
    );
    out
}

fn main() -> ExitCode {
    let criteria: [(&str, Check); 10] = [
        ("closed-form equivalence", criterion_1),
        ("PGF normalization", criterion_2),
        ("analytic vs numeric derivatives", criterion_3),
        ("simulation/analysis agreement", criterion_4),
        ("sub-Gaussian tail v >= 3e-4", criterion_5),
        ("ordering and bounds", criterion_6),
        ("coded-vs-uncoded gain band", criterion_7),
        ("guaranteeable-delay ordering", criterion_8),
        ("small-eps series order", criterion_9),
        ("determinism", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        let verdict = if outcome.pass { "PASS" } else { "FAIL" };
        println!("criterion {:>2} {verdict}: {name} ({secs:.2} s)", i + 1);
        for d in &outcome.details {
            println!("    {d}");
        }
        failed += usize::from(!outcome.pass);
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
