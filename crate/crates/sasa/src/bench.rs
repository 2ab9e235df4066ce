//! Reproduction of the published simulation tables.
//!
//! Each selector runs one scenario matrix and reports K̂ (mean, standard
//! error, proportion equal to the true K) and ARI for every column next to
//! the published value. Selectors 1 and 2 share the Setting 1 7×7
//! experiment, 4 and 5 the Setting 2 7×7 experiment; selector 8 covers both
//! random-layout tables.

use serde::Serialize;

use sasa_core::simgen::{Levels, MethodConfig, Setting, SimScenario};
use sasa_core::tuning::{Criterion, TuneGrid};
use sasa_core::WeightKind;

use crate::harness::{run_replicates, summarize, MethodSummary};

/// Published cell: `(mean, se)` pairs and the proportion of exact K.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PublishedCell {
    pub khat_mean: f64,
    pub khat_se: f64,
    pub per: f64,
    pub ari_mean: Option<f64>,
    pub ari_se: Option<f64>,
}

const fn cell(khat_mean: f64, khat_se: f64, per: f64, ari: Option<(f64, f64)>) -> PublishedCell {
    let (ari_mean, ari_se) = match ari {
        Some((m, s)) => (Some(m), Some(s)),
        None => (None, None),
    };
    PublishedCell {
        khat_mean,
        khat_se,
        per,
        ari_mean,
        ari_se,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Column {
    Kind(WeightKind),
    /// `sp` weights tuned by 10-fold cross-validation.
    Cv,
}

impl Column {
    pub fn name(self) -> &'static str {
        match self {
            Column::Kind(k) => k.name(),
            Column::Cv => "cv",
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchCase {
    pub label: &'static str,
    pub scenario: SimScenario,
    pub columns: Vec<(Column, PublishedCell)>,
}

#[derive(Debug, Clone)]
pub struct BenchTable {
    pub number: u8,
    pub title: &'static str,
    pub cases: Vec<BenchCase>,
}

use Column::{Cv, Kind};
use WeightKind::{Equal, Reg, RegSp, Sp};

fn setting1_7x7() -> Vec<BenchCase> {
    vec![
        BenchCase {
            label: "n_i=10",
            scenario: SimScenario::new(Setting::S1, 7, 7, 10),
            columns: vec![
                (Kind(Equal), cell(3.34, 0.054, 0.69, Some((0.80, 0.011)))),
                (Kind(RegSp), cell(3.15, 0.039, 0.86, Some((0.92, 0.008)))),
                (Kind(Reg), cell(3.33, 0.051, 0.69, Some((0.82, 0.01)))),
                (Kind(Sp), cell(3.13, 0.034, 0.87, Some((0.92, 0.007)))),
                (Cv, cell(3.82, 0.13, 0.56, Some((0.95, 0.007)))),
            ],
        },
        BenchCase {
            label: "n_i=30",
            scenario: SimScenario::new(Setting::S1, 7, 7, 30),
            columns: vec![
                (Kind(Equal), cell(3.00, 0.0, 1.00, Some((0.998, 0.001)))),
                (Kind(RegSp), cell(3.00, 0.0, 1.00, Some((0.999, 0.0006)))),
                (Kind(Reg), cell(3.00, 0.0, 1.00, Some((0.998, 0.001)))),
                (Kind(Sp), cell(3.00, 0.0, 1.00, Some((0.999, 0.0006)))),
            ],
        },
    ]
}

// 3.14 below is a published K-hat, not pi.
#[allow(clippy::approx_constant)]
fn setting2_7x7() -> Vec<BenchCase> {
    vec![
        BenchCase {
            label: "n_i=10",
            scenario: SimScenario::new(Setting::S2, 7, 7, 10),
            columns: vec![
                (Kind(Equal), cell(3.25, 0.119, 0.34, Some((0.32, 0.011)))),
                (Kind(RegSp), cell(3.01, 0.093, 0.45, Some((0.50, 0.023)))),
                (Kind(Reg), cell(3.14, 0.107, 0.33, Some((0.33, 0.01)))),
                (Kind(Sp), cell(2.88, 0.067, 0.60, Some((0.61, 0.026)))),
            ],
        },
        BenchCase {
            label: "n_i=30",
            scenario: SimScenario::new(Setting::S2, 7, 7, 30),
            columns: vec![
                (Kind(Equal), cell(2.70, 0.046, 0.70, Some((0.72, 0.018)))),
                (Kind(RegSp), cell(2.90, 0.030, 0.90, Some((0.86, 0.015)))),
                (Kind(Reg), cell(2.76, 0.043, 0.76, Some((0.75, 0.017)))),
                (Kind(Sp), cell(2.95, 0.022, 0.95, Some((0.90, 0.012)))),
            ],
        },
    ]
}

fn ten_by_ten(setting: Setting, cells: [[PublishedCell; 2]; 2]) -> Vec<BenchCase> {
    let [c10, c30] = cells;
    vec![
        BenchCase {
            label: "n_i=10",
            scenario: SimScenario::new(setting, 10, 10, 10),
            columns: vec![(Kind(Equal), c10[0]), (Kind(Sp), c10[1])],
        },
        BenchCase {
            label: "n_i=30",
            scenario: SimScenario::new(setting, 10, 10, 30),
            columns: vec![(Kind(Equal), c30[0]), (Kind(Sp), c30[1])],
        },
    ]
}

/// Table for selector `number`, or `None` outside `1..=8`.
pub fn table(number: u8) -> Option<BenchTable> {
    let (title, cases) = match number {
        1 => (
            "Setting 1, 7x7 grid: K-hat (shares the Table 2 experiment)",
            setting1_7x7(),
        ),
        2 => (
            "Setting 1, 7x7 grid: ARI (shares the Table 1 experiment)",
            setting1_7x7(),
        ),
        3 => (
            "Setting 1, 10x10 grid: K-hat and ARI",
            ten_by_ten(
                Setting::S1,
                [
                    [
                        cell(3.59, 0.073, 0.53, Some((0.70, 0.009))),
                        cell(3.37, 0.065, 0.71, Some((0.97, 0.003))),
                    ],
                    [
                        cell(3.0, 0.0, 1.00, Some((0.996, 0.001))),
                        cell(3.0, 0.0, 1.00, Some((1.00, 0.0))),
                    ],
                ],
            ),
        ),
        4 => (
            "Setting 2, 7x7 grid: K-hat (shares the Table 5 experiment)",
            setting2_7x7(),
        ),
        5 => (
            "Setting 2, 7x7 grid: ARI (shares the Table 4 experiment)",
            setting2_7x7(),
        ),
        6 => (
            "Setting 2, 10x10 grid: K-hat and ARI",
            ten_by_ten(
                Setting::S2,
                [
                    [
                        cell(3.82, 0.146, 0.32, Some((0.32, 0.009))),
                        cell(3.35, 0.078, 0.62, Some((0.81, 0.022))),
                    ],
                    [
                        cell(3.10, 0.060, 0.64, Some((0.79, 0.012))),
                        cell(3.00, 0.0, 1.0, Some((0.94, 0.005))),
                    ],
                ],
            ),
        ),
        7 => (
            "Unbalanced groups, 10x10 grid, n_i=10",
            vec![BenchCase {
                label: "n_i=10",
                scenario: SimScenario::new(Setting::Unbalanced, 10, 10, 10),
                columns: vec![
                    (Kind(Equal), cell(4.58, 0.093, 0.57, Some((0.62, 0.010)))),
                    (Kind(RegSp), cell(4.23, 0.049, 0.80, Some((0.94, 0.061)))),
                    (Kind(Reg), cell(5.17, 0.011, 0.30, Some((0.67, 0.009)))),
                    (Kind(Sp), cell(4.35, 0.059, 0.71, Some((0.96, 0.004)))),
                ],
            }],
        ),
        8 => (
            "Random groups, 7x7 grid",
            vec![
                BenchCase {
                    label: "setting 1, n_i=10",
                    scenario: SimScenario::new(Setting::Random(Levels::S1), 7, 7, 10),
                    columns: vec![
                        (Kind(Equal), cell(3.42, 0.064, 0.66, Some((0.78, 0.011)))),
                        (Kind(RegSp), cell(3.45, 0.063, 0.62, Some((0.82, 0.010)))),
                        (Kind(Reg), cell(3.40, 0.059, 0.65, Some((0.81, 0.010)))),
                        (Kind(Sp), cell(3.45, 0.063, 0.62, Some((0.82, 0.011)))),
                    ],
                },
                BenchCase {
                    label: "setting 2, n_i=30",
                    scenario: SimScenario::new(Setting::Random(Levels::S2), 7, 7, 30),
                    columns: vec![
                        (Kind(Equal), cell(2.77, 0.045, 0.75, Some((0.74, 0.015)))),
                        (Kind(RegSp), cell(2.77, 0.045, 0.75, Some((0.76, 0.016)))),
                        (Kind(Reg), cell(2.83, 0.040, 0.81, Some((0.77, 0.014)))),
                        (Kind(Sp), cell(2.73, 0.047, 0.71, Some((0.74, 0.017)))),
                    ],
                },
            ],
        ),
        _ => return None,
    };
    Some(BenchTable { number, title, cases })
}

/// Replicate count for a scale factor in `(0, 1]`; the full run is 100.
pub fn replicates_for(scale: f64) -> usize {
    ((100.0 * scale).round() as usize).max(1)
}

#[derive(Debug, Clone, Copy)]
pub struct BenchOptions {
    pub replicates: usize,
    pub seed: u64,
    pub nlambda: usize,
    pub folds: usize,
}

fn method(column: Column, opts: &BenchOptions) -> MethodConfig {
    let kind = match column {
        Kind(k) => k,
        Cv => Sp,
    };
    let mut m = MethodConfig::bic(kind);
    m.grid = TuneGrid {
        nlambda: opts.nlambda,
        ..TuneGrid::default()
    };
    if column == Cv {
        m.criterion = Criterion::Cv { folds: opts.folds };
    }
    m
}

#[derive(Debug, Clone, Serialize)]
pub struct Stat {
    pub mean: f64,
    pub se: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct KhatStat {
    pub mean: f64,
    pub se: f64,
    pub per: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    NotAvailable,
}

#[derive(Debug, Clone, Serialize)]
pub struct Verdicts {
    pub khat: Verdict,
    pub per: Verdict,
    pub ari: Verdict,
}

#[derive(Debug, Clone, Serialize)]
pub struct ColumnReport {
    pub name: &'static str,
    pub weights: &'static str,
    pub criterion: &'static str,
    pub khat: Option<KhatStat>,
    pub ari: Option<Stat>,
    pub rmse: Option<Stat>,
    pub converged_fraction: Option<f64>,
    pub failures: usize,
    pub first_error: Option<String>,
    pub published: PublishedCell,
    pub verdict: Verdicts,
}

#[derive(Debug, Clone, Serialize)]
pub struct CaseReport {
    pub label: &'static str,
    pub setting: &'static str,
    pub grid: String,
    pub ni: usize,
    pub true_k: usize,
    pub columns: Vec<ColumnReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub table: u8,
    pub title: &'static str,
    pub replicates: usize,
    pub seed: u64,
    pub tolerances: Tolerances,
    pub cases: Vec<CaseReport>,
}

/// A reproduced mean passes when it lies within `max(floor, 3 * combined se)`
/// of the published mean; proportions use a fixed band.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Tolerances {
    pub khat_floor: f64,
    pub per: f64,
    pub ari_floor: f64,
}

pub const TOLERANCES: Tolerances = Tolerances {
    khat_floor: 0.25,
    per: 0.15,
    ari_floor: 0.07,
};

fn within(ours: f64, ours_se: f64, published: f64, published_se: f64, floor: f64) -> Verdict {
    let band = floor.max(3.0 * (ours_se * ours_se + published_se * published_se).sqrt());
    if (ours - published).abs() <= band {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}

fn column_report(column: Column, published: PublishedCell, summary: MethodSummary) -> ColumnReport {
    let weights = match column {
        Kind(k) => k.name(),
        Cv => Sp.name(),
    };
    let criterion = if column == Cv { "cv" } else { "bic" };
    let r = summary.report.as_ref();
    let verdict = match r {
        None => Verdicts {
            khat: Verdict::Fail,
            per: Verdict::Fail,
            ari: Verdict::Fail,
        },
        Some(r) => Verdicts {
            khat: within(
                r.khat.mean,
                r.khat.se,
                published.khat_mean,
                published.khat_se,
                TOLERANCES.khat_floor,
            ),
            per: if (r.khat.per - published.per).abs() <= TOLERANCES.per {
                Verdict::Pass
            } else {
                Verdict::Fail
            },
            ari: match (published.ari_mean, published.ari_se) {
                (Some(m), Some(s)) => within(r.ari_mean, r.ari_se, m, s, TOLERANCES.ari_floor),
                _ => Verdict::NotAvailable,
            },
        },
    };
    ColumnReport {
        name: column.name(),
        weights,
        criterion,
        khat: r.map(|r| KhatStat {
            mean: r.khat.mean,
            se: r.khat.se,
            per: r.khat.per,
        }),
        ari: r.map(|r| Stat {
            mean: r.ari_mean,
            se: r.ari_se,
        }),
        rmse: r.map(|r| Stat {
            mean: r.rmse_mean,
            se: r.rmse_se,
        }),
        converged_fraction: r.map(|r| r.converged_fraction),
        failures: summary.failures,
        first_error: summary.first_error,
        published,
        verdict,
    }
}

pub fn run(table: &BenchTable, opts: &BenchOptions, pool: &rayon::ThreadPool) -> BenchReport {
    let cases = table
        .cases
        .iter()
        .map(|case| {
            let methods: Vec<MethodConfig> = case.columns.iter().map(|&(c, _)| method(c, opts)).collect();
            let outcomes = run_replicates(&case.scenario, &methods, opts.seed, opts.replicates, pool);
            let k = case.scenario.setting.groups();
            let columns = case
                .columns
                .iter()
                .enumerate()
                .map(|(m, &(c, published))| column_report(c, published, summarize(&outcomes, m, k)))
                .collect();
            CaseReport {
                label: case.label,
                setting: case.scenario.setting.name(),
                grid: format!("{}x{}", case.scenario.rows, case.scenario.cols),
                ni: case.scenario.ni,
                true_k: k,
                columns,
            }
        })
        .collect();
    BenchReport {
        table: table.number,
        title: table.title,
        replicates: opts.replicates,
        seed: opts.seed,
        tolerances: TOLERANCES,
        cases,
    }
}

fn verdict_mark(v: Verdict) -> &'static str {
    match v {
        Verdict::Pass => "ok",
        Verdict::Fail => "FAIL",
        Verdict::NotAvailable => "-",
    }
}

/// Side-by-side text rendering: published versus reproduced.
pub fn render(report: &BenchReport) -> String {
    let mut s = format!(
        "Table {}: {}\n{} replicates, seed {}\n",
        report.table, report.title, report.replicates, report.seed
    );
    for case in &report.cases {
        s += &format!(
            "\n[{}] {} {} (true K = {})\n",
            case.label, case.setting, case.grid, case.true_k
        );
        s += &format!(
            "{:<8} {:>22} {:>22} {:>14} {:>24} {:>24}  {}\n",
            "column", "K-hat published", "K-hat ours", "per p/o", "ARI published", "ARI ours", "verdict K/per/ARI"
        );
        for c in &case.columns {
            let kp = format!("{:.2}({:.3})", c.published.khat_mean, c.published.khat_se);
            let ko = c
                .khat
                .as_ref()
                .map_or("n/a".into(), |k| format!("{:.2}({:.3})", k.mean, k.se));
            let per = format!(
                "{:.2}/{}",
                c.published.per,
                c.khat.as_ref().map_or("n/a".into(), |k| format!("{:.2}", k.per))
            );
            let ap = match (c.published.ari_mean, c.published.ari_se) {
                (Some(m), Some(e)) => format!("{m:.3}({e:.3})"),
                _ => "-".into(),
            };
            let ao = c
                .ari
                .as_ref()
                .map_or("n/a".into(), |a| format!("{:.3}({:.3})", a.mean, a.se));
            s += &format!(
                "{:<8} {:>22} {:>22} {:>14} {:>24} {:>24}  {}/{}/{}",
                c.name,
                kp,
                ko,
                per,
                ap,
                ao,
                verdict_mark(c.verdict.khat),
                verdict_mark(c.verdict.per),
                verdict_mark(c.verdict.ari)
            );
            if c.failures > 0 {
                s += &format!("  ({} failed)", c.failures);
            }
            s.push('\n');
        }
    }
    s
}
