use serde::{Deserialize, Serialize};

use spectral_dga_core::fgr::{ComparisonReport, HeatLimit, KSpaceReport};
use spectral_dga_core::forms::{BaseCohomology, CohomologyReport, DiracDgaReport};
use spectral_dga_core::qds::Budget;
use spectral_dga_core::C64;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Everything a run produces that is reproducible: dimensions as integers,
/// estimates as fixed-precision strings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub tool_version: String,
    pub scenario: String,
    pub scenario_hash: String,
    pub triple: String,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dirac: Option<DiracSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theorem: Option<TheoremSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub differentials: Option<DifferentialSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cohomology: Option<CohomologySection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fgr: Option<FgrSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cross_terms: Option<CrossTermSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summability: Option<SummabilitySection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heat_identity: Option<HeatIdentitySection>,
    /// Member runs of a comparison.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub runs: Vec<RunRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comparison: Option<ComparisonSection>,
    pub checks: Vec<CheckRecord>,
}

impl RunRecord {
    pub fn new(scenario: &str, scenario_hash: &str, triple: &str, seed: u64) -> Self {
        Self {
            tool_version: TOOL_VERSION.to_string(),
            scenario: scenario.to_string(),
            scenario_hash: scenario_hash.to_string(),
            triple: triple.to_string(),
            seed,
            dirac: None,
            theorem: None,
            differentials: None,
            cohomology: None,
            fgr: None,
            cross_terms: None,
            summability: None,
            heat_identity: None,
            runs: Vec::new(),
            comparison: None,
            checks: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed) && self.runs.iter().all(RunRecord::passed)
    }

    pub fn check(&mut self, name: &str, passed: bool, detail: String) {
        self.checks.push(CheckRecord {
            name: name.to_string(),
            passed,
            detail,
        });
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Wall-clock seconds per stage; kept apart from [`RunRecord`] so reports
/// stay byte-identical across reruns.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub scenario: String,
    pub stages: Vec<(String, f64)>,
}

/// Twelve significant digits in scientific notation.
pub fn fmt_f64(x: f64) -> String {
    let x = if x == 0.0 { 0.0 } else { x };
    if x.is_finite() {
        format!("{x:.11e}")
    } else {
        format!("{x}")
    }
}

pub fn fmt_c64(z: C64) -> String {
    if z.im == 0.0 {
        fmt_f64(z.re)
    } else {
        let sign = if z.im < 0.0 { '-' } else { '+' };
        format!("{} {sign} {}i", fmt_f64(z.re), fmt_f64(z.im.abs()))
    }
}

pub fn fmt_budget(b: &Budget) -> String {
    let mut s = format!("d={}", b.base_degree);
    for sb in &b.suspensions {
        s.push_str(&format!(" | c={} L={}", sb.index_cap, sb.laurent_cap));
    }
    s
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LimitRecord {
    pub value: String,
    pub error: String,
    pub nodes: usize,
    pub order: usize,
}

impl From<&HeatLimit> for LimitRecord {
    fn from(h: &HeatLimit) -> Self {
        Self {
            value: fmt_c64(h.value),
            error: fmt_f64(h.error_estimate),
            nodes: h.samples.len(),
            order: h.order,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiracLevelRow {
    pub level: usize,
    pub pi_omega: usize,
    pub junk: usize,
    pub omega: usize,
    pub marginal: bool,
    pub sketched: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiracDegreeRecord {
    pub degree: usize,
    pub words: usize,
    pub junk_words: usize,
    pub kernel_dim: usize,
    pub pi_omega: usize,
    pub junk: usize,
    pub omega: usize,
    pub stabilized: bool,
    pub marginal: bool,
    pub rerun_level: Option<usize>,
    pub levels: Vec<DiracLevelRow>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiracSection {
    pub budget: String,
    pub degrees: Vec<DiracDegreeRecord>,
}

impl DiracSection {
    pub fn omegas(&self) -> Vec<usize> {
        self.degrees.iter().map(|d| d.omega).collect()
    }
}

impl From<&DiracDgaReport> for DiracSection {
    fn from(r: &DiracDgaReport) -> Self {
        Self {
            budget: fmt_budget(&r.budget),
            degrees: r
                .degrees
                .iter()
                .map(|d| DiracDegreeRecord {
                    degree: d.degree,
                    words: d.words,
                    junk_words: d.junk_words,
                    kernel_dim: d.kernel_dim,
                    pi_omega: d.pi_omega,
                    junk: d.junk,
                    omega: d.omega,
                    stabilized: d.stabilized,
                    marginal: d.marginal,
                    rerun_level: d.rerun_level,
                    levels: d
                        .per_level
                        .iter()
                        .map(|l| DiracLevelRow {
                            level: l.level,
                            pi_omega: l.pi_omega,
                            junk: l.junk,
                            omega: l.omega,
                            marginal: l.marginal,
                            sketched: l.sketched,
                        })
                        .collect(),
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TheoremSection {
    pub base_omega1: usize,
    pub base_algebra: usize,
    pub index_cap: usize,
    pub laurent_cap: usize,
    pub predicted: usize,
    pub realized: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DifferentialSection {
    pub samples: usize,
    /// Largest relative residual of `δ⁰x` against `[D, x]`.
    pub max_formula_residual: String,
    /// Largest relative norm of `δ¹δ⁰x`.
    pub max_square_residual: String,
    pub failures: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BaseCohomologyRecord {
    pub dim_algebra: usize,
    pub rank_d0: usize,
    pub h0: usize,
    pub dim_omega1: usize,
    pub ker_d1: usize,
    pub h1: usize,
}

impl From<&BaseCohomology> for BaseCohomologyRecord {
    fn from(b: &BaseCohomology) -> Self {
        Self {
            dim_algebra: b.dim_algebra,
            rank_d0: b.rank_d0,
            h0: b.h0,
            dim_omega1: b.dim_omega1,
            ker_d1: b.ker_d1,
            h1: b.h1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CohomologyRowRecord {
    pub degree: usize,
    pub realized: usize,
    pub predicted: usize,
    pub stabilized: bool,
    pub levels: Vec<(usize, usize)>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CohomologySection {
    pub base: BaseCohomologyRecord,
    pub rows: Vec<CohomologyRowRecord>,
}

impl From<&CohomologyReport> for CohomologySection {
    fn from(r: &CohomologyReport) -> Self {
        Self {
            base: (&r.base).into(),
            rows: r
                .rows
                .iter()
                .map(|x| CohomologyRowRecord {
                    degree: x.degree,
                    realized: x.realized,
                    predicted: x.predicted,
                    stabilized: x.stabilized,
                    levels: x.per_level.clone(),
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FgrDegreeRecord {
    pub degree: usize,
    pub words: usize,
    pub reduced: bool,
    pub gram_rank: usize,
    pub kernel_dim: usize,
    pub dk_rank: usize,
    pub k_plus_dk: usize,
    pub omega_full: usize,
    pub targets: usize,
    pub omega: usize,
    pub marginal: usize,
    pub min_eigenvalue: String,
    pub max_eigenvalue: String,
    pub threshold: String,
    pub gram_error: String,
}

/// Degree-0 kernel membership of finite-part and pure-Laurent words.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct K0Record {
    pub finite_words: usize,
    pub finite_max_seminorm: String,
    pub laurent_words: usize,
    pub laurent_min_eigenvalue: String,
    pub threshold: String,
    pub contains_finite: bool,
    pub excludes_laurent: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FgrSection {
    pub budget: String,
    pub t_values: Vec<String>,
    pub ratio: String,
    pub order: usize,
    pub k_tol: String,
    pub refined: bool,
    pub marginal: usize,
    pub degrees: Vec<FgrDegreeRecord>,
    pub k0: Option<K0Record>,
}

impl FgrSection {
    pub fn omegas(&self) -> Vec<usize> {
        self.degrees.iter().map(|d| d.omega).collect()
    }
}

impl From<&KSpaceReport> for FgrSection {
    fn from(r: &KSpaceReport) -> Self {
        Self {
            budget: fmt_budget(&r.budget),
            t_values: r.schedule.t_values.iter().map(|&t| fmt_f64(t)).collect(),
            ratio: fmt_f64(r.schedule.ratio),
            order: r.schedule.order,
            k_tol: fmt_f64(r.k_tol),
            refined: r.refined,
            marginal: r.marginal(),
            degrees: r
                .degrees
                .iter()
                .map(|d| FgrDegreeRecord {
                    degree: d.degree,
                    words: d.words.len(),
                    reduced: d.reduced,
                    gram_rank: d.gram_rank,
                    kernel_dim: d.kernel_dim(),
                    dk_rank: d.dk_rank,
                    k_plus_dk: d.k_plus_dk,
                    omega_full: d.omega_full,
                    targets: d.targets,
                    omega: d.omega,
                    marginal: d.marginal,
                    min_eigenvalue: fmt_f64(d.min_eigenvalue),
                    max_eigenvalue: fmt_f64(d.max_eigenvalue),
                    threshold: fmt_f64(d.threshold),
                    gram_error: fmt_f64(d.gram_error),
                })
                .collect(),
            k0: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrossTermRecord {
    pub sample: String,
    pub value: LimitRecord,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrossTermSection {
    pub threshold: String,
    pub rows: Vec<CrossTermRecord>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummabilitySection {
    pub level: Vec<usize>,
    pub p: String,
    pub intercept: String,
    pub residual: String,
    pub points: Vec<(String, String)>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeatIdentitySection {
    pub limit: LimitRecord,
    pub t_values: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComparisonRowRecord {
    pub degree: usize,
    pub dirac: Vec<Option<usize>>,
    pub fgr: Vec<Option<usize>>,
    pub fgr_constant: bool,
    pub dirac_varies: bool,
    pub flagged: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComparisonSection {
    pub bases: Vec<String>,
    pub rows: Vec<ComparisonRowRecord>,
    pub verdict: String,
}

impl From<&ComparisonReport> for ComparisonSection {
    fn from(r: &ComparisonReport) -> Self {
        Self {
            bases: r.bases.clone(),
            rows: r
                .rows
                .iter()
                .map(|x| ComparisonRowRecord {
                    degree: x.degree,
                    dirac: x.dirac.clone(),
                    fgr: x.fgr.clone(),
                    fgr_constant: x.fgr_constant,
                    dirac_varies: x.dirac_varies,
                    flagged: x.flagged,
                })
                .collect(),
            verdict: r.verdict.clone(),
        }
    }
}
