use std::path::Path;
use std::sync::Arc;

use evalexpr::{ContextWithMutableVariables, HashMapContext, Node, Value};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use spectral_dga_core::fgr::{bind_level, FgrOptions, HeatSchedule};
use spectral_dga_core::forms::{check_dirac_windows, DiracOptions};
use spectral_dga_core::qds::{suspend_triple, Budget, SuspensionBudget, Triple};
use spectral_dga_core::triple::{
    make_circle_triple, make_diagonal_triple, make_two_point_triple, BandedGenerator, Layout, SignConvention,
};
use spectral_dga_core::C64;

use crate::bundled;
use crate::error::{HarnessError, Result};

/// One declarative run: a base triple, its suspensions, budgets, levels and
/// which stages and checks to execute.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub levels: Vec<usize>,
    pub base: BaseSpec,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub suspension: Vec<SuspensionSpec>,
    pub budget: BudgetSpec,
    #[serde(default)]
    pub heat: HeatSpec,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub stages: Stages,
    #[serde(default)]
    pub expect: Expectations,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BaseSpec {
    Circle {
        fourier_cutoff: usize,
        degree_cap: usize,
    },
    TwoPoint,
    /// Diagonal Dirac `n ↦ spectrum(n)` with banded generators.
    Diagonal {
        name: String,
        layout: LayoutSpec,
        spectrum: String,
        p: f64,
        #[serde(default)]
        sign_zero: SignSpec,
        generators: Vec<GeneratorSpec>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LayoutSpec {
    Symmetric,
    Natural,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignSpec {
    #[default]
    Plus,
    Minus,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub symbol: String,
    pub offset: i64,
    /// Real part of the band entry as an expression in the mode index `n`.
    #[serde(default = "default_entry")]
    pub entry: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entry_im: Option<String>,
    #[serde(default = "one_u32")]
    pub degree: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adjoint: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuspensionSpec {
    pub inner_cutoff: usize,
    /// Matrix units `e_ij` with `i, j < index_cap` enter the word budget.
    pub index_cap: usize,
    pub laurent_cap: usize,
    /// Matrix units available as generators; defaults to `index_cap`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator_cap: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetSpec {
    pub base_degree: u32,
    pub max_degree: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fgr_max_degree: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeatSpec {
    pub t0: f64,
    pub ratio: f64,
    pub nodes: usize,
    pub order: usize,
    pub max_factor_dim: usize,
    pub k_tol: f64,
    /// Values of `t` for the log-log summability fit.
    pub summability_t: Vec<f64>,
}

impl Default for HeatSpec {
    fn default() -> Self {
        let f = FgrOptions::default();
        Self {
            t0: f.schedule.t_values[0],
            ratio: f.schedule.ratio,
            nodes: f.schedule.t_values.len(),
            order: f.schedule.order,
            max_factor_dim: f.max_factor_dim,
            k_tol: f.k_tol,
            summability_t: vec![0.02, 0.01, 0.005, 0.0025],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub rank: f64,
    /// Relative bound on `|∮ F π(ω)|` for sampled `ω`.
    pub cross_term: f64,
    /// Relative bound on the differential identities.
    pub differential: f64,
    /// Relative deviation allowed for the summability exponent.
    pub summability: f64,
    /// Relative deviation allowed for `∮ 1`.
    pub heat_identity: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rank: 1e-9,
            cross_term: 1e-6,
            differential: 1e-10,
            summability: 0.05,
            heat_identity: 0.01,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Stages {
    pub dirac: bool,
    /// `dim Ω¹ = dim Ω¹(A)·c² + dim A·c² + 2L + 1` for the outer suspension.
    pub theorem: bool,
    pub differentials: bool,
    pub differential_samples: usize,
    pub cohomology: bool,
    pub fgr: bool,
    pub cross_terms: bool,
    pub cross_term_samples: usize,
    pub summability: bool,
    pub heat_identity: bool,
}

impl Default for Stages {
    fn default() -> Self {
        Self {
            dirac: true,
            theorem: false,
            differentials: false,
            differential_samples: 50,
            cohomology: false,
            fgr: false,
            cross_terms: false,
            cross_term_samples: 20,
            summability: false,
            heat_identity: false,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Expectations {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dirac: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fgr: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h0: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub summability: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub heat_identity: Option<f64>,
    pub stabilized: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub formats: Vec<String>,
}

fn default_entry() -> String {
    "1".to_string()
}

fn one_u32() -> u32 {
    1
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| HarnessError::Validation(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| HarnessError::Report(e.to_string()))
    }

    /// Reads a file, or a bundled scenario when `spec` names one and no such
    /// file exists.
    pub fn load(spec: &str) -> Result<Self> {
        let path = Path::new(spec);
        if path.exists() {
            let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(spec, e))?;
            return Self::from_toml(&text);
        }
        match bundled::get(spec) {
            Some(text) => Self::from_toml(text),
            None => Err(HarnessError::Validation(format!(
                "`{spec}` is neither a file nor a bundled scenario"
            ))),
        }
    }

    /// SHA-256 of the canonical serialization.
    pub fn hash(&self) -> Result<String> {
        let canon = self.to_toml()?;
        let digest = Sha256::digest(canon.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }

    pub fn fgr_max_degree(&self) -> usize {
        self.budget.fgr_max_degree.unwrap_or(self.budget.max_degree)
    }

    pub fn word_budget(&self) -> Budget {
        Budget {
            base_degree: self.budget.base_degree,
            suspensions: self
                .suspension
                .iter()
                .map(|s| SuspensionBudget {
                    index_cap: s.index_cap,
                    laurent_cap: s.laurent_cap,
                })
                .collect(),
        }
    }

    pub fn schedule(&self) -> Result<HeatSchedule> {
        HeatSchedule::geometric(self.heat.t0, self.heat.ratio, self.heat.nodes, self.heat.order)
            .map_err(|e| HarnessError::Validation(format!("heat schedule: {e}")))
    }

    pub fn fgr_options(&self) -> Result<FgrOptions> {
        let mut o = FgrOptions::new(self.schedule()?);
        o.k_tol = self.heat.k_tol;
        o.max_factor_dim = self.heat.max_factor_dim;
        Ok(o)
    }

    pub fn dirac_options(&self) -> DiracOptions {
        let mut o = DiracOptions::new(self.levels.clone());
        o.tol = self.tolerances.rank;
        o
    }

    /// Builds the base triple without suspensions.
    pub fn base_triple(&self) -> Result<Triple> {
        let model = match &self.base {
            BaseSpec::Circle {
                fourier_cutoff,
                degree_cap,
            } => make_circle_triple(*fourier_cutoff, *degree_cap).map_err(invalid("base"))?,
            BaseSpec::TwoPoint => make_two_point_triple(),
            BaseSpec::Diagonal {
                name,
                layout,
                spectrum,
                p,
                sign_zero,
                generators,
            } => {
                let layout = match layout {
                    LayoutSpec::Symmetric => Layout::Symmetric,
                    LayoutSpec::Natural => Layout::Natural,
                };
                let spec = RealExpr::parse("spectrum", spectrum)?;
                let gens = generators
                    .iter()
                    .map(|g| {
                        let re = RealExpr::parse(&g.symbol, &g.entry)?;
                        let im = g.entry_im.as_deref().map(|e| RealExpr::parse(&g.symbol, e)).transpose()?;
                        Ok(BandedGenerator {
                            symbol: g.symbol.clone(),
                            offset: g.offset,
                            entry: Arc::new(move |n| C64::new(re.eval(n), im.as_ref().map_or(0.0, |e| e.eval(n)))),
                            degree: g.degree,
                            adjoint: g.adjoint.clone(),
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                let convention = match sign_zero {
                    SignSpec::Plus => SignConvention::Plus,
                    SignSpec::Minus => SignConvention::Minus,
                };
                make_diagonal_triple(name, layout, Arc::new(move |n| spec.eval(n)), gens, *p, convention)
            }
        };
        Ok(model.into())
    }

    /// The base triple suspended once per `[[suspension]]` entry.
    pub fn triple(&self) -> Result<Triple> {
        let mut t = self.base_triple()?;
        for (i, s) in self.suspension.iter().enumerate() {
            let cap = s.generator_cap.unwrap_or(s.index_cap);
            if s.index_cap > cap {
                return Err(HarnessError::Validation(format!(
                    "suspension {i}: index cap {} exceeds generator cap {cap}",
                    s.index_cap
                )));
            }
            t = suspend_triple(t, s.inner_cutoff, cap)
                .map_err(invalid(&format!("suspension {i}")))?
                .into();
        }
        Ok(t)
    }

    /// Checks every precondition of the enabled stages and returns the
    /// assembled triple.
    pub fn validate(&self, max_dim: usize) -> Result<Triple> {
        let fail = |m: String| Err(HarnessError::Validation(m));
        if self.name.trim().is_empty() {
            return fail("`name` must be nonempty".into());
        }
        if self.levels.is_empty() {
            return fail("`levels` must list at least one level".into());
        }
        if self.levels.windows(2).any(|w| w[0] >= w[1]) {
            return fail(format!("`levels` must be strictly increasing, got {:?}", self.levels));
        }
        if (self.stages.theorem || self.stages.differentials || self.stages.cross_terms) && self.suspension.is_empty() {
            return fail("theorem, differential and cross-term stages need a suspension".into());
        }
        if self.stages.fgr && self.suspension.is_empty() {
            return fail("the fgr stage needs a suspension".into());
        }
        if self.stages.theorem && self.budget.max_degree < 1 {
            return fail("the theorem stage needs max_degree ≥ 1".into());
        }
        let t = self.triple()?;
        let budget = self.word_budget();
        t.letters(&budget).map_err(invalid("budget"))?;
        for &l in &self.levels {
            let lvl = t.level(l);
            t.check_level(&lvl).map_err(invalid("levels"))?;
            let d = t.dim(&lvl);
            if d > max_dim {
                return fail(format!(
                    "ambient dimension {d} at level {l} exceeds the cap {max_dim} (raise --max-dim)"
                ));
            }
        }
        if self.stages.dirac || self.stages.theorem || self.stages.cohomology {
            let deg = if self.stages.dirac { self.budget.max_degree } else { 1 };
            check_dirac_windows(&t, deg, &budget, &self.dirac_options()).map_err(invalid("windows"))?;
        }
        if self.stages.theorem || self.stages.cohomology {
            if let Some(s) = t.suspension() {
                check_dirac_windows(&s.base, 1, &budget.inner(), &self.dirac_options())
                    .map_err(invalid("base windows"))?;
            }
        }
        let needs_heat = self.stages.fgr || self.stages.cross_terms || self.stages.heat_identity;
        if needs_heat {
            let sched = self.schedule()?;
            sched
                .bind(&t, 1, self.heat.max_factor_dim)
                .map_err(invalid("heat schedule"))?;
            if !(self.heat.k_tol > 0.0 && self.heat.k_tol < 1.0) {
                return fail(format!("k_tol must lie in (0, 1), got {}", self.heat.k_tol));
            }
        }
        if self.stages.summability {
            let ts = &self.heat.summability_t;
            if ts.len() < 2 || ts.iter().any(|&x| !(x > 0.0)) {
                return fail("summability_t needs at least two positive values".into());
            }
            let tmin = ts.iter().copied().fold(f64::INFINITY, f64::min);
            bind_level(&t, tmin, 1, self.heat.max_factor_dim).map_err(invalid("summability"))?;
        }
        for f in &self.output.formats {
            crate::report::Format::parse(f)?;
        }
        Ok(t)
    }
}

fn invalid(what: &str) -> impl Fn(spectral_dga_core::Error) -> HarnessError + '_ {
    move |e| HarnessError::Validation(format!("{what}: {e}"))
}

/// A real expression in the mode index `n`.
struct RealExpr {
    tree: Node,
}

impl RealExpr {
    fn parse(what: &str, text: &str) -> Result<Self> {
        let tree = evalexpr::build_operator_tree(text)
            .map_err(|e| HarnessError::Validation(format!("expression for `{what}`: {e}")))?;
        let me = Self { tree };
        for n in [-3i64, -1, 0, 1, 2, 7] {
            me.try_eval(n)
                .map_err(|e| HarnessError::Validation(format!("expression for `{what}` at n = {n}: {e}")))?;
        }
        Ok(me)
    }

    fn try_eval(&self, n: i64) -> std::result::Result<f64, String> {
        let mut ctx = HashMapContext::new();
        ctx.set_value("n".into(), Value::Float(n as f64)).map_err(|e| e.to_string())?;
        let v = self.tree.eval_number_with_context(&ctx).map_err(|e| e.to_string())?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(format!("non-finite value {v}"))
        }
    }

    fn eval(&self, n: i64) -> f64 {
        self.try_eval(n).unwrap_or(f64::NAN)
    }
}
