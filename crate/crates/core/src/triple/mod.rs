//! Truncated spectral triples `(A, H, D)` presented as level-indexed families
//! of matrices in an eigenbasis of `D`.

mod builtins;
mod checks;
mod morphism;

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

pub use builtins::{
    make_adversarial_triple, make_circle_triple, make_diagonal_triple, make_two_point_triple,
    BandedGenerator,
};
pub use checks::{condition_a_check, summability_estimate, ConditionAReport, SummabilityEstimate};
pub use morphism::{circle_flip_morphism, identity_morphism, verify_morphism, MorphismReport};

use crate::error::{Error, Result};
use crate::linalg::{SparseMatrix, C64};

pub type LevelRule = Arc<dyn Fn(usize) -> SparseMatrix + Send + Sync>;
pub type Spectrum = Arc<dyn Fn(i64) -> f64 + Send + Sync>;

/// A bounded operator given at every truncation level.
#[derive(Clone)]
pub struct TruncationFamily {
    pub symbol: String,
    pub rule: LevelRule,
    /// Upper bound on `|row - col|` for nonzero entries.
    pub bandwidth: usize,
    /// Weight used by word budgets.
    pub degree: u32,
    pub adjoint: Option<String>,
}

impl fmt::Debug for TruncationFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TruncationFamily")
            .field("symbol", &self.symbol)
            .field("bandwidth", &self.bandwidth)
            .field("degree", &self.degree)
            .finish()
    }
}

impl TruncationFamily {
    pub fn at(&self, level: usize) -> SparseMatrix {
        (self.rule)(level)
    }
}

/// How modes are laid out along the truncated Hilbert space.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Layout {
    /// Modes `-L..=L`, dimension `2L + 1`.
    Symmetric,
    /// Modes `0..L`, dimension `L`.
    Natural,
    /// A fixed finite-dimensional space; the level is ignored.
    Finite(usize),
}

impl Layout {
    pub fn dim(self, level: usize) -> usize {
        match self {
            Layout::Symmetric => 2 * level + 1,
            Layout::Natural => level,
            Layout::Finite(n) => n,
        }
    }

    pub fn mode(self, level: usize, index: usize) -> i64 {
        match self {
            Layout::Symmetric => index as i64 - level as i64,
            _ => index as i64,
        }
    }

    pub fn index(self, level: usize, mode: i64) -> Option<usize> {
        let i = match self {
            Layout::Symmetric => mode + level as i64,
            _ => mode,
        };
        (i >= 0 && (i as usize) < self.dim(level)).then_some(i as usize)
    }

    /// Index shift embedding level `lower` into level `upper`.
    pub fn offset(self, lower: usize, upper: usize) -> usize {
        match self {
            Layout::Symmetric => upper - lower,
            _ => 0,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Layout::Finite(_))
    }
}

/// Value of `sign(0)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SignConvention {
    Plus,
    Minus,
}

impl SignConvention {
    pub fn value(self) -> f64 {
        match self {
            SignConvention::Plus => 1.0,
            SignConvention::Minus => -1.0,
        }
    }
}

pub fn sign_of(eigenvalues: &[f64], convention: SignConvention) -> Vec<f64> {
    eigenvalues
        .iter()
        .map(|&x| {
            if x > 0.0 {
                1.0
            } else if x < 0.0 {
                -1.0
            } else {
                convention.value()
            }
        })
        .collect()
}

/// A truncated spectral triple, `D` diagonal in the chosen basis.
#[derive(Clone)]
pub struct SpectralTripleModel {
    pub name: String,
    pub layout: Layout,
    pub generators: Vec<TruncationFamily>,
    pub spectrum: Spectrum,
    pub p: f64,
    pub grading: Option<TruncationFamily>,
    pub sign_zero_convention: SignConvention,
    /// Level at which budget preconditions were checked.
    pub reference_level: usize,
}

impl fmt::Debug for SpectralTripleModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralTripleModel")
            .field("name", &self.name)
            .field("layout", &self.layout)
            .field("generators", &self.generators)
            .field("p", &self.p)
            .finish()
    }
}

impl SpectralTripleModel {
    pub fn dim(&self, level: usize) -> usize {
        self.layout.dim(level)
    }

    pub fn is_finite(&self) -> bool {
        self.layout.is_finite()
    }

    pub fn validate_level(&self, level: usize) -> Result<()> {
        if self.dim(level) == 0 {
            return Err(Error::InvalidLevel {
                level,
                reason: format!("`{}` has dimension zero at this level", self.name),
            });
        }
        Ok(())
    }

    pub fn eigenvalues(&self, level: usize) -> Vec<f64> {
        (0..self.dim(level))
            .map(|i| (self.spectrum)(self.layout.mode(level, i)))
            .collect()
    }

    pub fn abs_eigenvalues(&self, level: usize) -> Vec<f64> {
        self.eigenvalues(level).into_iter().map(f64::abs).collect()
    }

    pub fn sign_diag(&self, level: usize) -> Vec<f64> {
        sign_of(&self.eigenvalues(level), self.sign_zero_convention)
    }

    pub fn dirac(&self, level: usize) -> SparseMatrix {
        SparseMatrix::diagonal_real(&self.eigenvalues(level))
    }

    pub fn sign(&self, level: usize) -> SparseMatrix {
        SparseMatrix::diagonal_real(&self.sign_diag(level))
    }

    pub fn dirac_family(&self) -> TruncationFamily {
        let spectrum = self.spectrum.clone();
        let layout = self.layout;
        TruncationFamily {
            symbol: String::from("D"),
            rule: Arc::new(move |level| {
                let d: Vec<f64> = (0..layout.dim(level)).map(|i| spectrum(layout.mode(level, i))).collect();
                SparseMatrix::diagonal_real(&d)
            }),
            bandwidth: 0,
            degree: 0,
            adjoint: Some(String::from("D")),
        }
    }

    pub fn has_kernel(&self, level: usize) -> bool {
        self.eigenvalues(level).iter().any(|&x| x == 0.0)
    }

    pub fn generator_index(&self, symbol: &str) -> Option<usize> {
        self.generators.iter().position(|g| g.symbol == symbol)
    }

    pub fn generator(&self, index: usize, level: usize) -> SparseMatrix {
        self.generators[index].at(level)
    }

    /// Rows at distance at least `margin` from the truncation edges.
    pub fn interior(&self, level: usize, margin: usize) -> Vec<bool> {
        let n = self.dim(level);
        if self.is_finite() {
            return alloc::vec![true; n];
        }
        let lo_edge = matches!(self.layout, Layout::Symmetric);
        (0..n)
            .map(|i| (!lo_edge || i >= margin) && i + margin < n)
            .collect()
    }

    /// Checks that every generator at `lower` is the interior compression of
    /// the same generator at `upper`.
    pub fn check_coherence(&self, lower: usize, upper: usize) -> Result<()> {
        if self.is_finite() {
            return Ok(());
        }
        let off = self.layout.offset(lower, upper);
        for g in &self.generators {
            let (a, b) = (g.at(lower), g.at(upper));
            let n = self.dim(lower);
            let w = g.bandwidth;
            let inner = |i: usize| i >= w && i + w < n;
            for i in (0..n).filter(|&i| inner(i)) {
                for j in (0..n).filter(|&j| inner(j)) {
                    if (a.get(i, j) - b.get(i + off, j + off)).norm() > 1e-12 {
                        return Err(Error::IncoherentFamily {
                            symbol: g.symbol.clone(),
                            lower,
                            upper,
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

/// An algebra map on generator symbols with a unitary intertwiner between the
/// two Hilbert spaces.
#[derive(Clone)]
pub struct MorphismModel {
    pub source: SpectralTripleModel,
    pub target: SpectralTripleModel,
    /// Image of each source generator as a linear combination of target
    /// generators (index, coefficient).
    pub phi: Vec<Vec<(usize, C64)>>,
    pub intertwiner: LevelRule,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sign_convention_applies_to_kernel_only() {
        assert_eq!(sign_of(&[-2.0, 0.0, 3.0], SignConvention::Plus), alloc::vec![-1.0, 1.0, 1.0]);
        assert_eq!(sign_of(&[-2.0, 0.0, 3.0], SignConvention::Minus), alloc::vec![-1.0, -1.0, 1.0]);
    }

    #[test]
    fn symmetric_layout_round_trips() {
        let l = Layout::Symmetric;
        for i in 0..l.dim(5) {
            assert_eq!(l.index(5, l.mode(5, i)), Some(i));
        }
        assert_eq!(l.index(5, 6), None);
        assert_eq!(l.offset(5, 8), 3);
    }
}
