use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;

use super::{Layout, SignConvention, Spectrum, SpectralTripleModel, TruncationFamily};
use crate::error::{Error, Result};
use crate::linalg::{re, SparseMatrix, C64};

/// A generator acting as `a e_n = entry(n) e_{n + offset}` on modes.
#[derive(Clone)]
pub struct BandedGenerator {
    pub symbol: String,
    pub offset: i64,
    pub entry: Arc<dyn Fn(i64) -> C64 + Send + Sync>,
    pub degree: u32,
    pub adjoint: Option<String>,
}

fn banded_family(layout: Layout, g: BandedGenerator) -> TruncationFamily {
    let BandedGenerator {
        symbol,
        offset,
        entry,
        degree,
        adjoint,
    } = g;
    TruncationFamily {
        symbol,
        bandwidth: offset.unsigned_abs() as usize,
        degree,
        adjoint,
        rule: Arc::new(move |level| {
            let n = layout.dim(level);
            let t = (0..n).filter_map(|j| {
                let m = layout.mode(level, j);
                let i = layout.index(level, m + offset)?;
                Some((i, j, entry(m)))
            });
            SparseMatrix::from_triplets(n, n, t)
        }),
    }
}

/// The circle: `A` spanned by `z^k` acting on `l^2(Z)` by shifts, `D = diag(n)`.
/// Levels are Fourier cutoffs.
pub fn make_circle_triple(fourier_cutoff: usize, degree_cap: usize) -> Result<SpectralTripleModel> {
    if fourier_cutoff == 0 {
        return Err(Error::InvalidLevel {
            level: 0,
            reason: "Fourier cutoff must be positive".to_string(),
        });
    }
    if 4 * degree_cap > fourier_cutoff {
        return Err(Error::BudgetExceedsTruncation(format!(
            "degree cap {degree_cap} exceeds a quarter of the Fourier cutoff {fourier_cutoff}"
        )));
    }
    let layout = Layout::Symmetric;
    let mut generators = Vec::new();
    for k in (-(degree_cap as i64)..=degree_cap as i64).filter(|&k| k != 0) {
        generators.push(banded_family(
            layout,
            BandedGenerator {
                symbol: format!("z^{k}"),
                offset: k,
                entry: Arc::new(|_| re(1.0)),
                degree: k.unsigned_abs() as u32,
                adjoint: Some(format!("z^{}", -k)),
            },
        ));
    }
    Ok(SpectralTripleModel {
        name: "circle".to_string(),
        layout,
        generators,
        spectrum: Arc::new(|n| n as f64),
        p: 1.0,
        grading: None,
        sign_zero_convention: SignConvention::Plus,
        reference_level: fourier_cutoff,
    })
}

/// Two points: `C^2` acting on `C^2`, written in the eigenbasis of
/// `D = diag(1, -1)`. The generator `p` is the projection onto the first point.
pub fn make_two_point_triple() -> SpectralTripleModel {
    let p = SparseMatrix::from_triplets(2, 2, [(0, 0, re(0.5)), (0, 1, re(0.5)), (1, 0, re(0.5)), (1, 1, re(0.5))]);
    let gamma = SparseMatrix::from_triplets(2, 2, [(0, 1, re(1.0)), (1, 0, re(1.0))]);
    SpectralTripleModel {
        name: "two-point".to_string(),
        layout: Layout::Finite(2),
        generators: alloc::vec![TruncationFamily {
            symbol: "p".to_string(),
            rule: Arc::new(move |_| p.clone()),
            bandwidth: 1,
            degree: 1,
            adjoint: Some("p".to_string()),
        }],
        spectrum: Arc::new(|m| if m == 0 { 1.0 } else { -1.0 }),
        p: 0.0,
        grading: Some(TruncationFamily {
            symbol: "gamma".to_string(),
            rule: Arc::new(move |_| gamma.clone()),
            bandwidth: 1,
            degree: 0,
            adjoint: Some("gamma".to_string()),
        }),
        sign_zero_convention: SignConvention::Plus,
        reference_level: 0,
    }
}

/// A triple with diagonal `D` given by `spectrum(mode)` and banded generators.
pub fn make_diagonal_triple(
    name: &str,
    layout: Layout,
    spectrum: Spectrum,
    generators: Vec<BandedGenerator>,
    p: f64,
    convention: SignConvention,
) -> SpectralTripleModel {
    SpectralTripleModel {
        name: name.to_string(),
        layout,
        generators: generators.into_iter().map(|g| banded_family(layout, g)).collect(),
        spectrum,
        p,
        grading: None,
        sign_zero_convention: convention,
        reference_level: 0,
    }
}

/// `D = diag((-1)^n (n + 1))` on `l^2(N)` with the unilateral shift: the sign
/// flips at every mode, so `[[D, a], F]` grows with the level.
pub fn make_adversarial_triple() -> SpectralTripleModel {
    make_diagonal_triple(
        "alternating",
        Layout::Natural,
        Arc::new(|n| if n % 2 == 0 { (n + 1) as f64 } else { -((n + 1) as f64) }),
        alloc::vec![BandedGenerator {
            symbol: "s".to_string(),
            offset: 1,
            entry: Arc::new(|_| re(1.0)),
            degree: 1,
            adjoint: None,
        }],
        1.0,
        SignConvention::Plus,
    )
}
