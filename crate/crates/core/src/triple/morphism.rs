use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use alloc::sync::Arc;

use super::{make_circle_triple, MorphismModel, SpectralTripleModel};
use crate::error::Result;
use crate::forms::{enumerate_words_over, Evaluator, FormExpr, FormWord};
use crate::linalg::{SparseMatrix, C64};
use crate::qds::{Letter, TowerLevel, Triple};

/// Residuals of the morphism relations, worst over the checked levels.
#[derive(Clone, Debug, PartialEq)]
pub struct MorphismReport {
    pub unitary_residual: f64,
    pub dirac_residual: f64,
    pub word_residual: f64,
    pub words_checked: usize,
    /// Names of violated relations; empty on success.
    pub failures: Vec<String>,
}

impl MorphismReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

fn image(m: &MorphismModel, w: &FormWord) -> FormExpr {
    let mut partial: Vec<(C64, Vec<Letter>)> = vec![(w.coeff, Vec::new())];
    for l in &w.letters {
        let opts: Vec<(Letter, C64)> = match l {
            Letter::Gen(g) => m.phi[*g as usize]
                .iter()
                .map(|&(t, c)| (Letter::Gen(t as u16), c))
                .collect(),
            other => vec![(other.clone(), C64::new(1.0, 0.0))],
        };
        let mut next = Vec::with_capacity(partial.len() * opts.len());
        for (c, ls) in &partial {
            for (t, ct) in &opts {
                let mut v = ls.clone();
                v.push(t.clone());
                next.push((c * ct, v));
            }
        }
        partial = next;
    }
    FormExpr {
        degree: w.degree(),
        terms: partial
            .into_iter()
            .map(|(coeff, letters)| FormWord { coeff, letters })
            .collect(),
    }
    .normalize()
}

fn windowed_residual(a: &SparseMatrix, b: &SparseMatrix, keep: &[bool]) -> f64 {
    a.sub(b).restrict_rows(|r| keep[r]).max_abs()
}

/// Checks that `Φ` is unitary, `Φ D₁ = D₂ Φ`, and
/// `Φ π₁(w) Φ* = π₂(φ(w))` for every word of degree at most 2 over the
/// source generators, on the exact interior rows.
pub fn verify_morphism(m: &MorphismModel, levels: &[usize], tol: f64) -> Result<MorphismReport> {
    let src: Triple = m.source.clone().into();
    let tgt: Triple = m.target.clone().into();
    let letters: Vec<Letter> = (0..m.source.generators.len()).map(|g| Letter::Gen(g as u16)).collect();
    let mut words = Vec::new();
    for k in 0..=2 {
        words.extend(enumerate_words_over(&letters, k, u128::MAX)?);
    }
    let reach = m
        .source
        .generators
        .iter()
        .chain(&m.target.generators)
        .map(|g| g.bandwidth)
        .max()
        .unwrap_or(0);
    let mut rep = MorphismReport {
        unitary_residual: 0.0,
        dirac_residual: 0.0,
        word_residual: 0.0,
        words_checked: 0,
        failures: Vec::new(),
    };
    for &l in levels {
        let lvl = TowerLevel::leaf(l);
        src.check_level(&lvl)?;
        tgt.check_level(&lvl)?;
        let u = (m.intertwiner)(l);
        let ut = u.adjoint();
        let n = u.nrows();
        rep.unitary_residual = rep
            .unitary_residual
            .max(u.mul(&ut).sub(&SparseMatrix::identity(n)).max_abs());
        let all = vec![true; n];
        let d = windowed_residual(&u.mul(&m.source.dirac(l)), &m.target.dirac(l).mul(&u), &all);
        rep.dirac_residual = rep.dirac_residual.max(d);
        let keep = m.target.interior(l, 3 * reach);
        let mut es = Evaluator::new(&src, lvl.clone())?;
        let mut et = Evaluator::new(&tgt, lvl)?;
        for w in &words {
            let lhs = u.mul(&es.word(w)?.to_sparse()).mul(&ut);
            let rhs = et.expr(&image(m, w))?.to_sparse();
            rep.word_residual = rep.word_residual.max(windowed_residual(&lhs, &rhs, &keep));
            rep.words_checked += 1;
        }
    }
    if rep.unitary_residual > tol {
        rep.failures.push(format!("Φ is not unitary (residual {:.3e})", rep.unitary_residual));
    }
    if rep.dirac_residual > tol {
        rep.failures.push(format!("Φ D₁ ≠ D₂ Φ (residual {:.3e})", rep.dirac_residual));
    }
    if rep.word_residual > tol {
        rep.failures.push(format!(
            "Φ π₁(w) Φ* ≠ π₂(φ(w)) (residual {:.3e})",
            rep.word_residual
        ));
    }
    Ok(rep)
}

/// The identity morphism of a triple.
pub fn identity_morphism(model: &SpectralTripleModel) -> MorphismModel {
    let layout = model.layout;
    MorphismModel {
        source: model.clone(),
        target: model.clone(),
        phi: (0..model.generators.len())
            .map(|g| vec![(g, C64::new(1.0, 0.0))])
            .collect(),
        intertwiner: Arc::new(move |l| SparseMatrix::identity(layout.dim(l))),
    }
}

/// Mode reversal `e_n ↦ e_{−n}` from the circle to the circle with
/// `D = diag(−n)`, with `z^k ↦ z^{−k}`.
pub fn circle_flip_morphism(fourier_cutoff: usize, degree_cap: usize) -> Result<MorphismModel> {
    let source = make_circle_triple(fourier_cutoff, degree_cap)?;
    let mut target = source.clone();
    target.name = String::from("circle-reversed");
    target.spectrum = Arc::new(|n| -(n as f64));
    let g = source.generators.len();
    Ok(MorphismModel {
        source,
        target,
        phi: (0..g).map(|i| vec![(g - 1 - i, C64::new(1.0, 0.0))]).collect(),
        intertwiner: Arc::new(|l| {
            let n = 2 * l + 1;
            SparseMatrix::from_triplets(n, n, (0..n).map(|i| (n - 1 - i, i, C64::new(1.0, 0.0))))
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_and_flip_pass() {
        let c = make_circle_triple(12, 2).unwrap();
        let r = verify_morphism(&identity_morphism(&c), &[12, 16], 1e-10).unwrap();
        assert!(r.passed(), "{r:?}");
        let r = verify_morphism(&circle_flip_morphism(12, 2).unwrap(), &[12, 16], 1e-10).unwrap();
        assert!(r.passed(), "{r:?}");
        assert!(r.words_checked > 100);
    }

    #[test]
    fn wrong_dirac_fails_by_name() {
        let mut m = circle_flip_morphism(12, 2).unwrap();
        m.target.spectrum = Arc::new(|n| n as f64);
        let r = verify_morphism(&m, &[12], 1e-10).unwrap();
        assert!(!r.passed());
        assert!(r.failures.iter().any(|f| f.contains("D₁")));
    }
}
