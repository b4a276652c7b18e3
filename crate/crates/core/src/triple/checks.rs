use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::SpectralTripleModel;
use crate::error::{Error, Result};
use crate::fgr::check_tail;
use crate::qds::{TowerLevel, Triple};

#[derive(Clone, Debug, PartialEq)]
pub struct SummabilityEstimate {
    pub p: f64,
    pub intercept: f64,
    /// Root mean square residual of the log-log fit.
    pub residual: f64,
    /// `(t, Tr e^{−t|D|})` per node.
    pub points: Vec<(f64, f64)>,
}

/// Least-squares fit of `log Tr(e^{−t|D|}) ≈ −p log t + c` at a fixed level,
/// using the per-factor product form of the trace.
pub fn summability_estimate(triple: &Triple, t_values: &[f64], level: &TowerLevel) -> Result<SummabilityEstimate> {
    if t_values.len() < 2 {
        return Err(Error::Invalid(String::from("summability fit needs at least two values of t")));
    }
    triple.check_level(level)?;
    let factors = triple.abs_factors(level);
    let mut points = Vec::with_capacity(t_values.len());
    for &t in t_values {
        check_tail(triple, level, t, 1)?;
        let tr: f64 = factors
            .iter()
            .map(|f| f.iter().map(|&l| libm::exp(-t * l)).sum::<f64>())
            .product();
        points.push((t, tr));
    }
    let xs: Vec<f64> = points.iter().map(|p| libm::log(p.0)).collect();
    let ys: Vec<f64> = points.iter().map(|p| libm::log(p.1)).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = libm::sqrt(
        xs.iter()
            .zip(&ys)
            .map(|(x, y)| {
                let r = y - (slope * x + intercept);
                r * r
            })
            .sum::<f64>()
            / n,
    );
    Ok(SummabilityEstimate {
        p: -slope,
        intercept,
        residual,
        points,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConditionAReport {
    pub symbol: String,
    pub levels: Vec<usize>,
    /// Rank kept when measuring tails, from the smallest level.
    pub rank: usize,
    /// Largest singular value of `X_L` per level.
    pub norms: Vec<f64>,
    /// `‖X_L − best rank-r approximation‖` per level.
    pub tails: Vec<f64>,
    pub pass: bool,
    pub verdict: String,
}

/// Compactness surrogate for `X = [D, a]F − F[D, a]`: tails beyond a fixed
/// rank must shrink across levels or vanish.
pub fn condition_a_check(model: &SpectralTripleModel, symbol: &str, levels: &[usize]) -> Result<ConditionAReport> {
    if levels.len() < 3 {
        return Err(Error::Invalid(String::from("condition A check needs at least three levels")));
    }
    let g = model
        .generator_index(symbol)
        .ok_or_else(|| Error::Invalid(format!("`{}` has no generator `{symbol}`", model.name)))?;
    let mut ls = levels.to_vec();
    ls.sort_unstable();
    let mut svs = Vec::with_capacity(ls.len());
    for &l in &ls {
        model.validate_level(l)?;
        let d = model.dirac(l);
        let f = model.sign(l);
        let da = d.commutator(&model.generator(g, l));
        let x = da.mul(&f).sub(&f.mul(&da)).to_dense();
        let mut s: Vec<f64> = x.singular_values().iter().copied().collect();
        s.sort_by(|a, b| b.total_cmp(a));
        svs.push(s);
    }
    let first = &svs[0];
    let smax0 = first.first().copied().unwrap_or(0.0);
    let rank0 = first.iter().filter(|&&s| s > 1e-10 * smax0.max(1.0)).count();
    let rank = rank0.min(model.dim(ls[0]) / 2);
    let tails: Vec<f64> = svs
        .iter()
        .map(|s| libm::sqrt(s.iter().skip(rank).map(|x| x * x).sum::<f64>()))
        .collect();
    let norms: Vec<f64> = svs.iter().map(|s| s.first().copied().unwrap_or(0.0)).collect();
    let scale = norms.iter().copied().fold(1.0, f64::max);
    let small = tails.iter().all(|&t| t <= 1e-10 * scale);
    let decreasing = tails.windows(2).all(|w| w[1] < w[0]);
    let pass = small || decreasing;
    Ok(ConditionAReport {
        symbol: String::from(symbol),
        levels: ls,
        rank,
        norms,
        tails,
        pass,
        verdict: String::from(if pass {
            "compact-surrogate: pass"
        } else {
            "compact-surrogate: fail"
        }),
    })
}
