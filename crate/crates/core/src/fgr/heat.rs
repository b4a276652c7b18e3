use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::qds::{TensorOp, TowerLevel, Triple};
use crate::triple::Layout;

/// Relative size of the discarded spectral tail.
pub const TAIL_TOL: f64 = 1e-12;

/// Geometric nodes `t_k = t₀ · ratio^{−k}` and a Richardson order.
#[derive(Clone, Debug, PartialEq)]
pub struct HeatSchedule {
    pub t_values: Vec<f64>,
    pub ratio: f64,
    pub order: usize,
}

impl HeatSchedule {
    pub fn geometric(t0: f64, ratio: f64, nodes: usize, order: usize) -> Result<Self> {
        if !(t0 > 0.0) || !(ratio > 1.0) {
            return Err(Error::Invalid(format!(
                "heat schedule needs t0 > 0 and ratio > 1, got t0 = {t0}, ratio = {ratio}"
            )));
        }
        let t_values = (0..nodes).map(|k| t0 / libm::pow(ratio, k as f64)).collect();
        Self::new(t_values, order)
    }

    /// Validates positivity, strict decrease, constant ratio and
    /// `len ≥ order + 2`.
    pub fn new(t_values: Vec<f64>, order: usize) -> Result<Self> {
        if t_values.len() < order + 2 {
            return Err(Error::Invalid(format!(
                "{} node(s) cannot support Richardson order {order}; need at least {}",
                t_values.len(),
                order + 2
            )));
        }
        if t_values.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
            return Err(Error::Invalid(String::from("heat schedule values must be positive")));
        }
        let ratio = t_values[0] / t_values[1];
        for w in t_values.windows(2) {
            if !(w[1] < w[0]) {
                return Err(Error::Invalid(String::from("heat schedule must be strictly decreasing")));
            }
            if (w[0] / w[1] - ratio).abs() > 1e-9 * ratio {
                return Err(Error::Invalid(String::from("heat schedule must be geometric")));
            }
        }
        Ok(Self { t_values, ratio, order })
    }

    /// One more node below the smallest.
    pub fn refine(&self) -> Self {
        let mut t = self.t_values.clone();
        t.push(t.last().unwrap() / self.ratio);
        Self {
            t_values: t,
            ratio: self.ratio,
            order: self.order,
        }
    }

    pub fn t_min(&self) -> f64 {
        *self.t_values.last().unwrap()
    }

    /// Smallest tower level per node meeting the tail criterion for
    /// `e^{−t|D|^power}` in every factor.
    pub fn bind(&self, triple: &Triple, power: u32, max_factor_dim: usize) -> Result<Vec<TowerLevel>> {
        self.t_values
            .iter()
            .map(|&t| bind_level(triple, t, power, max_factor_dim))
            .collect()
    }
}

fn weight(t: f64, lambda: f64, power: u32) -> f64 {
    libm::exp(-t * libm::pow(lambda, power as f64))
}

/// `e^{−t λ_max^power} · dim < TAIL_TOL · Σ e^{−t λ^power}`.
pub fn tail_ok(abs_eigs: &[f64], t: f64, power: u32) -> bool {
    let lmax = abs_eigs.iter().copied().fold(0.0, f64::max);
    let tr: f64 = abs_eigs.iter().map(|&l| weight(t, l, power)).sum();
    weight(t, lmax, power) * (abs_eigs.len() as f64) < TAIL_TOL * tr
}

fn inner_ok(k: usize, t: f64, power: u32) -> bool {
    let e: Vec<f64> = (0..k).map(|m| m as f64).collect();
    tail_ok(&e, t, power)
}

fn search(lo: usize, max: usize, ok: impl Fn(usize) -> bool, what: &str) -> Result<usize> {
    let mut hi = lo.max(1);
    while !ok(hi) {
        if hi >= max {
            return Err(Error::InsufficientTruncation(format!(
                "{what}: tail criterion not met up to size {max}"
            )));
        }
        hi = (hi * 2).min(max);
    }
    let mut lo = lo.min(hi);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(hi)
}

pub fn bind_level(triple: &Triple, t: f64, power: u32, max_factor_dim: usize) -> Result<TowerLevel> {
    let leaf = triple.leaf();
    let base = match leaf.layout {
        Layout::Finite(_) => leaf.reference_level,
        layout => {
            let max_level = match layout {
                Layout::Symmetric => max_factor_dim.saturating_sub(1) / 2,
                _ => max_factor_dim,
            };
            search(
                leaf.reference_level.max(1),
                max_level,
                |l| tail_ok(&leaf.abs_eigenvalues(l), t, power),
                &format!("`{}` at t = {t}", leaf.name),
            )?
        }
    };
    let mut inner = Vec::with_capacity(triple.depth());
    for _ in 0..triple.depth() {
        inner.push(search(4, max_factor_dim, |k| inner_ok(k, t, power), &format!("inner factor at t = {t}"))?);
    }
    let lvl = TowerLevel { base, inner };
    check_tail(triple, &lvl, t, power)?;
    Ok(lvl)
}

/// Errors unless every factor of `lvl` meets the tail criterion at `t`.
pub fn check_tail(triple: &Triple, lvl: &TowerLevel, t: f64, power: u32) -> Result<()> {
    for (f, e) in triple.abs_factors(lvl).iter().enumerate() {
        if triple.leaf().is_finite() && f == 0 {
            continue;
        }
        if !tail_ok(e, t, power) {
            return Err(Error::InsufficientTruncation(format!(
                "factor {f} of level {lvl:?} leaves a spectral tail above {TAIL_TOL:e} at t = {t}"
            )));
        }
    }
    Ok(())
}

/// Per-factor diagonals of `e^{−t|D|}`.
pub fn heat_weights(triple: &Triple, lvl: &TowerLevel, t: f64) -> Vec<Vec<f64>> {
    triple
        .abs_factors(lvl)
        .iter()
        .map(|f| f.iter().map(|&l| libm::exp(-t * l)).collect())
        .collect()
}

/// An extrapolated `t → 0` limit.
#[derive(Clone, Debug, PartialEq)]
pub struct HeatLimit {
    pub value: C64,
    pub error_estimate: f64,
    /// `(t, sampled value)` per node.
    pub samples: Vec<(f64, C64)>,
    pub order: usize,
}

/// Richardson extrapolation for nodes shrinking by `ratio` under the model
/// `c₀ + c₁t + … + c_m t^m`. Errors when the last two differences grow and
/// exceed `1e-6 · scale`.
pub fn richardson(samples: &[C64], ratio: f64, order: usize, scale: f64) -> Result<(C64, f64)> {
    let n = samples.len();
    if n < order + 2 {
        return Err(Error::Invalid(format!("{n} sample(s) cannot support order {order}")));
    }
    let mut col: Vec<C64> = samples.to_vec();
    for j in 1..=order {
        let f = libm::pow(ratio, j as f64);
        col = (0..col.len() - 1)
            .map(|i| (col[i + 1] * f - col[i]) / (f - 1.0))
            .collect();
    }
    let m = col.len();
    let value = col[m - 1];
    let err = (col[m - 1] - col[m - 2]).norm();
    if m >= 3 {
        let prev = (col[m - 2] - col[m - 3]).norm();
        if err > prev && err > 1e-6 * scale.max(value.norm()) {
            return Err(Error::ScheduleTooCoarse(format!(
                "Richardson differences grow ({prev:.3e} then {err:.3e})"
            )));
        }
    }
    Ok((value, err))
}

/// `lim t^p Tr(v e^{−t|D|})` with `p` the summability exponent of `triple`.
pub fn heat_oint(
    triple: &Triple,
    v: &dyn Fn(&TowerLevel) -> Result<TensorOp>,
    schedule: &HeatSchedule,
    max_factor_dim: usize,
) -> Result<HeatLimit> {
    let levels = schedule.bind(triple, 1, max_factor_dim)?;
    let p = triple.p();
    let mut samples = Vec::with_capacity(levels.len());
    for (&t, lvl) in schedule.t_values.iter().zip(&levels) {
        let x = v(lvl)?;
        samples.push((t, x.trace_weighted(&heat_weights(triple, lvl, t)) * libm::pow(t, p)));
    }
    let scale = samples.iter().map(|s| s.1.norm()).fold(0.0, f64::max);
    let vals: Vec<C64> = samples.iter().map(|s| s.1).collect();
    let (value, error_estimate) = richardson(&vals, schedule.ratio, schedule.order, scale)?;
    Ok(HeatLimit {
        value,
        error_estimate,
        samples,
        order: schedule.order,
    })
}

/// `Tr(X W)` for a diagonal weight on the product basis given per factor
/// diagonal entry by `w(&[eigenvalue index per factor])`.
fn trace_general(x: &TensorOp, w: &dyn Fn(&[usize]) -> f64) -> C64 {
    let mut total = C64::new(0.0, 0.0);
    for term in &x.terms {
        let diags: Vec<Vec<(usize, C64)>> = term
            .factors
            .iter()
            .map(|f| (0..f.nrows()).map(|i| (i, f.get(i, i))).filter(|(_, v)| v.norm() > 0.0).collect())
            .collect();
        let mut idx = alloc::vec![0usize; diags.len()];
        if diags.iter().any(|d| d.is_empty()) {
            continue;
        }
        let mut pos = alloc::vec![0usize; diags.len()];
        'outer: loop {
            let mut v = term.coeff;
            for (f, d) in diags.iter().enumerate() {
                idx[f] = d[pos[f]].0;
                v *= d[pos[f]].1;
            }
            total += v * w(&idx);
            let mut f = diags.len();
            loop {
                if f == 0 {
                    break 'outer;
                }
                f -= 1;
                pos[f] += 1;
                if pos[f] < diags[f].len() {
                    break;
                }
                pos[f] = 0;
            }
        }
    }
    total
}

/// `lim_{ε→0⁺} Tr(v e^{−εD²}) / Tr(e^{−εD²})`, extrapolated in `s = √ε`;
/// the schedule nodes are values of `s`.
pub fn heat_int(
    triple: &Triple,
    v: &dyn Fn(&TowerLevel) -> Result<TensorOp>,
    schedule: &HeatSchedule,
    max_factor_dim: usize,
) -> Result<HeatLimit> {
    let mut samples = Vec::with_capacity(schedule.t_values.len());
    for &s in &schedule.t_values {
        let eps = s * s;
        let lvl = bind_level(triple, eps, 2, max_factor_dim)?;
        let absf = triple.abs_factors(&lvl);
        let w = |idx: &[usize]| {
            let lam: f64 = idx.iter().zip(&absf).map(|(i, f)| f[*i]).sum();
            libm::exp(-eps * lam * lam)
        };
        let x = v(&lvl)?;
        let id = TensorOp::identity(triple.factor_dims(&lvl));
        let num = trace_general(&x, &w);
        let den = trace_general(&id, &w).re;
        samples.push((s, num / den));
    }
    let vals: Vec<C64> = samples.iter().map(|s| s.1).collect();
    let (value, error_estimate) = richardson(&vals, schedule.ratio, schedule.order, 1.0)?;
    Ok(HeatLimit {
        value,
        error_estimate,
        samples,
        order: schedule.order,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::re;
    use crate::qds::suspend_triple;
    use crate::triple::make_circle_triple;

    #[test]
    fn richardson_removes_polynomial_terms() {
        let s: Vec<C64> = (0..6).map(|k| {
            let t = 0.5 / libm::pow(2.0, k as f64);
            re(2.0 + 3.0 * t - t * t)
        }).collect();
        let (v, e) = richardson(&s, 2.0, 2, 1.0).unwrap();
        assert!((v.re - 2.0).abs() < 1e-12 && e < 1e-12);
    }

    #[test]
    fn richardson_flags_divergence() {
        let s: Vec<C64> = (0..6).map(|k| re(libm::pow(3.0, k as f64))).collect();
        assert!(matches!(richardson(&s, 2.0, 2, 1.0), Err(Error::ScheduleTooCoarse(_))));
    }

    #[test]
    fn schedule_validation() {
        assert!(HeatSchedule::geometric(0.5, 2.0, 3, 2).is_err());
        assert!(HeatSchedule::new(alloc::vec![1.0, 0.5, 0.3, 0.1], 1).is_err());
        let s = HeatSchedule::geometric(0.5, 2.0, 4, 2).unwrap();
        assert_eq!(s.refine().t_values.len(), 5);
    }

    #[test]
    fn circle_identity_limit_is_two() {
        let t: Triple = make_circle_triple(8, 1).unwrap().into();
        let s = HeatSchedule::geometric(0.5, 2.0, 8, 2).unwrap();
        let id = |l: &TowerLevel| Ok(TensorOp::identity(t.factor_dims(l)));
        let h = heat_oint(&t, &id, &s, 1 << 16).unwrap();
        assert!((h.value.re - 2.0).abs() < 0.02, "{h:?}");
    }

    #[test]
    fn suspension_binds_every_factor() {
        let c: Triple = make_circle_triple(8, 1).unwrap().into();
        let t: Triple = suspend_triple(c, 8, 2).unwrap().into();
        let lvl = bind_level(&t, 0.1, 1, 1 << 16).unwrap();
        assert_eq!(lvl.inner.len(), 1);
        check_tail(&t, &lvl, 0.1, 1).unwrap();
        let small = TowerLevel { base: 8, inner: alloc::vec![8] };
        assert!(matches!(check_tail(&t, &small, 0.1, 1), Err(Error::InsufficientTruncation(_))));
    }
}
