//! The Riccati layer: logarithmic derivative `phi = eta'/eta`, forcing
//! `q = eta''/eta`, the reference curve `phi_e = -q/2`, the asymptotic
//! manifold `L (a+1)^{-t}`, trapping thresholds, curvature identities,
//! higher-order quotients and the linearized contraction factor.
//!
//! Two evaluators coexist. Table-facing operations ([`riccati_fields`],
//! [`curvature`], [`trapping_threshold`]) run on the direct alternating
//! series at its default budget, which is the estimator every published
//! table value (including the thresholds) comes from. Analytic checks that
//! need uniform accuracy in `t` ([`riccati_residual`],
//! [`perturbation_factor`], the `*_accurate` helpers) run on the
//! geometric-rate algorithm instead, whose error is ~1e-13 regardless of
//! how slowly the alternating series converges.

use crate::error::{Error, Result};
use crate::fastderiv::{self, MAX_TERMS_F64};
use crate::series::{eta_deriv_direct, monotone_onset, term_magnitude, term_parts, EtaPoint, SeriesAccuracy, SeriesResult};

/// All Riccati-layer quantities at one `(a, t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiccatiSample {
    pub t: f64,
    pub eta: f64,
    pub eta1: f64,
    pub eta2: f64,
    /// `eta'/eta`
    pub phi: f64,
    /// `eta''/eta`
    pub q: f64,
    /// `-q/2`
    pub phi_e: f64,
    /// `log(a+1) * (a+1)^{-t}`
    pub phi_as: f64,
    /// `phi / phi_e`
    pub ratio: f64,
}

/// Bisection output for the trapping threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdResult {
    pub a: f64,
    pub t_star: f64,
    /// Value of `eta'' + 2 eta'` at `t_star` (same estimator as the scan).
    pub residual: f64,
    pub iterations: usize,
}

/// Higher-order Riccati-type quotient at one `(a, t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuotientSample {
    pub k: u32,
    /// `eta^{(k)} / eta^{(k-1)}`
    pub phi_k: f64,
    /// `-eta^{(k+1)} / (2 eta^{(k-1)})`
    pub phi_ek: f64,
    pub ratio_k: f64,
}

fn certified(r: &SeriesResult, what: &str, p: &EtaPoint) -> Result<f64> {
    if r.error_estimate.is_finite() {
        Ok(r.value)
    } else {
        Err(Error::NonConvergence(format!(
            "{what} has no remainder bound within the term budget at a={}, t={}",
            p.a(),
            p.t()
        )))
    }
}

/// Riccati-layer quantities from the direct series at the default budget.
pub fn riccati_fields(p: &EtaPoint) -> Result<RiccatiSample> {
    riccati_fields_with(p, &SeriesAccuracy::default())
}

pub fn riccati_fields_with(p: &EtaPoint, acc: &SeriesAccuracy) -> Result<RiccatiSample> {
    let eta = certified(&eta_deriv_direct(p, 0, acc), "eta", p)?;
    let eta1 = certified(&eta_deriv_direct(p, 1, acc), "eta'", p)?;
    let eta2 = certified(&eta_deriv_direct(p, 2, acc), "eta''", p)?;
    let phi = eta1 / eta;
    let q = eta2 / eta;
    let phi_e = -q / 2.0;
    let ell = (p.a() + 1.0).ln();
    Ok(RiccatiSample {
        t: p.t(),
        eta,
        eta1,
        eta2,
        phi,
        q,
        phi_e,
        phi_as: ell * (-p.t() * ell).exp(),
        ratio: phi / phi_e,
    })
}

/// `eta^{(k)}(t)` through the geometric-rate algorithm at full table depth.
/// Accurate to ~1e-13 uniformly in `t`.
pub fn eta_deriv_accurate(p: &EtaPoint, k: u32) -> Result<f64> {
    Ok(fastderiv::eta_deriv_fast(p, k, MAX_TERMS_F64)?.value)
}

pub fn phi_accurate(p: &EtaPoint) -> Result<f64> {
    Ok(eta_deriv_accurate(p, 1)? / eta_deriv_accurate(p, 0)?)
}

pub fn q_accurate(p: &EtaPoint) -> Result<f64> {
    Ok(eta_deriv_accurate(p, 2)? / eta_deriv_accurate(p, 0)?)
}

/// `|(phi(t+h) - phi(t-h))/(2h) + phi(t)^2 - q(t)|`. The identity is
/// exact, so the result is the O(h^2) discretization error of the
/// symmetric difference.
pub fn riccati_residual(p: &EtaPoint, h: f64) -> Result<f64> {
    if !h.is_finite() || h <= 0.0 || p.t() - h <= 0.0 {
        return Err(Error::Domain(format!(
            "riccati_residual: need 0 < h < t, got h={h} at t={}",
            p.t()
        )));
    }
    let plus = phi_accurate(&EtaPoint::new(p.a(), p.t() + h)?)?;
    let minus = phi_accurate(&EtaPoint::new(p.a(), p.t() - h)?)?;
    let phi = phi_accurate(p)?;
    let q = q_accurate(p)?;
    Ok(((plus - minus) / (2.0 * h) + phi * phi - q).abs())
}

/// `lim_{t->inf} phi(t)/phi_e(t) = 2/log(a+1)`.
pub fn asymptotic_ratio_limit(a: f64) -> Result<f64> {
    if !a.is_finite() || a <= 0.0 {
        return Err(Error::Domain(format!("asymptotic_ratio_limit: a must be finite and > 0, got {a}")));
    }
    Ok(2.0 / (a + 1.0).ln())
}

/// `eta''(t) + 2 eta'(t)` and the certification state of its two series,
/// computed in one pass. The per-series accumulation replays
/// `eta_deriv_direct` operation for operation, so this equals
/// `eta2.value + 2*eta1.value` of the separate calls bit for bit.
fn curvature_parts(a: f64, t: f64, acc: &SeriesAccuracy) -> (SeriesResult, SeriesResult) {
    use crate::dd::Dd;
    struct Acc {
        sum: Dd,
        onset: usize,
        done: Option<(f64, usize)>, // (first omitted, terms used)
    }
    let mut s = [
        Acc { sum: Dd::ZERO, onset: monotone_onset(a, t, 1), done: None },
        Acc { sum: Dd::ZERO, onset: monotone_onset(a, t, 2), done: None },
    ];
    let mut m = 0usize;
    while m < acc.max_terms() && !(s[0].done.is_some() && s[1].done.is_some()) {
        let (lam, b) = term_parts(a, t, m);
        for (i, acc_k) in s.iter_mut().enumerate() {
            if acc_k.done.is_some() {
                continue;
            }
            let k = i as u32 + 1;
            let mag = term_magnitude(lam, b, k);
            let mag_f = mag.to_f64();
            if m > acc_k.onset && mag_f <= acc.tol() {
                acc_k.done = Some((mag_f, m));
                continue;
            }
            acc_k.sum = if (m + k as usize) % 2 == 0 { acc_k.sum.add(mag) } else { acc_k.sum.sub(mag) };
        }
        m += 1;
    }
    let finish = |a_k: &Acc, k: u32| -> SeriesResult {
        match a_k.done {
            Some((err, terms)) => {
                SeriesResult { value: a_k.sum.to_f64(), error_estimate: err, terms_used: terms, converged: true }
            }
            None => {
                let (lam, b) = term_parts(a, t, acc.max_terms());
                let omitted = term_magnitude(lam, b, k).to_f64();
                let err = if acc.max_terms() > a_k.onset { omitted } else { f64::INFINITY };
                SeriesResult { value: a_k.sum.to_f64(), error_estimate: err, terms_used: acc.max_terms(), converged: false }
            }
        }
    };
    (finish(&s[0], 1), finish(&s[1], 2))
}

/// `eta''(t) + 2 eta'(t)` via the direct derivative series at the default
/// budget. Positive past the trapping threshold when `a < e^2 - 1`.
pub fn curvature(p: &EtaPoint) -> Result<f64> {
    let acc = SeriesAccuracy::default();
    let (e1, e2) = curvature_parts(p.a(), p.t(), &acc);
    certified(&e1, "eta'", p)?;
    certified(&e2, "eta''", p)?;
    Ok(e2.value + 2.0 * e1.value)
}

/// Onset past which `|log(x)(log(x)-2)| x^{-t}` (x = a*m+1) is decreasing:
/// the weighted term decreases once `log x` clears the larger root of
/// `t y^2 - (2+2t) y + 2`.
fn curvature_series_onset(a: f64, t: f64) -> usize {
    let y = ((1.0 + t) + (1.0 + t * t).sqrt()) / t;
    let e = y.exp();
    if !e.is_finite() {
        return usize::MAX;
    }
    let m = ((e - 1.0) / a).ceil();
    if !(m < 9.0e18) {
        usize::MAX
    } else {
        m as usize
    }
}

/// The curvature functional by its own alternating series
/// `sum_{m>=1} (-1)^m h_a(m) (a*m+1)^{-t}` with
/// `h_a(m) = log(a*m+1)(log(a*m+1) - 2)`. Analytically identical to
/// [`curvature`]; an independent code path kept for cross-checking.
pub fn curvature_series(p: &EtaPoint, acc: &SeriesAccuracy) -> Result<f64> {
    use crate::dd::Dd;
    let (a, t) = (p.a(), p.t());
    let onset = curvature_series_onset(a, t);
    let mut sum = Dd::ZERO;
    let mut m = 1usize;
    while m < acc.max_terms() {
        let (lam, b) = term_parts(a, t, m);
        let dlam = Dd::from(lam);
        let weighted = dlam.powi(2).sub(dlam.mul_f64(2.0)).mul_f64(b);
        let mag = weighted.to_f64().abs();
        if m > onset && mag <= acc.tol() {
            return Ok(sum.to_f64());
        }
        sum = if m % 2 == 0 { sum.add(weighted) } else { sum.sub(weighted) };
        m += 1;
    }
    if acc.max_terms() > onset {
        Ok(sum.to_f64())
    } else {
        Err(Error::NonConvergence(format!(
            "curvature series has no remainder bound within the term budget at a={a}, t={t}"
        )))
    }
}

const SCAN_LO: f64 = 0.01;
const SCAN_HI: f64 = 8.0;
const SCAN_STEP: f64 = 0.01;
const RESIDUAL_TARGET: f64 = 1e-10;

/// Smallest root of `g(t) = eta''(t) + 2 eta'(t)` in (0.01, 8], located by
/// a sign scan at step 0.01 followed by bisection to `|g| <= 1e-10`.
/// `g` is evaluated by the same direct-series estimator the tables use.
pub fn trapping_threshold(a: f64) -> Result<ThresholdResult> {
    if !a.is_finite() || a <= 0.0 {
        return Err(Error::Domain(format!("trapping_threshold: a must be finite and > 0, got {a}")));
    }
    let critical = std::f64::consts::E.powi(2) - 1.0;
    if (a - critical).abs() < 1e-12 {
        return Err(Error::Domain(
            "trapping_threshold: a = e^2 - 1 is degenerate (the asymptotic ratio is exactly 1)".into(),
        ));
    }
    let acc = SeriesAccuracy::default();
    let g = |t: f64| -> f64 {
        let (e1, e2) = curvature_parts(a, t, &acc);
        e2.value + 2.0 * e1.value
    };

    let steps = ((SCAN_HI - SCAN_LO) / SCAN_STEP).round() as usize;
    let mut lo = SCAN_LO;
    let mut flo = g(lo);
    let mut bracket = None;
    for i in 1..=steps {
        let t = SCAN_LO + i as f64 * SCAN_STEP;
        let ft = g(t);
        if flo == 0.0 {
            return Ok(ThresholdResult { a, t_star: lo, residual: 0.0, iterations: 0 });
        }
        if (ft > 0.0) != (flo > 0.0) {
            bracket = Some((lo, flo, t, ft));
            break;
        }
        lo = t;
        flo = ft;
    }
    let (mut lo, mut flo, mut hi, _fhi) = match bracket {
        Some(b) => b,
        None => return Err(Error::NoCrossing { a, lo: SCAN_LO, hi: SCAN_HI }),
    };

    let mut mid = 0.5 * (lo + hi);
    let mut fm = g(mid);
    let mut iterations = 0usize;
    while fm.abs() > RESIDUAL_TARGET && iterations < 200 {
        if (fm > 0.0) == (flo > 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
        mid = 0.5 * (lo + hi);
        fm = g(mid);
        iterations += 1;
    }
    if fm.abs() > RESIDUAL_TARGET {
        return Err(Error::NonConvergence(format!(
            "bisection stalled at |residual| = {:.3e} for a = {a}",
            fm.abs()
        )));
    }
    Ok(ThresholdResult { a, t_star: mid, residual: fm, iterations })
}

/// `phi_k = eta^{(k)}/eta^{(k-1)}` and `phi_ek = -eta^{(k+1)}/(2 eta^{(k-1)})`.
/// Both tend to limits governed by `-log(a+1)` as `t -> inf`, with
/// `ratio_k -> 2/log(a+1)` independently of `k`.
pub fn higher_quotient(p: &EtaPoint, k: u32) -> Result<QuotientSample> {
    if k == 0 {
        return Err(Error::Domain("higher_quotient: k must be >= 1".into()));
    }
    let acc = SeriesAccuracy::default();
    let den = certified(&eta_deriv_direct(p, k - 1, &acc), "eta^{(k-1)}", p)?;
    let num = certified(&eta_deriv_direct(p, k, &acc), "eta^{(k)}", p)?;
    let nxt = certified(&eta_deriv_direct(p, k + 1, &acc), "eta^{(k+1)}", p)?;
    if den.abs() <= 1e-12 {
        return Err(Error::NearZeroDenominator(format!(
            "|eta^{{({})}}({})| = {:.3e} <= 1e-12 for a = {}",
            k - 1,
            p.t(),
            den.abs(),
            p.a()
        )));
    }
    let phi_k = num / den;
    let phi_ek = -nxt / (2.0 * den);
    Ok(QuotientSample { k, phi_k, phi_ek, ratio_k: phi_k / phi_ek })
}

/// `exp(int_{t0}^{t1} q_a(s) ds)` by adaptive Simpson quadrature
/// (absolute tolerance 1e-10, depth cap 40) on the geometric-algorithm
/// forcing. Contracts strictly: the result is in (0, 1], and 1 only for
/// an empty interval.
pub fn perturbation_factor(a: f64, t0: f64, t1: f64) -> Result<f64> {
    if !a.is_finite() || a <= 0.0 {
        return Err(Error::Domain(format!("perturbation_factor: a must be finite and > 0, got {a}")));
    }
    if !(t0 > 0.0 && t1.is_finite() && t0 <= t1) {
        return Err(Error::Domain(format!("perturbation_factor: need 0 < t0 <= t1, got t0={t0}, t1={t1}")));
    }
    if t0 == t1 {
        return Ok(1.0);
    }
    let q = |s: f64| -> Result<f64> { q_accurate(&EtaPoint::new(a, s)?) };
    let fa = q(t0)?;
    let fb = q(t1)?;
    let m = 0.5 * (t0 + t1);
    let fm = q(m)?;
    let whole = (t1 - t0) / 6.0 * (fa + 4.0 * fm + fb);
    let integral = adaptive_simpson(&q, t0, t1, fa, fm, fb, whole, 1e-10, 40)?;
    Ok(integral.exp())
}

#[allow(clippy::too_many_arguments)]
fn adaptive_simpson(
    f: &dyn Fn(f64) -> Result<f64>,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: usize,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm)?;
    let frm = f(rm)?;
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol {
        return Ok(left + right + delta / 15.0);
    }
    if depth == 0 {
        return Err(Error::Quadrature(format!(
            "depth exhausted on [{a}, {b}] with panel error {:.3e}",
            delta.abs()
        )));
    }
    let l = adaptive_simpson(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)?;
    let r = adaptive_simpson(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)?;
    Ok(l + r)
}
