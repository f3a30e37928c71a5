//! Monte Carlo validation of the probabilistic layer.
//!
//! `eta_a(t) = E[f_a(X_t)]` with `X_t ~ Gamma(t, 1)`, and
//! `eta_a^{(k)}(t) = E[f_a^{(k)}(X_t + S_k)]` with
//! `S_k = sum_{j<=k} U_j T_j` (uniform times unit exponential).
//!
//! Sampling runs on eight fixed ChaCha streams derived from `(seed,
//! stream-index)` and merges per-stream moments in stream order, so
//! estimates are bit-identical across runs and across thread counts.
//! `ETA_RICCATI_THREADS` caps the threads actually running the streams.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::parallel::worker_threads;
use crate::series::{logistic_raw, EtaPoint};

const STREAMS: u64 = 8;

/// Sample budget and seed. At least 100 samples (below that the standard
/// error is meaningless).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McConfig {
    samples: u64,
    seed: u64,
}

impl McConfig {
    pub fn new(samples: u64, seed: u64) -> Result<Self> {
        if samples < 100 {
            return Err(Error::Domain(format!("samples must be >= 100, got {samples}")));
        }
        Ok(McConfig { samples, seed })
    }

    pub fn samples(&self) -> u64 {
        self.samples
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig { samples: 1_000_000, seed: 42 }
    }
}

/// Empirical mean with `stderr = sample standard deviation / sqrt(n)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: u64,
}

#[derive(Clone, Copy, Default)]
struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    fn merge(self, other: Moments) -> Moments {
        if self.n == 0 {
            return other;
        }
        if other.n == 0 {
            return self;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        Moments {
            n,
            mean: self.mean + d * other.n as f64 / n as f64,
            m2: self.m2 + other.m2 + d * d * self.n as f64 * other.n as f64 / n as f64,
        }
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Runs `f` once per sample across the fixed streams and pools the moments.
pub(crate) fn estimate<F>(cfg: &McConfig, f: F) -> McEstimate
where
    F: Fn(&mut ChaCha8Rng) -> f64 + Sync,
{
    let base = cfg.samples / STREAMS;
    let rem = cfg.samples % STREAMS;
    let quota = |w: u64| base + u64::from(w < rem);

    let threads = worker_threads().min(STREAMS as usize).max(1);
    let mut per_stream = [Moments::default(); STREAMS as usize];
    if threads <= 1 {
        for (w, slot) in per_stream.iter_mut().enumerate() {
            let mut rng = stream_rng(cfg.seed, w as u64);
            let mut acc = Moments::default();
            for _ in 0..quota(w as u64) {
                acc.push(f(&mut rng));
            }
            *slot = acc;
        }
    } else {
        let results: Vec<(usize, Moments)> = std::thread::scope(|scope| {
            let handles: Vec<_> = (0..threads)
                .map(|tid| {
                    let f = &f;
                    scope.spawn(move || {
                        let mut local = Vec::new();
                        let mut w = tid as u64;
                        while w < STREAMS {
                            let mut rng = stream_rng(cfg.seed, w);
                            let mut acc = Moments::default();
                            for _ in 0..quota(w) {
                                acc.push(f(&mut rng));
                            }
                            local.push((w as usize, acc));
                            w += threads as u64;
                        }
                        local
                    })
                })
                .collect();
            handles.into_iter().flat_map(|h| h.join().expect("mc worker panicked")).collect()
        });
        for (w, m) in results {
            per_stream[w] = m;
        }
    }

    let pooled = per_stream.into_iter().fold(Moments::default(), Moments::merge);
    let var = pooled.m2 / (pooled.n - 1) as f64;
    McEstimate { mean: pooled.mean, stderr: (var / pooled.n as f64).sqrt(), samples: pooled.n }
}

fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u = 2.0 * rng.random::<f64>() - 1.0;
        let v = 2.0 * rng.random::<f64>() - 1.0;
        let s = u * u + v * v;
        if s > 0.0 && s < 1.0 {
            return u * (-2.0 * s.ln() / s).sqrt();
        }
    }
}

// Marsaglia-Tsang squeeze method, shape >= 1.
fn gamma_large<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let x = standard_normal(rng);
        let v = 1.0 + c * x;
        if v <= 0.0 {
            continue;
        }
        let v3 = v * v * v;
        let u = rng.random::<f64>();
        let x2 = x * x;
        if u < 1.0 - 0.0331 * x2 * x2 {
            return d * v3;
        }
        if u.ln() < 0.5 * x2 + d * (1.0 - v3 + v3.ln()) {
            return d * v3;
        }
    }
}

pub(crate) fn sample_gamma_raw<R: Rng + ?Sized>(t: f64, rng: &mut R) -> f64 {
    if t < 1.0 {
        // shape boost: draw at t+1, multiply by U^(1/t)
        let g = gamma_large(t + 1.0, rng);
        let u = 1.0 - rng.random::<f64>(); // (0, 1]
        g * u.powf(1.0 / t)
    } else {
        gamma_large(t, rng)
    }
}

/// One draw from Gamma(shape `t`, rate 1).
pub fn sample_gamma<R: Rng + ?Sized>(t: f64, rng: &mut R) -> Result<f64> {
    if !t.is_finite() || t <= 0.0 {
        return Err(Error::Domain(format!("sample_gamma: shape must be finite and > 0, got {t}")));
    }
    Ok(sample_gamma_raw(t, rng))
}

/// One draw of `S_k = sum_{j=1}^{k} U_j T_j`; `S_0 = 0` exactly.
pub fn sample_sk<R: Rng + ?Sized>(k: u32, rng: &mut R) -> f64 {
    let mut s = 0.0;
    for _ in 0..k {
        let u = rng.random::<f64>();
        let t = -(1.0 - rng.random::<f64>()).ln();
        s += u * t;
    }
    s
}

/// Monte Carlo estimate of `eta_a(t) = E[f_a(X_t)]`.
pub fn mc_eta(p: &EtaPoint, cfg: &McConfig) -> McEstimate {
    let (a, t) = (p.a(), p.t());
    estimate(cfg, |rng| logistic_raw(a, sample_gamma_raw(t, rng), 0))
}

/// Monte Carlo estimate of `eta_a^{(k)}(t) = E[f_a^{(k)}(X_t + S_k)]`,
/// supported for `k <= 2` (the closed logistic derivative formulas).
pub fn mc_eta_deriv(p: &EtaPoint, k: u32, cfg: &McConfig) -> Result<McEstimate> {
    if k > 2 {
        return Err(Error::Domain(format!("mc_eta_deriv: only k <= 2 is supported, got {k}")));
    }
    let (a, t) = (p.a(), p.t());
    Ok(estimate(cfg, |rng| {
        let x = sample_gamma_raw(t, rng) + sample_sk(k, rng);
        logistic_raw(a, x, k as u8)
    }))
}

/// Monte Carlo estimate of `E[exp(-lambda S_k)]`; analytic value
/// `(log(1+lambda)/lambda)^k`.
pub fn mc_laplace_sk(k: u32, lambda: f64, cfg: &McConfig) -> Result<McEstimate> {
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(Error::Domain(format!("mc_laplace_sk: lambda must be finite and >= 0, got {lambda}")));
    }
    Ok(estimate(cfg, |rng| (-lambda * sample_sk(k, rng)).exp()))
}

/// Analytic Laplace transform of `S_k` for test targets.
pub fn laplace_sk_exact(k: u32, lambda: f64) -> f64 {
    if lambda == 0.0 {
        return 1.0;
    }
    (lambda.ln_1p() / lambda).powi(k as i32)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        assert!(McConfig::new(99, 0).is_err());
        assert!(McConfig::new(100, 0).is_ok());
    }

    #[test]
    fn s0_is_exactly_zero() {
        let mut rng = stream_rng(7, 0);
        for _ in 0..10 {
            assert_eq!(sample_sk(0, &mut rng), 0.0);
        }
    }

    #[test]
    fn gamma_rejects_bad_shape() {
        let mut rng = stream_rng(1, 0);
        assert!(sample_gamma(0.0, &mut rng).is_err());
        assert!(sample_gamma(f64::NAN, &mut rng).is_err());
    }

    #[test]
    fn gamma_moments_loose() {
        // mean and variance of Gamma(t,1) are both t
        let cfg = McConfig::new(200_000, 9).unwrap();
        for &t in &[0.3, 1.0, 2.5] {
            let est = estimate(&cfg, |rng| sample_gamma_raw(t, rng));
            assert!((est.mean - t).abs() < 6.0 * est.stderr, "t={t}: mean {} +- {}", est.mean, est.stderr);
        }
    }

    #[test]
    fn estimates_are_bit_reproducible() {
        let p = EtaPoint::new(1.0, 1.0).unwrap();
        let cfg = McConfig::new(50_000, 20260809).unwrap();
        let a = mc_eta(&p, &cfg);
        let b = mc_eta(&p, &cfg);
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        assert_eq!(a.stderr.to_bits(), b.stderr.to_bits());
    }

    #[test]
    fn deriv_order_cap() {
        let p = EtaPoint::new(1.0, 1.0).unwrap();
        let cfg = McConfig::new(1000, 3).unwrap();
        assert!(mc_eta_deriv(&p, 3, &cfg).is_err());
        assert!(mc_eta_deriv(&p, 2, &cfg).is_ok());
    }

    #[test]
    fn laplace_exact_values() {
        assert_eq!(laplace_sk_exact(0, 1.0), 1.0);
        assert!((laplace_sk_exact(1, 1.0) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((laplace_sk_exact(2, 1.0) - std::f64::consts::LN_2.powi(2)).abs() < 1e-15);
    }

    #[test]
    fn every_logistic_draw_strictly_inside() {
        let p = EtaPoint::new(1.0, 1.0).unwrap();
        let mut rng = stream_rng(5, 0);
        for _ in 0..20_000 {
            let f = logistic_raw(p.a(), sample_gamma_raw(p.t(), &mut rng), 0);
            assert!(f > 0.5 && f < 1.0);
        }
    }
}
