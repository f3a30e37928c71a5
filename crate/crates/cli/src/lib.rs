//! Implementations behind the `eta-riccati` subcommands. Kept as a library
//! so integration and acceptance tests can drive them in-process.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use eta_riccati::fastderiv::{self, TruncationReport};
use eta_riccati::mc::{self, McConfig, McEstimate};
use eta_riccati::parallel::map_ordered;
use eta_riccati::riccati::{self, RiccatiSample};
use eta_riccati::series::{self, EtaPoint, SeriesAccuracy};
use eta_riccati::sonify::{self, MelodyConfig};
use eta_riccati::{Error, Result};

/// Euler-Mascheroni constant, fixed reference for the convergence table.
pub const EULER_GAMMA: f64 = 0.5772156649015329;

/// Exit codes shared by every subcommand: 0 success, 1 validation failure,
/// 2 usage/domain error, 3 numerical non-convergence.
pub fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::Domain(_) | Error::Config(_) | Error::Midi(_) | Error::InfeasibleTempo { .. } => 2,
        Error::NonConvergence(_)
        | Error::PrecisionLoss(_)
        | Error::Quadrature(_)
        | Error::NoCrossing { .. }
        | Error::NearZeroDenominator(_) => 3,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMethod {
    Direct,
    Fast,
}

pub struct EvalReport {
    pub text: String,
    pub converged: bool,
}

/// `eval`: one point, one derivative order, either evaluator.
pub fn eval(a: f64, t: f64, k: u32, method: EvalMethod, n: usize, max_terms: usize) -> Result<EvalReport> {
    let p = EtaPoint::new(a, t)?;
    match method {
        EvalMethod::Direct => {
            let acc = SeriesAccuracy::new(max_terms, 1e-15)?;
            let r = series::eta_deriv_direct(&p, k, &acc);
            let mut text = String::new();
            let _ = writeln!(text, "eta_a^({k})(t) at a = {a}, t = {t}  [direct series]");
            let _ = writeln!(text, "value          = {:.17}", r.value);
            let _ = writeln!(text, "error estimate = {:.3e}", r.error_estimate);
            let _ = writeln!(text, "terms used     = {}", r.terms_used);
            let _ = writeln!(text, "converged      = {}", r.converged);
            Ok(EvalReport { text, converged: r.converged })
        }
        EvalMethod::Fast => {
            let r: TruncationReport = fastderiv::eta_deriv_fast(&p, k, n)?;
            let mut text = String::new();
            let _ = writeln!(text, "eta_a^({k})(t) at a = {a}, t = {t}  [geometric algorithm]");
            let _ = writeln!(text, "value            = {:.17}", r.value);
            let _ = writeln!(text, "truncation bound = {:.3e}", r.truncation_bound);
            let _ = writeln!(text, "terms used       = {}", r.n_terms);
            Ok(EvalReport { text, converged: true })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Markdown,
}

pub struct TableReport {
    pub text: String,
    /// Some row had no certified series value.
    pub any_failed: bool,
}

pub fn default_a_list() -> Vec<f64> {
    vec![1.0, 2.0, 10.0, 11.0]
}

pub fn default_t_list() -> Vec<f64> {
    vec![0.5, 1.0, 2.0, 4.0, 30.0]
}

/// `riccati-table`: one row per (a, t) with phi, phi_e, phi_as, ratio.
pub fn riccati_table(a_list: &[f64], t_list: &[f64], format: TableFormat) -> Result<TableReport> {
    for &a in a_list {
        EtaPoint::new(a, 1.0)?;
    }
    for &t in t_list {
        EtaPoint::new(1.0, t)?;
    }
    let points: Vec<(f64, f64)> =
        a_list.iter().flat_map(|&a| t_list.iter().map(move |&t| (a, t))).collect();
    let rows: Vec<(f64, f64, Result<RiccatiSample>)> = map_ordered(&points, |&(a, t)| {
        (a, t, EtaPoint::new(a, t).and_then(|p| riccati::riccati_fields(&p)))
    });

    let mut text = String::new();
    let mut any_failed = false;
    match format {
        TableFormat::Markdown => {
            let _ = writeln!(text, "| a | t | phi | phi_e | phi_as | ratio |");
            let _ = writeln!(text, "|---|---|-----|-------|--------|-------|");
            for (a, t, row) in &rows {
                match row {
                    Ok(s) => {
                        let _ = writeln!(
                            text,
                            "| {a} | {t} | {:.4} | {:.4} | {:.4} | {:.4} |",
                            s.phi, s.phi_e, s.phi_as, s.ratio
                        );
                    }
                    Err(_) => {
                        any_failed = true;
                        let _ = writeln!(text, "| {a} | {t} | n/a | n/a | n/a | n/a |");
                    }
                }
            }
        }
        TableFormat::Csv => {
            let _ = writeln!(
                text,
                "# columns: a,t,phi,phi_e,phi_as,ratio; flags: --a-list {} --t-list {}",
                join_list(a_list),
                join_list(t_list)
            );
            for (a, t, row) in &rows {
                match row {
                    Ok(s) => {
                        let _ = writeln!(text, "{a},{t},{},{},{},{}", s.phi, s.phi_e, s.phi_as, s.ratio);
                    }
                    Err(_) => {
                        any_failed = true;
                        let _ = writeln!(text, "{a},{t},,,,");
                    }
                }
            }
        }
    }
    Ok(TableReport { text, any_failed })
}

fn join_list(xs: &[f64]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

/// One row of the convergence table: estimator values at table size `n`
/// and their errors against the closed-form references at (a, t) = (1, 1).
#[derive(Debug, Clone, Copy)]
pub struct ConvergenceRow {
    pub n: usize,
    pub value_k0: f64,
    pub err_k0: f64,
    pub value_k1: f64,
    pub err_k1: f64,
}

/// Exact references: eta(1) = log 2 and
/// eta'(1) = gamma log 2 - (log 2)^2 / 2.
pub fn convergence_references() -> (f64, f64) {
    let ln2 = std::f64::consts::LN_2;
    (ln2, EULER_GAMMA * ln2 - 0.5 * ln2 * ln2)
}

pub fn convergence_rows(a: f64, t: f64, n_list: &[usize]) -> Result<Vec<ConvergenceRow>> {
    let p = EtaPoint::new(a, t)?;
    let (ref0, ref1) = convergence_references();
    n_list
        .iter()
        .map(|&n| {
            let r0 = fastderiv::eta_deriv_fast(&p, 0, n)?;
            let r1 = fastderiv::eta_deriv_fast(&p, 1, n)?;
            Ok(ConvergenceRow {
                n,
                value_k0: r0.value,
                err_k0: (r0.value - ref0).abs(),
                value_k1: r1.value,
                err_k1: (r1.value - ref1).abs(),
            })
        })
        .collect()
}

/// `convergence-table`: geometric convergence of the truncated estimator.
pub fn convergence_table(a: f64, t: f64, n_list: &[usize]) -> Result<String> {
    let rows = convergence_rows(a, t, n_list)?;
    let mut text = String::new();
    let _ = writeln!(
        text,
        "# columns: N,value_k0,err_k0,value_k1,err_k1; flags: --a {a} --t {t}; references: log2, gamma*log2-log2^2/2"
    );
    for r in rows {
        let _ = writeln!(
            text,
            "{},{:.8},{:.2e},{:.8},{:.2e}",
            r.n, r.value_k0, r.err_k0, r.value_k1, r.err_k1
        );
    }
    Ok(text)
}

pub struct FigureData {
    pub files: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

/// `figure-data`: four CSV panels per `a` over a uniform t-grid:
/// eta(t); phi vs the asymptotic manifold; the forcing q; phi' vs -phi^2
/// (symmetric difference, h = 1e-4).
pub fn figure_data(a_list: &[f64], t_min: f64, t_max: f64, points: usize, out_dir: &Path) -> Result<FigureData> {
    if points < 2 {
        return Err(Error::Domain(format!("figure-data needs at least 2 grid points, got {points}")));
    }
    if !(t_min > 0.0 && t_max > t_min && t_max.is_finite()) {
        return Err(Error::Domain(format!("invalid t-grid [{t_min}, {t_max}]")));
    }
    std::fs::create_dir_all(out_dir)
        .map_err(|e| Error::Config(format!("cannot create {}: {e}", out_dir.display())))?;

    const H: f64 = 1e-4;
    struct Point {
        t: f64,
        eta: Option<f64>,
        phi: Option<f64>,
        q: Option<f64>,
        dphi: Option<f64>,
    }

    let acc = SeriesAccuracy::default();
    let mut files = Vec::new();
    let mut warnings = Vec::new();
    for &a in a_list {
        EtaPoint::new(a, 1.0)?;
        let ts: Vec<f64> =
            (0..points).map(|i| t_min + (t_max - t_min) * i as f64 / (points - 1) as f64).collect();
        let data: Vec<Point> = map_ordered(&ts, |&t| {
            let val = |t: f64, k: u32| -> Option<f64> {
                let p = EtaPoint::new(a, t).ok()?;
                let r = series::eta_deriv_direct(&p, k, &acc);
                r.error_estimate.is_finite().then_some(r.value)
            };
            let phi_at = |t: f64| -> Option<f64> { Some(val(t, 1)? / val(t, 0)?) };
            let eta = val(t, 0);
            let phi = phi_at(t);
            let q = match (val(t, 2), eta) {
                (Some(e2), Some(e0)) => Some(e2 / e0),
                _ => None,
            };
            let dphi = if t - H > 0.0 {
                match (phi_at(t + H), phi_at(t - H)) {
                    (Some(p), Some(m)) => Some((p - m) / (2.0 * H)),
                    _ => None,
                }
            } else {
                None
            };
            Point { t, eta, phi, q, dphi }
        });

        let n_missing = data.iter().filter(|p| p.phi.is_none() || p.q.is_none() || p.dphi.is_none()).count();
        if n_missing > 0 {
            warnings.push(format!(
                "a = {a}: {n_missing} grid point(s) below the certified range were emitted as empty fields"
            ));
        }

        let flags = format!("--a {a} --t-grid {t_min}:{t_max}:{points}");
        let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let panels: [(String, String); 4] = [
            (format!("a{a}_panel1_eta.csv"), {
                let mut s = format!("# columns: t,eta; flags: {flags}\n");
                for p in &data {
                    let _ = writeln!(s, "{},{}", p.t, fmt(p.eta));
                }
                s
            }),
            (format!("a{a}_panel2_phi_manifold.csv"), {
                let mut s = format!("# columns: t,phi,phi_as; flags: {flags}\n");
                let ell = (a + 1.0).ln();
                for p in &data {
                    let _ = writeln!(s, "{},{},{}", p.t, fmt(p.phi), ell * (-p.t * ell).exp());
                }
                s
            }),
            (format!("a{a}_panel3_forcing.csv"), {
                let mut s = format!("# columns: t,q; flags: {flags}\n");
                for p in &data {
                    let _ = writeln!(s, "{},{}", p.t, fmt(p.q));
                }
                s
            }),
            (format!("a{a}_panel4_riccati_ineq.csv"), {
                let mut s = format!("# columns: t,phi_prime,neg_phi_sq; flags: {flags}\n");
                for p in &data {
                    let _ = writeln!(s, "{},{},{}", p.t, fmt(p.dphi), fmt(p.phi.map(|x| -x * x)));
                }
                s
            }),
        ];
        for (name, content) in panels {
            let path = out_dir.join(name);
            std::fs::write(&path, content)
                .map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))?;
            files.push(path);
        }
    }
    Ok(FigureData { files, warnings })
}

/// `threshold`: trapping threshold report.
pub fn threshold_report(a: f64) -> Result<String> {
    match riccati::trapping_threshold(a) {
        Ok(r) => Ok(format!(
            "T*({a}) = {:.6}\nresidual eta''+2eta' = {:.3e}\nbisection iterations = {}\n",
            r.t_star, r.residual, r.iterations
        )),
        Err(Error::NoCrossing { a, lo, hi }) => Ok(format!(
            "no crossing: eta''+2eta' keeps one sign on ({lo}, {hi}] for a = {a}\n"
        )),
        Err(e) => Err(e),
    }
}

pub struct McCheck {
    pub name: String,
    pub estimate: McEstimate,
    pub target: f64,
    pub pass: bool,
}

/// The validate-mc suite: expectation identities checked at 4 stderr.
pub fn validate_mc_checks(samples: u64, seed: u64) -> Result<Vec<McCheck>> {
    let cfg = McConfig::new(samples, seed)?;
    let mut checks = Vec::new();
    let mut push = |name: String, est: McEstimate, target: f64| {
        let pass = (est.mean - target).abs() <= 4.0 * est.stderr;
        checks.push(McCheck { name, estimate: est, target, pass });
    };

    let p11 = EtaPoint::new(1.0, 1.0)?;
    push("E[f_1(X_1)] = eta(1)".into(), mc::mc_eta(&p11, &cfg), std::f64::consts::LN_2);

    let p22 = EtaPoint::new(2.0, 2.0)?;
    push("E[f_2(X_2)] = beta(2)".into(), mc::mc_eta(&p22, &cfg), 0.915965594177219);

    let (_, etap1) = convergence_references();
    push("E[f_1'(X_1+S_1)] = eta'(1)".into(), mc::mc_eta_deriv(&p11, 1, &cfg)?, etap1);

    let direct22 = series::eta_deriv_direct(&p22, 2, &SeriesAccuracy::default());
    push("E[f_2''(X_2+S_2)] = eta''(2)".into(), mc::mc_eta_deriv(&p22, 2, &cfg)?, direct22.value);

    for k in 1..=3u32 {
        for &lambda in &[0.5, 1.0, 2.0] {
            push(
                format!("E[exp(-{lambda} S_{k})]"),
                mc::mc_laplace_sk(k, lambda, &cfg)?,
                mc::laplace_sk_exact(k, lambda),
            );
        }
    }
    Ok(checks)
}

/// `validate-mc`: renders the suite; `all_pass == false` means exit 1.
pub fn validate_mc(samples: u64, seed: u64) -> Result<(String, bool)> {
    let checks = validate_mc_checks(samples, seed)?;
    let mut text = String::new();
    let _ = writeln!(text, "# Monte Carlo validation: {samples} samples, seed {seed}, band 4*stderr");
    let mut all = true;
    for c in &checks {
        all &= c.pass;
        let dev = (c.estimate.mean - c.target).abs() / c.estimate.stderr;
        let _ = writeln!(
            text,
            "{:<28} mean={:+.6} stderr={:.2e} target={:+.6} dev={:.2}sd {}",
            c.name,
            c.estimate.mean,
            c.estimate.stderr,
            c.target,
            dev,
            if c.pass { "PASS" } else { "FAIL" }
        );
    }
    let _ = writeln!(text, "{}", if all { "all checks passed" } else { "validation FAILED" });
    Ok((text, all))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SonifyPreset {
    Theme,
    Composition,
}

pub struct SonifyFlags {
    pub preset: SonifyPreset,
    pub a: Option<f64>,
    pub t_start: Option<f64>,
    pub t_end: Option<f64>,
    pub steps: Option<usize>,
}

/// `sonify`: build the melody and write the Standard MIDI File.
pub fn sonify_cmd(flags: &SonifyFlags, out: &Path) -> Result<String> {
    let mut cfg: MelodyConfig = match flags.preset {
        SonifyPreset::Theme => sonify::theme_preset(),
        SonifyPreset::Composition => sonify::composition_preset(),
    };
    if let Some(a) = flags.a {
        cfg.a = a;
    }
    if let Some(t) = flags.t_start {
        cfg.t_start = t;
    }
    if let Some(t) = flags.t_end {
        cfg.t_end = t;
    }
    if let Some(s) = flags.steps {
        cfg.steps = s;
    }
    let doc = sonify::compose(&cfg)?;
    let bytes = sonify::write_midi(&doc);
    std::fs::write(out, &bytes).map_err(|e| Error::Config(format!("cannot write {}: {e}", out.display())))?;
    Ok(format!(
        "wrote {} ({} notes, {:.1} s at {:.2} bpm)\n",
        out.display(),
        doc.events.len(),
        doc.playback_seconds(),
        doc.tempo_bpm
    ))
}
