//! Closed-form per-mode convergence factors and effective-capacity counts.
//!
//! After `T` steps of preconditioned gradient descent on a quadratic, mode
//! `i` has shed a fraction `c_i = 1 − (1 − r_i)^T` of its initial error, where
//! `r_i` is the mode's effective rate. Plain GD has `r_i = η·λ_i`; full
//! natural gradient equalizes all rates to `η`; the Matrix-Sign
//! preconditioner gives `r_i = η·√(λ_i/λ_1)`, halving the log dynamic range.

use std::io::Write;

use crate::datagen::{power_law_eigenvalues, SpectrumConfig};
use crate::error::{Error, Result};
use crate::optim::STEP_SCALE;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeConvergence {
    /// 1-based.
    pub mode_index: usize,
    pub eigenvalue: f64,
    pub factor: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapacityReport {
    pub n: usize,
    pub effective_modes: usize,
    pub wasted_fraction: f64,
    pub epsilon: f64,
}

fn decay(rate: f64, steps: usize) -> f64 {
    let base = 1.0 - rate;
    match i32::try_from(steps) {
        Ok(t) => base.powi(t),
        Err(_) => base.powf(steps as f64),
    }
}

/// `1 − (1 − η·λ)^T`; fails when `η·λ > 2`.
pub fn conv_factor_gd(eta: f64, lambda: f64, steps: usize) -> Result<f64> {
    if !(eta > 0.0) || !(lambda > 0.0) || steps == 0 {
        return Err(Error::invalid("conv_factor_gd needs η > 0, λ > 0 and T ≥ 1"));
    }
    let rate = eta * lambda;
    if rate > 2.0 {
        return Err(Error::DivergentMode { rate });
    }
    Ok(1.0 - decay(rate, steps))
}

/// `1 − (1 − η)^T`, independent of the mode's eigenvalue.
pub fn conv_factor_ng(eta: f64, steps: usize) -> f64 {
    1.0 - decay(eta, steps)
}

/// `1 − (1 − η·√(λ_i/λ_1))^T`.
pub fn conv_factor_matrix_sign(eta: f64, lambda_i: f64, lambda_1: f64, steps: usize) -> f64 {
    1.0 - decay(eta * (lambda_i / lambda_1).sqrt(), steps)
}

/// `λ_1/λ_N = N^{1+s}` for the power-law spectrum.
pub fn dynamic_range(n: usize, s: f64) -> f64 {
    (n as f64).powf(1.0 + s)
}

/// `ln λ_first − ln λ_last`.
pub fn log_dynamic_range(log_eigs: &[f64]) -> f64 {
    match (log_eigs.first(), log_eigs.last()) {
        (Some(a), Some(b)) => a - b,
        _ => 0.0,
    }
}

pub fn log_spectrum(eigs: &[f64]) -> Vec<f64> {
    eigs.iter().map(|l| l.ln()).collect()
}

/// Log-eigenvalues seen through `(FᵀF)^{-1/2}` preconditioning: `½·ln λ_i`.
pub fn matrix_sign_log_spectrum(eigs: &[f64]) -> Vec<f64> {
    eigs.iter().map(|l| 0.5 * l.ln()).collect()
}

pub fn gd_factors(eigs: &[f64], eta: f64, steps: usize) -> Result<Vec<ModeConvergence>> {
    eigs.iter()
        .enumerate()
        .map(|(i, &l)| {
            Ok(ModeConvergence {
                mode_index: i + 1,
                eigenvalue: l,
                factor: conv_factor_gd(eta, l, steps)?,
            })
        })
        .collect()
}

pub fn ng_factors(eigs: &[f64], eta: f64, steps: usize) -> Vec<ModeConvergence> {
    let c = conv_factor_ng(eta, steps);
    eigs.iter()
        .enumerate()
        .map(|(i, &l)| ModeConvergence {
            mode_index: i + 1,
            eigenvalue: l,
            factor: c,
        })
        .collect()
}

pub fn matrix_sign_factors(eigs: &[f64], eta: f64, steps: usize) -> Vec<ModeConvergence> {
    let top = eigs.iter().fold(0.0f64, |m, &l| m.max(l));
    eigs.iter()
        .enumerate()
        .map(|(i, &l)| ModeConvergence {
            mode_index: i + 1,
            eigenvalue: l,
            factor: conv_factor_matrix_sign(eta, l, top, steps),
        })
        .collect()
}

/// Counts modes among the first `n` with `c_i > 1 − ε`.
pub fn capacity_report(factors: &[ModeConvergence], n: usize, epsilon: f64) -> Result<CapacityReport> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::invalid(format!("ε must lie in (0, 1), got {epsilon}")));
    }
    if n == 0 {
        return Err(Error::invalid("capacity report needs N ≥ 1"));
    }
    let threshold = 1.0 - epsilon;
    let effective_modes = factors.iter().take(n).filter(|m| m.factor > threshold).count();
    Ok(CapacityReport {
        n,
        effective_modes,
        wasted_fraction: 1.0 - effective_modes as f64 / n as f64,
        epsilon,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropositionPoint {
    /// Spectral exponent; 0 labels a flat spectrum.
    pub s: f64,
    pub gd: CapacityReport,
    pub ng: CapacityReport,
    pub matrix_sign: CapacityReport,
}

impl PropositionPoint {
    pub fn ng_minus_gd(&self) -> i64 {
        self.ng.effective_modes as i64 - self.gd.effective_modes as i64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropositionReport {
    pub n: usize,
    pub steps: usize,
    pub epsilon: f64,
    /// Sorted by ascending `s`.
    pub points: Vec<PropositionPoint>,
    /// NG keeps at least as many effective modes as GD at every point.
    pub claim_i: bool,
    /// GD wasted fraction is non-decreasing in `s`.
    pub claim_ii: bool,
    /// The NG − GD gap shrinks as `s` decreases, smallest at the flattest spectrum.
    pub claim_iii: bool,
    pub violations: Vec<String>,
}

impl PropositionReport {
    pub fn all_satisfied(&self) -> bool {
        self.claim_i && self.claim_ii && self.claim_iii
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "spectral heuristic check: N={} T={} epsilon={}\n",
            self.n, self.steps, self.epsilon
        ));
        out.push_str(&format!(
            "{:>8} {:>8} {:>8} {:>8} {:>10} {:>10}\n",
            "s", "Neff_GD", "Neff_NG", "Neff_MS", "NG-GD", "wasted_GD"
        ));
        for p in &self.points {
            out.push_str(&format!(
                "{:>8} {:>8} {:>8} {:>8} {:>10} {:>10.4}\n",
                p.s,
                p.gd.effective_modes,
                p.ng.effective_modes,
                p.matrix_sign.effective_modes,
                p.ng_minus_gd(),
                p.gd.wasted_fraction
            ));
        }
        let tag = |ok: bool| if ok { "satisfied" } else { "violated" };
        out.push_str(&format!("claim (i): NG effective modes >= GD at every s: {}\n", tag(self.claim_i)));
        out.push_str(&format!("claim (ii): GD wasted fraction non-decreasing in s: {}\n", tag(self.claim_ii)));
        let flattest = self.points.first().map(|p| (p.s, p.ng_minus_gd()));
        match flattest {
            Some((s, gap)) => out.push_str(&format!(
                "claim (iii): NG-GD gap shrinks toward flat spectrum (gap {gap} at s={s}): {}\n",
                tag(self.claim_iii)
            )),
            None => out.push_str(&format!("claim (iii): {}\n", tag(self.claim_iii))),
        }
        for v in &self.violations {
            out.push_str(&format!("violation: {v}\n"));
        }
        out
    }

    /// Delimited table: one row per (s, optimizer).
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let csv_err = |e: csv::Error| Error::invalid(format!("writing theory table: {e}"));
        wtr.write_record(["s", "optimizer", "N", "T", "epsilon", "effective_modes", "wasted_fraction"])
            .map_err(csv_err)?;
        for p in &self.points {
            for (name, r) in [("GD", &p.gd), ("FullNG", &p.ng), ("MatrixSign", &p.matrix_sign)] {
                wtr.write_record([
                    p.s.to_string(),
                    name.to_string(),
                    r.n.to_string(),
                    self.steps.to_string(),
                    r.epsilon.to_string(),
                    r.effective_modes.to_string(),
                    r.wasted_fraction.to_string(),
                ])
                .map_err(csv_err)?;
            }
        }
        wtr.flush().map_err(|e| Error::invalid(format!("writing theory table: {e}")))
    }
}

/// GD at `η = 1.5/λ_1`, NG and Matrix-Sign at unit normalized step.
pub fn point_for_spectrum(s: f64, eigs: &[f64], n: usize, steps: usize, epsilon: f64) -> Result<PropositionPoint> {
    if eigs.len() < n {
        return Err(Error::invalid(format!("spectrum has {} modes, need N = {n}", eigs.len())));
    }
    let eigs = &eigs[..n];
    let top = eigs.iter().fold(0.0f64, |m, &l| m.max(l));
    if !(top > 0.0) || eigs.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::invalid("spectrum must be positive"));
    }
    let gd = capacity_report(&gd_factors(eigs, STEP_SCALE / top, steps)?, n, epsilon)?;
    let ng = capacity_report(&ng_factors(eigs, 1.0, steps), n, epsilon)?;
    let matrix_sign = capacity_report(&matrix_sign_factors(eigs, 1.0, steps), n, epsilon)?;
    Ok(PropositionPoint { s, gd, ng, matrix_sign })
}

/// Evaluates the three claims on labelled spectra (`s` labels, eigenvalues).
pub fn proposition_check_spectra(
    spectra: &[(f64, Vec<f64>)],
    n: usize,
    steps: usize,
    epsilon: f64,
) -> Result<PropositionReport> {
    if spectra.is_empty() {
        return Err(Error::invalid("s grid is empty"));
    }
    if steps == 0 {
        return Err(Error::invalid("T must be at least 1"));
    }
    let mut points = spectra
        .iter()
        .map(|(s, eigs)| point_for_spectrum(*s, eigs, n, steps, epsilon))
        .collect::<Result<Vec<_>>>()?;
    points.sort_by(|a, b| a.s.total_cmp(&b.s));

    let mut violations = vec![];
    for p in &points {
        if p.ng.effective_modes < p.gd.effective_modes {
            violations.push(format!("(i) at s={}: NG {} < GD {}", p.s, p.ng.effective_modes, p.gd.effective_modes));
        }
    }
    let claim_i = violations.is_empty();

    let mut claim_ii = true;
    let mut claim_iii = true;
    for w in points.windows(2) {
        if w[1].gd.wasted_fraction < w[0].gd.wasted_fraction {
            claim_ii = false;
            violations.push(format!(
                "(ii) GD wasted fraction drops from {} at s={} to {} at s={}",
                w[0].gd.wasted_fraction, w[0].s, w[1].gd.wasted_fraction, w[1].s
            ));
        }
        if w[1].ng_minus_gd() < w[0].ng_minus_gd() {
            claim_iii = false;
            violations.push(format!(
                "(iii) NG-GD gap {} at s={} exceeds {} at s={}",
                w[0].ng_minus_gd(),
                w[0].s,
                w[1].ng_minus_gd(),
                w[1].s
            ));
        }
    }

    Ok(PropositionReport {
        n,
        steps,
        epsilon,
        points,
        claim_i,
        claim_ii,
        claim_iii,
        violations,
    })
}

/// Claims on the idealized spectra `λ_i = i^{-(1+s)}`, `i = 1..=N`.
pub fn proposition_check(s_grid: &[f64], n: usize, steps: usize, epsilon: f64) -> Result<PropositionReport> {
    if n == 0 {
        return Err(Error::invalid("N must be at least 1"));
    }
    let spectra = s_grid
        .iter()
        .map(|&s| Ok((s, power_law_eigenvalues(&SpectrumConfig::new(n, s)?)?)))
        .collect::<Result<Vec<_>>>()?;
    proposition_check_spectra(&spectra, n, steps, epsilon)
}
