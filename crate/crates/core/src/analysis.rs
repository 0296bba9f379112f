//! Scaling-exponent fits, compute multipliers, convergence-gap summaries,
//! spectral diagnostics and plot data.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::experiment::ResultsTable;
use crate::numerics::{ols_fit, LinearFit};
use crate::optim::OptimizerKind;

/// R² below this marks a fit as a poor power law.
pub const R2_FLAG: f64 = 0.8;

/// Aggregate over seeds at one model size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelStats {
    pub n: usize,
    pub mean_loss: f64,
    /// Standard error of the mean; `None` with fewer than two seeds.
    pub std_err: Option<f64>,
    pub seeds_used: usize,
    pub seeds_total: usize,
}

/// Seed statistics per N for one (s, optimizer), ascending in N.
/// Diverged rows count toward `seeds_total` only.
pub fn level_stats(table: &ResultsTable, s: f64, optimizer: OptimizerKind) -> Vec<LevelStats> {
    let mut ns: Vec<usize> = table.select(s, optimizer).map(|r| r.n).collect();
    ns.sort_unstable();
    ns.dedup();
    ns.into_iter()
        .map(|n| {
            let rows: Vec<_> = table.select(s, optimizer).filter(|r| r.n == n).collect();
            let losses: Vec<f64> = rows
                .iter()
                .filter(|r| !r.diverged)
                .filter_map(|r| r.test_loss)
                .filter(|l| l.is_finite())
                .collect();
            let k = losses.len();
            let mean = if k == 0 { f64::NAN } else { losses.iter().sum::<f64>() / k as f64 };
            let std_err = (k >= 2).then(|| {
                let var = losses.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
                (var / k as f64).sqrt()
            });
            LevelStats {
                n,
                mean_loss: mean,
                std_err,
                seeds_used: k,
                seeds_total: rows.len(),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawFit {
    /// Scaling exponent: minus the log-log slope.
    pub alpha: f64,
    /// Half-width of the 95% interval on alpha; infinite with two points.
    pub ci95: f64,
    pub r2: f64,
    /// Intercept of `ln L = intercept − alpha·ln N`.
    pub intercept: f64,
    pub n_points: usize,
    /// Smallest and largest N that entered the fit.
    pub n_min_used: usize,
    pub n_max_used: usize,
    /// Some N level lost more than half its seeds to divergence.
    pub low_confidence: bool,
}

impl PowerLawFit {
    pub fn flagged(&self) -> bool {
        self.r2 < R2_FLAG
    }

    /// Predicted loss at model size `n`.
    pub fn predict(&self, n: f64) -> f64 {
        (self.intercept - self.alpha * n.ln()).exp()
    }
}

fn t_quantile_975(dof: usize) -> f64 {
    if dof == 0 {
        return f64::INFINITY;
    }
    StudentsT::new(0.0, 1.0, dof as f64)
        .map(|t| t.inverse_cdf(0.975))
        .unwrap_or(f64::INFINITY)
}

/// Fits `ln(mean loss)` against `ln N` over the levels with `N ≥ n_min`.
pub fn fit_levels(levels: &[LevelStats], n_min: usize, optimizer: OptimizerKind, s: f64) -> Result<PowerLawFit> {
    let insufficient = |reason: String| Error::InsufficientData {
        optimizer: optimizer.to_string(),
        s,
        reason,
    };
    let used: Vec<&LevelStats> = levels.iter().filter(|l| l.n >= n_min && l.seeds_used > 0).collect();
    if used.len() < 2 {
        return Err(insufficient(format!(
            "{} usable N levels at N ≥ {n_min}, need at least 2",
            used.len()
        )));
    }
    if let Some(bad) = used.iter().find(|l| !(l.mean_loss > 0.0) || !l.mean_loss.is_finite()) {
        return Err(Error::InvalidLoss {
            n: bad.n,
            value: bad.mean_loss,
        });
    }
    let xs: Vec<f64> = used.iter().map(|l| (l.n as f64).ln()).collect();
    let ys: Vec<f64> = used.iter().map(|l| l.mean_loss.ln()).collect();
    let LinearFit {
        slope,
        intercept,
        slope_se,
        r2,
        n_points,
    } = ols_fit(&xs, &ys)?;
    let ci95 = if n_points <= 2 {
        f64::INFINITY
    } else {
        t_quantile_975(n_points - 2) * slope_se
    };
    let low_confidence = levels
        .iter()
        .filter(|l| l.n >= n_min)
        .any(|l| 2 * l.seeds_used < l.seeds_total);
    Ok(PowerLawFit {
        alpha: -slope,
        ci95,
        r2,
        intercept,
        n_points,
        n_min_used: used[0].n,
        n_max_used: used[used.len() - 1].n,
        low_confidence,
    })
}

pub fn fit_alpha(table: &ResultsTable, s: f64, optimizer: OptimizerKind, n_min: usize) -> Result<PowerLawFit> {
    fit_levels(&level_stats(table, s, optimizer), n_min, optimizer, s)
}

/// Fits for every (optimizer, s) pair present in a results table.
#[derive(Debug, Clone)]
pub struct AlphaTable {
    pub s_values: Vec<f64>,
    pub optimizers: Vec<OptimizerKind>,
    /// `fits[i][j]` is optimizer `i` at `s_values[j]`; failures keep their message.
    pub fits: Vec<Vec<std::result::Result<PowerLawFit, String>>>,
    /// Row index of the largest alpha per column.
    pub best: Vec<Option<usize>>,
    pub n_min: usize,
}

pub fn alpha_table(table: &ResultsTable, n_min: usize) -> Result<AlphaTable> {
    let s_values = table.s_values();
    let optimizers = table.optimizers();
    if s_values.is_empty() || optimizers.is_empty() {
        return Err(Error::invalid("results table has no rows"));
    }
    let fits: Vec<Vec<_>> = optimizers
        .iter()
        .map(|&k| {
            s_values
                .iter()
                .map(|&s| fit_alpha(table, s, k, n_min).map_err(|e| e.to_string()))
                .collect()
        })
        .collect();
    let best = (0..s_values.len())
        .map(|j| {
            (0..optimizers.len())
                .filter_map(|i| fits[i][j].as_ref().ok().map(|f| (i, f.alpha)))
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .map(|(i, _)| i)
        })
        .collect();
    Ok(AlphaTable {
        s_values,
        optimizers,
        fits,
        best,
        n_min,
    })
}

fn fmt_ci(ci: f64) -> String {
    if ci.is_finite() {
        format!("{ci:.3}")
    } else {
        "inf".into()
    }
}

impl AlphaTable {
    pub fn get(&self, optimizer: OptimizerKind, s: f64) -> Option<&std::result::Result<PowerLawFit, String>> {
        let i = self.optimizers.iter().position(|&k| k == optimizer)?;
        let j = self.s_values.iter().position(|&v| v == s)?;
        Some(&self.fits[i][j])
    }

    /// First failed fit, if any.
    pub fn first_error(&self) -> Option<String> {
        for (i, row) in self.fits.iter().enumerate() {
            for (j, f) in row.iter().enumerate() {
                if let Err(e) = f {
                    return Some(format!("{} at s={}: {e}", self.optimizers[i], self.s_values[j]));
                }
            }
        }
        None
    }

    fn grid(&self, cell: impl Fn(usize, usize) -> String) -> String {
        let mut header = vec!["Optimizer".to_string()];
        header.extend(self.s_values.iter().map(|s| format!("s={s}")));
        let mut rows = vec![header];
        for (i, k) in self.optimizers.iter().enumerate() {
            let mut row = vec![k.to_string()];
            row.extend((0..self.s_values.len()).map(|j| cell(i, j)));
            rows.push(row);
        }
        render_grid(&rows)
    }

    /// Alpha ± CI with `*` on the best optimizer per column.
    pub fn render(&self) -> String {
        let mut out = self.grid(|i, j| match &self.fits[i][j] {
            Ok(f) => {
                let mark = if self.best[j] == Some(i) { "*" } else { "" };
                let low = if f.low_confidence { " (low confidence)" } else { "" };
                format!("{:.3} ± {}{mark}{low}", f.alpha, fmt_ci(f.ci95))
            }
            Err(_) => "n/a".into(),
        });
        let _ = writeln!(out, "fits use N ≥ {}; * marks the largest alpha per column", self.n_min);
        out
    }

    /// R² grid with `*` on values below the flag threshold.
    pub fn render_r2(&self) -> String {
        let mut out = self.grid(|i, j| match &self.fits[i][j] {
            Ok(f) => format!("{:.3}{}", f.r2, if f.flagged() { "*" } else { "" }),
            Err(_) => "n/a".into(),
        });
        let _ = writeln!(out, "* marks R² < {R2_FLAG}");
        out
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record([
            "optimizer",
            "s",
            "alpha",
            "ci95",
            "r2",
            "intercept",
            "n_points",
            "low_confidence",
            "best",
        ])
        .map_err(csv_err)?;
        for (i, k) in self.optimizers.iter().enumerate() {
            for (j, s) in self.s_values.iter().enumerate() {
                if let Ok(f) = &self.fits[i][j] {
                    wtr.write_record([
                        k.to_string(),
                        s.to_string(),
                        f.alpha.to_string(),
                        f.ci95.to_string(),
                        f.r2.to_string(),
                        f.intercept.to_string(),
                        f.n_points.to_string(),
                        f.low_confidence.to_string(),
                        (self.best[j] == Some(i)).to_string(),
                    ])
                    .map_err(csv_err)?;
                }
            }
        }
        wtr.flush().map_err(|e| Error::invalid(e.to_string()))
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::invalid(format!("csv: {e}"))
}

fn render_grid(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| rows.iter().filter_map(|r| r.get(c)).map(|s| s.chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for (ri, row) in rows.iter().enumerate() {
        let cells: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(c, s)| format!("{s:<w$}", w = widths[c]))
            .collect();
        let _ = writeln!(out, "{}", cells.join(" | ").trim_end());
        if ri == 0 {
            let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
            let _ = writeln!(out, "{}", rule.join("-|-"));
        }
    }
    out
}

/// `alpha(optimizer) − alpha(baseline)` for every s, ascending.
pub fn delta_alpha(alphas: &AlphaTable, optimizer: OptimizerKind, baseline: OptimizerKind) -> Result<Vec<(f64, f64)>> {
    alphas
        .s_values
        .iter()
        .map(|&s| {
            let get = |k: OptimizerKind| -> Result<f64> {
                match alphas.get(k, s) {
                    Some(Ok(f)) => Ok(f.alpha),
                    Some(Err(e)) => Err(Error::InsufficientData {
                        optimizer: k.to_string(),
                        s,
                        reason: e.clone(),
                    }),
                    None => Err(Error::InsufficientData {
                        optimizer: k.to_string(),
                        s,
                        reason: "no results".into(),
                    }),
                }
            };
            Ok((s, get(optimizer)? - get(baseline)?))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Multiplier {
    Finite(f64),
    /// GD's fitted trend does not decrease significantly, so no GD size matches.
    Unbounded,
}

impl Multiplier {
    pub fn value(self) -> Option<f64> {
        match self {
            Multiplier::Finite(m) => Some(m),
            Multiplier::Unbounded => None,
        }
    }
}

impl std::fmt::Display for Multiplier {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Multiplier::Finite(m) => write!(f, "{m:.2}"),
            Multiplier::Unbounded => f.write_str("unbounded"),
        }
    }
}

/// Factor `m` such that GD at width `m·n_ref` matches `opt` at `n_ref`,
/// using the fitted power laws of both.
pub fn compute_multiplier(gd: &PowerLawFit, opt: &PowerLawFit, n_ref: f64) -> Result<Multiplier> {
    if !(n_ref > 0.0) || !n_ref.is_finite() {
        return Err(Error::invalid("reference width must be positive"));
    }
    if gd.alpha <= 0.0 || gd.alpha <= gd.ci95 {
        return Ok(Multiplier::Unbounded);
    }
    let log_target = opt.intercept - opt.alpha * n_ref.ln();
    let log_n_gd = (gd.intercept - log_target) / gd.alpha;
    Ok(Multiplier::Finite((log_n_gd - n_ref.ln()).exp()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultiplierEntry {
    pub optimizer: OptimizerKind,
    pub s: f64,
    pub n_ref: usize,
    pub multiplier: Multiplier,
}

/// Multipliers of every non-GD optimizer against GD, evaluated at the
/// largest N that entered both fits.
pub fn multiplier_table(alphas: &AlphaTable) -> Result<Vec<MultiplierEntry>> {
    if !alphas.optimizers.contains(&OptimizerKind::Gd) {
        return Err(Error::invalid("multipliers need GD results"));
    }
    let mut out = vec![];
    for &k in alphas.optimizers.iter().filter(|&&k| k != OptimizerKind::Gd) {
        for &s in &alphas.s_values {
            if let (Some(Ok(gd)), Some(Ok(opt))) = (alphas.get(OptimizerKind::Gd, s), alphas.get(k, s)) {
                let n_ref = gd.n_max_used.min(opt.n_max_used);
                out.push(MultiplierEntry {
                    optimizer: k,
                    s,
                    n_ref,
                    multiplier: compute_multiplier(gd, opt, n_ref as f64)?,
                });
            }
        }
    }
    Ok(out)
}

pub fn render_multipliers(entries: &[MultiplierEntry]) -> String {
    let mut rows = vec![vec!["Optimizer".into(), "s".into(), "N_ref".into(), "multiplier".into()]];
    for e in entries {
        rows.push(vec![
            e.optimizer.to_string(),
            e.s.to_string(),
            e.n_ref.to_string(),
            e.multiplier.to_string(),
        ]);
    }
    render_grid(&rows)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapSummary {
    pub optimizer: OptimizerKind,
    pub s: f64,
    pub n: usize,
    pub mean_gap: f64,
    pub seeds: usize,
}

/// Mean relative gap to the ridge oracle per (optimizer, s, N); the direct
/// solve is its own oracle and is left out.
pub fn convergence_summary(table: &ResultsTable) -> Vec<GapSummary> {
    let mut out: Vec<GapSummary> = vec![];
    for r in &table.rows {
        if r.optimizer == OptimizerKind::FullNg || r.diverged {
            continue;
        }
        let Some(gap) = r.convergence_gap.filter(|g| g.is_finite()) else {
            continue;
        };
        match out
            .iter_mut()
            .find(|g| g.optimizer == r.optimizer && g.s == r.s && g.n == r.n)
        {
            Some(g) => {
                g.mean_gap += gap;
                g.seeds += 1;
            }
            None => out.push(GapSummary {
                optimizer: r.optimizer,
                s: r.s,
                n: r.n,
                mean_gap: gap,
                seeds: 1,
            }),
        }
    }
    for g in &mut out {
        g.mean_gap /= g.seeds as f64;
    }
    out.sort_by(|a, b| {
        a.s.total_cmp(&b.s)
            .then(a.optimizer.cmp(&b.optimizer))
            .then(a.n.cmp(&b.n))
    });
    out
}

pub fn render_gaps(gaps: &[GapSummary]) -> String {
    let mut rows = vec![vec!["Optimizer".into(), "s".into(), "N".into(), "mean gap".into(), "seeds".into()]];
    for g in gaps {
        rows.push(vec![
            g.optimizer.to_string(),
            g.s.to_string(),
            g.n.to_string(),
            format!("{:.4}", g.mean_gap),
            g.seeds.to_string(),
        ]);
    }
    render_grid(&rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PayoffBand {
    Negligible,
    Moderate,
    Large,
}

impl PayoffBand {
    pub fn for_exponent(s: f64) -> Self {
        if s < 0.3 {
            PayoffBand::Negligible
        } else if s >= 0.75 {
            PayoffBand::Large
        } else {
            PayoffBand::Moderate
        }
    }

    pub fn describe(self) -> &'static str {
        match self {
            PayoffBand::Negligible => "negligible: preconditioning is unlikely to change the scaling exponent",
            PayoffBand::Moderate => "moderate: diagonal or matrix-sign preconditioning may help somewhat",
            PayoffBand::Large => "large: ill-conditioned spectrum, preconditioning should improve the exponent",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralDiagnostic {
    pub s_hat: f64,
    pub r2: f64,
    pub n_points: usize,
    pub band: PayoffBand,
}

impl SpectralDiagnostic {
    pub fn render(&self) -> String {
        format!(
            "estimated spectral exponent s = {:.3} (R² {:.3}, {} eigenvalues)\nexpected optimizer payoff: {}\n",
            self.s_hat,
            self.r2,
            self.n_points,
            self.band.describe()
        )
    }
}

/// Fits `ln λ_i = c − (1 + s)·ln i` over the 1-based inclusive index
/// `range` (default: all) of the eigenvalues sorted descending.
pub fn estimate_spectral_exponent(eigs: &[f64], range: Option<(usize, usize)>) -> Result<SpectralDiagnostic> {
    let mut sorted: Vec<f64> = eigs.to_vec();
    if sorted.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("eigenvalues must be finite"));
    }
    sorted.sort_by(|a, b| b.total_cmp(a));
    let (lo, hi) = range.unwrap_or((1, sorted.len()));
    if lo == 0 || lo > hi || hi > sorted.len() {
        return Err(Error::invalid(format!(
            "index range {lo}..{hi} is outside 1..{}",
            sorted.len()
        )));
    }
    let window = &sorted[lo - 1..hi];
    if window.len() < 2 {
        return Err(Error::invalid("need at least two eigenvalues to fit"));
    }
    if window.iter().any(|&v| v <= 0.0) {
        return Err(Error::invalid("eigenvalues in the fit range must be positive"));
    }
    let xs: Vec<f64> = (lo..=hi).map(|i| (i as f64).ln()).collect();
    let ys: Vec<f64> = window.iter().map(|v| v.ln()).collect();
    let fit = ols_fit(&xs, &ys)?;
    let s_hat = -fit.slope - 1.0;
    Ok(SpectralDiagnostic {
        s_hat,
        r2: fit.r2,
        n_points: fit.n_points,
        band: PayoffBand::for_exponent(s_hat),
    })
}

/// Reads one eigenvalue per line; blank lines and `#` comments are skipped.
pub fn parse_eigenvalues(text: &str, origin: &Path) -> Result<Vec<f64>> {
    let mut out = vec![];
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let bad = |what: &str| Error::Schema {
            path: origin.to_path_buf(),
            reason: format!("line {}: `{t}` {what}", i + 1),
        };
        let v: f64 = t.parse().map_err(|_| bad("is not a number"))?;
        if !(v > 0.0) || !v.is_finite() {
            return Err(bad("is not a positive eigenvalue"));
        }
        out.push(v);
    }
    if out.is_empty() {
        return Err(Error::Schema {
            path: origin.to_path_buf(),
            reason: "no eigenvalues found".into(),
        });
    }
    Ok(out)
}

pub fn read_eigenvalue_file(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_eigenvalues(&text, path)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    /// Loss against N per s, one series per optimizer.
    LossCurves,
    /// Alpha against s per optimizer.
    AlphaVsS,
    /// Compute multipliers against s.
    Multipliers,
    /// Convergence gaps against N per s.
    Gaps,
}

impl Figure {
    pub const ALL: [Figure; 4] = [Figure::LossCurves, Figure::AlphaVsS, Figure::Multipliers, Figure::Gaps];

    pub fn from_number(k: u8) -> Result<Self> {
        match k {
            1 => Ok(Figure::LossCurves),
            2 => Ok(Figure::AlphaVsS),
            3 => Ok(Figure::Multipliers),
            4 => Ok(Figure::Gaps),
            _ => Err(Error::invalid(format!("unknown figure {k}, expected 1-4"))),
        }
    }
}

fn s_tag(s: f64) -> String {
    s.to_string()
}

fn create(path: &Path) -> Result<fs::File> {
    fs::File::create(path).map_err(|e| Error::io(path, e))
}

/// Writes the CSV files behind `figure` into `out_dir` and returns their paths.
pub fn write_plot_data(table: &ResultsTable, figure: Figure, n_min: usize, out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = vec![];
    match figure {
        Figure::LossCurves => {
            if table.is_empty() {
                return Err(Error::invalid("results table has no rows"));
            }
            for s in table.s_values() {
                let path = out_dir.join(format!("fig1_s{}.csv", s_tag(s)));
                let mut wtr = csv::Writer::from_writer(create(&path)?);
                wtr.write_record(["optimizer", "N", "mean_loss", "std_err", "seeds_used", "seeds_total"])
                    .map_err(csv_err)?;
                for k in table.optimizers() {
                    for l in level_stats(table, s, k) {
                        wtr.write_record([
                            k.to_string(),
                            l.n.to_string(),
                            if l.seeds_used > 0 { l.mean_loss.to_string() } else { String::new() },
                            l.std_err.map(|v| v.to_string()).unwrap_or_default(),
                            l.seeds_used.to_string(),
                            l.seeds_total.to_string(),
                        ])
                        .map_err(csv_err)?;
                    }
                }
                wtr.flush().map_err(|e| Error::io(&path, e))?;
                written.push(path);
            }
        }
        Figure::AlphaVsS => {
            let alphas = alpha_table(table, n_min)?;
            let path = out_dir.join("fig2.csv");
            alphas.write_csv(create(&path)?)?;
            written.push(path);
        }
        Figure::Multipliers => {
            let alphas = alpha_table(table, n_min)?;
            let entries = multiplier_table(&alphas)?;
            let path = out_dir.join("fig3.csv");
            let mut wtr = csv::Writer::from_writer(create(&path)?);
            wtr.write_record(["optimizer", "s", "N_ref", "multiplier", "unbounded"])
                .map_err(csv_err)?;
            for e in entries {
                wtr.write_record([
                    e.optimizer.to_string(),
                    e.s.to_string(),
                    e.n_ref.to_string(),
                    e.multiplier.value().map(|v| v.to_string()).unwrap_or_default(),
                    (e.multiplier == Multiplier::Unbounded).to_string(),
                ])
                .map_err(csv_err)?;
            }
            wtr.flush().map_err(|e| Error::io(&path, e))?;
            written.push(path);
        }
        Figure::Gaps => {
            let gaps = convergence_summary(table);
            if gaps.is_empty() {
                return Err(Error::invalid("no iterative-optimizer gaps in results"));
            }
            let mut ss: Vec<f64> = gaps.iter().map(|g| g.s).collect();
            ss.dedup();
            for s in ss {
                let path = out_dir.join(format!("fig4_s{}.csv", s_tag(s)));
                let mut wtr = csv::Writer::from_writer(create(&path)?);
                wtr.write_record(["optimizer", "N", "mean_gap", "seeds"]).map_err(csv_err)?;
                for g in gaps.iter().filter(|g| g.s == s) {
                    wtr.write_record([
                        g.optimizer.to_string(),
                        g.n.to_string(),
                        g.mean_gap.to_string(),
                        g.seeds.to_string(),
                    ])
                    .map_err(csv_err)?;
                }
                wtr.flush().map_err(|e| Error::io(&path, e))?;
                written.push(path);
            }
        }
    }
    Ok(written)
}
