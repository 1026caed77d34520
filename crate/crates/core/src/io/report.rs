use std::fmt::Write as _;

use crate::adaptive::AdaptiveReport;
use crate::solver::{ConstraintMode, SolveConfig, SolveReport};

pub const REPORT_HEADER: &str = "tau,eps0,eps_star,omega_tilde,n_c,it,kappa";

/// One row of the run report. Errors are printed in percent, missing values
/// as empty fields.
#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub tag: String,
    pub eps0: Option<f64>,
    pub eps_star: Option<f64>,
    pub omega_tilde: Option<f64>,
    pub n_c: usize,
    pub iterations: usize,
    pub kappa: f64,
}

impl ReportRow {
    pub fn new(config: &SolveConfig, report: &SolveReport) -> Self {
        let tag = match config.constraints {
            ConstraintMode::Multiscale => "ms".to_string(),
            ConstraintMode::Initial => "inf".to_string(),
            ConstraintMode::Adaptive if config.tau.is_infinite() => "inf".to_string(),
            ConstraintMode::Adaptive => format!("{}", config.tau),
        };
        Self {
            tag,
            eps0: report.eps0,
            eps_star: report.eps_star,
            omega_tilde: report.omega_tilde,
            n_c: report.n_c,
            iterations: report.iterations,
            kappa: report.kappa,
        }
    }

    pub fn csv_line(&self) -> String {
        let opt = |v: Option<f64>, pct: bool| v.map_or(String::new(), |x| format!("{:.4}", if pct { 100.0 * x } else { x }));
        format!(
            "{},{},{},{},{},{},{:.4}",
            self.tag,
            opt(self.eps0, true),
            opt(self.eps_star, true),
            opt(self.omega_tilde, false),
            self.n_c,
            self.iterations,
            self.kappa
        )
    }

    pub fn csv(rows: &[ReportRow]) -> String {
        let mut out = String::from(REPORT_HEADER);
        out.push('\n');
        for r in rows {
            out.push_str(&r.csv_line());
            out.push('\n');
        }
        out
    }
}

pub fn residual_csv(history: &[f64]) -> String {
    let mut out = String::from("iter,relres\n");
    for (i, r) in history.iter().enumerate() {
        writeln!(out, "{i},{r:.6e}").unwrap();
    }
    out
}

/// Eigenvalues in the given order, one per line.
pub fn spectrum_csv(values: &[f64]) -> String {
    let mut out = String::from("index,lambda\n");
    for (i, v) in values.iter().enumerate() {
        writeln!(out, "{},{v:.10e}", i + 1).unwrap();
    }
    out
}

/// Pair spectra, largest first, `rank` starting at 1.
pub fn eigs_csv(report: &AdaptiveReport) -> String {
    let mut out = String::from("i,j,rank,lambda\n");
    for p in &report.pairs {
        for (r, v) in p.eigenvalues.iter().enumerate() {
            writeln!(out, "{},{},{},{v:.10e}", p.pair.0, p.pair.1, r + 1).unwrap();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn multiscale_row_has_empty_indicator() {
        let cfg = SolveConfig { constraints: ConstraintMode::Multiscale, ..Default::default() };
        let rep = SolveReport { n_c: 7, iterations: 12, kappa: 3.5, eps0: Some(0.5), eps_star: Some(0.125), ..Default::default() };
        let row = ReportRow::new(&cfg, &rep);
        assert_eq!(row.csv_line(), "ms,50.0000,12.5000,,7,12,3.5000");
    }

    #[test]
    fn adaptive_tags() {
        let rep = SolveReport { omega_tilde: Some(2.5), ..Default::default() };
        let cfg = SolveConfig { tau: 10.0, constraints: ConstraintMode::Adaptive, ..Default::default() };
        assert!(ReportRow::new(&cfg, &rep).csv_line().starts_with("10,,,2.5000,"));
        let cfg = SolveConfig { constraints: ConstraintMode::Adaptive, ..Default::default() };
        assert!(ReportRow::new(&cfg, &rep).csv_line().starts_with("inf,"));
        let csv = ReportRow::csv(&[ReportRow::new(&cfg, &rep)]);
        assert_eq!(csv.lines().next().unwrap(), REPORT_HEADER);
    }

    #[test]
    fn residual_lines() {
        assert_eq!(residual_csv(&[1.0, 0.5]), "iter,relres\n0,1.000000e0\n1,5.000000e-1\n");
    }
}
