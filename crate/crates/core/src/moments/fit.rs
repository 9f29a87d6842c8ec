//! Power-law fits of `log E[u^n]` against `n` or `t`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::math::ln;
use crate::stats::{least_squares, LinearFit};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitMode {
    /// Abscissa is the moment order `n`.
    N,
    /// Abscissa is the time `t`.
    T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitPoint {
    /// `n` or `t`.
    pub abscissa: f64,
    pub log_mean: f64,
    pub stderr_log: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub mode: FitMode,
    pub fit: LinearFit,
    /// Points that entered the fit.
    pub used: Vec<FitPoint>,
    /// `log(log_mean) - (slope·log(abscissa) + intercept)` per used point.
    pub residuals: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Least-squares fit of `log(log_mean)` against `log(abscissa)`.
///
/// Points with nonpositive `log_mean`, or with `stderr_log >= 0.2·|log_mean|`,
/// are dropped with a warning. At least three points must remain.
pub fn fit_exponents(points: &[FitPoint], mode: FitMode) -> Result<FitReport> {
    let mut warnings = Vec::new();
    let mut used = Vec::new();
    for p in points {
        if !(p.log_mean > 0.0) {
            warnings.push(format!("dropped point at {}: log_mean = {} is not positive", p.abscissa, p.log_mean));
        } else if !(p.stderr_log < 0.2 * p.log_mean.abs()) {
            warnings.push(format!(
                "dropped point at {}: stderr {} is not below 0.2·|log_mean|",
                p.abscissa, p.stderr_log
            ));
        } else if !(p.abscissa > 0.0) {
            warnings.push(format!("dropped point with nonpositive abscissa {}", p.abscissa));
        } else {
            used.push(*p);
        }
    }
    if used.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "{} usable points, need at least 3",
            used.len()
        )));
    }
    let x: Vec<f64> = used.iter().map(|p| ln(p.abscissa)).collect();
    let y: Vec<f64> = used.iter().map(|p| ln(p.log_mean)).collect();
    let fit = least_squares(&x, &y)
        .ok_or_else(|| Error::InsufficientData(String::from("abscissae are all equal")))?;
    let residuals = x.iter().zip(&y).map(|(a, b)| b - (fit.slope * a + fit.intercept)).collect();
    Ok(FitReport {
        mode,
        fit,
        used,
        residuals,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::pow;

    fn pt(a: f64, l: f64) -> FitPoint {
        FitPoint {
            abscissa: a,
            log_mean: l,
            stderr_log: 0.0,
        }
    }

    #[test]
    fn exact_power_law() {
        let pts: Vec<_> = (1..=6).map(|n| pt(n as f64, 3.0 * pow(n as f64, 3.0))).collect();
        let r = fit_exponents(&pts, FitMode::N).unwrap();
        assert!((r.fit.slope - 3.0).abs() < 1e-9);
        assert!((r.fit.intercept - ln(3.0)).abs() < 1e-9);
    }

    #[test]
    fn drops_and_errors() {
        let pts = [pt(1.0, -1.0), pt(2.0, 1.0), pt(3.0, 2.0), pt(4.0, 3.0)];
        let r = fit_exponents(&pts, FitMode::T).unwrap();
        assert_eq!(r.used.len(), 3);
        assert_eq!(r.warnings.len(), 1);
        let noisy = FitPoint {
            stderr_log: 1.0,
            ..pt(5.0, 1.0)
        };
        assert!(matches!(
            fit_exponents(&[pt(1.0, 1.0), pt(2.0, 2.0), noisy], FitMode::N),
            Err(Error::InsufficientData(_))
        ));
    }
}
