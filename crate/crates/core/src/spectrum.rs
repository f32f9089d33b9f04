//! Closed-form long-time energy spectrum of the model under Pao's closure.
//!
//! The steady spectrum solves
//! `d/dk(C_k⁻¹ ε0^{1/3} k^{5/3} E) + (2νk² + 2αγk^{2α}) E = 0` with
//! `E(1) = ½U²`. Evaluation uses the normalized forms
//!
//! ```text
//! α = 1/3:  E = ½U² k^{−(5/3+β1)} exp(−β2 (k^{4/3} − 1))
//! α ≠ 1/3:  E = ½U² k^{−5/3} exp(−β2 (k^{4/3} − 1) − β4 (k^{2α−2/3} − 1))
//! ```
//!
//! which equal the textbook forms with prefactors e^{β2} and e^{β3} but
//! avoid overflow for large β.

use std::io::Write;

use crate::error::{Error, Result};

/// Conventional value of the Kolmogorov constant.
pub const DEFAULT_CK: f64 = 1.6;

/// Order of the fractional term. One third is a separate branch of the
/// spectrum and is never detected by comparing floats.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Exponent {
    OneThird,
    General(f64),
}

impl Exponent {
    pub fn value(self) -> f64 {
        match self {
            Exponent::OneThird => 1.0 / 3.0,
            Exponent::General(a) => a,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumParams {
    pub exponent: Exponent,
    pub gamma: f64,
    pub nu: f64,
    pub u: f64,
    pub ck: f64,
    pub eps0: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// β2 + β4; unused on the one-third branch.
    pub beta3: f64,
    pub beta4: f64,
}

pub fn make_params(exponent: Exponent, gamma: f64, nu: f64, u: f64, ck: f64) -> Result<SpectrumParams> {
    let alpha = exponent.value();
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("alpha = {alpha} must lie in (0, 1)")));
    }
    if let Exponent::General(a) = exponent {
        if (a - 1.0 / 3.0).abs() < 1e-12 {
            return Err(Error::InvalidParameter(
                "alpha = 1/3 must be requested through the one-third branch".into(),
            ));
        }
    }
    for (name, v, strict) in [("gamma", gamma, false), ("nu", nu, true), ("U", u, true), ("C_k", ck, true)] {
        let ok = v.is_finite() && if strict { v > 0.0 } else { v >= 0.0 };
        if !ok {
            return Err(Error::InvalidParameter(format!(
                "{name} = {v} must be finite and {}",
                if strict { "positive" } else { "nonnegative" }
            )));
        }
    }
    let eps0 = 2f64.powf(-1.5) * u.powi(3) / ck;
    let e13 = eps0.cbrt();
    let beta1 = 2.0 * ck * gamma / (3.0 * e13);
    let beta2 = 1.5 * ck * nu / e13;
    let beta4 = match exponent {
        Exponent::OneThird => 0.0,
        Exponent::General(a) => 2.0 * a * ck * gamma / ((2.0 * a - 2.0 / 3.0) * e13),
    };
    Ok(SpectrumParams {
        exponent,
        gamma,
        nu,
        u,
        ck,
        eps0,
        beta1,
        beta2,
        beta3: beta2 + beta4,
        beta4,
    })
}

impl SpectrumParams {
    /// Same parameters with the viscous exponent removed.
    pub fn inviscid(&self) -> Self {
        Self {
            beta2: 0.0,
            beta3: self.beta4,
            ..*self
        }
    }
}

fn check_k(k: f64) -> Result<()> {
    if !(k >= 1.0) || !k.is_finite() {
        return Err(Error::InvalidParameter(format!("wavenumber {k} must be finite and ≥ 1")));
    }
    Ok(())
}

pub fn energy_spectrum(k: f64, p: &SpectrumParams) -> Result<f64> {
    check_k(k)?;
    let half = 0.5 * p.u * p.u;
    let visc = p.beta2 * (k.powf(4.0 / 3.0) - 1.0);
    Ok(match p.exponent {
        Exponent::OneThird => half * k.powf(-(5.0 / 3.0 + p.beta1)) * (-visc).exp(),
        Exponent::General(a) => {
            let frac = p.beta4 * (k.powf(2.0 * a - 2.0 / 3.0) - 1.0);
            half * k.powf(-5.0 / 3.0) * (-visc - frac).exp()
        }
    })
}

/// Inertial-range reduction, in which only the power law remains:
/// ½U²e^{β2}k^{−(5/3+β1)} for α = 1/3 and ½U²e^{β3}k^{−5/3} otherwise.
pub fn inertial_spectrum(k: f64, p: &SpectrumParams) -> Result<f64> {
    check_k(k)?;
    let half = 0.5 * p.u * p.u;
    Ok(match p.exponent {
        Exponent::OneThird => half * p.beta2.exp() * k.powf(-(5.0 / 3.0 + p.beta1)),
        Exponent::General(_) => half * p.beta3.exp() * k.powf(-5.0 / 3.0),
    })
}

pub fn inertial_slope(p: &SpectrumParams) -> f64 {
    match p.exponent {
        Exponent::OneThird => -(5.0 / 3.0 + p.beta1),
        Exponent::General(_) => -5.0 / 3.0,
    }
}

/// Ordinary least-squares slope of log E against log k.
pub fn fit_loglog_slope(samples: &[(f64, f64)]) -> Result<f64> {
    if samples.len() < 2 {
        return Err(Error::InvalidParameter("at least two samples are required".into()));
    }
    for w in samples.windows(2) {
        if !(w[1].0 > w[0].0) {
            return Err(Error::InvalidParameter("wavenumbers must increase strictly".into()));
        }
    }
    if let Some(&(k, e)) = samples.iter().find(|&&(k, e)| !(e > 0.0) || !(k > 0.0)) {
        return Err(Error::InvalidParameter(format!(
            "sample (k = {k}, E = {e}) is not positive"
        )));
    }
    let n = samples.len() as f64;
    let (xs, ys): (Vec<f64>, Vec<f64>) = samples.iter().map(|&(k, e)| (k.ln(), e.ln())).unzip();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

/// `points` wavenumbers spaced evenly in log k over [kmin, kmax].
pub fn log_grid(kmin: f64, kmax: f64, points: usize) -> Result<Vec<f64>> {
    check_k(kmin)?;
    if !(kmax >= kmin) || !kmax.is_finite() {
        return Err(Error::InvalidParameter(format!("kmax = {kmax} must be ≥ kmin = {kmin}")));
    }
    if points == 0 || (points == 1 && kmax > kmin) {
        return Err(Error::InvalidParameter(format!(
            "{points} points cannot span [{kmin}, {kmax}]"
        )));
    }
    if points == 1 {
        return Ok(vec![kmin]);
    }
    let (a, b) = (kmin.ln(), kmax.ln());
    let mut ks: Vec<f64> = (0..points)
        .map(|i| (a + (b - a) * i as f64 / (points - 1) as f64).exp())
        .collect();
    ks[0] = kmin;
    ks[points - 1] = kmax;
    Ok(ks)
}

/// Write `k,E` rows for every wavenumber in `ks`.
pub fn write_spectrum_csv(mut w: impl Write, ks: &[f64], p: &SpectrumParams) -> Result<()> {
    writeln!(w, "k,E")?;
    for &k in ks {
        writeln!(w, "{:.17e},{:.17e}", k, energy_spectrum(k, p)?)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference(exponent: Exponent) -> SpectrumParams {
        make_params(exponent, 0.01, 1e-4, 1.0, 1.6).unwrap()
    }

    #[test]
    fn derived_constants_match_high_precision() {
        let p = reference(Exponent::OneThird);
        assert!((p.eps0 - 0.220_970_869_120_796_101_38).abs() < 1e-15);
        assert!((p.beta1 - 0.017_643_458_312_533_919_46).abs() < 1e-15);
        assert!((p.beta2 - 0.000_396_977_812_032_013_187_85).abs() < 1e-17);
        let p = reference(Exponent::General(0.5));
        assert!((p.beta4 - 0.079_395_562_406_402_637_571).abs() < 1e-15);
        assert!((p.beta3 - 0.079_792_540_218_434_650_758).abs() < 1e-15);
        assert!((p.beta3 - p.beta4 - p.beta2).abs() < 1e-14);
    }

    #[test]
    fn value_at_ten_matches_high_precision() {
        let p = reference(Exponent::General(0.5));
        let e = energy_spectrum(10.0, &p).unwrap();
        let expect = 0.009_748_891_979_335_341_827_444_892;
        assert!(((e - expect) / expect).abs() < 1e-13, "{e}");
    }

    #[test]
    fn boundary_value_and_domain() {
        for ex in [Exponent::OneThird, Exponent::General(0.2), Exponent::General(0.9)] {
            let p = make_params(ex, 0.3, 0.02, 1.7, 1.6).unwrap();
            assert_eq!(energy_spectrum(1.0, &p).unwrap(), 0.5 * 1.7 * 1.7);
            assert!(energy_spectrum(0.5, &p).is_err());
        }
        let p = make_params(Exponent::OneThird, 0.0, 1e-3, 1.0, 1.6).unwrap();
        assert_eq!(p.beta1, 0.0);
    }

    #[test]
    fn parameter_validation() {
        assert!(make_params(Exponent::General(1.2), 0.1, 1e-3, 1.0, 1.6).is_err());
        assert!(make_params(Exponent::General(1.0 / 3.0), 0.1, 1e-3, 1.0, 1.6).is_err());
        assert!(make_params(Exponent::General(0.5), -0.1, 1e-3, 1.0, 1.6).is_err());
        assert!(make_params(Exponent::General(0.5), 0.1, 0.0, 1.0, 1.6).is_err());
        assert!(make_params(Exponent::General(0.5), 0.1, 1e-3, 0.0, 1.6).is_err());
    }

    #[test]
    fn slopes() {
        let pure: Vec<(f64, f64)> = (1..40).map(|i| {
            let k = i as f64;
            (k, k.powf(-5.0 / 3.0))
        }).collect();
        assert!((fit_loglog_slope(&pure).unwrap() + 5.0 / 3.0).abs() < 1e-12);
        let two = [(2.0, 3.0), (5.0, 0.7)];
        let secant = (0.7f64.ln() - 3.0f64.ln()) / (5.0f64.ln() - 2.0f64.ln());
        assert!((fit_loglog_slope(&two).unwrap() - secant).abs() < 1e-15);
        assert!(fit_loglog_slope(&[(1.0, 1.0)]).is_err());
        assert!(fit_loglog_slope(&[(1.0, 1.0), (2.0, 0.0)]).is_err());
        assert!(fit_loglog_slope(&[(2.0, 1.0), (1.0, 2.0)]).is_err());

        let p = reference(Exponent::OneThird).inviscid();
        let s: Vec<(f64, f64)> = (2..=50).map(|i| {
            let k = i as f64;
            (k, energy_spectrum(k, &p).unwrap())
        }).collect();
        assert!((fit_loglog_slope(&s).unwrap() - inertial_slope(&p)).abs() < 1e-10);
        assert!(inertial_slope(&p) < -5.0 / 3.0);
        let q = make_params(Exponent::OneThird, 0.0, 1e-3, 1.0, 1.6).unwrap();
        assert_eq!(inertial_slope(&q), -5.0 / 3.0);
        assert_eq!(inertial_slope(&reference(Exponent::General(0.5))), -5.0 / 3.0);
    }

    #[test]
    fn dissipation_range_decays() {
        for ex in [Exponent::General(0.2), Exponent::OneThird, Exponent::General(0.7)] {
            let p = make_params(ex, 0.01, 1e-4, 1.0, 1.6).unwrap();
            let e = |k: f64| energy_spectrum(k, &p).unwrap();
            assert!(e(1e4) * 1e4f64.powf(8.0 / 3.0) < 1e-6);
            let mut last = f64::INFINITY;
            for i in 0..=48 {
                let k = 100.0 * 1.1f64.powi(i);
                assert!(e(2.0 * k) > 0.0);
                let r = e(2.0 * k) / e(k);
                assert!(r < last, "{ex:?} k={k}");
                last = r;
            }
        }
    }

    #[test]
    fn grid_endpoints() {
        let g = log_grid(1.0, 100.0, 5).unwrap();
        assert_eq!(g.len(), 5);
        assert_eq!(g[0], 1.0);
        assert_eq!(g[4], 100.0);
        assert!((g[2] - 10.0).abs() < 1e-12);
        assert!(log_grid(0.5, 10.0, 3).is_err());
    }
}
