use crate::error::{Error, Result};

/// Samples below this error count as numerically converged and are left
/// out of the log-linear fit.
pub const CONVERGED_ERROR: f64 = 1e-13;

/// Least-squares fit `log e(t) ≈ intercept − rate · t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub rate: f64,
    pub intercept: f64,
    /// RMS residual of the fit in log space.
    pub residual: f64,
    pub samples: usize,
}

impl DecayFit {
    /// `C_fit = e^{intercept}`.
    pub fn constant(&self) -> f64 {
        self.intercept.exp()
    }

    pub fn envelope(&self, t: f64) -> f64 {
        (self.intercept - self.rate * t).exp()
    }
}

/// Fits the trailing `window` fraction of the horizon (e.g. 0.5 for the
/// last half).
pub fn fit_decay(times: &[f64], errors: &[f64], window: f64) -> Result<DecayFit> {
    if times.len() != errors.len() {
        return Err(Error::Dimension("times and errors differ in length".into()));
    }
    if !(window > 0.0 && window <= 1.0) {
        return Err(Error::InvalidArgument(format!("window must lie in (0, 1], got {window}")));
    }
    let (Some(&t0), Some(&t1)) = (times.first(), times.last()) else {
        return Err(Error::InsufficientSamples(0));
    };
    let start = t1 - window * (t1 - t0);
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(errors)
        .filter(|(t, e)| **t >= start - 1e-12 && **e >= CONVERGED_ERROR && e.is_finite())
        .map(|(t, e)| (*t, e.ln()))
        .collect();
    if pts.len() < 5 {
        return Err(Error::InsufficientSamples(pts.len()));
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ml = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - ml)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientSamples(1));
    }
    let slope = sxy / sxx;
    let intercept = ml - slope * mt;
    let residual = (pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum::<f64>() / n).sqrt();
    Ok(DecayFit {
        rate: -slope,
        intercept,
        residual,
        samples: pts.len(),
    })
}
