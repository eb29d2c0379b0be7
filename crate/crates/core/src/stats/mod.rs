//! Descriptive and nonparametric statistics used by the analyses.

mod mann_whitney;
mod normal;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data_model::write_csv;
use crate::error::{Error, Result};

pub use mann_whitney::{
    mann_whitney, mann_whitney_with, MannWhitneyMethod, MannWhitneyOptions, MannWhitneyResult,
    EXACT_MAX_TOTAL,
};
pub use normal::{erfc, normal_cdf, two_sided_p};

fn check_finite(sample: &[f64], what: &'static str) -> Result<()> {
    if sample.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(what));
    }
    Ok(())
}

/// Arithmetic mean with one refinement pass.
pub fn mean(sample: &[f64]) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::EmptySample("mean"));
    }
    let n = sample.len() as f64;
    let m = sample.iter().sum::<f64>() / n;
    Ok(m + sample.iter().map(|x| x - m).sum::<f64>() / n)
}

/// Middle element, or the mean of the two middle elements for even `n`.
pub fn median(sample: &[f64]) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::EmptySample("median"));
    }
    check_finite(sample, "median input")?;
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    Ok(if n.is_multiple_of(2) {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    } else {
        sorted[n / 2]
    })
}

/// Zero-mean, unit-variance scaling using the population standard deviation.
pub fn zscore(sample: &[f64]) -> Result<Vec<f64>> {
    check_finite(sample, "zscore input")?;
    let m = mean(sample)?;
    if sample.iter().all(|&x| x == sample[0]) {
        return Err(Error::ConstantSample("zscore input"));
    }
    let n = sample.len() as f64;
    let sd = (sample.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n).sqrt();
    Ok(sample.iter().map(|x| (x - m) / sd).collect())
}

/// Pearson product-moment correlation, clamped to [-1, 1].
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::InvalidArgument(
            "pearson needs at least two paired observations".into(),
        ));
    }
    check_finite(x, "pearson input")?;
    check_finite(y, "pearson input")?;
    if x.iter().all(|&v| v == x[0]) || y.iter().all(|&v| v == y[0]) {
        return Err(Error::ConstantSample("correlation undefined for constant input"));
    }
    let (mx, my) = (mean(x)?, mean(y)?);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EcdfPoint {
    pub value: f64,
    pub fraction: f64,
}

/// Right-continuous step function, one point per distinct sample value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EcdfCurve {
    pub n: usize,
    pub points: Vec<EcdfPoint>,
}

impl EcdfCurve {
    /// Fraction of the sample `<= x`.
    pub fn eval(&self, x: f64) -> f64 {
        let k = self.points.partition_point(|p| p.value <= x);
        if k == 0 {
            0.0
        } else {
            self.points[k - 1].fraction
        }
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let dir = path.parent().unwrap_or(Path::new("."));
        let file = path.file_name().and_then(|f| f.to_str()).unwrap_or("ecdf.csv");
        write_csv(dir, file, |w| {
            w.write_record(["value", "fraction"])?;
            for p in &self.points {
                w.write_record([p.value.to_string(), p.fraction.to_string()])?;
            }
            Ok(())
        })
    }
}

pub fn ecdf(sample: &[f64]) -> Result<EcdfCurve> {
    if sample.is_empty() {
        return Err(Error::EmptySample("ecdf"));
    }
    check_finite(sample, "ecdf input")?;
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mut points: Vec<EcdfPoint> = Vec::new();
    for (i, &v) in sorted.iter().enumerate() {
        let fraction = (i + 1) as f64 / n as f64;
        match points.last_mut() {
            Some(last) if last.value == v => last.fraction = fraction,
            _ => points.push(EcdfPoint { value: v, fraction }),
        }
    }
    Ok(EcdfCurve { n, points })
}
