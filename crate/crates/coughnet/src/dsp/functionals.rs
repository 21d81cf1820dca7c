//! Statistical functionals over low-level descriptor trajectories.
//!
//! Each row of an LLD matrix (one Mel channel or one cepstral coefficient
//! over time) is summarized by a catalog of scalar statistics, turning a
//! variable view of a segment into one flat vector.

use crate::error::{Error, Result};
use crate::mat::Mat;

/// One scalar statistic computed over a frame trajectory.
///
/// Conventions, chosen once and documented here:
/// * `Std` and the higher moments are population statistics (divide by n).
/// * `Skewness` is m₃/m₂^(3/2); `Kurtosis` is excess kurtosis m₄/m₂² − 3.
///   Both report 0 for (numerically) constant rows.
/// * Quantiles use linear interpolation at rank h = q·(n−1) on the sorted
///   row.
/// * `Slope`/`Offset` are the least-squares line over frame index
///   t = 0..n−1; `ResidMse` is the mean squared residual of that fit.
/// * `MeanCrossingRate` is the fraction of the n−1 consecutive pairs whose
///   mean-removed values have strictly opposite signs; deviations below
///   1e-12 of the row's scale count as zero so constant rows report 0.
/// * `PosMaxFrac`/`PosMinFrac` are the index of the first extremum as a
///   fraction of the frame span (0 = first frame, 1 = last).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Functional {
    Mean,
    Std,
    Min,
    Max,
    Range,
    Median,
    Quartile1,
    Quartile3,
    Iqr,
    Percentile1,
    Percentile99,
    Skewness,
    Kurtosis,
    Slope,
    Offset,
    ResidMse,
    MeanCrossingRate,
    PosMaxFrac,
    PosMinFrac,
    Rms,
}

impl Functional {
    pub const ALL: [Functional; 20] = [
        Functional::Mean,
        Functional::Std,
        Functional::Min,
        Functional::Max,
        Functional::Range,
        Functional::Median,
        Functional::Quartile1,
        Functional::Quartile3,
        Functional::Iqr,
        Functional::Percentile1,
        Functional::Percentile99,
        Functional::Skewness,
        Functional::Kurtosis,
        Functional::Slope,
        Functional::Offset,
        Functional::ResidMse,
        Functional::MeanCrossingRate,
        Functional::PosMaxFrac,
        Functional::PosMinFrac,
        Functional::Rms,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Functional::Mean => "mean",
            Functional::Std => "std",
            Functional::Min => "min",
            Functional::Max => "max",
            Functional::Range => "range",
            Functional::Median => "median",
            Functional::Quartile1 => "q1",
            Functional::Quartile3 => "q3",
            Functional::Iqr => "iqr",
            Functional::Percentile1 => "p01",
            Functional::Percentile99 => "p99",
            Functional::Skewness => "skewness",
            Functional::Kurtosis => "kurtosis",
            Functional::Slope => "slope",
            Functional::Offset => "offset",
            Functional::ResidMse => "resid_mse",
            Functional::MeanCrossingRate => "mean_crossing_rate",
            Functional::PosMaxFrac => "pos_max_frac",
            Functional::PosMinFrac => "pos_min_frac",
            Functional::Rms => "rms",
        }
    }

    pub fn from_name(name: &str) -> Option<Functional> {
        Functional::ALL.into_iter().find(|f| f.name() == name)
    }

    /// Computes the statistic; `xs.len() >= 2` is the caller's contract.
    pub fn compute(self, xs: &[f64]) -> f64 {
        debug_assert!(xs.len() >= 2);
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let scale = mean.abs().max(1.0);
        match self {
            Functional::Mean => mean,
            Functional::Std => central_moment(xs, mean, 2).sqrt(),
            Functional::Min => xs.iter().cloned().fold(f64::INFINITY, f64::min),
            Functional::Max => xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            Functional::Range => Functional::Max.compute(xs) - Functional::Min.compute(xs),
            Functional::Median => quantile(xs, 0.5),
            Functional::Quartile1 => quantile(xs, 0.25),
            Functional::Quartile3 => quantile(xs, 0.75),
            Functional::Iqr => quantile(xs, 0.75) - quantile(xs, 0.25),
            Functional::Percentile1 => quantile(xs, 0.01),
            Functional::Percentile99 => quantile(xs, 0.99),
            Functional::Skewness => {
                let m2 = central_moment(xs, mean, 2);
                if m2 <= 1e-24 * scale * scale {
                    0.0
                } else {
                    central_moment(xs, mean, 3) / m2.powf(1.5)
                }
            }
            Functional::Kurtosis => {
                let m2 = central_moment(xs, mean, 2);
                if m2 <= 1e-24 * scale * scale {
                    0.0
                } else {
                    central_moment(xs, mean, 4) / (m2 * m2) - 3.0
                }
            }
            Functional::Slope => linefit(xs).0,
            Functional::Offset => linefit(xs).1,
            Functional::ResidMse => {
                let (slope, offset) = linefit(xs);
                xs.iter()
                    .enumerate()
                    .map(|(t, &x)| {
                        let r = x - (slope * t as f64 + offset);
                        r * r
                    })
                    .sum::<f64>()
                    / n
            }
            Functional::MeanCrossingRate => {
                let sign = |x: f64| {
                    let d = x - mean;
                    if d.abs() <= 1e-12 * scale {
                        0.0
                    } else {
                        d.signum()
                    }
                };
                let crossings = xs
                    .windows(2)
                    .filter(|w| sign(w[0]) * sign(w[1]) < 0.0)
                    .count();
                crossings as f64 / (n - 1.0)
            }
            Functional::PosMaxFrac => {
                let max = Functional::Max.compute(xs);
                let idx = xs.iter().position(|&x| x == max).unwrap();
                idx as f64 / (n - 1.0)
            }
            Functional::PosMinFrac => {
                let min = Functional::Min.compute(xs);
                let idx = xs.iter().position(|&x| x == min).unwrap();
                idx as f64 / (n - 1.0)
            }
            Functional::Rms => (xs.iter().map(|&x| x * x).sum::<f64>() / n).sqrt(),
        }
    }
}

fn central_moment(xs: &[f64], mean: f64, order: i32) -> f64 {
    xs.iter().map(|&x| (x - mean).powi(order)).sum::<f64>() / xs.len() as f64
}

/// Linearly interpolated quantile at rank q·(n−1) of the sorted data.
fn quantile(xs: &[f64], q: f64) -> f64 {
    let mut sorted = xs.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let h = q * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Least-squares line x ≈ slope·t + offset over t = 0..n−1.
fn linefit(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let t_mean = (n - 1.0) / 2.0;
    let x_mean = xs.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_t = 0.0;
    for (t, &x) in xs.iter().enumerate() {
        let dt = t as f64 - t_mean;
        cov += dt * (x - x_mean);
        var_t += dt * dt;
    }
    let slope = cov / var_t;
    (slope, x_mean - slope * t_mean)
}

/// An ordered set of functionals applied to every LLD row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionalCatalog {
    functionals: Vec<Functional>,
}

impl Default for FunctionalCatalog {
    /// The full 20-functional catalog, in [`Functional::ALL`] order.
    fn default() -> Self {
        FunctionalCatalog {
            functionals: Functional::ALL.to_vec(),
        }
    }
}

impl FunctionalCatalog {
    pub fn from_names(names: &[&str]) -> Result<FunctionalCatalog> {
        if names.is_empty() {
            return Err(Error::InvalidArg(
                "functional catalog must be non-empty".into(),
            ));
        }
        let functionals = names
            .iter()
            .map(|&n| {
                Functional::from_name(n)
                    .ok_or_else(|| Error::InvalidArg(format!("unknown functional `{n}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(FunctionalCatalog { functionals })
    }

    pub fn functionals(&self) -> &[Functional] {
        &self.functionals
    }

    pub fn len(&self) -> usize {
        self.functionals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functionals.is_empty()
    }
}

/// Names the rows and columns of a feature vector and maps them to flat
/// indices: entry (lld, functional) lives at `lld · n_functionals + f`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureLayout {
    lld_names: Vec<String>,
    functional_names: Vec<String>,
}

impl FeatureLayout {
    pub fn len(&self) -> usize {
        self.lld_names.len() * self.functional_names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn lld_names(&self) -> &[String] {
        &self.lld_names
    }

    pub fn functional_names(&self) -> &[String] {
        &self.functional_names
    }

    pub fn index(&self, lld: usize, functional: usize) -> usize {
        debug_assert!(lld < self.lld_names.len());
        debug_assert!(functional < self.functional_names.len());
        lld * self.functional_names.len() + functional
    }

    /// `"logmel3.skewness"`-style name of the i-th entry.
    pub fn name(&self, index: usize) -> String {
        let nf = self.functional_names.len();
        format!(
            "{}.{}",
            self.lld_names[index / nf],
            self.functional_names[index % nf]
        )
    }

    pub fn index_of(&self, lld_name: &str, functional_name: &str) -> Option<usize> {
        let lld = self.lld_names.iter().position(|n| n == lld_name)?;
        let f = self
            .functional_names
            .iter()
            .position(|n| n == functional_name)?;
        Some(self.index(lld, f))
    }
}

/// Flat per-segment feature vector with its layout.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    values: Vec<f64>,
    layout: FeatureLayout,
}

impl FeatureVector {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn layout(&self) -> &FeatureLayout {
        &self.layout
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Applies every functional in the catalog to every LLD row.
///
/// Rows are named `{lld_prefix}{row}`; the output has
/// `n_llds × catalog.len()` entries in row-major (LLD-major) order.
pub fn apply_functionals(
    llds: &Mat,
    lld_prefix: &str,
    catalog: &FunctionalCatalog,
) -> Result<FeatureVector> {
    if llds.cols() < 2 {
        return Err(Error::Shape(format!(
            "functionals need at least 2 frames, got {}",
            llds.cols()
        )));
    }
    if catalog.is_empty() {
        return Err(Error::InvalidArg(
            "functional catalog must be non-empty".into(),
        ));
    }
    let mut values = Vec::with_capacity(llds.rows() * catalog.len());
    for row in llds.iter_rows() {
        for f in catalog.functionals() {
            values.push(f.compute(row));
        }
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("functional feature vector".into()));
    }
    let layout = FeatureLayout {
        lld_names: (0..llds.rows())
            .map(|i| format!("{lld_prefix}{i}"))
            .collect(),
        functional_names: catalog
            .functionals()
            .iter()
            .map(|f| f.name().to_string())
            .collect(),
    };
    Ok(FeatureVector { values, layout })
}
