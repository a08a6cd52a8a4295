//! Per-time-step quantile bands across runs.

use serde::Serialize;

/// Quantile `q` of the finite entries, linear interpolation between order
/// statistics. `NaN` when no entry is finite.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

pub fn median(values: &[f64]) -> f64 {
    quantile(values, 0.5)
}

/// Median and interquartile band of a set of trajectories on a shared grid.
/// Serialized `NaN` (no finite value at that step) becomes `null`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Band {
    pub time: Vec<f64>,
    pub median: Vec<f64>,
    pub q25: Vec<f64>,
    pub q75: Vec<f64>,
}

impl Band {
    /// Trajectories shorter than `time` contribute nothing past their end.
    pub fn from_runs(time: &[f64], runs: &[&[f64]]) -> Band {
        let mut band = Band {
            time: time.to_vec(),
            median: Vec::with_capacity(time.len()),
            q25: Vec::with_capacity(time.len()),
            q75: Vec::with_capacity(time.len()),
        };
        for k in 0..time.len() {
            let column: Vec<f64> = runs.iter().filter_map(|r| r.get(k).copied()).collect();
            band.median.push(median(&column));
            band.q25.push(quantile(&column, 0.25));
            band.q75.push(quantile(&column, 0.75));
        }
        band
    }

    pub fn final_median(&self) -> f64 {
        self.median.last().copied().unwrap_or(f64::NAN)
    }
}
