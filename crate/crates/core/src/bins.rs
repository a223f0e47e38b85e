//! Equal-width binning on "nice" steps (1, 2, or 5 times a power of ten).

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BinError {
    #[error("cannot bin an empty list of values")]
    EmptyInput,
    #[error("target bin count must be at least 1")]
    ZeroTarget,
}

/// A numeric interval `[lo, hi)`, or `[lo, hi]` when `closed` is set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub closed: bool,
}

impl Interval {
    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo && (v < self.hi || (self.closed && v <= self.hi))
    }
}

/// Picks the nice step whose bin count is nearest `target_bins` and returns
/// consecutive intervals covering `min..=max`. All intervals are half-open
/// except the last. Identical values collapse into one degenerate closed
/// interval. Non-finite values are ignored.
pub fn bin_intervals(values: &[f64], target_bins: usize) -> Result<Vec<Interval>, BinError> {
    if target_bins == 0 {
        return Err(BinError::ZeroTarget);
    }
    let mut finite = values.iter().copied().filter(|v| v.is_finite());
    let first = finite.next().ok_or(BinError::EmptyInput)?;
    let (min, max) = finite.fold((first, first), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if min == max {
        return Ok(vec![Interval { lo: min, hi: max, closed: true }]);
    }

    let (step, exp) = nice_step(min, max, target_bins);
    let lo = snap((min / step).floor() * step, exp).min(min);
    let hi = snap((max / step).ceil() * step, exp).max(max);
    let count = ((hi - lo) / step).round().max(1.0) as usize;
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let a = if i == 0 { lo } else { snap(lo + i as f64 * step, exp) };
        let b = if i + 1 == count { hi } else { snap(lo + (i + 1) as f64 * step, exp) };
        out.push(Interval { lo: a, hi: b, closed: i + 1 == count });
    }
    Ok(out)
}

/// Index of the interval holding `v`, if any.
pub fn interval_index(intervals: &[Interval], v: f64) -> Option<usize> {
    intervals.iter().position(|iv| iv.contains(v))
}

fn nice_step(min: f64, max: f64, target: usize) -> (f64, i32) {
    let raw = (max - min) / target as f64;
    let base = raw.log10().floor() as i32;
    let mut best: Option<(usize, f64, i32)> = None;
    for exp in (base - 1)..=(base + 1) {
        for mult in [1.0, 2.0, 5.0] {
            let step = mult * 10f64.powi(exp);
            let lo = (min / step).floor() * step;
            let hi = (max / step).ceil() * step;
            let count = ((hi - lo) / step).round() as usize;
            let dist = count.abs_diff(target);
            // ties go to the wider step
            let better = match best {
                None => true,
                Some((d, s, _)) => dist < d || (dist == d && step > s),
            };
            if better {
                best = Some((dist, step, exp));
            }
        }
    }
    let (_, step, exp) = best.expect("candidate set is never empty");
    (step, exp)
}

fn snap(x: f64, exp: i32) -> f64 {
    if exp >= 0 {
        x.round()
    } else {
        let scale = 10f64.powi(-exp);
        (x * scale).round() / scale
    }
}
