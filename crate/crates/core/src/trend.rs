//! Suprema and infima over the whole line from finitely many samples.
//!
//! Samples are taken on shells `2^{k-1} ≤ |x| ≤ 2^k`. A running supremum
//! that moves by less than `stable_rel` over two consecutive doublings is
//! reported as stable; one that grows by more than `growth_rel` over three
//! consecutive doublings is reported as growing, together with a power-law
//! exponent fitted to the last shells. Anything else is undetermined.

use serde::Serialize;

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrendPolicy {
    pub stable_rel: f64,
    pub growth_rel: f64,
    /// No decision is taken before this level.
    pub min_level: usize,
    pub max_level: usize,
    pub shell_points: usize,
    pub core_points: usize,
    pub fit_levels: usize,
}

impl Default for TrendPolicy {
    fn default() -> Self {
        TrendPolicy {
            stable_rel: 0.005,
            growth_rel: 0.05,
            min_level: 8,
            max_level: 20,
            shell_points: 8,
            core_points: 17,
            fit_levels: 4,
        }
    }
}

impl TrendPolicy {
    /// Sample abscissae of level `k`, ascending.
    pub fn level_points(&self, k: usize) -> Vec<f64> {
        if k == 0 {
            let n = self.core_points.max(2);
            return (0..n).map(|i| -1.0 + 2.0 * i as f64 / (n - 1) as f64).collect();
        }
        let base = 2f64.powi(k as i32 - 1);
        let mut pts = Vec::with_capacity(2 * self.shell_points);
        for j in 1..=self.shell_points {
            let x = base * 2f64.powf(j as f64 / self.shell_points as f64);
            pts.push(x);
            pts.push(-x);
        }
        pts.sort_by(f64::total_cmp);
        pts
    }

    /// Largest `|x|` that a full scan can sample.
    pub fn extent(&self) -> f64 {
        2f64.powi(self.max_level as i32)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Trend {
    Stable { value: f64, band: f64, level: usize },
    Growing { exponent: Option<f64>, last: f64, level: usize },
    Vanishing { exponent: Option<f64>, last: f64, level: usize },
    Undetermined { last: f64, level: usize, reason: String },
}

impl Trend {
    pub fn is_stable(&self) -> bool {
        matches!(self, Trend::Stable { .. })
    }

    pub fn is_growing(&self) -> bool {
        matches!(self, Trend::Growing { .. })
    }

    pub fn is_vanishing(&self) -> bool {
        matches!(self, Trend::Vanishing { .. })
    }

    pub fn value(&self) -> Option<f64> {
        match self {
            Trend::Stable { value, .. } => Some(*value),
            _ => None,
        }
    }

    pub fn exponent(&self) -> Option<f64> {
        match self {
            Trend::Growing { exponent, .. } | Trend::Vanishing { exponent, .. } => *exponent,
            _ => None,
        }
    }

    /// Last running extremum, whatever the classification.
    pub fn last(&self) -> f64 {
        match self {
            Trend::Stable { value, .. } => *value,
            Trend::Growing { last, .. } | Trend::Vanishing { last, .. } | Trend::Undetermined { last, .. } => *last,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelStat {
    pub level: usize,
    pub shell_max: f64,
    pub shell_min: f64,
    pub running: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrendRecord {
    pub trend: Trend,
    pub levels: Vec<LevelStat>,
    #[serde(skip)]
    pub samples: Vec<(f64, f64)>,
}

impl TrendRecord {
    /// Whether the shell minima grew by more than `rel` over each of the
    /// last three doublings.
    pub fn shell_min_growing(&self, rel: f64) -> bool {
        let n = self.levels.len();
        if n < 4 {
            return false;
        }
        (n - 3..n).all(|i| self.levels[i].shell_min > (1.0 + rel) * self.levels[i - 1].shell_min)
    }

    /// Whether the shell maxima are bounded by `bound`.
    pub fn shell_max_below(&self, bound: f64) -> bool {
        self.levels.iter().all(|l| l.shell_max <= bound)
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Mode {
    Sup,
    Inf,
}

fn fit_exponent(levels: &[LevelStat], count: usize, mode: Mode) -> Option<f64> {
    let pts: Vec<(f64, f64)> = levels
        .iter()
        .filter(|l| l.level >= 1)
        .rev()
        .take(count)
        .filter_map(|l| {
            let y = if mode == Mode::Sup { l.shell_max } else { l.shell_min };
            (y > 0.0 && y.is_finite()).then(|| ((l.level as f64) * std::f64::consts::LN_2, y.ln()))
        })
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}

fn scan<F>(policy: &TrendPolicy, mut f: F, mode: Mode) -> TrendRecord
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut levels: Vec<LevelStat> = Vec::new();
    let mut samples = Vec::new();
    let mut running = match mode {
        Mode::Sup => f64::NEG_INFINITY,
        Mode::Inf => f64::INFINITY,
    };
    let g = policy.growth_rel;
    let st = policy.stable_rel;
    for k in 0..=policy.max_level {
        let mut shell_max = f64::NEG_INFINITY;
        let mut shell_min = f64::INFINITY;
        for x in policy.level_points(k) {
            let y = match f(x) {
                Ok(y) if !y.is_nan() => y,
                Ok(_) => {
                    return undetermined(levels, samples, running, k, format!("sample is NaN at x = {x}"));
                }
                Err(e) => return undetermined(levels, samples, running, k, format!("{e}")),
            };
            samples.push((x, y));
            shell_max = shell_max.max(y);
            shell_min = shell_min.min(y);
        }
        running = match mode {
            Mode::Sup => running.max(shell_max),
            Mode::Inf => running.min(shell_min),
        };
        levels.push(LevelStat { level: k, shell_max, shell_min, running });
        if mode == Mode::Sup && running == f64::INFINITY {
            return TrendRecord {
                trend: Trend::Growing { exponent: None, last: running, level: k },
                levels,
                samples,
            };
        }
        if mode == Mode::Inf && running <= 0.0 {
            return TrendRecord {
                trend: Trend::Vanishing { exponent: None, last: running, level: k },
                levels,
                samples,
            };
        }
        if k < policy.min_level || levels.len() < 4 {
            continue;
        }
        let n = levels.len();
        let s = |i: usize| levels[n - 1 - i].running;
        let stable = (s(0) - s(1)).abs() <= st * s(1).abs() && (s(1) - s(2)).abs() <= st * s(2).abs();
        if stable {
            let band = (s(0) - s(1)).abs() + (s(1) - s(2)).abs();
            return TrendRecord { trend: Trend::Stable { value: running, band, level: k }, levels, samples };
        }
        let moving = match mode {
            Mode::Sup => (0..3).all(|i| s(i) > (1.0 + g) * s(i + 1)),
            Mode::Inf => (0..3).all(|i| s(i) * (1.0 + g) < s(i + 1)),
        };
        if moving {
            let exponent = fit_exponent(&levels, policy.fit_levels, mode);
            let trend = match mode {
                Mode::Sup => Trend::Growing { exponent, last: running, level: k },
                Mode::Inf => Trend::Vanishing { exponent, last: running, level: k },
            };
            return TrendRecord { trend, levels, samples };
        }
    }
    let k = policy.max_level;
    undetermined(levels, samples, running, k, "no trend decided by the last level".into())
}

fn undetermined(levels: Vec<LevelStat>, samples: Vec<(f64, f64)>, last: f64, level: usize, reason: String) -> TrendRecord {
    TrendRecord { trend: Trend::Undetermined { last, level, reason }, levels, samples }
}

/// Supremum of `f` over the line.
pub fn sup_trend<F: FnMut(f64) -> Result<f64>>(policy: &TrendPolicy, f: F) -> TrendRecord {
    scan(policy, f, Mode::Sup)
}

/// Infimum of `f` over the line; a stable infimum is a positive limit.
pub fn inf_trend<F: FnMut(f64) -> Result<f64>>(policy: &TrendPolicy, f: F) -> TrendRecord {
    scan(policy, f, Mode::Inf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    #[test]
    fn bounded_function_is_stable() {
        let rec = sup_trend(&TrendPolicy::default(), |x| Ok(1.0 - 1.0 / (2.0 + x * x)));
        match rec.trend {
            Trend::Stable { value, .. } => assert!((value - 1.0).abs() < 1e-3),
            t => panic!("{t:?}"),
        }
    }

    #[test]
    fn power_growth_exponent() {
        let rec = sup_trend(&TrendPolicy::default(), |x: f64| Ok((1.0 + x.abs()).powf(0.5)));
        match rec.trend {
            Trend::Growing { exponent: Some(e), .. } => assert!((e - 0.5).abs() < 0.02, "{e}"),
            t => panic!("{t:?}"),
        }
    }

    #[test]
    fn logarithmic_growth_is_undetermined() {
        let rec = sup_trend(&TrendPolicy::default(), |x: f64| Ok((2.0 + x.abs()).ln().powf(0.25)));
        assert!(matches!(rec.trend, Trend::Undetermined { .. }), "{:?}", rec.trend);
    }

    #[test]
    fn infimum_vanishes() {
        let rec = inf_trend(&TrendPolicy::default(), |x: f64| Ok(1.0 / (1.0 + x * x)));
        match rec.trend {
            Trend::Vanishing { exponent: Some(e), .. } => assert!((e + 2.0).abs() < 0.05, "{e}"),
            t => panic!("{t:?}"),
        }
        let rec = inf_trend(&TrendPolicy::default(), |_| Ok(3.0));
        assert_eq!(rec.trend.value(), Some(3.0));
    }

    #[test]
    fn errors_stop_the_scan() {
        let rec = sup_trend(&TrendPolicy::default(), |x: f64| {
            if x.abs() > 100.0 {
                Err(Error::OutsideDomain { x, lo: -100.0, hi: 100.0 })
            } else {
                Ok(x.abs())
            }
        });
        assert!(matches!(rec.trend, Trend::Undetermined { .. }));
    }

    #[test]
    fn infinite_sample_is_growth() {
        let rec = sup_trend(&TrendPolicy::default(), |x: f64| Ok(if x > 3.0 { f64::INFINITY } else { 1.0 }));
        assert!(rec.trend.is_growing());
    }
}
