//! Prediction-horizon time grids.
//!
//! A [`TimeGrid`] is an ordered sequence of contiguous steps, each an integer
//! number of minutes long. Uniform grids have equal steps; multi-horizon grids
//! coarsen forward in time, keeping a fine resolution near the present and
//! progressively longer steps toward the end of the horizon. All time
//! arithmetic is in integer minutes so that divisibility checks and horizon
//! sums are exact.

use thiserror::Error;

/// Errors raised while constructing a grid.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum GridError {
    #[error("{dividend_name} ({dividend} min) is not divisible by {divisor_name} ({divisor} min)")]
    NotDivisible {
        dividend_name: &'static str,
        dividend: i64,
        divisor_name: &'static str,
        divisor: i64,
    },
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: i64 },
    #[error("multi-horizon schedule is empty")]
    EmptySchedule,
    #[error("multi-horizon schedule coarsens backward: resolution {later} min follows {earlier} min")]
    DecreasingResolution { earlier: i64, later: i64 },
    #[error("schedule entry has zero step count at resolution {res} min")]
    EmptyScheduleEntry { res: i64 },
}

/// One step of a prediction grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridStep {
    /// Minutes from the start of the horizon to the start of this step.
    pub offset_min: i64,
    /// Step length in minutes.
    pub duration_min: i64,
}

impl GridStep {
    /// Step length in hours, for energy and cost scaling.
    pub fn duration_h(&self) -> f64 {
        self.duration_min as f64 / 60.0
    }
}

/// An immutable prediction-horizon grid.
///
/// Invariants (enforced on construction): durations are strictly positive and
/// non-decreasing, steps are contiguous starting at offset 0, and every
/// duration is an integer multiple of the plant sampling time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimeGrid {
    steps: Vec<GridStep>,
    plant_step_min: i64,
}

/// One entry of a multi-horizon schedule: `count` steps of `res_min` minutes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScheduleEntry {
    pub res_min: i64,
    pub count: usize,
}

impl TimeGrid {
    /// Builds a uniform grid: `t_pred_min / t_res_min` steps of equal length.
    pub fn uniform(t_pred_min: i64, t_res_min: i64, plant_step_min: i64) -> Result<Self, GridError> {
        check_positive("t_pred", t_pred_min)?;
        check_positive("t_res", t_res_min)?;
        check_positive("plant_step", plant_step_min)?;
        check_divides("t_pred", t_pred_min, "t_res", t_res_min)?;
        check_divides("t_res", t_res_min, "plant_step", plant_step_min)?;

        let n = (t_pred_min / t_res_min) as usize;
        let steps = (0..n)
            .map(|k| GridStep {
                offset_min: k as i64 * t_res_min,
                duration_min: t_res_min,
            })
            .collect();
        Ok(TimeGrid {
            steps,
            plant_step_min,
        })
    }

    /// Builds a multi-horizon grid by concatenating schedule entries in order.
    ///
    /// Resolutions must be non-decreasing (the grid coarsens forward) and each
    /// must be a multiple of the plant sampling time.
    pub fn multi_horizon(schedule: &[ScheduleEntry], plant_step_min: i64) -> Result<Self, GridError> {
        check_positive("plant_step", plant_step_min)?;
        if schedule.is_empty() {
            return Err(GridError::EmptySchedule);
        }
        let mut prev_res = 0i64;
        let mut steps = Vec::new();
        let mut offset = 0i64;
        for entry in schedule {
            check_positive("resolution", entry.res_min)?;
            if entry.count == 0 {
                return Err(GridError::EmptyScheduleEntry { res: entry.res_min });
            }
            if entry.res_min < prev_res {
                return Err(GridError::DecreasingResolution {
                    earlier: prev_res,
                    later: entry.res_min,
                });
            }
            check_divides("resolution", entry.res_min, "plant_step", plant_step_min)?;
            for _ in 0..entry.count {
                steps.push(GridStep {
                    offset_min: offset,
                    duration_min: entry.res_min,
                });
                offset += entry.res_min;
            }
            prev_res = entry.res_min;
        }
        Ok(TimeGrid {
            steps,
            plant_step_min,
        })
    }

    /// Number of steps N.
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn step(&self, k: usize) -> GridStep {
        self.steps[k]
    }

    pub fn steps(&self) -> &[GridStep] {
        &self.steps
    }

    /// Plant sampling time in minutes.
    pub fn plant_step_min(&self) -> i64 {
        self.plant_step_min
    }

    /// Total horizon length in minutes.
    pub fn t_pred_min(&self) -> i64 {
        self.steps
            .last()
            .map_or(0, |s| s.offset_min + s.duration_min)
    }

    /// Period at which a receding-horizon controller re-solves on this grid:
    /// the duration of step 0.
    pub fn controller_period_min(&self) -> i64 {
        self.steps[0].duration_min
    }

    /// Maps step indices of this grid onto the same grid re-anchored one
    /// controller period later.
    ///
    /// Old step `k` maps to the new step whose interval contains the old
    /// step's start; old step 0 falls before the new horizon and maps to
    /// nothing. The result is monotone and injective, which lets warm-start
    /// data be carried across MPC steps without aliasing.
    pub fn shift_map(&self) -> Vec<Option<usize>> {
        let period = self.controller_period_min();
        let mut map = vec![None; self.len()];
        let mut j = 0usize;
        for (k, step) in self.steps.iter().enumerate() {
            let shifted = step.offset_min - period;
            if shifted < 0 {
                continue;
            }
            while j < self.len() {
                let s = self.steps[j];
                if shifted < s.offset_min + s.duration_min {
                    break;
                }
                j += 1;
            }
            if j < self.len() {
                map[k] = Some(j);
            }
        }
        map
    }
}

fn check_positive(name: &'static str, value: i64) -> Result<(), GridError> {
    if value <= 0 {
        Err(GridError::NonPositive { name, value })
    } else {
        Ok(())
    }
}

fn check_divides(
    dividend_name: &'static str,
    dividend: i64,
    divisor_name: &'static str,
    divisor: i64,
) -> Result<(), GridError> {
    if dividend % divisor != 0 {
        Err(GridError::NotDivisible {
            dividend_name,
            dividend,
            divisor_name,
            divisor,
        })
    } else {
        Ok(())
    }
}

/// The 72-hour coarsening schedule bundled with the benchmark:
/// 15 min x 4, 30 min x 6, 1 h x 8, 2 h x 6, 4 h x 6, 6 h x 4 (34 steps).
pub fn mh72_schedule() -> Vec<ScheduleEntry> {
    vec![
        ScheduleEntry { res_min: 15, count: 4 },
        ScheduleEntry { res_min: 30, count: 6 },
        ScheduleEntry { res_min: 60, count: 8 },
        ScheduleEntry { res_min: 120, count: 6 },
        ScheduleEntry { res_min: 240, count: 6 },
        ScheduleEntry { res_min: 360, count: 4 },
    ]
}

/// A 48-hour coarsening schedule with 30 steps:
/// 15 min x 4, 30 min x 6, 1 h x 8, 2 h x 6, 4 h x 6.
///
/// This is a reconstruction chosen to hit the published step count for a
/// 48-hour horizon; only the 72-hour schedule above is ground truth.
pub fn mh48_schedule() -> Vec<ScheduleEntry> {
    vec![
        ScheduleEntry { res_min: 15, count: 4 },
        ScheduleEntry { res_min: 30, count: 6 },
        ScheduleEntry { res_min: 60, count: 8 },
        ScheduleEntry { res_min: 120, count: 6 },
        ScheduleEntry { res_min: 240, count: 6 },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    const H: i64 = 60;

    #[test]
    fn uniform_72h_hourly() {
        let g = TimeGrid::uniform(72 * H, 60, 15).unwrap();
        assert_eq!(g.len(), 72);
        assert_eq!(g.t_pred_min(), 72 * H);
        assert_eq!(g.controller_period_min(), 60);
    }

    #[test]
    fn uniform_12h_quarter_hourly() {
        let g = TimeGrid::uniform(12 * H, 15, 15).unwrap();
        assert_eq!(g.len(), 48);
    }

    #[test]
    fn uniform_single_step() {
        let g = TimeGrid::uniform(60, 60, 15).unwrap();
        assert_eq!(g.len(), 1);
        assert_eq!(g.step(0).duration_min, 60);
    }

    #[test]
    fn uniform_rejects_indivisible() {
        let err = TimeGrid::uniform(90, 60, 15).unwrap_err();
        assert!(matches!(err, GridError::NotDivisible { .. }));
        let err = TimeGrid::uniform(120, 60, 45).unwrap_err();
        assert!(matches!(err, GridError::NotDivisible { .. }));
    }

    #[test]
    fn mh72_matches_published_shape() {
        let g = TimeGrid::multi_horizon(&mh72_schedule(), 15).unwrap();
        assert_eq!(g.len(), 34);
        assert_eq!(g.t_pred_min(), 72 * H);
        assert_eq!(g.controller_period_min(), 15);
        // Cumulative coverage per resolution: 1h, 3h, 8h, 12h, 24h, 24h.
        let coverage: Vec<i64> = mh72_schedule()
            .iter()
            .map(|e| e.res_min * e.count as i64)
            .collect();
        assert_eq!(coverage, vec![H, 3 * H, 8 * H, 12 * H, 24 * H, 24 * H]);
    }

    #[test]
    fn mh48_reconstruction_shape() {
        let g = TimeGrid::multi_horizon(&mh48_schedule(), 15).unwrap();
        assert_eq!(g.len(), 30);
        assert_eq!(g.t_pred_min(), 48 * H);
    }

    #[test]
    fn single_resolution_mh_equals_uniform() {
        let mh = TimeGrid::multi_horizon(&[ScheduleEntry { res_min: 60, count: 48 }], 15).unwrap();
        let uni = TimeGrid::uniform(48 * H, 60, 15).unwrap();
        assert_eq!(mh, uni);
    }

    #[test]
    fn mh_rejects_decreasing_resolution() {
        let err = TimeGrid::multi_horizon(
            &[
                ScheduleEntry { res_min: 60, count: 2 },
                ScheduleEntry { res_min: 30, count: 2 },
            ],
            15,
        )
        .unwrap_err();
        assert!(matches!(err, GridError::DecreasingResolution { .. }));
    }

    #[test]
    fn shift_map_uniform_is_pure_shift() {
        let g = TimeGrid::uniform(4 * H, 60, 15).unwrap();
        let map = g.shift_map();
        assert_eq!(map, vec![None, Some(0), Some(1), Some(2)]);
    }

    #[test]
    fn shift_map_single_step_is_empty() {
        let g = TimeGrid::uniform(60, 60, 15).unwrap();
        assert_eq!(g.shift_map(), vec![None]);
    }

    #[test]
    fn shift_map_mh72_fine_region() {
        // After a 15-min shift, old steps 1..=4 start at 0, 15, 30, 45 min on
        // the new axis and land in the new 15-min steps 0..=3.
        let g = TimeGrid::multi_horizon(&mh72_schedule(), 15).unwrap();
        let map = g.shift_map();
        assert_eq!(map[0], None);
        for k in 1..=4 {
            assert_eq!(map[k], Some(k - 1));
        }
        // Hand enumeration of interval containment for the rest of the fine
        // region: old step 5 starts at 75 min -> 60 on the new axis, which is
        // the start of the first 30-min step (index 4).
        assert_eq!(map[5], Some(4));
    }

    #[test]
    fn shift_map_monotone_injective() {
        let grids = [
            TimeGrid::uniform(24 * H, 60, 15).unwrap(),
            TimeGrid::multi_horizon(&mh72_schedule(), 15).unwrap(),
            TimeGrid::multi_horizon(&mh48_schedule(), 15).unwrap(),
        ];
        for g in &grids {
            let map = g.shift_map();
            let mapped: Vec<usize> = map.iter().flatten().copied().collect();
            for w in mapped.windows(2) {
                assert!(w[0] < w[1], "shift map must be strictly increasing");
            }
        }
    }

    #[test]
    fn durations_sum_reproduces_horizon_exactly() {
        let g = TimeGrid::multi_horizon(&mh72_schedule(), 15).unwrap();
        let total: i64 = g.steps().iter().map(|s| s.duration_min).sum();
        assert_eq!(total, g.t_pred_min());
    }

    #[test]
    fn table_of_uniform_step_counts() {
        // All published (t_pred, t_res) -> N combinations for uniform grids.
        let cases: [(i64, i64, usize); 15] = [
            (12, 15, 48),
            (12, 30, 24),
            (12, 60, 12),
            (24, 15, 96),
            (24, 30, 48),
            (24, 60, 24),
            (36, 15, 144),
            (36, 30, 72),
            (36, 60, 36),
            (48, 15, 192),
            (48, 30, 96),
            (48, 60, 48),
            (72, 15, 288),
            (72, 30, 144),
            (72, 60, 72),
        ];
        for (pred_h, res_min, n) in cases {
            let g = TimeGrid::uniform(pred_h * H, res_min, 15).unwrap();
            assert_eq!(g.len(), n, "t_pred={}h t_res={}min", pred_h, res_min);
        }
    }
}
