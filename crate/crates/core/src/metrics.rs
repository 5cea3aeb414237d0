//! Mobility metrics over a sampled trace: average link duration, average
//! relative speed and average degree of spatial dependence.
//!
//! All three are means over the tuples whose value is nonzero; a metric with
//! no qualifying tuples is reported as `0` with `tuples == 0`.

use crate::geometry::{MobilityTrace, NodeId, Vec2};

/// Values with magnitude at or below this count as zero for tuple exclusion.
pub const ZERO_TOLERANCE: f64 = 1e-12;

pub const DEFAULT_RANGE: f64 = 250.0;
pub const DEFAULT_PROXIMITY_FACTOR: f64 = 2.0;

/// Maximal run of consecutive samples during which `i` and `j` are in range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkEpisode {
    pub i: NodeId,
    pub j: NodeId,
    /// Time of the first in-range sample.
    pub start: f64,
    /// Time of the last in-range sample.
    pub end: f64,
    /// `end - start + Δt`.
    pub duration: f64,
}

/// Mean of a metric over its counted tuples.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MetricValue {
    pub value: f64,
    pub tuples: usize,
}

impl MetricValue {
    fn from_sum(sum: f64, tuples: usize) -> Self {
        if tuples == 0 {
            MetricValue {
                value: 0.0,
                tuples: 0,
            }
        } else {
            MetricValue {
                value: sum / tuples as f64,
                tuples,
            }
        }
    }

    pub fn is_defined(&self) -> bool {
        self.tuples > 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsConfig {
    pub range: f64,
    pub proximity_factor: f64,
    /// Only count relative-speed tuples of pairs at most this far apart.
    pub distance_filter: Option<f64>,
    /// Keep tuples whose value is exactly zero instead of dropping them.
    pub include_zero: bool,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            range: DEFAULT_RANGE,
            proximity_factor: DEFAULT_PROXIMITY_FACTOR,
            distance_filter: None,
            include_zero: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub link_duration: MetricValue,
    pub relative_speed: MetricValue,
    pub spatial_dependence: MetricValue,
    pub episodes: usize,
    /// Spatial-dependence tuples skipped because a node was stationary.
    pub zero_speed_skips: usize,
    pub config: MetricsConfig,
}

pub fn extract_link_episodes(trace: &MobilityTrace, range: f64) -> Vec<LinkEpisode> {
    let n = trace.node_count;
    let steps = trace.step_count();
    let dt = trace.sample_interval;
    let mut episodes = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let mut open: Option<usize> = None;
            for k in 0..steps {
                let d = trace
                    .state(k, i)
                    .position
                    .distance(trace.state(k, j).position);
                match (d <= range, open) {
                    (true, None) => open = Some(k),
                    (false, Some(first)) => {
                        episodes.push(episode(trace, i, j, first, k - 1, dt));
                        open = None;
                    }
                    _ => {}
                }
            }
            if let Some(first) = open {
                episodes.push(episode(trace, i, j, first, steps - 1, dt));
            }
        }
    }
    episodes
}

fn episode(
    trace: &MobilityTrace,
    i: NodeId,
    j: NodeId,
    first: usize,
    last: usize,
    dt: f64,
) -> LinkEpisode {
    let (start, end) = (trace.time_of(first), trace.time_of(last));
    LinkEpisode {
        i,
        j,
        start,
        end,
        duration: (last - first + 1) as f64 * dt,
    }
}

pub fn avg_link_duration(episodes: &[LinkEpisode]) -> MetricValue {
    let (sum, count) = episodes
        .iter()
        .filter(|e| e.duration > 0.0)
        .fold((0.0, 0), |(s, c), e| (s + e.duration, c + 1));
    MetricValue::from_sum(sum, count)
}

fn velocities(trace: &MobilityTrace, step: usize) -> Vec<(Vec2, Vec2)> {
    trace
        .step_states(step)
        .iter()
        .map(|s| (s.state.position, s.state.velocity()))
        .collect()
}

/// Mean of `|V_i(t) - V_j(t)|` over ordered pairs `i != j` and sample times.
pub fn avg_relative_speed(
    trace: &MobilityTrace,
    distance_filter: Option<f64>,
    include_zero: bool,
) -> MetricValue {
    let mut sum = 0.0;
    let mut count = 0;
    for k in 0..trace.step_count() {
        let row = velocities(trace, k);
        for (i, &(pi, vi)) in row.iter().enumerate() {
            for (j, &(pj, vj)) in row.iter().enumerate() {
                if i == j {
                    continue;
                }
                if let Some(limit) = distance_filter {
                    if pi.distance(pj) > limit {
                        continue;
                    }
                }
                let rs = (vi - vj).norm();
                if include_zero || rs > ZERO_TOLERANCE {
                    sum += rs;
                    count += 1;
                }
            }
        }
    }
    MetricValue::from_sum(sum, count)
}

/// Direction cosine between two nonzero velocities.
pub fn relative_direction(a: Vec2, b: Vec2) -> f64 {
    (a.dot(b) / (a.norm() * b.norm())).clamp(-1.0, 1.0)
}

/// Ratio of the smaller to the larger speed.
pub fn speed_ratio(a: Vec2, b: Vec2) -> f64 {
    let (x, y) = (a.norm(), b.norm());
    x.min(y) / x.max(y)
}

/// Mean of `RD · SR` over ordered pairs within `c · R` of each other whose
/// speeds are both positive.
pub fn avg_spatial_dependence(
    trace: &MobilityTrace,
    range: f64,
    proximity_factor: f64,
    include_zero: bool,
) -> (MetricValue, usize) {
    let limit = range * proximity_factor;
    let mut sum = 0.0;
    let mut count = 0;
    let mut skipped = 0;
    for k in 0..trace.step_count() {
        let row = velocities(trace, k);
        for (i, &(pi, vi)) in row.iter().enumerate() {
            for (j, &(pj, vj)) in row.iter().enumerate() {
                if i == j || pi.distance(pj) > limit {
                    continue;
                }
                if vi.norm() <= 0.0 || vj.norm() <= 0.0 {
                    skipped += 1;
                    continue;
                }
                let ds = relative_direction(vi, vj) * speed_ratio(vi, vj);
                if include_zero || ds.abs() > ZERO_TOLERANCE {
                    sum += ds;
                    count += 1;
                }
            }
        }
    }
    (MetricValue::from_sum(sum, count), skipped)
}

pub fn compute_metrics(trace: &MobilityTrace, config: MetricsConfig) -> MetricsReport {
    let episodes = extract_link_episodes(trace, config.range);
    let (spatial_dependence, zero_speed_skips) = avg_spatial_dependence(
        trace,
        config.range,
        config.proximity_factor,
        config.include_zero,
    );
    MetricsReport {
        link_duration: avg_link_duration(&episodes),
        relative_speed: avg_relative_speed(trace, config.distance_filter, config.include_zero),
        spatial_dependence,
        episodes: episodes.len(),
        zero_speed_skips,
        config,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{NodeState, SimulationArea};
    use std::f64::consts::PI;

    fn area() -> SimulationArea {
        SimulationArea::new(1000.0, 1000.0).unwrap()
    }

    fn static_pair(gap: f64, duration: usize) -> MobilityTrace {
        let row = vec![
            NodeState::new(Vec2::new(100.0, 100.0), 0.0, 0.0),
            NodeState::new(Vec2::new(100.0 + gap, 100.0), 0.0, 0.0),
        ];
        MobilityTrace::from_steps(area(), 1.0, vec![row; duration + 1]).unwrap()
    }

    #[test]
    fn static_pairs_in_and_out_of_range() {
        // 100 samples, t = 0..=99
        let eps = extract_link_episodes(&static_pair(100.0, 99), 250.0);
        assert_eq!(eps.len(), 1);
        assert_eq!(eps[0].duration, 100.0);
        assert_eq!(avg_link_duration(&eps).value, 100.0);
        assert!(extract_link_episodes(&static_pair(300.0, 100), 250.0).is_empty());
    }

    #[test]
    fn crossing_node_yields_one_episode() {
        // j passes by i at 100 m/s, inside 250 m for samples 3..=7
        let rows: Vec<Vec<NodeState>> = (0..=10)
            .map(|k| {
                vec![
                    NodeState::new(Vec2::new(500.0, 500.0), 0.0, 0.0),
                    NodeState::new(
                        Vec2::new(500.0 - 500.0 + 100.0 * k as f64, 550.0),
                        100.0,
                        0.0,
                    ),
                ]
            })
            .collect();
        let trace = MobilityTrace::from_steps(area(), 1.0, rows).unwrap();
        let eps = extract_link_episodes(&trace, 250.0);
        assert_eq!(eps.len(), 1);
        assert_eq!((eps[0].start, eps[0].end, eps[0].duration), (3.0, 7.0, 5.0));
        assert_eq!(avg_link_duration(&eps).value, 5.0);
    }

    #[test]
    fn link_duration_mean() {
        let ep = |d: f64| LinkEpisode {
            i: 0,
            j: 1,
            start: 0.0,
            end: d - 1.0,
            duration: d,
        };
        assert_eq!(avg_link_duration(&[ep(100.0)]).value, 100.0);
        assert_eq!(
            avg_link_duration(&[ep(10.0), ep(20.0), ep(30.0)]).value,
            20.0
        );
        let none = avg_link_duration(&[]);
        assert!(!none.is_defined());
        assert_eq!(none.value, 0.0);
    }

    fn pair_with(vi: (f64, f64), vj: (f64, f64), gap: f64) -> MobilityTrace {
        let rows = (0..3)
            .map(|_| {
                vec![
                    NodeState::new(Vec2::new(400.0, 500.0), vi.0, vi.1),
                    NodeState::new(Vec2::new(400.0 + gap, 500.0), vj.0, vj.1),
                ]
            })
            .collect();
        MobilityTrace::from_steps(area(), 1.0, rows).unwrap()
    }

    #[test]
    fn relative_speed_cases() {
        let head_on = pair_with((10.0, 0.0), (10.0, PI), 100.0);
        let rs = avg_relative_speed(&head_on, None, false);
        assert!((rs.value - 20.0).abs() < 1e-9);
        assert_eq!(rs.tuples, 6);
        let same = pair_with((10.0, 1.0), (10.0, 1.0), 100.0);
        let rs = avg_relative_speed(&same, None, false);
        assert!(!rs.is_defined());
        assert_eq!(avg_relative_speed(&same, None, true).tuples, 6);
        assert!(!avg_relative_speed(&head_on, Some(50.0), false).is_defined());
    }

    #[test]
    fn spatial_dependence_cases() {
        let (ds, _) = avg_spatial_dependence(
            &pair_with((10.0, 0.3), (10.0, 0.3), 100.0),
            250.0,
            2.0,
            false,
        );
        assert!((ds.value - 1.0).abs() < 1e-12);
        let (ds, _) = avg_spatial_dependence(
            &pair_with((10.0, 0.0), (10.0, PI), 100.0),
            250.0,
            2.0,
            false,
        );
        assert!((ds.value + 1.0).abs() < 1e-12);
        let (ds, _) = avg_spatial_dependence(
            &pair_with((10.0, 0.0), (5.0, PI / 2.0), 100.0),
            250.0,
            2.0,
            false,
        );
        assert!(!ds.is_defined());
        let (ds, _) = avg_spatial_dependence(
            &pair_with((10.0, 0.0), (5.0, PI / 2.0), 100.0),
            250.0,
            2.0,
            true,
        );
        assert_eq!(ds.tuples, 6);
        // too far apart
        let (ds, _) = avg_spatial_dependence(
            &pair_with((10.0, 0.0), (10.0, 0.0), 600.0),
            250.0,
            2.0,
            false,
        );
        assert!(!ds.is_defined());
        let (ds, skipped) =
            avg_spatial_dependence(&pair_with((0.0, 0.0), (10.0, 0.0), 10.0), 250.0, 2.0, false);
        assert!(!ds.is_defined());
        assert_eq!(skipped, 6);
    }

    #[test]
    fn factors_are_scale_invariant() {
        let a = Vec2::new(3.0, 4.0);
        let b = Vec2::new(-1.0, 7.0);
        assert!((relative_direction(a, b) - relative_direction(a * 2.0, b * 2.0)).abs() < 1e-15);
        assert!((speed_ratio(a, b) - speed_ratio(a * 2.0, b * 2.0)).abs() < 1e-15);
        assert!((speed_ratio(a, b) - 5.0 / 50f64.sqrt()).abs() < 1e-12);
    }
}
