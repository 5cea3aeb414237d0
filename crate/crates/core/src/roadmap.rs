//! Synthetic lane graphs for vehicular motion: Manhattan street grids and
//! multi-lane freeways.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::Rng;
use thiserror::Error;

use crate::geometry::{wrap_angle, SimulationArea, Vec2};

/// Lane separation inside one freeway carriageway, meters.
pub const DEFAULT_LANE_SPACING: f64 = 4.0;

const OFFSET_EPS: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MapError {
    #[error("a manhattan grid needs at least 2 rows and 2 columns, got {rows}x{cols}")]
    DegenerateGrid { rows: usize, cols: usize },
    #[error("a freeway map needs at least one freeway and one lane per direction")]
    DegenerateFreeway,
    #[error("lane {lane} at y={y} falls outside the area")]
    LaneOutsideArea { lane: usize, y: f64 },
    #[error("turn probabilities must be non-negative with a positive sum")]
    InvalidTurnProbabilities,
    #[error("unknown lane {0}")]
    UnknownLane(usize),
    #[error("offset {offset} on lane {lane} is not at an intersection")]
    NotAtIntersection { lane: usize, offset: f64 },
    #[error("intersection {0} offers no way to continue")]
    DeadEnd(usize),
    #[error("operation requires a {expected:?} map")]
    WrongKind { expected: MapKind },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapKind {
    Manhattan,
    Freeway,
}

/// Where a lane passes through an intersection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing {
    pub offset: f64,
    pub intersection: usize,
}

/// A directed, straight, zero-width lane.
#[derive(Debug, Clone, PartialEq)]
pub struct Lane {
    pub id: usize,
    pub points: Vec<Vec2>,
    pub heading: f64,
    pub length: f64,
    /// Sorted by offset.
    pub crossings: Vec<Crossing>,
}

impl Lane {
    fn straight(id: usize, from: Vec2, to: Vec2) -> Lane {
        let d = to - from;
        Lane {
            id,
            points: vec![from, to],
            heading: wrap_angle(d.y.atan2(d.x)),
            length: d.norm(),
            crossings: Vec::new(),
        }
    }

    pub fn point_at(&self, offset: f64) -> Vec2 {
        let (a, b) = (self.points[0], self.points[1]);
        a + (b - a) * (offset / self.length)
    }

    fn crossing_at(&self, offset: f64) -> Option<&Crossing> {
        self.crossings
            .iter()
            .find(|c| (c.offset - offset).abs() <= OFFSET_EPS)
    }

    fn next_crossing_after(&self, offset: f64) -> Option<&Crossing> {
        self.crossings
            .iter()
            .find(|c| c.offset > offset + OFFSET_EPS)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LanePosition {
    pub lane: usize,
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Intersection {
    pub id: usize,
    pub point: Vec2,
    /// Lanes that can be entered here, with the entry offset on each.
    pub outgoing: Vec<LanePosition>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TurnProbabilities {
    pub straight: f64,
    pub left: f64,
    pub right: f64,
}

impl Default for TurnProbabilities {
    fn default() -> Self {
        TurnProbabilities {
            straight: 0.5,
            left: 0.25,
            right: 0.25,
        }
    }
}

impl TurnProbabilities {
    pub fn validate(&self) -> Result<(), MapError> {
        let all = [self.straight, self.left, self.right];
        if all.iter().any(|p| !p.is_finite() || *p < 0.0) || all.iter().sum::<f64>() <= 0.0 {
            return Err(MapError::InvalidTurnProbabilities);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Turn {
    Straight,
    Left,
    Right,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LaneGraph {
    pub kind: MapKind,
    pub lanes: Vec<Lane>,
    pub intersections: Vec<Intersection>,
    pub area: SimulationArea,
}

impl LaneGraph {
    pub fn lane(&self, id: usize) -> Result<&Lane, MapError> {
        self.lanes.get(id).ok_or(MapError::UnknownLane(id))
    }

    pub fn point_at(&self, pos: LanePosition) -> Vec2 {
        self.lanes[pos.lane].point_at(pos.offset)
    }

    pub fn heading_at(&self, pos: LanePosition) -> f64 {
        self.lanes[pos.lane].heading
    }

    pub fn total_lane_length(&self) -> f64 {
        self.lanes.iter().map(|l| l.length).sum()
    }

    /// Outgoing options at the intersection `pos` sits on, classified
    /// relative to the arrival heading. U-turns are never offered.
    pub fn turn_options(&self, pos: LanePosition) -> Result<Vec<(Turn, LanePosition)>, MapError> {
        let lane = self.lane(pos.lane)?;
        let crossing = lane
            .crossing_at(pos.offset)
            .ok_or(MapError::NotAtIntersection {
                lane: pos.lane,
                offset: pos.offset,
            })?;
        let node = &self.intersections[crossing.intersection];
        let mut options = Vec::with_capacity(3);
        for turn in [Turn::Straight, Turn::Left, Turn::Right] {
            let wanted = match turn {
                Turn::Straight => 0.0,
                Turn::Left => FRAC_PI_2,
                Turn::Right => 3.0 * FRAC_PI_2,
            };
            let hit = node.outgoing.iter().find(|out| {
                let delta = wrap_angle(self.lanes[out.lane].heading - lane.heading);
                let gap = (delta - wanted).abs();
                gap.min(2.0 * PI - gap) < 1e-6
            });
            if let Some(out) = hit {
                options.push((turn, *out));
            }
        }
        Ok(options)
    }
}

/// Grid of `rows` horizontal and `cols` vertical two-way streets spanning the
/// whole area; the outermost streets run along the area border.
pub fn build_manhattan_map(
    rows: usize,
    cols: usize,
    area: SimulationArea,
) -> Result<LaneGraph, MapError> {
    if rows < 2 || cols < 2 {
        return Err(MapError::DegenerateGrid { rows, cols });
    }
    let xs: Vec<f64> = (0..cols)
        .map(|j| area.width * j as f64 / (cols - 1) as f64)
        .collect();
    let ys: Vec<f64> = (0..rows)
        .map(|i| area.height * i as f64 / (rows - 1) as f64)
        .collect();
    let at = |i: usize, j: usize| i * cols + j;

    let mut intersections: Vec<Intersection> = (0..rows)
        .flat_map(|i| (0..cols).map(move |j| (i, j)))
        .map(|(i, j)| Intersection {
            id: at(i, j),
            point: Vec2::new(xs[j], ys[i]),
            outgoing: Vec::new(),
        })
        .collect();

    let mut lanes = Vec::with_capacity(2 * (rows + cols));
    for (i, &y) in ys.iter().enumerate() {
        let mut east = Lane::straight(lanes.len(), Vec2::new(0.0, y), Vec2::new(area.width, y));
        east.crossings = (0..cols)
            .map(|j| Crossing {
                offset: xs[j],
                intersection: at(i, j),
            })
            .collect();
        lanes.push(east);
        let mut west = Lane::straight(lanes.len(), Vec2::new(area.width, y), Vec2::new(0.0, y));
        west.crossings = (0..cols)
            .rev()
            .map(|j| Crossing {
                offset: area.width - xs[j],
                intersection: at(i, j),
            })
            .collect();
        lanes.push(west);
    }
    for (j, &x) in xs.iter().enumerate() {
        let mut north = Lane::straight(lanes.len(), Vec2::new(x, 0.0), Vec2::new(x, area.height));
        north.crossings = (0..rows)
            .map(|i| Crossing {
                offset: ys[i],
                intersection: at(i, j),
            })
            .collect();
        lanes.push(north);
        let mut south = Lane::straight(lanes.len(), Vec2::new(x, area.height), Vec2::new(x, 0.0));
        south.crossings = (0..rows)
            .rev()
            .map(|i| Crossing {
                offset: area.height - ys[i],
                intersection: at(i, j),
            })
            .collect();
        lanes.push(south);
    }

    for lane in &lanes {
        for c in &lane.crossings {
            // a lane whose end sits here cannot be entered here
            if c.offset < lane.length - OFFSET_EPS {
                intersections[c.intersection].outgoing.push(LanePosition {
                    lane: lane.id,
                    offset: c.offset,
                });
            }
        }
    }

    Ok(LaneGraph {
        kind: MapKind::Manhattan,
        lanes,
        intersections,
        area,
    })
}

pub fn build_freeway_map(
    num_freeways: usize,
    lanes_per_direction: usize,
    area: SimulationArea,
) -> Result<LaneGraph, MapError> {
    build_freeway_map_spaced(
        num_freeways,
        lanes_per_direction,
        DEFAULT_LANE_SPACING,
        area,
    )
}

/// Freeways run along x, centered at `(k + 1/2) · height / num_freeways`.
/// Eastbound lanes sit below the centerline, westbound above it.
pub fn build_freeway_map_spaced(
    num_freeways: usize,
    lanes_per_direction: usize,
    lane_spacing: f64,
    area: SimulationArea,
) -> Result<LaneGraph, MapError> {
    if num_freeways == 0 || lanes_per_direction == 0 {
        return Err(MapError::DegenerateFreeway);
    }
    let mut lanes = Vec::with_capacity(2 * num_freeways * lanes_per_direction);
    for k in 0..num_freeways {
        let center = area.height * (k as f64 + 0.5) / num_freeways as f64;
        for l in 0..lanes_per_direction {
            let shift = (l as f64 + 0.5) * lane_spacing;
            for (y, eastbound) in [(center - shift, true), (center + shift, false)] {
                let id = lanes.len();
                if !(0.0..=area.height).contains(&y) {
                    return Err(MapError::LaneOutsideArea { lane: id, y });
                }
                let (from, to) = if eastbound {
                    (Vec2::new(0.0, y), Vec2::new(area.width, y))
                } else {
                    (Vec2::new(area.width, y), Vec2::new(0.0, y))
                };
                lanes.push(Lane::straight(id, from, to));
            }
        }
    }
    Ok(LaneGraph {
        kind: MapKind::Freeway,
        lanes,
        intersections: Vec::new(),
        area,
    })
}

/// Chooses where to go from `pos`.
///
/// Manhattan: `pos` must sit on an intersection; one uniform draw selects
/// among straight/left/right with the given weights renormalized over the
/// options that exist. Freeway: wraps to the start of the same lane.
pub fn next_leg<R: Rng + ?Sized>(
    map: &LaneGraph,
    pos: LanePosition,
    turns: &TurnProbabilities,
    rng: &mut R,
) -> Result<LanePosition, MapError> {
    match map.kind {
        MapKind::Freeway => {
            map.lane(pos.lane)?;
            Ok(LanePosition {
                lane: pos.lane,
                offset: 0.0,
            })
        }
        MapKind::Manhattan => {
            let options = map.turn_options(pos)?;
            let weight = |t: Turn| match t {
                Turn::Straight => turns.straight,
                Turn::Left => turns.left,
                Turn::Right => turns.right,
            };
            let total: f64 = options.iter().map(|(t, _)| weight(*t)).sum();
            if options.is_empty() || total <= 0.0 {
                let lane = &map.lanes[pos.lane];
                let id = lane.crossing_at(pos.offset).map_or(0, |c| c.intersection);
                return Err(MapError::DeadEnd(id));
            }
            let draw = rng.gen::<f64>() * total;
            let mut acc = 0.0;
            for (turn, out) in &options {
                acc += weight(*turn);
                if draw < acc {
                    return Ok(*out);
                }
            }
            Ok(options[options.len() - 1].1)
        }
    }
}

/// Moves `distance` meters along the lane network, taking turns (or wrapping)
/// whenever an intersection or lane end is reached.
pub fn advance<R: Rng + ?Sized>(
    map: &LaneGraph,
    mut pos: LanePosition,
    mut distance: f64,
    turns: &TurnProbabilities,
    rng: &mut R,
) -> Result<LanePosition, MapError> {
    while distance > 0.0 {
        let lane = map.lane(pos.lane)?;
        let stop = match map.kind {
            MapKind::Manhattan => lane.next_crossing_after(pos.offset).map(|c| c.offset),
            MapKind::Freeway => None,
        }
        .unwrap_or(lane.length);
        let gap = stop - pos.offset;
        if gap > distance {
            pos.offset += distance;
            break;
        }
        distance -= gap;
        pos.offset = stop;
        pos = next_leg(map, pos, turns, rng)?;
    }
    Ok(pos)
}
