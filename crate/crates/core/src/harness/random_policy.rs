//! Random baseline: unit moves in the four grid directions, each followed by
//! a spectrometer or drill reading, restricted to actions after which the
//! goal is still reachable.

use rand::Rng;

use crate::environment::{SensorKind, SensorModel};
use crate::gp::Point;
use crate::objective::Region;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Direction {
    East,
    West,
    North,
    South,
}

impl Direction {
    pub const ALL: [Direction; 4] = [Direction::East, Direction::West, Direction::North, Direction::South];

    pub fn offset(self) -> Point {
        match self {
            Direction::East => Point::new(1.0, 0.0),
            Direction::West => Point::new(-1.0, 0.0),
            Direction::North => Point::new(0.0, 1.0),
            Direction::South => Point::new(0.0, -1.0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RandomAction {
    pub direction: Direction,
    pub sensor: SensorKind,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RandomPolicy {
    pub goal: Point,
    pub region: Region,
    pub movement_cost: f64,
    pub sensors: SensorModel,
}

impl RandomPolicy {
    /// Cost of getting from `p` to the goal by cheapest grid moves, sensing
    /// with the spectrometer after each.
    pub fn cost_to_go(&self, p: &Point) -> f64 {
        let d = p - self.goal;
        let moves = (d.x.abs() + d.y.abs()).round();
        moves * (self.movement_cost + self.sensors.spectrometer_cost)
    }

    pub fn action_cost(&self, a: &RandomAction) -> f64 {
        self.movement_cost + self.sensors.cost(a.sensor)
    }

    /// Actions that stay inside the region and leave enough budget to walk
    /// on to the goal, in a fixed order.
    pub fn admissible(&self, pos: &Point, remaining: f64) -> Vec<RandomAction> {
        let tol = 1e-9 * remaining.abs().max(1.0);
        let mut out = Vec::with_capacity(8);
        for direction in Direction::ALL {
            let next = pos + direction.offset();
            if !self.region.contains(&next) {
                continue;
            }
            for sensor in SensorKind::ALL {
                let a = RandomAction { direction, sensor };
                if self.action_cost(&a) + self.cost_to_go(&next) <= remaining + tol {
                    out.push(a);
                }
            }
        }
        out
    }
}

/// Uniform draw over the admissible actions; `None` when there are none.
pub fn random_policy_step<R: Rng + ?Sized>(
    policy: &RandomPolicy,
    pos: &Point,
    remaining: f64,
    rng: &mut R,
) -> Option<RandomAction> {
    let actions = policy.admissible(pos, remaining);
    if actions.is_empty() {
        None
    } else {
        Some(actions[rng.random_range(0..actions.len())])
    }
}
