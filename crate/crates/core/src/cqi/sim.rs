use crate::world::{normalize_angle, Pose, SituationModel};

use super::{CqiCommand, CqiData, NONE_LABEL};

/// Position and heading tolerances for a completed move.
const POSITION_TOLERANCE: f64 = 0.01;
const HEADING_TOLERANCE: f64 = 0.01;
/// Heading error below which the robot stops turning and drives.
const ALIGNED: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimParams {
    /// Meters per second.
    pub linear_speed: f64,
    /// Radians per second.
    pub angular_speed: f64,
    /// Farthest an object may be from the robot and still be grasped.
    pub grasp_radius: f64,
    /// Seconds of simulated time per step.
    pub tick: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            linear_speed: 1.0,
            angular_speed: 1.0,
            grasp_radius: 0.6,
            tick: 0.05,
        }
    }
}

/// A kinematic robot: turns in place, drives straight, turns to the final
/// heading. It owns the ground-truth world and reports changes as data.
#[derive(Debug, Clone)]
pub struct Simulator {
    world: SituationModel,
    params: SimParams,
    ticks: u64,
    goal: Option<Pose>,
}

impl Simulator {
    pub fn new(world: SituationModel, params: SimParams) -> Self {
        Simulator {
            world,
            params,
            ticks: 0,
            goal: None,
        }
    }

    pub fn world(&self) -> &SituationModel {
        &self.world
    }

    pub fn params(&self) -> SimParams {
        self.params
    }

    /// Simulated seconds elapsed.
    pub fn clock(&self) -> f64 {
        self.ticks as f64 * self.params.tick
    }

    pub fn is_idle(&self) -> bool {
        self.goal.is_none()
    }

    /// Everything the robot reports on connecting.
    pub fn start_data(&self) -> Vec<CqiData> {
        let r = &self.world.robot;
        let mut out = vec![
            CqiData::AtPose {
                x: r.x,
                y: r.y,
                theta: r.theta,
            },
            CqiData::Holding {
                object: r.holding.clone().unwrap_or_else(|| NONE_LABEL.into()),
            },
        ];
        for o in self.world.objects.values() {
            for (k, v) in &o.properties {
                out.push(CqiData::HasProperty {
                    object: o.id.clone(),
                    property: k.clone(),
                    value: v.clone(),
                });
            }
        }
        out
    }

    /// Accept a command. Moves start running and report through [`step`];
    /// grasp and release complete at once.
    ///
    /// [`step`]: Simulator::step
    pub fn apply_command(&mut self, cmd: &CqiCommand) -> Vec<CqiData> {
        match cmd {
            CqiCommand::MoveToPose { x, y, theta } => {
                self.goal = Some(Pose {
                    x: *x,
                    y: *y,
                    theta: normalize_angle(*theta),
                });
                Vec::new()
            }
            CqiCommand::GraspObject { object_label } => {
                let r = &self.world.robot;
                let reachable = self
                    .world
                    .objects
                    .get(object_label)
                    .is_some_and(|o| (o.x - r.x).hypot(o.y - r.y) <= self.params.grasp_radius);
                if r.holding.is_none() && reachable {
                    self.report(CqiData::Holding {
                        object: object_label.clone(),
                    })
                } else {
                    vec![CqiData::Holding {
                        object: r.holding.clone().unwrap_or_else(|| NONE_LABEL.into()),
                    }]
                }
            }
            CqiCommand::Release {} => self.report(CqiData::Holding {
                object: NONE_LABEL.into(),
            }),
        }
    }

    fn report(&mut self, d: CqiData) -> Vec<CqiData> {
        self.world
            .apply_data(&d)
            .expect("simulator only reports objects it knows");
        vec![d]
    }

    /// Advance one tick. The pose is reported every tick, moving or not.
    pub fn step(&mut self) -> Vec<CqiData> {
        self.ticks += 1;
        let r = &self.world.robot;
        let Some(goal) = self.goal else {
            return vec![CqiData::AtPose {
                x: r.x,
                y: r.y,
                theta: r.theta,
            }];
        };
        let (dx, dy) = (goal.x - r.x, goal.y - r.y);
        let dist = dx.hypot(dy);
        let turn_step = self.params.angular_speed * self.params.tick;
        let drive_step = self.params.linear_speed * self.params.tick;
        let (mut x, mut y, mut theta) = (r.x, r.y, r.theta);
        let turn_toward = |from: f64, to: f64| {
            let err = normalize_angle(to - from);
            if err.abs() <= turn_step {
                to
            } else {
                normalize_angle(from + turn_step * err.signum())
            }
        };
        if dist >= POSITION_TOLERANCE {
            let bearing = dy.atan2(dx);
            if normalize_angle(bearing - theta).abs() > ALIGNED {
                theta = turn_toward(theta, bearing);
            } else if dist - drive_step < POSITION_TOLERANCE {
                x = goal.x;
                y = goal.y;
            } else {
                x += drive_step * dx / dist;
                y += drive_step * dy / dist;
            }
        } else {
            theta = turn_toward(theta, goal.theta);
        }
        let done = (goal.x - x).hypot(goal.y - y) < POSITION_TOLERANCE
            && normalize_angle(goal.theta - theta).abs() < HEADING_TOLERANCE;
        if done {
            self.goal = None;
        }
        self.report(CqiData::AtPose { x, y, theta })
    }

    /// Step until the current move finishes or `max_ticks` pass.
    pub fn run_until_idle(&mut self, max_ticks: usize) -> Vec<CqiData> {
        let mut out = Vec::new();
        for _ in 0..max_ticks {
            if self.is_idle() {
                break;
            }
            out.extend(self.step());
        }
        out
    }
}
