use crate::cqi::CqiCommand;
use crate::world::{Level, Place, Pose, SituationModel};

/// Distance the robot keeps from a target when approaching it.
pub const STANDOFF: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PlanError {
    #[error("I am already holding {0}.")]
    AlreadyHolding(String),
    #[error("I cannot reach {0}.")]
    OutOfBounds(String),
    #[error("I do not know how to {0}.")]
    UnknownAction(String),
    #[error("I do not know where {0} is.")]
    UnknownPlace(String),
}

/// Grounded arguments of a command.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanArgs {
    pub object: Option<String>,
    pub goal: Option<Place>,
}

/// Pose `STANDOFF` short of `target` on the line from `from`, facing it.
pub fn approach(from: (f64, f64), target: (f64, f64)) -> Pose {
    let (dx, dy) = (target.0 - from.0, target.1 - from.1);
    let dist = dx.hypot(dy);
    let (ux, uy) = if dist < 1e-9 { (1.0, 0.0) } else { (dx / dist, dy / dist) };
    Pose {
        x: target.0 - STANDOFF * ux,
        y: target.1 - STANDOFF * uy,
        theta: uy.atan2(ux),
    }
}

fn move_to(p: Pose) -> CqiCommand {
    CqiCommand::MoveToPose {
        x: p.x,
        y: p.y,
        theta: p.theta,
    }
}

/// Fixed command templates: the robot walks up to what it needs, facing
/// it, so grasp preconditions hold by construction.
pub fn plan_action(action: &str, args: &PlanArgs, m: &SituationModel) -> Result<Vec<CqiCommand>, PlanError> {
    let bounds = m.bounds();
    let in_bounds = |p: &Pose| p.x >= bounds[0] && p.x <= bounds[2] && p.y >= bounds[1] && p.y <= bounds[3];
    let point = |place: &Place| {
        m.place_point(place).ok_or_else(|| {
            PlanError::UnknownPlace(match place {
                Place::Region(n) | Place::Object(n) => n.clone(),
            })
        })
    };
    let robot = (m.robot.x, m.robot.y);
    let fetch = |object: &str| -> Result<(Vec<CqiCommand>, Pose), PlanError> {
        if let Some(h) = &m.robot.holding {
            return Err(PlanError::AlreadyHolding(h.clone()));
        }
        let target = point(&Place::Object(object.to_string()))?;
        let pose = approach(robot, target);
        if !in_bounds(&pose) {
            return Err(PlanError::OutOfBounds(object.to_string()));
        }
        Ok((
            vec![
                move_to(pose),
                CqiCommand::GraspObject {
                    object_label: object.to_string(),
                },
            ],
            pose,
        ))
    };
    let deliver = |from: (f64, f64), goal: &Place| -> Result<Vec<CqiCommand>, PlanError> {
        let pose = approach(from, point(goal)?);
        if !in_bounds(&pose) {
            return Err(PlanError::OutOfBounds(match goal {
                Place::Region(n) | Place::Object(n) => n.clone(),
            }));
        }
        Ok(vec![move_to(pose)])
    };
    let object = || args.object.as_deref().ok_or_else(|| PlanError::UnknownAction(action.to_string()));
    let speaker = Place::Region(m.speaker_region.clone());
    match action {
        "pick_up" => Ok(fetch(object()?)?.0),
        "bring" | "get" => {
            let (mut cmds, at) = fetch(object()?)?;
            let goal = args.goal.as_ref().unwrap_or(&speaker);
            cmds.extend(deliver((at.x, at.y), goal)?);
            cmds.push(CqiCommand::Release {});
            Ok(cmds)
        }
        "move_self" => {
            let goal = args.goal.as_ref().ok_or_else(|| PlanError::UnknownAction(action.to_string()))?;
            deliver(robot, goal)
        }
        other => Err(PlanError::UnknownAction(other.replace('_', " "))),
    }
}

/// Where an asserted relation puts an object, and at which level.
pub(crate) fn placement(rel: &str, landmark: &Place, m: &SituationModel) -> Option<(f64, f64, Level)> {
    match landmark {
        Place::Region(name) => {
            let r = m.regions.get(name)?;
            let (cx, cy) = r.center();
            let [x0, _, x1, _] = r.footprint;
            Some(match rel {
                "on" => (cx, cy, Level::Surface(name.clone())),
                "under" => (cx, cy, Level::Floor),
                "in" | "at" | "with" => (cx, cy, m.level_at(cx, cy)),
                "left_of" => (x0 - STANDOFF, cy, m.level_at(x0 - STANDOFF, cy)),
                "right_of" => (x1 + STANDOFF, cy, m.level_at(x1 + STANDOFF, cy)),
                _ => return None,
            })
        }
        Place::Object(id) => {
            let o = m.objects.get(id)?;
            let held = matches!(o.level, Level::Held(_));
            Some(match rel {
                "on" | "in" | "at" | "with" if !held => (o.x, o.y, o.level.clone()),
                "under" if o.level != Level::Floor && !held => (o.x, o.y, Level::Floor),
                "left_of" => (o.x - STANDOFF, o.y, m.level_at(o.x - STANDOFF, o.y)),
                "right_of" => (o.x + STANDOFF, o.y, m.level_at(o.x + STANDOFF, o.y)),
                _ => return None,
            })
        }
    }
}
