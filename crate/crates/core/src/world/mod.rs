//! The situation model: regions, objects and the robot, with spatial
//! relations derived from geometry rather than stored.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::cqi::{CqiData, NONE_LABEL};
use crate::grammar::Grammar;
use crate::specializer::{Determiner, RefId, ReferentDescriptor};

/// Horizontal margin for left/right and the touching distance for
/// object-to-object relations, in meters.
pub const RELATION_MARGIN: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

/// Wrap an angle into (-pi, pi].
pub fn normalize_angle(theta: f64) -> f64 {
    let mut t = theta % (2.0 * PI);
    if t <= -PI {
        t += 2.0 * PI;
    } else if t > PI {
        t -= 2.0 * PI;
    }
    t
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Level {
    Floor,
    Surface(String),
    Held(String),
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Level::Floor => f.write_str("floor"),
            Level::Surface(r) => write!(f, "surface:{r}"),
            Level::Held(r) => write!(f, "held:{r}"),
        }
    }
}

impl std::str::FromStr for Level {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "floor" {
            return Ok(Level::Floor);
        }
        match s.split_once(':') {
            Some(("surface", r)) if !r.is_empty() => Ok(Level::Surface(r.to_string())),
            Some(("held", r)) if !r.is_empty() => Ok(Level::Held(r.to_string())),
            _ => Err(format!("bad level {s:?}")),
        }
    }
}

impl Serialize for Level {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Level {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub name: String,
    /// `[x_min, y_min, x_max, y_max]`
    pub footprint: [f64; 4],
    /// Zero for floor-only regions.
    pub surface_height: f64,
}

impl Region {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let [x0, y0, x1, y1] = self.footprint;
        x0 <= x && x <= x1 && y0 <= y && y <= y1
    }

    pub fn center(&self) -> (f64, f64) {
        let [x0, y0, x1, y1] = self.footprint;
        ((x0 + x1) / 2.0, (y0 + y1) / 2.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldObject {
    pub id: String,
    #[serde(rename = "type")]
    pub onto_type: String,
    #[serde(default)]
    pub properties: BTreeMap<String, String>,
    pub x: f64,
    pub y: f64,
    pub level: Level,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub id: String,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub holding: Option<String>,
}

impl RobotState {
    pub fn pose(&self) -> Pose {
        Pose {
            x: self.x,
            y: self.y,
            theta: self.theta,
        }
    }
}

/// The on-disk world format, also used for snapshots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldFile {
    pub regions: Vec<Region>,
    pub objects: Vec<WorldObject>,
    pub robot: RobotState,
    pub speaker_region: String,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum WorldError {
    #[error("cannot parse world file: {0}")]
    Parse(String),
    #[error("object {object} is on unknown region {region}")]
    UnknownRegion { object: String, region: String },
    #[error("unknown object {0}")]
    UnknownObject(String),
    #[error("unknown object or region {0}")]
    UnknownPlace(String),
    #[error("object {object} has type {ty}, which the ontology lacks")]
    UnknownType { object: String, ty: String },
    #[error("duplicate {0}")]
    Duplicate(String),
    #[error("{0}")]
    Invalid(String),
    #[error("unknown relation {0}")]
    UnknownRelation(String),
    #[error("more than one {} matches", .0.onto_type.replace('_', " "))]
    NestedAmbiguity(ReferentDescriptor),
}

/// The solver's picture of the world.
#[derive(Debug, Clone)]
pub struct SituationModel {
    pub objects: BTreeMap<String, WorldObject>,
    pub regions: BTreeMap<String, Region>,
    pub robot: RobotState,
    pub speaker_region: String,
    ontology: Arc<Grammar>,
}

impl PartialEq for SituationModel {
    fn eq(&self, other: &Self) -> bool {
        self.objects == other.objects
            && self.regions == other.regions
            && self.robot == other.robot
            && self.speaker_region == other.speaker_region
    }
}

/// Something a relation can be anchored to.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Place {
    Region(String),
    Object(String),
}

pub fn load_world(text: &str, ontology: Arc<Grammar>) -> Result<SituationModel, WorldError> {
    let file: WorldFile = serde_json::from_str(text).map_err(|e| WorldError::Parse(e.to_string()))?;
    SituationModel::from_file(file, ontology)
}

impl SituationModel {
    pub fn from_file(file: WorldFile, ontology: Arc<Grammar>) -> Result<Self, WorldError> {
        let mut regions = BTreeMap::new();
        for r in file.regions {
            if regions.contains_key(&r.name) {
                return Err(WorldError::Duplicate(format!("region {}", r.name)));
            }
            regions.insert(r.name.clone(), r);
        }
        let mut objects = BTreeMap::new();
        for o in file.objects {
            if objects.contains_key(&o.id) || regions.contains_key(&o.id) {
                return Err(WorldError::Duplicate(format!("object {}", o.id)));
            }
            objects.insert(o.id.clone(), o);
        }
        let mut robot = file.robot;
        robot.theta = normalize_angle(robot.theta);
        let m = SituationModel {
            objects,
            regions,
            robot,
            speaker_region: file.speaker_region,
            ontology,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn to_file(&self) -> WorldFile {
        WorldFile {
            regions: self.regions.values().cloned().collect(),
            objects: self.objects.values().cloned().collect(),
            robot: self.robot.clone(),
            speaker_region: self.speaker_region.clone(),
        }
    }

    pub fn ontology(&self) -> &Grammar {
        &self.ontology
    }

    pub fn ontology_arc(&self) -> Arc<Grammar> {
        self.ontology.clone()
    }

    /// Check every model invariant.
    pub fn validate(&self) -> Result<(), WorldError> {
        let finite = |what: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(WorldError::Invalid(format!("{what} is not finite")))
            }
        };
        for r in self.regions.values() {
            let [x0, y0, x1, y1] = r.footprint;
            for v in [x0, y0, x1, y1, r.surface_height] {
                finite(&r.name, v)?;
            }
            if x0 >= x1 || y0 >= y1 {
                return Err(WorldError::Invalid(format!("region {} has an empty footprint", r.name)));
            }
        }
        for o in self.objects.values() {
            finite(&o.id, o.x)?;
            finite(&o.id, o.y)?;
            if !self.ontology.is_ontology_type(&o.onto_type) {
                return Err(WorldError::UnknownType {
                    object: o.id.clone(),
                    ty: o.onto_type.clone(),
                });
            }
            match &o.level {
                Level::Floor => {}
                Level::Surface(r) => {
                    let region = self.regions.get(r).ok_or_else(|| WorldError::UnknownRegion {
                        object: o.id.clone(),
                        region: r.clone(),
                    })?;
                    if !region.contains(o.x, o.y) {
                        return Err(WorldError::Invalid(format!("{} is outside {r}", o.id)));
                    }
                }
                Level::Held(by) => {
                    if *by != self.robot.id || self.robot.holding.as_deref() != Some(&o.id) {
                        return Err(WorldError::Invalid(format!("{} is held by {by}, who does not hold it", o.id)));
                    }
                    if o.x != self.robot.x || o.y != self.robot.y {
                        return Err(WorldError::Invalid(format!("{} is held but not at the robot", o.id)));
                    }
                }
            }
        }
        if let Some(h) = &self.robot.holding {
            match self.objects.get(h) {
                Some(o) if o.level == Level::Held(self.robot.id.clone()) => {}
                Some(_) => return Err(WorldError::Invalid(format!("robot holds {h}, which is not marked held"))),
                None => return Err(WorldError::UnknownObject(h.clone())),
            }
        }
        finite("robot x", self.robot.x)?;
        finite("robot y", self.robot.y)?;
        if !(self.robot.theta > -PI && self.robot.theta <= PI) {
            return Err(WorldError::Invalid("robot heading out of range".into()));
        }
        if !self.regions.contains_key(&self.speaker_region) {
            return Err(WorldError::Invalid(format!("unknown speaker region {}", self.speaker_region)));
        }
        Ok(())
    }

    /// Where an object put down at (x, y) comes to rest: on the highest
    /// surface whose footprint contains the point, else on the floor.
    pub fn level_at(&self, x: f64, y: f64) -> Level {
        self.regions
            .values()
            .filter(|r| r.surface_height > 0.0 && r.contains(x, y))
            .max_by(|a, b| a.surface_height.total_cmp(&b.surface_height).then_with(|| b.name.cmp(&a.name)))
            .map_or(Level::Floor, |r| Level::Surface(r.name.clone()))
    }

    /// A representative point of a region (its center) or object.
    pub fn place_point(&self, place: &Place) -> Option<(f64, f64)> {
        match place {
            Place::Region(r) => self.regions.get(r).map(Region::center),
            Place::Object(o) => self.objects.get(o).map(|o| (o.x, o.y)),
        }
    }

    /// Resolve a name to a region first, then an object.
    pub fn place(&self, name: &str) -> Option<Place> {
        if self.regions.contains_key(name) {
            Some(Place::Region(name.to_string()))
        } else if self.objects.contains_key(name) {
            Some(Place::Object(name.to_string()))
        } else {
            None
        }
    }

    /// Axis-aligned box around everything in the world, padded by a meter.
    pub fn bounds(&self) -> [f64; 4] {
        let mut b = [self.robot.x, self.robot.y, self.robot.x, self.robot.y];
        let mut grow = |x: f64, y: f64| {
            b[0] = b[0].min(x);
            b[1] = b[1].min(y);
            b[2] = b[2].max(x);
            b[3] = b[3].max(y);
        };
        for r in self.regions.values() {
            grow(r.footprint[0], r.footprint[1]);
            grow(r.footprint[2], r.footprint[3]);
        }
        for o in self.objects.values() {
            grow(o.x, o.y);
        }
        [b[0] - 1.0, b[1] - 1.0, b[2] + 1.0, b[3] + 1.0]
    }

    /// Apply one data message from the robot.
    pub fn apply_data(&mut self, d: &CqiData) -> Result<(), WorldError> {
        match d {
            CqiData::AtPose { x, y, theta } => {
                self.robot.x = *x;
                self.robot.y = *y;
                self.robot.theta = normalize_angle(*theta);
                if let Some(h) = &self.robot.holding {
                    let o = self.objects.get_mut(h).ok_or_else(|| WorldError::UnknownObject(h.clone()))?;
                    o.x = *x;
                    o.y = *y;
                }
            }
            CqiData::Holding { object } => {
                if object == NONE_LABEL {
                    if let Some(h) = self.robot.holding.take() {
                        let (x, y) = (self.robot.x, self.robot.y);
                        let level = self.level_at(x, y);
                        let o = self.objects.get_mut(&h).ok_or(WorldError::UnknownObject(h))?;
                        o.x = x;
                        o.y = y;
                        o.level = level;
                    }
                } else {
                    if !self.objects.contains_key(object) {
                        return Err(WorldError::UnknownObject(object.clone()));
                    }
                    if self.robot.holding.as_deref() == Some(object) {
                        return Ok(());
                    }
                    if self.robot.holding.is_some() {
                        self.apply_data(&CqiData::Holding {
                            object: NONE_LABEL.into(),
                        })?;
                    }
                    let (x, y, id) = (self.robot.x, self.robot.y, self.robot.id.clone());
                    let o = self.objects.get_mut(object).expect("checked above");
                    o.x = x;
                    o.y = y;
                    o.level = Level::Held(id);
                    self.robot.holding = Some(object.clone());
                }
            }
            CqiData::HasProperty { object, property, value } => {
                let o = self
                    .objects
                    .get_mut(object)
                    .ok_or_else(|| WorldError::UnknownObject(object.clone()))?;
                o.properties.insert(property.clone(), value.clone());
            }
        }
        Ok(())
    }

    /// Does `rel` hold between object `a` and the object or region `b`?
    pub fn relation_holds(&self, rel: &str, a: &str, b: &str) -> Result<bool, WorldError> {
        let place = self.place(b).ok_or_else(|| WorldError::UnknownPlace(b.to_string()))?;
        self.relation_holds_at(rel, a, &place)
    }

    pub fn relation_holds_at(&self, rel: &str, a: &str, b: &Place) -> Result<bool, WorldError> {
        let obj = self.objects.get(a).ok_or_else(|| WorldError::UnknownObject(a.to_string()))?;
        match b {
            Place::Region(name) => {
                let r = self
                    .regions
                    .get(name)
                    .ok_or_else(|| WorldError::UnknownPlace(name.clone()))?;
                let inside = r.contains(obj.x, obj.y);
                Ok(match rel {
                    "on" => obj.level == Level::Surface(name.clone()),
                    "under" => obj.level == Level::Floor && inside,
                    "in" | "at" | "with" => inside,
                    "left_of" => obj.x < r.center().0 - RELATION_MARGIN,
                    "right_of" => obj.x > r.center().0 + RELATION_MARGIN,
                    other => return Err(WorldError::UnknownRelation(other.to_string())),
                })
            }
            Place::Object(other_id) => {
                let other = self
                    .objects
                    .get(other_id)
                    .ok_or_else(|| WorldError::UnknownPlace(other_id.clone()))?;
                if other.id == obj.id {
                    return Ok(false);
                }
                let near = (obj.x - other.x).hypot(obj.y - other.y) <= RELATION_MARGIN;
                Ok(match rel {
                    "on" | "in" | "at" | "with" => near,
                    "under" => near && obj.level == Level::Floor && other.level != Level::Floor,
                    "left_of" => obj.x < other.x - RELATION_MARGIN,
                    "right_of" => obj.x > other.x + RELATION_MARGIN,
                    other => return Err(WorldError::UnknownRelation(other.to_string())),
                })
            }
        }
    }

    fn type_matches(&self, ty: &str, wanted: &str) -> bool {
        self.ontology.is_subtype(ty, wanted)
    }

    /// Places a landmark descriptor can denote. A definite landmark that
    /// denotes more than one place is an error.
    pub fn landmark_places(&self, arena: &[ReferentDescriptor], lm: RefId) -> Result<Vec<Place>, WorldError> {
        let places = self.places_matching(arena, lm)?;
        let d = &arena[lm.0];
        if d.determiner == Determiner::Definite && d.referent_id.is_none() && places.len() > 1 {
            return Err(WorldError::NestedAmbiguity(d.clone()));
        }
        Ok(places)
    }

    /// Regions and objects a descriptor can denote. Regions match by name
    /// and only when the descriptor adds no properties or relations.
    pub fn places_matching(&self, arena: &[ReferentDescriptor], d: RefId) -> Result<Vec<Place>, WorldError> {
        let desc = &arena[d.0];
        if let Some(id) = &desc.referent_id {
            return Ok(self.place(id).into_iter().collect());
        }
        if desc.determiner == Determiner::Speaker {
            return Ok(vec![Place::Region(self.speaker_region.clone())]);
        }
        let mut places = Vec::new();
        if desc.properties.is_empty() && desc.relations.is_empty() {
            for r in self.regions.keys() {
                let matches = if self.ontology.is_ontology_type(r) {
                    self.type_matches(r, &desc.onto_type)
                } else {
                    *r == desc.onto_type
                };
                if matches {
                    places.push(Place::Region(r.clone()));
                }
            }
        }
        places.extend(self.objects_matching(arena, d)?.into_iter().map(Place::Object));
        Ok(places)
    }

    /// Objects that fit a descriptor: right type, every stated property,
    /// and every relation to some place its landmark denotes. A grounded
    /// descriptor matches only its own object.
    pub fn objects_matching(&self, arena: &[ReferentDescriptor], d: RefId) -> Result<BTreeSet<String>, WorldError> {
        let desc = &arena[d.0];
        let mut landmarks = Vec::new();
        for (rel, lm) in &desc.relations {
            landmarks.push((rel.as_str(), self.landmark_places(arena, *lm)?));
        }
        let mut out = BTreeSet::new();
        'objects: for o in self.objects.values() {
            if desc.referent_id.as_ref().is_some_and(|id| *id != o.id) {
                continue;
            }
            if !self.type_matches(&o.onto_type, &desc.onto_type) {
                continue;
            }
            for (k, v) in &desc.properties {
                if o.properties.get(k) != Some(v) {
                    continue 'objects;
                }
            }
            for (rel, places) in &landmarks {
                let mut any = false;
                for p in places {
                    if self.relation_holds_at(rel, &o.id, p)? {
                        any = true;
                        break;
                    }
                }
                if !any {
                    continue 'objects;
                }
            }
            out.insert(o.id.clone());
        }
        Ok(out)
    }
}
