//! Brute-force referent filtering over randomized worlds, compared with
//! the situation model's matcher.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use congra_core::grammar::Grammar;
use congra_core::specializer::{Determiner, RefId, ReferentDescriptor};
use congra_core::world::{Level, Region, RobotState, SituationModel, WorldError, WorldFile, WorldObject};
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

use super::Report;

const REGION_NAMES: [&str; 6] = ["table", "counter", "kitchen_counter", "fridge", "dining_table", "user"];
const OBJECT_TYPES: [&str; 3] = ["marker", "soda_can", "cup"];
const QUERY_TYPES: [&str; 10] = [
    "entity",
    "furniture",
    "physical_object",
    "container",
    "marker",
    "soda_can",
    "cup",
    "table",
    "fridge",
    "counter",
];
const RELATIONS: [&str; 7] = ["on", "under", "in", "at", "with", "left_of", "right_of"];
const COLORS: [&str; 3] = ["red", "blue", "green"];
const SIZES: [&str; 2] = ["big", "small"];
const MARGIN: f64 = 0.05;

/// Subsumption by walking parent links directly.
fn isa(g: &Grammar, child: &str, parent: &str) -> bool {
    let mut cur = Some(child.to_string());
    while let Some(c) = cur {
        if c == parent {
            return true;
        }
        cur = g.ontology.get(&c).and_then(|t| t.parent.clone());
    }
    false
}

fn grid(rng: &mut StdRng, lo: f64, hi: f64) -> f64 {
    let steps = ((hi - lo) / 0.5) as i64;
    lo + 0.5 * rng.gen_range(0..=steps) as f64
}

pub fn random_world(rng: &mut StdRng, g: &Arc<Grammar>) -> SituationModel {
    let mut names: Vec<&str> = REGION_NAMES.to_vec();
    names.shuffle(rng);
    let count = rng.gen_range(1..=names.len());
    let mut regions = Vec::new();
    for name in &names[..count] {
        let x0 = grid(rng, 0.0, 4.0);
        let y0 = grid(rng, 0.0, 4.0);
        let w = grid(rng, 0.5, 2.5);
        let h = grid(rng, 0.5, 2.5);
        let surface_height = if rng.gen_bool(0.6) { grid(rng, 0.5, 1.0) } else { 0.0 };
        regions.push(Region {
            name: name.to_string(),
            footprint: [x0, y0, x0 + w, y0 + h],
            surface_height,
        });
    }
    let robot = RobotState {
        id: "pr2".into(),
        x: grid(rng, 0.0, 6.0),
        y: grid(rng, 0.0, 6.0),
        theta: 0.0,
        holding: None,
    };
    let mut objects = Vec::new();
    for i in 0..rng.gen_range(2..10) {
        let x = grid(rng, 0.0, 6.0);
        let y = grid(rng, 0.0, 6.0);
        let containing: Vec<&Region> = regions.iter().filter(|r| r.contains(x, y)).collect();
        let level = match containing.choose(rng) {
            Some(r) if rng.gen_bool(0.5) => Level::Surface(r.name.clone()),
            _ => Level::Floor,
        };
        let mut properties = BTreeMap::new();
        if rng.gen_bool(0.8) {
            properties.insert("color".to_string(), COLORS.choose(rng).unwrap().to_string());
        }
        if rng.gen_bool(0.6) {
            properties.insert("size".to_string(), SIZES.choose(rng).unwrap().to_string());
        }
        objects.push(WorldObject {
            id: format!("obj_{i}"),
            onto_type: OBJECT_TYPES.choose(rng).unwrap().to_string(),
            properties,
            x,
            y,
            level,
        });
    }
    let mut robot = robot;
    if !objects.is_empty() && rng.gen_bool(0.2) {
        let o = &mut objects[0];
        o.x = robot.x;
        o.y = robot.y;
        o.level = Level::Held(robot.id.clone());
        robot.holding = Some(o.id.clone());
    }
    let speaker_region = regions.choose(rng).unwrap().name.clone();
    SituationModel::from_file(
        WorldFile {
            regions,
            objects,
            robot,
            speaker_region,
        },
        g.clone(),
    )
    .expect("generated world is valid")
}

fn random_descriptor(rng: &mut StdRng, m: &SituationModel, arena: &mut Vec<ReferentDescriptor>, depth: usize) -> RefId {
    let determiner = match rng.gen_range(0..10) {
        0..=5 => Determiner::Definite,
        6..=8 => Determiner::Indefinite,
        _ if depth > 0 => Determiner::Speaker,
        _ => Determiner::Definite,
    };
    let pool: &[&str] = if rng.gen_bool(0.5) { &OBJECT_TYPES } else { &QUERY_TYPES };
    let mut d = ReferentDescriptor::new(pool.choose(rng).unwrap().to_string(), determiner);
    if rng.gen_bool(0.3) {
        d.properties.insert("color".into(), COLORS.choose(rng).unwrap().to_string());
    }
    if rng.gen_bool(0.15) {
        d.properties.insert("size".into(), SIZES.choose(rng).unwrap().to_string());
    }
    if rng.gen_bool(0.1) {
        let ids: Vec<String> = m.objects.keys().chain(m.regions.keys()).cloned().collect();
        d.referent_id = ids.choose(rng).cloned().or(Some("nowhere".into()));
    }
    let relation_count = match rng.gen_range(0..20) {
        _ if depth >= 2 => 0,
        0..=9 => 0,
        10..=16 => 1,
        _ => 2,
    };
    let mut relations = Vec::new();
    for _ in 0..relation_count {
        let lm = random_descriptor(rng, m, arena, depth + 1);
        relations.push((RELATIONS.choose(rng).unwrap().to_string(), lm));
    }
    d.relations = relations;
    arena.push(d);
    RefId(arena.len() - 1)
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum Target {
    Region(String),
    Object(String),
}

struct Brute<'a> {
    g: &'a Grammar,
    m: &'a SituationModel,
    arena: &'a [ReferentDescriptor],
}

/// `None` signals a definite landmark that denotes several places.
impl Brute<'_> {
    fn holds(&self, rel: &str, a: &str, b: &Target) -> bool {
        let o = &self.m.objects[a];
        match b {
            Target::Region(name) => {
                let r = &self.m.regions[name];
                let [x0, y0, x1, y1] = r.footprint;
                let inside = x0 <= o.x && o.x <= x1 && y0 <= o.y && o.y <= y1;
                let cx = (x0 + x1) / 2.0;
                match rel {
                    "on" => o.level == Level::Surface(name.clone()),
                    "under" => o.level == Level::Floor && inside,
                    "in" | "at" | "with" => inside,
                    "left_of" => o.x < cx - MARGIN,
                    "right_of" => o.x > cx + MARGIN,
                    _ => unreachable!(),
                }
            }
            Target::Object(other) => {
                if other == a {
                    return false;
                }
                let p = &self.m.objects[other];
                let near = ((o.x - p.x).powi(2) + (o.y - p.y).powi(2)).sqrt() <= MARGIN;
                match rel {
                    "on" | "in" | "at" | "with" => near,
                    "under" => near && o.level == Level::Floor && p.level != Level::Floor,
                    "left_of" => o.x < p.x - MARGIN,
                    "right_of" => o.x > p.x + MARGIN,
                    _ => unreachable!(),
                }
            }
        }
    }

    fn places(&self, id: RefId) -> Option<Vec<Target>> {
        let d = &self.arena[id.0];
        if let Some(r) = &d.referent_id {
            return Some(if self.m.regions.contains_key(r) {
                vec![Target::Region(r.clone())]
            } else if self.m.objects.contains_key(r) {
                vec![Target::Object(r.clone())]
            } else {
                vec![]
            });
        }
        if d.determiner == Determiner::Speaker {
            return Some(vec![Target::Region(self.m.speaker_region.clone())]);
        }
        let mut out = Vec::new();
        if d.properties.is_empty() && d.relations.is_empty() {
            for name in self.m.regions.keys() {
                let fits = if self.g.ontology.contains_key(name) {
                    isa(self.g, name, &d.onto_type)
                } else {
                    *name == d.onto_type
                };
                if fits {
                    out.push(Target::Region(name.clone()));
                }
            }
        }
        out.extend(self.objects(id)?.into_iter().map(Target::Object));
        Some(out)
    }

    fn objects(&self, id: RefId) -> Option<BTreeSet<String>> {
        let d = &self.arena[id.0];
        let mut landmarks = Vec::new();
        for (rel, lm) in &d.relations {
            let places = self.places(*lm)?;
            let l = &self.arena[lm.0];
            if l.determiner == Determiner::Definite && l.referent_id.is_none() && places.len() > 1 {
                return None;
            }
            landmarks.push((rel.clone(), places));
        }
        let mut out = BTreeSet::new();
        for o in self.m.objects.values() {
            let ok = d.referent_id.as_ref().is_none_or(|r| *r == o.id)
                && isa(self.g, &o.onto_type, &d.onto_type)
                && d.properties.iter().all(|(k, v)| o.properties.get(k) == Some(v))
                && landmarks
                    .iter()
                    .all(|(rel, places)| places.iter().any(|p| self.holds(rel, &o.id, p)));
            if ok {
                out.insert(o.id.clone());
            }
        }
        Some(out)
    }
}

pub fn check_objects_matching(g: &Arc<Grammar>, cases: usize, seed: u64) -> Report {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut report = Report::default();
    let mut non_empty = 0;
    let mut ambiguous = 0;
    for case in 0..cases {
        report.cases += 1;
        let m = random_world(&mut rng, g);
        let mut arena = Vec::new();
        let d = random_descriptor(&mut rng, &m, &mut arena, 0);
        let expected = Brute { g, m: &m, arena: &arena }.objects(d);
        let got = m.objects_matching(&arena, d);
        match (&expected, &got) {
            (Some(want), Ok(have)) if want == have => non_empty += usize::from(!want.is_empty()),
            (None, Err(WorldError::NestedAmbiguity(_))) => ambiguous += 1,
            _ => report
                .mismatches
                .push(format!("case {case}: oracle {expected:?}, matcher {got:?}")),
        }
    }
    if non_empty * 4 < cases || ambiguous * 20 < cases {
        report.mismatches.push(format!(
            "generator too sparse: {non_empty} of {cases} cases matched something, {ambiguous} were ambiguous"
        ));
    }
    report
}
