//! Meaning composition for chart edges.
//!
//! Each edge carries a [`SemSpec`] fragment rooted in the instance its
//! construction evokes. Combining children imports their fragments into a
//! fresh builder, instantiates the parent's meaning schema and applies the
//! construction's bindings by unification. Unification merges slots, so
//! co-indexed roles end up sharing a single [`SlotId`].
//!
//! Atoms unify to the more specific of two comparable ontology types;
//! incomparable atoms, atom/instance clashes and schema clashes fail. Role
//! type constraints are enforced on every slot a merge touches, specializing
//! an instance to the role's schema when the instance is more general.

use std::collections::BTreeMap;
use std::ops::Range;

use super::semspec::{atom_fits, Instance, InstanceId, SemSpec, SlotId, SlotValue};
use crate::grammar::{is_numeric_atom, BindingTarget, Construction, Grammar, MeaningPath, PathHead};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnifyFailure(pub String);

type UResult<T> = Result<T, UnifyFailure>;

fn fail<T>(msg: impl Into<String>) -> UResult<T> {
    Err(UnifyFailure(msg.into()))
}

#[derive(Debug, Clone)]
enum Target {
    Slot(SlotId),
    Inst(InstanceId),
    Atom(String),
}

struct Builder<'g> {
    g: &'g Grammar,
    instances: BTreeMap<InstanceId, Instance>,
    slots: BTreeMap<SlotId, SlotValue>,
    provenance: BTreeMap<InstanceId, Range<usize>>,
    forward: BTreeMap<InstanceId, InstanceId>,
    next_inst: u32,
    next_slot: u32,
    depth: usize,
}

const MAX_DEPTH: usize = 256;

impl<'g> Builder<'g> {
    fn new(g: &'g Grammar) -> Self {
        Self {
            g,
            instances: BTreeMap::new(),
            slots: BTreeMap::new(),
            provenance: BTreeMap::new(),
            forward: BTreeMap::new(),
            next_inst: 0,
            next_slot: 0,
            depth: 0,
        }
    }

    fn alloc_slot(&mut self, v: SlotValue) -> SlotId {
        let id = SlotId(self.next_slot);
        self.next_slot += 1;
        self.slots.insert(id, v);
        id
    }

    fn find(&self, mut id: InstanceId) -> InstanceId {
        while let Some(next) = self.forward.get(&id) {
            id = *next;
        }
        id
    }

    /// Copy a fragment in with fresh ids; returns the imported root.
    fn import(&mut self, ss: &SemSpec) -> InstanceId {
        let mut inst_map = BTreeMap::new();
        for id in ss.instances.keys() {
            inst_map.insert(*id, InstanceId(self.next_inst));
            self.next_inst += 1;
        }
        let mut slot_map = BTreeMap::new();
        for (id, v) in &ss.slots {
            let v = match v {
                SlotValue::Instance(i) => SlotValue::Instance(inst_map[i]),
                other => other.clone(),
            };
            slot_map.insert(*id, self.alloc_slot(v));
        }
        for (id, inst) in &ss.instances {
            let roles = inst
                .roles
                .iter()
                .map(|(r, s)| (r.clone(), slot_map[s]))
                .collect();
            self.instances.insert(
                inst_map[id],
                Instance {
                    schema: inst.schema.clone(),
                    roles,
                },
            );
        }
        for (id, span) in &ss.provenance {
            self.provenance.insert(inst_map[id], span.clone());
        }
        inst_map[&ss.root]
    }

    fn new_instance(&mut self, schema: &str, span: Range<usize>) -> UResult<InstanceId> {
        let Some(flat) = self.g.flat_schema(schema) else {
            return fail(format!("unknown schema {schema}"));
        };
        let role_names: Vec<String> = flat.roles.keys().cloned().collect();
        let id = InstanceId(self.next_inst);
        self.next_inst += 1;
        let mut roles = BTreeMap::new();
        for r in role_names {
            roles.insert(r, self.alloc_slot(SlotValue::Unfilled));
        }
        self.instances.insert(
            id,
            Instance {
                schema: schema.to_string(),
                roles,
            },
        );
        self.provenance.insert(id, span);
        self.apply_constraints(id)?;
        Ok(id)
    }

    fn enter(&mut self) -> UResult<()> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return fail("unification recursion limit");
        }
        Ok(())
    }

    fn apply_constraints(&mut self, id: InstanceId) -> UResult<()> {
        self.enter()?;
        let schema = self.instances[&self.find(id)].schema.clone();
        let constraints = self
            .g
            .flat_schema(&schema)
            .map(|f| f.constraints.clone())
            .unwrap_or_default();
        for (a, b) in constraints {
            let ta = self.resolve(self.find(id), &a)?;
            let tb = self.resolve(self.find(id), &b)?;
            self.unify(ta, tb)?;
        }
        self.depth -= 1;
        Ok(())
    }

    /// Walk a role path, instantiating unfilled schema-typed roles on the way.
    fn resolve(&mut self, base: InstanceId, roles: &[String]) -> UResult<Target> {
        let mut cur = self.find(base);
        for (i, role) in roles.iter().enumerate() {
            let inst = &self.instances[&cur];
            let Some(&slot) = inst.roles.get(role) else {
                return fail(format!("{} has no role {role}", inst.schema));
            };
            if i + 1 == roles.len() {
                return Ok(Target::Slot(slot));
            }
            cur = match self.slots[&slot].clone() {
                SlotValue::Instance(x) => self.find(x),
                SlotValue::Unfilled => {
                    let schema = inst.schema.clone();
                    let ty = match self.g.role_type(&schema, role) {
                        Some(t) if self.g.is_schema(t) => t.to_string(),
                        _ => return fail(format!("cannot traverse {schema}.{role}")),
                    };
                    let span = self.provenance[&cur].clone();
                    let x = self.new_instance(&ty, span)?;
                    self.bind_instance(slot, x)?;
                    self.find(x)
                }
                SlotValue::Atom(a) => return fail(format!("cannot traverse atom {a}")),
            };
        }
        Ok(Target::Inst(cur))
    }

    fn unify(&mut self, a: Target, b: Target) -> UResult<()> {
        match (a, b) {
            (Target::Slot(s), Target::Slot(t)) => self.merge_slots(s, t),
            (Target::Slot(s), Target::Inst(x)) | (Target::Inst(x), Target::Slot(s)) => {
                self.bind_instance(s, x)
            }
            (Target::Slot(s), Target::Atom(a)) | (Target::Atom(a), Target::Slot(s)) => {
                self.bind_atom(s, &a)
            }
            (Target::Inst(x), Target::Inst(y)) => self.merge_instances(x, y).map(|_| ()),
            _ => fail("cannot unify an instance with an atom"),
        }
    }

    fn owner(&self, x: InstanceId) -> Option<SlotId> {
        self.slots
            .iter()
            .find(|(_, v)| **v == SlotValue::Instance(x))
            .map(|(s, _)| *s)
    }

    fn bind_instance(&mut self, s: SlotId, x: InstanceId) -> UResult<()> {
        let x = self.find(x);
        if let Some(o) = self.owner(x) {
            return self.merge_slots(s, o);
        }
        match self.slots[&s].clone() {
            SlotValue::Unfilled => {
                self.slots.insert(s, SlotValue::Instance(x));
            }
            SlotValue::Instance(y) => {
                self.merge_instances(y, x)?;
            }
            SlotValue::Atom(a) => return fail(format!("slot holds atom {a}, not an instance")),
        }
        self.enforce(s)
    }

    fn bind_atom(&mut self, s: SlotId, atom: &str) -> UResult<()> {
        let merged = match &self.slots[&s] {
            SlotValue::Unfilled => atom.to_string(),
            SlotValue::Atom(b) => self.meet_atoms(atom, b)?,
            SlotValue::Instance(_) => return fail(format!("slot holds an instance, not {atom}")),
        };
        self.slots.insert(s, SlotValue::Atom(merged));
        self.enforce(s)
    }

    fn meet_atoms(&self, a: &str, b: &str) -> UResult<String> {
        if a == b {
            return Ok(a.to_string());
        }
        if is_numeric_atom(a) && is_numeric_atom(b) {
            let (x, y): (f64, f64) = (a.parse().unwrap(), b.parse().unwrap());
            return if x == y { Ok(a.to_string()) } else { fail(format!("{a} conflicts with {b}")) };
        }
        match self.g.meet(a, b) {
            Some(m) if self.g.is_ontology_type(m) => Ok(m.to_string()),
            _ => fail(format!("{a} conflicts with {b}")),
        }
    }

    fn merge_slots(&mut self, s: SlotId, t: SlotId) -> UResult<()> {
        if s == t {
            return Ok(());
        }
        self.enter()?;
        let vs = self.slots.remove(&s).expect("live slot");
        for inst in self.instances.values_mut() {
            for slot in inst.roles.values_mut() {
                if *slot == s {
                    *slot = t;
                }
            }
        }
        let vt = self.slots[&t].clone();
        match (vs, vt) {
            (SlotValue::Unfilled, _) => {}
            (v, SlotValue::Unfilled) => {
                self.slots.insert(t, v);
            }
            (SlotValue::Atom(a), SlotValue::Atom(b)) => {
                let m = self.meet_atoms(&a, &b)?;
                self.slots.insert(t, SlotValue::Atom(m));
            }
            (SlotValue::Instance(x), SlotValue::Instance(y)) => {
                self.merge_instances(y, x)?;
            }
            _ => return fail("cannot unify an instance with an atom"),
        }
        self.enforce(t)?;
        self.depth -= 1;
        Ok(())
    }

    /// Merge `b` into `a`; returns the surviving instance.
    fn merge_instances(&mut self, a: InstanceId, b: InstanceId) -> UResult<InstanceId> {
        let (a, b) = (self.find(a), self.find(b));
        if a == b {
            return Ok(a);
        }
        self.enter()?;
        let sa = self.instances[&a].schema.clone();
        let sb = self.instances[&b].schema.clone();
        let Some(schema) = self.g.meet(&sa, &sb).map(str::to_string) else {
            return fail(format!("{sa} does not unify with {sb}"));
        };
        let removed = self.instances.remove(&b).expect("live instance");
        self.forward.insert(b, a);
        if let Some(pb) = self.provenance.remove(&b) {
            let pa = self.provenance.entry(a).or_insert(pb.clone());
            *pa = pa.start.min(pb.start)..pa.end.max(pb.end);
        }
        self.instances.get_mut(&a).unwrap().schema = schema.clone();
        // Re-point references to b; if a was already owned, the two owners
        // become one slot.
        let holders: Vec<SlotId> = self
            .slots
            .iter()
            .filter(|(_, v)| **v == SlotValue::Instance(b))
            .map(|(s, _)| *s)
            .collect();
        for s in holders {
            self.slots.insert(s, SlotValue::Instance(a));
        }
        let owners: Vec<SlotId> = self
            .slots
            .iter()
            .filter(|(_, v)| **v == SlotValue::Instance(a))
            .map(|(s, _)| *s)
            .collect();
        if owners.len() > 1 {
            for s in &owners[1..] {
                self.merge_slots(*s, owners[0])?;
            }
        }
        for (role, slot_b) in removed.roles {
            let a_now = self.find(a);
            let existing = self.instances[&a_now].roles.get(&role).copied();
            match existing {
                Some(slot_a) => self.merge_slots(slot_b, slot_a)?,
                None => {
                    self.instances.get_mut(&a_now).unwrap().roles.insert(role, slot_b);
                }
            }
        }
        self.fill_roles(self.find(a))?;
        self.depth -= 1;
        Ok(self.find(a))
    }

    /// Give an instance every role its (possibly specialized) schema has,
    /// then re-apply constraints and role types.
    fn fill_roles(&mut self, id: InstanceId) -> UResult<()> {
        let schema = self.instances[&id].schema.clone();
        let roles: Vec<String> = self
            .g
            .flat_schema(&schema)
            .map(|f| f.roles.keys().cloned().collect())
            .unwrap_or_default();
        for r in roles {
            if !self.instances[&id].roles.contains_key(&r) {
                let s = self.alloc_slot(SlotValue::Unfilled);
                self.instances.get_mut(&id).unwrap().roles.insert(r, s);
            }
        }
        self.apply_constraints(id)?;
        let id = self.find(id);
        let slots: Vec<SlotId> = self.instances[&id].roles.values().copied().collect();
        for s in slots {
            if self.slots.contains_key(&s) {
                self.enforce(s)?;
            }
        }
        Ok(())
    }

    /// Check a slot's value against every role that points at it.
    fn enforce(&mut self, slot: SlotId) -> UResult<()> {
        let users: Vec<(String, String)> = self
            .instances
            .values()
            .flat_map(|i| {
                i.roles
                    .iter()
                    .filter(|(_, s)| **s == slot)
                    .map(|(r, _)| (i.schema.clone(), r.clone()))
            })
            .collect();
        for (schema, role) in users {
            let Some(ty) = self.g.role_type(&schema, &role).map(str::to_string) else {
                return fail(format!("{schema} has no role {role}"));
            };
            let Some(value) = self.slots.get(&slot).cloned() else {
                return Ok(());
            };
            match value {
                SlotValue::Unfilled => {}
                SlotValue::Atom(a) => {
                    if self.g.is_schema(&ty) || !atom_fits(self.g, &a, &ty) {
                        return fail(format!("{a} does not fit {schema}.{role}: {ty}"));
                    }
                }
                SlotValue::Instance(x) => {
                    let x = self.find(x);
                    let xs = self.instances[&x].schema.clone();
                    if self.g.is_subtype(&xs, &ty) {
                        continue;
                    }
                    if self.g.is_subtype(&ty, &xs) {
                        self.enter()?;
                        self.instances.get_mut(&x).unwrap().schema = ty.clone();
                        self.fill_roles(x)?;
                        self.depth -= 1;
                    } else {
                        return fail(format!("{xs} does not fit {schema}.{role}: {ty}"));
                    }
                }
            }
        }
        Ok(())
    }

    /// Compact ids in breadth-first order from the root and drop garbage.
    fn finish(self, root: InstanceId) -> SemSpec {
        let root = self.find(root);
        let mut ss = SemSpec {
            instances: self.instances,
            slots: self.slots,
            root,
            provenance: self.provenance,
        };
        ss.collect_garbage();
        renumber(&ss)
    }
}

/// Renumber instances and slots in a canonical traversal order.
pub(crate) fn renumber(ss: &SemSpec) -> SemSpec {
    let order = ss.reachable();
    let inst_map: BTreeMap<InstanceId, InstanceId> = order
        .iter()
        .enumerate()
        .map(|(i, id)| (*id, InstanceId(i as u32)))
        .collect();
    let mut slot_map: BTreeMap<SlotId, SlotId> = BTreeMap::new();
    for id in &order {
        for s in ss.instances[id].roles.values() {
            let next = SlotId(slot_map.len() as u32);
            slot_map.entry(*s).or_insert(next);
        }
    }
    let mut out = SemSpec {
        instances: BTreeMap::new(),
        slots: BTreeMap::new(),
        root: inst_map[&ss.root],
        provenance: BTreeMap::new(),
    };
    for (old, new) in &inst_map {
        let inst = &ss.instances[old];
        out.instances.insert(
            *new,
            Instance {
                schema: inst.schema.clone(),
                roles: inst.roles.iter().map(|(r, s)| (r.clone(), slot_map[s])).collect(),
            },
        );
        if let Some(p) = ss.provenance.get(old) {
            out.provenance.insert(*new, p.clone());
        }
    }
    for (old, new) in &slot_map {
        let v = match &ss.slots[old] {
            SlotValue::Instance(i) => SlotValue::Instance(inst_map[i]),
            other => other.clone(),
        };
        out.slots.insert(*new, v);
    }
    out
}

/// Build the meaning of one construction application.
///
/// `children` pairs each present constituent label with the fragment of
/// the edge filling it; absent optional constituents are simply left out
/// and bindings that mention them are skipped.
pub fn compose(
    g: &Grammar,
    cxn: &Construction,
    span: Range<usize>,
    children: &[(&str, &SemSpec)],
) -> Result<SemSpec, UnifyFailure> {
    let mut b = Builder::new(g);
    let mut labels = BTreeMap::new();
    for (label, frag) in children {
        let root = b.import(frag);
        labels.insert(label.to_string(), root);
    }
    let me = b.new_instance(&cxn.meaning, span)?;
    let present = |p: &MeaningPath| match &p.head {
        PathHead::SelfRef => true,
        PathHead::Label(l) => labels.contains_key(l),
    };
    for binding in &cxn.bindings {
        if !present(&binding.left) {
            continue;
        }
        if let BindingTarget::Path(p) = &binding.right {
            if !present(p) {
                continue;
            }
        }
        let base = |p: &MeaningPath| match &p.head {
            PathHead::SelfRef => me,
            PathHead::Label(l) => labels[l],
        };
        let left = b.resolve(base(&binding.left), &binding.left.roles)?;
        let right = match &binding.right {
            BindingTarget::Path(p) => b.resolve(base(p), &p.roles)?,
            BindingTarget::Atom(a) => Target::Atom(a.clone()),
        };
        b.unify(left, right)?;
    }
    Ok(b.finish(me))
}
