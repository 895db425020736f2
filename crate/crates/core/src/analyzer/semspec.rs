use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::{self, Write as _};
use std::ops::Range;

use crate::grammar::{is_numeric_atom, Grammar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct InstanceId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SlotId(pub u32);

impl fmt::Display for SlotId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SlotValue {
    Unfilled,
    /// Ontology type name or number.
    Atom(String),
    Instance(InstanceId),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    pub schema: String,
    pub roles: BTreeMap<String, SlotId>,
}

/// A semantic specification: schema instances whose roles point into a
/// shared slot table. Two roles are co-indexed exactly when they hold the
/// same [`SlotId`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SemSpec {
    pub instances: BTreeMap<InstanceId, Instance>,
    pub slots: BTreeMap<SlotId, SlotValue>,
    pub root: InstanceId,
    /// Token span each instance was built from.
    pub provenance: BTreeMap<InstanceId, Range<usize>>,
}

impl SemSpec {
    pub fn instance(&self, id: InstanceId) -> &Instance {
        &self.instances[&id]
    }

    pub fn root_instance(&self) -> &Instance {
        self.instance(self.root)
    }

    pub fn slot(&self, id: SlotId) -> &SlotValue {
        &self.slots[&id]
    }

    /// Slot id of a role of an instance.
    pub fn role_slot(&self, inst: InstanceId, role: &str) -> Option<SlotId> {
        self.instances.get(&inst)?.roles.get(role).copied()
    }

    /// Follow a dotted path of roles from an instance to a slot.
    pub fn path_slot(&self, inst: InstanceId, path: &[&str]) -> Option<SlotId> {
        let (last, init) = path.split_last()?;
        let mut cur = inst;
        for role in init {
            cur = self.role_instance(cur, role)?;
        }
        self.role_slot(cur, last)
    }

    /// Instance held by a role, if the role holds one.
    pub fn role_instance(&self, inst: InstanceId, role: &str) -> Option<InstanceId> {
        match self.slots.get(&self.role_slot(inst, role)?)? {
            SlotValue::Instance(i) => Some(*i),
            _ => None,
        }
    }

    /// Atom held by a role, if any.
    pub fn role_atom(&self, inst: InstanceId, role: &str) -> Option<&str> {
        match self.slots.get(&self.role_slot(inst, role)?)? {
            SlotValue::Atom(a) => Some(a),
            _ => None,
        }
    }

    /// The slot holding a given instance, if some role refers to it.
    pub fn owner_slot(&self, inst: InstanceId) -> Option<SlotId> {
        self.slots
            .iter()
            .find(|(_, v)| **v == SlotValue::Instance(inst))
            .map(|(s, _)| *s)
    }

    /// All instances of a schema (or of its subcases).
    pub fn instances_of<'a>(&'a self, g: &'a Grammar, schema: &'a str) -> impl Iterator<Item = InstanceId> + 'a {
        self.instances
            .iter()
            .filter(move |(_, i)| g.is_subtype(&i.schema, schema))
            .map(|(id, _)| *id)
    }

    pub fn unfilled_count(&self) -> usize {
        self.slots
            .values()
            .filter(|v| **v == SlotValue::Unfilled)
            .count()
    }

    /// Instances reachable from the root, in breadth-first order.
    pub fn reachable(&self) -> Vec<InstanceId> {
        let mut seen = BTreeSet::new();
        let mut order = Vec::new();
        let mut queue = VecDeque::from([self.root]);
        while let Some(id) = queue.pop_front() {
            if !seen.insert(id) {
                continue;
            }
            order.push(id);
            if let Some(inst) = self.instances.get(&id) {
                for slot in inst.roles.values() {
                    if let Some(SlotValue::Instance(next)) = self.slots.get(slot) {
                        queue.push_back(*next);
                    }
                }
            }
        }
        order
    }

    /// Drop instances unreachable from the root and slots no role refers to.
    pub fn collect_garbage(&mut self) {
        let live: BTreeSet<_> = self.reachable().into_iter().collect();
        self.instances.retain(|id, _| live.contains(id));
        self.provenance.retain(|id, _| live.contains(id));
        let used: BTreeSet<SlotId> = self
            .instances
            .values()
            .flat_map(|i| i.roles.values().copied())
            .collect();
        self.slots.retain(|s, _| used.contains(s));
    }

    /// Deterministic indented rendering, depth-first from the root, with
    /// slot ids renumbered `#0, #1, ...` in first-encounter order.
    pub fn canonical_text(&self) -> String {
        let mut numbering: BTreeMap<SlotId, usize> = BTreeMap::new();
        let mut printed: BTreeSet<InstanceId> = BTreeSet::new();
        let mut out = String::new();
        self.render(self.root, 0, &mut numbering, &mut printed, &mut out);
        out
    }

    fn render(
        &self,
        id: InstanceId,
        depth: usize,
        numbering: &mut BTreeMap<SlotId, usize>,
        printed: &mut BTreeSet<InstanceId>,
        out: &mut String,
    ) {
        let inst = &self.instances[&id];
        if depth == 0 {
            let _ = writeln!(out, "{}", inst.schema);
        }
        printed.insert(id);
        for (role, slot) in &inst.roles {
            let next = numbering.len();
            let n = *numbering.entry(*slot).or_insert(next);
            let indent = "  ".repeat(depth + 1);
            match &self.slots[slot] {
                SlotValue::Unfilled => {
                    let _ = writeln!(out, "{indent}{role}: #{n} _");
                }
                SlotValue::Atom(a) => {
                    let _ = writeln!(out, "{indent}{role}: #{n} = {a}");
                }
                SlotValue::Instance(child) => {
                    let schema = &self.instances[child].schema;
                    if printed.contains(child) {
                        let _ = writeln!(out, "{indent}{role}: #{n} -> {schema} ^");
                    } else {
                        let _ = writeln!(out, "{indent}{role}: #{n} -> {schema}");
                        self.render(*child, depth + 1, numbering, printed, out);
                    }
                }
            }
        }
    }

    /// Check the structural invariants against a grammar, returning every
    /// violation found.
    pub fn validate(&self, g: &Grammar) -> Result<(), Vec<String>> {
        let mut errs = Vec::new();
        if !self.instances.contains_key(&self.root) {
            errs.push("root instance missing".to_string());
            return Err(errs);
        }
        for (id, inst) in &self.instances {
            let Some(flat) = g.flat_schema(&inst.schema) else {
                errs.push(format!("instance {} has unknown schema {}", id.0, inst.schema));
                continue;
            };
            for (role, slot) in &inst.roles {
                let Some(ty) = flat.roles.get(role) else {
                    errs.push(format!("{} has no role {role}", inst.schema));
                    continue;
                };
                match self.slots.get(slot) {
                    None => errs.push(format!("{}.{role} points at missing slot {}", inst.schema, slot)),
                    Some(SlotValue::Unfilled) => {}
                    Some(SlotValue::Atom(a)) => {
                        if !atom_fits(g, a, ty) {
                            errs.push(format!("{}.{role} = {a} violates type {ty}", inst.schema));
                        }
                    }
                    Some(SlotValue::Instance(child)) => match self.instances.get(child) {
                        None => errs.push(format!("{}.{role} refers to missing instance", inst.schema)),
                        Some(c) => {
                            if !g.is_subtype(&c.schema, ty) {
                                errs.push(format!("{}.{role} holds {} which is not a {ty}", inst.schema, c.schema));
                            }
                        }
                    },
                }
            }
            for (a, b) in &flat.constraints {
                let pa: Vec<&str> = a.iter().map(String::as_str).collect();
                let pb: Vec<&str> = b.iter().map(String::as_str).collect();
                if let (Some(sa), Some(sb)) = (self.path_slot(*id, &pa), self.path_slot(*id, &pb)) {
                    if sa != sb {
                        errs.push(format!(
                            "{}: {} and {} are not co-indexed",
                            inst.schema,
                            a.join("."),
                            b.join(".")
                        ));
                    }
                }
            }
        }
        let mut owners: BTreeMap<InstanceId, SlotId> = BTreeMap::new();
        for (slot, v) in &self.slots {
            if let SlotValue::Instance(i) = v {
                if let Some(prev) = owners.insert(*i, *slot) {
                    errs.push(format!("instance {} held by two slots {prev} and {slot}", i.0));
                }
            }
        }
        let reachable: BTreeSet<_> = self.reachable().into_iter().collect();
        if reachable.len() != self.instances.len() {
            errs.push("some instances are unreachable from the root".into());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(errs)
        }
    }
}

/// Numbers are typed as the ontology's `amount`.
pub(crate) fn atom_fits(g: &Grammar, atom: &str, ty: &str) -> bool {
    if is_numeric_atom(atom) {
        g.is_subtype("amount", ty) || g.ontology_top() == Some(ty)
    } else {
        g.is_subtype(atom, ty)
    }
}
