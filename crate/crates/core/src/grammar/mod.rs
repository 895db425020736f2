//! Construction-grammar formalism: schemas, constructions and the ontology
//! lattice, plus the text DSL they are written in.
//!
//! A [`Grammar`] is built by [`load_grammar`] from one or more DSL sources.
//! Sources merge additively: a later source may add subcases of earlier
//! definitions but may never redefine a name. After loading, the grammar is
//! immutable and can be shared freely across analysis sessions.

mod dsl;
mod validate;

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::path::Path as FsPath;

pub use validate::{validate_grammar, Diagnostic, Severity};

/// Where a definition was written.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Location {
    pub source: String,
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.source, self.line, self.column)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum GrammarError {
    #[error("{location}: syntax error: {message}")]
    Syntax { location: Location, message: String },
    #[error("duplicate definition of {name}: first at {first}, again at {second}")]
    Duplicate {
        name: String,
        first: Location,
        second: Location,
    },
    #[error("no root construction")]
    NoRoot,
    #[error("invalid grammar:\n{}", format_diagnostics(.0))]
    Invalid(Vec<Diagnostic>),
    #[error("unknown name {0}")]
    UnknownName(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn format_diagnostics(diags: &[Diagnostic]) -> String {
    diags
        .iter()
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join("\n")
}

/// One named grammar text.
#[derive(Debug, Clone)]
pub struct GrammarSource {
    pub name: String,
    pub text: String,
}

impl GrammarSource {
    pub fn new(name: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            text: text.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoleDecl {
    pub name: String,
    /// Schema or ontology type name.
    pub ty: String,
}

/// A dotted role path inside a schema, e.g. `spg.trajector`.
pub type RolePath = Vec<String>;

#[derive(Debug, Clone, PartialEq)]
pub struct Schema {
    pub name: String,
    pub parents: Vec<String>,
    pub roles: Vec<RoleDecl>,
    pub constraints: Vec<(RolePath, RolePath)>,
    pub location: Location,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PathHead {
    SelfRef,
    Label(String),
}

/// A meaning path of a construction: `self.goal` or `np.category` or `vp`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MeaningPath {
    pub head: PathHead,
    pub roles: Vec<String>,
}

impl fmt::Display for MeaningPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.head {
            PathHead::SelfRef => f.write_str("self")?,
            PathHead::Label(l) => f.write_str(l)?,
        }
        for r in &self.roles {
            write!(f, ".{r}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BindingTarget {
    Path(MeaningPath),
    /// An ontology type name or a number.
    Atom(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Binding {
    pub left: MeaningPath,
    pub right: BindingTarget,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FormRelation {
    /// Immediately adjacent.
    Meets,
    /// Precedes, possibly with material in between.
    Before,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FormConstraint {
    pub left: String,
    pub relation: FormRelation,
    pub right: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constituent {
    pub label: String,
    pub ty: String,
    pub optional: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConstructionKind {
    Lexical { token: String },
    Phrasal {
        constituents: Vec<Constituent>,
        form: Vec<FormConstraint>,
    },
    /// A category with neither token nor constituents; only its subcases
    /// ever appear in an analysis.
    Abstract,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Construction {
    pub name: String,
    pub parents: Vec<String>,
    pub kind: ConstructionKind,
    pub meaning: String,
    pub bindings: Vec<Binding>,
    pub location: Location,
}

impl Construction {
    pub fn constituents(&self) -> &[Constituent] {
        match &self.kind {
            ConstructionKind::Phrasal { constituents, .. } => constituents,
            _ => &[],
        }
    }

    pub fn constituent(&self, label: &str) -> Option<&Constituent> {
        self.constituents().iter().find(|c| c.label == label)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OntologyType {
    pub name: String,
    pub parent: Option<String>,
    pub location: Location,
}

/// Flattened view of a schema with inherited roles and constraints merged.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FlatSchema {
    pub roles: BTreeMap<String, String>,
    pub constraints: Vec<(RolePath, RolePath)>,
}

#[derive(Debug, Clone, Default)]
pub struct Grammar {
    pub schemas: BTreeMap<String, Schema>,
    pub constructions: BTreeMap<String, Construction>,
    pub ontology: BTreeMap<String, OntologyType>,
    pub roots: BTreeSet<String>,
    pub(crate) root_locations: Vec<(String, Location)>,
    flat: BTreeMap<String, FlatSchema>,
    ancestors: BTreeMap<String, BTreeSet<String>>,
}

/// The three independent lattices a name can live in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lattice {
    Schema,
    Construction,
    Ontology,
}

impl PartialEq for Grammar {
    fn eq(&self, other: &Self) -> bool {
        self.schemas == other.schemas
            && self.constructions == other.constructions
            && self.ontology == other.ontology
            && self.roots == other.roots
    }
}

/// Parse, merge and validate grammar sources.
pub fn load_grammar(sources: &[GrammarSource]) -> Result<Grammar, GrammarError> {
    let grammar = parse_sources(sources)?;
    if grammar.roots.is_empty() {
        return Err(GrammarError::NoRoot);
    }
    let errors: Vec<_> = validate_grammar(&grammar)
        .into_iter()
        .filter(|d| d.severity == Severity::Error)
        .collect();
    if !errors.is_empty() {
        return Err(GrammarError::Invalid(errors));
    }
    Ok(grammar)
}

/// Load every `*.cg` file in a directory, in file-name order.
pub fn load_grammar_dir(dir: impl AsRef<FsPath>) -> Result<Grammar, GrammarError> {
    let dir = dir.as_ref();
    let io_err = |source| GrammarError::Io {
        path: dir.display().to_string(),
        source,
    };
    let mut paths: Vec<_> = std::fs::read_dir(dir)
        .map_err(io_err)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "cg"))
        .collect();
    paths.sort();
    // core.cg must come first so domain grammars can extend it.
    paths.sort_by_key(|p| p.file_name().is_none_or(|n| n != "core.cg"));
    let mut sources = Vec::new();
    for p in paths {
        let text = std::fs::read_to_string(&p).map_err(|source| GrammarError::Io {
            path: p.display().to_string(),
            source,
        })?;
        let name = p
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        sources.push(GrammarSource::new(name, text));
    }
    load_grammar(&sources)
}

/// Parse and merge sources without semantic validation.
pub fn parse_sources(sources: &[GrammarSource]) -> Result<Grammar, GrammarError> {
    let mut g = Grammar::default();
    let mut seen: BTreeMap<String, Location> = BTreeMap::new();
    for src in sources {
        for def in dsl::parse(&src.name, &src.text)? {
            let (name, loc) = match &def {
                dsl::Def::Schema(s) => (s.name.clone(), s.location.clone()),
                dsl::Def::Construction(c) => (c.name.clone(), c.location.clone()),
                dsl::Def::Type(t) => (t.name.clone(), t.location.clone()),
                dsl::Def::Root(names, loc) => {
                    for n in names {
                        g.roots.insert(n.clone());
                        g.root_locations.push((n.clone(), loc.clone()));
                    }
                    continue;
                }
            };
            if let Some(first) = seen.get(&name) {
                return Err(GrammarError::Duplicate {
                    name,
                    first: first.clone(),
                    second: loc,
                });
            }
            seen.insert(name, loc);
            match def {
                dsl::Def::Schema(s) => {
                    g.schemas.insert(s.name.clone(), s);
                }
                dsl::Def::Construction(c) => {
                    g.constructions.insert(c.name.clone(), c);
                }
                dsl::Def::Type(t) => {
                    g.ontology.insert(t.name.clone(), t);
                }
                dsl::Def::Root(..) => unreachable!(),
            }
        }
    }
    g.reindex();
    Ok(g)
}

impl Grammar {
    fn reindex(&mut self) {
        let mut ancestors = BTreeMap::new();
        for name in self
            .schemas
            .keys()
            .chain(self.constructions.keys())
            .chain(self.ontology.keys())
        {
            ancestors.insert(name.clone(), self.compute_ancestors(name));
        }
        self.ancestors = ancestors;
        let mut flat = BTreeMap::new();
        for name in self.schemas.keys() {
            flat.insert(name.clone(), self.compute_flat(name));
        }
        self.flat = flat;
    }

    fn lattice_of(&self, name: &str) -> Option<Lattice> {
        if self.schemas.contains_key(name) {
            Some(Lattice::Schema)
        } else if self.constructions.contains_key(name) {
            Some(Lattice::Construction)
        } else if self.ontology.contains_key(name) {
            Some(Lattice::Ontology)
        } else {
            None
        }
    }

    pub(crate) fn parents_of(&self, name: &str) -> Vec<String> {
        if let Some(s) = self.schemas.get(name) {
            s.parents.clone()
        } else if let Some(c) = self.constructions.get(name) {
            c.parents.clone()
        } else if let Some(t) = self.ontology.get(name) {
            t.parent.iter().cloned().collect()
        } else {
            Vec::new()
        }
    }

    /// Reflexive, transitive ancestors; robust to cycles.
    fn compute_ancestors(&self, name: &str) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        let mut queue = VecDeque::from([name.to_string()]);
        while let Some(n) = queue.pop_front() {
            if out.insert(n.clone()) {
                queue.extend(self.parents_of(&n));
            }
        }
        out
    }

    fn compute_flat(&self, name: &str) -> FlatSchema {
        // Parents first so that child declarations come last.
        let mut order = Vec::new();
        let mut visiting = BTreeSet::new();
        self.linearize(name, &mut order, &mut visiting);
        let mut flat = FlatSchema::default();
        for s in order.iter().filter_map(|n| self.schemas.get(n)) {
            for r in &s.roles {
                flat.roles.entry(r.name.clone()).or_insert_with(|| r.ty.clone());
            }
            for c in &s.constraints {
                if !flat.constraints.contains(c) {
                    flat.constraints.push(c.clone());
                }
            }
        }
        flat
    }

    fn linearize(&self, name: &str, order: &mut Vec<String>, visiting: &mut BTreeSet<String>) {
        if order.iter().any(|n| n == name) || !visiting.insert(name.to_string()) {
            return;
        }
        if let Some(s) = self.schemas.get(name) {
            for p in &s.parents {
                self.linearize(p, order, visiting);
            }
        }
        order.push(name.to_string());
    }

    /// Flattened roles and constraints of a schema.
    pub fn flat_schema(&self, name: &str) -> Option<&FlatSchema> {
        self.flat.get(name)
    }

    /// Declared type of `role` in `schema`, including inherited roles.
    pub fn role_type(&self, schema: &str, role: &str) -> Option<&str> {
        self.flat.get(schema)?.roles.get(role).map(String::as_str)
    }

    pub fn is_schema(&self, name: &str) -> bool {
        self.schemas.contains_key(name)
    }

    pub fn is_ontology_type(&self, name: &str) -> bool {
        self.ontology.contains_key(name)
    }

    /// Reflexive-transitive subsumption within one lattice. Unknown names
    /// and names from different lattices are `false`.
    pub fn is_subtype(&self, child: &str, parent: &str) -> bool {
        self.ancestors
            .get(child)
            .is_some_and(|a| a.contains(parent))
            && self.lattice_of(child) == self.lattice_of(parent)
    }

    /// Most specific of two comparable names, if they are comparable.
    pub fn meet<'a>(&self, a: &'a str, b: &'a str) -> Option<&'a str> {
        if self.is_subtype(a, b) {
            Some(a)
        } else if self.is_subtype(b, a) {
            Some(b)
        } else {
            None
        }
    }

    /// The single ontology type without a parent.
    pub fn ontology_top(&self) -> Option<&str> {
        let mut tops = self.ontology.values().filter(|t| t.parent.is_none());
        let top = tops.next()?;
        tops.next().is_none().then_some(top.name.as_str())
    }

    /// Ontology types directly below `property`: the vocabulary of
    /// referent properties (color, size, ...).
    pub fn property_vocabulary(&self) -> BTreeSet<String> {
        self.ontology
            .values()
            .filter(|t| t.parent.as_deref() == Some("property"))
            .map(|t| t.name.clone())
            .collect()
    }

    /// The property key an ontology value belongs to, e.g. `blue -> color`.
    pub fn property_key_of(&self, value: &str) -> Option<String> {
        let vocab = self.property_vocabulary();
        self.ancestors
            .get(value)?
            .iter()
            .find(|a| vocab.contains(*a))
            .cloned()
    }

    pub fn is_root(&self, construction: &str) -> bool {
        self.ancestors
            .get(construction)
            .is_some_and(|a| a.iter().any(|n| self.roots.contains(n)))
            && self.constructions.contains_key(construction)
    }
}

/// `true` iff `parent` is reachable from `child` through parent links
/// (reflexive). Both names must be declared in the same lattice.
pub fn subtype_of(g: &Grammar, child: &str, parent: &str) -> Result<bool, GrammarError> {
    let lc = g
        .lattice_of(child)
        .ok_or_else(|| GrammarError::UnknownName(child.to_string()))?;
    let lp = g
        .lattice_of(parent)
        .ok_or_else(|| GrammarError::UnknownName(parent.to_string()))?;
    Ok(lc == lp && g.is_subtype(child, parent))
}

/// `true` if the atom is a number rather than an ontology name.
pub fn is_numeric_atom(atom: &str) -> bool {
    atom.parse::<f64>().is_ok_and(f64::is_finite)
}
