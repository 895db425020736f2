//! Parser for the grammar text DSL.
//!
//! The format is keyword driven and whitespace insensitive; indentation is
//! only for readers. `#` starts a comment that runs to the end of the line.
//!
//! ```text
//! type soda_can subcase of container
//!
//! schema MotionPath
//!   subcase of Process
//!   roles
//!     mover: RD
//!     spg: SPG
//!   constraints
//!     mover <-> spg.trajector
//!
//! construction GoalPath
//!   subcase of PathPP
//!   constituents
//!     p: To
//!     np: NP
//!   form
//!     p meets np
//!   meaning MotionPath
//!   bindings
//!     self.spg.goal <-> np
//!
//! root Imperative, Declarative
//! ```

use super::{
    Binding, BindingTarget, Constituent, Construction, ConstructionKind, FormConstraint,
    FormRelation, GrammarError, Location, MeaningPath, OntologyType, PathHead, RoleDecl, Schema,
};

#[derive(Debug)]
pub(super) enum Def {
    Schema(Schema),
    Construction(Construction),
    Type(OntologyType),
    Root(Vec<String>, Location),
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Str(String),
    Colon,
    Comma,
    Arrow,
    Equals,
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || matches!(c, '_' | '.' | '-')
}

fn lex(source: &str, text: &str) -> Result<Vec<Spanned>, GrammarError> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            let column = i + 1;
            let push = |out: &mut Vec<Spanned>, tok| {
                out.push(Spanned {
                    tok,
                    line: lineno + 1,
                    column,
                })
            };
            if c == '#' {
                break;
            } else if c.is_whitespace() {
                i += 1;
            } else if c == ':' {
                push(&mut out, Tok::Colon);
                i += 1;
            } else if c == ',' {
                push(&mut out, Tok::Comma);
                i += 1;
            } else if c == '=' {
                push(&mut out, Tok::Equals);
                i += 1;
            } else if c == '<' && chars.get(i + 1) == Some(&'-') && chars.get(i + 2) == Some(&'>') {
                push(&mut out, Tok::Arrow);
                i += 3;
            } else if c == '"' {
                let start = i + 1;
                let mut j = start;
                while j < chars.len() && chars[j] != '"' {
                    j += 1;
                }
                if j == chars.len() {
                    return Err(GrammarError::Syntax {
                        location: Location {
                            source: source.to_string(),
                            line: lineno + 1,
                            column,
                        },
                        message: "unterminated string".into(),
                    });
                }
                push(&mut out, Tok::Str(chars[start..j].iter().collect()));
                i = j + 1;
            } else if is_word_char(c) {
                let start = i;
                while i < chars.len() && is_word_char(chars[i]) {
                    i += 1;
                }
                push(&mut out, Tok::Word(chars[start..i].iter().collect()));
            } else {
                return Err(GrammarError::Syntax {
                    location: Location {
                        source: source.to_string(),
                        line: lineno + 1,
                        column,
                    },
                    message: format!("unexpected character {c:?}"),
                });
            }
        }
    }
    Ok(out)
}

struct Parser<'a> {
    source: &'a str,
    toks: Vec<Spanned>,
    pos: usize,
    eof_line: usize,
}

const SECTION_KEYWORDS: &[&str] = &[
    "subcase",
    "roles",
    "constraints",
    "token",
    "constituents",
    "form",
    "meaning",
    "bindings",
];
const DEF_KEYWORDS: &[&str] = &["schema", "construction", "type", "root"];

impl<'a> Parser<'a> {
    fn location(&self) -> Location {
        match self.toks.get(self.pos) {
            Some(t) => Location {
                source: self.source.to_string(),
                line: t.line,
                column: t.column,
            },
            None => Location {
                source: self.source.to_string(),
                line: self.eof_line,
                column: 1,
            },
        }
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T, GrammarError> {
        Err(GrammarError::Syntax {
            location: self.location(),
            message: message.into(),
        })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn peek_at(&self, offset: usize) -> Option<&Tok> {
        self.toks.get(self.pos + offset).map(|t| &t.tok)
    }

    fn peek_word(&self) -> Option<&str> {
        match self.peek() {
            Some(Tok::Word(w)) => Some(w),
            _ => None,
        }
    }

    fn at_keyword(&self, kw: &str) -> bool {
        // A keyword followed by ':' / '<->' / '=' is an entry name instead.
        self.peek_word() == Some(kw)
            && !matches!(
                self.peek_at(1),
                Some(Tok::Colon | Tok::Arrow | Tok::Equals)
            )
    }

    fn at_any_keyword(&self) -> bool {
        SECTION_KEYWORDS
            .iter()
            .chain(DEF_KEYWORDS)
            .any(|k| self.at_keyword(k))
    }

    fn expect_word(&mut self, what: &str) -> Result<String, GrammarError> {
        match self.peek() {
            Some(Tok::Word(w)) => {
                let w = w.clone();
                self.pos += 1;
                Ok(w)
            }
            _ => self.error(format!("expected {what}")),
        }
    }

    fn expect_name(&mut self, what: &str) -> Result<String, GrammarError> {
        let w = self.expect_word(what)?;
        if w.contains('.') {
            self.pos -= 1;
            return self.error(format!("expected {what}, found path {w}"));
        }
        Ok(w)
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<(), GrammarError> {
        if self.peek_word() == Some(kw) {
            self.pos += 1;
            Ok(())
        } else {
            self.error(format!("expected `{kw}`"))
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), GrammarError> {
        if self.peek() == Some(&tok) {
            self.pos += 1;
            Ok(())
        } else {
            self.error(format!("expected {what}"))
        }
    }

    fn name_list(&mut self) -> Result<Vec<String>, GrammarError> {
        let mut names = vec![self.expect_name("name")?];
        while self.peek() == Some(&Tok::Comma) {
            self.pos += 1;
            names.push(self.expect_name("name")?);
        }
        Ok(names)
    }

    fn subcase(&mut self) -> Result<Vec<String>, GrammarError> {
        if self.at_keyword("subcase") {
            self.pos += 1;
            self.expect_keyword("of")?;
            self.name_list()
        } else {
            Ok(Vec::new())
        }
    }

    /// An entry is a word followed by `follow`, and not a keyword.
    fn at_entry(&self, follow: &Tok) -> bool {
        matches!(self.peek(), Some(Tok::Word(_))) && self.peek_at(1) == Some(follow)
    }

    fn role_path(&mut self) -> Result<Vec<String>, GrammarError> {
        let w = self.expect_word("role path")?;
        if w.split('.').any(str::is_empty) {
            self.pos -= 1;
            return self.error(format!("malformed path {w}"));
        }
        Ok(w.split('.').map(str::to_string).collect())
    }

    fn meaning_path(&mut self) -> Result<MeaningPath, GrammarError> {
        let mut parts = self.role_path()?;
        let head = parts.remove(0);
        let head = if head == "self" {
            PathHead::SelfRef
        } else {
            PathHead::Label(head)
        };
        Ok(MeaningPath { head, roles: parts })
    }

    fn schema(&mut self, location: Location) -> Result<Schema, GrammarError> {
        let name = self.expect_name("schema name")?;
        let parents = self.subcase()?;
        let mut roles = Vec::new();
        let mut constraints = Vec::new();
        if self.at_keyword("roles") {
            self.pos += 1;
            while self.at_entry(&Tok::Colon) {
                let role = self.expect_name("role name")?;
                self.expect(Tok::Colon, "`:`")?;
                let ty = self.expect_name("role type")?;
                roles.push(RoleDecl { name: role, ty });
            }
        }
        if self.at_keyword("constraints") {
            self.pos += 1;
            while self.at_entry(&Tok::Arrow) {
                let a = self.role_path()?;
                self.expect(Tok::Arrow, "`<->`")?;
                let b = self.role_path()?;
                constraints.push((a, b));
            }
        }
        Ok(Schema {
            name,
            parents,
            roles,
            constraints,
            location,
        })
    }

    fn construction(&mut self, location: Location) -> Result<Construction, GrammarError> {
        let name = self.expect_name("construction name")?;
        let parents = self.subcase()?;
        let kind = if self.at_keyword("token") {
            self.pos += 1;
            match self.peek() {
                Some(Tok::Str(s)) => {
                    let token = s.clone();
                    self.pos += 1;
                    ConstructionKind::Lexical { token }
                }
                _ => return self.error("expected quoted token"),
            }
        } else if self.at_keyword("constituents") {
            self.pos += 1;
            let mut constituents = Vec::new();
            while self.at_entry(&Tok::Colon) {
                let label = self.expect_name("constituent label")?;
                self.expect(Tok::Colon, "`:`")?;
                let ty = self.expect_name("constructional type")?;
                let optional = if self.peek_word() == Some("optional")
                    && !matches!(self.peek_at(1), Some(Tok::Colon))
                {
                    self.pos += 1;
                    true
                } else {
                    false
                };
                constituents.push(Constituent {
                    label,
                    ty,
                    optional,
                });
            }
            let mut form = Vec::new();
            if self.at_keyword("form") {
                self.pos += 1;
                while matches!(self.peek(), Some(Tok::Word(_)))
                    && matches!(self.peek_at(1), Some(Tok::Word(w)) if w == "meets" || w == "before")
                {
                    let left = self.expect_name("label")?;
                    let relation = match self.expect_word("relation")?.as_str() {
                        "meets" => FormRelation::Meets,
                        _ => FormRelation::Before,
                    };
                    let right = self.expect_name("label")?;
                    form.push(FormConstraint {
                        left,
                        relation,
                        right,
                    });
                }
            }
            ConstructionKind::Phrasal { constituents, form }
        } else {
            ConstructionKind::Abstract
        };
        if !self.at_keyword("meaning") {
            return self.error("expected `meaning`");
        }
        self.pos += 1;
        let meaning = self.expect_name("schema name")?;
        let mut bindings = Vec::new();
        if self.at_keyword("bindings") {
            self.pos += 1;
            while self.at_entry(&Tok::Arrow) || self.at_entry(&Tok::Equals) {
                let left = self.meaning_path()?;
                let right = if self.peek() == Some(&Tok::Arrow) {
                    self.pos += 1;
                    BindingTarget::Path(self.meaning_path()?)
                } else {
                    self.pos += 1;
                    BindingTarget::Atom(self.expect_name("atom")?)
                };
                bindings.push(Binding { left, right });
            }
        }
        Ok(Construction {
            name,
            parents,
            kind,
            meaning,
            bindings,
            location,
        })
    }

    fn ontology_type(&mut self, location: Location) -> Result<OntologyType, GrammarError> {
        let name = self.expect_name("type name")?;
        let mut parents = self.subcase()?;
        if parents.len() > 1 {
            return self.error("ontology types have a single parent");
        }
        Ok(OntologyType {
            name,
            parent: parents.pop(),
            location,
        })
    }

    fn defs(&mut self) -> Result<Vec<Def>, GrammarError> {
        let mut defs = Vec::new();
        while self.pos < self.toks.len() {
            let location = self.location();
            let kw = match self.peek_word() {
                Some(w) if DEF_KEYWORDS.contains(&w) => w.to_string(),
                _ => return self.error("expected `schema`, `construction`, `type` or `root`"),
            };
            self.pos += 1;
            let def = match kw.as_str() {
                "schema" => Def::Schema(self.schema(location)?),
                "construction" => Def::Construction(self.construction(location)?),
                "type" => Def::Type(self.ontology_type(location)?),
                _ => Def::Root(self.name_list()?, location),
            };
            if self.pos < self.toks.len() && !self.at_any_keyword() {
                return self.error("unexpected input");
            }
            if self.pos < self.toks.len()
                && !DEF_KEYWORDS.iter().any(|k| self.at_keyword(k))
            {
                return self.error("section out of order");
            }
            defs.push(def);
        }
        Ok(defs)
    }
}

pub(super) fn parse(source: &str, text: &str) -> Result<Vec<Def>, GrammarError> {
    let toks = lex(source, text)?;
    let mut p = Parser {
        source,
        toks,
        pos: 0,
        eof_line: text.lines().count().max(1),
    };
    p.defs()
}
