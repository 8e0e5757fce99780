//! Line-oriented domain files.
//!
//! ```text
//! # optional signature; the blocks-world predicates are used when absent
//! predicate On/2 learned
//! predicate Close/2 manual symmetric
//!
//! skill Stack/2 learned:
//!   pre: InHand($0), OnTop($1), InWorkspace($1)
//!   add: On($0,$1), OnTop($0)
//!   del: InHand($0), OnTop($1)
//! ```
//!
//! Literals may be negated with `!`. Besides plain atoms, `pre:` accepts the
//! derived conditions `hand-empty`, `on-table($k)` and `not-close($k)`, and
//! `del:` accepts `lift($k)`.

use std::collections::HashSet;
use std::fmt::Write as _;

use thiserror::Error;

use super::{AtomTemplate, Condition, Domain, Literal, SchemaError, SkillSchema};
use crate::logic::{split_atom_list, standard_predicates, PredicateSchema, Source};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DomainError {
    #[error("{line}:{column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{line}:{column}: {message}")]
    ArityMismatch {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{line}: duplicate skill `{name}`")]
    DuplicateSkill { line: usize, name: String },
    #[error("{line}: duplicate predicate `{name}`")]
    DuplicatePredicate { line: usize, name: String },
    #[error("{line}:{column}: unknown predicate `{name}`")]
    UnknownPredicate { line: usize, column: usize, name: String },
    #[error("{line}: skill `{skill}` both adds and deletes `{atom}`")]
    EffectOverlap { line: usize, skill: String, atom: String },
}

struct Pending {
    line: usize,
    schema: SkillSchema,
}

struct Parser {
    predicates: Vec<PredicateSchema>,
    explicit_predicates: bool,
    skills: Vec<Pending>,
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> DomainError {
    DomainError::Syntax {
        line,
        column,
        message: message.into(),
    }
}

/// `Name/arity` with the column of the name.
fn name_and_arity(text: &str, line: usize, column: usize) -> Result<(String, u8), DomainError> {
    let (name, arity) = text
        .split_once('/')
        .ok_or_else(|| syntax(line, column, format!("expected `Name/arity`, found `{text}`")))?;
    if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
        return Err(syntax(line, column, format!("invalid name `{name}`")));
    }
    let arity: u8 = arity
        .parse()
        .map_err(|_| syntax(line, column + name.len() + 1, format!("invalid arity `{arity}`")))?;
    Ok((name.to_string(), arity))
}

fn parse_source(flag: &str) -> Option<Source> {
    match flag {
        "learned" => Some(Source::Learned),
        "manual" => Some(Source::Manual),
        _ => None,
    }
}

type Call<'t> = (&'t str, Vec<(&'t str, usize)>);

impl Parser {
    fn predicate_line(&mut self, rest: &str, line: usize, column: usize) -> Result<(), DomainError> {
        let mut words = rest.split_whitespace();
        let head = words.next().ok_or_else(|| syntax(line, column, "missing predicate"))?;
        let (name, arity) = name_and_arity(head, line, column)?;
        if !(1..=2).contains(&arity) {
            return Err(DomainError::ArityMismatch {
                line,
                column,
                message: format!("predicate `{name}` must have arity 1 or 2"),
            });
        }
        let mut schema = PredicateSchema::new(name.clone(), arity, Source::Manual);
        for flag in words {
            match (flag, parse_source(flag)) {
                (_, Some(s)) => schema.source = s,
                ("symmetric", _) if arity == 2 => schema.symmetric = true,
                _ => return Err(syntax(line, column, format!("unknown predicate flag `{flag}`"))),
            }
        }
        if !self.explicit_predicates {
            self.explicit_predicates = true;
            self.predicates.clear();
        }
        if self.predicates.iter().any(|p| p.name == name) {
            return Err(DomainError::DuplicatePredicate { line, name });
        }
        self.predicates.push(schema);
        Ok(())
    }

    fn skill_line(&mut self, rest: &str, line: usize, column: usize) -> Result<(), DomainError> {
        let rest = rest
            .strip_suffix(':')
            .ok_or_else(|| syntax(line, column + rest.len(), "skill header must end with `:`"))?;
        let mut words = rest.split_whitespace();
        let head = words.next().ok_or_else(|| syntax(line, column, "missing skill name"))?;
        let (name, arity) = name_and_arity(head, line, column)?;
        if self.skills.iter().any(|p| p.schema.name == name) {
            return Err(DomainError::DuplicateSkill { line, name });
        }
        let mut schema = SkillSchema::new(name, arity, Source::Manual);
        for flag in words {
            match (flag, parse_source(flag)) {
                (_, Some(s)) => schema.source = s,
                ("symmetric", _) => schema.symmetric = true,
                _ => return Err(syntax(line, column, format!("unknown skill flag `{flag}`"))),
            }
        }
        self.skills.push(Pending { line, schema });
        Ok(())
    }

    fn slot(&self, text: &str, arity: u8, line: usize, column: usize) -> Result<u8, DomainError> {
        let k: u8 = text
            .strip_prefix('$')
            .and_then(|d| d.parse().ok())
            .ok_or_else(|| syntax(line, column, format!("expected parameter `$k`, found `{text}`")))?;
        if k >= arity {
            return Err(DomainError::ArityMismatch {
                line,
                column,
                message: format!("parameter ${k} exceeds skill arity {arity}"),
            });
        }
        Ok(k)
    }

    /// `Name(args)` split into name, argument texts and their columns.
    fn call(text: &str, line: usize, column: usize) -> Result<Call<'_>, DomainError> {
        match text.find('(') {
            None => Ok((text, Vec::new())),
            Some(open) => {
                let inner = text[open + 1..]
                    .strip_suffix(')')
                    .ok_or_else(|| syntax(line, column + text.len(), "missing `)`"))?;
                let mut args = Vec::new();
                let mut offset = column + open + 1;
                for a in inner.split(',') {
                    let lead = a.len() - a.trim_start().len();
                    args.push((a.trim(), offset + lead));
                    offset += a.len() + 1;
                }
                Ok((&text[..open], args))
            }
        }
    }

    fn template(
        &self,
        name: &str,
        args: &[(&str, usize)],
        arity: u8,
        line: usize,
        column: usize,
    ) -> Result<AtomTemplate, DomainError> {
        let pred = self
            .predicates
            .iter()
            .find(|p| p.name == name)
            .ok_or_else(|| DomainError::UnknownPredicate {
                line,
                column,
                name: name.to_string(),
            })?;
        if pred.arity as usize != args.len() {
            return Err(DomainError::ArityMismatch {
                line,
                column,
                message: format!("`{name}` takes {} argument(s), got {}", pred.arity, args.len()),
            });
        }
        let slots = args
            .iter()
            .map(|(a, c)| self.slot(a, arity, line, *c))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(AtomTemplate::new(name, &slots))
    }

    fn single_slot(&self, args: &[(&str, usize)], arity: u8, line: usize, column: usize) -> Result<u8, DomainError> {
        match args {
            [(a, c)] => self.slot(a, arity, line, *c),
            _ => Err(DomainError::ArityMismatch {
                line,
                column,
                message: format!("expected one parameter, got {}", args.len()),
            }),
        }
    }

    fn section_line(&mut self, key: &str, body: &str, line: usize, column: usize) -> Result<(), DomainError> {
        let Some(pending) = self.skills.last() else {
            return Err(syntax(line, 1, "literal list outside of a skill"));
        };
        let arity = pending.schema.arity;
        let mut pre = Vec::new();
        let mut atoms = Vec::new();
        let mut lift = None;
        let mut search_from = 0;
        for item in split_atom_list(body) {
            let at = body[search_from..].find(item).map_or(search_from, |i| i + search_from);
            search_from = at + item.len();
            let col = column + at;
            let (negated, text, col) = match item.strip_prefix('!') {
                Some(t) => (true, t.trim_start(), col + 1 + (t.len() - t.trim_start().len())),
                None => (false, item, col),
            };
            let (name, args) = Self::call(text, line, col)?;
            match key {
                "pre" => {
                    let condition = match name {
                        "hand-empty" if args.is_empty() => Condition::HandEmpty,
                        "hand-empty" => {
                            return Err(DomainError::ArityMismatch {
                                line,
                                column: col,
                                message: "`hand-empty` takes no parameters".into(),
                            })
                        }
                        "on-table" => Condition::OnTable(self.single_slot(&args, arity, line, col)?),
                        "not-close" => Condition::NotClose(self.single_slot(&args, arity, line, col)?),
                        _ => Condition::Atom(self.template(name, &args, arity, line, col)?),
                    };
                    pre.push(Literal {
                        condition,
                        positive: !negated,
                    });
                }
                _ if negated => return Err(syntax(line, col - 1, "effects cannot be negated")),
                "del" if name == "lift" => {
                    if lift.is_some() || pending.schema.lift.is_some() {
                        return Err(syntax(line, col, "at most one `lift` per skill"));
                    }
                    lift = Some(self.single_slot(&args, arity, line, col)?);
                }
                _ => atoms.push(self.template(name, &args, arity, line, col)?),
            }
        }
        let schema = &mut self.skills.last_mut().expect("checked above").schema;
        match key {
            "pre" => schema.preconditions.extend(pre),
            "add" => schema.add_effects.extend(atoms),
            _ => {
                schema.delete_effects.extend(atoms);
                if lift.is_some() {
                    schema.lift = lift;
                }
            }
        }
        Ok(())
    }
}

/// Parses a domain file. Without `predicate` lines the blocks-world
/// signature is assumed.
pub fn parse_domain(text: &str) -> Result<Domain, DomainError> {
    let mut p = Parser {
        predicates: standard_predicates(),
        explicit_predicates: false,
        skills: Vec::new(),
    };
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("");
        if content.trim().is_empty() {
            continue;
        }
        let indent = content.len() - content.trim_start().len();
        let trimmed = content.trim();
        let column = indent + 1;
        if let Some(rest) = trimmed.strip_prefix("predicate ") {
            if !p.skills.is_empty() {
                return Err(syntax(line, column, "predicates must be declared before skills"));
            }
            let off = trimmed.len() - rest.len();
            p.predicate_line(rest.trim(), line, column + off)?;
        } else if let Some(rest) = trimmed.strip_prefix("skill ") {
            let off = trimmed.len() - rest.trim_start().len();
            p.skill_line(rest.trim(), line, column + off)?;
        } else if let Some((key, body)) = trimmed.split_once(':') {
            let key = key.trim();
            if !matches!(key, "pre" | "add" | "del") {
                return Err(syntax(line, column, format!("unknown section `{key}`")));
            }
            if indent == 0 {
                return Err(syntax(line, column, "section lines must be indented"));
            }
            let body_col = column + key.len() + 1;
            p.section_line(key, body, line, body_col)?;
        } else {
            return Err(syntax(line, column, format!("unexpected `{trimmed}`")));
        }
    }

    let mut skills = Vec::with_capacity(p.skills.len());
    for Pending { line, schema } in p.skills {
        match schema.validate() {
            Ok(()) => skills.push(schema),
            Err(SchemaError::EffectOverlap { skill, atom }) => {
                return Err(DomainError::EffectOverlap { line, skill, atom })
            }
            Err(other) => {
                return Err(DomainError::ArityMismatch {
                    line,
                    column: 1,
                    message: other.to_string(),
                })
            }
        }
    }
    Ok(Domain {
        predicates: p.predicates,
        skills,
    })
}

fn source_word(s: Source) -> &'static str {
    match s {
        Source::Learned => "learned",
        Source::Manual => "manual",
    }
}

fn template_text(t: &AtomTemplate) -> String {
    let args: Vec<String> = t.slots.iter().map(|k| format!("${k}")).collect();
    format!("{}({})", t.pred, args.join(","))
}

fn literal_text(l: &Literal) -> String {
    let body = match &l.condition {
        Condition::Atom(t) => template_text(t),
        Condition::HandEmpty => "hand-empty".to_string(),
        Condition::OnTable(k) => format!("on-table(${k})"),
        Condition::NotClose(k) => format!("not-close(${k})"),
    };
    if l.positive {
        body
    } else {
        format!("!{body}")
    }
}

/// Writes a domain in the format [`parse_domain`] reads.
pub fn serialize_domain(domain: &Domain) -> String {
    let mut out = String::new();
    for p in &domain.predicates {
        let sym = if p.symmetric { " symmetric" } else { "" };
        let _ = writeln!(out, "predicate {}/{} {}{sym}", p.name, p.arity, source_word(p.source));
    }
    let mut seen = HashSet::new();
    for s in &domain.skills {
        debug_assert!(seen.insert(&s.name), "duplicate skill names do not round-trip");
        out.push('\n');
        let sym = if s.symmetric { " symmetric" } else { "" };
        let _ = writeln!(out, "skill {}/{} {}{sym}:", s.name, s.arity, source_word(s.source));
        if !s.preconditions.is_empty() {
            let lits: Vec<String> = s.preconditions.iter().map(literal_text).collect();
            let _ = writeln!(out, "  pre: {}", lits.join(", "));
        }
        if !s.add_effects.is_empty() {
            let lits: Vec<String> = s.add_effects.iter().map(template_text).collect();
            let _ = writeln!(out, "  add: {}", lits.join(", "));
        }
        let mut dels: Vec<String> = s.delete_effects.iter().map(template_text).collect();
        if let Some(k) = s.lift {
            dels.push(format!("lift(${k})"));
        }
        if !dels.is_empty() {
            let _ = writeln!(out, "  del: {}", dels.join(", "));
        }
    }
    out
}
