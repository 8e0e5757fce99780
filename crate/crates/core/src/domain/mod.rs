//! Skill schemas with preconditions and effects, their grounding over a
//! universe, and plans as sequences of grounded skills.

mod parse;

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::logic::{standard_predicates, LogicalState, ObjectId, PredicateSchema, Source, Universe, Vocabulary};

pub use parse::{parse_domain, serialize_domain, DomainError};

/// `Pred($i, $j)`: a predicate applied to skill parameter slots.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct AtomTemplate {
    pub pred: String,
    pub slots: Vec<u8>,
}

impl AtomTemplate {
    pub fn new(pred: impl Into<String>, slots: &[u8]) -> Self {
        AtomTemplate {
            pred: pred.into(),
            slots: slots.to_vec(),
        }
    }
}

/// What a precondition literal talks about.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Condition {
    Atom(AtomTemplate),
    /// No object is held.
    HandEmpty,
    /// The slot's object is neither held nor on another object.
    OnTable(u8),
    /// The slot's object is not `Close` to any other object.
    NotClose(u8),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Literal {
    pub condition: Condition,
    pub positive: bool,
}

impl Literal {
    pub fn pos(condition: Condition) -> Self {
        Literal {
            condition,
            positive: true,
        }
    }

    pub fn neg(condition: Condition) -> Self {
        Literal {
            condition,
            positive: false,
        }
    }

    pub fn atom(pred: &str, slots: &[u8]) -> Self {
        Self::pos(Condition::Atom(AtomTemplate::new(pred, slots)))
    }

    pub fn not_atom(pred: &str, slots: &[u8]) -> Self {
        Self::neg(Condition::Atom(AtomTemplate::new(pred, slots)))
    }

    fn slots(&self) -> Vec<u8> {
        match &self.condition {
            Condition::Atom(t) => t.slots.clone(),
            Condition::HandEmpty => vec![],
            Condition::OnTable(k) | Condition::NotClose(k) => vec![*k],
        }
    }
}

/// A parameterized skill: preconditions and expected effects.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SkillSchema {
    pub name: String,
    pub arity: u8,
    /// Unordered parameters: grounded only with strictly increasing ids.
    pub symmetric: bool,
    pub source: Source,
    pub preconditions: Vec<Literal>,
    pub add_effects: Vec<AtomTemplate>,
    pub delete_effects: Vec<AtomTemplate>,
    /// Lift the slot's object off whatever it rests on: deletes `On(x, y)`
    /// for the unique supporting `y` and adds `OnTop(y)`.
    pub lift: Option<u8>,
}

impl SkillSchema {
    pub fn new(name: impl Into<String>, arity: u8, source: Source) -> Self {
        SkillSchema {
            name: name.into(),
            arity,
            symmetric: false,
            source,
            preconditions: Vec::new(),
            add_effects: Vec::new(),
            delete_effects: Vec::new(),
            lift: None,
        }
    }

    fn symmetric(mut self) -> Self {
        self.symmetric = true;
        self
    }

    fn pre(mut self, lits: Vec<Literal>) -> Self {
        self.preconditions = lits;
        self
    }

    fn add(mut self, atoms: Vec<AtomTemplate>) -> Self {
        self.add_effects = atoms;
        self
    }

    fn del(mut self, atoms: Vec<AtomTemplate>) -> Self {
        self.delete_effects = atoms;
        self
    }

    /// Checks slot bounds and that no template is both added and deleted.
    pub fn validate(&self) -> Result<(), SchemaError> {
        let slot_ok = |k: &u8| *k < self.arity;
        let pre_slots = self.preconditions.iter().flat_map(|l| l.slots());
        let eff_slots = self
            .add_effects
            .iter()
            .chain(&self.delete_effects)
            .flat_map(|t| t.slots.iter().copied());
        for k in pre_slots.chain(eff_slots).chain(self.lift) {
            if !slot_ok(&k) {
                return Err(SchemaError::SlotOutOfRange {
                    skill: self.name.clone(),
                    slot: k,
                    arity: self.arity,
                });
            }
        }
        if let Some(t) = self.add_effects.iter().find(|t| self.delete_effects.contains(t)) {
            return Err(SchemaError::EffectOverlap {
                skill: self.name.clone(),
                atom: t.pred.clone(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SchemaError {
    #[error("skill `{skill}` uses slot ${slot} but has arity {arity}")]
    SlotOutOfRange { skill: String, slot: u8, arity: u8 },
    #[error("skill `{skill}` both adds and deletes a `{atom}` atom")]
    EffectOverlap { skill: String, atom: String },
    #[error("skill `{skill}` refers to unknown predicate `{pred}`")]
    UnknownPredicate { skill: String, pred: String },
    #[error("skill `{skill}` applies `{pred}` to {got} argument(s)")]
    PredicateArity { skill: String, pred: String, got: usize },
    #[error("skill `{skill}` needs predicate `{pred}` for a derived condition")]
    MissingDerivedPredicate { skill: String, pred: &'static str },
}

/// A predicate signature together with the skills defined over it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Domain {
    pub predicates: Vec<PredicateSchema>,
    pub skills: Vec<SkillSchema>,
}

impl Domain {
    pub fn standard() -> Self {
        Domain {
            predicates: standard_predicates(),
            skills: standard_domain(),
        }
    }
}

pub const REACH_ON_TABLE: &str = "ReachOnTable";
pub const REACH_ON_TOWER: &str = "ReachOnTower";
pub const STACK: &str = "Stack";
pub const UNSTACK: &str = "Unstack";
pub const PULL: &str = "Pull";
pub const SINGULATE: &str = "Singulate";

/// The six blocks-world skills.
pub fn standard_domain() -> Vec<SkillSchema> {
    use crate::logic::{CLOSE, IN_HAND, IN_WORKSPACE, ON, ON_TOP};
    use Condition::*;
    let t = AtomTemplate::new;
    vec![
        SkillSchema::new(REACH_ON_TABLE, 1, Source::Learned)
            .pre(vec![
                Literal::atom(ON_TOP, &[0]),
                Literal::atom(IN_WORKSPACE, &[0]),
                Literal::pos(OnTable(0)),
                Literal::pos(HandEmpty),
                Literal::pos(NotClose(0)),
            ])
            .add(vec![t(IN_HAND, &[0])])
            .del(vec![t(ON_TOP, &[0])]),
        SkillSchema {
            lift: Some(0),
            ..SkillSchema::new(REACH_ON_TOWER, 1, Source::Learned)
                .pre(vec![
                    Literal::atom(ON_TOP, &[0]),
                    Literal::atom(IN_WORKSPACE, &[0]),
                    Literal::neg(OnTable(0)),
                    Literal::pos(HandEmpty),
                ])
                .add(vec![t(IN_HAND, &[0])])
                .del(vec![t(ON_TOP, &[0])])
        },
        SkillSchema::new(STACK, 2, Source::Learned)
            .pre(vec![
                Literal::atom(IN_HAND, &[0]),
                Literal::atom(ON_TOP, &[1]),
                Literal::atom(IN_WORKSPACE, &[1]),
            ])
            .add(vec![t(ON, &[0, 1]), t(ON_TOP, &[0])])
            .del(vec![t(IN_HAND, &[0]), t(ON_TOP, &[1])]),
        SkillSchema::new(UNSTACK, 1, Source::Manual)
            .pre(vec![Literal::atom(IN_HAND, &[0])])
            .add(vec![t(ON_TOP, &[0]), t(IN_WORKSPACE, &[0])])
            .del(vec![t(IN_HAND, &[0])]),
        SkillSchema::new(PULL, 1, Source::Manual)
            .pre(vec![
                Literal::not_atom(IN_WORKSPACE, &[0]),
                Literal::atom(ON_TOP, &[0]),
                Literal::pos(OnTable(0)),
                Literal::pos(HandEmpty),
            ])
            .add(vec![t(IN_WORKSPACE, &[0])]),
        SkillSchema::new(SINGULATE, 2, Source::Manual)
            .symmetric()
            .pre(vec![
                Literal::atom(CLOSE, &[0, 1]),
                Literal::pos(OnTable(0)),
                Literal::pos(OnTable(1)),
                Literal::pos(HandEmpty),
            ])
            .del(vec![t(CLOSE, &[0, 1])]),
    ]
}

/// Preconditions compiled to atom indices of a [`Vocabulary`].
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
struct CompiledPre {
    pos: Vec<usize>,
    neg: Vec<usize>,
    /// Each inner list is a disjunction: at least one atom must be true.
    any: Vec<Vec<usize>>,
}

/// A skill schema bound to concrete objects.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GroundedSkill {
    pub schema: usize,
    pub name: Arc<str>,
    pub args: Vec<ObjectId>,
    pre: CompiledPre,
    add: Vec<usize>,
    del: Vec<usize>,
    /// `(On(x, y), OnTop(y))` for every candidate support `y`.
    lift: Option<Vec<(usize, usize)>>,
}

impl GroundedSkill {
    pub fn display<'a>(&'a self, universe: &'a Universe) -> impl fmt::Display + 'a {
        DisplaySkill { skill: self, universe }
    }

    /// Atoms this skill adds unconditionally.
    pub fn add_effects(&self) -> &[usize] {
        &self.add
    }

    pub fn delete_effects(&self) -> &[usize] {
        &self.del
    }
}

struct DisplaySkill<'a> {
    skill: &'a GroundedSkill,
    universe: &'a Universe,
}

impl fmt::Display for DisplaySkill<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let args: Vec<&str> = self.skill.args.iter().map(|&o| self.universe.name(o)).collect();
        write!(f, "{}({})", self.skill.name, args.join(","))
    }
}

/// Steps of a plan, executed in order.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Plan {
    pub steps: Vec<GroundedSkill>,
}

impl Plan {
    pub fn new(steps: Vec<GroundedSkill>) -> Self {
        Plan { steps }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// `i: Name(args)` per line.
    pub fn to_text(&self, universe: &Universe) -> String {
        self.steps
            .iter()
            .enumerate()
            .map(|(i, s)| format!("{i}: {}\n", s.display(universe)))
            .collect()
    }
}

struct Grounder<'a> {
    vocab: &'a Vocabulary,
    skill: &'a SkillSchema,
}

impl Grounder<'_> {
    fn pred(&self, name: &str, nargs: usize) -> Result<crate::logic::PredId, SchemaError> {
        let id = self.vocab.pred_id(name).ok_or_else(|| SchemaError::UnknownPredicate {
            skill: self.skill.name.clone(),
            pred: name.to_string(),
        })?;
        if self.vocab.predicate(id).arity as usize != nargs {
            return Err(SchemaError::PredicateArity {
                skill: self.skill.name.clone(),
                pred: name.to_string(),
                got: nargs,
            });
        }
        Ok(id)
    }

    fn derived(&self, name: &'static str) -> Result<crate::logic::PredId, SchemaError> {
        self.vocab.pred_id(name).ok_or(SchemaError::MissingDerivedPredicate {
            skill: self.skill.name.clone(),
            pred: name,
        })
    }

    fn atom(&self, t: &AtomTemplate, args: &[ObjectId]) -> Result<Option<usize>, SchemaError> {
        let pred = self.pred(&t.pred, t.slots.len())?;
        let objs: Vec<ObjectId> = t.slots.iter().map(|&k| args[k as usize]).collect();
        Ok(self.vocab.lookup(pred, &objs))
    }

    /// Atoms whose joint absence makes the condition true.
    fn blockers(&self, cond: &Condition, args: &[ObjectId]) -> Result<Vec<usize>, SchemaError> {
        use crate::logic::{CLOSE, IN_HAND, ON};
        let universe = self.vocab.universe();
        let mut out = Vec::new();
        match cond {
            Condition::HandEmpty => {
                let h = self.derived(IN_HAND)?;
                out.extend(universe.ids().filter_map(|z| self.vocab.lookup(h, &[z])));
            }
            Condition::OnTable(k) => {
                let x = args[*k as usize];
                let h = self.derived(IN_HAND)?;
                let on = self.derived(ON)?;
                out.extend(self.vocab.lookup(h, &[x]));
                out.extend(universe.ids().filter_map(|y| self.vocab.lookup(on, &[x, y])));
            }
            Condition::NotClose(k) => {
                let x = args[*k as usize];
                let c = self.derived(CLOSE)?;
                out.extend(universe.ids().filter_map(|y| self.vocab.lookup(c, &[x, y])));
            }
            Condition::Atom(_) => unreachable!("plain atoms are compiled directly"),
        }
        Ok(out)
    }

    fn ground(&self, schema_index: usize, args: Vec<ObjectId>) -> Result<GroundedSkill, SchemaError> {
        let mut pre = CompiledPre::default();
        for lit in &self.skill.preconditions {
            match (&lit.condition, lit.positive) {
                (Condition::Atom(t), positive) => match self.atom(t, &args)? {
                    Some(i) if positive => pre.pos.push(i),
                    Some(i) => pre.neg.push(i),
                    // ill-formed atoms (repeated object) are never true
                    None if positive => pre.any.push(Vec::new()),
                    None => {}
                },
                (cond, true) => pre.neg.extend(self.blockers(cond, &args)?),
                (cond, false) => pre.any.push(self.blockers(cond, &args)?),
            }
        }
        for v in [&mut pre.pos, &mut pre.neg] {
            v.sort_unstable();
            v.dedup();
        }
        let collect = |ts: &[AtomTemplate]| -> Result<Vec<usize>, SchemaError> {
            let mut out = Vec::new();
            for t in ts {
                out.extend(self.atom(t, &args)?);
            }
            Ok(out)
        };
        let add = collect(&self.skill.add_effects)?;
        let del = collect(&self.skill.delete_effects)?;
        let lift = match self.skill.lift {
            Some(k) => {
                use crate::logic::{ON, ON_TOP};
                let x = args[k as usize];
                let on = self.derived(ON)?;
                let top = self.derived(ON_TOP)?;
                let pairs = self
                    .vocab
                    .universe()
                    .ids()
                    .filter_map(|y| Some((self.vocab.lookup(on, &[x, y])?, self.vocab.lookup(top, &[y])?)))
                    .collect();
                Some(pairs)
            }
            None => None,
        };
        Ok(GroundedSkill {
            schema: schema_index,
            name: Arc::from(self.skill.name.as_str()),
            args,
            pre,
            add,
            del,
            lift,
        })
    }
}

/// Every grounding of every schema over tuples of distinct objects, in
/// schema order then lexicographic argument order. Symmetric schemas only
/// get increasing argument tuples.
pub fn ground_skills(schemas: &[SkillSchema], vocab: &Vocabulary) -> Result<Vec<GroundedSkill>, SchemaError> {
    let n = vocab.universe().len();
    let mut out = Vec::new();
    for (si, skill) in schemas.iter().enumerate() {
        skill.validate()?;
        let g = Grounder { vocab, skill };
        let arity = skill.arity as u32;
        for code in 0..n.pow(arity) {
            // big-endian digits give lexicographic order
            let tuple: Vec<usize> = (0..arity).rev().map(|d| code / n.pow(d) % n).collect();
            let distinct = (0..tuple.len()).all(|i| (0..i).all(|j| tuple[i] != tuple[j]));
            let ordered = !skill.symmetric || tuple.windows(2).all(|w| w[0] < w[1]);
            if distinct && ordered {
                let args = tuple.iter().map(|&i| ObjectId(i as u16)).collect();
                out.push(g.ground(si, args)?);
            }
        }
    }
    Ok(out)
}

/// All positive literals true, all negative ones false, derived conditions met.
pub fn preconditions_hold(skill: &GroundedSkill, state: &LogicalState) -> bool {
    skill.pre.pos.iter().all(|&a| state.contains(a))
        && !skill.pre.neg.iter().any(|&a| state.contains(a))
        && skill.pre.any.iter().all(|alts| alts.iter().any(|&a| state.contains(a)))
}

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum EffectError {
    #[error("lifted object has {0} supports; expected exactly one")]
    AmbiguousSupport(usize),
}

/// `(state ∪ add) \ del`, resolving the lift effect from `state`.
pub fn apply_effects(skill: &GroundedSkill, state: &LogicalState) -> Result<LogicalState, EffectError> {
    let mut next = state.clone();
    if let Some(pairs) = &skill.lift {
        let mut supports = pairs.iter().filter(|(on, _)| state.contains(*on));
        match (supports.next(), supports.count()) {
            (Some(&(on, top)), 0) => {
                next.remove(on);
                next.insert(top);
            }
            (None, _) => return Err(EffectError::AmbiguousSupport(0)),
            (Some(_), rest) => return Err(EffectError::AmbiguousSupport(rest + 1)),
        }
    }
    for &a in &skill.add {
        next.insert(a);
    }
    for &d in &skill.del {
        next.remove(d);
    }
    Ok(next)
}

/// Applies the skill when its preconditions hold and its effects resolve.
pub fn successor(skill: &GroundedSkill, state: &LogicalState) -> Option<LogicalState> {
    if preconditions_hold(skill, state) {
        apply_effects(skill, state).ok()
    } else {
        None
    }
}

/// Finds a grounded skill by name and argument names (or aliases).
pub fn find_skill<'a>(
    skills: &'a [GroundedSkill],
    universe: &Universe,
    name: &str,
    args: &[&str],
) -> Option<&'a GroundedSkill> {
    let ids: Option<Vec<ObjectId>> = args.iter().map(|a| universe.resolve(a)).collect();
    let ids = ids?;
    skills.iter().find(|s| &*s.name == name && s.args == ids)
}
