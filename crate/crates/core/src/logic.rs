//! Objects, predicate schemas, grounded atoms and logical states.
//!
//! A [`Vocabulary`] fixes the atom ordering for a universe and a predicate
//! signature. Logical states are bitsets over that ordering, so membership is
//! a shift and a mask, and equality/hashing are deterministic.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LogicError {
    #[error("universe must contain at least one object")]
    EmptyUniverse,
    #[error("duplicate object name `{0}`")]
    DuplicateObject(String),
    #[error("unknown object `{0}`")]
    UnknownObject(String),
    #[error("unknown predicate `{0}`")]
    UnknownPredicate(String),
    #[error("predicate `{name}` expects {expected} argument(s), got {got}")]
    ArityMismatch { name: String, expected: usize, got: usize },
    #[error("atom `{0}` repeats an argument")]
    ReflexiveAtom(String),
    #[error("malformed atom `{0}`")]
    Syntax(String),
}

/// Dense index of an object within a [`Universe`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ObjectId(pub u16);

impl ObjectId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct ObjectInfo {
    name: String,
    alias: Option<String>,
}

/// The fixed set of objects a task talks about.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Universe {
    objects: Vec<ObjectInfo>,
}

impl Universe {
    pub fn new<I, S>(names: I) -> Result<Self, LogicError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::with_aliases(names.into_iter().map(|n| (n, None::<String>)))
    }

    /// Objects with an optional short alias each (e.g. `BlockRed` / `r`).
    pub fn with_aliases<I, S, A>(entries: I) -> Result<Self, LogicError>
    where
        I: IntoIterator<Item = (S, Option<A>)>,
        S: Into<String>,
        A: Into<String>,
    {
        let mut objects: Vec<ObjectInfo> = Vec::new();
        for (name, alias) in entries {
            let name = name.into();
            let alias = alias.map(Into::into);
            let clash = |s: &str| objects.iter().any(|o| o.name == s || o.alias.as_deref() == Some(s));
            if clash(&name) {
                return Err(LogicError::DuplicateObject(name));
            }
            if let Some(a) = &alias {
                if clash(a) || *a == name {
                    return Err(LogicError::DuplicateObject(a.clone()));
                }
            }
            objects.push(ObjectInfo { name, alias });
        }
        if objects.is_empty() {
            return Err(LogicError::EmptyUniverse);
        }
        Ok(Universe { objects })
    }

    /// The four colored blocks, aliased `r`, `g`, `b`, `y`.
    pub fn blocks() -> Self {
        Self::with_aliases([
            ("BlockRed", Some("r")),
            ("BlockGreen", Some("g")),
            ("BlockBlue", Some("b")),
            ("BlockYellow", Some("y")),
        ])
        .expect("static universe is valid")
    }

    /// The first `n` of the standard blocks, followed by `Block4`, `Block5`, ...
    pub fn first_blocks(n: usize) -> Result<Self, LogicError> {
        let standard = [
            ("BlockRed", "r"),
            ("BlockGreen", "g"),
            ("BlockBlue", "b"),
            ("BlockYellow", "y"),
        ];
        Self::with_aliases((0..n).map(|i| match standard.get(i) {
            Some(&(name, alias)) => (name.to_string(), Some(alias.to_string())),
            None => (format!("Block{i}"), None),
        }))
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ObjectId> + '_ {
        (0..self.objects.len()).map(|i| ObjectId(i as u16))
    }

    pub fn name(&self, id: ObjectId) -> &str {
        &self.objects[id.index()].name
    }

    pub fn alias(&self, id: ObjectId) -> Option<&str> {
        self.objects[id.index()].alias.as_deref()
    }

    /// Looks an object up by full name or alias.
    pub fn resolve(&self, name: &str) -> Option<ObjectId> {
        self.objects
            .iter()
            .position(|o| o.name == name || o.alias.as_deref() == Some(name))
            .map(|i| ObjectId(i as u16))
    }

    pub fn resolve_or_err(&self, name: &str) -> Result<ObjectId, LogicError> {
        self.resolve(name)
            .ok_or_else(|| LogicError::UnknownObject(name.to_string()))
    }
}

/// Whether a predicate or skill is backed by a learned model or hand-written.
/// Metadata only; the planner and executor treat both alike.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Learned,
    Manual,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PredicateSchema {
    pub name: String,
    pub arity: u8,
    /// Binary predicate whose argument order carries no meaning; grounded
    /// atoms keep the lower object id first.
    pub symmetric: bool,
    pub source: Source,
}

impl PredicateSchema {
    pub fn new(name: impl Into<String>, arity: u8, source: Source) -> Self {
        PredicateSchema {
            name: name.into(),
            arity,
            symmetric: false,
            source,
        }
    }

    pub fn symmetric(mut self) -> Self {
        self.symmetric = true;
        self
    }
}

pub const ON: &str = "On";
pub const IN_HAND: &str = "InHand";
pub const ON_TOP: &str = "OnTop";
pub const IN_WORKSPACE: &str = "InWorkspace";
pub const CLOSE: &str = "Close";

/// The blocks-world predicate signature.
pub fn standard_predicates() -> Vec<PredicateSchema> {
    vec![
        PredicateSchema::new(ON, 2, Source::Learned),
        PredicateSchema::new(IN_HAND, 1, Source::Learned),
        PredicateSchema::new(ON_TOP, 1, Source::Learned),
        PredicateSchema::new(IN_WORKSPACE, 1, Source::Manual),
        PredicateSchema::new(CLOSE, 2, Source::Manual).symmetric(),
    ]
}

/// Index of a predicate schema within a signature.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PredId(pub u8);

impl PredId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// A predicate applied to concrete objects.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Atom {
    pub pred: PredId,
    arity: u8,
    args: [ObjectId; 2],
}

impl Atom {
    pub fn unary(pred: PredId, a: ObjectId) -> Self {
        Atom {
            pred,
            arity: 1,
            args: [a, ObjectId(0)],
        }
    }

    pub fn binary(pred: PredId, a: ObjectId, b: ObjectId) -> Self {
        Atom {
            pred,
            arity: 2,
            args: [a, b],
        }
    }

    pub fn args(&self) -> &[ObjectId] {
        &self.args[..self.arity as usize]
    }
}

/// Every well-formed atom: schema order, then lexicographic arguments.
/// Binary atoms never repeat an object; symmetric ones only appear with the
/// lower id first.
pub fn ground_all(universe: &Universe, schemas: &[PredicateSchema]) -> Vec<Atom> {
    let mut out = Vec::new();
    for (p, schema) in schemas.iter().enumerate() {
        let pred = PredId(p as u8);
        match schema.arity {
            1 => out.extend(universe.ids().map(|a| Atom::unary(pred, a))),
            2 => {
                for a in universe.ids() {
                    for b in universe.ids() {
                        if a == b || (schema.symmetric && b < a) {
                            continue;
                        }
                        out.push(Atom::binary(pred, a, b));
                    }
                }
            }
            n => panic!("unsupported predicate arity {n} for `{}`", schema.name),
        }
    }
    out
}

/// Resolved handles for the blocks-world predicates, when present.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct BlocksPredicates {
    pub on: Option<PredId>,
    pub in_hand: Option<PredId>,
    pub on_top: Option<PredId>,
    pub in_workspace: Option<PredId>,
    pub close: Option<PredId>,
}

/// A universe, a predicate signature, and the fixed atom ordering they induce.
#[derive(Clone, Debug)]
pub struct Vocabulary {
    universe: Universe,
    predicates: Vec<PredicateSchema>,
    atoms: Vec<Atom>,
    index: HashMap<Atom, usize>,
    blocks: BlocksPredicates,
}

impl Vocabulary {
    pub fn new(universe: Universe, predicates: Vec<PredicateSchema>) -> Self {
        let atoms = ground_all(&universe, &predicates);
        let index = atoms.iter().enumerate().map(|(i, a)| (*a, i)).collect();
        let find = |name: &str| predicates.iter().position(|p| p.name == name).map(|i| PredId(i as u8));
        let blocks = BlocksPredicates {
            on: find(ON),
            in_hand: find(IN_HAND),
            on_top: find(ON_TOP),
            in_workspace: find(IN_WORKSPACE),
            close: find(CLOSE),
        };
        Vocabulary {
            universe,
            predicates,
            atoms,
            index,
            blocks,
        }
    }

    /// Standard blocks signature over the four colored blocks.
    pub fn blocks_world() -> Self {
        Self::new(Universe::blocks(), standard_predicates())
    }

    pub fn universe(&self) -> &Universe {
        &self.universe
    }

    pub fn predicates(&self) -> &[PredicateSchema] {
        &self.predicates
    }

    pub fn predicate(&self, id: PredId) -> &PredicateSchema {
        &self.predicates[id.index()]
    }

    pub fn pred_id(&self, name: &str) -> Option<PredId> {
        self.predicates
            .iter()
            .position(|p| p.name == name)
            .map(|i| PredId(i as u8))
    }

    pub fn blocks(&self) -> &BlocksPredicates {
        &self.blocks
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn atom(&self, index: usize) -> &Atom {
        &self.atoms[index]
    }

    pub fn index_of(&self, atom: &Atom) -> Option<usize> {
        self.index.get(atom).copied()
    }

    /// Index of `pred(args)`, canonicalizing symmetric predicates. `None` for
    /// reflexive or otherwise ill-formed atoms.
    pub fn lookup(&self, pred: PredId, args: &[ObjectId]) -> Option<usize> {
        let schema = self.predicates.get(pred.index())?;
        let atom = match (schema.arity, args) {
            (1, [a]) => Atom::unary(pred, *a),
            (2, [a, b]) if schema.symmetric && b < a => Atom::binary(pred, *b, *a),
            (2, [a, b]) => Atom::binary(pred, *a, *b),
            _ => return None,
        };
        self.index_of(&atom)
    }

    pub fn empty_state(&self) -> LogicalState {
        LogicalState::with_atoms(self.atoms.len())
    }

    pub fn state_from<I: IntoIterator<Item = usize>>(&self, atoms: I) -> LogicalState {
        let mut s = self.empty_state();
        for a in atoms {
            s.insert(a);
        }
        s
    }

    /// Parses a comma-separated atom list into a state.
    pub fn parse_state(&self, text: &str) -> Result<LogicalState, LogicError> {
        Ok(self.state_from(self.parse_atom_list(text)?))
    }

    pub fn parse_atom_list(&self, text: &str) -> Result<Vec<usize>, LogicError> {
        split_atom_list(text).into_iter().map(|t| self.parse_atom(t)).collect()
    }

    /// Parses `Name(a)` / `Name(a,b)`; objects may be given by name or alias.
    pub fn parse_atom(&self, text: &str) -> Result<usize, LogicError> {
        let text = text.trim();
        let syntax = || LogicError::Syntax(text.to_string());
        let open = text.find('(').ok_or_else(syntax)?;
        if !text.ends_with(')') {
            return Err(syntax());
        }
        let name = &text[..open];
        let inner = &text[open + 1..text.len() - 1];
        if name.is_empty() || inner.is_empty() {
            return Err(syntax());
        }
        let pred = self
            .pred_id(name)
            .ok_or_else(|| LogicError::UnknownPredicate(name.to_string()))?;
        let args = inner
            .split(',')
            .map(|a| self.universe.resolve_or_err(a.trim()))
            .collect::<Result<Vec<_>, _>>()?;
        let schema = self.predicate(pred);
        if args.len() != schema.arity as usize {
            return Err(LogicError::ArityMismatch {
                name: name.to_string(),
                expected: schema.arity as usize,
                got: args.len(),
            });
        }
        self.lookup(pred, &args)
            .ok_or_else(|| LogicError::ReflexiveAtom(text.to_string()))
    }

    pub fn format_atom(&self, index: usize) -> String {
        let atom = &self.atoms[index];
        let args: Vec<&str> = atom.args().iter().map(|&o| self.universe.name(o)).collect();
        format!("{}({})", self.predicate(atom.pred).name, args.join(","))
    }

    pub fn format_state(&self, state: &LogicalState) -> Vec<String> {
        state.iter().map(|i| self.format_atom(i)).collect()
    }
}

/// Splits `On(a,b), OnTop(a)` at top-level commas.
pub(crate) fn split_atom_list(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, c) in text.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                out.push(text[start..i].trim());
                start = i + 1;
            }
            _ => {}
        }
    }
    let tail = text[start..].trim();
    if !tail.is_empty() {
        out.push(tail);
    }
    out.retain(|s| !s.is_empty());
    out
}

/// Set of atoms believed true, as a bitset over a [`Vocabulary`]'s ordering.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LogicalState {
    words: Vec<u64>,
}

impl LogicalState {
    pub fn with_atoms(n_atoms: usize) -> Self {
        LogicalState {
            words: vec![0; n_atoms.div_ceil(64)],
        }
    }

    #[inline]
    pub fn contains(&self, atom: usize) -> bool {
        self.words
            .get(atom / 64)
            .is_some_and(|w| w & (1u64 << (atom % 64)) != 0)
    }

    pub fn insert(&mut self, atom: usize) -> bool {
        let w = atom / 64;
        if w >= self.words.len() {
            self.words.resize(w + 1, 0);
        }
        let bit = 1u64 << (atom % 64);
        let fresh = self.words[w] & bit == 0;
        self.words[w] |= bit;
        fresh
    }

    pub fn remove(&mut self, atom: usize) -> bool {
        match self.words.get_mut(atom / 64) {
            Some(w) => {
                let bit = 1u64 << (atom % 64);
                let had = *w & bit != 0;
                *w &= !bit;
                had
            }
            None => false,
        }
    }

    pub fn set(&mut self, atom: usize, value: bool) {
        if value {
            self.insert(atom);
        } else {
            self.remove(atom);
        }
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    /// True atom indices in increasing order.
    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut bits = w;
            std::iter::from_fn(move || {
                if bits == 0 {
                    return None;
                }
                let tz = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(wi * 64 + tz)
            })
        })
    }

    pub fn is_subset(&self, other: &LogicalState) -> bool {
        self.words.iter().enumerate().all(|(i, &w)| {
            let o = other.words.get(i).copied().unwrap_or(0);
            w & !o == 0
        })
    }
}

impl FromIterator<usize> for LogicalState {
    fn from_iter<T: IntoIterator<Item = usize>>(iter: T) -> Self {
        let mut s = LogicalState::default();
        for a in iter {
            s.insert(a);
        }
        s
    }
}

/// Conjunction of atoms that must hold (positive goals only).
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct GoalConditions {
    atoms: Vec<usize>,
    mask: LogicalState,
}

impl GoalConditions {
    pub fn new<I: IntoIterator<Item = usize>>(atoms: I) -> Self {
        let mut atoms: Vec<usize> = atoms.into_iter().collect();
        atoms.sort_unstable();
        atoms.dedup();
        let mask = atoms.iter().copied().collect();
        GoalConditions { atoms, mask }
    }

    pub fn parse(vocab: &Vocabulary, text: &str) -> Result<Self, LogicError> {
        Ok(Self::new(vocab.parse_atom_list(text)?))
    }

    pub fn atoms(&self) -> &[usize] {
        &self.atoms
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn format(&self, vocab: &Vocabulary) -> String {
        self.atoms
            .iter()
            .map(|&a| vocab.format_atom(a))
            .collect::<Vec<_>>()
            .join(", ")
    }
}

/// Every goal atom is in `state`. The empty goal is always satisfied.
pub fn satisfies(state: &LogicalState, goal: &GoalConditions) -> bool {
    goal.mask.is_subset(state)
}

/// Physical sanity of a blocks-world state.
///
/// Holds iff `On` is functional in both directions and acyclic, at most one
/// block is held, a held block is not on/under anything and not `OnTop`, and
/// `OnTop(X)` holds exactly when `X` is not held and nothing is on it.
/// Predicates missing from the signature are treated as never true.
pub fn is_consistent(vocab: &Vocabulary, state: &LogicalState) -> bool {
    let n = vocab.universe().len();
    let preds = vocab.blocks();
    let holds =
        |p: Option<PredId>, args: &[ObjectId]| p.and_then(|p| vocab.lookup(p, args)).is_some_and(|i| state.contains(i));

    let mut below: Vec<Option<usize>> = vec![None; n];
    let mut above: Vec<Option<usize>> = vec![None; n];
    for x in vocab.universe().ids() {
        for y in vocab.universe().ids() {
            if x != y && holds(preds.on, &[x, y]) {
                if below[x.index()].replace(y.index()).is_some() {
                    return false;
                }
                if above[y.index()].replace(x.index()).is_some() {
                    return false;
                }
            }
        }
    }

    for start in 0..n {
        let mut cur = start;
        let mut steps = 0;
        while let Some(next) = below[cur] {
            cur = next;
            steps += 1;
            if steps > n {
                return false;
            }
        }
    }

    let mut held = 0;
    for x in vocab.universe().ids() {
        let in_hand = holds(preds.in_hand, &[x]);
        let on_top = holds(preds.on_top, &[x]);
        if in_hand {
            held += 1;
            if below[x.index()].is_some() || above[x.index()].is_some() || on_top {
                return false;
            }
        }
        let should_be_top = !in_hand && above[x.index()].is_none();
        if on_top != should_be_top {
            return false;
        }
    }
    held <= 1
}

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}
