//! Scenario files: initial layout plus one or more goals.
//!
//! ```text
//! # comment
//! blocks BlockRed=r BlockGreen=g BlockBlue=b BlockYellow=y
//! layout tower g b r y          # top to bottom, other blocks on the table
//! goal On(r,g), On(g,b), On(b,y)
//! ```
//!
//! `layout table` puts every block on the table. `layout custom` is
//! followed by `on X Y`, `held X`, `out X` (outside the workspace),
//! `lost X` (outside and unrecoverable) and `close X Y` lines. Several
//! `goal` lines are used in turn when the world is not reset between
//! episodes.

use thiserror::Error;

use super::{Support, WorldState};
use crate::logic::{GoalConditions, LogicError, ObjectId, PredicateSchema, Universe, Vocabulary};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ScenarioError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: {source}")]
    Logic { line: usize, source: LogicError },
    #[error("scenario has no goal")]
    NoGoal,
    #[error("scenario has no layout")]
    NoLayout,
    #[error("layout is not physically valid")]
    InvalidLayout,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CustomLayout {
    pub on: Vec<(ObjectId, ObjectId)>,
    pub held: Option<ObjectId>,
    pub out: Vec<ObjectId>,
    pub lost: Vec<ObjectId>,
    pub close: Vec<(ObjectId, ObjectId)>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Layout {
    Table,
    /// Top to bottom.
    Tower(Vec<ObjectId>),
    Custom(CustomLayout),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Scenario {
    pub name: String,
    pub layout: Layout,
    pub goals: Vec<GoalConditions>,
}

impl Scenario {
    /// All blocks on the table; build red on green on blue on yellow.
    pub fn stacking(vocab: &Vocabulary) -> Self {
        Scenario {
            name: "stacking".into(),
            layout: Layout::Table,
            goals: vec![tower_goal(vocab, &["r", "g", "b", "y"])],
        }
    }

    /// Reorder the tower green/blue/red/yellow into red/green/blue/yellow
    /// and back.
    pub fn reordering(vocab: &Vocabulary) -> Self {
        let u = vocab.universe();
        Scenario {
            name: "reordering".into(),
            layout: Layout::Tower(["g", "b", "r", "y"].iter().map(|s| u.resolve(s).unwrap()).collect()),
            goals: vec![
                tower_goal(vocab, &["r", "g", "b", "y"]),
                tower_goal(vocab, &["g", "b", "r", "y"]),
            ],
        }
    }

    /// Goal for the `episode`-th run when goals cycle.
    pub fn goal(&self, episode: usize) -> &GoalConditions {
        &self.goals[episode % self.goals.len()]
    }

    /// Fresh world for this layout.
    pub fn reset(&self, n_blocks: usize, seed: u64) -> Result<WorldState, ScenarioError> {
        let mut w = WorldState::new(n_blocks, seed);
        match &self.layout {
            Layout::Table => {}
            Layout::Tower(top_down) => {
                for pair in top_down.windows(2) {
                    w.support[pair[0].index()] = Support::Block(pair[1]);
                }
            }
            Layout::Custom(c) => {
                for &(x, y) in &c.on {
                    w.support[x.index()] = Support::Block(y);
                }
                if let Some(h) = c.held {
                    w.support[h.index()] = Support::Hand;
                }
                for &x in c.out.iter().chain(&c.lost) {
                    w.in_workspace[x.index()] = false;
                }
                for &x in &c.lost {
                    w.recoverable[x.index()] = false;
                }
                for &(a, b) in &c.close {
                    w.set_close(a, b);
                }
            }
        }
        if !w.is_valid() {
            return Err(ScenarioError::InvalidLayout);
        }
        if let Layout::Custom(c) = &self.layout {
            // a block carrying another or sitting on another cannot be held
            if let Some(h) = c.held {
                if w.above(h).is_some() {
                    return Err(ScenarioError::InvalidLayout);
                }
            }
        }
        Ok(w)
    }
}

/// Goal `top_down[0]` on `top_down[1]` on ... (short names or full names).
pub fn tower_goal(vocab: &Vocabulary, top_down: &[&str]) -> GoalConditions {
    let text: Vec<String> = top_down.windows(2).map(|p| format!("On({},{})", p[0], p[1])).collect();
    GoalConditions::parse(vocab, &text.join(", ")).expect("tower goal over known blocks")
}

/// Parses a scenario. Without a `blocks` line the standard four blocks are
/// used. Returns the vocabulary the scenario's atoms refer to.
pub fn parse_scenario(
    name: &str,
    text: &str,
    predicates: &[PredicateSchema],
) -> Result<(Vocabulary, Scenario), ScenarioError> {
    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty())
        .collect();

    let mut universe = None;
    for &(line, l) in &lines {
        if let Some(rest) = keyword(l, "blocks") {
            if universe.is_some() {
                return Err(syntax(line, "duplicate `blocks` line"));
            }
            let entries: Vec<(String, Option<String>)> = rest
                .split_whitespace()
                .map(|e| match e.split_once('=') {
                    Some((n, a)) => (n.to_string(), Some(a.to_string())),
                    None => (e.to_string(), None),
                })
                .collect();
            universe = Some(Universe::with_aliases(entries).map_err(|source| ScenarioError::Logic { line, source })?);
        }
    }
    let vocab = Vocabulary::new(universe.unwrap_or_else(Universe::blocks), predicates.to_vec());
    let u = vocab.universe();
    let obj = |line: usize, s: &str| {
        u.resolve_or_err(s)
            .map_err(|source| ScenarioError::Logic { line, source })
    };

    let mut layout = None;
    let mut goals = Vec::new();
    for &(line, l) in &lines {
        let mut words = l.split_whitespace();
        let head = words.next().unwrap_or("");
        let args: Vec<&str> = words.collect();
        let custom = |layout: &mut Option<Layout>| -> Result<(), ScenarioError> {
            match layout {
                Some(Layout::Custom(_)) => Ok(()),
                _ => Err(syntax(line, &format!("`{head}` outside a custom layout"))),
            }
        };
        let expect = |n: usize| {
            if args.len() == n {
                Ok(())
            } else {
                Err(syntax(line, &format!("`{head}` takes {n} argument(s)")))
            }
        };
        match head {
            "blocks" => {}
            "layout" => {
                if layout.is_some() {
                    return Err(syntax(line, "duplicate `layout` line"));
                }
                layout = Some(match args.first().copied() {
                    Some("table") if args.len() == 1 => Layout::Table,
                    Some("custom") if args.len() == 1 => Layout::Custom(CustomLayout::default()),
                    Some("tower") if args.len() >= 2 => {
                        let ids = args[1..].iter().map(|a| obj(line, a)).collect::<Result<Vec<_>, _>>()?;
                        let mut sorted = ids.clone();
                        sorted.sort();
                        sorted.dedup();
                        if sorted.len() != ids.len() {
                            return Err(syntax(line, "block repeated in tower"));
                        }
                        Layout::Tower(ids)
                    }
                    _ => return Err(syntax(line, "expected `layout table|tower X Y ...|custom`")),
                });
            }
            "on" | "close" => {
                custom(&mut layout)?;
                expect(2)?;
                let (a, b) = (obj(line, args[0])?, obj(line, args[1])?);
                if a == b {
                    return Err(syntax(line, "block related to itself"));
                }
                let Some(Layout::Custom(c)) = &mut layout else {
                    unreachable!()
                };
                if head == "on" {
                    c.on.push((a, b))
                } else {
                    c.close.push((a, b))
                }
            }
            "held" | "out" | "lost" => {
                custom(&mut layout)?;
                expect(1)?;
                let a = obj(line, args[0])?;
                let Some(Layout::Custom(c)) = &mut layout else {
                    unreachable!()
                };
                match head {
                    "held" if c.held.is_some() => return Err(syntax(line, "two held blocks")),
                    "held" => c.held = Some(a),
                    "out" => c.out.push(a),
                    _ => c.lost.push(a),
                }
            }
            "goal" => {
                let rest = keyword(l, "goal").unwrap_or("");
                let g = GoalConditions::parse(&vocab, rest).map_err(|source| ScenarioError::Logic { line, source })?;
                goals.push(g);
            }
            other => return Err(syntax(line, &format!("unknown directive `{other}`"))),
        }
    }
    let scenario = Scenario {
        name: name.to_string(),
        layout: layout.ok_or(ScenarioError::NoLayout)?,
        goals,
    };
    if scenario.goals.is_empty() {
        return Err(ScenarioError::NoGoal);
    }
    scenario.reset(vocab.universe().len(), 0)?;
    Ok((vocab, scenario))
}

fn keyword<'a>(line: &'a str, kw: &str) -> Option<&'a str> {
    let rest = line.strip_prefix(kw)?;
    (rest.is_empty() || rest.starts_with(char::is_whitespace)).then(|| rest.trim())
}

fn syntax(line: usize, message: &str) -> ScenarioError {
    ScenarioError::Syntax {
        line,
        message: message.to_string(),
    }
}
