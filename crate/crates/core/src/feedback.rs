//! Feedback rules (deterministic omniscient-mediator plans), pure deviation
//! strategies, and exact forward evaluation of mediated play.
//!
//! A feedback rule recommends a joint action profile at every decision cell.
//! A cell is a pair of a tree node `(h^t, ω^t)` and the profile of
//! recommendations issued at earlier stages; recommendation histories are a
//! free coordinate of the domain, so rules remain total maps even at
//! recommendation histories the rule itself never generates.

use crate::game::{Caps, GameError, GameTree, OutcomeDistribution};
use crate::rational::Rat;
use num::{BigUint, One, Zero};
use std::collections::BTreeMap;

/// A decision cell: tree node plus the recommendation history `â^{t-1}`
/// (one joint action profile index per earlier stage).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Cell {
    pub node: usize,
    pub rec_history: Vec<usize>,
}

/// The indexed set of decision cells of a game tree.
pub struct RuleSpace<'t, 'g> {
    pub tree: &'t GameTree<'g>,
    pub cells: Vec<Cell>,
    index: BTreeMap<(usize, Vec<usize>), usize>,
    /// Per cell: number of recommendable joint profiles at its stage.
    pub choices: Vec<usize>,
}

/// A deterministic recommendation plan: one joint profile index per cell.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct FeedbackRule {
    pub choice: Vec<usize>,
}

impl<'t, 'g> RuleSpace<'t, 'g> {
    pub fn build(tree: &'t GameTree<'g>) -> RuleSpace<'t, 'g> {
        let game = tree.game;
        let mut cells = Vec::new();
        let mut index = BTreeMap::new();
        let mut choices = Vec::new();
        for t in 0..game.stages {
            // Recommendation histories range over all profiles of earlier
            // stages, independent of the node.
            let mut histories: Vec<Vec<usize>> = vec![Vec::new()];
            for t2 in 0..t {
                let k = game.profile_count(t2);
                let mut next = Vec::with_capacity(histories.len() * k);
                for h in &histories {
                    for p in 0..k {
                        let mut h2 = h.clone();
                        h2.push(p);
                        next.push(h2);
                    }
                }
                histories = next;
            }
            for &node in &tree.stage_nodes[t] {
                for h in &histories {
                    index.insert((node, h.clone()), cells.len());
                    cells.push(Cell {
                        node,
                        rec_history: h.clone(),
                    });
                    choices.push(game.profile_count(t));
                }
            }
        }
        RuleSpace {
            tree,
            cells,
            index,
            choices,
        }
    }

    pub fn cell_index(&self, node: usize, rec_history: &[usize]) -> usize {
        *self
            .index
            .get(&(node, rec_history.to_vec()))
            .unwrap_or_else(|| panic!("no cell for node {node} with rec history {rec_history:?}"))
    }

    /// Total number of feedback rules: the product over cells of the number
    /// of recommendable profiles.
    pub fn rule_count(&self) -> BigUint {
        self.choices
            .iter()
            .fold(BigUint::one(), |acc, &c| acc * BigUint::from(c))
    }

    /// All feedback rules, in mixed-radix order. Errors if the count
    /// exceeds the cap.
    pub fn enumerate(&self, caps: &Caps) -> Result<Vec<FeedbackRule>, GameError> {
        let count = self.rule_count();
        if count > BigUint::from(caps.max_rules) {
            return Err(GameError::RuleCap {
                count,
                cap: caps.max_rules,
            });
        }
        let total: usize = count.try_into().expect("count fits after cap check");
        let mut rules = Vec::with_capacity(total);
        let mut current = vec![0usize; self.cells.len()];
        for _ in 0..total {
            rules.push(FeedbackRule {
                choice: current.clone(),
            });
            for i in (0..current.len()).rev() {
                current[i] += 1;
                if current[i] < self.choices[i] {
                    break;
                }
                current[i] = 0;
            }
        }
        Ok(rules)
    }

    /// Builds a rule from a function of the cell.
    pub fn rule_from_fn(&self, f: impl Fn(&Cell) -> usize) -> FeedbackRule {
        FeedbackRule {
            choice: self.cells.iter().map(f).collect(),
        }
    }

    /// Recommendation profiles a rule generates along the path to `node`,
    /// one per completed stage. Recommendations are encoded recursively: the
    /// cell consulted at stage t carries the recommendations the rule itself
    /// issued at stages before t along this path.
    pub fn recommendations_along(&self, rule: &FeedbackRule, node: usize) -> Vec<usize> {
        let mut path = Vec::new();
        let mut cur = Some(node);
        while let Some(id) = cur {
            path.push(id);
            cur = self.tree.nodes[id].parent.map(|(p, _)| p);
        }
        path.reverse();
        let mut recs = Vec::new();
        for &nid in &path {
            if self.tree.nodes[nid].children.is_empty() {
                break; // terminal
            }
            let cell = self.cell_index(nid, &recs);
            recs.push(rule.choice[cell]);
        }
        recs
    }
}

/// A private decision point of a player facing the mediator: everything the
/// player has seen when choosing the action at stage `own_actions.len()`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct DevState {
    /// Own signals `s_{i,1..t+1}`.
    pub own_signals: Vec<usize>,
    /// Own past actions `a_{i,1..t}`.
    pub own_actions: Vec<usize>,
    /// Own received recommendations `â_{i,1..t+1}`, including the current one.
    pub own_recs: Vec<usize>,
}

impl DevState {
    pub fn stage(&self) -> usize {
        self.own_actions.len()
    }
}

/// A pure deviation strategy: an action for every private decision point
/// reachable under the strategy's own earlier choices.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct DeviationStrategy {
    pub player: usize,
    pub choice: BTreeMap<DevState, usize>,
}

impl DeviationStrategy {
    /// The always-obey strategy over the reduced private tree.
    pub fn obedient(tree: &GameTree, player: usize) -> DeviationStrategy {
        let mut strat = DeviationStrategy {
            player,
            choice: BTreeMap::new(),
        };
        let mut frontier = initial_dev_states(tree, player);
        while let Some(state) = frontier.pop() {
            let act = *state.own_recs.last().expect("state has a current rec");
            let mut with_choice = state.clone();
            with_choice.own_actions.push(act);
            frontier.extend(next_dev_states(tree, player, &with_choice));
            strat.choice.insert(state, act);
        }
        strat
    }

    pub fn action_at(&self, state: &DevState) -> usize {
        *self
            .choice
            .get(state)
            .unwrap_or_else(|| panic!("deviation strategy undefined at {state:?}"))
    }

    /// True when the strategy obeys every recommendation it is defined on.
    pub fn is_obedient(&self) -> bool {
        self.choice
            .iter()
            .all(|(state, &act)| *state.own_recs.last().unwrap() == act)
    }
}

fn initial_dev_states(tree: &GameTree, player: usize) -> Vec<DevState> {
    let game = tree.game;
    let mut out = Vec::new();
    for s in 0..game.signals[player][0].len() {
        for r in 0..game.actions[player][0].len() {
            out.push(DevState {
                own_signals: vec![s],
                own_actions: Vec::new(),
                own_recs: vec![r],
            });
        }
    }
    out
}

/// Children of a private state once the action at its stage has been
/// committed (`state.own_actions` already extended).
fn next_dev_states(tree: &GameTree, player: usize, state: &DevState) -> Vec<DevState> {
    let game = tree.game;
    let t = state.own_actions.len();
    if t >= game.stages {
        return Vec::new();
    }
    let mut out = Vec::new();
    for s in 0..game.signals[player][t].len() {
        for r in 0..game.actions[player][t].len() {
            let mut child = state.clone();
            child.own_signals.push(s);
            child.own_recs.push(r);
            out.push(child);
        }
    }
    out
}

/// All pure continuation strategies rooted at one private decision point:
/// assignments of actions to that state and every own-play-consistent
/// descendant.
pub fn continuation_strategies(
    tree: &GameTree,
    player: usize,
    root: DevState,
    caps: &Caps,
) -> Result<Vec<BTreeMap<DevState, usize>>, GameError> {
    assignments_over(tree, player, &[root], caps)
}

/// Enumerates all reduced pure deviation strategies of a player: total on
/// private decision points reachable given the strategy's own play, pruned
/// elsewhere.
pub fn enumerate_deviations(
    tree: &GameTree,
    player: usize,
    caps: &Caps,
) -> Result<Vec<DeviationStrategy>, GameError> {
    let roots = initial_dev_states(tree, player);
    let maps = assignments_over(tree, player, &roots, caps)?;
    Ok(maps
        .into_iter()
        .map(|choice| DeviationStrategy { player, choice })
        .collect())
}

/// All assignments of actions to the forest of private states rooted at
/// `frontier`, expanding only own-play-consistent children.
fn assignments_over(
    tree: &GameTree,
    player: usize,
    frontier: &[DevState],
    caps: &Caps,
) -> Result<Vec<BTreeMap<DevState, usize>>, GameError> {
    let game = tree.game;
    let mut result: Vec<BTreeMap<DevState, usize>> = vec![BTreeMap::new()];
    for state in frontier {
        let t = state.stage();
        let mut per_state: Vec<BTreeMap<DevState, usize>> = Vec::new();
        for action in 0..game.actions[player][t].len() {
            let mut with_choice = state.clone();
            with_choice.own_actions.push(action);
            let children = next_dev_states(tree, player, &with_choice);
            for submap in assignments_over(tree, player, &children, caps)? {
                let mut m = submap;
                m.insert(state.clone(), action);
                per_state.push(m);
                if per_state.len() > caps.max_deviations {
                    return Err(GameError::DeviationCap {
                        cap: caps.max_deviations,
                    });
                }
            }
        }
        let mut combined = Vec::with_capacity(result.len() * per_state.len());
        for base in &result {
            for add in &per_state {
                let mut m = base.clone();
                m.extend(add.iter().map(|(k, v)| (k.clone(), *v)));
                combined.push(m);
                if combined.len() > caps.max_deviations {
                    return Err(GameError::DeviationCap {
                        cap: caps.max_deviations,
                    });
                }
            }
        }
        result = combined;
    }
    Ok(result)
}

/// Who plays what during forward evaluation.
pub enum PlayMode<'a> {
    /// Everyone follows recommendations.
    Obedient,
    /// One player follows a pure deviation; all others obey.
    Deviate(&'a DeviationStrategy),
}

/// Joint distribution over `(terminal, recommendation sequence)` produced by
/// a feedback rule under obedient play or a single-player deviation.
#[derive(Debug, Clone, Default)]
pub struct RecOutcome {
    pub weights: BTreeMap<(usize, Vec<usize>), Rat>,
}

impl RecOutcome {
    /// Marginal over terminal histories.
    pub fn marginal(&self, tree: &GameTree) -> OutcomeDistribution {
        let mut out = OutcomeDistribution::default();
        for ((node, _), w) in &self.weights {
            out.add(tree.terminal_history(*node), w.clone());
        }
        out
    }

    /// Expected payoff of one player.
    pub fn expected_payoff(&self, tree: &GameTree, player: usize) -> Rat {
        let mut total = Rat::zero();
        for ((node, _), w) in &self.weights {
            let term = tree.terminal_history(*node);
            let u = tree
                .game
                .payoff_vector(&term)
                .expect("validated game has total payoffs");
            total = total + &u[player] * w;
        }
        total
    }

    pub fn add(&mut self, key: (usize, Vec<usize>), prob: Rat) {
        if prob.is_zero() {
            return;
        }
        let slot = self.weights.entry(key).or_insert_with(Rat::zero);
        *slot = slot.clone() + prob;
    }

    pub fn scaled(&self, factor: &Rat) -> RecOutcome {
        RecOutcome {
            weights: self
                .weights
                .iter()
                .map(|(k, w)| (k.clone(), w * factor))
                .collect(),
        }
    }

    pub fn merge(&mut self, other: &RecOutcome) {
        for (k, w) in &other.weights {
            self.add(k.clone(), w.clone());
        }
    }
}

/// Exact forward evaluation: the mediator follows `rule`, players follow
/// `mode`. Returns the joint distribution over terminals and issued
/// recommendation sequences.
pub fn outcome_under(space: &RuleSpace, rule: &FeedbackRule, mode: PlayMode) -> RecOutcome {
    let tree = space.tree;
    let game = tree.game;
    let mut out = RecOutcome::default();
    let mut stack: Vec<(usize, Vec<usize>, Rat)> = Vec::new();
    for &root in &tree.stage_nodes[0] {
        stack.push((root, Vec::new(), tree.nodes[root].step_prob.clone()));
    }
    while let Some((nid, recs, prob)) = stack.pop() {
        let node = &tree.nodes[nid];
        if node.children.is_empty() {
            out.add((nid, recs), prob);
            continue;
        }
        let t = node.stage();
        let cell = space.cell_index(nid, &recs);
        let rec_profile_idx = rule.choice[cell];
        let rec_profile = game.decode_profile(t, rec_profile_idx);
        let mut actions = rec_profile.clone();
        if let PlayMode::Deviate(dev) = &mode {
            let i = dev.player;
            let own_signals: Vec<usize> = node.signals.iter().map(|s| s[i]).collect();
            let own_actions: Vec<usize> = node.actions.iter().map(|a| a[i]).collect();
            let mut own_recs: Vec<usize> = recs
                .iter()
                .enumerate()
                .map(|(t2, &p)| game.decode_profile(t2, p)[i])
                .collect();
            own_recs.push(rec_profile[i]);
            actions[i] = dev.action_at(&DevState {
                own_signals,
                own_actions,
                own_recs,
            });
        }
        let played = game.encode_profile(t, &actions);
        let mut next_recs = recs;
        next_recs.push(rec_profile_idx);
        for (child, p) in &node.children[played] {
            stack.push((*child, next_recs.clone(), &prob * p));
        }
    }
    out
}

/// Obedient-play distribution over terminals under a single rule.
pub fn obedient_outcome(space: &RuleSpace, rule: &FeedbackRule) -> OutcomeDistribution {
    outcome_under(space, rule, PlayMode::Obedient).marginal(space.tree)
}
