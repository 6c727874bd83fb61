//! Finite multi-stage base games: representation, validation, exact
//! enumeration of terminal histories, and payoff evaluation.
//!
//! A game has `T` stages. At each stage a state is drawn, every player
//! receives a private signal, and every player picks an action. Kernels give
//! the joint distribution of next-stage signals and state conditional on the
//! entire history so far, including the action profile just played. Signals,
//! states and actions are interned to dense indices; one-element sets stand
//! in for "no signal", "no state" or "inactive player" so every stage has a
//! uniform shape.
//!
//! Transition rows carry an explicit "recalled action" component so that the
//! perfect-recall requirement is a checkable property of the data rather
//! than a structural assumption: mass on a recalled profile different from
//! the profile actually played is a validation error.

use crate::rational::{format_rat, Rat};
use num::{One, Signed, Zero};
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

/// Hard caps on exhaustive enumeration. Exceeding a cap is an error, never
/// a silent truncation.
#[derive(Debug, Clone)]
pub struct Caps {
    pub max_histories: usize,
    pub max_rules: usize,
    pub max_deviations: usize,
}

impl Default for Caps {
    fn default() -> Self {
        Caps {
            max_histories: 1_000_000,
            max_rules: 100_000,
            max_deviations: 100_000,
        }
    }
}

#[derive(Debug, Error)]
pub enum GameError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("unknown name: {0}")]
    UnknownName(String),
    #[error("unknown player index {0}")]
    UnknownPlayer(usize),
    #[error("stage {0} out of range")]
    UnknownStage(usize),
    #[error("terminal history cap exceeded: {count} > {cap}")]
    HistoryCap { count: usize, cap: usize },
    #[error("feedback rule cap exceeded: {count} rules > {cap}")]
    RuleCap { count: num::BigUint, cap: usize },
    #[error("deviation cap exceeded: more than {cap} pure deviations")]
    DeviationCap { cap: usize },
    #[error("invalid game: {0}")]
    Invalid(String),
    #[error("no payoff recorded for terminal {0}")]
    MissingPayoff(String),
    #[error("internal error: {0}")]
    Internal(String),
}

/// Conditioning key of a transition kernel row: the complete history
/// `(a^t, s^t, ω^t)` through the stage whose actions were just played.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct PrefixKey {
    /// Action profiles `a_1..a_t`, indexed `[stage][player]`.
    pub actions: Vec<Vec<usize>>,
    /// Signal profiles `s_1..s_t`, indexed `[stage][player]`.
    pub signals: Vec<Vec<usize>>,
    /// States `ω_1..ω_t`.
    pub states: Vec<usize>,
}

/// One entry of a transition row: the probability of drawing
/// `(recalled, signals, state)` as the next stage's `(h_{t+1}, ω_{t+1})`.
/// Perfect recall requires `recalled` to match the played profile.
#[derive(Debug, Clone)]
pub struct TransitionEntry {
    pub recalled: Vec<usize>,
    pub signals: Vec<usize>,
    pub state: usize,
    pub prob: Rat,
}

/// One entry of the initial kernel `p_1`: probability of `(s_1, ω_1)`.
#[derive(Debug, Clone)]
pub struct InitialEntry {
    pub signals: Vec<usize>,
    pub state: usize,
    pub prob: Rat,
}

/// A terminal history `(h, ω)`: everything drawn and played through stage T.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TerminalHistory {
    pub actions: Vec<Vec<usize>>,
    pub signals: Vec<Vec<usize>>,
    pub states: Vec<usize>,
}

impl TerminalHistory {
    pub fn describe(&self, game: &BaseGame) -> String {
        let mut parts = Vec::new();
        for t in 0..game.stages {
            let acts: Vec<&str> = (0..game.players.len())
                .map(|i| game.actions[i][t][self.actions[t][i]].as_str())
                .collect();
            let sigs: Vec<&str> = (0..game.players.len())
                .map(|i| game.signals[i][t][self.signals[t][i]].as_str())
                .collect();
            parts.push(format!(
                "t{}:a=({}) s=({}) w={}",
                t + 1,
                acts.join(","),
                sigs.join(","),
                game.states[t][self.states[t]]
            ));
        }
        parts.join(" ")
    }
}

/// Exact distribution over terminal histories.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OutcomeDistribution {
    pub weights: BTreeMap<TerminalHistory, Rat>,
}

impl OutcomeDistribution {
    pub fn total(&self) -> Rat {
        self.weights.values().fold(Rat::zero(), |a, v| a + v)
    }

    pub fn add(&mut self, terminal: TerminalHistory, prob: Rat) {
        if prob.is_zero() {
            return;
        }
        let slot = self.weights.entry(terminal).or_insert_with(Rat::zero);
        *slot = slot.clone() + prob;
    }

    /// Checks nonnegativity, exact total of one, and support inside the
    /// game's terminal set.
    pub fn validate(&self, tree: &GameTree) -> Result<(), GameError> {
        for (term, w) in &self.weights {
            if w.is_negative() {
                return Err(GameError::Invalid(format!(
                    "negative weight {} on {}",
                    format_rat(w),
                    term.describe(tree.game)
                )));
            }
            if w.is_positive() && tree.terminal_index(term).is_none() {
                return Err(GameError::Invalid(format!(
                    "support outside terminal set: {}",
                    term.describe(tree.game)
                )));
            }
        }
        if self.total() != Rat::one() {
            return Err(GameError::Invalid(format!(
                "weights sum to {}, not 1",
                format_rat(&self.total())
            )));
        }
        Ok(())
    }

    pub fn expected_payoffs(&self, game: &BaseGame) -> Result<Vec<Rat>, GameError> {
        let n = game.players.len();
        let mut out = vec![Rat::zero(); n];
        for (term, w) in &self.weights {
            let u = game.payoff_vector(term)?;
            for i in 0..n {
                out[i] = out[i].clone() + &u[i] * w;
            }
        }
        Ok(out)
    }
}

/// A finite multi-stage base game.
#[derive(Debug, Clone)]
pub struct BaseGame {
    pub players: Vec<String>,
    pub stages: usize,
    /// `actions[i][t]` is the action set of player `i` at stage `t` (0-based).
    pub actions: Vec<Vec<Vec<String>>>,
    /// `signals[i][t]` is the signal set of player `i` at stage `t`.
    pub signals: Vec<Vec<Vec<String>>>,
    /// `states[t]` is the state set at stage `t`.
    pub states: Vec<Vec<String>>,
    pub initial: Vec<InitialEntry>,
    pub transitions: BTreeMap<PrefixKey, Vec<TransitionEntry>>,
    /// Payoffs per terminal history, one rational per player.
    pub payoffs: BTreeMap<TerminalHistory, Vec<Rat>>,
}

impl BaseGame {
    /// A game skeleton where every signal and state set is a one-element
    /// placeholder, to be overridden where a stage actually has information.
    pub fn with_shape(players: &[&str], stages: usize) -> BaseGame {
        let n = players.len();
        let singleton = || vec!["-".to_string()];
        BaseGame {
            players: players.iter().map(|p| p.to_string()).collect(),
            stages,
            actions: vec![vec![singleton(); stages]; n],
            signals: vec![vec![singleton(); stages]; n],
            states: vec![singleton(); stages],
            initial: Vec::new(),
            transitions: BTreeMap::new(),
            payoffs: BTreeMap::new(),
        }
    }

    pub fn n_players(&self) -> usize {
        self.players.len()
    }

    pub fn action_count(&self, player: usize, stage: usize) -> usize {
        self.actions[player][stage].len()
    }

    /// Number of joint action profiles at a stage.
    pub fn profile_count(&self, stage: usize) -> usize {
        (0..self.n_players())
            .map(|i| self.action_count(i, stage))
            .product()
    }

    /// Mixed-radix decoding of a joint action profile index.
    pub fn decode_profile(&self, stage: usize, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.n_players()];
        for i in (0..self.n_players()).rev() {
            let k = self.action_count(i, stage);
            out[i] = idx % k;
            idx /= k;
        }
        out
    }

    pub fn encode_profile(&self, stage: usize, profile: &[usize]) -> usize {
        let mut idx = 0;
        for i in 0..self.n_players() {
            idx = idx * self.action_count(i, stage) + profile[i];
        }
        idx
    }

    pub fn signal_profile_count(&self, stage: usize) -> usize {
        (0..self.n_players())
            .map(|i| self.signals[i][stage].len())
            .product()
    }

    pub fn decode_signal_profile(&self, stage: usize, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.n_players()];
        for i in (0..self.n_players()).rev() {
            let k = self.signals[i][stage].len();
            out[i] = idx % k;
            idx /= k;
        }
        out
    }

    pub fn action_index(&self, player: usize, stage: usize, name: &str) -> Result<usize, GameError> {
        self.actions[player][stage]
            .iter()
            .position(|a| a == name)
            .ok_or_else(|| GameError::UnknownName(format!("action {name} (player {player}, stage {stage})")))
    }

    pub fn state_index(&self, stage: usize, name: &str) -> Result<usize, GameError> {
        self.states[stage]
            .iter()
            .position(|a| a == name)
            .ok_or_else(|| GameError::UnknownName(format!("state {name} (stage {stage})")))
    }

    pub fn player_index(&self, name: &str) -> Result<usize, GameError> {
        self.players
            .iter()
            .position(|p| p == name)
            .ok_or_else(|| GameError::UnknownName(format!("player {name}")))
    }

    /// Records a payoff vector for every signal realization compatible with
    /// the given per-stage action profiles and states. Payoffs defined this
    /// way are signal-independent by construction.
    pub fn set_payoff(
        &mut self,
        actions: Vec<Vec<usize>>,
        states: Vec<usize>,
        values: Vec<Rat>,
    ) {
        let combos = self.all_signal_combos();
        for sig in combos {
            self.payoffs.insert(
                TerminalHistory {
                    actions: actions.clone(),
                    signals: sig,
                    states: states.clone(),
                },
                values.clone(),
            );
        }
    }

    fn all_signal_combos(&self) -> Vec<Vec<Vec<usize>>> {
        let mut combos: Vec<Vec<Vec<usize>>> = vec![Vec::new()];
        for t in 0..self.stages {
            let count = self.signal_profile_count(t);
            let mut next = Vec::with_capacity(combos.len() * count);
            for c in &combos {
                for idx in 0..count {
                    let mut c2 = c.clone();
                    c2.push(self.decode_signal_profile(t, idx));
                    next.push(c2);
                }
            }
            combos = next;
        }
        combos
    }

    /// `p^a(h, ω)`: the product of kernel probabilities along the terminal
    /// history, using the action profile embedded in it. Missing rows or
    /// entries contribute zero.
    pub fn outcome_probability(&self, terminal: &TerminalHistory) -> Rat {
        let mut prob = self
            .initial
            .iter()
            .find(|e| e.signals == terminal.signals[0] && e.state == terminal.states[0])
            .map(|e| e.prob.clone())
            .unwrap_or_else(Rat::zero);
        if prob.is_zero() {
            return prob;
        }
        for t in 0..self.stages.saturating_sub(1) {
            let key = PrefixKey {
                actions: terminal.actions[..=t].to_vec(),
                signals: terminal.signals[..=t].to_vec(),
                states: terminal.states[..=t].to_vec(),
            };
            let step = self
                .transitions
                .get(&key)
                .and_then(|row| {
                    row.iter().find(|e| {
                        e.recalled == terminal.actions[t]
                            && e.signals == terminal.signals[t + 1]
                            && e.state == terminal.states[t + 1]
                    })
                })
                .map(|e| e.prob.clone())
                .unwrap_or_else(Rat::zero);
            if step.is_zero() {
                return Rat::zero();
            }
            prob = prob * step;
        }
        prob
    }

    /// `u(h, ω)` for all players.
    pub fn payoff_vector(&self, terminal: &TerminalHistory) -> Result<Vec<Rat>, GameError> {
        self.payoffs
            .get(terminal)
            .cloned()
            .ok_or_else(|| GameError::MissingPayoff(terminal.describe(self)))
    }

    /// Player `i`'s private history through stage `t` (1-based, up to T+1):
    /// own signals and own past actions, ending with the own terminal action
    /// when `t = T+1`.
    pub fn private_history(
        &self,
        terminal: &TerminalHistory,
        player: usize,
        stage: usize,
    ) -> Result<PrivateHistory, GameError> {
        if player >= self.n_players() {
            return Err(GameError::UnknownPlayer(player));
        }
        if stage == 0 || stage > self.stages + 1 {
            return Err(GameError::UnknownStage(stage));
        }
        let mut entries = Vec::new();
        for t in 1..=stage {
            let prev_action = if t >= 2 {
                Some(terminal.actions[t - 2][player])
            } else {
                None
            };
            let signal = if t <= self.stages {
                Some(terminal.signals[t - 1][player])
            } else {
                None
            };
            entries.push((prev_action, signal));
        }
        Ok(PrivateHistory { player, entries })
    }
}

/// `h_i^t`: per stage, the player's own previous action (absent at stage 1)
/// and own current signal (absent at stage T+1).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrivateHistory {
    pub player: usize,
    pub entries: Vec<(Option<usize>, Option<usize>)>,
}

/// One problem found by validation.
#[derive(Debug, Clone)]
pub enum Violation {
    Shape(String),
    InitialKernelSum { sum: Rat },
    NegativeProbability { context: String },
    TransitionRowSum { context: String, sum: Rat },
    PerfectRecall { context: String },
    PayoffMissing { terminal: String },
    PayoffSignalDependence { context: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Shape(s) => write!(f, "shape: {s}"),
            Violation::InitialKernelSum { sum } => {
                write!(f, "initial_kernel row sums to {}, not 1", format_rat(sum))
            }
            Violation::NegativeProbability { context } => {
                write!(f, "negative probability at {context}")
            }
            Violation::TransitionRowSum { context, sum } => write!(
                f,
                "transition row at {context} sums to {}, not 1",
                format_rat(sum)
            ),
            Violation::PerfectRecall { context } => write!(
                f,
                "perfect recall violated: positive mass on mismatched recalled action at {context}"
            ),
            Violation::PayoffMissing { terminal } => {
                write!(f, "no payoff for terminal {terminal}")
            }
            Violation::PayoffSignalDependence { context } => {
                write!(f, "payoffs depend on signals at {context}")
            }
        }
    }
}

/// Everything wrong with a game; empty iff the game is valid.
#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub problems: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.problems.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.problems.is_empty() {
            writeln!(f, "valid")
        } else {
            for p in &self.problems {
                writeln!(f, "{p}")?;
            }
            Ok(())
        }
    }
}

/// Checks every structural invariant and reports all violations.
pub fn validate_game(game: &BaseGame) -> ValidationReport {
    let mut problems = Vec::new();
    let n = game.n_players();

    if game.actions.len() != n || game.signals.len() != n {
        problems.push(Violation::Shape(
            "actions/signals outer dimension must match player count".into(),
        ));
        return ValidationReport { problems };
    }
    if game.states.len() != game.stages {
        problems.push(Violation::Shape("states must have one set per stage".into()));
        return ValidationReport { problems };
    }
    for i in 0..n {
        if game.actions[i].len() != game.stages || game.signals[i].len() != game.stages {
            problems.push(Violation::Shape(format!(
                "player {i} must have one action and signal set per stage"
            )));
            return ValidationReport { problems };
        }
        for t in 0..game.stages {
            if game.actions[i][t].is_empty() || game.signals[i][t].is_empty() {
                problems.push(Violation::Shape(format!(
                    "empty action or signal set for player {i} at stage {t}"
                )));
            }
        }
    }
    for t in 0..game.stages {
        if game.states[t].is_empty() {
            problems.push(Violation::Shape(format!("empty state set at stage {t}")));
        }
    }
    if !problems.is_empty() {
        return ValidationReport { problems };
    }

    // Initial kernel.
    let mut init_sum = Rat::zero();
    for e in &game.initial {
        if e.prob.is_negative() {
            problems.push(Violation::NegativeProbability {
                context: "initial_kernel".into(),
            });
        }
        init_sum = init_sum + &e.prob;
    }
    if init_sum != Rat::one() {
        problems.push(Violation::InitialKernelSum { sum: init_sum });
    }

    // Perfect recall and row sums on every reachable prefix.
    let mut frontier: Vec<(Vec<Vec<usize>>, Vec<Vec<usize>>, Vec<usize>)> = game
        .initial
        .iter()
        .filter(|e| e.prob.is_positive())
        .map(|e| (Vec::new(), vec![e.signals.clone()], vec![e.state]))
        .collect();
    frontier.sort();
    frontier.dedup();

    for t in 0..game.stages.saturating_sub(1) {
        let mut next = Vec::new();
        for (acts, sigs, states) in &frontier {
            for pidx in 0..game.profile_count(t) {
                let profile = game.decode_profile(t, pidx);
                let mut key_actions = acts.clone();
                key_actions.push(profile.clone());
                let key = PrefixKey {
                    actions: key_actions.clone(),
                    signals: sigs.clone(),
                    states: states.clone(),
                };
                let context = describe_prefix(game, &key);
                let mut sum = Rat::zero();
                if let Some(row) = game.transitions.get(&key) {
                    for e in row {
                        if e.prob.is_negative() {
                            problems.push(Violation::NegativeProbability {
                                context: context.clone(),
                            });
                        }
                        if e.recalled != profile && !e.prob.is_zero() {
                            problems.push(Violation::PerfectRecall {
                                context: context.clone(),
                            });
                        }
                        sum = sum + &e.prob;
                        if e.prob.is_positive() && e.recalled == profile {
                            let mut sigs2 = sigs.clone();
                            sigs2.push(e.signals.clone());
                            let mut states2 = states.clone();
                            states2.push(e.state);
                            next.push((key_actions.clone(), sigs2, states2));
                        }
                    }
                }
                if sum != Rat::one() {
                    problems.push(Violation::TransitionRowSum { context, sum });
                }
            }
        }
        next.sort();
        next.dedup();
        frontier = next;
    }

    // Payoff totality and signal-independence over all terminals.
    let mut groups: BTreeMap<(Vec<Vec<usize>>, Vec<usize>), Vec<Rat>> = BTreeMap::new();
    for (acts, sigs, states) in &frontier {
        let t = game.stages - 1;
        for pidx in 0..game.profile_count(t) {
            let profile = game.decode_profile(t, pidx);
            let mut actions = acts.clone();
            actions.push(profile);
            let terminal = TerminalHistory {
                actions: actions.clone(),
                signals: sigs.clone(),
                states: states.clone(),
            };
            match game.payoffs.get(&terminal) {
                None => problems.push(Violation::PayoffMissing {
                    terminal: terminal.describe(game),
                }),
                Some(u) => {
                    if u.len() != n {
                        problems.push(Violation::Shape(format!(
                            "payoff vector for {} has {} entries, expected {n}",
                            terminal.describe(game),
                            u.len()
                        )));
                        continue;
                    }
                    let key = (actions, states.clone());
                    match groups.get(&key) {
                        None => {
                            groups.insert(key, u.clone());
                        }
                        Some(prev) if prev == u => {}
                        Some(_) => problems.push(Violation::PayoffSignalDependence {
                            context: terminal.describe(game),
                        }),
                    }
                }
            }
        }
    }

    ValidationReport { problems }
}

fn describe_prefix(game: &BaseGame, key: &PrefixKey) -> String {
    let t = key.actions.len();
    let mut parts = Vec::new();
    for stage in 0..t {
        let acts: Vec<&str> = (0..game.n_players())
            .map(|i| game.actions[i][stage][key.actions[stage][i]].as_str())
            .collect();
        parts.push(format!("a{}=({})", stage + 1, acts.join(",")));
    }
    for stage in 0..key.states.len() {
        parts.push(format!(
            "w{}={}",
            stage + 1,
            game.states[stage][key.states[stage]]
        ));
    }
    parts.join(" ")
}

/// A node of the enumerated game tree: the complete history at the
/// beginning of a stage (decision node) or after the last stage (terminal).
#[derive(Debug, Clone)]
pub struct Node {
    pub id: usize,
    pub parent: Option<(usize, usize)>,
    /// `a_1..a_{t-1}` for a decision node at stage `t`; `a_1..a_T` at a
    /// terminal.
    pub actions: Vec<Vec<usize>>,
    /// `s_1..s_t`, one profile per completed draw.
    pub signals: Vec<Vec<usize>>,
    /// `ω_1..ω_t`.
    pub states: Vec<usize>,
    /// Probability of this node's last chance draw given its parent.
    pub step_prob: Rat,
    /// Product of chance draws along the path (equals `p^a(h,ω)` at a
    /// terminal for the embedded action profile).
    pub chance_prob: Rat,
    /// Per action profile index: successor nodes with step probabilities.
    pub children: Vec<Vec<(usize, Rat)>>,
}

impl Node {
    /// 0-based stage of the decision taken at this node.
    pub fn stage(&self) -> usize {
        self.actions.len()
    }
}

/// The interned tree of all reachable histories of a valid game.
pub struct GameTree<'g> {
    pub game: &'g BaseGame,
    pub nodes: Vec<Node>,
    /// Decision node ids by 0-based stage.
    pub stage_nodes: Vec<Vec<usize>>,
    /// Terminal node ids, in construction (depth-first stable) order.
    pub terminals: Vec<usize>,
    terminal_lookup: BTreeMap<TerminalHistory, usize>,
    node_lookup: BTreeMap<(Vec<Vec<usize>>, Vec<Vec<usize>>, Vec<usize>), usize>,
}

impl<'g> GameTree<'g> {
    /// Enumerates every reachable history. Requires a validated game;
    /// missing kernel rows are treated as all-zero.
    pub fn build(game: &'g BaseGame, caps: &Caps) -> Result<GameTree<'g>, GameError> {
        let mut tree = GameTree {
            game,
            nodes: Vec::new(),
            stage_nodes: vec![Vec::new(); game.stages],
            terminals: Vec::new(),
            terminal_lookup: BTreeMap::new(),
            node_lookup: BTreeMap::new(),
        };
        let mut frontier: Vec<usize> = Vec::new();
        for e in &game.initial {
            if !e.prob.is_positive() {
                continue;
            }
            let id = tree.nodes.len();
            tree.nodes.push(Node {
                id,
                parent: None,
                actions: Vec::new(),
                signals: vec![e.signals.clone()],
                states: vec![e.state],
                step_prob: e.prob.clone(),
                chance_prob: e.prob.clone(),
                children: vec![Vec::new(); game.profile_count(0)],
            });
            tree.stage_nodes[0].push(id);
            frontier.push(id);
        }

        for t in 0..game.stages {
            let mut next_frontier = Vec::new();
            for &nid in &frontier {
                for pidx in 0..game.profile_count(t) {
                    let profile = game.decode_profile(t, pidx);
                    let mut actions = tree.nodes[nid].actions.clone();
                    actions.push(profile.clone());
                    if t + 1 == game.stages {
                        // Trivial stage-(T+1) draw: a single terminal child.
                        let terminal = TerminalHistory {
                            actions: actions.clone(),
                            signals: tree.nodes[nid].signals.clone(),
                            states: tree.nodes[nid].states.clone(),
                        };
                        let id = tree.nodes.len();
                        let chance = tree.nodes[nid].chance_prob.clone();
                        tree.nodes.push(Node {
                            id,
                            parent: Some((nid, pidx)),
                            actions,
                            signals: tree.nodes[nid].signals.clone(),
                            states: tree.nodes[nid].states.clone(),
                            step_prob: Rat::one(),
                            chance_prob: chance,
                            children: Vec::new(),
                        });
                        tree.nodes[nid].children[pidx].push((id, Rat::one()));
                        tree.terminals.push(id);
                        tree.terminal_lookup.insert(terminal, id);
                    } else {
                        let key = PrefixKey {
                            actions: actions.clone(),
                            signals: tree.nodes[nid].signals.clone(),
                            states: tree.nodes[nid].states.clone(),
                        };
                        let Some(row) = game.transitions.get(&key) else {
                            continue;
                        };
                        for e in row {
                            if !e.prob.is_positive() || e.recalled != profile {
                                continue;
                            }
                            let id = tree.nodes.len();
                            let mut signals = tree.nodes[nid].signals.clone();
                            signals.push(e.signals.clone());
                            let mut states = tree.nodes[nid].states.clone();
                            states.push(e.state);
                            let chance = &tree.nodes[nid].chance_prob * &e.prob;
                            tree.nodes.push(Node {
                                id,
                                parent: Some((nid, pidx)),
                                actions: actions.clone(),
                                signals,
                                states,
                                step_prob: e.prob.clone(),
                                chance_prob: chance,
                                children: vec![Vec::new(); game.profile_count(t + 1)],
                            });
                            tree.nodes[nid].children[pidx].push((id, e.prob.clone()));
                            tree.stage_nodes[t + 1].push(id);
                            next_frontier.push(id);
                        }
                    }
                    if tree.nodes.len() > caps.max_histories {
                        return Err(GameError::HistoryCap {
                            count: tree.nodes.len(),
                            cap: caps.max_histories,
                        });
                    }
                }
            }
            frontier = next_frontier;
        }
        for node in &tree.nodes {
            tree.node_lookup.insert(
                (node.actions.clone(), node.signals.clone(), node.states.clone()),
                node.id,
            );
        }
        Ok(tree)
    }

    /// Finds the node with the given complete history vectors, if reachable.
    pub fn find_node(
        &self,
        actions: &[Vec<usize>],
        signals: &[Vec<usize>],
        states: &[usize],
    ) -> Option<usize> {
        self.node_lookup
            .get(&(actions.to_vec(), signals.to_vec(), states.to_vec()))
            .copied()
    }

    pub fn terminal_history(&self, node: usize) -> TerminalHistory {
        let n = &self.nodes[node];
        TerminalHistory {
            actions: n.actions.clone(),
            signals: n.signals.clone(),
            states: n.states.clone(),
        }
    }

    pub fn terminal_index(&self, terminal: &TerminalHistory) -> Option<usize> {
        self.terminal_lookup.get(terminal).copied()
    }

    /// All terminal histories, i.e. the set `HΩ`.
    pub fn terminal_histories(&self) -> Vec<TerminalHistory> {
        self.terminals
            .iter()
            .map(|&id| self.terminal_history(id))
            .collect()
    }
}

/// Enumerates `HΩ` exactly: all `(h, ω)` with `p^a(h, ω) > 0` for the
/// embedded action profile.
pub fn enumerate_terminal_histories(
    game: &BaseGame,
    caps: &Caps,
) -> Result<Vec<TerminalHistory>, GameError> {
    Ok(GameTree::build(game, caps)?.terminal_histories())
}

/// Inserts the deterministic transition row for every reachable prefix
/// whose next stage draws from all-singleton signal and state sets. Lets
/// scenario builders write only the informative kernels. Stages are filled
/// in order, so reachability accounts for rows added at earlier stages.
pub fn fill_trivial_transitions(game: &mut BaseGame) {
    let n = game.n_players();
    let mut frontier: Vec<(Vec<Vec<usize>>, Vec<Vec<usize>>, Vec<usize>)> = game
        .initial
        .iter()
        .filter(|e| e.prob.is_positive())
        .map(|e| (Vec::new(), vec![e.signals.clone()], vec![e.state]))
        .collect();
    for t in 0..game.stages.saturating_sub(1) {
        let trivial_next = (0..n).all(|i| game.signals[i][t + 1].len() == 1)
            && game.states[t + 1].len() == 1;
        let mut next = Vec::new();
        for (acts, sigs, states) in &frontier {
            for pidx in 0..game.profile_count(t) {
                let profile = game.decode_profile(t, pidx);
                let mut key_actions = acts.clone();
                key_actions.push(profile.clone());
                let key = PrefixKey {
                    actions: key_actions.clone(),
                    signals: sigs.clone(),
                    states: states.clone(),
                };
                if trivial_next && !game.transitions.contains_key(&key) {
                    game.transitions.insert(
                        key.clone(),
                        vec![TransitionEntry {
                            recalled: profile.clone(),
                            signals: vec![0; n],
                            state: 0,
                            prob: Rat::one(),
                        }],
                    );
                }
                if let Some(row) = game.transitions.get(&key) {
                    for e in row {
                        if e.prob.is_positive() && e.recalled == profile {
                            let mut sigs2 = sigs.clone();
                            sigs2.push(e.signals.clone());
                            let mut states2 = states.clone();
                            states2.push(e.state);
                            next.push((key_actions.clone(), sigs2, states2));
                        }
                    }
                }
            }
        }
        next.sort();
        next.dedup();
        frontier = next;
    }
}

/// All reachable beginning-of-stage histories, one list per stage: entries
/// are `(a^{t-1}, s^t, ω^t)` triples.
pub fn reachable_histories(
    game: &BaseGame,
) -> Vec<Vec<(Vec<Vec<usize>>, Vec<Vec<usize>>, Vec<usize>)>> {
    let mut per_stage = Vec::with_capacity(game.stages);
    let mut frontier: Vec<(Vec<Vec<usize>>, Vec<Vec<usize>>, Vec<usize>)> = game
        .initial
        .iter()
        .filter(|e| e.prob.is_positive())
        .map(|e| (Vec::new(), vec![e.signals.clone()], vec![e.state]))
        .collect();
    frontier.sort();
    frontier.dedup();
    per_stage.push(frontier.clone());
    for t in 0..game.stages.saturating_sub(1) {
        let mut next = Vec::new();
        for (acts, sigs, states) in &frontier {
            for pidx in 0..game.profile_count(t) {
                let profile = game.decode_profile(t, pidx);
                let mut key_actions = acts.clone();
                key_actions.push(profile.clone());
                let key = PrefixKey {
                    actions: key_actions.clone(),
                    signals: sigs.clone(),
                    states: states.clone(),
                };
                if let Some(row) = game.transitions.get(&key) {
                    for e in row {
                        if e.prob.is_positive() && e.recalled == profile {
                            let mut sigs2 = sigs.clone();
                            sigs2.push(e.signals.clone());
                            let mut states2 = states.clone();
                            states2.push(e.state);
                            next.push((key_actions.clone(), sigs2, states2));
                        }
                    }
                }
            }
        }
        next.sort();
        next.dedup();
        per_stage.push(next.clone());
        frontier = next;
    }
    per_stage
}
