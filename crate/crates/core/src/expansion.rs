//! Expansions of a base game: extra private signals drawn by kernels that
//! condition on past and current states, signals and actions.
//!
//! The module distinguishes two objects. An [`Expansion`] is the structured
//! form `(M, ξ)`: message sets plus kernels measurable in the mediator's
//! information, which always induces a well-defined game. A
//! [`KernelFamily`] is an arbitrary stage-indexed family of joint kernels
//! π over signals, messages and states; such a family may satisfy the
//! marginal consistency condition without arising from any `(M, ξ)`, and
//! [`factorization_test`] decides which.

use crate::feedback::RuleSpace;
use crate::game::{
    BaseGame, Caps, GameError, GameTree, InitialEntry, OutcomeDistribution, PrefixKey,
    TerminalHistory, TransitionEntry,
};
use crate::rational::{format_rat, Rat};
use crate::refine::kernels_from_mixture;
use crate::solver::BceMixture;
use num::{One, Signed, Zero};
use std::collections::BTreeMap;

/// Conditioning key of a ξ kernel: everything observable when the stage-t
/// messages are drawn. Lengths encode the stage: `signals` and `states`
/// have `t` entries, `actions` and `messages` have `t-1`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct XiKey {
    pub actions: Vec<Vec<usize>>,
    pub signals: Vec<Vec<usize>>,
    pub messages: Vec<Vec<usize>>,
    pub states: Vec<usize>,
}

/// An expansion `(M, ξ)`: per-player message sets and message kernels.
#[derive(Debug, Clone)]
pub struct Expansion {
    /// `message_sets[i][t]` is the additional-signal set of player `i` at
    /// stage `t`.
    pub message_sets: Vec<Vec<Vec<String>>>,
    /// ξ rows: distribution over joint message profiles.
    pub rows: BTreeMap<XiKey, Vec<(Vec<usize>, Rat)>>,
}

impl Expansion {
    /// The null expansion: every message set is a singleton.
    pub fn null(game: &BaseGame) -> Expansion {
        let n = game.n_players();
        Expansion {
            message_sets: vec![vec![vec!["-".to_string()]; game.stages]; n],
            rows: BTreeMap::new(),
        }
    }

    pub fn message_profile_count(&self, stage: usize) -> usize {
        self.message_sets
            .iter()
            .map(|per_player| per_player[stage].len())
            .product()
    }

    pub fn decode_message_profile(&self, stage: usize, mut idx: usize) -> Vec<usize> {
        let n = self.message_sets.len();
        let mut out = vec![0; n];
        for i in (0..n).rev() {
            let k = self.message_sets[i][stage].len();
            out[i] = idx % k;
            idx /= k;
        }
        out
    }

    /// Row lookup with a deterministic fallback for totally uninformative
    /// singleton stages: absent rows are treated as "draw the only profile"
    /// when the stage's message sets are all singletons.
    fn row(&self, key: &XiKey, stage: usize) -> Option<Vec<(Vec<usize>, Rat)>> {
        if let Some(r) = self.rows.get(key) {
            return Some(r.clone());
        }
        if self.message_profile_count(stage) == 1 {
            let n = self.message_sets.len();
            return Some(vec![(vec![0; n], Rat::one())]);
        }
        None
    }
}

/// The game induced by an expansion: stage-t signals become
/// (base signal, message) pairs; kernels are the products `ξ·p`; payoffs
/// ignore messages.
pub struct InducedGame {
    pub game: BaseGame,
    /// Base signal-set sizes, to split combined indices.
    pub base_signal_counts: Vec<Vec<usize>>,
    /// Message-set sizes per player and stage.
    pub message_counts: Vec<Vec<usize>>,
    /// The π kernels recorded while inducing.
    pub kernels: KernelFamily,
}

impl InducedGame {
    /// Splits a combined signal index into (base signal, message).
    pub fn split_signal(&self, player: usize, stage: usize, combined: usize) -> (usize, usize) {
        let m = self.message_counts[player][stage];
        (combined / m, combined % m)
    }

    pub fn combine_signal(&self, player: usize, stage: usize, base: usize, message: usize) -> usize {
        base * self.message_counts[player][stage] + message
    }

    /// Projects a terminal history of the induced game onto the base game's
    /// terminal set by dropping messages.
    pub fn project_terminal(&self, terminal: &TerminalHistory) -> TerminalHistory {
        let n = self.game.n_players();
        TerminalHistory {
            actions: terminal.actions.clone(),
            signals: terminal
                .signals
                .iter()
                .enumerate()
                .map(|(t, prof)| {
                    (0..n)
                        .map(|i| self.split_signal(i, t, prof[i]).0)
                        .collect()
                })
                .collect(),
            states: terminal.states.clone(),
        }
    }

    /// Projects an outcome distribution of the induced game onto base
    /// terminal histories.
    pub fn project_outcome(&self, dist: &OutcomeDistribution) -> OutcomeDistribution {
        let mut out = OutcomeDistribution::default();
        for (term, w) in &dist.weights {
            out.add(self.project_terminal(term), w.clone());
        }
        out
    }
}

/// Builds the induced multi-stage game `Γ_π` from a base game and an
/// expansion. The result passes validation whenever the expansion's rows
/// are total on reachable histories and sum to one.
pub fn induce_game(game: &BaseGame, exp: &Expansion) -> Result<InducedGame, GameError> {
    let n = game.n_players();
    if exp.message_sets.len() != n {
        return Err(GameError::Shape(
            "expansion must carry one message-set list per player".into(),
        ));
    }
    for (i, per_player) in exp.message_sets.iter().enumerate() {
        if per_player.len() != game.stages {
            return Err(GameError::Shape(format!(
                "player {i} must have one message set per stage"
            )));
        }
        if per_player.iter().any(|m| m.is_empty()) {
            return Err(GameError::Shape(format!(
                "player {i} has an empty message set"
            )));
        }
    }

    let mut induced = BaseGame::with_shape(
        &game.players.iter().map(|s| s.as_str()).collect::<Vec<_>>(),
        game.stages,
    );
    induced.actions = game.actions.clone();
    induced.states = game.states.clone();
    for i in 0..n {
        for t in 0..game.stages {
            let mut combined = Vec::new();
            for s in &game.signals[i][t] {
                for m in &exp.message_sets[i][t] {
                    combined.push(format!("{s}|{m}"));
                }
            }
            induced.signals[i][t] = combined;
        }
    }
    let base_signal_counts: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..game.stages).map(|t| game.signals[i][t].len()).collect())
        .collect();
    let message_counts: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            (0..game.stages)
                .map(|t| exp.message_sets[i][t].len())
                .collect()
        })
        .collect();
    let combine = |i: usize, t: usize, s: usize, m: usize| s * message_counts[i][t] + m;

    let mut kernels = KernelFamily {
        message_sets: exp.message_sets.clone(),
        initial: Vec::new(),
        rows: BTreeMap::new(),
    };

    // Initial draw: p_1 × ξ_1.
    for e in &game.initial {
        if !e.prob.is_positive() {
            continue;
        }
        let key = XiKey {
            actions: Vec::new(),
            signals: vec![e.signals.clone()],
            messages: Vec::new(),
            states: vec![e.state],
        };
        let row = exp.row(&key, 0).ok_or_else(|| {
            GameError::Shape("missing xi row for a reachable initial history".into())
        })?;
        for (msg_profile, q) in &row {
            if !q.is_positive() {
                continue;
            }
            let combined: Vec<usize> = (0..n)
                .map(|i| combine(i, 0, e.signals[i], msg_profile[i]))
                .collect();
            induced.initial.push(InitialEntry {
                signals: combined,
                state: e.state,
                prob: &e.prob * q,
            });
            kernels.initial.push((
                e.signals.clone(),
                msg_profile.clone(),
                e.state,
                &e.prob * q,
            ));
        }
    }

    // Walk induced reachable prefixes: (base actions, base signals, states,
    // message history).
    type Pref = (Vec<Vec<usize>>, Vec<Vec<usize>>, Vec<usize>, Vec<Vec<usize>>);
    let mut frontier: Vec<Pref> = Vec::new();
    for e in &game.initial {
        if !e.prob.is_positive() {
            continue;
        }
        let key = XiKey {
            actions: Vec::new(),
            signals: vec![e.signals.clone()],
            messages: Vec::new(),
            states: vec![e.state],
        };
        if let Some(row) = exp.row(&key, 0) {
            for (msg_profile, q) in &row {
                if q.is_positive() {
                    frontier.push((
                        Vec::new(),
                        vec![e.signals.clone()],
                        vec![e.state],
                        vec![msg_profile.clone()],
                    ));
                }
            }
        }
    }
    frontier.sort();
    frontier.dedup();

    for t in 0..game.stages.saturating_sub(1) {
        let mut next = Vec::new();
        for (acts, sigs, states, msgs) in &frontier {
            for pidx in 0..game.profile_count(t) {
                let profile = game.decode_profile(t, pidx);
                let mut key_actions = acts.clone();
                key_actions.push(profile.clone());
                let base_key = PrefixKey {
                    actions: key_actions.clone(),
                    signals: sigs.clone(),
                    states: states.clone(),
                };
                let Some(base_row) = game.transitions.get(&base_key) else {
                    continue;
                };
                let induced_key = PrefixKey {
                    actions: key_actions.clone(),
                    signals: combine_signal_history(sigs, msgs, &message_counts),
                    states: states.clone(),
                };
                let pi_key = PiKey {
                    actions: key_actions.clone(),
                    signals: sigs.clone(),
                    messages: msgs.clone(),
                    states: states.clone(),
                };
                let mut induced_row = Vec::new();
                let mut pi_row = Vec::new();
                for e in base_row {
                    if !e.prob.is_positive() || e.recalled != profile {
                        continue;
                    }
                    let mut sig_hist = sigs.clone();
                    sig_hist.push(e.signals.clone());
                    let mut state_hist = states.clone();
                    state_hist.push(e.state);
                    let xi_key = XiKey {
                        actions: key_actions.clone(),
                        signals: sig_hist.clone(),
                        messages: msgs.clone(),
                        states: state_hist.clone(),
                    };
                    let xi_row = exp.row(&xi_key, t + 1).ok_or_else(|| {
                        GameError::Shape(
                            "missing xi row for a reachable history".into(),
                        )
                    })?;
                    for (msg_profile, q) in &xi_row {
                        if !q.is_positive() {
                            continue;
                        }
                        let combined: Vec<usize> = (0..n)
                            .map(|i| combine(i, t + 1, e.signals[i], msg_profile[i]))
                            .collect();
                        induced_row.push(TransitionEntry {
                            recalled: profile.clone(),
                            signals: combined,
                            state: e.state,
                            prob: &e.prob * q,
                        });
                        pi_row.push(PiEntry {
                            recalled: profile.clone(),
                            signals: e.signals.clone(),
                            messages: msg_profile.clone(),
                            state: e.state,
                            prob: &e.prob * q,
                        });
                        let mut msgs2 = msgs.clone();
                        msgs2.push(msg_profile.clone());
                        next.push((key_actions.clone(), sig_hist.clone(), state_hist.clone(), msgs2));
                    }
                }
                induced.transitions.insert(induced_key, induced_row);
                kernels.rows.insert(pi_key, pi_row);
            }
        }
        next.sort();
        next.dedup();
        frontier = next;
    }

    // Payoffs ignore messages.
    for (acts, sigs, states, msgs) in &frontier {
        let t = game.stages - 1;
        for pidx in 0..game.profile_count(t) {
            let profile = game.decode_profile(t, pidx);
            let mut actions = acts.clone();
            actions.push(profile);
            let base_terminal = TerminalHistory {
                actions: actions.clone(),
                signals: sigs.clone(),
                states: states.clone(),
            };
            let Some(u) = game.payoffs.get(&base_terminal) else {
                continue;
            };
            let induced_terminal = TerminalHistory {
                actions,
                signals: combine_signal_history(sigs, msgs, &message_counts),
                states: states.clone(),
            };
            induced.payoffs.insert(induced_terminal, u.clone());
        }
    }
    // Unreachable-but-possible terminals still need payoffs for totality
    // under validation; the reachable walk above covers exactly HMΩ.

    Ok(InducedGame {
        game: induced,
        base_signal_counts,
        message_counts,
        kernels,
    })
}

fn combine_signal_history(
    sigs: &[Vec<usize>],
    msgs: &[Vec<usize>],
    message_counts: &[Vec<usize>],
) -> Vec<Vec<usize>> {
    sigs.iter()
        .zip(msgs)
        .enumerate()
        .map(|(t, (s, m))| {
            (0..s.len())
                .map(|i| s[i] * message_counts[i][t] + m[i])
                .collect()
        })
        .collect()
}

/// Conditioning key of a raw π kernel: complete history including current
/// actions (`actions` has `t` entries, like `signals`, `messages`, `states`).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct PiKey {
    pub actions: Vec<Vec<usize>>,
    pub signals: Vec<Vec<usize>>,
    pub messages: Vec<Vec<usize>>,
    pub states: Vec<usize>,
}

/// One entry of a π row: joint draw of next-stage signals, messages and
/// state, with the recalled-action component kept explicit.
#[derive(Debug, Clone)]
pub struct PiEntry {
    pub recalled: Vec<usize>,
    pub signals: Vec<usize>,
    pub messages: Vec<usize>,
    pub state: usize,
    pub prob: Rat,
}

/// An arbitrary stage-indexed kernel family π over signals, messages and
/// states; not necessarily arising from any expansion.
#[derive(Debug, Clone)]
pub struct KernelFamily {
    pub message_sets: Vec<Vec<Vec<String>>>,
    /// π_1 entries: (base signals, messages, state, probability).
    pub initial: Vec<(Vec<usize>, Vec<usize>, usize, Rat)>,
    pub rows: BTreeMap<PiKey, Vec<PiEntry>>,
}

impl KernelFamily {
    pub fn message_profile_count(&self, stage: usize) -> usize {
        self.message_sets
            .iter()
            .map(|per_player| per_player[stage].len())
            .product()
    }
}

/// Walks the π process for one fixed action path and collects the joint
/// mass over full `(signals, messages, states)` terminal vectors.
fn pi_forward(
    game: &BaseGame,
    kf: &KernelFamily,
    action_path: &[Vec<usize>],
) -> BTreeMap<(Vec<Vec<usize>>, Vec<Vec<usize>>, Vec<usize>), Rat> {
    let mut acc = BTreeMap::new();
    let mut frontier: Vec<(Vec<Vec<usize>>, Vec<Vec<usize>>, Vec<usize>, Rat)> = kf
        .initial
        .iter()
        .filter(|(_, _, _, p)| p.is_positive())
        .map(|(s, m, w, p)| (vec![s.clone()], vec![m.clone()], vec![*w], p.clone()))
        .collect();
    for t in 0..game.stages.saturating_sub(1) {
        let mut next = Vec::new();
        for (sigs, msgs, states, prob) in &frontier {
            let key = PiKey {
                actions: action_path[..=t].to_vec(),
                signals: sigs.clone(),
                messages: msgs.clone(),
                states: states.clone(),
            };
            let Some(row) = kf.rows.get(&key) else {
                continue;
            };
            for e in row {
                if !e.prob.is_positive() || e.recalled != action_path[t] {
                    continue;
                }
                let mut sigs2 = sigs.clone();
                sigs2.push(e.signals.clone());
                let mut msgs2 = msgs.clone();
                msgs2.push(e.messages.clone());
                let mut states2 = states.clone();
                states2.push(e.state);
                next.push((sigs2, msgs2, states2, prob * &e.prob));
            }
        }
        frontier = next;
    }
    for (sigs, msgs, states, prob) in frontier {
        let slot = acc
            .entry((sigs, msgs, states))
            .or_insert_with(Rat::zero);
        *slot = slot.clone() + prob;
    }
    acc
}

/// Base-game mass over `(signals, states)` for one fixed action path.
fn base_forward(
    game: &BaseGame,
    action_path: &[Vec<usize>],
) -> BTreeMap<(Vec<Vec<usize>>, Vec<usize>), Rat> {
    let mut acc = BTreeMap::new();
    let mut frontier: Vec<(Vec<Vec<usize>>, Vec<usize>, Rat)> = game
        .initial
        .iter()
        .filter(|e| e.prob.is_positive())
        .map(|e| (vec![e.signals.clone()], vec![e.state], e.prob.clone()))
        .collect();
    for t in 0..game.stages.saturating_sub(1) {
        let mut next = Vec::new();
        for (sigs, states, prob) in &frontier {
            let key = PrefixKey {
                actions: action_path[..=t].to_vec(),
                signals: sigs.clone(),
                states: states.clone(),
            };
            let Some(row) = game.transitions.get(&key) else {
                continue;
            };
            for e in row {
                if !e.prob.is_positive() || e.recalled != action_path[t] {
                    continue;
                }
                let mut sigs2 = sigs.clone();
                sigs2.push(e.signals.clone());
                let mut states2 = states.clone();
                states2.push(e.state);
                next.push((sigs2, states2, prob * &e.prob));
            }
        }
        frontier = next;
    }
    for (sigs, states, prob) in frontier {
        let slot = acc.entry((sigs, states)).or_insert_with(Rat::zero);
        *slot = slot.clone() + prob;
    }
    acc
}

fn all_action_paths(game: &BaseGame) -> Vec<Vec<Vec<usize>>> {
    let mut paths: Vec<Vec<Vec<usize>>> = vec![Vec::new()];
    for t in 0..game.stages {
        let mut next = Vec::new();
        for p in &paths {
            for idx in 0..game.profile_count(t) {
                let mut p2 = p.clone();
                p2.push(game.decode_profile(t, idx));
                next.push(p2);
            }
        }
        paths = next;
    }
    paths
}

/// The marginal consistency condition: for every action profile path, the
/// message-marginal of the π process equals the base process exactly.
pub fn consistency_check(game: &BaseGame, kf: &KernelFamily) -> bool {
    for path in all_action_paths(game) {
        let pi = pi_forward(game, kf, &path);
        let base = base_forward(game, &path);
        let mut marg: BTreeMap<(Vec<Vec<usize>>, Vec<usize>), Rat> = BTreeMap::new();
        for ((sigs, _msgs, states), p) in pi {
            let slot = marg.entry((sigs, states)).or_insert_with(Rat::zero);
            *slot = slot.clone() + p;
        }
        for (key, p) in &base {
            if marg.get(key).cloned().unwrap_or_else(Rat::zero) != *p {
                return false;
            }
        }
        for (key, p) in &marg {
            if base.get(key).cloned().unwrap_or_else(Rat::zero) != *p {
                return false;
            }
        }
    }
    true
}

/// Result of a factorization test.
pub struct FactorizationOutcome {
    pub factorizable: bool,
    pub witness: Option<Expansion>,
    pub failures: Vec<String>,
}

/// Decides whether π arises from some expansion: at every π-reachable
/// conditioning cell the stage marginal over messages must reproduce the
/// base kernel row pointwise, in which case ξ is recovered by exact
/// division on positive cells.
pub fn factorization_test(game: &BaseGame, kf: &KernelFamily) -> FactorizationOutcome {
    let mut failures = Vec::new();
    let mut witness = Expansion {
        message_sets: kf.message_sets.clone(),
        rows: BTreeMap::new(),
    };

    // Stage 1: marginal over messages of π_1 must equal p_1 cellwise.
    let mut marg1: BTreeMap<(Vec<usize>, usize), Rat> = BTreeMap::new();
    for (sigs, _msgs, state, p) in &kf.initial {
        let slot = marg1
            .entry((sigs.clone(), *state))
            .or_insert_with(Rat::zero);
        *slot = slot.clone() + p;
    }
    let p1 = |sigs: &Vec<usize>, state: usize| -> Rat {
        game.initial
            .iter()
            .find(|e| &e.signals == sigs && e.state == state)
            .map(|e| e.prob.clone())
            .unwrap_or_else(Rat::zero)
    };
    let mut cells: Vec<(Vec<usize>, usize)> = marg1.keys().cloned().collect();
    for e in &game.initial {
        let c = (e.signals.clone(), e.state);
        if !cells.contains(&c) {
            cells.push(c);
        }
    }
    for (sigs, state) in cells {
        let m = marg1
            .get(&(sigs.clone(), state))
            .cloned()
            .unwrap_or_else(Rat::zero);
        let p = p1(&sigs, state);
        if m != p {
            failures.push(format!(
                "stage-1 marginal {} differs from base probability {}",
                format_rat(&m),
                format_rat(&p)
            ));
            continue;
        }
        if p.is_positive() {
            let key = XiKey {
                actions: Vec::new(),
                signals: vec![sigs.clone()],
                messages: Vec::new(),
                states: vec![state],
            };
            let row: Vec<(Vec<usize>, Rat)> = kf
                .initial
                .iter()
                .filter(|(s, _, w, q)| s == &sigs && *w == state && q.is_positive())
                .map(|(_, msgs, _, q)| (msgs.clone(), q / &p))
                .collect();
            witness.rows.insert(key, row);
        }
    }

    // Later stages: walk π-reachable cells for every action path.
    for path in all_action_paths(game) {
        // Reachable (sigs, msgs, states) prefixes under π along this path.
        let mut frontier: Vec<(Vec<Vec<usize>>, Vec<Vec<usize>>, Vec<usize>)> = kf
            .initial
            .iter()
            .filter(|(_, _, _, p)| p.is_positive())
            .map(|(s, m, w, _)| (vec![s.clone()], vec![m.clone()], vec![*w]))
            .collect();
        for t in 0..game.stages.saturating_sub(1) {
            let mut next = Vec::new();
            for (sigs, msgs, states) in &frontier {
                let key = PiKey {
                    actions: path[..=t].to_vec(),
                    signals: sigs.clone(),
                    messages: msgs.clone(),
                    states: states.clone(),
                };
                let base_key = PrefixKey {
                    actions: path[..=t].to_vec(),
                    signals: sigs.clone(),
                    states: states.clone(),
                };
                let pi_row = kf.rows.get(&key).cloned().unwrap_or_default();
                let base_row = game.transitions.get(&base_key).cloned().unwrap_or_default();
                // Marginal of π over messages per (signals, state) cell.
                let mut marg: BTreeMap<(Vec<usize>, Vec<usize>, usize), Rat> = BTreeMap::new();
                for e in &pi_row {
                    if e.prob.is_zero() {
                        continue;
                    }
                    let slot = marg
                        .entry((e.recalled.clone(), e.signals.clone(), e.state))
                        .or_insert_with(Rat::zero);
                    *slot = slot.clone() + &e.prob;
                }
                let base_p = |rec: &Vec<usize>, s: &Vec<usize>, w: usize| -> Rat {
                    base_row
                        .iter()
                        .find(|e| &e.recalled == rec && &e.signals == s && e.state == w)
                        .map(|e| e.prob.clone())
                        .unwrap_or_else(Rat::zero)
                };
                let mut cell_keys: Vec<(Vec<usize>, Vec<usize>, usize)> =
                    marg.keys().cloned().collect();
                for e in &base_row {
                    let c = (e.recalled.clone(), e.signals.clone(), e.state);
                    if !cell_keys.contains(&c) {
                        cell_keys.push(c);
                    }
                }
                for (rec, s, w) in cell_keys {
                    let m = marg
                        .get(&(rec.clone(), s.clone(), w))
                        .cloned()
                        .unwrap_or_else(Rat::zero);
                    let p = base_p(&rec, &s, w);
                    if m != p {
                        failures.push(format!(
                            "stage-{} marginal {} differs from base probability {}",
                            t + 2,
                            format_rat(&m),
                            format_rat(&p)
                        ));
                        continue;
                    }
                    if p.is_positive() {
                        let mut sig_hist = sigs.clone();
                        sig_hist.push(s.clone());
                        let mut state_hist = states.clone();
                        state_hist.push(w);
                        let xi_key = XiKey {
                            actions: path[..=t].to_vec(),
                            signals: sig_hist,
                            messages: msgs.clone(),
                            states: state_hist,
                        };
                        let row: Vec<(Vec<usize>, Rat)> = pi_row
                            .iter()
                            .filter(|e| {
                                e.recalled == rec
                                    && e.signals == s
                                    && e.state == w
                                    && e.prob.is_positive()
                            })
                            .map(|e| (e.messages.clone(), &e.prob / &p))
                            .collect();
                        witness.rows.insert(xi_key, row);
                    }
                }
                // Advance the π frontier.
                for e in &pi_row {
                    if e.prob.is_positive() && e.recalled == path[t] {
                        let mut sigs2 = sigs.clone();
                        sigs2.push(e.signals.clone());
                        let mut msgs2 = msgs.clone();
                        msgs2.push(e.messages.clone());
                        let mut states2 = states.clone();
                        states2.push(e.state);
                        next.push((sigs2, msgs2, states2));
                    }
                }
            }
            next.sort();
            next.dedup();
            frontier = next;
        }
    }

    failures.sort();
    failures.dedup();
    let ok = failures.is_empty();
    FactorizationOutcome {
        factorizable: ok,
        witness: if ok { Some(witness) } else { None },
        failures,
    }
}

/// The canonical expansion of a verified BCE: messages are recommendations
/// (`M_{i,t} = A_{i,t}`), ξ kernels are the conditional-frequency kernels of
/// the mixture, and unreachable message histories get uniform rows.
pub fn canonical_expansion(
    space: &RuleSpace,
    mixture: &BceMixture,
    caps: &Caps,
) -> Result<Expansion, GameError> {
    let tree = space.tree;
    let game = tree.game;
    let n = game.n_players();
    let violations = crate::solver::verify_bce(space, mixture, caps)?;
    if !violations.is_empty() {
        return Err(GameError::Invalid(format!(
            "mixture is not obedient: {} violated deviation rows",
            violations.len()
        )));
    }
    let kernels = kernels_from_mixture(space, mixture, None)?;

    let mut exp = Expansion {
        message_sets: (0..n)
            .map(|i| (0..game.stages).map(|t| game.actions[i][t].clone()).collect())
            .collect(),
        rows: BTreeMap::new(),
    };

    // One ξ row per (node, message history): the kernel row where the
    // mixture defines one, uniform otherwise.
    for t in 0..game.stages {
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
        for &nid in &tree.stage_nodes[t] {
            let node = &tree.nodes[nid];
            for h in &histories {
                let key = XiKey {
                    actions: node.actions.clone(),
                    signals: node.signals.clone(),
                    messages: h
                        .iter()
                        .enumerate()
                        .map(|(t2, &p)| game.decode_profile(t2, p))
                        .collect(),
                    states: node.states.clone(),
                };
                let kernel_key = crate::refine::KernelKey {
                    actions: node.actions.clone(),
                    signals: node.signals.clone(),
                    states: node.states.clone(),
                    recs: h.clone(),
                };
                let row: Vec<(Vec<usize>, Rat)> = match kernels.rows.get(&kernel_key) {
                    Some(kr) => kr
                        .iter()
                        .map(|(pidx, q)| (game.decode_profile(t, *pidx), q.clone()))
                        .collect(),
                    None => {
                        let count = game.profile_count(t);
                        let w = Rat::new(1.into(), (count as i64).into());
                        (0..count)
                            .map(|pidx| (game.decode_profile(t, pidx), w.clone()))
                            .collect()
                    }
                };
                exp.rows.insert(key, row);
            }
        }
    }
    Ok(exp)
}

/// A behavioral strategy: a distribution over own actions at every private
/// decision point `(own signals, own past actions)`.
#[derive(Debug, Clone)]
pub struct BehavioralStrategy {
    pub player: usize,
    pub rows: BTreeMap<(Vec<usize>, Vec<usize>), Vec<(usize, Rat)>>,
}

impl BehavioralStrategy {
    fn distribution(&self, own_signals: &[usize], own_actions: &[usize]) -> Vec<(usize, Rat)> {
        self.rows
            .get(&(own_signals.to_vec(), own_actions.to_vec()))
            .cloned()
            .unwrap_or_else(|| {
                panic!(
                    "behavioral strategy of player {} undefined at signals {own_signals:?} actions {own_actions:?}",
                    self.player
                )
            })
    }
}

/// Forward evaluation of a behavioral profile on a game tree.
pub fn behavioral_outcome(tree: &GameTree, profile: &[BehavioralStrategy]) -> OutcomeDistribution {
    let game = tree.game;
    let mut out = OutcomeDistribution::default();
    let mut stack: Vec<(usize, Rat)> = tree.stage_nodes[0]
        .iter()
        .map(|&id| (id, tree.nodes[id].step_prob.clone()))
        .collect();
    while let Some((nid, prob)) = stack.pop() {
        let node = &tree.nodes[nid];
        if node.children.is_empty() {
            out.add(tree.terminal_history(nid), prob);
            continue;
        }
        let t = node.stage();
        // Joint action distribution as the product over players.
        let mut joint: Vec<(Vec<usize>, Rat)> = vec![(Vec::new(), Rat::one())];
        for i in 0..game.n_players() {
            let own_signals: Vec<usize> = node.signals.iter().map(|s| s[i]).collect();
            let own_actions: Vec<usize> = node.actions.iter().map(|a| a[i]).collect();
            let dist = profile[i].distribution(&own_signals, &own_actions);
            let mut next = Vec::with_capacity(joint.len() * dist.len());
            for (prefix, w) in &joint {
                for (a, q) in &dist {
                    if q.is_zero() {
                        continue;
                    }
                    let mut p2 = prefix.clone();
                    p2.push(*a);
                    next.push((p2, w * q));
                }
            }
            joint = next;
        }
        for (actions, w) in joint {
            let played = game.encode_profile(t, &actions);
            for (child, p) in &node.children[played] {
                stack.push((*child, &prob * &w * p));
            }
        }
    }
    out
}

/// Expected payoff of one player under a behavioral profile, with one
/// player optionally replaced by a pure strategy.
fn eval_with_replacement(
    tree: &GameTree,
    profile: &[BehavioralStrategy],
    replaced: Option<(usize, &crate::nash::PureStrategy)>,
    player: usize,
) -> Rat {
    let game = tree.game;
    let mut total = Rat::zero();
    let mut stack: Vec<(usize, Rat)> = tree.stage_nodes[0]
        .iter()
        .map(|&id| (id, tree.nodes[id].step_prob.clone()))
        .collect();
    while let Some((nid, prob)) = stack.pop() {
        let node = &tree.nodes[nid];
        if node.children.is_empty() {
            let u = game
                .payoff_vector(&tree.terminal_history(nid))
                .expect("validated game");
            total = total + &u[player] * &prob;
            continue;
        }
        let t = node.stage();
        let mut joint: Vec<(Vec<usize>, Rat)> = vec![(Vec::new(), Rat::one())];
        for i in 0..game.n_players() {
            let own_signals: Vec<usize> = node.signals.iter().map(|s| s[i]).collect();
            let own_actions: Vec<usize> = node.actions.iter().map(|a| a[i]).collect();
            let dist: Vec<(usize, Rat)> = match replaced {
                Some((ri, pure)) if ri == i => {
                    vec![(pure.action_at(&own_signals, &own_actions), Rat::one())]
                }
                _ => profile[i].distribution(&own_signals, &own_actions),
            };
            let mut next = Vec::with_capacity(joint.len() * dist.len());
            for (prefix, w) in &joint {
                for (a, q) in &dist {
                    if q.is_zero() {
                        continue;
                    }
                    let mut p2 = prefix.clone();
                    p2.push(*a);
                    next.push((p2, w * q));
                }
            }
            joint = next;
        }
        for (actions, w) in joint {
            let played = game.encode_profile(t, &actions);
            for (child, p) in &node.children[played] {
                stack.push((*child, &prob * &w * p));
            }
        }
    }
    total
}

/// Checks whether a behavioral profile is a Bayes-Nash equilibrium by
/// enumerating every player's reduced pure strategies. Returns all
/// profitable pure deviations.
pub fn best_response_check(
    tree: &GameTree,
    profile: &[BehavioralStrategy],
    caps: &Caps,
) -> Result<Vec<(usize, crate::nash::PureStrategy)>, GameError> {
    let mut violations = Vec::new();
    for player in 0..tree.game.n_players() {
        let base_value = eval_with_replacement(tree, profile, None, player);
        for pure in crate::nash::enumerate_pure_strategies(tree, player, caps)? {
            let dev_value = eval_with_replacement(tree, profile, Some((player, &pure)), player);
            if dev_value > base_value {
                violations.push((player, pure));
            }
        }
    }
    Ok(violations)
}

/// The play-your-message profile of a game induced by a canonical
/// expansion: at each stage every player plays the message component of
/// their current combined signal.
pub fn obedient_profile(induced: &InducedGame) -> Vec<BehavioralStrategy> {
    let game = &induced.game;
    let n = game.n_players();
    let caps = Caps::default();
    let tree_game = game.clone();
    let tree = GameTree::build(&tree_game, &caps).expect("induced game enumerates");
    let mut strategies: Vec<BehavioralStrategy> = (0..n)
        .map(|player| BehavioralStrategy {
            player,
            rows: BTreeMap::new(),
        })
        .collect();
    for node in &tree.nodes {
        if node.children.is_empty() {
            continue;
        }
        let t = node.stage();
        for i in 0..n {
            let own_signals: Vec<usize> = node.signals.iter().map(|s| s[i]).collect();
            let own_actions: Vec<usize> = node.actions.iter().map(|a| a[i]).collect();
            let (_, message) = induced.split_signal(i, t, own_signals[t]);
            strategies[i]
                .rows
                .insert((own_signals, own_actions), vec![(message, Rat::one())]);
        }
    }
    strategies
}

/// Validates kernel-family plumbing: row sums and perfect recall on listed
/// rows. Returns human-readable problems.
pub fn validate_kernel_family(game: &BaseGame, kf: &KernelFamily) -> Vec<String> {
    let mut problems = Vec::new();
    let mut init_sum = Rat::zero();
    for (_, _, _, p) in &kf.initial {
        if p.is_negative() {
            problems.push("negative probability in pi_1".to_string());
        }
        init_sum = init_sum + p;
    }
    if init_sum != Rat::one() {
        problems.push(format!("pi_1 sums to {}, not 1", format_rat(&init_sum)));
    }
    for (key, row) in &kf.rows {
        let t = key.actions.len();
        let played = key.actions.last().cloned().unwrap_or_default();
        let mut sum = Rat::zero();
        for e in row {
            if e.prob.is_negative() {
                problems.push(format!("negative probability in pi row at stage {t}"));
            }
            if e.recalled != played && !e.prob.is_zero() {
                problems.push(format!(
                    "perfect recall violated in pi row at stage {t}"
                ));
            }
            sum = sum + &e.prob;
        }
        if sum != Rat::one() {
            problems.push(format!(
                "pi row at stage {t} sums to {}, not 1",
                format_rat(&sum)
            ));
        }
    }
    problems
}
