//! Brute-force exact Nash equilibria of small base games, and their
//! embedding as feedback-rule mixtures.
//!
//! Used as an independent oracle: the mixture over recommendation plans that
//! replays a Nash profile must always pass the obedience check, and it gives
//! a guaranteed-feasible starting point inside any obedience polytope.

use crate::feedback::{FeedbackRule, RuleSpace};
use crate::game::{Caps, GameError, GameTree, OutcomeDistribution};
use crate::lp::{self, LinearProgram, LpStatus};
use crate::rational::Rat;
use crate::solver::BceMixture;
use num::{One, Signed, Zero};
use std::collections::BTreeMap;

/// A reduced pure strategy of the base game: an action for every private
/// decision point `(own signals, own past actions)` reachable under the
/// strategy's own play.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct PureStrategy {
    pub player: usize,
    pub choice: BTreeMap<(Vec<usize>, Vec<usize>), usize>,
}

impl PureStrategy {
    pub fn action_at(&self, own_signals: &[usize], own_actions: &[usize]) -> usize {
        *self
            .choice
            .get(&(own_signals.to_vec(), own_actions.to_vec()))
            .unwrap_or_else(|| {
                panic!("strategy undefined at signals {own_signals:?} actions {own_actions:?}")
            })
    }
}

/// All reduced pure strategies of a player.
pub fn enumerate_pure_strategies(
    tree: &GameTree,
    player: usize,
    caps: &Caps,
) -> Result<Vec<PureStrategy>, GameError> {
    let game = tree.game;
    let roots: Vec<(Vec<usize>, Vec<usize>)> = (0..game.signals[player][0].len())
        .map(|s| (vec![s], Vec::new()))
        .collect();

    fn assignments(
        tree: &GameTree,
        player: usize,
        frontier: &[(Vec<usize>, Vec<usize>)],
        caps: &Caps,
    ) -> Result<Vec<BTreeMap<(Vec<usize>, Vec<usize>), usize>>, GameError> {
        let game = tree.game;
        let mut result: Vec<BTreeMap<(Vec<usize>, Vec<usize>), usize>> = vec![BTreeMap::new()];
        for state in frontier {
            let t = state.1.len();
            let mut per_state = Vec::new();
            for action in 0..game.actions[player][t].len() {
                let mut children = Vec::new();
                if t + 1 < game.stages {
                    for s in 0..game.signals[player][t + 1].len() {
                        let mut sigs = state.0.clone();
                        sigs.push(s);
                        let mut acts = state.1.clone();
                        acts.push(action);
                        children.push((sigs, acts));
                    }
                }
                for submap in assignments(tree, player, &children, caps)? {
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

    Ok(assignments(tree, player, &roots, caps)?
        .into_iter()
        .map(|choice| PureStrategy { player, choice })
        .collect())
}

/// Exact outcome distribution when every player follows a pure strategy.
pub fn profile_outcome(tree: &GameTree, profile: &[&PureStrategy]) -> OutcomeDistribution {
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
        let actions: Vec<usize> = (0..game.n_players())
            .map(|i| {
                let own_signals: Vec<usize> = node.signals.iter().map(|s| s[i]).collect();
                let own_actions: Vec<usize> = node.actions.iter().map(|a| a[i]).collect();
                profile[i].action_at(&own_signals, &own_actions)
            })
            .collect();
        let played = game.encode_profile(t, &actions);
        for (child, p) in &node.children[played] {
            stack.push((*child, &prob * p));
        }
    }
    out
}

/// A mixed strategy profile of a two-player game: per player, weights over
/// that player's reduced pure strategies.
pub struct MixedNash {
    pub strategies: Vec<Vec<PureStrategy>>,
    pub weights: Vec<Vec<Rat>>,
}

/// Finds one exact mixed Nash equilibrium of a two-player game by support
/// enumeration, smallest supports first. Deterministic: the first feasible
/// support pair in the fixed iteration order wins.
pub fn mixed_nash_2p(tree: &GameTree, caps: &Caps) -> Result<MixedNash, GameError> {
    let game = tree.game;
    if game.n_players() != 2 {
        return Err(GameError::Invalid(
            "support-enumeration Nash needs exactly 2 players".into(),
        ));
    }
    let strats0 = enumerate_pure_strategies(tree, 0, caps)?;
    let strats1 = enumerate_pure_strategies(tree, 1, caps)?;
    let m = strats0.len();
    let n = strats1.len();
    if m > 16 || n > 16 {
        return Err(GameError::DeviationCap { cap: 16 });
    }

    let mut u0 = vec![vec![Rat::zero(); n]; m];
    let mut u1 = vec![vec![Rat::zero(); n]; m];
    for (a, s0) in strats0.iter().enumerate() {
        for (b, s1) in strats1.iter().enumerate() {
            let payoffs = profile_outcome(tree, &[s0, s1])
                .expected_payoffs(game)
                .expect("validated game");
            u0[a][b] = payoffs[0].clone();
            u1[a][b] = payoffs[1].clone();
        }
    }

    let supports = |k: usize| -> Vec<Vec<usize>> {
        // All nonempty subsets of 0..k as sorted index lists, by size.
        let mut subs: Vec<Vec<usize>> = (1u64..(1 << k))
            .map(|mask| (0..k).filter(|i| mask >> i & 1 == 1).collect())
            .collect();
        subs.sort_by_key(|s| (s.len(), s.clone()));
        subs
    };

    for sup0 in supports(m) {
        for sup1 in supports(n) {
            // Opponent mixture y over sup1 making sup0 indifferent-optimal,
            // and x over sup0 doing the same for player 1.
            let y = support_solution(&u0, &sup0, &sup1, n, false);
            let Some(y) = y else { continue };
            let x = support_solution(&u1, &sup1, &sup0, m, true);
            let Some(x) = x else { continue };
            return Ok(MixedNash {
                strategies: vec![strats0, strats1],
                weights: vec![x, y],
            });
        }
    }
    Err(GameError::Internal(
        "no Nash equilibrium found by support enumeration".into(),
    ))
}

/// Finds weights over `opp_support` making every strategy in `own_support`
/// a best response (equal value on the support, no better value off it).
/// `transpose` flips the matrix orientation for the second player.
fn support_solution(
    u: &[Vec<Rat>],
    own_support: &[usize],
    opp_support: &[usize],
    opp_count: usize,
    transpose: bool,
) -> Option<Vec<Rat>> {
    let val = |own: usize, opp: usize| -> Rat {
        if transpose {
            u[opp][own].clone()
        } else {
            u[own][opp].clone()
        }
    };
    let own_all: Vec<usize> = if transpose {
        (0..u[0].len()).collect()
    } else {
        (0..u.len()).collect()
    };

    // Variables: y_0..y_{opp_count-1}, v_plus, v_minus.
    let nv = opp_count + 2;
    let mut lp = LinearProgram::new(nv);
    let mut simplex_row = vec![Rat::zero(); nv];
    for &j in opp_support {
        simplex_row[j] = Rat::one();
    }
    lp.eq(simplex_row, Rat::one());
    for j in 0..opp_count {
        if !opp_support.contains(&j) {
            let mut row = vec![Rat::zero(); nv];
            row[j] = Rat::one();
            lp.eq(row, Rat::zero());
        }
    }
    for &s in own_support {
        let mut row = vec![Rat::zero(); nv];
        for &j in opp_support {
            row[j] = val(s, j);
        }
        row[opp_count] = -Rat::one();
        row[opp_count + 1] = Rat::one();
        lp.eq(row, Rat::zero());
    }
    for &s in &own_all {
        if own_support.contains(&s) {
            continue;
        }
        let mut row = vec![Rat::zero(); nv];
        for &j in opp_support {
            row[j] = -val(s, j);
        }
        row[opp_count] = Rat::one();
        row[opp_count + 1] = -Rat::one();
        lp.ge(row, Rat::zero());
    }
    let res = lp::feasible_point(&lp).ok()?;
    if res.status != LpStatus::Optimal {
        return None;
    }
    let sol = res.solution.unwrap();
    Some(sol[..opp_count].to_vec())
}

/// The feedback rule that replays a pure strategy profile: at every cell it
/// recommends what each strategy would play given the node's private
/// history, regardless of past recommendations.
pub fn rule_from_profile(space: &RuleSpace, profile: &[&PureStrategy]) -> FeedbackRule {
    let tree = space.tree;
    let game = tree.game;
    space.rule_from_fn(|cell| {
        let node = &tree.nodes[cell.node];
        let t = node.stage();
        let actions: Vec<usize> = (0..game.n_players())
            .map(|i| {
                let own_signals: Vec<usize> = node.signals.iter().map(|s| s[i]).collect();
                let own_actions: Vec<usize> = node.actions.iter().map(|a| a[i]).collect();
                profile[i].action_at(&own_signals, &own_actions)
            })
            .collect();
        game.encode_profile(t, &actions)
    })
}

/// Embeds a mixed Nash equilibrium as a mixture over feedback rules: the
/// product weights over pure profiles, each replayed by its rule.
pub fn nash_mixture(space: &RuleSpace, nash: &MixedNash) -> BceMixture {
    let mut acc: BTreeMap<FeedbackRule, Rat> = BTreeMap::new();
    for (a, s0) in nash.strategies[0].iter().enumerate() {
        if !nash.weights[0][a].is_positive() {
            continue;
        }
        for (b, s1) in nash.strategies[1].iter().enumerate() {
            if !nash.weights[1][b].is_positive() {
                continue;
            }
            let rule = rule_from_profile(space, &[s0, s1]);
            let w = &nash.weights[0][a] * &nash.weights[1][b];
            let slot = acc.entry(rule).or_insert_with(Rat::zero);
            *slot = slot.clone() + w;
        }
    }
    BceMixture {
        entries: acc.into_iter().collect(),
    }
}
