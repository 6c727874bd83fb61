//! Obedience linear programs over mixtures of feedback rules: BCE
//! membership, support-function optimization, exact two-player payoff
//! polytopes, and mixture verification.
//!
//! The decision variable is a probability vector μ over an explicit set of
//! feedback rules. Each obedience constraint says that a player cannot gain
//! by a pure deviation strategy when the mediator mixes rules by μ and
//! everyone else obeys. With the full enumerated rule set, answers are
//! exact characterizations; with a caller-supplied restricted rule family,
//! feasibility answers are one-sided (feasible still implies membership).

use crate::feedback::{
    enumerate_deviations, obedient_outcome, outcome_under, DeviationStrategy, FeedbackRule,
    PlayMode, RuleSpace,
};
use crate::game::{Caps, GameError, GameTree, OutcomeDistribution, TerminalHistory};
use crate::hull::{convex_hull, Point};
use crate::lp::{self, LinearProgram, LpStatus};
use crate::rational::Rat;
use num::{Integer, One, Signed, Zero};
use std::collections::BTreeMap;

/// A probability mixture over explicit feedback rules.
#[derive(Debug, Clone)]
pub struct BceMixture {
    pub entries: Vec<(FeedbackRule, Rat)>,
}

impl BceMixture {
    pub fn point_mass(rule: FeedbackRule) -> BceMixture {
        BceMixture {
            entries: vec![(rule, Rat::one())],
        }
    }

    pub fn total(&self) -> Rat {
        self.entries
            .iter()
            .fold(Rat::zero(), |a, (_, w)| a + w)
    }

    /// Convex combination `α·self + (1-α)·other` with exact weights.
    pub fn combine(&self, other: &BceMixture, alpha: &Rat) -> BceMixture {
        let mut acc: BTreeMap<FeedbackRule, Rat> = BTreeMap::new();
        for (rule, w) in &self.entries {
            let slot = acc.entry(rule.clone()).or_insert_with(Rat::zero);
            *slot = slot.clone() + alpha * w;
        }
        let beta = Rat::one() - alpha;
        for (rule, w) in &other.entries {
            let slot = acc.entry(rule.clone()).or_insert_with(Rat::zero);
            *slot = slot.clone() + &beta * w;
        }
        BceMixture {
            entries: acc.into_iter().filter(|(_, w)| !w.is_zero()).collect(),
        }
    }

    /// Expected outcome distribution under obedient play.
    pub fn outcome(&self, space: &RuleSpace) -> OutcomeDistribution {
        let mut out = OutcomeDistribution::default();
        for (rule, w) in &self.entries {
            for (term, p) in obedient_outcome(space, rule).weights {
                out.add(term, p * w);
            }
        }
        out
    }
}

/// One obedience row: a player, a pure deviation, and per-rule coefficients
/// `EU_i(f, obey) - EU_i(f, deviate)`.
pub struct DeviationRow {
    pub player: usize,
    pub deviation: DeviationStrategy,
    pub coeffs: Vec<Rat>,
}

/// The assembled obedience program over an explicit rule set.
pub struct ObedienceLp {
    pub rules: Vec<FeedbackRule>,
    pub rows: Vec<DeviationRow>,
    /// Obedient expected payoffs per rule, per player.
    pub rule_payoffs: Vec<Vec<Rat>>,
    /// Obedient outcome distribution per rule.
    pub rule_outcomes: Vec<OutcomeDistribution>,
    /// True when `rules` is the complete enumeration for the game.
    pub complete: bool,
}

/// Builds the obedience LP over the fully enumerated rule set.
pub fn assemble_obedience_lp(space: &RuleSpace, caps: &Caps) -> Result<ObedienceLp, GameError> {
    let rules = space.enumerate(caps)?;
    assemble_over(space, rules, true, caps)
}

/// Builds the obedience LP over a caller-supplied restricted rule family.
pub fn assemble_restricted_lp(
    space: &RuleSpace,
    rules: Vec<FeedbackRule>,
    caps: &Caps,
) -> Result<ObedienceLp, GameError> {
    assemble_over(space, rules, false, caps)
}

fn assemble_over(
    space: &RuleSpace,
    rules: Vec<FeedbackRule>,
    complete: bool,
    caps: &Caps,
) -> Result<ObedienceLp, GameError> {
    let tree = space.tree;
    let n = tree.game.n_players();
    let mut rule_payoffs = Vec::with_capacity(rules.len());
    let mut rule_outcomes = Vec::with_capacity(rules.len());
    for rule in &rules {
        let outcome = outcome_under(space, rule, PlayMode::Obedient);
        rule_payoffs.push(
            (0..n)
                .map(|i| outcome.expected_payoff(tree, i))
                .collect::<Vec<_>>(),
        );
        rule_outcomes.push(outcome.marginal(tree));
    }
    let mut rows = Vec::new();
    for player in 0..n {
        for deviation in enumerate_deviations(tree, player, caps)? {
            let coeffs = rules
                .iter()
                .enumerate()
                .map(|(fi, rule)| {
                    let dev_eu = outcome_under(space, rule, PlayMode::Deviate(&deviation))
                        .expected_payoff(tree, player);
                    rule_payoffs[fi][player].clone() - dev_eu
                })
                .collect();
            rows.push(DeviationRow {
                player,
                deviation,
                coeffs,
            });
        }
    }
    Ok(ObedienceLp {
        rules,
        rows,
        rule_payoffs,
        rule_outcomes,
        complete,
    })
}

impl ObedienceLp {
    /// The base LP: μ in the simplex, every obedience row ≥ 0.
    fn base_lp(&self) -> LinearProgram {
        let n = self.rules.len();
        let mut lp = LinearProgram::new(n);
        lp.eq(vec![Rat::one(); n], Rat::one());
        for row in &self.rows {
            lp.ge(row.coeffs.clone(), Rat::zero());
        }
        lp
    }

    fn mixture_from(&self, solution: &[Rat]) -> BceMixture {
        BceMixture {
            entries: self
                .rules
                .iter()
                .zip(solution)
                .filter(|(_, w)| w.is_positive())
                .map(|(r, w)| (r.clone(), w.clone()))
                .collect(),
        }
    }
}

/// Result of a membership test.
pub struct MembershipOutcome {
    pub member: bool,
    pub witness: Option<BceMixture>,
    /// On a negative answer: indices into `ObedienceLp::rows` of obedience
    /// constraints carrying nonzero weight in the infeasibility certificate.
    pub blocking_rows: Vec<usize>,
}

/// Is `target` the obedient outcome distribution of some mixture satisfying
/// every obedience row? Exact when the LP is complete; with a restricted
/// rule family a positive answer is still conclusive, a negative one is not.
pub fn membership_test(
    space: &RuleSpace,
    obedience: &ObedienceLp,
    target: &OutcomeDistribution,
) -> Result<MembershipOutcome, GameError> {
    target.validate(space.tree)?;
    let mut lp = obedience.base_lp();
    for &term_node in &space.tree.terminals {
        let terminal = space.tree.terminal_history(term_node);
        let coeffs: Vec<Rat> = obedience
            .rule_outcomes
            .iter()
            .map(|o| o.weights.get(&terminal).cloned().unwrap_or_else(Rat::zero))
            .collect();
        let rhs = target
            .weights
            .get(&terminal)
            .cloned()
            .unwrap_or_else(Rat::zero);
        lp.eq(coeffs, rhs);
    }
    let res = lp::feasible_point(&lp).map_err(|e| GameError::Internal(e.to_string()))?;
    match res.status {
        LpStatus::Optimal => Ok(MembershipOutcome {
            member: true,
            witness: Some(obedience.mixture_from(res.solution.as_ref().unwrap())),
            blocking_rows: Vec::new(),
        }),
        LpStatus::Infeasible => {
            let mut blocking = Vec::new();
            if let Some(farkas) = &res.farkas {
                // Equality rows come first: one simplex row plus one per
                // terminal; the remaining multipliers align with obedience
                // rows in order.
                let offset = lp.equalities.len();
                for (k, y) in farkas[offset..].iter().enumerate() {
                    if !y.is_zero() {
                        blocking.push(k);
                    }
                }
            }
            Ok(MembershipOutcome {
                member: false,
                witness: None,
                blocking_rows: blocking,
            })
        }
        LpStatus::Unbounded => Err(GameError::Internal(
            "feasibility LP reported unbounded".into(),
        )),
    }
}

/// Maximizes a payoff-weighted direction over the obedience polytope.
/// Infeasibility cannot occur on a complete rule set (a Nash equilibrium of
/// the base game always induces a feasible mixture), so it is reported as an
/// internal error.
pub fn optimize_direction(
    obedience: &ObedienceLp,
    direction: &[Rat],
) -> Result<(Rat, BceMixture), GameError> {
    let mut lp = obedience.base_lp();
    lp.objective = obedience
        .rule_payoffs
        .iter()
        .map(|payoffs| {
            direction
                .iter()
                .zip(payoffs)
                .map(|(d, u)| d * u)
                .fold(Rat::zero(), |a, v| a + v)
        })
        .collect();
    let res = lp::solve(&lp).map_err(|e| GameError::Internal(e.to_string()))?;
    match res.status {
        LpStatus::Optimal => {
            let solution = res.solution.unwrap();
            Ok((res.value.unwrap(), obedience.mixture_from(&solution)))
        }
        LpStatus::Infeasible => Err(GameError::Internal(
            "obedience polytope empty: a Nash mixture should always be feasible".into(),
        )),
        LpStatus::Unbounded => Err(GameError::Internal(
            "bounded polytope reported unbounded".into(),
        )),
    }
}

/// Expected payoff point of a mixture, for two-player games.
pub fn payoff_point(obedience: &ObedienceLp, solution: &BceMixture) -> Point {
    let mut x = Rat::zero();
    let mut y = Rat::zero();
    for (rule, w) in &solution.entries {
        let fi = obedience
            .rules
            .iter()
            .position(|r| r == rule)
            .expect("witness rule comes from the LP's rule set");
        x = x + &obedience.rule_payoffs[fi][0] * w;
        y = y + &obedience.rule_payoffs[fi][1] * w;
    }
    (x, y)
}

fn normalize_dir(d: &Point) -> (num::BigInt, num::BigInt) {
    // Scale to a primitive integer vector.
    let lcm = d.0.denom().lcm(d.1.denom());
    let a = d.0.numer() * (&lcm / d.0.denom());
    let b = d.1.numer() * (&lcm / d.1.denom());
    let g = a.gcd(&b);
    if g.is_zero() {
        (a, b)
    } else {
        (a / &g, b / &g)
    }
}

/// Exact vertex list of the projection of the obedience polytope onto
/// two-player payoff space. Seeds `num_directions` support directions, then
/// refines every hull edge until no direction improves, so the result does
/// not depend on the seed count once stabilized. Vertices come back in
/// counter-clockwise order from the lexicographic minimum.
pub fn payoff_polytope_2p(
    obedience: &ObedienceLp,
    num_directions: usize,
) -> Result<Vec<Point>, GameError> {
    let mut seeds: Vec<Point> = vec![
        (Rat::one(), Rat::zero()),
        (Rat::zero(), Rat::one()),
        (-Rat::one(), Rat::zero()),
        (Rat::zero(), -Rat::one()),
    ];
    let mut k: i64 = 1;
    while seeds.len() < num_directions.max(4) {
        for (a, b) in [(1, k), (-1, k), (1, -k), (-1, -k), (k, 1), (k, -1)] {
            seeds.push((crate::rational::rat(a), crate::rational::rat(b)));
            if seeds.len() >= num_directions.max(4) {
                break;
            }
        }
        k += 1;
    }

    let mut solved: BTreeMap<(num::BigInt, num::BigInt), Point> = BTreeMap::new();
    let mut points: Vec<Point> = Vec::new();

    fn support(
        obedience: &ObedienceLp,
        dir: &Point,
        solved: &mut BTreeMap<(num::BigInt, num::BigInt), Point>,
    ) -> Result<Point, GameError> {
        let key = normalize_dir(dir);
        if let Some(p) = solved.get(&key) {
            return Ok(p.clone());
        }
        let (_, witness) = optimize_direction(obedience, &[dir.0.clone(), dir.1.clone()])?;
        let p = payoff_point(obedience, &witness);
        solved.insert(key, p.clone());
        Ok(p)
    }

    for dir in &seeds {
        points.push(support(obedience, dir, &mut solved)?);
    }

    loop {
        let hull = convex_hull(&points);
        if hull.len() <= 1 {
            return Ok(hull);
        }
        let mut grew = false;
        let edges: Vec<(Point, Point)> = if hull.len() == 2 {
            vec![
                (hull[0].clone(), hull[1].clone()),
                (hull[1].clone(), hull[0].clone()),
            ]
        } else {
            (0..hull.len())
                .map(|i| (hull[i].clone(), hull[(i + 1) % hull.len()].clone()))
                .collect()
        };
        for (p, q) in edges {
            let normal = (&q.1 - &p.1, &p.0 - &q.0);
            if normal.0.is_zero() && normal.1.is_zero() {
                continue;
            }
            let candidate = support(obedience, &normal, &mut solved)?;
            let gain = &normal.0 * (&candidate.0 - &p.0) + &normal.1 * (&candidate.1 - &p.1);
            if gain.is_positive() {
                points.push(candidate);
                grew = true;
            }
        }
        if !grew {
            return Ok(convex_hull(&points));
        }
    }
}

/// Checks every obedience row against a concrete mixture; returns the
/// violated (player, deviation) pairs. Empty iff the mixture is obedient.
pub fn verify_bce(
    space: &RuleSpace,
    mixture: &BceMixture,
    caps: &Caps,
) -> Result<Vec<(usize, DeviationStrategy)>, GameError> {
    let tree = space.tree;
    if mixture.total() != Rat::one() {
        return Err(GameError::Invalid(format!(
            "mixture weights sum to {}, not 1",
            crate::rational::format_rat(&mixture.total())
        )));
    }
    let n = tree.game.n_players();
    let mut violations = Vec::new();
    for player in 0..n {
        let obedient_value: Rat = mixture
            .entries
            .iter()
            .map(|(rule, w)| {
                outcome_under(space, rule, PlayMode::Obedient).expected_payoff(tree, player) * w
            })
            .fold(Rat::zero(), |a, v| a + v);
        for deviation in enumerate_deviations(tree, player, caps)? {
            let dev_value: Rat = mixture
                .entries
                .iter()
                .map(|(rule, w)| {
                    outcome_under(space, rule, PlayMode::Deviate(&deviation))
                        .expected_payoff(tree, player)
                        * w
                })
                .fold(Rat::zero(), |a, v| a + v);
            if dev_value > obedient_value {
                violations.push((player, deviation));
            }
        }
    }
    Ok(violations)
}

/// Renders a mixture as `(rule description, weight)` blocks.
pub fn describe_mixture(space: &RuleSpace, mixture: &BceMixture) -> String {
    let tree = space.tree;
    let game = tree.game;
    let mut out = String::new();
    for (rule, w) in &mixture.entries {
        out.push_str(&format!("weight {}\n", crate::rational::format_rat(w)));
        for (ci, cell) in space.cells.iter().enumerate() {
            let node = &tree.nodes[cell.node];
            let t = node.stage();
            let rec = game.decode_profile(t, rule.choice[ci]);
            let rec_names: Vec<&str> = (0..game.n_players())
                .map(|i| game.actions[i][t][rec[i]].as_str())
                .collect();
            let hist: Vec<String> = cell
                .rec_history
                .iter()
                .enumerate()
                .map(|(t2, &p)| {
                    let prof = game.decode_profile(t2, p);
                    (0..game.n_players())
                        .map(|i| game.actions[i][t2][prof[i]].as_str())
                        .collect::<Vec<_>>()
                        .join(",")
                })
                .collect();
            out.push_str(&format!(
                "  stage {} at {} past-recs [{}] -> ({})\n",
                t + 1,
                describe_node(space.tree, cell.node),
                hist.join(";"),
                rec_names.join(",")
            ));
        }
    }
    out
}

pub fn describe_node(tree: &GameTree, node: usize) -> String {
    let n = &tree.nodes[node];
    let game = tree.game;
    let mut parts = Vec::new();
    for (t, prof) in n.actions.iter().enumerate() {
        let names: Vec<&str> = (0..game.n_players())
            .map(|i| game.actions[i][t][prof[i]].as_str())
            .collect();
        parts.push(format!("a{}=({})", t + 1, names.join(",")));
    }
    for (t, &w) in n.states.iter().enumerate() {
        if game.states[t].len() > 1 {
            parts.push(format!("w{}={}", t + 1, game.states[t][w]));
        }
    }
    for (t, prof) in n.signals.iter().enumerate() {
        for i in 0..game.n_players() {
            if game.signals[i][t].len() > 1 {
                parts.push(format!(
                    "s{}[{}]={}",
                    t + 1,
                    game.players[i],
                    game.signals[i][t][prof[i]]
                ));
            }
        }
    }
    if parts.is_empty() {
        "root".to_string()
    } else {
        parts.join(" ")
    }
}

/// Builds an outcome distribution from per-terminal weights keyed by action
/// and state indices; every signal set must be singleton for the key to be
/// unambiguous.
pub fn target_from_action_weights(
    tree: &GameTree,
    weights: &[(Vec<Vec<usize>>, Vec<usize>, Rat)],
) -> Result<OutcomeDistribution, GameError> {
    let all = tree.terminal_histories();
    let mut out = OutcomeDistribution::default();
    for (actions, states, w) in weights {
        let matches: Vec<&TerminalHistory> = all
            .iter()
            .filter(|t| &t.actions == actions && &t.states == states)
            .collect();
        match matches.len() {
            1 => out.add(matches[0].clone(), w.clone()),
            0 => {
                return Err(GameError::Invalid(
                    "no terminal matches the given actions and states".into(),
                ))
            }
            _ => {
                return Err(GameError::Invalid(
                    "ambiguous terminal: signals are not singleton".into(),
                ))
            }
        }
    }
    Ok(out)
}
