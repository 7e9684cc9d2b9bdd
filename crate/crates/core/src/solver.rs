//! Exhaustive solver for the reduced game, plus strategy replay tools.
//!
//! States are canonicalized before memoization: counters are restricted to
//! pairs the referee can observe or that carry a price, long strings appear
//! only as anonymous per-level counts, and the turn number and history are
//! dropped. Two states with the same canonical form admit the same winner.
//! Every legal move strictly decreases the mover's remaining budget, so the
//! game graph is acyclic and plain depth-first minimax with a write-once
//! transposition table terminates.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::bitstr::BitString;
use crate::game::{
    active_player, apply_move, is_terminal, legal_bundles, run_referee, virtual_complexity,
    GameConfig, GameError, GameState, IncTarget, Move, Player, Verdict,
};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CanonicalState {
    counters: Vec<((BitString, u32), u64)>,
    long_counts: Vec<(u32, u64)>,
    rem_alice: u64,
    rem_bob: u64,
}

/// Projects a state onto what can still influence play: counters at priced
/// or queried short pairs, long counts at priced long levels, and budgets.
/// Long counts at unpriced levels are environment bookkeeping no move can
/// touch and no query can see, so they stay out of the key.
pub fn canonicalize(cfg: &GameConfig, st: &GameState) -> CanonicalState {
    let mut relevant: BTreeMap<(BitString, u32), u64> = BTreeMap::new();
    for (x, k) in cfg.referee.support() {
        if !cfg.is_long(&x) {
            relevant.insert((x.clone(), k), st.counter(&x, k));
        }
    }
    for (x, q) in cfg.prices.keys() {
        if !cfg.is_long(x) {
            relevant.insert((x.clone(), *q), st.counter(x, *q));
        }
    }
    CanonicalState {
        counters: relevant.into_iter().collect(),
        long_counts: cfg
            .long_prices
            .keys()
            .map(|q| (*q, st.long_counts.get(q).copied().unwrap_or(0)))
            .collect(),
        rem_alice: st.rem_alice,
        rem_bob: st.rem_bob,
    }
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("explored more than {0} states")]
    StateCap(usize),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error("stealing requires a game Bob wins")]
    NotBobWin,
    #[error("strategy violation: {0}")]
    StrategyViolation(String),
    #[error("virtual complexity of {x} rose from {from} to {to}")]
    MonotonicityViolation { x: BitString, from: u32, to: u32 },
}

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub max_states: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            max_states: 10_000_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub winner: Player,
    /// Winning move for every explored state where the winner is to move.
    pub strategy: HashMap<CanonicalState, Move>,
    pub states_explored: usize,
    pub initial_output: u64,
}

fn eval(
    cfg: &GameConfig,
    st: &GameState,
    memo: &mut HashMap<CanonicalState, (Player, Option<Move>)>,
    visited: &mut usize,
    max_states: usize,
) -> Result<Player, SolverError> {
    let key = canonicalize(cfg, st);
    if let Some((winner, _)) = memo.get(&key) {
        return Ok(*winner);
    }
    *visited += 1;
    if *visited > max_states {
        return Err(SolverError::StateCap(max_states));
    }
    let output = run_referee(cfg, st)?;
    let active = active_player(output, cfg.target);
    let bundles = legal_bundles(cfg, st)?;
    if bundles.is_empty() {
        let winner = if output != cfg.target {
            Player::Alice
        } else {
            Player::Bob
        };
        memo.insert(key, (winner, None));
        return Ok(winner);
    }
    for mv in &bundles {
        let child = apply_move(cfg, st, mv)?;
        if eval(cfg, &child, memo, visited, max_states)? == active {
            memo.insert(key, (active, Some(mv.clone())));
            return Ok(active);
        }
    }
    memo.insert(key, (active.opponent(), None));
    Ok(active.opponent())
}

pub fn solve(cfg: &GameConfig, opts: SolveOptions) -> Result<SolveResult, SolverError> {
    solve_from(cfg, &GameState::initial(cfg), opts)
}

/// Solve treating `state` as the starting position; used to recover when an
/// external event pushed a live game off the solved tree.
pub fn solve_from(
    cfg: &GameConfig,
    state: &GameState,
    opts: SolveOptions,
) -> Result<SolveResult, SolverError> {
    let initial_output = run_referee(cfg, state)?;
    let mut memo = HashMap::new();
    let mut visited = 0usize;
    let winner = eval(cfg, state, &mut memo, &mut visited, opts.max_states)?;
    let states_explored = memo.len();
    let mut strategy = HashMap::new();
    for (key, (state_winner, mv)) in memo {
        if state_winner == winner {
            if let Some(mv) = mv {
                strategy.insert(key, mv);
            }
        }
    }
    Ok(SolveResult {
        winner,
        strategy,
        states_explored,
        initial_output,
    })
}

/// Tracks that no short string ever gets more complex during a replay.
pub struct MonotonicityWatcher {
    watched: Vec<BitString>,
    last: Vec<u32>,
    pub checks: u64,
}

impl MonotonicityWatcher {
    pub fn new(cfg: &GameConfig, st: &GameState) -> Self {
        let mut watched: Vec<BitString> = cfg
            .referee
            .support()
            .into_iter()
            .map(|(x, _)| x)
            .chain(cfg.prices.keys().map(|(x, _)| x.clone()))
            .filter(|x| !cfg.is_long(x))
            .collect();
        watched.sort();
        watched.dedup();
        let last = watched
            .iter()
            .map(|x| virtual_complexity(cfg, st, x))
            .collect();
        MonotonicityWatcher {
            watched,
            last,
            checks: 0,
        }
    }

    pub fn observe(&mut self, cfg: &GameConfig, st: &GameState) -> Result<(), SolverError> {
        for (i, x) in self.watched.iter().enumerate() {
            let now = virtual_complexity(cfg, st, x);
            self.checks += 1;
            if now > self.last[i] {
                return Err(SolverError::MonotonicityViolation {
                    x: x.clone(),
                    from: self.last[i],
                    to: now,
                });
            }
            self.last[i] = now;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ReplayStats {
    pub replays: usize,
    pub total_moves: usize,
    pub monotonicity_checks: u64,
}

/// Replays the winner's strategy against random legal adversaries and checks
/// that the promised winner always wins. Also enforces complexity
/// monotonicity along every replay.
pub fn verify_strategy(
    cfg: &GameConfig,
    result: &SolveResult,
    runs: usize,
    seed: u64,
) -> Result<ReplayStats, SolverError> {
    let mut stats = ReplayStats::default();
    for run in 0..runs {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(run as u64));
        let mut st = GameState::initial(cfg);
        let mut watcher = MonotonicityWatcher::new(cfg, &st);
        loop {
            if let Some(verdict) = is_terminal(cfg, &st)? {
                if verdict.winner != result.winner {
                    return Err(SolverError::StrategyViolation(format!(
                        "promised {} but {} won with output {}",
                        result.winner, verdict.winner, verdict.final_output
                    )));
                }
                break;
            }
            let output = run_referee(cfg, &st)?;
            let active = active_player(output, cfg.target);
            let mv = if active == result.winner {
                result
                    .strategy
                    .get(&canonicalize(cfg, &st))
                    .cloned()
                    .ok_or_else(|| {
                        SolverError::StrategyViolation(format!(
                            "no strategy entry at turn {}",
                            st.turn
                        ))
                    })?
            } else {
                let bundles = legal_bundles(cfg, &st)?;
                bundles[rng.random_range(0..bundles.len())].clone()
            };
            st = apply_move(cfg, &st, &mv)?;
            watcher.observe(cfg, &st)?;
            stats.total_moves += 1;
        }
        stats.monotonicity_checks += watcher.checks;
        stats.replays += 1;
    }
    Ok(stats)
}

/// Role swap of a solved Bob win: the machine cannot see one extra long
/// string made simple just below the floor, so against the shifted target
/// the old Bob strategy, played by Alice, pins the output to the old target.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StolenStrategy {
    pub dummy_level: u32,
    pub adjusted_target: u64,
}

pub fn steal(cfg: &GameConfig, result: &SolveResult) -> Result<StolenStrategy, SolverError> {
    if result.winner != Player::Bob {
        return Err(SolverError::NotBobWin);
    }
    Ok(StolenStrategy {
        dummy_level: cfg.floor - 1,
        adjusted_target: cfg.target + 1,
    })
}

/// The instance the stolen strategy is played in: same machine, target one
/// higher, and the budget pools swapped with the roles.
pub fn adjusted_config(cfg: &GameConfig, stolen: &StolenStrategy) -> GameConfig {
    GameConfig {
        target: stolen.adjusted_target,
        budget_alice: cfg.budget_bob,
        budget_bob: cfg.budget_alice,
        ..cfg.clone()
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct StolenStats {
    pub replays: usize,
    pub total_moves: usize,
    pub monotonicity_checks: u64,
    /// Output the machine stabilized at in every replay.
    pub final_output: u64,
}

/// Executes a stolen Bob strategy as Alice against random legal adversaries.
///
/// The executor mirrors the original game: whenever the output disagrees
/// with the original target the strategy holder plays the recorded Bob move
/// (composing consecutive moves into one response), and when the output sits
/// at the original target the adversary, spending the swapped budget pool,
/// may perturb it. The adversary runs out of changes eventually, and every
/// replay therefore ends at the original target, which differs from the
/// adjusted target: an Alice win in the adjusted instance.
pub fn verify_stolen(
    cfg: &GameConfig,
    result: &SolveResult,
    stolen: &StolenStrategy,
    runs: usize,
    seed: u64,
) -> Result<StolenStats, SolverError> {
    if result.winner != Player::Bob {
        return Err(SolverError::NotBobWin);
    }
    let mut stats = StolenStats::default();
    for run in 0..runs {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(run as u64));
        let mut st = GameState::initial(cfg);
        // the invisible pre-game dummy, recorded but never priced
        st.bump_long(stolen.dummy_level, 1);
        let mut watcher = MonotonicityWatcher::new(cfg, &st);
        loop {
            let output = run_referee(cfg, &st)?;
            if output != cfg.target {
                let mv = result
                    .strategy
                    .get(&canonicalize(cfg, &st))
                    .cloned()
                    .ok_or_else(|| {
                        SolverError::StrategyViolation(format!(
                            "stolen strategy has no entry at turn {} (output {output})",
                            st.turn
                        ))
                    })?;
                st = apply_move(cfg, &st, &mv)?;
                watcher.observe(cfg, &st)?;
                stats.total_moves += 1;
                continue;
            }
            let bundles = legal_bundles(cfg, &st)?;
            if bundles.is_empty() {
                // adversary exhausted at the original target; in the
                // adjusted instance this output misses the target by one
                if output == stolen.adjusted_target {
                    return Err(SolverError::StrategyViolation(
                        "stabilized at the adjusted target".to_string(),
                    ));
                }
                stats.final_output = output;
                break;
            }
            let mv = &bundles[rng.random_range(0..bundles.len())];
            st = apply_move(cfg, &st, mv)?;
            watcher.observe(cfg, &st)?;
            stats.total_moves += 1;
        }
        stats.monotonicity_checks += watcher.checks;
        stats.replays += 1;
    }
    Ok(stats)
}

pub fn format_increments(increments: &[crate::game::Increment]) -> String {
    let mut out = String::new();
    for (i, inc) in increments.iter().enumerate() {
        if i > 0 {
            out.push(';');
        }
        match &inc.target {
            IncTarget::Short(x) => write!(out, "({},{},+{})", x, inc.level, inc.delta).unwrap(),
            IncTarget::Long => write!(out, "(LONG,{},+{})", inc.level, inc.delta).unwrap(),
        }
    }
    out
}

/// Deterministic showcase game: the winner follows the solved strategy, the
/// loser always plays the first legal bundle. Returns one formatted line per
/// move and the final verdict.
pub fn trace_play(
    cfg: &GameConfig,
    result: &SolveResult,
) -> Result<(Vec<String>, Verdict), SolverError> {
    let mut st = GameState::initial(cfg);
    let mut lines = Vec::new();
    loop {
        if let Some(verdict) = is_terminal(cfg, &st)? {
            return Ok((lines, verdict));
        }
        let output = run_referee(cfg, &st)?;
        let active = active_player(output, cfg.target);
        let mv = if active == result.winner {
            result
                .strategy
                .get(&canonicalize(cfg, &st))
                .cloned()
                .ok_or_else(|| {
                    SolverError::StrategyViolation(format!("no strategy entry at turn {}", st.turn))
                })?
        } else {
            legal_bundles(cfg, &st)?[0].clone()
        };
        st = apply_move(cfg, &st, &mv)?;
        let new_output = run_referee(cfg, &st)?;
        lines.push(format!(
            "turn={} player={} cost={} inc={} out={}",
            st.turn,
            mv.player.letter(),
            mv.cost(),
            format_increments(&mv.increments),
            new_output
        ));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::referee::{RefereeNode, RefereeProgram};
    use std::collections::BTreeMap;

    fn bs(s: &str) -> BitString {
        BitString::parse(s).unwrap()
    }

    fn flip_config() -> GameConfig {
        GameConfig {
            referee: RefereeProgram {
                root: RefereeNode::Query {
                    x: bs("01"),
                    k: 3,
                    yes: Box::new(RefereeNode::Leaf(1)),
                    no: Box::new(RefereeNode::Leaf(0)),
                },
                max_depth: 1,
                max_query_len: 2,
            },
            target: 0,
            init_complexity: BTreeMap::from([(bs("01"), 5)]),
            c0: 1,
            prices: BTreeMap::from([((bs("01"), 3), 2)]),
            init_counters: BTreeMap::new(),
            budget_alice: 2,
            budget_bob: 0,
            floor: 1,
            long_threshold: 4,
            long_prices: BTreeMap::new(),
        }
    }

    /// Two-phase game: Bob can push the output to the target, Alice can then
    /// push it away once, after which Bob is out of thresholds.
    fn tug_config(budget_alice: u64, budget_bob: u64) -> GameConfig {
        GameConfig {
            referee: RefereeProgram {
                root: RefereeNode::Query {
                    x: bs("01"),
                    k: 5,
                    yes: Box::new(RefereeNode::Query {
                        x: bs("01"),
                        k: 3,
                        yes: Box::new(RefereeNode::Leaf(0)),
                        no: Box::new(RefereeNode::Leaf(1)),
                    }),
                    no: Box::new(RefereeNode::Leaf(0)),
                },
                max_depth: 2,
                max_query_len: 2,
            },
            target: 1,
            init_complexity: BTreeMap::from([(bs("01"), 7)]),
            c0: 1,
            prices: BTreeMap::from([((bs("01"), 5), 2), ((bs("01"), 3), 2)]),
            init_counters: BTreeMap::new(),
            budget_alice,
            budget_bob,
            floor: 1,
            long_threshold: 4,
            long_prices: BTreeMap::new(),
        }
    }

    #[test]
    fn alice_wins_single_flip() {
        let cfg = flip_config();
        let result = solve(&cfg, SolveOptions::default()).unwrap();
        assert_eq!(result.winner, Player::Alice);
        assert_eq!(result.initial_output, 0);
        assert!(!result.strategy.is_empty());
        let stats = verify_strategy(&cfg, &result, 20, 7).unwrap();
        assert_eq!(stats.replays, 20);
    }

    #[test]
    fn bob_wins_when_alice_cannot_pay() {
        let mut cfg = flip_config();
        cfg.budget_alice = 1;
        let result = solve(&cfg, SolveOptions::default()).unwrap();
        assert_eq!(result.winner, Player::Bob);
        verify_strategy(&cfg, &result, 20, 3).unwrap();
    }

    #[test]
    fn tug_of_war_depends_on_budgets() {
        let alice = solve(&tug_config(2, 2), SolveOptions::default()).unwrap();
        assert_eq!(alice.winner, Player::Alice);
        verify_strategy(&tug_config(2, 2), &alice, 20, 11).unwrap();

        let bob = solve(&tug_config(1, 2), SolveOptions::default()).unwrap();
        assert_eq!(bob.winner, Player::Bob);
        verify_strategy(&tug_config(1, 2), &bob, 20, 13).unwrap();
    }

    #[test]
    fn canonical_merges_irrelevant_counters() {
        let cfg = flip_config();
        let a = GameState::initial(&cfg);
        let mut b = a.clone();
        b.bump_short(bs("1111"), 9, 4); // unpriced, unqueried
        assert_eq!(canonicalize(&cfg, &a), canonicalize(&cfg, &b));
        let mut c = a.clone();
        c.bump_short(bs("01"), 3, 1);
        assert_ne!(canonicalize(&cfg, &a), canonicalize(&cfg, &c));
    }

    #[test]
    fn state_cap_respected() {
        let cfg = tug_config(3, 3);
        let err = solve(&cfg, SolveOptions { max_states: 1 }).unwrap_err();
        assert!(matches!(err, SolverError::StateCap(1)));
    }

    #[test]
    fn steal_requires_bob_win() {
        let cfg = flip_config();
        let alice_win = solve(&cfg, SolveOptions::default()).unwrap();
        assert!(matches!(
            steal(&cfg, &alice_win),
            Err(SolverError::NotBobWin)
        ));
    }

    #[test]
    fn stolen_constant_referee() {
        let cfg = GameConfig {
            referee: RefereeProgram::constant(0),
            prices: BTreeMap::new(),
            ..flip_config()
        };
        let result = solve(&cfg, SolveOptions::default()).unwrap();
        assert_eq!(result.winner, Player::Bob);
        let stolen = steal(&cfg, &result).unwrap();
        assert_eq!(stolen.adjusted_target, 1);
        assert_eq!(stolen.dummy_level, 0);
        let stats = verify_stolen(&cfg, &result, &stolen, 5, 42).unwrap();
        assert_eq!(stats.final_output, 0);
        assert_eq!(stats.replays, 5);
    }

    #[test]
    fn stolen_tug_of_war() {
        let cfg = tug_config(1, 2);
        let result = solve(&cfg, SolveOptions::default()).unwrap();
        assert_eq!(result.winner, Player::Bob);
        let stolen = steal(&cfg, &result).unwrap();
        let stats = verify_stolen(&cfg, &result, &stolen, 50, 99).unwrap();
        assert_eq!(stats.final_output, cfg.target);
        assert_eq!(stats.replays, 50);
    }

    #[test]
    fn trace_lines_shape() {
        let cfg = flip_config();
        let result = solve(&cfg, SolveOptions::default()).unwrap();
        let (lines, verdict) = trace_play(&cfg, &result).unwrap();
        assert_eq!(lines, vec!["turn=1 player=A cost=2 inc=(01,3,+2) out=1"]);
        assert_eq!(verdict.winner, Player::Alice);
        assert_eq!(verdict.final_output, 1);
    }
}
