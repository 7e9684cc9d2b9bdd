//! The two-player complexity-manipulation game.
//!
//! A referee program reads a complexity oracle and prints an integer. Alice
//! wants the final output to differ from the target; Bob wants it to match.
//! The oracle is virtual: a string's complexity is the minimum of its initial
//! complexity and every priced level whose counter has reached its price.
//! Players move by buying counter increments. The unsatisfied player is the
//! one who must move, and a move must change the referee's output; whoever
//! must move but cannot loses.
//!
//! Strings longer than the configured threshold are "long": their identity
//! is never tracked. Moves touch them only through anonymous per-level
//! counts, and a referee that names one (validated configs never allow it)
//! is answered from the string's initial complexity alone.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::bitstr::BitString;
use crate::referee::{RefereeError, RefereeProgram};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Player {
    Alice,
    Bob,
}

impl Player {
    pub fn opponent(self) -> Player {
        match self {
            Player::Alice => Player::Bob,
            Player::Bob => Player::Alice,
        }
    }

    pub fn letter(self) -> char {
        match self {
            Player::Alice => 'A',
            Player::Bob => 'B',
        }
    }
}

impl std::fmt::Display for Player {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Player::Alice => f.write_str("Alice"),
            Player::Bob => f.write_str("Bob"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum IncTarget {
    Short(BitString),
    Long,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Increment {
    pub target: IncTarget,
    pub level: u32,
    pub delta: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Move {
    pub player: Player,
    pub increments: Vec<Increment>,
}

impl Move {
    pub fn cost(&self) -> u64 {
        self.increments.iter().map(|inc| inc.delta).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verdict {
    pub winner: Player,
    pub final_output: u64,
    pub turns: u32,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GameError {
    #[error("{mover} moved but {active} is active")]
    NotYourTurn { mover: Player, active: Player },
    #[error("{player} cannot pay {cost} with {remaining} remaining")]
    InsufficientBudget {
        player: Player,
        cost: u64,
        remaining: u64,
    },
    #[error("increment at level {level} below floor {floor}")]
    BelowFloor { level: u32, floor: u32 },
    #[error("no long-string price configured at level {0}")]
    LongLevelUnavailable(u32),
    #[error("increment deltas must be at least 1")]
    ZeroDelta,
    #[error("short increment names the long string {0}")]
    LongTargetNamed(BitString),
    #[error("move does not change the referee output")]
    NoOutputChange,
    #[error("referee fault: {0}")]
    Referee(#[from] RefereeError),
    #[error("invalid configuration: {0}")]
    Config(String),
}

/// Static description of one game instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GameConfig {
    pub referee: RefereeProgram,
    pub target: u64,
    /// Explicit initial complexities; strings absent here start at |x| + c0.
    pub init_complexity: BTreeMap<BitString, u32>,
    pub c0: u32,
    /// Price B(x, q) >= 1 per manipulable pair.
    pub prices: BTreeMap<(BitString, u32), u64>,
    pub init_counters: BTreeMap<(BitString, u32), u64>,
    pub budget_alice: u64,
    pub budget_bob: u64,
    /// Lowest level a move may touch.
    pub floor: u32,
    /// Strings strictly longer than this are long.
    pub long_threshold: u32,
    /// Levels open to anonymous long-string allocations, with the price of
    /// completing one string at that level.
    pub long_prices: BTreeMap<u32, u64>,
}

impl GameConfig {
    /// Largest output the referee may print: 2^floor - 1.
    pub fn output_cap(&self) -> u64 {
        if self.floor >= 63 {
            u64::MAX
        } else {
            (1u64 << self.floor) - 1
        }
    }

    pub fn validate(&self) -> Result<(), GameError> {
        if self.floor < 1 {
            return Err(GameError::Config("floor must be at least 1".to_string()));
        }
        self.referee.validate()?;
        if self.referee.max_query_len > self.long_threshold {
            return Err(GameError::Config(format!(
                "referee may query strings of length {} but long threshold is {}",
                self.referee.max_query_len, self.long_threshold
            )));
        }
        for ((x, q), &b) in &self.prices {
            if b == 0 {
                return Err(GameError::Config(format!("price for ({x}, {q}) is zero")));
            }
            if *q < self.floor {
                return Err(GameError::Config(format!(
                    "priced level {q} below floor {}",
                    self.floor
                )));
            }
            if x.len() as u32 > self.long_threshold {
                return Err(GameError::Config(format!(
                    "price names long string {x}; long levels must be used instead"
                )));
            }
        }
        for (q, &b) in &self.long_prices {
            if b == 0 {
                return Err(GameError::Config(format!("long price at level {q} is zero")));
            }
            if *q < self.floor {
                return Err(GameError::Config(format!(
                    "long-priced level {q} below floor {}",
                    self.floor
                )));
            }
        }
        if self.target > self.output_cap() {
            return Err(GameError::Config(format!(
                "target {} exceeds output cap {}",
                self.target,
                self.output_cap()
            )));
        }
        if self.referee.max_output() > self.output_cap() {
            return Err(GameError::Config(format!(
                "referee output {} exceeds output cap {}",
                self.referee.max_output(),
                self.output_cap()
            )));
        }
        Ok(())
    }

    pub fn is_long(&self, x: &BitString) -> bool {
        x.len() as u32 > self.long_threshold
    }

    /// Initial complexity of a string before any play.
    pub fn init_complexity_of(&self, x: &BitString) -> u32 {
        match self.init_complexity.get(x) {
            Some(&c) => c,
            None => x.len() as u32 + self.c0,
        }
    }
}

/// Mutable side of a game in progress.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GameState {
    pub counters: BTreeMap<(BitString, u32), u64>,
    pub long_counts: BTreeMap<u32, u64>,
    pub rem_alice: u64,
    pub rem_bob: u64,
    pub turn: u32,
    pub history: Vec<Move>,
}

impl GameState {
    pub fn initial(cfg: &GameConfig) -> GameState {
        GameState {
            counters: cfg.init_counters.clone(),
            long_counts: BTreeMap::new(),
            rem_alice: cfg.budget_alice,
            rem_bob: cfg.budget_bob,
            turn: 0,
            history: Vec::new(),
        }
    }

    pub fn remaining(&self, player: Player) -> u64 {
        match player {
            Player::Alice => self.rem_alice,
            Player::Bob => self.rem_bob,
        }
    }

    pub fn counter(&self, x: &BitString, q: u32) -> u64 {
        *self.counters.get(&(x.clone(), q)).unwrap_or(&0)
    }

    /// Raw counter update outside the move protocol (environment bookkeeping,
    /// not a legal-move application).
    pub fn bump_short(&mut self, x: BitString, level: u32, delta: u64) {
        *self.counters.entry((x, level)).or_insert(0) += delta;
    }

    pub fn bump_long(&mut self, level: u32, delta: u64) {
        *self.long_counts.entry(level).or_insert(0) += delta;
    }

    /// Completed anonymous long strings at a level: counter units divided by
    /// the per-string price.
    pub fn long_simple_count(&self, cfg: &GameConfig, level: u32) -> u64 {
        let units = *self.long_counts.get(&level).unwrap_or(&0);
        match cfg.long_prices.get(&level) {
            Some(&price) => units / price,
            None => units,
        }
    }
}

/// Current virtual complexity of a short string: the initial complexity, or
/// any priced level whose counter has reached the price, whichever is least.
pub fn virtual_complexity(cfg: &GameConfig, st: &GameState, x: &BitString) -> u32 {
    let mut best = cfg.init_complexity_of(x);
    if cfg.is_long(x) {
        return best;
    }
    for ((px, q), &price) in cfg.prices.range((x.clone(), 0)..=(x.clone(), u32::MAX)) {
        debug_assert_eq!(px, x);
        if *q < best && st.counter(x, *q) >= price {
            best = *q;
        }
    }
    best
}

pub fn oracle_answer(cfg: &GameConfig, st: &GameState, x: &BitString, k: u32) -> bool {
    virtual_complexity(cfg, st, x) <= k
}

pub fn run_referee(cfg: &GameConfig, st: &GameState) -> Result<u64, GameError> {
    Ok(cfg
        .referee
        .evaluate_checked(|x, k| oracle_answer(cfg, st, x, k))?)
}

/// The unsatisfied player: Alice while the machine agrees with the target,
/// Bob while it does not.
pub fn active_player(output: u64, target: u64) -> Player {
    if output == target {
        Player::Alice
    } else {
        Player::Bob
    }
}

fn apply_increments(st: &mut GameState, mv: &Move) {
    for inc in &mv.increments {
        match &inc.target {
            IncTarget::Short(x) => *st.counters.entry((x.clone(), inc.level)).or_insert(0) += inc.delta,
            IncTarget::Long => *st.long_counts.entry(inc.level).or_insert(0) += inc.delta,
        }
    }
}

pub fn apply_move(cfg: &GameConfig, st: &GameState, mv: &Move) -> Result<GameState, GameError> {
    let output = run_referee(cfg, st)?;
    let active = active_player(output, cfg.target);
    if mv.player != active {
        return Err(GameError::NotYourTurn {
            mover: mv.player,
            active,
        });
    }
    for inc in &mv.increments {
        if inc.delta == 0 {
            return Err(GameError::ZeroDelta);
        }
        if inc.level < cfg.floor {
            return Err(GameError::BelowFloor {
                level: inc.level,
                floor: cfg.floor,
            });
        }
        match &inc.target {
            IncTarget::Short(x) => {
                if cfg.is_long(x) {
                    return Err(GameError::LongTargetNamed(x.clone()));
                }
            }
            IncTarget::Long => {
                if !cfg.long_prices.contains_key(&inc.level) {
                    return Err(GameError::LongLevelUnavailable(inc.level));
                }
            }
        }
    }
    let cost = mv.cost();
    let remaining = st.remaining(mv.player);
    if cost > remaining {
        return Err(GameError::InsufficientBudget {
            player: mv.player,
            cost,
            remaining,
        });
    }
    let mut next = st.clone();
    apply_increments(&mut next, mv);
    if run_referee(cfg, &next)? == output {
        return Err(GameError::NoOutputChange);
    }
    match mv.player {
        Player::Alice => next.rem_alice -= cost,
        Player::Bob => next.rem_bob -= cost,
    }
    next.turn += 1;
    next.history.push(mv.clone());
    Ok(next)
}

/// Replays a move list from the initial position.
pub fn replay(cfg: &GameConfig, history: &[Move]) -> Result<GameState, GameError> {
    let mut st = GameState::initial(cfg);
    for mv in history {
        st = apply_move(cfg, &st, mv)?;
    }
    Ok(st)
}

/// Minimal output-changing bundles available to the active player, cheapest
/// representative per induced oracle pattern, in deterministic order.
///
/// Every output change must newly satisfy some priced threshold, so bundles
/// are built from exact threshold completions: for each manipulable string,
/// at most one level strictly below its current virtual complexity. Bundles
/// that leave the same answers on the referee's support are merged, keeping
/// the cheaper one; spending more for the same answers only shrinks the
/// mover's future options.
pub fn legal_bundles(cfg: &GameConfig, st: &GameState) -> Result<Vec<Move>, GameError> {
    let output = run_referee(cfg, st)?;
    let player = active_player(output, cfg.target);
    let budget = st.remaining(player);
    let support: Vec<(BitString, u32)> = cfg.referee.support().into_iter().collect();

    // Candidate completions per string: (x, level, deficit), level below the
    // current virtual complexity and affordable on its own.
    let mut per_string: BTreeMap<BitString, Vec<(u32, u64)>> = BTreeMap::new();
    for ((x, q), &price) in &cfg.prices {
        let current = virtual_complexity(cfg, st, x);
        if *q >= current {
            continue;
        }
        let have = st.counter(x, *q);
        let deficit = price.saturating_sub(have);
        debug_assert!(deficit > 0, "uncrossed threshold must have a deficit");
        if deficit <= budget {
            per_string.entry(x.clone()).or_default().push((*q, deficit));
        }
    }

    let strings: Vec<(&BitString, &Vec<(u32, u64)>)> = per_string.iter().collect();
    let mut best: BTreeMap<Vec<bool>, Move> = BTreeMap::new();

    // Cartesian walk over "skip or complete one level" per string, in
    // shortlex order of (string, level).
    let mut picks: Vec<Option<usize>> = vec![None; strings.len()];
    loop {
        let mut cost = 0u64;
        for (i, pick) in picks.iter().enumerate() {
            if let Some(j) = pick {
                cost += strings[i].1[*j].1;
            }
        }
        if cost >= 1 && cost <= budget {
            let mut trial = st.clone();
            let mut increments = Vec::new();
            for (i, pick) in picks.iter().enumerate() {
                if let Some(j) = pick {
                    let (level, deficit) = strings[i].1[*j];
                    trial.bump_short(strings[i].0.clone(), level, deficit);
                    increments.push(Increment {
                        target: IncTarget::Short(strings[i].0.clone()),
                        level,
                        delta: deficit,
                    });
                }
            }
            let new_output = run_referee(cfg, &trial)?;
            if new_output != output {
                let pattern: Vec<bool> = support
                    .iter()
                    .map(|(x, k)| oracle_answer(cfg, &trial, x, *k))
                    .collect();
                increments.sort();
                let mv = Move { player, increments };
                match best.get(&pattern) {
                    Some(existing) if existing.cost() <= cost => {}
                    _ => {
                        best.insert(pattern, mv);
                    }
                }
            }
        }
        // advance the odometer
        let mut i = 0;
        loop {
            if i == strings.len() {
                let mut bundles: Vec<Move> = best.into_values().collect();
                bundles.sort_by(|a, b| a.increments.cmp(&b.increments));
                return Ok(bundles);
            }
            picks[i] = match picks[i] {
                None if !strings[i].1.is_empty() => Some(0),
                Some(j) if j + 1 < strings[i].1.len() => Some(j + 1),
                _ => {
                    picks[i] = None;
                    i += 1;
                    continue;
                }
            };
            break;
        }
    }
}

pub fn is_terminal(cfg: &GameConfig, st: &GameState) -> Result<Option<Verdict>, GameError> {
    let output = run_referee(cfg, st)?;
    if legal_bundles(cfg, st)?.is_empty() {
        let winner = if output != cfg.target {
            Player::Alice
        } else {
            Player::Bob
        };
        Ok(Some(Verdict {
            winner,
            final_output: output,
            turns: st.turn,
        }))
    } else {
        Ok(None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::referee::RefereeNode;

    fn bs(s: &str) -> BitString {
        BitString::parse(s).unwrap()
    }

    fn flip_referee(x: &str, k: u32, yes: u64, no: u64) -> RefereeProgram {
        RefereeProgram {
            root: RefereeNode::Query {
                x: bs(x),
                k,
                yes: Box::new(RefereeNode::Leaf(yes)),
                no: Box::new(RefereeNode::Leaf(no)),
            },
            max_depth: 1,
            max_query_len: x.len() as u32,
        }
    }

    fn base_config() -> GameConfig {
        GameConfig {
            referee: flip_referee("01", 3, 1, 0),
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

    #[test]
    fn virtual_complexity_examples() {
        let mut cfg = base_config();
        let mut st = GameState::initial(&cfg);

        // no counters: fall back to the initial complexity
        assert_eq!(virtual_complexity(&cfg, &st, &bs("01")), 5);

        // counter at the price: level 3 opens
        st.bump_short(bs("01"), 3, 2);
        assert_eq!(virtual_complexity(&cfg, &st, &bs("01")), 3);

        // a higher crossed level does not beat a lower one
        cfg.prices.insert((bs("01"), 4), 1);
        let mut st2 = GameState::initial(&cfg);
        st2.bump_short(bs("01"), 3, 1); // below price 2: not crossed
        st2.bump_short(bs("01"), 4, 1); // crossed
        assert_eq!(virtual_complexity(&cfg, &st2, &bs("01")), 4);

        // default rule for unknown strings
        assert_eq!(virtual_complexity(&cfg, &st, &bs("111")), 4);
    }

    #[test]
    fn oracle_monotone_in_k() {
        let cfg = base_config();
        let st = GameState::initial(&cfg);
        for k in 0..10u32 {
            if oracle_answer(&cfg, &st, &bs("01"), k) {
                assert!(oracle_answer(&cfg, &st, &bs("01"), k + 1));
            }
        }
    }

    #[test]
    fn run_referee_spec_cases() {
        let cfg = base_config();
        let mut st = GameState::initial(&cfg);
        assert_eq!(run_referee(&cfg, &st).unwrap(), 0);
        st.bump_short(bs("01"), 3, 2);
        assert_eq!(run_referee(&cfg, &st).unwrap(), 1);
    }

    #[test]
    fn active_player_rule() {
        assert_eq!(active_player(4, 4), Player::Alice);
        assert_eq!(active_player(3, 4), Player::Bob);
    }

    #[test]
    fn apply_move_flips_output() {
        let cfg = base_config();
        let st = GameState::initial(&cfg);
        let mv = Move {
            player: Player::Alice,
            increments: vec![Increment {
                target: IncTarget::Short(bs("01")),
                level: 3,
                delta: 2,
            }],
        };
        let next = apply_move(&cfg, &st, &mv).unwrap();
        assert_eq!(run_referee(&cfg, &next).unwrap(), 1);
        assert_eq!(next.rem_alice, 0);
        assert_eq!(next.turn, 1);

        // replay determinism
        assert_eq!(replay(&cfg, &next.history).unwrap(), next);
    }

    #[test]
    fn apply_move_rejections() {
        let cfg = base_config();
        let st = GameState::initial(&cfg);
        let inc = |delta| Increment {
            target: IncTarget::Short(bs("01")),
            level: 3,
            delta,
        };
        let bob = Move {
            player: Player::Bob,
            increments: vec![inc(2)],
        };
        assert!(matches!(
            apply_move(&cfg, &st, &bob),
            Err(GameError::NotYourTurn { .. })
        ));

        let too_dear = Move {
            player: Player::Alice,
            increments: vec![inc(3)],
        };
        assert!(matches!(
            apply_move(&cfg, &st, &too_dear),
            Err(GameError::InsufficientBudget { .. })
        ));

        let below = Move {
            player: Player::Alice,
            increments: vec![Increment {
                target: IncTarget::Short(bs("01")),
                level: 0,
                delta: 1,
            }],
        };
        assert!(matches!(
            apply_move(&cfg, &st, &below),
            Err(GameError::BelowFloor { .. })
        ));

        let useless = Move {
            player: Player::Alice,
            increments: vec![inc(1)],
        };
        assert_eq!(apply_move(&cfg, &st, &useless), Err(GameError::NoOutputChange));

        let long_named = Move {
            player: Player::Alice,
            increments: vec![Increment {
                target: IncTarget::Short(bs("010101")),
                level: 3,
                delta: 2,
            }],
        };
        assert!(matches!(
            apply_move(&cfg, &st, &long_named),
            Err(GameError::LongTargetNamed(_))
        ));
    }

    #[test]
    fn legal_bundles_single_flip() {
        let cfg = base_config();
        let st = GameState::initial(&cfg);
        let bundles = legal_bundles(&cfg, &st).unwrap();
        assert_eq!(bundles.len(), 1);
        assert_eq!(bundles[0].cost(), 2);
        assert_eq!(bundles[0].player, Player::Alice);
    }

    #[test]
    fn legal_bundles_keep_cheapest_pattern() {
        // two levels both flip the single query; only the cheaper survives
        let mut cfg = base_config();
        cfg.prices.insert((bs("01"), 2), 1);
        cfg.budget_alice = 5;
        let st = GameState::initial(&cfg);
        let bundles = legal_bundles(&cfg, &st).unwrap();
        assert_eq!(bundles.len(), 1);
        assert_eq!(bundles[0].cost(), 1);
        assert_eq!(bundles[0].increments[0].level, 2);
    }

    #[test]
    fn terminal_positions() {
        // constant referee at the target: Alice is active and stuck
        let cfg = GameConfig {
            referee: RefereeProgram::constant(0),
            ..base_config()
        };
        let st = GameState::initial(&cfg);
        let verdict = is_terminal(&cfg, &st).unwrap().unwrap();
        assert_eq!(verdict.winner, Player::Bob);
        assert_eq!(verdict.final_output, 0);

        // affordable flip exists: not terminal
        let cfg = base_config();
        let st = GameState::initial(&cfg);
        assert!(is_terminal(&cfg, &st).unwrap().is_none());

        // output already off target with Bob broke: Alice wins
        let mut cfg = base_config();
        cfg.target = 1;
        cfg.budget_bob = 0;
        cfg.budget_alice = 0;
        let st = GameState::initial(&cfg);
        let verdict = is_terminal(&cfg, &st).unwrap().unwrap();
        assert_eq!(verdict.winner, Player::Alice);
    }

    #[test]
    fn config_validation() {
        let mut cfg = base_config();
        cfg.prices.insert((bs("1"), 0), 1);
        assert!(matches!(cfg.validate(), Err(GameError::Config(_))));

        let mut cfg = base_config();
        cfg.prices.insert((bs("1"), 2), 0);
        assert!(matches!(cfg.validate(), Err(GameError::Config(_))));

        let mut cfg = base_config();
        cfg.long_threshold = 1;
        assert!(matches!(cfg.validate(), Err(GameError::Config(_))));

        let mut cfg = base_config();
        cfg.target = 100;
        assert!(matches!(cfg.validate(), Err(GameError::Config(_))));

        assert!(base_config().validate().is_ok());
    }

    #[test]
    fn long_bookkeeping() {
        let mut cfg = base_config();
        cfg.long_prices.insert(3, 2);
        let mut st = GameState::initial(&cfg);
        st.bump_long(3, 5);
        assert_eq!(st.long_simple_count(&cfg, 3), 2);
        // named long strings answer from initial complexity only
        assert!(!oracle_answer(&cfg, &st, &bs("0000000"), 3));
        assert!(oracle_answer(&cfg, &st, &bs("0000000"), 8));
    }
}
