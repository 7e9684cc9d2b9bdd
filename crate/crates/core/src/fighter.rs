//! Event loop that turns an enumeration stream into played games.
//!
//! A tower of thresholds splits complexity levels into zones, one per level.
//! Each level may hold a referee; when the stream first makes some string
//! simple enough for a zone's base threshold, that string becomes the zone's
//! candidate and a fresh game is opened against the current count of simple
//! strings. The loop then answers every later stream event: it translates the
//! event into the open games, plays the stored winning strategy forward, and
//! realizes every strategy increment as a directive that spends one input of
//! the corresponding length. Directives at a level abort everything above it,
//! so at any instant the managed levels form a prefix of active work.
//!
//! The simulator is deterministic: identical configuration and stream produce
//! an identical report, directive for directive.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::bitstr::{decode_tuple, encode_tuple, BitString};
use crate::game::{
    apply_move, legal_bundles, run_referee, virtual_complexity, GameConfig, GameError, GameState,
    IncTarget, Move, Player,
};
use crate::keylemma::{price_table, DeltaSource, KeyLemmaError};
use crate::referee::{parse_referee, RefereeError, RefereeProgram};
use crate::solver::{canonicalize, solve_from, CanonicalState, SolveOptions, SolverError};
use crate::toy::{EnumerationTrace, ToyDecompressor, ToyError, TraceEvent};

#[derive(Debug, Error)]
pub enum FighterError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("tower entries must start at 1 or above and strictly increase, with at least four entries")]
    BadTower,
    #[error("no zone covers complexity {0}")]
    OutOfZones(u64),
    #[error("level {0} is not backed by the tower")]
    UnmanagedLevel(usize),
    #[error("inputs of length {len} exhausted: all {cap} already consumed")]
    InputExhausted { len: u32, cap: u64 },
    #[error("resource bound violated by {check}: {detail}")]
    ResourceBoundViolated { check: &'static str, detail: String },
    #[error("parameters out of range: {0}")]
    ParamsOutOfRange(String),
    #[error("internal invariant broken: {0}")]
    Internal(String),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    KeyLemma(#[from] KeyLemmaError),
    #[error(transparent)]
    Toy(#[from] ToyError),
    #[error(transparent)]
    Referee(#[from] RefereeError),
}

/// The threshold tower a_0 < a_1 < ...; level l occupies the zone
/// (a_{2l-1}, a_{2l+1}] with base threshold n = a_{2l}.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tower {
    a: Vec<u64>,
}

impl Tower {
    /// Iterated exponentials 1, 2, 4, 16, 65536, cut off at machine width.
    pub fn standard() -> Tower {
        let mut a = vec![1u64];
        loop {
            let last = *a.last().unwrap();
            if last >= 64 {
                break;
            }
            a.push(1u64 << last);
        }
        Tower { a }
    }

    /// Any strictly increasing ladder; lets desk-sized runs exercise several
    /// levels at once.
    pub fn scaled(a: Vec<u64>) -> Result<Tower, FighterError> {
        if a.len() < 4 || a[0] < 1 || a.windows(2).any(|w| w[0] >= w[1]) {
            return Err(FighterError::BadTower);
        }
        Ok(Tower { a })
    }

    pub fn entries(&self) -> &[u64] {
        &self.a
    }

    /// Levels with a complete zone: both the base threshold and the zone top
    /// must exist in the ladder.
    pub fn level_count(&self) -> usize {
        self.a.len().saturating_sub(2) / 2
    }

    pub fn params(&self, level: usize, d: u32) -> Result<LevelParams, FighterError> {
        if level == 0 || level > self.level_count() {
            return Err(FighterError::UnmanagedLevel(level));
        }
        let n = u32::try_from(self.a[2 * level])
            .map_err(|_| FighterError::ParamsOutOfRange(format!("base threshold of level {level}")))?;
        let cap = u32::try_from(self.a[2 * level + 1])
            .map_err(|_| FighterError::ParamsOutOfRange(format!("zone top of level {level}")))?;
        let m = n
            .checked_add(d)
            .ok_or_else(|| FighterError::ParamsOutOfRange(format!("m = {n} + {d}")))?;
        Ok(LevelParams {
            level,
            n,
            m,
            cap,
            zone_low: self.a[2 * level - 1],
            zone_high: self.a[2 * level + 1],
        })
    }

    /// The unique level whose zone contains q, and whether q reaches the
    /// base threshold there.
    pub fn route(&self, q: u64) -> Result<(usize, RouteCase), FighterError> {
        for level in 1..=self.level_count() {
            if self.a[2 * level - 1] < q && q <= self.a[2 * level + 1] {
                let case = if q <= self.a[2 * level] {
                    RouteCase::NewCandidate
                } else {
                    RouteCase::NonCandidate
                };
                return Ok((level, case));
            }
        }
        Err(FighterError::OutOfZones(q))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RouteCase {
    NewCandidate,
    NonCandidate,
}

/// Everything one level needs: base threshold n, helper offset m = n + d,
/// zone bounds, and the largest game level cap (2^n on the standard tower,
/// the zone top otherwise).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LevelParams {
    pub level: usize,
    pub n: u32,
    pub m: u32,
    pub cap: u32,
    pub zone_low: u64,
    pub zone_high: u64,
}

/// One stream event: at `step`, the string `x` receives a description of
/// length `q`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BobEvent {
    pub step: u64,
    pub x: BitString,
    pub q: u32,
}

pub fn parse_events(text: &str) -> Result<Vec<BobEvent>, FighterError> {
    let mut events: Vec<BobEvent> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let tok: Vec<&str> = trimmed.split_whitespace().collect();
        if tok.len() != 6 || tok[0] != "step" || tok[2] != "x" || tok[4] != "q" {
            return Err(FighterError::Parse {
                line,
                msg: "expected: step <int> x <bits> q <int>".to_string(),
            });
        }
        let step: u64 = tok[1].parse().map_err(|_| FighterError::Parse {
            line,
            msg: format!("bad step {}", tok[1]),
        })?;
        let x = BitString::parse(tok[3]).map_err(|e| FighterError::Parse {
            line,
            msg: e.to_string(),
        })?;
        let q: u32 = tok[5].parse().map_err(|_| FighterError::Parse {
            line,
            msg: format!("bad level {}", tok[5]),
        })?;
        if let Some(prev) = events.last() {
            if step <= prev.step {
                return Err(FighterError::Parse {
                    line,
                    msg: format!("step {step} does not increase past {}", prev.step),
                });
            }
        }
        events.push(BobEvent { step, x, q });
    }
    Ok(events)
}

pub fn print_events(events: &[BobEvent]) -> String {
    let mut out = String::new();
    for ev in events {
        out.push_str(&format!("step {} x {} q {}\n", ev.step, ev.x, ev.q));
    }
    out
}

/// Where the threshold correction terms come from; the owned twin of
/// [`DeltaSource`].
#[derive(Debug, Clone)]
pub enum DeltaSpec {
    Fixed { l_star: u32, term_q: u32, term_n: u32 },
    Computed { dec: ToyDecompressor, time_bound: u64, max_len: u32 },
}

impl DeltaSpec {
    fn as_source(&self) -> DeltaSource<'_> {
        match self {
            DeltaSpec::Fixed {
                l_star,
                term_q,
                term_n,
            } => DeltaSource::Fixed {
                l_star: *l_star,
                term_q: *term_q,
                term_n: *term_n,
            },
            DeltaSpec::Computed {
                dec,
                time_bound,
                max_len,
            } => DeltaSource::Computed {
                dec,
                time_bound: *time_bound,
                max_len: *max_len,
            },
        }
    }
}

#[derive(Debug, Clone)]
pub struct FighterConfig {
    pub tower: Tower,
    /// Composite-machine overhead: stream descriptions of length q land at
    /// complexity q + d.
    pub d: u32,
    /// Budget multiplier: each side of a level-l game gets c1 * 2^(cap - n).
    pub c1: u64,
    /// Slack subtracted inside every threshold exponent.
    pub lambda: u32,
    /// Additive constant of the |x| + c0 fallback complexity.
    pub c0: u32,
    pub max_states: usize,
    /// Cap on how many game levels above m get priced, if given.
    pub price_span: Option<u32>,
    pub referees: BTreeMap<usize, RefereeProgram>,
    /// Extra strings priced at a level beyond the referee's support.
    pub extra_universe: BTreeMap<usize, Vec<BitString>>,
    pub delta: DeltaSpec,
}

impl FighterConfig {
    pub fn new(tower: Tower) -> FighterConfig {
        FighterConfig {
            tower,
            d: 5,
            c1: 1,
            lambda: 1,
            c0: 1,
            max_states: 1_000_000,
            price_span: None,
            referees: BTreeMap::new(),
            extra_universe: BTreeMap::new(),
            delta: DeltaSpec::Fixed {
                l_star: 0,
                term_q: 0,
                term_n: 0,
            },
        }
    }
}

/// Parses the line-oriented configuration; referenced files (referee bodies,
/// the optional conditional table) are pulled through `load`.
pub fn parse_fighter_config(
    text: &str,
    load: &mut dyn FnMut(&str) -> Result<String, FighterError>,
) -> Result<FighterConfig, FighterError> {
    let mut cfg = FighterConfig::new(Tower::standard());
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let tok: Vec<&str> = trimmed.split_whitespace().collect();
        let fail = |msg: String| FighterError::Parse { line, msg };
        match tok[0] {
            "tower" if tok.len() >= 2 && tok[1] == "standard" => {
                cfg.tower = Tower::standard();
            }
            "tower" if tok.len() >= 2 && tok[1] == "scaled" => {
                let vals: Result<Vec<u64>, _> = tok[2..].iter().map(|t| t.parse()).collect();
                let vals = vals.map_err(|_| fail("bad tower entry".to_string()))?;
                cfg.tower = Tower::scaled(vals)?;
            }
            "d" if tok.len() == 2 => {
                cfg.d = tok[1].parse().map_err(|_| fail("bad d".to_string()))?;
            }
            "c1" if tok.len() == 2 => {
                cfg.c1 = tok[1].parse().map_err(|_| fail("bad c1".to_string()))?;
            }
            "lambda" if tok.len() == 2 => {
                cfg.lambda = tok[1].parse().map_err(|_| fail("bad lambda".to_string()))?;
            }
            "c0" if tok.len() == 2 => {
                cfg.c0 = tok[1].parse().map_err(|_| fail("bad c0".to_string()))?;
            }
            "maxstates" if tok.len() == 2 => {
                cfg.max_states = tok[1].parse().map_err(|_| fail("bad maxstates".to_string()))?;
            }
            "pricespan" if tok.len() == 2 => {
                cfg.price_span =
                    Some(tok[1].parse().map_err(|_| fail("bad pricespan".to_string()))?);
            }
            "referee" if tok.len() == 3 => {
                let level: usize = tok[1].parse().map_err(|_| fail("bad level".to_string()))?;
                let body = load(tok[2])?;
                cfg.referees.insert(level, parse_referee(&body)?);
            }
            "universe" if tok.len() >= 2 => {
                let level: usize = tok[1].parse().map_err(|_| fail("bad level".to_string()))?;
                let mut strings = Vec::new();
                for t in &tok[2..] {
                    strings.push(BitString::parse(t).map_err(|e| fail(e.to_string()))?);
                }
                cfg.extra_universe.entry(level).or_default().extend(strings);
            }
            "delta" if tok.len() >= 2 && tok[1] == "fixed" => {
                let mut l_star = 0u32;
                let mut term_q = 0u32;
                let mut term_n = 0u32;
                for t in &tok[2..] {
                    let (key, val) = t
                        .split_once('=')
                        .ok_or_else(|| fail(format!("expected key=value, got {t}")))?;
                    let parsed: u32 =
                        val.parse().map_err(|_| fail(format!("bad value in {t}")))?;
                    match key {
                        "lstar" => l_star = parsed,
                        "tq" => term_q = parsed,
                        "tn" => term_n = parsed,
                        _ => return Err(fail(format!("unknown delta field {key}"))),
                    }
                }
                cfg.delta = DeltaSpec::Fixed {
                    l_star,
                    term_q,
                    term_n,
                };
            }
            "delta" if tok.len() >= 2 && tok[1] == "computed" => {
                let mut table = None;
                let mut time_bound = 64u64;
                let mut max_len = 16u32;
                for t in &tok[2..] {
                    let (key, val) = t
                        .split_once('=')
                        .ok_or_else(|| fail(format!("expected key=value, got {t}")))?;
                    match key {
                        "table" => table = Some(val.to_string()),
                        "time" => {
                            time_bound =
                                val.parse().map_err(|_| fail(format!("bad value in {t}")))?
                        }
                        "maxlen" => {
                            max_len = val.parse().map_err(|_| fail(format!("bad value in {t}")))?
                        }
                        _ => return Err(fail(format!("unknown delta field {key}"))),
                    }
                }
                let path = table.ok_or_else(|| fail("delta computed needs table=".to_string()))?;
                let body = load(&path)?;
                cfg.delta = DeltaSpec::Computed {
                    dec: parse_conditional_table(&body)?,
                    time_bound,
                    max_len,
                };
            }
            other => {
                return Err(fail(format!("unknown directive {other}")));
            }
        }
    }
    Ok(cfg)
}

/// Decompressor table with optional conditions, one entry per line:
/// `entry p <bits> out <bits> cost <int>` or
/// `entry p <bits> cond <bits> out <bits> cost <int>`.
pub fn parse_conditional_table(text: &str) -> Result<ToyDecompressor, FighterError> {
    let mut dec = ToyDecompressor::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let tok: Vec<&str> = trimmed.split_whitespace().collect();
        let fail = |msg: String| FighterError::Parse { line, msg };
        let parse_bits =
            |t: &str| BitString::parse(t).map_err(|e| FighterError::Parse { line, msg: e.to_string() });
        match tok.as_slice() {
            ["entry", "p", p, "out", out, "cost", cost] => {
                let cost: u64 = cost.parse().map_err(|_| fail("bad cost".to_string()))?;
                dec.insert(parse_bits(p)?, parse_bits(out)?, cost)?;
            }
            ["entry", "p", p, "cond", cond, "out", out, "cost", cost] => {
                let cost: u64 = cost.parse().map_err(|_| fail("bad cost".to_string()))?;
                dec.insert_conditional(parse_bits(p)?, parse_bits(cond)?, parse_bits(out)?, cost)?;
            }
            _ => {
                return Err(fail(
                    "expected: entry p <bits> [cond <bits>] out <bits> cost <int>".to_string(),
                ))
            }
        }
    }
    Ok(dec)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LevelStatus {
    Waiting,
    Active,
}

impl fmt::Display for LevelStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LevelStatus::Waiting => write!(f, "waiting"),
            LevelStatus::Active => write!(f, "active"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StrategyMode {
    Direct,
    Stolen,
}

impl fmt::Display for StrategyMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StrategyMode::Direct => write!(f, "direct"),
            StrategyMode::Stolen => write!(f, "stolen"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DirectiveKind {
    Dummy,
    Fuel,
    Payoff,
}

impl fmt::Display for DirectiveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DirectiveKind::Dummy => write!(f, "dummy"),
            DirectiveKind::Fuel => write!(f, "fuel"),
            DirectiveKind::Payoff => write!(f, "payoff"),
        }
    }
}

/// What a directive makes simple: a named string, or one fresh anonymous
/// long string.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DirectiveTarget {
    Short(BitString),
    LongFresh,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectiveRecord {
    pub seq: u64,
    pub step: u64,
    pub level: usize,
    pub kind: DirectiveKind,
    pub target: DirectiveTarget,
    /// Complexity the directive grants its target.
    pub complexity: u32,
    pub consumed_len: u32,
    /// The game counter the directive feeds, for fuel and payoffs.
    pub pair: Option<(BitString, u32)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionRecord {
    /// Position on the shared clock that also stamps directives.
    pub seq: u64,
    pub step: u64,
    pub level: usize,
    pub to: LevelStatus,
    pub cause: String,
}

#[derive(Debug, Clone)]
pub struct GameReport {
    pub mode: StrategyMode,
    pub winner: Player,
    pub base_target: u64,
    pub true_target: u64,
    pub output: u64,
    pub states_explored: usize,
    pub overdraft: bool,
    pub dormant: Option<String>,
}

#[derive(Debug, Clone)]
pub struct LevelReport {
    pub params: LevelParams,
    pub status: LevelStatus,
    pub candidates: u64,
    pub true_count: u64,
    pub game: Option<GameReport>,
}

#[derive(Debug, Clone)]
pub struct SimulationReport {
    pub levels: Vec<LevelReport>,
    pub directives: Vec<DirectiveRecord>,
    pub consumed: BTreeMap<u32, u64>,
    pub transitions: Vec<TransitionRecord>,
    pub warnings: Vec<String>,
    pub events_processed: u64,
    /// Composite-machine complexity of every string seen, after the run.
    pub complexity: BTreeMap<BitString, u32>,
}

struct LiveGame {
    cfg: GameConfig,
    state: GameState,
    strategy: HashMap<CanonicalState, Move>,
    mode: StrategyMode,
    base_target: u64,
    true_target: u64,
    winner: Player,
    states_explored: usize,
    w: BitString,
    fuel_serial: u64,
    preliminary: BTreeSet<(BitString, u32)>,
    paid: BTreeSet<(BitString, u32)>,
    dormant: Option<String>,
    overdraft: bool,
}

struct LevelRun {
    params: LevelParams,
    referee: RefereeProgram,
    universe: Vec<BitString>,
    status: LevelStatus,
    candidates: u64,
    game: Option<LiveGame>,
}

struct Simulation<'a> {
    cfg: &'a FighterConfig,
    levels: BTreeMap<usize, LevelRun>,
    v_events: Vec<TraceEvent>,
    synth_next: BTreeMap<u32, u64>,
    v_complexity: BTreeMap<BitString, u32>,
    u_complexity: BTreeMap<BitString, u32>,
    long_simple: BTreeMap<u32, u64>,
    consumed: BTreeMap<u32, u64>,
    directives: Vec<DirectiveRecord>,
    transitions: Vec<TransitionRecord>,
    warnings: Vec<String>,
    current_step: u64,
    events_processed: u64,
    /// Shared clock so directives and transitions merge into one timeline.
    clock: u64,
}

const WARNING_CAP: usize = 200;

fn take_input(consumed: &mut BTreeMap<u32, u64>, len: u32) -> Result<(), FighterError> {
    let cap = if len >= 63 { u64::MAX } else { 1u64 << len };
    let used = consumed.entry(len).or_insert(0);
    if *used >= cap {
        return Err(FighterError::InputExhausted { len, cap });
    }
    *used += 1;
    Ok(())
}

impl<'a> Simulation<'a> {
    fn new(cfg: &'a FighterConfig) -> Result<Simulation<'a>, FighterError> {
        let mut levels = BTreeMap::new();
        for (&level, referee) in &cfg.referees {
            let params = cfg.tower.params(level, cfg.d)?;
            referee.validate()?;
            let mut universe: BTreeSet<BitString> = referee
                .support()
                .into_iter()
                .map(|(x, _)| x)
                .collect();
            if let Some(extra) = cfg.extra_universe.get(&level) {
                universe.extend(extra.iter().cloned());
            }
            levels.insert(
                level,
                LevelRun {
                    params,
                    referee: referee.clone(),
                    universe: universe.into_iter().collect(),
                    status: LevelStatus::Waiting,
                    candidates: 0,
                    game: None,
                },
            );
        }
        Ok(Simulation {
            cfg,
            levels,
            v_events: Vec::new(),
            synth_next: BTreeMap::new(),
            v_complexity: BTreeMap::new(),
            u_complexity: BTreeMap::new(),
            long_simple: BTreeMap::new(),
            consumed: BTreeMap::new(),
            directives: Vec::new(),
            transitions: Vec::new(),
            warnings: Vec::new(),
            current_step: 0,
            events_processed: 0,
            clock: 0,
        })
    }

    fn tick(&mut self) -> u64 {
        self.clock += 1;
        self.clock
    }

    fn warn(&mut self, msg: String) {
        if self.warnings.len() < WARNING_CAP {
            self.warnings.push(msg);
        } else if self.warnings.len() == WARNING_CAP {
            self.warnings.push("further warnings suppressed".to_string());
        }
    }

    /// Strings counted simple at threshold m right now, anonymous long
    /// strings included.
    fn true_count(&self, m: u32) -> u64 {
        let named = self.u_complexity.values().filter(|&&c| c <= m).count() as u64;
        let anon: u64 = self
            .long_simple
            .iter()
            .filter(|(&q, _)| q <= m)
            .map(|(_, &k)| k)
            .sum();
        named + anon
    }

    /// Appends the event to the synthesized trace and updates both
    /// complexity maps. Returns the previous complexities and whether the
    /// event was representable (programs of length q may run out).
    fn record_v_event(&mut self, ev: &BobEvent) -> (Option<u32>, Option<u32>, bool) {
        let prev_cv = self.v_complexity.get(&ev.x).copied();
        let prev_cu = self.u_complexity.get(&ev.x).copied();
        if ev.q > 62 {
            self.warn(format!("step {}: description length {} too large", ev.step, ev.q));
            return (prev_cv, prev_cu, false);
        }
        let next = self.synth_next.entry(ev.q).or_insert(0);
        let capacity = 1u64 << ev.q;
        if *next >= capacity {
            self.warn(format!(
                "step {}: no programs of length {} left, event dropped",
                ev.step, ev.q
            ));
            return (prev_cv, prev_cu, false);
        }
        let program =
            BitString::from_bits((0..ev.q).rev().map(|i| (*next >> i) & 1 == 1).collect());
        *next += 1;
        self.v_events.push(TraceEvent {
            step: ev.step,
            program,
            output: ev.x.clone(),
            cost: ev.step,
        });
        let better_v = prev_cv.is_none_or(|c| ev.q < c);
        if better_v {
            self.v_complexity.insert(ev.x.clone(), ev.q);
        }
        let cu = ev.q + self.cfg.d;
        if prev_cu.is_none_or(|c| cu < c) {
            self.u_complexity.insert(ev.x.clone(), cu);
        }
        (prev_cv, prev_cu, true)
    }

    fn set_status(&mut self, level: usize, to: LevelStatus, cause: &str) {
        let step = self.current_step;
        let seq = self.clock + 1;
        if let Some(run) = self.levels.get_mut(&level) {
            if run.status != to {
                run.status = to;
                self.clock = seq;
                self.transitions.push(TransitionRecord {
                    seq,
                    step,
                    level,
                    to,
                    cause: cause.to_string(),
                });
            }
        }
    }

    /// Global priority rule: work at a level cancels every game above it.
    fn abort_higher(&mut self, level: usize, cause: &str) {
        let higher: Vec<usize> = self
            .levels
            .range(level + 1..)
            .map(|(&l, _)| l)
            .collect();
        for l in higher {
            if let Some(run) = self.levels.get_mut(&l) {
                run.game = None;
            }
            self.set_status(l, LevelStatus::Waiting, cause);
        }
    }

    fn issue_directive(
        &mut self,
        level: usize,
        kind: DirectiveKind,
        target: DirectiveTarget,
        complexity: u32,
        consumed_len: u32,
        pair: Option<(BitString, u32)>,
    ) -> Result<(), FighterError> {
        take_input(&mut self.consumed, consumed_len)?;
        match &target {
            DirectiveTarget::Short(z) => {
                let entry = self.u_complexity.entry(z.clone()).or_insert(complexity);
                if complexity < *entry {
                    *entry = complexity;
                }
            }
            DirectiveTarget::LongFresh => {
                *self.long_simple.entry(complexity).or_insert(0) += 1;
            }
        }
        let seq = self.tick();
        self.directives.push(DirectiveRecord {
            seq,
            step: self.current_step,
            level,
            kind,
            target,
            complexity,
            consumed_len,
            pair,
        });
        self.abort_higher(level, &format!("directive at level {level}"));
        Ok(())
    }

    /// Tuples already simple on the composite machine that feed a counter of
    /// this game: same candidate, a priced pair, complexity within cap + d.
    fn st_init_counts(
        &self,
        params: &LevelParams,
        w: &BitString,
        prices: &BTreeMap<(BitString, u32), u64>,
    ) -> BTreeMap<(BitString, u32), u64> {
        let nd = params.cap + self.cfg.d;
        let mut counters = BTreeMap::new();
        for (code, &cu) in &self.u_complexity {
            if cu > nd {
                continue;
            }
            let Ok(parts) = decode_tuple(code, 4) else {
                continue;
            };
            if parts[2] != *w {
                continue;
            }
            let Some(aq) = parts[1].to_int() else {
                continue;
            };
            let Some(qg) = u32::try_from(aq).ok().and_then(|v| v.checked_add(self.cfg.d)) else {
                continue;
            };
            let pair = (parts[0].clone(), qg);
            if prices.contains_key(&pair) {
                *counters.entry(pair).or_insert(0) += 1;
            }
        }
        counters
    }

    fn reset_level(&mut self, level: usize, w: &BitString) -> Result<(), FighterError> {
        let Some(mut run) = self.levels.remove(&level) else {
            return Ok(());
        };
        run.candidates += 1;
        run.game = None;
        let res = self.open_game(&mut run, w);
        self.levels.insert(level, run);
        self.set_status(level, LevelStatus::Active, "candidate");
        self.abort_higher(level, &format!("candidate at level {level}"));
        res?;
        self.continue_strategy(level)?;
        self.fire_payoffs(level)
    }

    fn open_game(&mut self, run: &mut LevelRun, w: &BitString) -> Result<(), FighterError> {
        let params = run.params;
        let d = self.cfg.d;
        let trace = EnumerationTrace::from_events(self.v_events.clone())?;
        let span_end = match self.cfg.price_span {
            Some(s) => params.cap.min(params.m.saturating_add(s)),
            None => params.cap,
        };
        let raw = if span_end > params.m && !run.universe.is_empty() {
            price_table(
                params.n,
                w,
                &trace,
                &run.universe,
                params.m + 1..=span_end,
                d,
                self.cfg.lambda,
                &self.cfg.delta.as_source(),
            )?
        } else {
            BTreeMap::new()
        };
        let mut prices = BTreeMap::new();
        let mut zero_level: BTreeMap<BitString, u32> = BTreeMap::new();
        for ((x, q), b) in raw {
            if b == 0 {
                let entry = zero_level.entry(x).or_insert(q);
                if q < *entry {
                    *entry = q;
                }
            } else {
                prices.insert((x, q), b);
            }
        }
        let mut init_complexity = BTreeMap::new();
        for x in &run.universe {
            let mut c = (x.len() as u32).saturating_add(self.cfg.c0);
            if let Some(&known) = self.u_complexity.get(x) {
                c = c.min(known);
            }
            if let Some(&z) = zero_level.get(x) {
                c = c.min(z);
            }
            init_complexity.insert(x.clone(), c);
        }
        let init_counters = self.st_init_counts(&params, w, &prices);
        let shift = params.cap - params.n;
        let budget = if shift > 63 {
            return Err(FighterError::ParamsOutOfRange(format!(
                "budget multiplier 2^{shift}"
            )));
        } else {
            self.cfg
                .c1
                .checked_mul(1u64 << shift)
                .ok_or_else(|| FighterError::ParamsOutOfRange("budget overflow".to_string()))?
        };
        let target = self.true_count(params.m);
        let long_threshold = if params.m >= 31 {
            u32::MAX
        } else {
            1u32 << params.m
        };
        let cfg = GameConfig {
            referee: run.referee.clone(),
            target,
            init_complexity,
            c0: self.cfg.c0,
            prices,
            init_counters,
            budget_alice: budget,
            budget_bob: budget,
            floor: params.m + 1,
            long_threshold,
            long_prices: BTreeMap::new(),
        };
        if let Err(e) = cfg.validate() {
            self.warn(format!(
                "level {}: game for candidate {w} rejected: {e}",
                params.level
            ));
            return Ok(());
        }
        let state = GameState::initial(&cfg);
        let opts = SolveOptions {
            max_states: self.cfg.max_states,
        };
        let result = match solve_from(&cfg, &state, opts) {
            Ok(r) => r,
            Err(SolverError::StateCap(n)) => {
                self.warn(format!(
                    "level {}: game for candidate {w} too large to solve ({n} states)",
                    params.level
                ));
                return Ok(());
            }
            Err(e) => return Err(e.into()),
        };
        let (mode, true_target) = if result.winner == Player::Alice {
            (StrategyMode::Direct, target)
        } else {
            self.issue_directive(
                params.level,
                DirectiveKind::Dummy,
                DirectiveTarget::LongFresh,
                params.m,
                params.m - 1,
                None,
            )?;
            (StrategyMode::Stolen, target + 1)
        };
        run.game = Some(LiveGame {
            cfg,
            state,
            strategy: result.strategy,
            mode,
            base_target: target,
            true_target,
            winner: result.winner,
            states_explored: result.states_explored,
            w: w.clone(),
            fuel_serial: 0,
            preliminary: BTreeSet::new(),
            paid: BTreeSet::new(),
            dormant: None,
            overdraft: false,
        });
        refresh_preliminaries(run);
        Ok(())
    }

    /// Feeds a stream event into the level's open game: a priced pair at the
    /// event's shifted complexity is jumped to its price, and an event whose
    /// string decodes as a counter tuple of this game adds one unit.
    fn translate_event(
        &mut self,
        level: usize,
        x: &BitString,
        q: u32,
        prev_cv: Option<u32>,
        prev_cu: Option<u32>,
    ) -> Result<(), FighterError> {
        let d = self.cfg.d;
        let Some(run) = self.levels.get_mut(&level) else {
            return Ok(());
        };
        let Some(game) = run.game.as_mut() else {
            return Ok(());
        };
        if game.dormant.is_some() {
            return Ok(());
        }
        let fresh_v = prev_cv.is_none_or(|c| q < c);
        if fresh_v {
            let qg = q + d;
            if let Some(&price) = game.cfg.prices.get(&(x.clone(), qg)) {
                if virtual_complexity(&game.cfg, &game.state, x) > qg {
                    let have = *game.state.counters.get(&(x.clone(), qg)).unwrap_or(&0);
                    let deficit = price.saturating_sub(have);
                    charge_environment(game, deficit);
                    game.state.bump_short(x.clone(), qg, deficit);
                }
            }
        }
        let nd = run.params.cap + d;
        let fresh_u = q + d <= nd && prev_cu.is_none_or(|c| c > nd);
        if fresh_u {
            if let Ok(parts) = decode_tuple(x, 4) {
                if parts[2] == game.w {
                    if let Some(aq) = parts[1].to_int() {
                        if let Some(qg) =
                            u32::try_from(aq).ok().and_then(|v| v.checked_add(d))
                        {
                            let pair = (parts[0].clone(), qg);
                            if game.cfg.prices.contains_key(&pair) {
                                charge_environment(game, 1);
                                game.state.bump_short(pair.0, pair.1, 1);
                            }
                        }
                    }
                }
            }
        }
        refresh_preliminaries(run);
        Ok(())
    }

    /// Plays the stored strategy forward while it is the holder's turn:
    /// the direct winner moves while the output sits at the target, a stolen
    /// one while it does not. Every increment becomes a fuel directive.
    fn continue_strategy(&mut self, level: usize) -> Result<(), FighterError> {
        let Some(mut run) = self.levels.remove(&level) else {
            return Ok(());
        };
        let res = self.continue_strategy_inner(&mut run);
        self.levels.insert(level, run);
        res
    }

    fn continue_strategy_inner(&mut self, run: &mut LevelRun) -> Result<(), FighterError> {
        let d = self.cfg.d;
        let level = run.params.level;
        let nd = run.params.cap + d;
        loop {
            let Some(game) = run.game.as_mut() else {
                return Ok(());
            };
            if game.dormant.is_some() {
                return Ok(());
            }
            let output = run_referee(&game.cfg, &game.state)?;
            let holder_turn = match game.mode {
                StrategyMode::Direct => output == game.base_target,
                StrategyMode::Stolen => output != game.base_target,
            };
            if !holder_turn {
                return Ok(());
            }
            let bundles = legal_bundles(&game.cfg, &game.state)?;
            if bundles.is_empty() {
                let reason = format!("no move left at output {output}");
                self.warn(format!("level {level}: strategy stuck: {reason}"));
                game.dormant = Some(reason);
                return Ok(());
            }
            let key = canonicalize(&game.cfg, &game.state);
            let mv = match game.strategy.get(&key) {
                Some(mv) => mv.clone(),
                None => {
                    let opts = SolveOptions {
                        max_states: self.cfg.max_states,
                    };
                    let expected = match game.mode {
                        StrategyMode::Direct => Player::Alice,
                        StrategyMode::Stolen => Player::Bob,
                    };
                    let res = match solve_from(&game.cfg, &game.state, opts) {
                        Ok(r) => r,
                        Err(SolverError::StateCap(n)) => {
                            let reason = format!("re-solve exceeded {n} states");
                            self.warn(format!("level {level}: {reason}"));
                            game.dormant = Some(reason);
                            return Ok(());
                        }
                        Err(e) => return Err(e.into()),
                    };
                    if res.winner != expected {
                        let reason = format!(
                            "position no longer won: re-solve gives {:?}",
                            res.winner
                        );
                        self.warn(format!("level {level}: {reason}"));
                        game.dormant = Some(reason);
                        return Ok(());
                    }
                    game.strategy = res.strategy;
                    match game.strategy.get(&key) {
                        Some(mv) => mv.clone(),
                        None => {
                            return Err(FighterError::Internal(
                                "winning position lacks a stored move".to_string(),
                            ))
                        }
                    }
                }
            };
            // realize the increments before the board reflects them
            let mut fuel: Vec<(BitString, u32, u64)> = Vec::new();
            for inc in &mv.increments {
                match &inc.target {
                    IncTarget::Short(x) => fuel.push((x.clone(), inc.level, inc.delta)),
                    IncTarget::Long => {
                        return Err(FighterError::Internal(
                            "long increment in a game without long prices".to_string(),
                        ))
                    }
                }
            }
            let w = game.w.clone();
            let mut serial = game.fuel_serial;
            game.state = apply_move(&game.cfg, &game.state, &mv)?;
            for (x, qg, delta) in fuel {
                let aq = qg.checked_sub(d).ok_or_else(|| {
                    FighterError::Internal(format!("priced level {qg} below the shift {d}"))
                })?;
                for _ in 0..delta {
                    let tuple = loop {
                        let t = encode_tuple(&[
                            x.clone(),
                            BitString::from_int(aq as u64),
                            w.clone(),
                            BitString::from_int(serial),
                        ]);
                        serial += 1;
                        if self.u_complexity.get(&t).is_none_or(|&c| c > nd) {
                            break t;
                        }
                    };
                    self.issue_directive(
                        level,
                        DirectiveKind::Fuel,
                        DirectiveTarget::Short(tuple),
                        nd,
                        nd - 1,
                        Some((x.clone(), qg)),
                    )?;
                }
            }
            let Some(game) = run.game.as_mut() else {
                return Ok(());
            };
            game.fuel_serial = serial;
            refresh_preliminaries(run);
        }
    }

    /// Pays out every armed counter whose string the stream has since made
    /// simple enough for the safety margin 2 C(x) <= 2q - d.
    fn fire_payoffs(&mut self, level: usize) -> Result<(), FighterError> {
        let Some(mut run) = self.levels.remove(&level) else {
            return Ok(());
        };
        let res = self.fire_payoffs_inner(&mut run);
        self.levels.insert(level, run);
        res
    }

    fn fire_payoffs_inner(&mut self, run: &mut LevelRun) -> Result<(), FighterError> {
        let d = self.cfg.d as u64;
        let level = run.params.level;
        let fired: Vec<(BitString, u32)> = match run.game.as_ref() {
            Some(game) if game.dormant.is_none() => game
                .preliminary
                .iter()
                .filter(|(x, qg)| match self.v_complexity.get(x) {
                    Some(&cv) => 2 * cv as u64 + d <= 2 * *qg as u64,
                    None => false,
                })
                .cloned()
                .collect(),
            _ => return Ok(()),
        };
        for (x, qg) in fired {
            if let Some(game) = run.game.as_mut() {
                game.preliminary.remove(&(x.clone(), qg));
                game.paid.insert((x.clone(), qg));
            }
            self.issue_directive(
                level,
                DirectiveKind::Payoff,
                DirectiveTarget::Short(x.clone()),
                qg,
                qg - 1,
                Some((x, qg)),
            )?;
        }
        Ok(())
    }

    fn rescan_all(&mut self) -> Result<(), FighterError> {
        let keys: Vec<usize> = self.levels.keys().copied().collect();
        for level in keys {
            let live = self
                .levels
                .get(&level)
                .map(|r| r.status == LevelStatus::Active && r.game.is_some())
                .unwrap_or(false);
            if live {
                self.fire_payoffs(level)?;
            }
        }
        Ok(())
    }

    fn into_report(mut self) -> SimulationReport {
        let mut levels = Vec::new();
        for run in self.levels.values() {
            let game = match &run.game {
                Some(g) => {
                    let output = run_referee(&g.cfg, &g.state).unwrap_or(u64::MAX);
                    Some(GameReport {
                        mode: g.mode,
                        winner: g.winner,
                        base_target: g.base_target,
                        true_target: g.true_target,
                        output,
                        states_explored: g.states_explored,
                        overdraft: g.overdraft,
                        dormant: g.dormant.clone(),
                    })
                }
                None => None,
            };
            levels.push(LevelReport {
                params: run.params,
                status: run.status,
                candidates: run.candidates,
                true_count: self.true_count(run.params.m),
                game,
            });
        }
        SimulationReport {
            levels,
            directives: std::mem::take(&mut self.directives),
            consumed: std::mem::take(&mut self.consumed),
            transitions: std::mem::take(&mut self.transitions),
            warnings: std::mem::take(&mut self.warnings),
            events_processed: self.events_processed,
            complexity: std::mem::take(&mut self.u_complexity),
        }
    }
}

fn refresh_preliminaries(run: &mut LevelRun) {
    let Some(game) = run.game.as_mut() else {
        return;
    };
    for ((x, q), &price) in &game.cfg.prices {
        let pair = (x.clone(), *q);
        if game.paid.contains(&pair) || game.preliminary.contains(&pair) {
            continue;
        }
        let have = *game.state.counters.get(&pair).unwrap_or(&0);
        if have >= price {
            game.preliminary.insert(pair);
        }
    }
}

/// Stream acts spend the adversary pool: the enumeration is the opponent of
/// whoever holds the strategy.
fn charge_environment(game: &mut LiveGame, amount: u64) {
    let pool = match game.mode {
        StrategyMode::Direct => &mut game.state.rem_bob,
        StrategyMode::Stolen => &mut game.state.rem_alice,
    };
    if *pool < amount {
        game.overdraft = true;
        *pool = 0;
    } else {
        *pool -= amount;
    }
}

pub fn run_simulation(
    cfg: &FighterConfig,
    events: &[BobEvent],
) -> Result<SimulationReport, FighterError> {
    let mut sim = Simulation::new(cfg)?;
    for ev in events {
        sim.current_step = ev.step;
        sim.events_processed += 1;
        let (prev_cv, prev_cu, recorded) = sim.record_v_event(ev);
        if !recorded {
            continue;
        }
        match cfg.tower.route(ev.q as u64) {
            Err(FighterError::OutOfZones(q)) => {
                sim.warn(format!("step {}: complexity {q} outside every zone", ev.step));
            }
            Err(e) => return Err(e),
            Ok((level, case)) => {
                if !sim.levels.contains_key(&level) {
                    sim.warn(format!("step {}: level {level} has no referee", ev.step));
                } else {
                    let n = sim.levels[&level].params.n;
                    let first_entry = prev_cv.is_none_or(|c| c > n);
                    if case == RouteCase::NewCandidate && first_entry {
                        sim.reset_level(level, &ev.x)?;
                    } else {
                        sim.translate_event(level, &ev.x, ev.q, prev_cv, prev_cu)?;
                        sim.continue_strategy(level)?;
                    }
                }
            }
        }
        sim.rescan_all()?;
    }
    Ok(sim.into_report())
}

#[derive(Debug, Clone)]
pub struct ResourceCheck {
    pub name: &'static str,
    pub holds: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DirectiveCounts {
    pub dummies: u64,
    pub fuel: u64,
    pub payoffs: u64,
}

pub fn directive_counts(report: &SimulationReport, level: usize) -> DirectiveCounts {
    let mut counts = DirectiveCounts::default();
    for d in &report.directives {
        if d.level != level {
            continue;
        }
        match d.kind {
            DirectiveKind::Dummy => counts.dummies += 1,
            DirectiveKind::Fuel => counts.fuel += 1,
            DirectiveKind::Payoff => counts.payoffs += 1,
        }
    }
    counts
}

/// The three supply-versus-demand inequalities for one level. Worst-case
/// demand must stay below the input supply at the lengths each directive
/// kind consumes; the observed counts ride along in the details.
pub fn resource_checks(
    d: u32,
    c1: u64,
    params: &LevelParams,
    counts: &DirectiveCounts,
) -> Vec<ResourceCheck> {
    let n = params.n;
    let cap = params.cap;
    let dummy_holds = d >= 3;
    let fuel_holds = d >= 2 && (2u128 * c1 as u128) < (1u128 << (d - 1).min(127));
    let payoff_holds = d > 4;
    vec![
        ResourceCheck {
            name: "dummies",
            holds: dummy_holds,
            detail: format!(
                "demand 2^{} vs supply 2^{} at length {}, issued {}",
                n + 1,
                n + d - 1,
                params.m - 1,
                counts.dummies
            ),
        },
        ResourceCheck {
            name: "fuel",
            holds: fuel_holds,
            detail: format!(
                "demand 2*{}*2^{} vs supply 2^{} at length {}, issued {}",
                c1,
                cap,
                cap + d - 1,
                cap + d - 1,
                counts.fuel
            ),
        },
        ResourceCheck {
            name: "payoffs",
            holds: payoff_holds,
            detail: format!(
                "demand 2^(q-{d}/2+1) vs supply 2^(q-1) per level q, issued {}",
                counts.payoffs
            ),
        },
    ]
}

#[derive(Debug, Clone)]
pub struct ResourceReport {
    pub checks: Vec<ResourceCheck>,
    /// (length, inputs used, inputs available).
    pub utilization: Vec<(u32, u64, u128)>,
}

/// Runs the three inequalities and folds in the observed ledger; the first
/// failing inequality is reported as the violation.
pub fn check_resources(
    d: u32,
    c1: u64,
    params: &LevelParams,
    counts: &DirectiveCounts,
    consumed: &BTreeMap<u32, u64>,
) -> Result<ResourceReport, FighterError> {
    let checks = resource_checks(d, c1, params, counts);
    for check in &checks {
        if !check.holds {
            return Err(FighterError::ResourceBoundViolated {
                check: check.name,
                detail: check.detail.clone(),
            });
        }
    }
    let utilization = consumed
        .iter()
        .map(|(&len, &used)| {
            let cap = if len >= 127 {
                u128::MAX
            } else {
                1u128 << len
            };
            (len, used, cap)
        })
        .collect();
    Ok(ResourceReport {
        checks,
        utilization,
    })
}

fn player_letter(p: Player) -> &'static str {
    match p {
        Player::Alice => "A",
        Player::Bob => "B",
    }
}

pub fn print_report(report: &SimulationReport) -> String {
    let mut out = String::new();
    out.push_str(&format!("events processed={}\n", report.events_processed));
    for lr in &report.levels {
        let p = &lr.params;
        out.push_str(&format!(
            "params level={} n={} m={} cap={} zone=({},{}]\n",
            p.level, p.n, p.m, p.cap, p.zone_low, p.zone_high
        ));
    }
    for lr in &report.levels {
        match &lr.game {
            Some(g) => {
                out.push_str(&format!(
                    "level {} status={} candidates={} mode={} winner={} base={} goal={} output={} states={} overdraft={} note={}\n",
                    lr.params.level,
                    lr.status,
                    lr.candidates,
                    g.mode,
                    player_letter(g.winner),
                    g.base_target,
                    g.true_target,
                    g.output,
                    g.states_explored,
                    if g.overdraft { "yes" } else { "no" },
                    g.dormant.as_deref().unwrap_or("-"),
                ));
            }
            None => {
                out.push_str(&format!(
                    "level {} status={} candidates={} mode=- note=-\n",
                    lr.params.level, lr.status, lr.candidates
                ));
            }
        }
    }
    for lr in &report.levels {
        if let Some(g) = &lr.game {
            out.push_str(&format!(
                "diagnosis level={} output={} count={} separated={}\n",
                lr.params.level,
                g.output,
                lr.true_count,
                if g.output != lr.true_count { "yes" } else { "no" },
            ));
        }
    }
    for d in &report.directives {
        let z = match &d.target {
            DirectiveTarget::Short(x) => x.to_string(),
            DirectiveTarget::LongFresh => "long".to_string(),
        };
        let pair = match &d.pair {
            Some((x, q)) => format!("({x},{q})"),
            None => "-".to_string(),
        };
        out.push_str(&format!(
            "directive {} step={} level={} kind={} z={} q={} consumed={} pair={}\n",
            d.seq, d.step, d.level, d.kind, z, d.complexity, d.consumed_len, pair
        ));
    }
    for (len, used) in &report.consumed {
        let cap = if *len >= 127 {
            u128::MAX
        } else {
            1u128 << *len
        };
        out.push_str(&format!("ledger len={len} used={used} cap={cap}\n"));
    }
    for t in &report.transitions {
        out.push_str(&format!(
            "transition {} step={} level={} to={} cause={}\n",
            t.seq, t.step, t.level, t.to, t.cause
        ));
    }
    for w in &report.warnings {
        out.push_str(&format!("warning {w}\n"));
    }
    out
}
