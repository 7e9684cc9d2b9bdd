//! Finite toy decompressors and enumeration traces.
//!
//! A toy decompressor is an explicit finite program table (plus an optional
//! conditional table) with a declared step cost per entry. Plain descriptive
//! complexity over such a table is the length of the shortest program that
//! produces a string, or infinite when no program does. An enumeration trace
//! fixes the order in which table entries are discovered; markers and rest
//! counts are read off the trace.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::bitstr::{decode_tuple, BitString};

/// Descriptive complexity value: finite level or unreachable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Complexity {
    Finite(u32),
    Infinite,
}

impl Complexity {
    pub fn leq(self, k: u32) -> bool {
        matches!(self, Complexity::Finite(v) if v <= k)
    }

    pub fn finite(self) -> Option<u32> {
        match self {
            Complexity::Finite(v) => Some(v),
            Complexity::Infinite => None,
        }
    }
}

impl std::fmt::Display for Complexity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Complexity::Finite(v) => write!(f, "{v}"),
            Complexity::Infinite => f.write_str("inf"),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ToyError {
    #[error("program {0} already has a table entry")]
    DuplicateProgram(BitString),
    #[error("trace steps must be strictly increasing (step {0})")]
    NonIncreasingStep(u64),
    #[error("program {0} is a prefix of another program in a prefix-free table")]
    PrefixViolation(BitString),
    #[error("no string of complexity <= {0} in the trace")]
    NoSimpleString(u32),
    #[error("marker index {index} outside trace of length {len}")]
    MarkerOutOfRange { index: usize, len: usize },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableEntry {
    pub output: BitString,
    pub cost: u64,
}

/// Finite decompressor: program -> output with declared step costs.
/// Conditional entries are keyed by (program, condition); the unconditional
/// table doubles as the condition-e table.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ToyDecompressor {
    table: BTreeMap<BitString, TableEntry>,
    conditional: BTreeMap<(BitString, BitString), TableEntry>,
}

impl ToyDecompressor {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, program: BitString, output: BitString, cost: u64) -> Result<(), ToyError> {
        if self.table.contains_key(&program) {
            return Err(ToyError::DuplicateProgram(program));
        }
        self.table.insert(program, TableEntry { output, cost });
        Ok(())
    }

    pub fn insert_conditional(
        &mut self,
        program: BitString,
        condition: BitString,
        output: BitString,
        cost: u64,
    ) -> Result<(), ToyError> {
        let key = (program, condition);
        if self.conditional.contains_key(&key) {
            return Err(ToyError::DuplicateProgram(key.0));
        }
        self.conditional.insert(key, TableEntry { output, cost });
        Ok(())
    }

    pub fn conditional(&self) -> &BTreeMap<(BitString, BitString), TableEntry> {
        &self.conditional
    }

    pub fn table(&self) -> &BTreeMap<BitString, TableEntry> {
        &self.table
    }

    pub fn is_prefix_free(&self) -> bool {
        let programs: Vec<&BitString> = self.table.keys().collect();
        for a in &programs {
            for b in &programs {
                if a.len() < b.len() && b.bits()[..a.len()] == *a.bits() {
                    return false;
                }
            }
        }
        true
    }

    pub fn check_prefix_free(&self) -> Result<(), ToyError> {
        let programs: Vec<&BitString> = self.table.keys().collect();
        for a in &programs {
            for b in &programs {
                if a.len() < b.len() && b.bits()[..a.len()] == *a.bits() {
                    return Err(ToyError::PrefixViolation((*a).clone()));
                }
            }
        }
        Ok(())
    }

    /// Plain complexity: length of the shortest program producing `x`.
    pub fn complexity_of(&self, x: &BitString) -> Complexity {
        let mut best = Complexity::Infinite;
        for (program, entry) in &self.table {
            if entry.output == *x {
                let c = Complexity::Finite(program.len() as u32);
                if c < best {
                    best = c;
                }
            }
        }
        best
    }

    /// Number of distinct strings with complexity <= m.
    pub fn simple_count(&self, m: u32) -> u64 {
        let mut seen = std::collections::BTreeSet::new();
        for (program, entry) in &self.table {
            if program.len() as u32 <= m {
                seen.insert(&entry.output);
            }
        }
        seen.len() as u64
    }

    /// Membership in the cumulative oracle: complexity_of(x) <= k.
    pub fn oracle_contains(&self, x: &BitString, k: u32) -> bool {
        self.complexity_of(x).leq(k)
    }

    pub fn oracle(&self) -> impl Fn(&BitString, u32) -> bool + '_ {
        move |x, k| self.oracle_contains(x, k)
    }

    /// Shortest program for `target` among entries runnable within `t` steps
    /// (declared cost <= t) and no longer than `max_len`. The empty condition
    /// selects the unconditional table.
    pub fn time_bounded_complexity(
        &self,
        target: &BitString,
        condition: &BitString,
        max_len: u32,
        t: u64,
    ) -> Complexity {
        let mut best = Complexity::Infinite;
        let mut consider = |program: &BitString, entry: &TableEntry| {
            if entry.output == *target && program.len() as u32 <= max_len && entry.cost <= t {
                let c = Complexity::Finite(program.len() as u32);
                if c < best {
                    best = c;
                }
            }
        };
        if condition.is_empty() {
            for (program, entry) in &self.table {
                consider(program, entry);
            }
        } else {
            for ((program, cond), entry) in &self.conditional {
                if cond == condition {
                    consider(program, entry);
                }
            }
        }
        best
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEvent {
    pub step: u64,
    pub program: BitString,
    pub output: BitString,
    pub cost: u64,
}

/// Ordered discovery of a decompressor table: one event per table entry,
/// strictly increasing steps.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EnumerationTrace {
    events: Vec<TraceEvent>,
}

impl EnumerationTrace {
    pub fn from_events(events: Vec<TraceEvent>) -> Result<Self, ToyError> {
        let mut last_step = None;
        let mut programs = std::collections::BTreeSet::new();
        for ev in &events {
            if let Some(prev) = last_step {
                if ev.step <= prev {
                    return Err(ToyError::NonIncreasingStep(ev.step));
                }
            }
            last_step = Some(ev.step);
            if !programs.insert(ev.program.clone()) {
                return Err(ToyError::DuplicateProgram(ev.program.clone()));
            }
        }
        Ok(EnumerationTrace { events })
    }

    pub fn events(&self) -> &[TraceEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn to_decompressor(&self) -> ToyDecompressor {
        let mut dec = ToyDecompressor::new();
        for ev in &self.events {
            dec.insert(ev.program.clone(), ev.output.clone(), ev.cost)
                .expect("trace programs are distinct");
        }
        dec
    }
}

/// Running minimum of description lengths seen so far.
#[derive(Debug, Clone, Default)]
pub struct ComplexityTable {
    map: BTreeMap<BitString, u32>,
}

impl ComplexityTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, x: &BitString) -> Complexity {
        match self.map.get(x) {
            Some(&v) => Complexity::Finite(v),
            None => Complexity::Infinite,
        }
    }

    /// Feeds one event; returns the complexity before the event.
    pub fn observe(&mut self, ev: &TraceEvent) -> Complexity {
        let before = self.get(&ev.output);
        let len = ev.program.len() as u32;
        if !before.leq(len) {
            self.map.insert(ev.output.clone(), len);
        }
        before
    }

    pub fn from_trace_prefix(trace: &EnumerationTrace, upto: usize) -> Self {
        let mut table = ComplexityTable::new();
        for ev in &trace.events()[..upto] {
            table.observe(ev);
        }
        table
    }

    pub fn entries(&self) -> impl Iterator<Item = (&BitString, u32)> {
        self.map.iter().map(|(k, &v)| (k, v))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarkerResult {
    pub w: BitString,
    /// 1-based position of the marker event in the trace.
    pub index: usize,
    pub n: u32,
}

/// Last event whose output enters the complexity-<= n class for the first
/// time. Later events may add shorter descriptions for already-simple strings
/// without moving the marker.
pub fn w_marker(trace: &EnumerationTrace, n: u32) -> Result<MarkerResult, ToyError> {
    let mut table = ComplexityTable::new();
    let mut marker = None;
    for (pos, ev) in trace.events().iter().enumerate() {
        let before = table.observe(ev);
        let enters = ev.program.len() as u32 <= n && !before.leq(n);
        if enters {
            marker = Some(MarkerResult {
                w: ev.output.clone(),
                index: pos + 1,
                n,
            });
        }
    }
    marker.ok_or(ToyError::NoSimpleString(n))
}

/// Number of events after the level-n marker whose output enters the
/// complexity-<= u class at that event.
pub fn rest_count(trace: &EnumerationTrace, n: u32, u: u32) -> Result<u64, ToyError> {
    let marker = w_marker(trace, n)?;
    let mut table = ComplexityTable::new();
    let mut count = 0u64;
    for (pos, ev) in trace.events().iter().enumerate() {
        let before = table.observe(ev);
        if pos + 1 > marker.index && ev.program.len() as u32 <= u && !before.leq(u) {
            count += 1;
        }
    }
    Ok(count)
}

/// Distinct extensions s such that the tuple code of y ++ [s] has complexity
/// <= threshold using only the first `marker_index` events.
pub fn past_volume(
    trace: &EnumerationTrace,
    y: &[BitString],
    threshold: u32,
    marker_index: usize,
) -> Result<u64, ToyError> {
    if marker_index > trace.len() {
        return Err(ToyError::MarkerOutOfRange {
            index: marker_index,
            len: trace.len(),
        });
    }
    let table = ComplexityTable::from_trace_prefix(trace, marker_index);
    let arity = y.len() + 1;
    let mut extensions = std::collections::BTreeSet::new();
    for (output, level) in table.entries() {
        if level > threshold {
            continue;
        }
        if let Ok(parts) = decode_tuple(output, arity) {
            if parts[..y.len()] == *y {
                extensions.insert(parts[y.len()].clone());
            }
        }
    }
    Ok(extensions.len() as u64)
}

pub fn parse_trace(text: &str) -> Result<EnumerationTrace, ToyError> {
    let mut events = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parse = |msg: &str| ToyError::Parse {
            line: lineno + 1,
            msg: msg.to_string(),
        };
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != 8
            || tokens[0] != "step"
            || tokens[2] != "prog"
            || tokens[4] != "out"
            || tokens[6] != "cost"
        {
            return Err(parse("expected `step <int> prog <bits> out <bits> cost <int>`"));
        }
        let step: u64 = tokens[1].parse().map_err(|_| parse("bad step"))?;
        let program = BitString::parse(tokens[3]).map_err(|_| parse("bad program bits"))?;
        let output = BitString::parse(tokens[5]).map_err(|_| parse("bad output bits"))?;
        let cost: u64 = tokens[7].parse().map_err(|_| parse("bad cost"))?;
        events.push(TraceEvent {
            step,
            program,
            output,
            cost,
        });
    }
    EnumerationTrace::from_events(events)
}

pub fn print_trace(trace: &EnumerationTrace) -> String {
    let mut out = String::new();
    for ev in trace.events() {
        writeln!(
            out,
            "step {} prog {} out {} cost {}",
            ev.step, ev.program, ev.output, ev.cost
        )
        .unwrap();
    }
    out
}
