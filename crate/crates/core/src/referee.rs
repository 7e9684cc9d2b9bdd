//! Referee programs: adaptive decision trees over a complexity oracle.
//!
//! A referee queries pairs (x, k) meaning "is the complexity of x at most
//! k?" and branches on the answer; leaves hold the integer output. Programs
//! carry declared bounds on tree depth and query length, so a validated
//! referee can only inspect the oracle on a known finite support.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::bitstr::BitString;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RefereeNode {
    Leaf(u64),
    Query {
        x: BitString,
        k: u32,
        yes: Box<RefereeNode>,
        no: Box<RefereeNode>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RefereeProgram {
    pub root: RefereeNode,
    pub max_depth: u32,
    pub max_query_len: u32,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RefereeError {
    #[error("query nesting exceeds declared depth {0}")]
    DepthExceeded(u32),
    #[error("query string {x} longer than declared bound {bound}")]
    QueryTooLong { x: BitString, bound: u32 },
    #[error("negative threshold {0} in query")]
    NegativeThreshold(i64),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

impl RefereeNode {
    fn depth(&self) -> u32 {
        match self {
            RefereeNode::Leaf(_) => 0,
            RefereeNode::Query { yes, no, .. } => 1 + yes.depth().max(no.depth()),
        }
    }

    fn collect_support(&self, support: &mut BTreeSet<(BitString, u32)>) {
        if let RefereeNode::Query { x, k, yes, no } = self {
            support.insert((x.clone(), *k));
            yes.collect_support(support);
            no.collect_support(support);
        }
    }

    fn max_output(&self) -> u64 {
        match self {
            RefereeNode::Leaf(v) => *v,
            RefereeNode::Query { yes, no, .. } => yes.max_output().max(no.max_output()),
        }
    }
}

impl RefereeProgram {
    pub fn constant(value: u64) -> Self {
        RefereeProgram {
            root: RefereeNode::Leaf(value),
            max_depth: 0,
            max_query_len: 0,
        }
    }

    pub fn depth(&self) -> u32 {
        self.root.depth()
    }

    pub fn max_output(&self) -> u64 {
        self.root.max_output()
    }

    /// Checks the declared bounds and returns the set of (x, k) pairs the
    /// program can ever ask about.
    pub fn validate(&self) -> Result<BTreeSet<(BitString, u32)>, RefereeError> {
        fn walk(
            node: &RefereeNode,
            depth: u32,
            program: &RefereeProgram,
            support: &mut BTreeSet<(BitString, u32)>,
        ) -> Result<(), RefereeError> {
            match node {
                RefereeNode::Leaf(_) => Ok(()),
                RefereeNode::Query { x, k, yes, no } => {
                    if depth >= program.max_depth {
                        return Err(RefereeError::DepthExceeded(program.max_depth));
                    }
                    if x.len() as u32 > program.max_query_len {
                        return Err(RefereeError::QueryTooLong {
                            x: x.clone(),
                            bound: program.max_query_len,
                        });
                    }
                    support.insert((x.clone(), *k));
                    walk(yes, depth + 1, program, support)?;
                    walk(no, depth + 1, program, support)
                }
            }
        }
        let mut support = BTreeSet::new();
        walk(&self.root, 0, self, &mut support)?;
        Ok(support)
    }

    pub fn support(&self) -> BTreeSet<(BitString, u32)> {
        let mut support = BTreeSet::new();
        self.root.collect_support(&mut support);
        support
    }

    pub fn evaluate(&self, oracle: impl Fn(&BitString, u32) -> bool) -> u64 {
        let mut node = &self.root;
        loop {
            match node {
                RefereeNode::Leaf(v) => return *v,
                RefereeNode::Query { x, k, yes, no } => {
                    node = if oracle(x, *k) { yes } else { no };
                }
            }
        }
    }

    /// Like `evaluate` but errors if the walk uses more queries than the
    /// declared depth (only possible for hand-built malformed programs).
    pub fn evaluate_checked(
        &self,
        oracle: impl Fn(&BitString, u32) -> bool,
    ) -> Result<u64, RefereeError> {
        let mut node = &self.root;
        let mut used = 0u32;
        loop {
            match node {
                RefereeNode::Leaf(v) => return Ok(*v),
                RefereeNode::Query { x, k, yes, no } => {
                    used += 1;
                    if used > self.max_depth {
                        return Err(RefereeError::DepthExceeded(self.max_depth));
                    }
                    node = if oracle(x, *k) { yes } else { no };
                }
            }
        }
    }
}

/// Deterministic random referee: same seed, same program. Queries draw from
/// `universe` with thresholds in `levels`; leaves draw from `outputs`.
pub fn random_referee(
    seed: u64,
    depth: u32,
    universe: &[BitString],
    levels: std::ops::RangeInclusive<u32>,
    outputs: std::ops::RangeInclusive<u64>,
) -> RefereeProgram {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    fn gen(
        rng: &mut ChaCha8Rng,
        budget: u32,
        universe: &[BitString],
        levels: &std::ops::RangeInclusive<u32>,
        outputs: &std::ops::RangeInclusive<u64>,
    ) -> RefereeNode {
        if budget == 0 || universe.is_empty() || rng.random_range(0..3) == 0 {
            return RefereeNode::Leaf(rng.random_range(outputs.clone()));
        }
        let x = universe[rng.random_range(0..universe.len())].clone();
        let k = rng.random_range(levels.clone());
        let yes = Box::new(gen(rng, budget - 1, universe, levels, outputs));
        let no = Box::new(gen(rng, budget - 1, universe, levels, outputs));
        RefereeNode::Query { x, k, yes, no }
    }
    let root = gen(&mut rng, depth, universe, &levels, &outputs);
    let mut support = BTreeSet::new();
    root.collect_support(&mut support);
    let max_query_len = support.iter().map(|(x, _)| x.len() as u32).max().unwrap_or(0);
    let max_depth = root.depth();
    RefereeProgram {
        root,
        max_depth,
        max_query_len,
    }
}

pub fn print_referee(program: &RefereeProgram) -> String {
    fn emit(node: &RefereeNode, indent: usize, out: &mut String) {
        let pad = "  ".repeat(indent);
        match node {
            RefereeNode::Leaf(v) => {
                writeln!(out, "{pad}out {v}").unwrap();
            }
            RefereeNode::Query { x, k, yes, no } => {
                writeln!(out, "{pad}query x={x} k={k}").unwrap();
                writeln!(out, "{pad}  yes:").unwrap();
                emit(yes, indent + 2, out);
                writeln!(out, "{pad}  no:").unwrap();
                emit(no, indent + 2, out);
            }
        }
    }
    let mut out = String::new();
    emit(&program.root, 0, &mut out);
    out
}

pub fn parse_referee(text: &str) -> Result<RefereeProgram, RefereeError> {
    struct Line {
        number: usize,
        indent: usize,
        content: String,
    }
    let mut lines = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        if raw.trim().is_empty() || raw.trim_start().starts_with('#') {
            continue;
        }
        let spaces = raw.len() - raw.trim_start_matches(' ').len();
        if spaces % 2 != 0 {
            return Err(RefereeError::Parse {
                line: i + 1,
                msg: "indentation must be a multiple of 2 spaces".to_string(),
            });
        }
        lines.push(Line {
            number: i + 1,
            indent: spaces / 2,
            content: raw.trim().to_string(),
        });
    }

    fn parse_node(
        lines: &[Line],
        pos: &mut usize,
        indent: usize,
    ) -> Result<RefereeNode, RefereeError> {
        let line = lines.get(*pos).ok_or(RefereeError::Parse {
            line: lines.last().map_or(0, |l| l.number),
            msg: "unexpected end of referee program".to_string(),
        })?;
        let err = |msg: &str| RefereeError::Parse {
            line: line.number,
            msg: msg.to_string(),
        };
        if line.indent != indent {
            return Err(err(&format!(
                "expected indent {indent}, found {}",
                line.indent
            )));
        }
        if let Some(rest) = line.content.strip_prefix("out ") {
            let value: u64 = rest.trim().parse().map_err(|_| err("bad output value"))?;
            *pos += 1;
            return Ok(RefereeNode::Leaf(value));
        }
        if let Some(rest) = line.content.strip_prefix("query ") {
            let mut x = None;
            let mut k = None;
            for token in rest.split_whitespace() {
                if let Some(v) = token.strip_prefix("x=") {
                    x = Some(BitString::parse(v).map_err(|_| err("bad query bits"))?);
                } else if let Some(v) = token.strip_prefix("k=") {
                    let parsed: i64 = v.parse().map_err(|_| err("bad threshold"))?;
                    if parsed < 0 {
                        return Err(RefereeError::NegativeThreshold(parsed));
                    }
                    k = Some(parsed as u32);
                } else {
                    return Err(err(&format!("unknown token {token:?}")));
                }
            }
            let x = x.ok_or_else(|| err("query missing x="))?;
            let k = k.ok_or_else(|| err("query missing k="))?;
            *pos += 1;
            let expect_label = |lines: &[Line], pos: &mut usize, label: &str| {
                let line = lines.get(*pos).ok_or(RefereeError::Parse {
                    line: lines.last().map_or(0, |l| l.number),
                    msg: format!("missing {label} branch"),
                })?;
                if line.indent != indent + 1 || line.content != label {
                    return Err(RefereeError::Parse {
                        line: line.number,
                        msg: format!("expected {label} at indent {}", indent + 1),
                    });
                }
                *pos += 1;
                Ok(())
            };
            expect_label(lines, pos, "yes:")?;
            let yes = parse_node(lines, pos, indent + 2)?;
            expect_label(lines, pos, "no:")?;
            let no = parse_node(lines, pos, indent + 2)?;
            return Ok(RefereeNode::Query {
                x,
                k,
                yes: Box::new(yes),
                no: Box::new(no),
            });
        }
        Err(err("expected `out <int>` or `query x=<bits> k=<int>`"))
    }

    let mut pos = 0;
    let root = parse_node(&lines, &mut pos, 0)?;
    if pos != lines.len() {
        return Err(RefereeError::Parse {
            line: lines[pos].number,
            msg: "trailing content after referee program".to_string(),
        });
    }
    let mut support = BTreeSet::new();
    root.collect_support(&mut support);
    let max_query_len = support.iter().map(|(x, _)| x.len() as u32).max().unwrap_or(0);
    let max_depth = root.depth();
    Ok(RefereeProgram {
        root,
        max_depth,
        max_query_len,
    })
}
