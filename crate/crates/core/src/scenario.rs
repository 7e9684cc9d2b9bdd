//! Scenario files: one game instance in a line-oriented text format.
//!
//! ```text
//! target 1
//! floor 1
//! budget alice=2 bob=0
//! c0 1
//! longthreshold 4
//! referee flip.ref
//! init x=01 c=5
//! price x=01 q=3 b=2
//! counter x=01 q=3 v=1
//! longprice q=3 b=1
//! ```
//!
//! The referee path is resolved relative to the scenario file. Unknown keys
//! and duplicate assignments are errors. Absent optional keys default to
//! floor 1, budgets 0, c0 1, and a long threshold equal to the longest
//! string the referee queries.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::bitstr::BitString;
use crate::game::{GameConfig, GameError};
use crate::referee::{parse_referee, RefereeError};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("line {line}: unknown key {key:?}")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: duplicate {what}")]
    Duplicate { line: usize, what: String },
    #[error("missing required key {0:?}")]
    Missing(&'static str),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("referee: {0}")]
    Referee(#[from] RefereeError),
    #[error(transparent)]
    Game(#[from] GameError),
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: GameConfig,
    /// Referee path exactly as written in the scenario file.
    pub referee_path: PathBuf,
}

fn kv<'a>(token: &'a str, key: &str, line: usize) -> Result<&'a str, ScenarioError> {
    token
        .strip_prefix(key)
        .and_then(|rest| rest.strip_prefix('='))
        .ok_or_else(|| ScenarioError::Parse {
            line,
            msg: format!("expected {key}=<value>, found {token:?}"),
        })
}

fn parse_int<T: std::str::FromStr>(text: &str, line: usize, what: &str) -> Result<T, ScenarioError> {
    text.parse().map_err(|_| ScenarioError::Parse {
        line,
        msg: format!("bad {what}: {text:?}"),
    })
}

fn parse_bits(text: &str, line: usize) -> Result<BitString, ScenarioError> {
    BitString::parse(text).map_err(|_| ScenarioError::Parse {
        line,
        msg: format!("bad bit string: {text:?}"),
    })
}

pub fn parse_scenario(text: &str, base_dir: &Path) -> Result<Scenario, ScenarioError> {
    let mut target: Option<u64> = None;
    let mut floor: Option<u32> = None;
    let mut c0: Option<u32> = None;
    let mut long_threshold: Option<u32> = None;
    let mut budgets: Option<(u64, u64)> = None;
    let mut referee_path: Option<PathBuf> = None;
    let mut init_complexity: BTreeMap<BitString, u32> = BTreeMap::new();
    let mut prices: BTreeMap<(BitString, u32), u64> = BTreeMap::new();
    let mut counters: BTreeMap<(BitString, u32), u64> = BTreeMap::new();
    let mut long_prices: BTreeMap<u32, u64> = BTreeMap::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.trim();
        if content.is_empty() || content.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = content.split_whitespace().collect();
        let expect_arity = |n: usize| -> Result<(), ScenarioError> {
            if tokens.len() != n {
                Err(ScenarioError::Parse {
                    line,
                    msg: format!("expected {} tokens, found {}", n, tokens.len()),
                })
            } else {
                Ok(())
            }
        };
        let set_once = |slot_is_some: bool, what: &str| -> Result<(), ScenarioError> {
            if slot_is_some {
                Err(ScenarioError::Duplicate {
                    line,
                    what: what.to_string(),
                })
            } else {
                Ok(())
            }
        };
        match tokens[0] {
            "target" => {
                expect_arity(2)?;
                set_once(target.is_some(), "target")?;
                target = Some(parse_int(tokens[1], line, "target")?);
            }
            "floor" => {
                expect_arity(2)?;
                set_once(floor.is_some(), "floor")?;
                floor = Some(parse_int(tokens[1], line, "floor")?);
            }
            "c0" => {
                expect_arity(2)?;
                set_once(c0.is_some(), "c0")?;
                c0 = Some(parse_int(tokens[1], line, "c0")?);
            }
            "longthreshold" => {
                expect_arity(2)?;
                set_once(long_threshold.is_some(), "longthreshold")?;
                long_threshold = Some(parse_int(tokens[1], line, "longthreshold")?);
            }
            "budget" => {
                expect_arity(3)?;
                set_once(budgets.is_some(), "budget")?;
                let alice = parse_int(kv(tokens[1], "alice", line)?, line, "alice budget")?;
                let bob = parse_int(kv(tokens[2], "bob", line)?, line, "bob budget")?;
                budgets = Some((alice, bob));
            }
            "referee" => {
                expect_arity(2)?;
                set_once(referee_path.is_some(), "referee")?;
                referee_path = Some(PathBuf::from(tokens[1]));
            }
            "init" => {
                expect_arity(3)?;
                let x = parse_bits(kv(tokens[1], "x", line)?, line)?;
                let c = parse_int(kv(tokens[2], "c", line)?, line, "complexity")?;
                if init_complexity.insert(x.clone(), c).is_some() {
                    return Err(ScenarioError::Duplicate {
                        line,
                        what: format!("init for {x}"),
                    });
                }
            }
            "price" => {
                expect_arity(4)?;
                let x = parse_bits(kv(tokens[1], "x", line)?, line)?;
                let q = parse_int(kv(tokens[2], "q", line)?, line, "level")?;
                let b = parse_int(kv(tokens[3], "b", line)?, line, "price")?;
                if prices.insert((x.clone(), q), b).is_some() {
                    return Err(ScenarioError::Duplicate {
                        line,
                        what: format!("price for ({x}, {q})"),
                    });
                }
            }
            "counter" => {
                expect_arity(4)?;
                let x = parse_bits(kv(tokens[1], "x", line)?, line)?;
                let q = parse_int(kv(tokens[2], "q", line)?, line, "level")?;
                let v = parse_int(kv(tokens[3], "v", line)?, line, "counter value")?;
                if counters.insert((x.clone(), q), v).is_some() {
                    return Err(ScenarioError::Duplicate {
                        line,
                        what: format!("counter for ({x}, {q})"),
                    });
                }
            }
            "longprice" => {
                expect_arity(3)?;
                let q = parse_int(kv(tokens[1], "q", line)?, line, "level")?;
                let b = parse_int(kv(tokens[2], "b", line)?, line, "price")?;
                if long_prices.insert(q, b).is_some() {
                    return Err(ScenarioError::Duplicate {
                        line,
                        what: format!("longprice for level {q}"),
                    });
                }
            }
            other => {
                return Err(ScenarioError::UnknownKey {
                    line,
                    key: other.to_string(),
                });
            }
        }
    }

    let referee_path = referee_path.ok_or(ScenarioError::Missing("referee"))?;
    let target = target.ok_or(ScenarioError::Missing("target"))?;
    let full = base_dir.join(&referee_path);
    let referee_text = std::fs::read_to_string(&full).map_err(|source| ScenarioError::Io {
        path: full.clone(),
        source,
    })?;
    let referee = parse_referee(&referee_text)?;
    let long_threshold = long_threshold.unwrap_or(referee.max_query_len);
    let (budget_alice, budget_bob) = budgets.unwrap_or((0, 0));

    let config = GameConfig {
        referee,
        target,
        init_complexity,
        c0: c0.unwrap_or(1),
        prices,
        init_counters: counters,
        budget_alice,
        budget_bob,
        floor: floor.unwrap_or(1),
        long_threshold,
        long_prices,
    };
    config.validate()?;
    Ok(Scenario {
        config,
        referee_path,
    })
}

pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_scenario(&text, base)
}

pub fn print_scenario(sc: &Scenario) -> String {
    let cfg = &sc.config;
    let mut out = String::new();
    writeln!(out, "target {}", cfg.target).unwrap();
    writeln!(out, "floor {}", cfg.floor).unwrap();
    writeln!(out, "budget alice={} bob={}", cfg.budget_alice, cfg.budget_bob).unwrap();
    writeln!(out, "c0 {}", cfg.c0).unwrap();
    writeln!(out, "longthreshold {}", cfg.long_threshold).unwrap();
    writeln!(out, "referee {}", sc.referee_path.display()).unwrap();
    for (x, c) in &cfg.init_complexity {
        writeln!(out, "init x={x} c={c}").unwrap();
    }
    for ((x, q), b) in &cfg.prices {
        writeln!(out, "price x={x} q={q} b={b}").unwrap();
    }
    for ((x, q), v) in &cfg.init_counters {
        writeln!(out, "counter x={x} q={q} v={v}").unwrap();
    }
    for (q, b) in &cfg.long_prices {
        writeln!(out, "longprice q={q} b={b}").unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_flip_referee(dir: &Path) {
        std::fs::write(
            dir.join("flip.ref"),
            "query x=01 k=3\n  yes:\n    out 1\n  no:\n    out 0\n",
        )
        .unwrap();
    }

    #[test]
    fn parse_and_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        write_flip_referee(dir.path());
        let text = "\
# one-flip game
target 0
floor 1
budget alice=2 bob=0
c0 1
longthreshold 4
referee flip.ref
init x=01 c=5
price x=01 q=3 b=2
";
        let sc = parse_scenario(text, dir.path()).unwrap();
        assert_eq!(sc.config.target, 0);
        assert_eq!(sc.config.budget_alice, 2);
        assert_eq!(sc.config.prices.len(), 1);

        let printed = print_scenario(&sc);
        let reparsed = parse_scenario(&printed, dir.path()).unwrap();
        assert_eq!(reparsed.config, sc.config);
        assert_eq!(print_scenario(&reparsed), printed);
    }

    #[test]
    fn defaults_applied() {
        let dir = tempfile::tempdir().unwrap();
        write_flip_referee(dir.path());
        let sc = parse_scenario("target 0\nreferee flip.ref\n", dir.path()).unwrap();
        assert_eq!(sc.config.floor, 1);
        assert_eq!(sc.config.c0, 1);
        assert_eq!(sc.config.budget_alice, 0);
        assert_eq!(sc.config.long_threshold, 2);
    }

    #[test]
    fn rejects_unknown_and_duplicate() {
        let dir = tempfile::tempdir().unwrap();
        write_flip_referee(dir.path());
        assert!(matches!(
            parse_scenario("target 0\nreferee flip.ref\nwibble 3\n", dir.path()),
            Err(ScenarioError::UnknownKey { key, .. }) if key == "wibble"
        ));
        assert!(matches!(
            parse_scenario("target 0\ntarget 1\nreferee flip.ref\n", dir.path()),
            Err(ScenarioError::Duplicate { .. })
        ));
        assert!(matches!(
            parse_scenario("referee flip.ref\n", dir.path()),
            Err(ScenarioError::Missing("target"))
        ));
        assert!(matches!(
            parse_scenario(
                "target 0\nreferee flip.ref\nprice x=01 q=3 b=2\nprice x=01 q=3 b=1\n",
                dir.path()
            ),
            Err(ScenarioError::Duplicate { .. })
        ));
    }

    #[test]
    fn invalid_config_rejected() {
        let dir = tempfile::tempdir().unwrap();
        write_flip_referee(dir.path());
        // priced level below floor
        assert!(matches!(
            parse_scenario(
                "target 0\nfloor 2\nreferee flip.ref\nprice x=01 q=1 b=1\n",
                dir.path()
            ),
            Err(ScenarioError::Game(GameError::Config(_)))
        ));
        // referee queries longer than the long threshold
        assert!(matches!(
            parse_scenario("target 0\nlongthreshold 1\nreferee flip.ref\n", dir.path()),
            Err(ScenarioError::Game(GameError::Config(_)))
        ));
    }
}
