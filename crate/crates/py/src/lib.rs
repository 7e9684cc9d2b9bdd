//! Python bindings: thin wrappers over the core types, converting bit
//! strings to and from plain `str` at the boundary.

use std::path::{Path, PathBuf};

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use kduel_core::bitstr::BitString;
use kduel_core::counting::count_simple_decompressor;
use kduel_core::fighter::{parse_events, parse_fighter_config, print_report, run_simulation, FighterError};
use kduel_core::keylemma::{self, BetaFunction, ThresholdInputs};
use kduel_core::referee::{parse_referee, print_referee, random_referee, RefereeProgram};
use kduel_core::scenario::{load_scenario, parse_scenario, Scenario};
use kduel_core::solver::{solve, steal, trace_play, verify_stolen, SolveOptions};
use kduel_core::toy::{parse_trace, ToyDecompressor};

fn bad(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn bits(text: &str) -> PyResult<BitString> {
    BitString::parse(text).map_err(bad)
}

/// Finite table mapping programs to outputs; complexity of a string is the
/// length of its shortest program.
#[pyclass]
struct Decompressor {
    inner: ToyDecompressor,
}

#[pymethods]
impl Decompressor {
    #[new]
    fn new() -> Self {
        Decompressor {
            inner: ToyDecompressor::new(),
        }
    }

    /// Builds the table a trace file ends up with.
    #[staticmethod]
    fn from_trace(text: &str) -> PyResult<Self> {
        let trace = parse_trace(text).map_err(bad)?;
        Ok(Decompressor {
            inner: trace.to_decompressor(),
        })
    }

    #[pyo3(signature = (program, output, cost = 0))]
    fn insert(&mut self, program: &str, output: &str, cost: u64) -> PyResult<()> {
        self.inner
            .insert(bits(program)?, bits(output)?, cost)
            .map_err(bad)
    }

    /// Shortest program length for `x`, or None if nothing produces it.
    fn complexity_of(&self, x: &str) -> PyResult<Option<u32>> {
        Ok(self.inner.complexity_of(&bits(x)?).finite())
    }

    fn simple_count(&self, m: u32) -> u64 {
        self.inner.simple_count(m)
    }

    /// Binary-search count of the m-simple strings; returns (count, queries).
    fn count_simple(&self, m: u32) -> PyResult<(u64, u32)> {
        let out = count_simple_decompressor(&self.inner, m).map_err(bad)?;
        Ok((out.count, out.queries))
    }

    fn is_prefix_free(&self) -> bool {
        self.inner.is_prefix_free()
    }

    fn __len__(&self) -> usize {
        self.inner.table().len()
    }
}

/// Decision tree the game consults: oracle queries at the nodes, outputs at
/// the leaves.
#[pyclass]
struct Referee {
    inner: RefereeProgram,
}

#[pymethods]
impl Referee {
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        Ok(Referee {
            inner: parse_referee(text).map_err(bad)?,
        })
    }

    /// Seed-determined random program over the given query strings.
    #[staticmethod]
    #[pyo3(signature = (seed, depth, universe, levels = (1, 4), outputs = (0, 1)))]
    fn random(
        seed: u64,
        depth: u32,
        universe: Vec<String>,
        levels: (u32, u32),
        outputs: (u64, u64),
    ) -> PyResult<Self> {
        let universe: Vec<BitString> = universe
            .iter()
            .map(|s| bits(s))
            .collect::<PyResult<_>>()?;
        Ok(Referee {
            inner: random_referee(seed, depth, &universe, levels.0..=levels.1, outputs.0..=outputs.1),
        })
    }

    #[getter]
    fn depth(&self) -> u32 {
        self.inner.depth()
    }

    #[getter]
    fn max_output(&self) -> u64 {
        self.inner.max_output()
    }

    /// Every (string, level) pair the program can ask about.
    fn support(&self) -> Vec<(String, u32)> {
        self.inner
            .support()
            .into_iter()
            .map(|(x, k)| (x.to_string(), k))
            .collect()
    }

    fn __str__(&self) -> String {
        print_referee(&self.inner)
    }
}

/// One game instance loaded from a scenario file.
#[pyclass]
struct Game {
    scenario: Scenario,
}

#[pymethods]
impl Game {
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Game {
            scenario: load_scenario(Path::new(path)).map_err(bad)?,
        })
    }

    #[staticmethod]
    fn parse(text: &str, base_dir: &str) -> PyResult<Self> {
        Ok(Game {
            scenario: parse_scenario(text, Path::new(base_dir)).map_err(bad)?,
        })
    }

    #[getter]
    fn target(&self) -> u64 {
        self.scenario.config.target
    }

    #[getter]
    fn budgets(&self) -> (u64, u64) {
        (
            self.scenario.config.budget_alice,
            self.scenario.config.budget_bob,
        )
    }

    /// Solves the game; returns (winner, states explored, initial output).
    #[pyo3(signature = (max_states = 10_000_000))]
    fn solve(&self, max_states: usize) -> PyResult<(String, usize, u64)> {
        let result = solve(&self.scenario.config, SolveOptions { max_states }).map_err(bad)?;
        Ok((
            result.winner.letter().to_string(),
            result.states_explored,
            result.initial_output,
        ))
    }

    /// One optimal-vs-optimal playthrough; returns the move lines and the
    /// verdict as (winner, final output, turns).
    #[pyo3(signature = (max_states = 10_000_000))]
    fn trace(&self, max_states: usize) -> PyResult<(Vec<String>, (String, u64, u32))> {
        let cfg = &self.scenario.config;
        let result = solve(cfg, SolveOptions { max_states }).map_err(bad)?;
        let (lines, verdict) = trace_play(cfg, &result).map_err(bad)?;
        Ok((
            lines,
            (
                verdict.winner.letter().to_string(),
                verdict.final_output,
                verdict.turns,
            ),
        ))
    }

    /// Steals a Bob win and replays it as Alice in the target+1 instance;
    /// returns (dummy level, adjusted target, final output, replays).
    #[pyo3(signature = (replays = 20, seed = 2024, max_states = 10_000_000))]
    fn steal_and_verify(
        &self,
        replays: usize,
        seed: u64,
        max_states: usize,
    ) -> PyResult<(u32, u64, u64, usize)> {
        let cfg = &self.scenario.config;
        let result = solve(cfg, SolveOptions { max_states }).map_err(bad)?;
        let plan = steal(cfg, &result).map_err(bad)?;
        let stats = verify_stolen(cfg, &result, &plan, replays, seed).map_err(bad)?;
        Ok((
            plan.dummy_level,
            plan.adjusted_target,
            stats.final_output,
            stats.replays,
        ))
    }
}

/// Counts the m-simple strings of a trace's final table with the
/// binary-search reduction; returns (count, queries).
#[pyfunction]
fn count_trace(text: &str, m: u32) -> PyResult<(u64, u32)> {
    let trace = parse_trace(text).map_err(bad)?;
    let dec = trace.to_decompressor();
    let out = count_simple_decompressor(&dec, m).map_err(bad)?;
    Ok((out.count, out.queries))
}

/// Largest l with beta(l) >= l; raises if beta(q) >= q already holds.
#[pyfunction]
fn fixed_point(values: Vec<u32>) -> PyResult<u32> {
    let beta = BetaFunction::new(values).map_err(bad)?;
    keylemma::fixed_point(&beta).map_err(bad)
}

/// One price from the four-step threshold rule; `slack` is the lambda
/// constant inside the exponents.
#[pyfunction]
fn threshold(
    n: u32,
    q: u32,
    slack: u32,
    past_volume_q: u64,
    delta_q: u32,
    delta_n: u32,
    struct_volume_n: u64,
) -> PyResult<u64> {
    keylemma::threshold(&ThresholdInputs {
        n,
        q,
        lambda: slack,
        past_volume_q,
        delta_terms: (delta_q, delta_n),
        struct_volume_n,
    })
    .map_err(bad)
}

/// Runs an event stream through the tower of games and returns the printed
/// report. Referee paths in the config resolve relative to `base_dir`.
#[pyfunction]
fn run_fighter(config_text: &str, events_text: &str, base_dir: &str) -> PyResult<String> {
    let base = PathBuf::from(base_dir);
    let mut load = |path: &str| -> Result<String, FighterError> {
        std::fs::read_to_string(base.join(path))
            .map_err(|e| FighterError::Internal(format!("cannot read {path}: {e}")))
    };
    let cfg = parse_fighter_config(config_text, &mut load).map_err(bad)?;
    let events = parse_events(events_text).map_err(bad)?;
    let report = run_simulation(&cfg, &events).map_err(bad)?;
    Ok(print_report(&report))
}

#[pymodule]
fn kduel_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Decompressor>()?;
    m.add_class::<Referee>()?;
    m.add_class::<Game>()?;
    m.add_function(wrap_pyfunction!(count_trace, m)?)?;
    m.add_function(wrap_pyfunction!(fixed_point, m)?)?;
    m.add_function(wrap_pyfunction!(threshold, m)?)?;
    m.add_function(wrap_pyfunction!(run_fighter, m)?)?;
    Ok(())
}
