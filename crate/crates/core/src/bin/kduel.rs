//! Batch driver: every operation reads files named on the command line and
//! prints fixed line formats, so runs are scriptable and reproducible.
//! Exit codes: solve reports the winner (0 Alice, 1 Bob), fixedpoint reports
//! a missing fixed point as 1, and every configuration or parse problem
//! exits 2 with one diagnostic line on stderr.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use kduel_core::bitstr::BitString;
use kduel_core::counting::count_simple_decompressor;
use kduel_core::fighter::{parse_events, parse_fighter_config, print_report, run_simulation, FighterError};
use kduel_core::keylemma::{fixed_point, parse_beta, threshold, KeyLemmaError, ThresholdInputs};
use kduel_core::referee::{print_referee, random_referee};
use kduel_core::scenario::load_scenario;
use kduel_core::solver::{solve, steal, trace_play, verify_stolen, SolveOptions};
use kduel_core::toy::parse_trace;

#[derive(Parser)]
#[command(name = "kduel", about = "Bounded-query complexity games: solve, count, simulate")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve a scenario; the exit code names the winner (0 Alice, 1 Bob).
    Solve {
        scenario: PathBuf,
        #[arg(long, default_value_t = 10_000_000)]
        max_states: usize,
        /// Write a move-by-move transcript of a showcase game here.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Steal a Bob win and replay it against random adversaries.
        #[arg(long)]
        steal: bool,
        #[arg(long, default_value_t = 20)]
        replays: usize,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
    },
    /// Count the strings of complexity at most m using only oracle queries.
    Count {
        /// Enumeration trace; its final table is the decompressor.
        table: PathBuf,
        #[arg(long)]
        m: u32,
    },
    /// Replay an event stream through the tower of games.
    Fighter {
        events: PathBuf,
        #[arg(long)]
        config: PathBuf,
        /// Write the report here instead of stdout.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Largest level at which a beta table sits at or above the diagonal.
    Fixedpoint {
        #[arg(long)]
        beta: PathBuf,
    },
    /// One price from the four-step threshold rule.
    Threshold {
        #[arg(long)]
        n: u32,
        #[arg(long)]
        q: u32,
        #[arg(long)]
        lambda: u32,
        #[arg(long)]
        pastq: u64,
        #[arg(long)]
        dq: u32,
        #[arg(long)]
        dn: u32,
        #[arg(long)]
        structn: u64,
    },
    /// Print a seed-determined random referee program.
    GenReferee {
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 2)]
        depth: u32,
        /// Comma-separated query strings.
        #[arg(long, value_delimiter = ',')]
        universe: Vec<String>,
        /// Query threshold range, lo-hi.
        #[arg(long, default_value = "1-4")]
        levels: String,
        /// Leaf output range, lo-hi.
        #[arg(long, default_value = "0-1")]
        outputs: String,
    },
}

fn read(path: &Path) -> Result<String, String> {
    fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))
}

fn write_out(path: &Path, text: &str) -> Result<(), String> {
    fs::write(path, text).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

fn parse_range<T: std::str::FromStr + Copy>(text: &str) -> Result<(T, T), String> {
    let (lo, hi) = text
        .split_once('-')
        .ok_or_else(|| format!("expected lo-hi, found {text:?}"))?;
    let lo = lo.parse().map_err(|_| format!("bad bound {lo:?}"))?;
    let hi = hi.parse().map_err(|_| format!("bad bound {hi:?}"))?;
    Ok((lo, hi))
}

fn run(cmd: Cmd) -> Result<u8, String> {
    match cmd {
        Cmd::Solve {
            scenario,
            max_states,
            trace,
            steal: do_steal,
            replays,
            seed,
        } => {
            let sc = load_scenario(&scenario).map_err(|e| e.to_string())?;
            let cfg = sc.config;
            cfg.validate().map_err(|e| e.to_string())?;
            let opts = SolveOptions { max_states };
            let result = solve(&cfg, opts).map_err(|e| e.to_string())?;
            println!(
                "winner={} states={} output={}",
                result.winner.letter(),
                result.states_explored,
                result.initial_output
            );
            if let Some(path) = &trace {
                let (lines, verdict) = trace_play(&cfg, &result).map_err(|e| e.to_string())?;
                let mut text = lines.join("\n");
                if !text.is_empty() {
                    text.push('\n');
                }
                text.push_str(&format!(
                    "verdict winner={} out={} turns={}\n",
                    verdict.winner.letter(),
                    verdict.final_output,
                    verdict.turns
                ));
                write_out(path, &text)?;
            }
            if do_steal {
                let stolen = steal(&cfg, &result).map_err(|e| e.to_string())?;
                let stats = verify_stolen(&cfg, &result, &stolen, replays, seed)
                    .map_err(|e| e.to_string())?;
                println!(
                    "stolen dummy_level={} adjusted_target={} final_output={} replays={}",
                    stolen.dummy_level, stolen.adjusted_target, stats.final_output, stats.replays
                );
            }
            Ok(match result.winner {
                kduel_core::game::Player::Alice => 0,
                kduel_core::game::Player::Bob => 1,
            })
        }
        Cmd::Count { table, m } => {
            let trace = parse_trace(&read(&table)?).map_err(|e| e.to_string())?;
            let dec = trace.to_decompressor();
            let outcome = count_simple_decompressor(&dec, m).map_err(|e| e.to_string())?;
            println!("N_m={} queries={}", outcome.count, outcome.queries);
            Ok(0)
        }
        Cmd::Fighter {
            events,
            config,
            report,
        } => {
            let base = config
                .parent()
                .map(Path::to_path_buf)
                .unwrap_or_else(|| PathBuf::from("."));
            let text = read(&config)?;
            let mut load = |rel: &str| -> Result<String, FighterError> {
                fs::read_to_string(base.join(rel)).map_err(|e| FighterError::Parse {
                    line: 0,
                    msg: format!("cannot read {rel}: {e}"),
                })
            };
            let cfg = parse_fighter_config(&text, &mut load).map_err(|e| e.to_string())?;
            let stream = parse_events(&read(&events)?).map_err(|e| e.to_string())?;
            let sim = run_simulation(&cfg, &stream).map_err(|e| e.to_string())?;
            let rendered = print_report(&sim);
            match &report {
                Some(path) => write_out(path, &rendered)?,
                None => print!("{rendered}"),
            }
            Ok(0)
        }
        Cmd::Fixedpoint { beta } => {
            let table = parse_beta(&read(&beta)?).map_err(|e| e.to_string())?;
            match fixed_point(&table) {
                Ok(l_star) => {
                    println!("lstar={l_star}");
                    Ok(0)
                }
                Err(KeyLemmaError::NoFixedPoint { q, val }) => {
                    eprintln!("no fixed point: beta({q}) = {val} >= {q}");
                    Ok(1)
                }
                Err(e) => Err(e.to_string()),
            }
        }
        Cmd::Threshold {
            n,
            q,
            lambda,
            pastq,
            dq,
            dn,
            structn,
        } => {
            let b = threshold(&ThresholdInputs {
                n,
                q,
                lambda,
                past_volume_q: pastq,
                delta_terms: (dq, dn),
                struct_volume_n: structn,
            })
            .map_err(|e| e.to_string())?;
            println!("B={b}");
            Ok(0)
        }
        Cmd::GenReferee {
            seed,
            depth,
            universe,
            levels,
            outputs,
        } => {
            let mut strings = Vec::new();
            for s in &universe {
                strings.push(BitString::parse(s).map_err(|e| e.to_string())?);
            }
            let (llo, lhi) = parse_range::<u32>(&levels)?;
            let (olo, ohi) = parse_range::<u64>(&outputs)?;
            if llo > lhi || olo > ohi {
                return Err("empty range".to_string());
            }
            let program = random_referee(seed, depth, &strings, llo..=lhi, olo..=ohi);
            print!("{}", print_referee(&program));
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(code) => ExitCode::from(code),
        Err(msg) => {
            eprintln!("{msg}");
            ExitCode::from(2)
        }
    }
}
