//! `cfsig` command implementations. `main.rs` only parses arguments and
//! maps [`CliError`] to the process exit code.
//!
//! Exit codes: 0 match or clean, 1 bad input, 2 mismatch or intrusion,
//! 3 bad signature file, 4 scenario error, 5 empty corpus.

pub mod report;

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use cfsig_core::arborescence::{
    enumerate_all_arborescences, max_edge_disjoint_packing, peel_edge_disjoint,
};
use cfsig_core::cfg::{
    generate_synthetic, parse_cfg, to_dot, to_graphml, validate_cfg, CfgFormat, ControlFlowGraph,
    SyntheticSpec,
};
use cfsig_core::matcher::{match_signatures, Outcome};
use cfsig_core::replica::{
    load_fixture, run_cluster_scenario, ClusterConfig, NodeId, Scenario, ScenarioFile, Verdict,
};
use cfsig_core::signature::{
    build_signature, sanitize_label, Cipher, CipherKey, HashAlgorithm, ProcessSignature,
};
use clap::{Parser, Subcommand};

use report::{parse_reference_times, TimingReport, TimingRow};

pub const EXIT_OK: u8 = 0;
pub const EXIT_BAD_INPUT: u8 = 1;
pub const EXIT_DIVERGED: u8 = 2;
pub const EXIT_BAD_SIGNATURE: u8 = 3;
pub const EXIT_SCENARIO: u8 = 4;
pub const EXIT_EMPTY_CORPUS: u8 = 5;

/// Names, sizes and edge densities of the synthetic benchmark corpus.
pub const CORPUS: [(&str, usize, f64); 16] = [
    ("wordmean", 18, 0.06),
    ("pentomino", 34, 0.05),
    ("distbbp", 26, 0.06),
    ("aggregatewordcount", 22, 0.07),
    ("secondarysort", 20, 0.06),
    ("aggregatewordhist", 24, 0.06),
    ("randomwriter", 16, 0.08),
    ("teravalidate", 14, 0.08),
    ("qmc", 12, 0.10),
    ("wordstandarddeviation", 19, 0.06),
    ("wordmedian", 17, 0.07),
    ("bbp", 28, 0.05),
    ("teragen", 15, 0.08),
    ("sudoku", 40, 0.04),
    ("wordcount", 10, 0.12),
    ("multifilewc", 21, 0.06),
];

#[derive(Debug, Parser)]
#[command(
    name = "cfsig",
    version,
    about = "Control-flow signatures for replicated processes"
)]
pub struct Cli {
    /// Hash algorithm: md5, sha1 or sha256.
    #[arg(long, global = true)]
    pub alg: Option<HashAlgorithm>,
    /// Shared cipher key.
    #[arg(long, global = true)]
    pub key: Option<u32>,
    /// Signature cipher: null, shift or xor.
    #[arg(long, global = true)]
    pub cipher: Option<Cipher>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the signature of a CFG export (.dot or .graphml).
    Sign {
        input: PathBuf,
        /// Drop blocks unreachable from the entry instead of failing.
        #[arg(long)]
        prune: bool,
        /// Output path; defaults to the input with a `.sig` extension.
        #[arg(long, short)]
        out: Option<PathBuf>,
        /// Process label; defaults to the input file stem.
        #[arg(long)]
        label: Option<String>,
    },
    /// Compare two signature files.
    Match { a: PathBuf, b: PathBuf },
    /// Run a replica-cluster scenario.
    Simulate {
        scenario: PathBuf,
        /// Fixture directory; defaults to the scenario's directory.
        #[arg(long)]
        fixtures: Option<PathBuf>,
        /// Transcript path; defaults to the scenario with a `.transcript` extension.
        #[arg(long)]
        transcript: Option<PathBuf>,
    },
    /// Time sign, match and consensus over every fixture in a directory.
    Bench {
        corpus: PathBuf,
        /// `label,exec_time` CSV of reference run times in seconds.
        #[arg(long)]
        reference: Option<PathBuf>,
        /// Also write the report as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Replication factor.
        #[arg(long, default_value_t = 3)]
        n: usize,
        /// Runs per fixture; timings are averaged.
        #[arg(long, default_value_t = 1)]
        repeat: u32,
    },
    /// Compare peeling against exhaustive enumeration on one CFG.
    Oracle { input: PathBuf },
    /// Write the synthetic benchmark corpus in both formats.
    Generate {
        out_dir: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Debug, PartialEq, Eq)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    fn new(code: u8, message: impl Into<String>) -> Self {
        CliError {
            code,
            message: message.into(),
        }
    }
}

type CmdResult = Result<u8, CliError>;

/// Runs one command, writing its normal output to `out`. Returns the exit
/// code for outcomes that are not errors (0 or 2).
pub fn run(cli: &Cli, out: &mut dyn Write) -> CmdResult {
    let alg = cli.alg.unwrap_or_default();
    match &cli.command {
        Command::Sign {
            input,
            prune,
            out: dest,
            label,
        } => cmd_sign(input, alg, *prune, dest.as_deref(), label.as_deref(), out),
        Command::Match { a, b } => cmd_match(a, b, out),
        Command::Simulate {
            scenario,
            fixtures,
            transcript,
        } => cmd_simulate(
            cli,
            scenario,
            fixtures.as_deref(),
            transcript.as_deref(),
            out,
        ),
        Command::Bench {
            corpus,
            reference,
            csv,
            n,
            repeat,
        } => cmd_bench(
            cli,
            corpus,
            reference.as_deref(),
            csv.as_deref(),
            *n,
            *repeat,
            out,
        ),
        Command::Oracle { input } => cmd_oracle(input, out),
        Command::Generate { out_dir, seed } => cmd_generate(out_dir, *seed, out),
    }
}

fn say(out: &mut dyn Write, text: impl AsRef<str>) -> Result<(), CliError> {
    writeln!(out, "{}", text.as_ref())
        .map_err(|e| CliError::new(EXIT_BAD_INPUT, format!("write failed: {e}")))
}

fn read(path: &Path, code: u8) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::new(code, format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text)
        .map_err(|e| CliError::new(EXIT_BAD_INPUT, format!("{}: {e}", path.display())))
}

/// Loads and validates a CFG export.
pub fn load_cfg(path: &Path, prune: bool) -> Result<ControlFlowGraph, CliError> {
    let bad = |m: String| CliError::new(EXIT_BAD_INPUT, format!("{}: {m}", path.display()));
    let format = CfgFormat::from_path(path).map_err(|e| bad(e.to_string()))?;
    let g = parse_cfg(&read(path, EXIT_BAD_INPUT)?, format).map_err(|e| bad(e.to_string()))?;
    let report = validate_cfg(&g);
    if report.is_ok() {
        Ok(g)
    } else if prune && report.only_unreachable() {
        Ok(g.prune_unreachable())
    } else {
        Err(bad(format!("invalid graph: {report}")))
    }
}

fn file_label(path: &Path) -> String {
    sanitize_label(&path.file_stem().unwrap_or_default().to_string_lossy())
}

fn cmd_sign(
    input: &Path,
    alg: HashAlgorithm,
    prune: bool,
    dest: Option<&Path>,
    label: Option<&str>,
    out: &mut dyn Write,
) -> CmdResult {
    let g = load_cfg(input, prune)?;
    let label = label
        .map(str::to_string)
        .unwrap_or_else(|| file_label(input));
    let sig = build_signature(&peel_edge_disjoint(&g), alg, &label);
    let dest = dest
        .map(Path::to_path_buf)
        .unwrap_or_else(|| input.with_extension("sig"));
    write(&dest, &sig.to_text())?;
    let noun = if sig.len() == 1 { "digest" } else { "digests" };
    say(
        out,
        format!("wrote {} ({} {noun})", dest.display(), sig.len()),
    )?;
    Ok(EXIT_OK)
}

fn load_signature(path: &Path) -> Result<ProcessSignature, CliError> {
    ProcessSignature::from_text(&read(path, EXIT_BAD_SIGNATURE)?)
        .map_err(|e| CliError::new(EXIT_BAD_SIGNATURE, format!("{}: {e}", path.display())))
}

fn cmd_match(a: &Path, b: &Path, out: &mut dyn Write) -> CmdResult {
    let verdict = match_signatures(&load_signature(a)?, &load_signature(b)?);
    say(out, verdict.to_string())?;
    Ok(match verdict.outcome() {
        Outcome::Match => EXIT_OK,
        Outcome::Mismatch => EXIT_DIVERGED,
    })
}

/// Applies the global `--alg`, `--key` and `--cipher` flags over `config`.
fn apply_overrides(cli: &Cli, config: &mut ClusterConfig) {
    if let Some(alg) = cli.alg {
        config.algorithm = alg;
    }
    if let Some(cipher) = cli.cipher {
        config.cipher = cipher;
    }
    if let Some(key) = cli.key {
        config.key = CipherKey::new(key).with_id(config.key.id);
    }
}

fn cmd_simulate(
    cli: &Cli,
    path: &Path,
    fixtures: Option<&Path>,
    transcript: Option<&Path>,
    out: &mut dyn Write,
) -> CmdResult {
    let scenario_err = |m: String| CliError::new(EXIT_SCENARIO, format!("{}: {m}", path.display()));
    let mut file = ScenarioFile::parse(&read(path, EXIT_SCENARIO)?)
        .map_err(|e| scenario_err(e.to_string()))?;
    apply_overrides(cli, &mut file.config);
    file.config
        .validate()
        .map_err(|e| scenario_err(e.to_string()))?;
    let dir = fixtures
        .map(Path::to_path_buf)
        .unwrap_or_else(|| path.parent().map(Path::to_path_buf).unwrap_or_default());
    let base =
        load_fixture(&dir, &file.scenario.fixture).map_err(|e| scenario_err(e.to_string()))?;
    let outcome = run_cluster_scenario(&file.config, &file.scenario, &base)
        .map_err(|e| scenario_err(e.to_string()))?;
    let dest = transcript
        .map(Path::to_path_buf)
        .unwrap_or_else(|| path.with_extension("transcript"));
    write(&dest, &outcome.transcript)?;
    say(out, outcome.verdict.to_string())?;
    Ok(if outcome.verdict == Verdict::Clean {
        EXIT_OK
    } else {
        EXIT_DIVERGED
    })
}

/// Fixture names in `dir`, one per stem, sorted.
pub fn corpus_names(dir: &Path) -> Result<Vec<String>, CliError> {
    let entries = fs::read_dir(dir)
        .map_err(|e| CliError::new(EXIT_BAD_INPUT, format!("{}: {e}", dir.display())))?;
    let mut names: Vec<String> = entries
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| CfgFormat::from_path(p).is_ok())
        .filter_map(|p| p.file_stem().map(|s| s.to_string_lossy().into_owned()))
        .collect();
    names.sort();
    names.dedup();
    Ok(names)
}

fn cmd_bench(
    cli: &Cli,
    corpus: &Path,
    reference: Option<&Path>,
    csv_path: Option<&Path>,
    n: usize,
    repeat: u32,
    out: &mut dyn Write,
) -> CmdResult {
    let names = corpus_names(corpus)?;
    if names.is_empty() {
        return Err(CliError::new(
            EXIT_EMPTY_CORPUS,
            format!("{}: no .dot or .graphml fixtures", corpus.display()),
        ));
    }
    let refs: BTreeMap<String, f64> = match reference {
        Some(p) => parse_reference_times(&read(p, EXIT_BAD_INPUT)?)
            .map_err(|e| CliError::new(EXIT_BAD_INPUT, format!("{}: {e}", p.display())))?,
        None => BTreeMap::new(),
    };
    let mut config = ClusterConfig::new(n);
    apply_overrides(cli, &mut config);
    config
        .validate()
        .map_err(|e| CliError::new(EXIT_BAD_INPUT, e.to_string()))?;
    let repeat = repeat.max(1);
    let mut rows = Vec::with_capacity(names.len());
    for name in &names {
        let bad = |m: String| CliError::new(EXIT_BAD_INPUT, format!("{name}: {m}"));
        let input = load_fixture(corpus, name).map_err(|e| bad(e.to_string()))?;
        let scenario = Scenario {
            fixture: name.clone(),
            ..Scenario::default()
        };
        let mut sums = [0.0f64; 4];
        for _ in 0..repeat {
            let outcome =
                run_cluster_scenario(&config, &scenario, &input).map_err(|e| bad(e.to_string()))?;
            if outcome.verdict != Verdict::Clean {
                return Err(bad(format!("untampered run ended {}", outcome.verdict)));
            }
            let t = outcome.timings[&NodeId(0)];
            sums[0] += (t.parse + t.extract).as_secs_f64();
            sums[1] += t.hash.as_secs_f64();
            sums[2] += t.matching.as_secs_f64();
            sums[3] += t.consensus.as_secs_f64();
        }
        let k = f64::from(repeat);
        rows.push(
            TimingRow::new(
                name.clone(),
                sums[0] / k,
                sums[1] / k,
                sums[2] / k,
                sums[3] / k,
            )
            .with_reference(refs.get(name).copied()),
        );
    }
    let report = TimingReport::new(rows);
    if let Some(p) = csv_path {
        let text = report
            .to_csv()
            .map_err(|e| CliError::new(EXIT_BAD_INPUT, e.to_string()))?;
        write(p, &text)?;
    }
    say(out, report.render_table().trim_end())?;
    Ok(EXIT_OK)
}

fn cmd_oracle(input: &Path, out: &mut dyn Write) -> CmdResult {
    let g = load_cfg(input, false)?;
    let oracle_err = |e: String| CliError::new(EXIT_BAD_INPUT, format!("{}: {e}", input.display()));
    let all = enumerate_all_arborescences(&g).map_err(|e| oracle_err(e.to_string()))?;
    let packing = max_edge_disjoint_packing(&g).map_err(|e| oracle_err(e.to_string()))?;
    let peel = peel_edge_disjoint(&g);
    let known: Vec<_> = all.iter().map(|a| a.canonical()).collect();
    let missing = peel
        .iter()
        .filter(|a| !known.contains(&a.canonical()))
        .count();
    say(
        out,
        format!("nodes={} edges={}", g.node_count(), g.edge_count()),
    )?;
    say(out, format!("arborescences={}", all.len()))?;
    say(out, format!("peel={}", peel.len()))?;
    say(out, format!("max_packing={packing}"))?;
    for a in peel.iter() {
        say(out, format!("peeled {}", a.canonical().as_str()))?;
    }
    let consistent = missing == 0 && peel.len() <= packing;
    say(
        out,
        if consistent {
            "consistent"
        } else {
            "INCONSISTENT"
        },
    )?;
    Ok(if consistent { EXIT_OK } else { EXIT_BAD_INPUT })
}

fn cmd_generate(dir: &Path, seed: u64, out: &mut dyn Write) -> CmdResult {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::new(EXIT_BAD_INPUT, format!("{}: {e}", dir.display())))?;
    for (i, (name, nodes, density)) in CORPUS.iter().enumerate() {
        let g = generate_synthetic(SyntheticSpec::new(
            *nodes,
            *density,
            seed.wrapping_add(i as u64),
        ))
        .map_err(|e| CliError::new(EXIT_BAD_INPUT, e.to_string()))?;
        write(&dir.join(format!("{name}.dot")), &to_dot(&g))?;
        write(&dir.join(format!("{name}.graphml")), &to_graphml(&g))?;
    }
    say(
        out,
        format!("wrote {} fixtures to {}", CORPUS.len(), dir.display()),
    )?;
    Ok(EXIT_OK)
}
