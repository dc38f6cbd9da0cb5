mod bench;
mod report;

use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};

use tagflow::aes::aes_encrypt_reference;
use tagflow::aes_graph::{build_aes_graph, build_merged_aes};
use tagflow::energy::{
    compare_designs, lifetime_plot_json, read_power_csv, read_scenarios_csv, write_lifetime_csv,
    BatteryModel, Comparison,
};
use tagflow::format::{parse_document, serialize_graph, serialize_merged, Document, FormatError};
use tagflow::perf::ClockModel;
use tagflow::workload::{parse_workload, ConfigRef};
use tagflow::{
    merge, AesStandard, ComposeError, ConfigId, Engine, EngineError, EngineOptions, KernelRegistry,
    ReadMode, TagId, Workload,
};

#[derive(Parser)]
#[command(
    name = "tagflow",
    version,
    about = "Tagged-token dataflow composer and simulator"
)]
struct Cli {
    /// Directory for files written without an explicit path.
    #[arg(long, global = true, env = "TAGFLOW_OUT_DIR", default_value = ".")]
    out_dir: PathBuf,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Clone, Copy, ValueEnum)]
enum Via {
    Reference,
    Dataflow,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write an unrolled AES graph (or the merged AES-128/256 graph).
    BuildGraph {
        #[arg(long, value_parser = parse_standard, required_unless_present = "merged")]
        standard: Option<AesStandard>,
        #[arg(long, conflicts_with = "standard")]
        merged: bool,
        #[arg(long, default_value_t = 4)]
        stages_per_round: usize,
        #[arg(long, default_value_t = 2)]
        threads: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check graph files against the schema and structural rules.
    Validate {
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Merge graphs into one multi-configuration graph.
    Compose {
        #[arg(long, num_args = 2.., required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, default_value_t = 2)]
        threads: u32,
        /// Defaults to merged.df.json in the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Execute a workload on a graph and report metrics and outputs.
    Run {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        workload: PathBuf,
        /// Configuration for a tag, by id or name, e.g. `--config 1=aes256`.
        #[arg(long = "config", value_name = "TAG=CONFIG")]
        configs: Vec<String>,
        #[arg(long, default_value_t = 1_000_000)]
        max_cycles: u64,
        /// Concurrent tags for single-configuration graphs.
        #[arg(long, default_value_t = 2)]
        threads: u32,
        /// Clock period; adds nanosecond figures to the report.
        #[arg(long)]
        clock_ns: Option<f64>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Read only the globally oldest token of each fifo.
        #[arg(long, hide = true)]
        strict_fifo: bool,
    },
    /// Encrypt 128-bit blocks given as hex arguments or stdin lines.
    Encrypt {
        #[arg(long, value_parser = parse_standard)]
        standard: AesStandard,
        #[arg(long)]
        key: String,
        #[arg(long, value_enum, default_value = "reference")]
        via: Via,
        blocks: Vec<String>,
    },
    /// Run the idle/low/high test cases on the four AES designs.
    Bench {
        #[arg(long, value_enum, default_value = "all")]
        case: bench::CaseArg,
        /// Power figures (design,mode,mw) for the power table.
        #[arg(long)]
        power: Option<PathBuf>,
        #[arg(long, default_value_t = 4)]
        stages_per_round: usize,
        /// Defaults to the period giving 250 ns AES-128 latency.
        #[arg(long)]
        clock_ns: Option<f64>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Weighted power and battery lifetime per usage scenario. Writes
    /// lifetime.csv and lifetime_plot.json to the output directory.
    Energy {
        #[arg(long)]
        power: PathBuf,
        #[arg(long)]
        scenarios: PathBuf,
        #[arg(long, default_value_t = 5000.0)]
        battery_mah: f64,
        #[arg(long, default_value_t = tagflow::energy::DEFAULT_VOLTAGE_V)]
        voltage: f64,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
}

fn parse_standard(s: &str) -> Result<AesStandard, String> {
    s.parse().map_err(|e: tagflow::aes::AesError| e.to_string())
}

/// An error with its exit status: 1 for bad input, 2 for failures while
/// executing.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

fn invalid(e: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: 1,
        error: e.into(),
    }
}

fn runtime(e: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: 2,
        error: e.into(),
    }
}

fn engine_failure(e: EngineError) -> Failure {
    match e {
        EngineError::Kernel(_) | EngineError::Route(_) => runtime(e),
        _ => invalid(e),
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn dispatch(cli: Cli) -> CmdResult {
    let out_dir = cli.out_dir;
    match cli.cmd {
        Cmd::BuildGraph {
            standard,
            merged,
            stages_per_round,
            threads,
            out,
        } => {
            if stages_per_round == 0 {
                return Err(invalid(anyhow!("--stages-per-round must be at least 1")));
            }
            let text = if merged {
                serialize_merged(&build_merged_aes(stages_per_round, threads).map_err(invalid)?)
            } else {
                serialize_graph(&build_aes_graph(
                    standard.expect("required by clap"),
                    stages_per_round,
                ))
            };
            emit(out.as_deref(), &text)
        }
        Cmd::Validate { files } => validate(&files),
        Cmd::Compose {
            inputs,
            threads,
            out,
        } => compose(
            &inputs,
            threads,
            out.unwrap_or_else(|| out_dir.join("merged.df.json")),
        ),
        Cmd::Run {
            graph,
            workload,
            configs,
            max_cycles,
            threads,
            clock_ns,
            format,
            out,
            strict_fifo,
        } => {
            let clock = clock_ns.map(ClockModel::new).transpose().map_err(invalid)?;
            let read_mode = if strict_fifo {
                ReadMode::StrictGlobalOrder
            } else {
                ReadMode::SemiOutOfOrder
            };
            run(
                &graph,
                &workload,
                &configs,
                max_cycles,
                threads,
                read_mode,
                clock,
                format,
                out.as_deref(),
            )
        }
        Cmd::Encrypt {
            standard,
            key,
            via,
            blocks,
        } => encrypt(standard, &key, via, blocks),
        Cmd::Bench {
            case,
            power,
            stages_per_round,
            clock_ns,
            format,
            out,
        } => {
            if stages_per_round == 0 {
                return Err(invalid(anyhow!("--stages-per-round must be at least 1")));
            }
            let clock = match clock_ns {
                Some(p) => ClockModel::new(p).map_err(invalid)?,
                None => ClockModel::calibrated(),
            };
            let profiles = match power {
                Some(p) => Some(read_power_csv(open(&p)?).map_err(invalid)?),
                None => None,
            };
            let report =
                bench::run(case, stages_per_round, clock, profiles.as_deref()).map_err(runtime)?;
            let text = match format {
                Format::Json => json_text(&report)?,
                Format::Csv => bench::csv(&report),
                Format::Text => bench::text(&report),
            };
            emit(out.as_deref(), &text)
        }
        Cmd::Energy {
            power,
            scenarios,
            battery_mah,
            voltage,
            format,
        } => energy(&power, &scenarios, battery_mah, voltage, format, &out_dir),
    }
}

fn open(path: &Path) -> Result<fs::File, Failure> {
    fs::File::open(path)
        .with_context(|| format!("cannot open {}", path.display()))
        .map_err(invalid)
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .map_err(invalid)
}

fn write_file(path: &Path, text: &str) -> CmdResult {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)
            .with_context(|| format!("cannot create {}", dir.display()))
            .map_err(runtime)?;
    }
    fs::write(path, text)
        .with_context(|| format!("cannot write {}", path.display()))
        .map_err(runtime)
}

/// Writes to `out` when given, stdout otherwise.
fn emit(out: Option<&Path>, text: &str) -> CmdResult {
    match out {
        Some(p) => write_file(p, text),
        None => io::stdout()
            .write_all(text.as_bytes())
            .context("cannot write to stdout")
            .map_err(runtime),
    }
}

fn json_text(v: &impl serde::Serialize) -> Result<String, Failure> {
    let mut s = serde_json::to_string_pretty(v).map_err(runtime)?;
    s.push('\n');
    Ok(s)
}

fn load(path: &Path) -> Result<Document, Failure> {
    parse_document(&read(path)?)
        .with_context(|| format!("{}", path.display()))
        .map_err(invalid)
}

fn validate(files: &[PathBuf]) -> CmdResult {
    let mut bad = 0;
    for f in files {
        match parse_document(&read(f)?) {
            Ok(Document::Single(g)) => println!(
                "{}: ok (graph {}, {} actors)",
                f.display(),
                g.name,
                g.actors.len()
            ),
            Ok(Document::Merged(m)) => println!(
                "{}: ok (merged graph {}, {} configurations, {} switching boxes)",
                f.display(),
                m.base.name,
                m.configs.len(),
                m.sboxes.len()
            ),
            Err(FormatError::Validation(vs)) => {
                bad += 1;
                for v in vs {
                    println!("{}: {v}", f.display());
                }
            }
            Err(e) => {
                bad += 1;
                println!("{}: {e}", f.display());
            }
        }
    }
    if bad > 0 {
        return Err(invalid(anyhow!(
            "{bad} of {} files are invalid",
            files.len()
        )));
    }
    Ok(())
}

fn compose(inputs: &[PathBuf], threads: u32, out: PathBuf) -> CmdResult {
    let mut graphs = Vec::new();
    for p in inputs {
        match load(p)? {
            Document::Single(g) => graphs.push(g),
            Document::Merged(_) => {
                return Err(invalid(anyhow!(
                    "{} is already a merged graph",
                    p.display()
                )))
            }
        }
    }
    let m = merge(&graphs, threads).map_err(|e: ComposeError| invalid(e))?;
    write_file(&out, &serialize_merged(&m))?;

    let separate: usize = graphs.iter().map(|g| g.actors.len()).sum();
    let merged = m.actor_count();
    let counts: Vec<String> = graphs.iter().map(|g| g.actors.len().to_string()).collect();
    println!(
        "actors: {} = {separate} separate, {merged} merged ({:+.1}%), {} shared, {} switching boxes",
        counts.join(" + "),
        (merged as f64 - separate as f64) / separate as f64 * 100.0,
        m.shared_actors().len(),
        m.sboxes.len()
    );
    println!(
        "configurations: {}",
        m.configs
            .iter()
            .map(|c| format!("{}={}", c.id, c.name))
            .collect::<Vec<_>>()
            .join(", ")
    );
    println!("wrote {}", out.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn run(
    graph: &Path,
    workload: &Path,
    configs: &[String],
    max_cycles: u64,
    threads: u32,
    read_mode: ReadMode,
    clock: Option<ClockModel>,
    format: Format,
    out: Option<&Path>,
) -> CmdResult {
    let doc = load(graph)?;
    let w: Workload = parse_workload(&read(workload)?)
        .with_context(|| format!("{}", workload.display()))
        .map_err(invalid)?;
    let registry = KernelRegistry::with_builtins();
    let options = EngineOptions {
        read_mode,
        max_threads: threads,
    };
    let mut engine = match &doc {
        Document::Single(g) => Engine::new(g, &registry, options),
        Document::Merged(m) => Engine::new_merged(m, &registry, options),
    }
    .map_err(engine_failure)?;
    for c in configs {
        let (tag, cfg) = c
            .split_once('=')
            .ok_or_else(|| invalid(anyhow!("--config takes TAG=CONFIG, got {c:?}")))?;
        let tag: u32 = tag
            .trim()
            .parse()
            .map_err(|_| invalid(anyhow!("bad tag in --config {c:?}")))?;
        let cfg = cfg.trim();
        let r = match cfg.parse::<ConfigId>() {
            Ok(i) => ConfigRef::Id(i),
            Err(_) => ConfigRef::Name(cfg.to_string()),
        };
        let id = engine
            .resolve_config(&r)
            .ok_or_else(|| invalid(anyhow!("configuration {r} does not exist")))?;
        engine
            .write_config(TagId(tag), id)
            .map_err(engine_failure)?;
    }
    let result = engine.run(&w, max_cycles).map_err(engine_failure)?;
    let text = match format {
        Format::Json => json_text(&report::run_json(doc.graph(), read_mode, &result, clock))?,
        Format::Csv => report::run_csv(&result),
        Format::Text => report::run_text(&result, clock),
    };
    emit(out, &text)?;
    if result.metrics.deadlock {
        return Err(runtime(anyhow!(
            "deadlock after {} cycles with tokens still pending",
            result.metrics.total_cycles
        )));
    }
    if result.metrics.timed_out {
        return Err(runtime(anyhow!("stopped after --max-cycles {max_cycles}")));
    }
    Ok(())
}

fn encrypt(std: AesStandard, key: &str, via: Via, blocks: Vec<String>) -> CmdResult {
    let key = hex::decode(key.trim())
        .context("--key is not hex")
        .map_err(invalid)?;
    if key.len() != std.key_bytes() {
        return Err(invalid(anyhow!(
            "{std} takes a {}-byte key, got {} bytes",
            std.key_bytes(),
            key.len()
        )));
    }
    let lines = if blocks.is_empty() {
        io::stdin()
            .lock()
            .lines()
            .collect::<Result<Vec<_>, _>>()
            .context("cannot read stdin")
            .map_err(runtime)?
    } else {
        blocks
    };
    let mut data = Vec::new();
    for l in lines.iter().map(|l| l.trim()).filter(|l| !l.is_empty()) {
        let b = hex::decode(l)
            .with_context(|| format!("block {l:?} is not hex"))
            .map_err(invalid)?;
        if b.len() != 16 {
            return Err(invalid(anyhow!("block {l:?} is {} bytes, not 16", b.len())));
        }
        data.push(b);
    }
    let cipher: Vec<Vec<u8>> = match via {
        Via::Reference => data
            .iter()
            .map(|b| aes_encrypt_reference(b, &key, std).map(|c| c.to_vec()))
            .collect::<Result<_, _>>()
            .map_err(invalid)?,
        Via::Dataflow => {
            let g = build_aes_graph(std, tagflow::aes_graph::DEFAULT_STAGES_PER_ROUND);
            let mut e = Engine::new(
                &g,
                &KernelRegistry::with_builtins(),
                EngineOptions::default(),
            )
            .map_err(engine_failure)?;
            let mut w = Workload::new();
            w.add_blocks(TagId(0), None, &key, data.clone());
            let r = e.run(&w, 1_000_000).map_err(engine_failure)?;
            if r.metrics.deadlock || r.metrics.timed_out {
                return Err(runtime(anyhow!("dataflow run did not complete")));
            }
            r.outputs(TagId(0), "cipher")
        }
    };
    let mut s = String::new();
    for c in cipher {
        s.push_str(&hex::encode(c));
        s.push('\n');
    }
    emit(None, &s)
}

fn energy(
    power: &Path,
    scenarios: &Path,
    battery_mah: f64,
    voltage: f64,
    format: Format,
    out_dir: &Path,
) -> CmdResult {
    let profiles = read_power_csv(open(power)?)
        .with_context(|| format!("{}", power.display()))
        .map_err(invalid)?;
    let scenarios = read_scenarios_csv(open(scenarios)?)
        .with_context(|| format!("{}", scenarios.display()))
        .map_err(invalid)?;
    let battery = BatteryModel::new(battery_mah, voltage).map_err(invalid)?;
    let c: Comparison = compare_designs(&profiles, &scenarios, &battery).map_err(invalid)?;

    let mut csv = Vec::new();
    write_lifetime_csv(&mut csv, &c).map_err(runtime)?;
    let csv = String::from_utf8(csv).map_err(runtime)?;
    write_file(&out_dir.join("lifetime.csv"), &csv)?;
    write_file(
        &out_dir.join("lifetime_plot.json"),
        &lifetime_plot_json(&c).map_err(runtime)?,
    )?;

    let text = match format {
        Format::Json => json_text(&c)?,
        Format::Csv => csv,
        Format::Text => report::energy_text(&c),
    };
    emit(None, &text)
}
