use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use veertrack::cones::analyze_periodic_word;
use veertrack::delaunay::greedy_delaunay;
use veertrack::error::Error;
use veertrack::fixtures;
use veertrack::flow::{
    detect_periodicity, run_flow, thick_fraction, track_at, CheckMode, Trajectory,
};
use veertrack::lab::{
    close_trajectory, contraction_experiment, hilbert_contraction_experiment, perturb,
    with_thread_cap,
};
use veertrack::scalar::Coord;
use veertrack::surface::{
    parse_surface, parse_surface_unchecked, serialize_surface, validate, AnySurface, Surface,
    ValidationReport,
};
use veertrack::traintrack::{complementary_regions, dual_track, vertex_curves, Direction};

#[derive(Parser)]
#[command(
    name = "veertrack",
    version,
    about = "Delaunay triangulations, train tracks and flow experiments on half-translation surfaces"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a surface document and list every violated invariant.
    Validate {
        #[arg(long)]
        input: PathBuf,
    },
    /// Flip to the L-infinity Delaunay triangulation.
    Delaunay {
        #[arg(long)]
        input: PathBuf,
        /// CSV of the flips performed.
        #[arg(long)]
        emit_flips: Option<PathBuf>,
        /// Where to write the resulting surface (stdout by default).
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Describe a dual train track.
    Track {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "vertical")]
        direction: DirectionArg,
        /// Print the vertex curves as CSV rows instead of the summary.
        #[arg(long)]
        vertex_curves: bool,
    },
    /// Run the flow and list its split events.
    Flow {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        time: f64,
        #[arg(long, default_value_t = 100_000)]
        max_events: usize,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Detect a period of the flow and analyse its split word.
    Analyze {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        time: f64,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Measure strong-stable contraction along the flow.
    Contract {
        #[arg(long)]
        input: PathBuf,
        /// Comma-separated flow times.
        #[arg(long, value_delimiter = ',', required = true)]
        times: Vec<f64>,
        #[arg(long, default_value_t = 1e-7)]
        delta: f64,
        #[arg(long, default_value_t = 8)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Perturb, flow, and close an approximate return into a periodic orbit.
    Close {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        time: f64,
        #[arg(long, default_value_t = 0.0)]
        delta: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-13)]
        tol: f64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run the whole battery on one surface and write its files to a directory.
    Report {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        time: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        checkpoints: usize,
        #[arg(long, default_value_t = 0.3)]
        epsilon: f64,
    },
    /// Print a built-in fixture as a surface document.
    Fixture {
        #[arg(value_enum)]
        name: FixtureName,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum DirectionArg {
    Vertical,
    Horizontal,
}

impl From<DirectionArg> for Direction {
    fn from(d: DirectionArg) -> Self {
        match d {
            DirectionArg::Vertical => Direction::Vertical,
            DirectionArg::Horizontal => Direction::Horizontal,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FixtureName {
    T2,
    Gold,
    GoldAxis,
    Pillow,
    GenusTwo,
    NearCollision,
    CuspTorus,
}

fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load(path: &Path) -> anyhow::Result<AnySurface> {
    parse_surface(&read(path)?).with_context(|| format!("loading {}", path.display()))
}

fn emit(text: &str, output: Option<&Path>) -> anyhow::Result<()> {
    match output {
        Some(p) => {
            fs::write(p, format!("{text}\n")).with_context(|| format!("writing {}", p.display()))
        }
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("json values serialize")
}

fn number_text(v: Value) -> String {
    match v {
        Value::String(s) => s,
        other => other.to_string(),
    }
}

fn report_of(doc: &str) -> anyhow::Result<ValidationReport> {
    let probe: Value = serde_json::from_str(doc).map_err(|e| Error::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    Ok(match probe.get("mode").and_then(Value::as_str) {
        Some("exact") => validate(&parse_surface_unchecked::<veertrack::scalar::Rational>(
            doc,
        )?),
        Some("float") => validate(&parse_surface_unchecked::<f64>(doc)?),
        _ => bail!(Error::Semantic(
            "mode must be \"exact\" or \"float\"".into()
        )),
    })
}

fn cmd_validate(input: &Path) -> anyhow::Result<bool> {
    let report = report_of(&read(input)?)?;
    for v in &report.violations {
        eprintln!("{} at {}: {}", v.rule, v.location, v.detail);
    }
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(report.passed)
}

fn delaunay_of<F: Coord>(s: &Surface<F>, flips: Option<&Path>) -> anyhow::Result<String> {
    let (out, records) = greedy_delaunay(s)?;
    if let Some(path) = flips {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["step", "edge", "old_w", "old_h", "new_w", "new_h"])?;
        for (i, r) in records.iter().enumerate() {
            w.write_record([
                i.to_string(),
                s.label(r.old_edge).to_string(),
                number_text(r.old_period.w.to_json()),
                number_text(r.old_period.h.to_json()),
                number_text(r.new_period.w.to_json()),
                number_text(r.new_period.h.to_json()),
            ])?;
        }
        w.flush()?;
    }
    Ok(serialize_surface(&out))
}

fn track_of<F: Coord>(
    s: &Surface<F>,
    direction: Direction,
    curves: bool,
) -> anyhow::Result<String> {
    let (track, measures) = dual_track(s, direction)?;
    let labels: Vec<&str> = (0..track.branch_count()).map(|e| track.label(e)).collect();
    if curves {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&labels)?;
        for c in vertex_curves(&track)? {
            w.write_record(c.iter().map(u64::to_string))?;
        }
        return Ok(String::from_utf8(w.into_inner()?)?.trim_end().to_string());
    }
    let branches: Vec<Value> = (0..track.branch_count())
        .map(|e| {
            json!({
                "label": labels[e],
                "role": format!("{:?}", track.role(e)).to_lowercase(),
                "transverse": measures.transverse[e].to_json(),
                "tangential": measures.tangential[e].to_json(),
            })
        })
        .collect();
    let regions: Value = complementary_regions(&track)
        .counts()
        .iter()
        .map(|(sides, n)| (sides.to_string(), json!(n)))
        .collect::<serde_json::Map<_, _>>()
        .into();
    Ok(pretty(&json!({
        "direction": direction.to_string(),
        "branches": branches,
        "large": track.large_branches().iter().map(|&e| labels[e]).collect::<Vec<_>>(),
        "regions": regions,
    })))
}

fn write_events<F: Coord>(traj: &Trajectory<F>, path: &Path) -> anyhow::Result<()> {
    let s = &traj.start;
    let pair = |p: [usize; 2]| format!("{};{}", s.label(p[0]), s.label(p[1]));
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "index",
        "threshold",
        "t",
        "edge",
        "direction",
        "losers",
        "winners",
    ])?;
    for (i, ev) in traj.events.iter().enumerate() {
        w.write_record([
            i.to_string(),
            number_text(ev.threshold.to_json()),
            traj.event_time(i).to_string(),
            s.label(ev.edge).to_string(),
            ev.side.to_string(),
            pair(ev.losers),
            pair(ev.winners),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn flow_of<F: Coord>(
    s: &Surface<F>,
    time: f64,
    max_events: usize,
    csv_out: Option<&Path>,
) -> anyhow::Result<String> {
    let traj = run_flow(s, time, max_events, CheckMode::EveryEvent)?;
    if let Some(path) = csv_out {
        write_events(&traj, path)?;
    }
    Ok(pretty(&json!({
        "events": traj.events.len(),
        "word": traj.word(),
        "t_end": traj.t_end,
    })))
}

fn analyze_of<F: Coord>(s: &Surface<F>, time: f64) -> anyhow::Result<Value> {
    let traj = run_flow(s, time, veertrack::lab::MAX_EVENTS, CheckMode::EveryEvent)?;
    let Some(p) = detect_periodicity(&traj)? else {
        bail!(Error::NoConvergence(format!(
            "no period detected within time {time}"
        )));
    };
    let track = track_at(&traj, p.m)?;
    let records: Vec<_> = p.word.iter().map(|e| e.record()).collect();
    let report = analyze_periodic_word(&track, &records, &p.relabeling)?;
    Ok(json!({
        "m": p.m,
        "m2": p.m2,
        "word": p.word.iter().map(|e| e.side.to_string()).collect::<String>(),
        "period": p.lambda.ln(),
        "report": serde_json::to_value(&report)?,
    }))
}

fn close_of(s: &Surface<f64>, time: f64, delta: f64, seed: u64, tol: f64) -> anyhow::Result<Value> {
    let start = perturb(s, delta, seed)?;
    let (found, res) = close_trajectory(&start, time, tol)?;
    let point: Value = serde_json::from_str(&serialize_surface(&res.periodic_point))?;
    let mut doc = serde_json::to_value(&res)?;
    doc["m"] = json!(found.m);
    doc["m2"] = json!(found.m2);
    doc["periodic_point"] = point;
    Ok(doc)
}

fn report_dir<F: Coord>(
    s: &Surface<F>,
    time: f64,
    out: &Path,
    checkpoints: usize,
    epsilon: f64,
) -> anyhow::Result<Value> {
    fs::create_dir_all(out)?;
    let validation = validate(s);
    fs::write(
        out.join("validation.json"),
        serde_json::to_string_pretty(&validation)?,
    )?;
    let traj = run_flow(s, time, veertrack::lab::MAX_EVENTS, CheckMode::EveryEvent)?;
    write_events(&traj, &out.join("events.csv"))?;
    let thick = thick_fraction(&traj, epsilon)?;

    let steps = checkpoints.max(1);
    let marks: Vec<f64> = (0..=steps)
        .map(|k| traj.t_end * k as f64 / steps as f64)
        .collect();
    let decay = hilbert_contraction_experiment(&traj, &marks)?;
    let mut w = csv::Writer::from_path(out.join("hilbert.csv"))?;
    w.write_record(["t", "diameter"])?;
    for p in &decay.points {
        w.write_record([p.t.to_string(), p.diameter.to_string()])?;
    }
    w.flush()?;

    let periodic = match detect_periodicity(&traj)? {
        Some(_) => Some(analyze_of(s, time)?),
        None => None,
    };
    let times: Vec<f64> = marks[1..].to_vec();
    let contraction = with_thread_cap(|| contraction_experiment(&s.to_float(), &times, 1e-7, 8, 0));
    let contraction_summary = match contraction {
        Ok(fit) => {
            write_contraction(&fit, &out.join("contraction.csv"))?;
            json!({ "alpha": fit.alpha, "c": fit.c, "r_squared": fit.r_squared, "dropped": fit.dropped.len() })
        }
        Err(e) => json!({ "error": e.to_string() }),
    };
    let summary = json!({
        "passed": validation.passed,
        "events": traj.events.len(),
        "word": traj.word(),
        "thick": serde_json::to_value(&thick)?,
        "hilbert_slope": decay.slope,
        "periodic": periodic,
        "contraction": contraction_summary,
    });
    fs::write(out.join("summary.json"), pretty(&summary))?;
    Ok(summary)
}

fn write_contraction(fit: &veertrack::lab::ContractionFit, path: &Path) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["T", "trial", "d0", "dT", "ratio"])?;
    for s in &fit.samples {
        w.write_record([
            s.t.to_string(),
            s.trial.to_string(),
            s.d0.to_string(),
            s.dt.to_string(),
            s.ratio.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

macro_rules! dispatch {
    ($surface:expr, $s:ident => $body:expr) => {
        match $surface {
            AnySurface::Exact($s) => $body,
            AnySurface::Float($s) => $body,
        }
    };
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Validate { input } => {
            if !cmd_validate(&input)? {
                return Ok(ExitCode::from(1));
            }
        }
        Command::Delaunay {
            input,
            emit_flips,
            output,
        } => {
            let text = dispatch!(load(&input)?, s => delaunay_of(&s, emit_flips.as_deref())?);
            emit(&text, output.as_deref())?;
        }
        Command::Track {
            input,
            direction,
            vertex_curves,
        } => {
            let text =
                dispatch!(load(&input)?, s => track_of(&s, direction.into(), vertex_curves)?);
            println!("{text}");
        }
        Command::Flow {
            input,
            time,
            max_events,
            csv,
        } => {
            let text =
                dispatch!(load(&input)?, s => flow_of(&s, time, max_events, csv.as_deref())?);
            println!("{text}");
        }
        Command::Analyze {
            input,
            time,
            report,
        } => {
            let doc = dispatch!(load(&input)?, s => analyze_of(&s, time)?);
            emit(&pretty(&doc), report.as_deref())?;
        }
        Command::Contract {
            input,
            times,
            delta,
            trials,
            seed,
            csv,
        } => {
            let s = load(&input)?.to_float();
            let fit = with_thread_cap(|| contraction_experiment(&s, &times, delta, trials, seed))?;
            if let Some(path) = csv {
                write_contraction(&fit, &path)?;
            }
            println!(
                "{}",
                pretty(&json!({
                    "alpha": fit.alpha,
                    "c": fit.c,
                    "residual": fit.residual,
                    "r_squared": fit.r_squared,
                    "samples": fit.samples.len(),
                    "dropped": fit.dropped,
                }))
            );
        }
        Command::Close {
            input,
            time,
            delta,
            seed,
            tol,
            output,
        } => {
            let doc = close_of(&load(&input)?.to_float(), time, delta, seed, tol)?;
            let converged = doc["converged"].as_bool().unwrap_or(false);
            emit(&pretty(&doc), output.as_deref())?;
            if !converged {
                return Ok(ExitCode::from(1));
            }
        }
        Command::Report {
            input,
            time,
            out,
            checkpoints,
            epsilon,
        } => {
            let summary =
                dispatch!(load(&input)?, s => report_dir(&s, time, &out, checkpoints, epsilon)?);
            println!("{}", pretty(&summary));
        }
        Command::Fixture { name } => {
            let text = match name {
                FixtureName::T2 => serialize_surface(&fixtures::t2()),
                FixtureName::Gold => serialize_surface(&fixtures::gold()),
                FixtureName::GoldAxis => serialize_surface(&fixtures::gold_axis()),
                FixtureName::Pillow => serialize_surface(&fixtures::pillow()),
                FixtureName::GenusTwo => serialize_surface(&fixtures::genus_two()),
                FixtureName::NearCollision => serialize_surface(&fixtures::near_collision()),
                FixtureName::CuspTorus => serialize_surface(&fixtures::cusp_torus()),
            };
            println!("{text}");
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            let degenerate = err
                .chain()
                .any(|c| c.downcast_ref::<Error>().is_some_and(Error::is_degenerate));
            ExitCode::from(if degenerate { 2 } else { 1 })
        }
    }
}
