use std::num::NonZeroUsize;
use std::path::PathBuf;
use std::time::Instant;

use evla_core::io::{decode_events, encode_events};
use evla_core::repr::accumulate_count;
use evla_core::sim::random_stream;
use evla_core::{recent_count_window, EventStream, SensorGeometry};
use serde_json::json;

use super::read_file;
use crate::{sha256_hex, CliError, FileDigest, PipelineReport};

/// Single-threaded throughput the ingest and windowing stages should reach.
/// Missing it is reported, not fatal.
pub const SOFT_TARGET_EVENTS_PER_SEC: f64 = 5e6;

#[derive(Debug, clap::Args)]
#[command(group(clap::ArgGroup::new("source").required(true).args(["events", "synthetic"])))]
pub struct Args {
    #[arg(long)]
    pub events: Option<PathBuf>,
    /// Generate this many random events in memory instead of reading a file.
    #[arg(long)]
    pub synthetic: Option<usize>,
    #[arg(long, default_value_t = 2000)]
    pub window_size: usize,
    #[arg(long, default_value_t = 5)]
    pub iterations: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, Default)]
struct Pass {
    ingest: f64,
    windowing: f64,
    accumulation: f64,
}

fn rate(events: u64, secs: f64) -> f64 {
    events as f64 / secs.max(1e-9)
}

/// Query times at every `n`-th event, so consecutive count windows tile the stream.
fn query_times(stream: &EventStream, n: usize) -> Vec<u64> {
    stream.events().iter().skip(n - 1).step_by(n).map(|e| e.t).collect()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    }
}

pub fn machine_id() -> serde_json::Value {
    let read = |p: &str| std::fs::read_to_string(p).ok();
    let cpu = read("/proc/cpuinfo")
        .and_then(|s| s.lines().find(|l| l.starts_with("model name")).and_then(|l| l.split(':').nth(1)).map(|s| s.trim().to_string()));
    json!({
        "hostname": read("/proc/sys/kernel/hostname").map(|s| s.trim().to_string()),
        "cpu": cpu,
        "os": std::env::consts::OS,
        "arch": std::env::consts::ARCH,
        "logical_cpus": std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
    })
}

pub fn run(args: &Args) -> Result<PipelineReport, CliError> {
    let n = NonZeroUsize::new(args.window_size).ok_or_else(|| CliError::Usage("--window-size must be >= 1".into()))?;
    if args.iterations == 0 {
        return Err(CliError::Usage("--iterations must be >= 1".into()));
    }
    let mut report = PipelineReport::new(
        "bench",
        args.seed,
        json!({
            "source": args.events.as_ref().map(|p| p.display().to_string()).unwrap_or_else(|| "synthetic".into()),
            "synthetic": args.synthetic,
            "window_size": args.window_size,
            "iterations": args.iterations,
        }),
    );
    let bytes = match (&args.events, args.synthetic) {
        (Some(path), _) => {
            let b = read_file(path)?;
            report.inputs.push(FileDigest::of_bytes(path, &b));
            b
        }
        (None, Some(count)) => report.time("generate", || encode_events(&random_stream(count, SensorGeometry::default(), args.seed))),
        (None, None) => unreachable!("clap requires a source"),
    };

    let mut passes = Vec::with_capacity(args.iterations);
    let mut digest = String::new();
    for _ in 0..args.iterations {
        let start = Instant::now();
        let stream = decode_events(&bytes)?;
        let ingest = start.elapsed().as_secs_f64();
        let total = stream.len() as u64;
        let times = query_times(&stream, n.get());

        let start = Instant::now();
        let windows: Vec<_> = times.iter().map(|&t| recent_count_window(&stream, t, n)).collect();
        let windowing = start.elapsed().as_secs_f64();
        let covered: u64 = windows.iter().map(|w| w.len() as u64).sum();

        let start = Instant::now();
        let mut counted = 0u64;
        let mut peak = 0u32;
        for w in &windows {
            let map = accumulate_count(w, stream.geometry());
            counted += map.total();
            peak = peak.max(map.values().iter().copied().max().unwrap_or(0));
        }
        let accumulation = start.elapsed().as_secs_f64();

        passes.push(Pass {
            ingest: rate(total, ingest),
            windowing: rate(covered, windowing),
            accumulation: rate(counted, accumulation),
        });
        digest = sha256_hex(format!("{total}:{}:{covered}:{counted}:{peak}", windows.len()).as_bytes());
        report.counters.insert("events".into(), total);
        report.counters.insert("windows".into(), windows.len() as u64);
        report.counters.insert("events_windowed".into(), covered);
        report.counters.insert("events_accumulated".into(), counted);
    }
    report.count("iterations", args.iterations as u64);

    let ingest = median(passes.iter().map(|p| p.ingest).collect());
    let windowing = median(passes.iter().map(|p| p.windowing).collect());
    let accumulation = median(passes.iter().map(|p| p.accumulation).collect());
    report.result(
        "events_per_sec",
        json!({ "ingest_validate": ingest, "recent_count_windowing": windowing, "count_accumulation": accumulation }),
    );
    report.result(
        "soft_target",
        json!({
            "events_per_sec": SOFT_TARGET_EVENTS_PER_SEC,
            "ingest_met": ingest >= SOFT_TARGET_EVENTS_PER_SEC,
            "windowing_met": windowing >= SOFT_TARGET_EVENTS_PER_SEC,
        }),
    );
    report.result("correctness_digest", digest);
    report.result("machine", machine_id());
    report.result("threads", 1);
    Ok(report)
}
