use std::path::{Path, PathBuf};

use evla_core::image::{GrayImage, RgbFrame};
use evla_core::io::{decode_events, encode_pgm, encode_ppm};
use evla_core::repr::{demosaic, render_maps, RenderOptions, Representation};
use evla_core::{EventStream, WindowPolicy};
use rayon::prelude::*;
use serde_json::json;

use super::{ensure_dir, read_file, write_file};
use crate::{CliError, FileDigest, PipelineReport};

#[derive(Debug, clap::Args)]
pub struct Args {
    #[arg(long)]
    pub events: PathBuf,
    /// count:N or duration:MS
    #[arg(long, default_value = "count:2000")]
    pub window: WindowPolicy,
    /// count, sum, timesurface or voxel
    #[arg(long = "repr", default_value = "count")]
    pub repr: Representation,
    /// Comma-separated query times in microseconds.
    #[arg(long, value_delimiter = ',', required = true)]
    pub t_query: Vec<u64>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = evla_core::repr::DEFAULT_BINS)]
    pub bins: usize,
    #[arg(long, default_value_t = evla_core::repr::DEFAULT_TAU_US / 1000.0)]
    pub tau_ms: f64,
    /// Demosaic into RGB (P6) instead of writing the raw map (P5).
    #[arg(long)]
    pub demosaic: bool,
}

impl Args {
    pub fn options(&self) -> RenderOptions {
        RenderOptions { tau_us: self.tau_ms * 1000.0, bins: self.bins }
    }
}

/// What `render` writes for one query time: `(file name, bytes)` pairs.
pub fn render_files(
    stream: &EventStream,
    policy: WindowPolicy,
    repr: Representation,
    options: &RenderOptions,
    t_query: u64,
    rgb: bool,
) -> Result<Vec<(String, Vec<u8>)>, CliError> {
    let window = policy.select(stream, t_query);
    let maps = render_maps(&window, repr, options)?;
    let g = stream.geometry();
    let single = maps.len() == 1;
    maps.iter()
        .enumerate()
        .map(|(b, m)| {
            let stem = if single { format!("{repr}_{t_query}") } else { format!("{repr}_{t_query}_bin{b}") };
            Ok(if rgb {
                let frame = demosaic(m, g)?;
                (format!("{stem}.ppm"), encode_ppm(&RgbFrame::from(&frame).to_rgb8()))
            } else {
                (format!("{stem}.pgm"), encode_pgm(&GrayImage::from_unit(m.width(), m.height(), m.values())))
            })
        })
        .collect()
}

pub fn run(args: &Args) -> Result<PipelineReport, CliError> {
    let queries = args.t_query.clone();
    if queries.is_empty() {
        return Err(CliError::Usage("at least one --t-query is required".into()));
    }
    let options = args.options();
    let mut report = PipelineReport::new(
        "render",
        0,
        json!({
            "window": format!("{:?}", args.window),
            "repr": args.repr.to_string(),
            "t_query": queries,
            "bins": options.bins,
            "tau_us": options.tau_us,
            "demosaic": args.demosaic,
        }),
    );
    let bytes = read_file(&args.events)?;
    report.inputs.push(FileDigest::of_bytes(&args.events, &bytes));
    let stream = report.time("ingest", || decode_events(&bytes))?;
    report.count("events", stream.len() as u64);

    ensure_dir(&args.out)?;
    let rendered: Vec<Vec<(String, Vec<u8>)>> = report.time("render", || {
        queries
            .par_iter()
            .map(|&t| render_files(&stream, args.window, args.repr, &options, t, args.demosaic))
            .collect::<Result<_, _>>()
    })?;
    for &t in &queries {
        let w = args.window.select(&stream, t);
        report.count("events_in_windows", w.len() as u64);
        report.count("shortfalls", w.shortfall() as u64);
    }
    report.time("write", || -> Result<(), CliError> {
        for (name, data) in rendered.iter().flatten() {
            write_file(&args.out.join(name), data)?;
        }
        Ok(())
    })?;
    for (name, data) in rendered.iter().flatten() {
        report.outputs.push(FileDigest::of_bytes(&Path::new(&args.out).join(name), data));
    }
    report.count("windows", queries.len() as u64);
    report.count("files", report.outputs.len() as u64);
    Ok(report)
}
