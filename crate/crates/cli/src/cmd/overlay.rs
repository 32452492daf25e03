use std::path::PathBuf;

use evla_core::fusion::{overlay, PolarityColorMap};
use evla_core::io::{decode_events, decode_pnm, encode_ppm, Pixmap};
use evla_core::WindowPolicy;
use serde_json::json;

use super::{parse_rgb, read_file, write_file};
use crate::{CliError, FileDigest, PipelineReport};

#[derive(Debug, clap::Args)]
pub struct Args {
    #[arg(long)]
    pub events: PathBuf,
    /// P6 pixmap with the stream's geometry.
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long)]
    pub t_query: u64,
    #[arg(long, default_value = "count:2000")]
    pub window: WindowPolicy,
    #[arg(long, default_value = "255,0,0", value_parser = parse_rgb)]
    pub on_color: [u8; 3],
    #[arg(long, default_value = "0,0,255", value_parser = parse_rgb)]
    pub off_color: [u8; 3],
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: &Args) -> Result<PipelineReport, CliError> {
    let colors = PolarityColorMap::new(args.on_color, args.off_color)?;
    let mut report = PipelineReport::new(
        "overlay",
        0,
        json!({
            "window": format!("{:?}", args.window),
            "t_query": args.t_query,
            "on_color": args.on_color,
            "off_color": args.off_color,
        }),
    );
    let ev_bytes = read_file(&args.events)?;
    let img_bytes = read_file(&args.image)?;
    report.inputs.push(FileDigest::of_bytes(&args.events, &ev_bytes));
    report.inputs.push(FileDigest::of_bytes(&args.image, &img_bytes));
    let stream = report.time("ingest", || decode_events(&ev_bytes))?;
    let image = match decode_pnm(&img_bytes)? {
        Pixmap::Rgb(img) => img,
        Pixmap::Gray(_) => return Err(CliError::Usage("overlay needs an RGB (P6) image".into())),
    };
    let window = args.window.select(&stream, args.t_query);
    let painted = report.time("overlay", || overlay(&image, &window, &colors))?;
    let bytes = encode_ppm(&painted);
    write_file(&args.out, &bytes)?;
    report.outputs.push(FileDigest::of_bytes(&args.out, &bytes));
    report.count("events", stream.len() as u64);
    report.count("events_in_window", window.len() as u64);
    Ok(report)
}
