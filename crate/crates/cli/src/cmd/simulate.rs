use std::path::{Path, PathBuf};

use evla_core::image::RgbImage;
use evla_core::io::{encode_events, encode_ppm, read_events_file, read_manifest, write_manifest, EpisodeManifest, FrameRecord};
use evla_core::sim::{apply_exposure_blur, apply_low_light, synthetic_scene, DegradeConfig, EventModel, ObjectShape, SceneConfig};
use evla_core::{BayerPattern, SensorGeometry};
use rayon::prelude::*;
use serde_json::{json, Map};

use super::{ensure_dir, parse_pair, write_file};
use crate::{CliError, FileDigest, PipelineReport};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Output directory; created if missing.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 346)]
    pub width: u16,
    #[arg(long, default_value_t = 260)]
    pub height: u16,
    #[arg(long, default_value = "RGGB")]
    pub bayer: BayerPattern,
    #[arg(long, default_value_t = 0.2)]
    pub background: f64,
    #[arg(long, default_value_t = 0.8)]
    pub object_intensity: f64,
    /// square or disk
    #[arg(long, default_value = "square", value_parser = parse_shape)]
    pub shape: ObjectShape,
    /// Side or diameter in pixels.
    #[arg(long, default_value_t = 40.0)]
    pub size: f64,
    /// Object center at t = 0, as X,Y.
    #[arg(long, default_value = "60,130", value_parser = parse_pair)]
    pub start: [f64; 2],
    /// Pixels per second, as VX or VX,VY.
    #[arg(long, default_value = "120,0", value_parser = parse_pair, allow_hyphen_values = true)]
    pub velocity: [f64; 2],
    #[arg(long, default_value_t = 1500.0)]
    pub duration_ms: f64,
    #[arg(long, default_value_t = 30.0)]
    pub fps: f64,
    /// Log-intensity contrast threshold.
    #[arg(long, default_value_t = evla_core::sim::DEFAULT_CONTRAST)]
    pub contrast: f64,
    #[arg(long, default_value_t = evla_core::sim::DEFAULT_EPSILON)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 10.0)]
    pub exposure_ms: f64,
    #[arg(long, default_value_t = 1.0)]
    pub light_scale: f64,
    #[arg(long, default_value_t = 0)]
    pub black_level: u8,
    #[arg(long, default_value_t = 0.0)]
    pub noise_std: f64,
}

fn parse_shape(s: &str) -> Result<ObjectShape, String> {
    match s {
        "square" => Ok(ObjectShape::Square),
        "disk" => Ok(ObjectShape::Disk),
        _ => Err(format!("unknown shape `{s}` (square or disk)")),
    }
}

impl Args {
    pub fn scene(&self) -> Result<SceneConfig, CliError> {
        if !(self.duration_ms.is_finite() && self.duration_ms >= 0.0) {
            return Err(CliError::Usage(format!("duration must be >= 0 ms, got {}", self.duration_ms)));
        }
        let geometry = SensorGeometry::with_pattern(self.width, self.height, self.bayer)
            .map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(SceneConfig {
            geometry,
            background: self.background,
            object_intensity: self.object_intensity,
            shape: self.shape,
            size: self.size,
            start: self.start,
            velocity: self.velocity,
            duration_us: (self.duration_ms * 1000.0).round() as u64,
            fps: self.fps,
        })
    }

    pub fn degrade(&self) -> DegradeConfig {
        DegradeConfig {
            exposure_ms: self.exposure_ms,
            light_scale: self.light_scale,
            black_level: self.black_level,
            noise_std: self.noise_std,
            seed: self.seed,
        }
    }
}

fn frame_name(k: usize) -> String {
    format!("{k:05}.ppm")
}

/// Degraded frame `k` draws its noise from `seed + k`, so results do not
/// depend on how frames are spread over threads.
pub fn run(args: &Args) -> Result<PipelineReport, CliError> {
    let scene = args.scene()?;
    let degrade = args.degrade();
    degrade.validate()?;
    let model = EventModel { contrast: args.contrast, epsilon: args.epsilon };
    let mut report = PipelineReport::new(
        "simulate",
        args.seed,
        json!({ "scene": scene, "degrade": degrade, "event_model": model }),
    );

    let seq = report.time("render_scene", || synthetic_scene(&scene))?;
    let stream = report.time("generate_events", || model.generate(&seq))?;

    let out = &args.out;
    ensure_dir(&out.join("sharp"))?;
    ensure_dir(&out.join("degraded"))?;

    let t0 = seq.first_time();
    let exposure_us = degrade.exposure_ms * 1000.0;
    let frames = seq.frames();
    let degraded: Vec<Option<RgbImage>> = report.time("degrade", || {
        frames
            .par_iter()
            .enumerate()
            .map(|(k, (t, _))| {
                if (*t as f64) - exposure_us < t0 as f64 {
                    return Ok(None);
                }
                let blurred = apply_exposure_blur(&seq, *t, degrade.exposure_ms)?;
                let cfg = DegradeConfig { seed: degrade.seed.wrapping_add(k as u64), ..degrade.clone() };
                apply_low_light(&blurred, &cfg).map(Some)
            })
            .collect::<Result<_, _>>()
    })?;

    let events_path = out.join("events.evla");
    let written: Vec<(PathBuf, Vec<u8>)> = report.time("encode", || {
        let mut files = vec![(events_path.clone(), encode_events(&stream))];
        for (k, (_, f)) in frames.iter().enumerate() {
            files.push((out.join("sharp").join(frame_name(k)), encode_ppm(&f.to_rgb8())));
        }
        for (k, img) in degraded.iter().enumerate() {
            if let Some(img) = img {
                files.push((out.join("degraded").join(frame_name(k)), encode_ppm(img)));
            }
        }
        files
    });
    report.time("write", || written.par_iter().try_for_each(|(p, b)| write_file(p, b)))?;

    let mut manifest = EpisodeManifest::new(format!("sim-{}", args.seed), scene.geometry, "events.evla");
    for (k, img) in degraded.iter().enumerate() {
        if img.is_some() {
            let mut extra = Map::new();
            extra.insert("sharp_image_path".into(), format!("sharp/{}", frame_name(k)).into());
            manifest.frames.push(FrameRecord {
                t_exposure_end_us: frames[k].0,
                image_path: format!("degraded/{}", frame_name(k)),
                exposure_ms: degrade.exposure_ms,
                light_scale: degrade.light_scale,
                extra,
            });
        }
    }
    manifest.extra.insert("contrast_threshold".into(), model.contrast.into());
    manifest.extra.insert("seed".into(), args.seed.into());
    let manifest_path = out.join("manifest.jsonl");
    write_manifest(&manifest_path, std::slice::from_ref(&manifest))?;

    // reload everything through the validating readers
    report.time("self_check", || verify(&manifest_path, &manifest, stream.len()))?;

    report.count("frames", frames.len() as u64);
    report.count("degraded_frames", manifest.frames.len() as u64);
    report.count("events", stream.len() as u64);
    for (p, b) in &written {
        report.outputs.push(FileDigest::of_bytes(p, b));
    }
    report.outputs.push(FileDigest::of_file(&manifest_path)?);
    let sharp_mean = mean(frames.iter().map(|(_, f)| f.to_rgb8().mean_luma()));
    let degraded_mean = mean(degraded.iter().flatten().map(RgbImage::mean_luma));
    report.result("sharp_mean_gray", sharp_mean);
    report.result("degraded_mean_gray", degraded_mean);
    Ok(report)
}

fn mean(it: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = it.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

fn verify(manifest_path: &Path, manifest: &EpisodeManifest, events: usize) -> Result<(), CliError> {
    let loaded = read_manifest(manifest_path)?;
    if loaded.len() != 1 || loaded[0] != *manifest {
        return Err(CliError::Io("manifest did not survive a reload".into()));
    }
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let back = read_events_file(base.join(&manifest.events_path))?;
    if back.len() != events {
        return Err(CliError::Io(format!("event file holds {} events, expected {events}", back.len())));
    }
    Ok(())
}
