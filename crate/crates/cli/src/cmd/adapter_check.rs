use std::path::PathBuf;

use evla_core::fusion::{
    additional_macs, count_parameters, flops_estimate, padded_resolution, shape_trace, toy_gradient_check, AdapterConfig,
    GradCheckOptions, CHECK_WEIGHT_STD,
};
use serde_json::json;

use super::read_file;
use crate::{CliError, FileDigest, PipelineReport};

/// Reference figures for the full-size adapter.
pub const REFERENCE_PARAMS: f64 = 13.31e6;
pub const REFERENCE_FLOPS: f64 = 20.4e9;
pub const PARAM_BAND: f64 = 0.20;
pub const FLOPS_BAND: f64 = 0.30;
pub const FULL_GRAD_TOL: f64 = 1e-3;
pub const LINEAR_GRAD_TOL: f64 = 1e-6;

#[derive(Debug, clap::Args)]
pub struct Args {
    /// JSON adapter config; unknown keys are rejected.
    #[arg(long, conflicts_with = "paper_defaults")]
    pub config: Option<PathBuf>,
    /// Use the full-size reference configuration (the default without --config).
    #[arg(long)]
    pub paper_defaults: bool,
    /// Also run finite-difference gradient checks on the toy configs.
    #[arg(long)]
    pub toy: bool,
    #[arg(long, default_value_t = 346)]
    pub width: usize,
    #[arg(long, default_value_t = 260)]
    pub height: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

pub fn run(args: &Args) -> Result<PipelineReport, CliError> {
    let mut inputs = Vec::new();
    let config = match &args.config {
        Some(path) => {
            let bytes = read_file(path)?;
            inputs.push(FileDigest::of_bytes(path, &bytes));
            serde_json::from_slice::<AdapterConfig>(&bytes)
                .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
        }
        None => AdapterConfig::reference(),
    };
    config.validate()?;
    let is_reference = args.config.is_none();

    let mut report = PipelineReport::new(
        "adapter-check",
        args.seed,
        json!({ "config": config, "width": args.width, "height": args.height, "toy": args.toy }),
    );
    report.inputs = inputs;

    let trace = shape_trace(&config, args.width, args.height)?;
    let params = count_parameters(&config)?;
    let macs = additional_macs(&config, args.width, args.height)?;
    let flops = flops_estimate(&config, args.width, args.height)?;
    let (pw, ph) = padded_resolution(&config, args.width, args.height);
    report.result("shape_trace", trace);
    report.result("additional_parameters", params);
    report.result("additional_macs", macs);
    report.result("flops", flops);
    report.result("padded_resolution", json!([pw, ph]));
    report.result(
        "wiring",
        if config.shared_fusion {
            "one fusion MLP shared by all stages, per-stage event projections"
        } else {
            "per-stage fusion MLPs and event projections"
        },
    );

    if is_reference {
        let rel = params as f64 / REFERENCE_PARAMS - 1.0;
        report.check("additional_parameters_vs_13.31M", params as f64, "within ±20%", rel.abs() <= PARAM_BAND);
        let rel = flops / REFERENCE_FLOPS - 1.0;
        report.check("flops_vs_20.4G", flops, "within ±30%", rel.abs() <= FLOPS_BAND);
    }

    if args.toy {
        let opts = GradCheckOptions::default();
        let full = report.time("gradcheck_full", || toy_gradient_check(&AdapterConfig::gradcheck_toy(), args.seed, &opts))?;
        let linear =
            report.time("gradcheck_linear", || toy_gradient_check(&AdapterConfig::gradcheck_toy_linear(), args.seed, &opts))?;
        report.check("gradcheck_full_max_rel_error", full.max_rel_error, "<= 1e-3", full.max_rel_error <= FULL_GRAD_TOL);
        report.check("gradcheck_linear_max_rel_error", linear.max_rel_error, "<= 1e-6", linear.max_rel_error <= LINEAR_GRAD_TOL);
        report.result(
            "gradcheck",
            json!({
                "step": opts.step,
                "denominator_floor": opts.denominator_floor,
                "weight_std": CHECK_WEIGHT_STD,
                "full": { "parameters": full.checked, "max_rel_error": full.max_rel_error, "worst_tensor": full.worst_tensor },
                "linear": { "parameters": linear.checked, "max_rel_error": linear.max_rel_error, "worst_tensor": linear.worst_tensor },
            }),
        );
        report.count("gradient_entries_checked", (full.checked + linear.checked) as u64);
    }
    Ok(report)
}
