//! Closed-form efficiency figures for an adapter configuration.
//!
//! "Additional" means beyond the image branch: the patch embedding is owned
//! by the image branch and only reused for events, so it adds no
//! parameters, but embedding the event frame does add compute.

use super::adapter::{AdapterConfig, BlockKind, ParamRole};
use super::FusionError;

/// Parameters introduced by the event branch, projections and fusion MLPs.
pub fn count_parameters(config: &AdapterConfig) -> Result<u64, FusionError> {
    config.validate()?;
    Ok(config
        .layout()
        .iter()
        .filter(|s| s.role == ParamRole::Adapter)
        .map(|s| s.numel() as u64)
        .sum())
}

/// Resolution after zero-padding each side up to a patch multiple.
pub fn padded_resolution(config: &AdapterConfig, width: usize, height: usize) -> (usize, usize) {
    let p = config.patch_size.max(1);
    (width.div_ceil(p) * p, height.div_ceil(p) * p)
}

fn block_macs(config: &AdapterConfig, tokens: u64, dim: u64) -> u64 {
    match config.block_kind {
        BlockKind::Linear => tokens * dim * dim,
        BlockKind::Transformer => {
            let hidden = dim * config.mlp_ratio as u64;
            let qkv = tokens * dim * 3 * dim;
            // scores and weighted sum of values, summed over heads
            let attention = 2 * tokens * tokens * dim;
            let proj = tokens * dim * dim;
            let mlp = 2 * tokens * dim * hidden;
            qkv + attention + proj + mlp
        }
    }
}

/// Additional multiply-accumulates for the event path and fusion stages.
/// Normalization, softmax and activations are not counted.
pub fn additional_macs(config: &AdapterConfig, width: usize, height: usize) -> Result<u64, FusionError> {
    config.validate()?;
    if config.event_blocks == 0 {
        return Ok(0);
    }
    let (pw, ph) = padded_resolution(config, width, height);
    let p = config.patch_size;
    let t = ((pw / p) * (ph / p)) as u64;
    let d = config.image_dim as u64;
    let de = config.event_dim as u64;
    let hf = config.fusion_hidden as u64;
    let embed = t * config.patch_dim() as u64 * d;
    let in_proj = t * d * de;
    let blocks = config.event_blocks as u64 * block_macs(config, t, de);
    let stage = t * de * d + t * 2 * d * hf + t * hf * d;
    Ok(embed + in_proj + blocks + config.event_blocks as u64 * stage)
}

/// Additional FLOPs (two per multiply-accumulate) at the given input size.
pub fn flops_estimate(config: &AdapterConfig, width: usize, height: usize) -> Result<f64, FusionError> {
    Ok(2.0 * additional_macs(config, width, height)? as f64)
}

/// Human-readable tensor shapes through the fused forward pass.
pub fn shape_trace(config: &AdapterConfig, width: usize, height: usize) -> Result<Vec<String>, FusionError> {
    config.validate()?;
    let (pw, ph) = padded_resolution(config, width, height);
    let t = (pw / config.patch_size) * (ph / config.patch_size);
    let d = config.image_dim;
    let de = config.event_dim;
    let mut lines = vec![
        format!("input {height}x{width}x3 padded to {ph}x{pw}x3"),
        format!("patch_embed (shared) {}x{} -> {t}x{d}", t, config.patch_dim()),
    ];
    if config.event_blocks > 0 {
        lines.push(format!("event.in_proj {t}x{d} -> {t}x{de}"));
    }
    let (groups, tail) = config.groups();
    for (l, g) in groups.iter().enumerate() {
        lines.push(format!("stage {l}: event.blocks.{l} {t}x{de} -> {t}x{de}"));
        lines.push(format!("stage {l}: fusion proj {t}x{de} -> {t}x{d}"));
        lines.push(format!(
            "stage {l}: concat {t}x{} -> fc1 {t}x{} -> fc2 {t}x{d}",
            2 * d,
            config.fusion_hidden
        ));
        lines.push(format!(
            "stage {l}: image blocks {}..={} {t}x{d} -> {t}x{d}",
            g.start + 1,
            g.end
        ));
    }
    if !tail.is_empty() {
        lines.push(format!("tail: image blocks {}..={} {t}x{d}", tail.start + 1, tail.end));
    }
    lines.push(format!("output {t}x{d}"));
    Ok(lines)
}
