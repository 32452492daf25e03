//! Hierarchical event adapter with a stand-in ViT-style image branch.
//!
//! Dataflow, with `P` the patch embedding shared by both branches:
//!
//! ```text
//! F0 = P(image)             E0 = in_proj(P(events))
//! for stage l:
//!     E_{l+1} = G_{l+1}(E_l)
//!     Z       = fc2(act(fc1([F_l | proj_l(E_{l+1})])))
//!     F_{l+1} = image blocks of group l+1 applied to Z
//! ```
//!
//! Group `l` spans the image blocks after fusion layer `l-1` up to and
//! including fusion layer `l` (1-based layer numbers). Image blocks after
//! the last fusion layer run unfused at the end.

use std::collections::HashMap;
use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::nn::{BlockCache, BlockRef, LayerNormRef, LinearRef, Mat, TransformerRef};
pub use super::nn::Activation as FusionActivation;
use super::FusionError;
use crate::image::{RgbFrame, RgbImage};
use crate::repr::EventFrame;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlockKind {
    Transformer,
    /// A single dense `dim -> dim` layer; makes the whole network linear
    /// when paired with an identity fusion activation.
    Linear,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdapterConfig {
    pub patch_size: usize,
    pub image_dim: usize,
    pub event_dim: usize,
    pub event_blocks: usize,
    /// 1-based image-branch layer numbers after which each stage ends.
    pub fusion_layers: Vec<usize>,
    pub fusion_hidden: usize,
    pub image_branch_blocks: usize,
    pub image_heads: usize,
    pub event_heads: usize,
    pub mlp_ratio: usize,
    pub block_kind: BlockKind,
    pub fusion_activation: FusionActivation,
    /// One fusion MLP reused by every stage (per-stage event projections
    /// stay separate).
    pub shared_fusion: bool,
}

impl Default for AdapterConfig {
    fn default() -> Self {
        Self::reference()
    }
}

impl AdapterConfig {
    /// SigLIP-sized image branch with the 384-wide, four-block adapter.
    pub fn reference() -> Self {
        Self {
            patch_size: 16,
            image_dim: 768,
            event_dim: 384,
            event_blocks: 4,
            fusion_layers: vec![3, 6, 9, 12],
            fusion_hidden: 1536,
            image_branch_blocks: 12,
            image_heads: 12,
            event_heads: 6,
            mlp_ratio: 4,
            block_kind: BlockKind::Transformer,
            fusion_activation: FusionActivation::Gelu,
            shared_fusion: true,
        }
    }

    /// Small enough for a forward pass on a 64x64 frame in microseconds.
    pub fn toy() -> Self {
        Self {
            patch_size: 16,
            image_dim: 16,
            event_dim: 8,
            event_blocks: 4,
            fusion_layers: vec![1, 2, 3, 4],
            fusion_hidden: 32,
            image_branch_blocks: 4,
            image_heads: 2,
            event_heads: 2,
            mlp_ratio: 2,
            block_kind: BlockKind::Transformer,
            fusion_activation: FusionActivation::Gelu,
            shared_fusion: false,
        }
    }

    /// A few thousand parameters; sized for central finite differences on
    /// an 8x8 probe.
    pub fn gradcheck_toy() -> Self {
        Self {
            patch_size: 4,
            image_dim: 8,
            event_dim: 4,
            event_blocks: 2,
            fusion_layers: vec![1, 2],
            fusion_hidden: 16,
            image_branch_blocks: 2,
            image_heads: 2,
            event_heads: 2,
            mlp_ratio: 2,
            block_kind: BlockKind::Transformer,
            fusion_activation: FusionActivation::Gelu,
            shared_fusion: false,
        }
    }

    /// [`AdapterConfig::gradcheck_toy`] with every block and the fusion
    /// MLP made linear.
    pub fn gradcheck_toy_linear() -> Self {
        Self {
            block_kind: BlockKind::Linear,
            fusion_activation: FusionActivation::Identity,
            ..Self::gradcheck_toy()
        }
    }

    pub fn stages(&self) -> usize {
        self.event_blocks
    }

    pub fn patch_dim(&self) -> usize {
        self.patch_size * self.patch_size * 3
    }

    pub fn validate(&self) -> Result<(), FusionError> {
        let bad = |m: String| Err(FusionError::InvalidConfig(m));
        if self.patch_size == 0 || self.image_dim == 0 || self.fusion_hidden == 0 || self.mlp_ratio == 0 {
            return bad("patch_size, image_dim, fusion_hidden and mlp_ratio must be positive".into());
        }
        if self.event_blocks > 0 && self.event_dim == 0 {
            return bad("event_dim must be positive".into());
        }
        if self.fusion_layers.len() != self.event_blocks {
            return bad(format!(
                "{} fusion layers for {} event blocks",
                self.fusion_layers.len(),
                self.event_blocks
            ));
        }
        if self.fusion_layers.windows(2).any(|w| w[0] >= w[1]) {
            return bad(format!("fusion layers {:?} are not strictly increasing", self.fusion_layers));
        }
        if let Some(&l) = self.fusion_layers.iter().find(|&&l| l == 0 || l > self.image_branch_blocks) {
            return bad(format!(
                "fusion layer {l} outside image branch layers 1..={}",
                self.image_branch_blocks
            ));
        }
        if self.event_blocks > 0 && !self.image_branch_blocks.is_multiple_of(self.event_blocks) {
            return bad(format!(
                "{} image blocks cannot be grouped evenly over {} stages",
                self.image_branch_blocks, self.event_blocks
            ));
        }
        if self.block_kind == BlockKind::Transformer {
            if self.image_heads == 0 || !self.image_dim.is_multiple_of(self.image_heads) {
                return bad(format!("image_dim {} not divisible by {} heads", self.image_dim, self.image_heads));
            }
            if self.event_blocks > 0 && (self.event_heads == 0 || !self.event_dim.is_multiple_of(self.event_heads)) {
                return bad(format!("event_dim {} not divisible by {} heads", self.event_dim, self.event_heads));
            }
        }
        Ok(())
    }

    /// Image-block index ranges per stage, then the unfused tail.
    pub(crate) fn groups(&self) -> (Vec<Range<usize>>, Range<usize>) {
        let mut start = 0;
        let mut groups = Vec::with_capacity(self.fusion_layers.len());
        for &end in &self.fusion_layers {
            groups.push(start..end);
            start = end;
        }
        (groups, start..self.image_branch_blocks)
    }

    fn fusion_prefix(&self, stage: usize) -> String {
        if self.shared_fusion {
            "fusion.shared".to_string()
        } else {
            format!("fusion.{stage}")
        }
    }

    /// Every tensor the configuration owns, in storage order.
    pub fn layout(&self) -> Vec<TensorSpec> {
        let mut specs = Vec::new();
        let d = self.image_dim;
        let de = self.event_dim;
        push_linear(&mut specs, "patch_embed", self.patch_dim(), d, ParamRole::SharedEmbedding);
        for i in 0..self.image_branch_blocks {
            push_block(&mut specs, &format!("image.blocks.{i}"), d, self, ParamRole::ImageBranch);
        }
        if self.event_blocks > 0 {
            push_linear(&mut specs, "event.in_proj", d, de, ParamRole::Adapter);
        }
        for l in 0..self.event_blocks {
            push_block(&mut specs, &format!("event.blocks.{l}"), de, self, ParamRole::Adapter);
        }
        for l in 0..self.event_blocks {
            push_linear(&mut specs, &format!("fusion.{l}.proj"), de, d, ParamRole::Adapter);
            if !self.shared_fusion || l == 0 {
                let prefix = self.fusion_prefix(l);
                push_linear(&mut specs, &format!("{prefix}.mlp.fc1"), 2 * d, self.fusion_hidden, ParamRole::Adapter);
                push_linear(&mut specs, &format!("{prefix}.mlp.fc2"), self.fusion_hidden, d, ParamRole::Adapter);
            }
        }
        specs
    }
}

fn push_linear(specs: &mut Vec<TensorSpec>, prefix: &str, input: usize, output: usize, role: ParamRole) {
    specs.push(TensorSpec::new(format!("{prefix}.weight"), vec![output, input], role, Init::Normal));
    specs.push(TensorSpec::new(format!("{prefix}.bias"), vec![output], role, Init::Zeros));
}

fn push_norm(specs: &mut Vec<TensorSpec>, prefix: &str, dim: usize, role: ParamRole) {
    specs.push(TensorSpec::new(format!("{prefix}.weight"), vec![dim], role, Init::Ones));
    specs.push(TensorSpec::new(format!("{prefix}.bias"), vec![dim], role, Init::Zeros));
}

fn push_block(specs: &mut Vec<TensorSpec>, prefix: &str, dim: usize, cfg: &AdapterConfig, role: ParamRole) {
    match cfg.block_kind {
        BlockKind::Linear => push_linear(specs, &format!("{prefix}.linear"), dim, dim, role),
        BlockKind::Transformer => {
            let hidden = dim * cfg.mlp_ratio;
            push_norm(specs, &format!("{prefix}.ln1"), dim, role);
            push_linear(specs, &format!("{prefix}.attn.qkv"), dim, 3 * dim, role);
            push_linear(specs, &format!("{prefix}.attn.proj"), dim, dim, role);
            push_norm(specs, &format!("{prefix}.ln2"), dim, role);
            push_linear(specs, &format!("{prefix}.mlp.fc1"), dim, hidden, role);
            push_linear(specs, &format!("{prefix}.mlp.fc2"), hidden, dim, role);
        }
    }
}

/// Who a tensor belongs to, for "additional parameter" accounting.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamRole {
    /// The patch embedding, owned by the image branch and reused for events.
    SharedEmbedding,
    ImageBranch,
    /// Introduced by the adapter: event blocks, projections, fusion MLPs.
    Adapter,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Init {
    Normal,
    Zeros,
    Ones,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TensorSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub role: ParamRole,
    pub(crate) init: Init,
}

impl TensorSpec {
    fn new(name: String, shape: Vec<usize>, role: ParamRole, init: Init) -> Self {
        Self { name, shape, role, init }
    }

    pub fn numel(&self) -> usize {
        self.shape.iter().product()
    }
}

/// Flat `f32` store of named row-major tensors.
#[derive(Clone, Debug, PartialEq)]
pub struct AdapterParams {
    entries: Vec<(String, Vec<usize>, Range<usize>)>,
    index: HashMap<String, usize>,
    data: Vec<f32>,
}

const INIT_STD: f64 = 0.02;

impl AdapterParams {
    /// Truncated-normal weights (std 0.02, cut at two sigma), zero biases,
    /// unit norm gains.
    pub fn init(config: &AdapterConfig, seed: u64) -> Result<Self, FusionError> {
        Self::init_with_std(config, seed, INIT_STD)
    }

    pub fn init_with_std(config: &AdapterConfig, seed: u64, std: f64) -> Result<Self, FusionError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tensors = config
            .layout()
            .into_iter()
            .map(|spec| {
                let n = spec.numel();
                let data = match spec.init {
                    Init::Zeros => vec![0.0; n],
                    Init::Ones => vec![1.0; n],
                    Init::Normal => (0..n)
                        .map(|_| loop {
                            let z: f64 = rng.sample(StandardNormal);
                            if z.abs() <= 2.0 {
                                break (z * std) as f32;
                            }
                        })
                        .collect(),
                };
                (spec.name, spec.shape, data)
            })
            .collect();
        Self::from_tensors(tensors)
    }

    /// Builds a store from `(name, shape, data)` triples.
    pub fn from_tensors(tensors: Vec<(String, Vec<usize>, Vec<f32>)>) -> Result<Self, FusionError> {
        let mut entries = Vec::with_capacity(tensors.len());
        let mut index = HashMap::with_capacity(tensors.len());
        let mut data = Vec::new();
        for (name, shape, values) in tensors {
            let n: usize = shape.iter().product();
            if values.len() != n {
                return Err(FusionError::ShapeMismatch {
                    tensor: name,
                    expected: shape,
                    got: vec![values.len()],
                });
            }
            if index.insert(name.clone(), entries.len()).is_some() {
                return Err(FusionError::InvalidConfig(format!("duplicate tensor `{name}`")));
            }
            let start = data.len();
            data.extend_from_slice(&values);
            entries.push((name, shape, start..start + n));
        }
        Ok(Self { entries, index, data })
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// `(name, shape, values)` in storage order.
    pub fn tensors(&self) -> impl Iterator<Item = (&str, &[usize], &[f32])> + '_ {
        self.entries
            .iter()
            .map(|(n, s, r)| (n.as_str(), s.as_slice(), &self.data[r.clone()]))
    }

    pub fn tensor(&self, name: &str) -> Option<(&[usize], &[f32])> {
        let (_, shape, range) = &self.entries[*self.index.get(name)?];
        Some((shape, &self.data[range.clone()]))
    }

    pub fn tensor_mut(&mut self, name: &str) -> Option<&mut [f32]> {
        let (_, _, range) = &self.entries[*self.index.get(name)?];
        Some(&mut self.data[range.clone()])
    }

    pub(crate) fn range_of(&self, name: &str) -> Option<(&[usize], Range<usize>)> {
        let (_, shape, range) = &self.entries[*self.index.get(name)?];
        Some((shape, range.clone()))
    }

    /// Name of the tensor owning flat index `i`.
    pub fn name_at(&self, i: usize) -> Option<&str> {
        self.entries.iter().find(|(_, _, r)| r.contains(&i)).map(|(n, _, _)| n.as_str())
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.data.iter().map(|&v| v as f64).collect()
    }
}

/// Token matrix plus the patch grid it came from.
#[derive(Clone, Debug, PartialEq)]
pub struct TokenGrid {
    pub grid_w: usize,
    pub grid_h: usize,
    pub tokens: Mat,
}

impl TokenGrid {
    pub fn len(&self) -> usize {
        self.tokens.rows
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.rows == 0
    }

    pub fn dim(&self) -> usize {
        self.tokens.cols
    }
}

/// Non-overlapping `patch x patch` patches, each flattened as
/// `(row, col, channel)`. Regions past the frame edge read as zero.
fn patchify(values: &[f64], width: usize, height: usize, patch: usize) -> (Mat, usize, usize) {
    let gw = width.div_ceil(patch);
    let gh = height.div_ceil(patch);
    let pd = patch * patch * 3;
    let mut m = Mat::zeros(gw * gh, pd);
    for gy in 0..gh {
        for gx in 0..gw {
            let row = m.row_mut(gy * gw + gx);
            for py in 0..patch {
                let y = gy * patch + py;
                if y >= height {
                    break;
                }
                for px in 0..patch {
                    let x = gx * patch + px;
                    if x >= width {
                        break;
                    }
                    let src = (y * width + x) * 3;
                    let dst = (py * patch + px) * 3;
                    row[dst..dst + 3].copy_from_slice(&values[src..src + 3]);
                }
            }
        }
    }
    (m, gw, gh)
}

/// Applies the shared patch embedding to a frame whose sides are exact
/// multiples of the patch size.
pub fn patch_embed_shared(
    frame: &RgbFrame,
    params: &AdapterParams,
    config: &AdapterConfig,
) -> Result<TokenGrid, FusionError> {
    let p = config.patch_size;
    if p == 0 || !frame.width().is_multiple_of(p) || !frame.height().is_multiple_of(p) {
        return Err(FusionError::IndivisibleResolution {
            width: frame.width(),
            height: frame.height(),
            patch: p,
        });
    }
    let linear = resolve_linear(params, "patch_embed", config.patch_dim(), config.image_dim)?;
    let (patches, gw, gh) = patchify(frame.values(), frame.width(), frame.height(), p);
    let weights = params.to_f64();
    Ok(TokenGrid {
        grid_w: gw,
        grid_h: gh,
        tokens: linear.forward(&weights, &patches),
    })
}

fn expect_shape(params: &AdapterParams, name: &str, expected: &[usize]) -> Result<Range<usize>, FusionError> {
    match params.range_of(name) {
        Some((shape, range)) if shape == expected => Ok(range),
        Some((shape, _)) => Err(FusionError::ShapeMismatch {
            tensor: name.to_string(),
            expected: expected.to_vec(),
            got: shape.to_vec(),
        }),
        None => Err(FusionError::ShapeMismatch {
            tensor: name.to_string(),
            expected: expected.to_vec(),
            got: vec![],
        }),
    }
}

fn resolve_linear(params: &AdapterParams, prefix: &str, input: usize, output: usize) -> Result<LinearRef, FusionError> {
    Ok(LinearRef {
        weight: expect_shape(params, &format!("{prefix}.weight"), &[output, input])?,
        bias: expect_shape(params, &format!("{prefix}.bias"), &[output])?,
        input,
        output,
    })
}

fn resolve_norm(params: &AdapterParams, prefix: &str, dim: usize) -> Result<LayerNormRef, FusionError> {
    Ok(LayerNormRef {
        gamma: expect_shape(params, &format!("{prefix}.weight"), &[dim])?,
        beta: expect_shape(params, &format!("{prefix}.bias"), &[dim])?,
        dim,
    })
}

fn resolve_block(
    params: &AdapterParams,
    prefix: &str,
    dim: usize,
    heads: usize,
    cfg: &AdapterConfig,
) -> Result<BlockRef, FusionError> {
    Ok(match cfg.block_kind {
        BlockKind::Linear => BlockRef::Linear(resolve_linear(params, &format!("{prefix}.linear"), dim, dim)?),
        BlockKind::Transformer => {
            let hidden = dim * cfg.mlp_ratio;
            BlockRef::Transformer(TransformerRef {
                ln1: resolve_norm(params, &format!("{prefix}.ln1"), dim)?,
                qkv: resolve_linear(params, &format!("{prefix}.attn.qkv"), dim, 3 * dim)?,
                proj: resolve_linear(params, &format!("{prefix}.attn.proj"), dim, dim)?,
                ln2: resolve_norm(params, &format!("{prefix}.ln2"), dim)?,
                fc1: resolve_linear(params, &format!("{prefix}.mlp.fc1"), dim, hidden)?,
                fc2: resolve_linear(params, &format!("{prefix}.mlp.fc2"), hidden, dim)?,
                heads,
            })
        }
    })
}

struct StageRef {
    proj: LinearRef,
    fc1: LinearRef,
    fc2: LinearRef,
}

/// The adapter's tensors resolved to index ranges of the flat store.
pub(crate) struct Network {
    patch: LinearRef,
    image_blocks: Vec<BlockRef>,
    event_in: Option<LinearRef>,
    event_blocks: Vec<BlockRef>,
    stages: Vec<StageRef>,
    groups: Vec<Range<usize>>,
    tail: Range<usize>,
    activation: FusionActivation,
    patch_size: usize,
    image_dim: usize,
}

struct StageTrace {
    concat: Mat,
    pre: Mat,
    act: Mat,
    group: Vec<BlockCache>,
}

pub(crate) struct Trace {
    image_patches: Mat,
    event_patches: Mat,
    event_tokens: Mat,
    event_caches: Vec<BlockCache>,
    event_outputs: Vec<Mat>,
    stages: Vec<StageTrace>,
    tail: Vec<BlockCache>,
}

/// Inputs already patchified, shared across repeated forward passes.
pub(crate) struct PatchedInputs {
    pub image: Mat,
    pub event: Mat,
    pub grid_w: usize,
    pub grid_h: usize,
}

impl Network {
    pub(crate) fn resolve(config: &AdapterConfig, params: &AdapterParams) -> Result<Self, FusionError> {
        config.validate()?;
        let d = config.image_dim;
        let de = config.event_dim;
        let patch = resolve_linear(params, "patch_embed", config.patch_dim(), d)?;
        let image_blocks = (0..config.image_branch_blocks)
            .map(|i| resolve_block(params, &format!("image.blocks.{i}"), d, config.image_heads, config))
            .collect::<Result<Vec<_>, _>>()?;
        let event_in = if config.event_blocks > 0 {
            Some(resolve_linear(params, "event.in_proj", d, de)?)
        } else {
            None
        };
        let event_blocks = (0..config.event_blocks)
            .map(|l| resolve_block(params, &format!("event.blocks.{l}"), de, config.event_heads, config))
            .collect::<Result<Vec<_>, _>>()?;
        let stages = (0..config.event_blocks)
            .map(|l| {
                let prefix = config.fusion_prefix(l);
                Ok(StageRef {
                    proj: resolve_linear(params, &format!("fusion.{l}.proj"), de, d)?,
                    fc1: resolve_linear(params, &format!("{prefix}.mlp.fc1"), 2 * d, config.fusion_hidden)?,
                    fc2: resolve_linear(params, &format!("{prefix}.mlp.fc2"), config.fusion_hidden, d)?,
                })
            })
            .collect::<Result<Vec<_>, FusionError>>()?;
        let (groups, tail) = config.groups();
        Ok(Self {
            patch,
            image_blocks,
            event_in,
            event_blocks,
            stages,
            groups,
            tail,
            activation: config.fusion_activation,
            patch_size: config.patch_size,
            image_dim: d,
        })
    }

    pub(crate) fn patch_inputs(&self, image: &RgbFrame, event: &RgbFrame) -> Result<PatchedInputs, FusionError> {
        if (image.width(), image.height()) != (event.width(), event.height()) {
            return Err(FusionError::GeometryMismatch {
                got_w: event.width(),
                got_h: event.height(),
                want_w: image.width(),
                want_h: image.height(),
            });
        }
        let (img, gw, gh) = patchify(image.values(), image.width(), image.height(), self.patch_size);
        let (ev, _, _) = patchify(event.values(), event.width(), event.height(), self.patch_size);
        Ok(PatchedInputs {
            image: img,
            event: ev,
            grid_w: gw,
            grid_h: gh,
        })
    }

    pub(crate) fn forward(&self, p: &[f64], inputs: &PatchedInputs) -> (Mat, Trace) {
        let mut f = self.patch.forward(p, &inputs.image);
        let e0 = self.patch.forward(p, &inputs.event);
        let mut e = match &self.event_in {
            Some(l) => l.forward(p, &e0),
            None => e0.clone(),
        };
        let mut event_caches = Vec::with_capacity(self.stages.len());
        let mut event_outputs = Vec::with_capacity(self.stages.len());
        let mut stages = Vec::with_capacity(self.stages.len());
        for (l, stage) in self.stages.iter().enumerate() {
            let (e_next, cache) = self.event_blocks[l].forward(p, &e);
            e = e_next;
            event_caches.push(cache);
            event_outputs.push(e.clone());

            let projected = stage.proj.forward(p, &e);
            let concat = f.hconcat(&projected);
            let pre = stage.fc1.forward(p, &concat);
            let act = self.activation.apply(&pre);
            let mut z = stage.fc2.forward(p, &act);
            let mut group = Vec::with_capacity(self.groups[l].len());
            for b in self.groups[l].clone() {
                let (next, cache) = self.image_blocks[b].forward(p, &z);
                z = next;
                group.push(cache);
            }
            f = z;
            stages.push(StageTrace { concat, pre, act, group });
        }
        let mut tail = Vec::with_capacity(self.tail.len());
        for b in self.tail.clone() {
            let (next, cache) = self.image_blocks[b].forward(p, &f);
            f = next;
            tail.push(cache);
        }
        (
            f,
            Trace {
                image_patches: inputs.image.clone(),
                event_patches: inputs.event.clone(),
                event_tokens: e0,
                event_caches,
                event_outputs,
                stages,
                tail,
            },
        )
    }

    /// Parameter gradient of `sum(d_out ⊙ output)`.
    pub(crate) fn backward(&self, p: &[f64], trace: &Trace, d_out: &Mat) -> Vec<f64> {
        let mut g = vec![0.0; p.len()];
        let mut d_f = d_out.clone();
        for (i, b) in self.tail.clone().enumerate().rev() {
            d_f = self.image_blocks[b].backward(p, &mut g, &trace.tail[i], &d_f);
        }
        let n_stages = self.stages.len();
        let mut d_event_out: Vec<Option<Mat>> = vec![None; n_stages];
        for l in (0..n_stages).rev() {
            let st = &trace.stages[l];
            let stage = &self.stages[l];
            for (i, b) in self.groups[l].clone().enumerate().rev() {
                d_f = self.image_blocks[b].backward(p, &mut g, &st.group[i], &d_f);
            }
            let d_act = stage.fc2.backward(p, &mut g, &st.act, &d_f);
            let d_pre = self.activation.backward(&st.pre, &d_act);
            let d_concat = stage.fc1.backward(p, &mut g, &st.concat, &d_pre);
            let (d_prev, d_proj) = d_concat.hsplit(self.image_dim);
            d_event_out[l] = Some(stage.proj.backward(p, &mut g, &trace.event_outputs[l], &d_proj));
            d_f = d_prev;
        }
        // event chain: output l feeds both stage l and block l + 1
        let mut carry: Option<Mat> = None;
        for l in (0..n_stages).rev() {
            let mut d = d_event_out[l].take().expect("stage gradient");
            if let Some(c) = carry.take() {
                d.add_assign(&c);
            }
            carry = Some(self.event_blocks[l].backward(p, &mut g, &trace.event_caches[l], &d));
        }
        self.patch.backward(p, &mut g, &trace.image_patches, &d_f);
        if let (Some(event_in), Some(d_e)) = (&self.event_in, carry) {
            let d_e0 = event_in.backward(p, &mut g, &trace.event_tokens, &d_e);
            self.patch.backward(p, &mut g, &trace.event_patches, &d_e0);
        }
        g
    }

    pub(crate) fn image_only(&self, p: &[f64], image: &Mat) -> Mat {
        let mut f = self.patch.forward(p, image);
        for block in &self.image_blocks {
            f = block.forward(p, &f).0;
        }
        f
    }
}

/// Full fused forward pass. Frames whose sides are not multiples of the
/// patch size are zero-padded at the right and bottom.
pub fn adapter_forward(
    image: &RgbImage,
    event_frame: &EventFrame,
    params: &AdapterParams,
    config: &AdapterConfig,
) -> Result<TokenGrid, FusionError> {
    let net = Network::resolve(config, params)?;
    let inputs = net.patch_inputs(&image.to_frame(), &RgbFrame::from(event_frame))?;
    let weights = params.to_f64();
    let (tokens, _) = net.forward(&weights, &inputs);
    Ok(TokenGrid {
        grid_w: inputs.grid_w,
        grid_h: inputs.grid_h,
        tokens,
    })
}

/// The image branch alone: patch embedding then every image block, no fusion.
pub fn image_only_forward(
    image: &RgbImage,
    params: &AdapterParams,
    config: &AdapterConfig,
) -> Result<TokenGrid, FusionError> {
    let net = Network::resolve(config, params)?;
    let frame = image.to_frame();
    let (patches, gw, gh) = patchify(frame.values(), frame.width(), frame.height(), config.patch_size);
    Ok(TokenGrid {
        grid_w: gw,
        grid_h: gh,
        tokens: net.image_only(&params.to_f64(), &patches),
    })
}
