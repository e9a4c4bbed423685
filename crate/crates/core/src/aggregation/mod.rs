//! Relationship-pattern aggregation, fusion and image reconstruction.
//!
//! The local branch mixes the pattern matrices with learnable `alpha`,
//! normalizes the mix and averages the outputs of `l` linear GCN layers.
//! The global branch links nodes by the similarity of their pattern-count
//! signatures and keeps the last of its `l` layers. The two
//! representations are averaged and decoded per patch into a residual added
//! to the bicubic-upsampled LR-MS.

mod global;
mod local;
mod params;

pub use global::{aggregate_global, build_global_pattern_matrix, global_similarity, GlobalOperator};
pub use local::{aggregate_local, sym_norm, LocalOperator};
pub use params::{ModelParams, PATTERN_SLOTS};

pub(crate) use local::{layer_mean, prefix_backward, prefix_products};

use ndarray::{s, Array2, ArrayView2};

use crate::config::{Ablation, TrainConfig};
use crate::error::{shape_err, Error, Result};
use crate::graph::{
    band_node, build_hetss_graph, build_with_topology, patch_matrices, pan_node, Embeddings,
    HetGraph, Topology,
};
use crate::imaging::{extract_patches, upsample_bicubic, Image, PatchLayout, ScenePair, MS_BANDS};
use crate::patterns::{generate_patterns, PatternSet};

#[derive(Clone, Debug, PartialEq)]
pub struct NodeRepr {
    pub h_local: Array2<f64>,
    pub h_global: Array2<f64>,
    pub h: Array2<f64>,
}

/// Average pooling of the two branch outputs.
pub fn fuse(h_local: ArrayView2<f64>, h_global: ArrayView2<f64>) -> Result<Array2<f64>> {
    if h_local.dim() != h_global.dim() {
        return Err(shape_err("local and global representations differ in shape"));
    }
    Ok((&h_local + &h_global) / 2.0)
}

/// Per-band decoder inputs: row `i` is `[H[pan(i)], H[band(i, b)]]`.
pub(crate) fn decoder_inputs(h: &Array2<f64>, n_patches: usize) -> Vec<Array2<f64>> {
    let d = h.ncols();
    (0..MS_BANDS)
        .map(|b| {
            let mut c = Array2::zeros((n_patches, 2 * d));
            for i in 0..n_patches {
                c.slice_mut(s![i, ..d]).assign(&h.row(pan_node(i)));
                c.slice_mut(s![i, d..]).assign(&h.row(band_node(n_patches, i, b)));
            }
            c
        })
        .collect()
}

/// Decodes every patch, overlap-averages per band and adds the result to
/// `base` (channel-last, 4 bands). Returns the unclamped sum.
pub(crate) fn decode_residual(
    inputs: &[Array2<f64>],
    recon: &[Array2<f64>],
    layout: &PatchLayout,
    base: &[f64],
) -> Vec<f64> {
    let mut out = base.to_vec();
    for (b, (c, r)) in inputs.iter().zip(recon).enumerate() {
        let blocks = c.dot(&r.t());
        let plane = layout.reassemble_f64(blocks.as_slice().expect("standard layout"));
        for (p, v) in plane.into_iter().enumerate() {
            out[p * MS_BANDS + b] += v;
        }
    }
    out
}

/// Residual decoding over the upsampled LR-MS, clamped to `[0, 1]`.
///
/// `layout` is the single-channel patch geometry shared by all node types.
pub fn reconstruct(
    h: ArrayView2<f64>,
    layout: &PatchLayout,
    recon: &[Array2<f64>],
    lrms_up: &Image,
) -> Result<Image> {
    let n = layout.len();
    if h.nrows() != (1 + MS_BANDS) * n {
        return Err(shape_err(format!("H has {} rows for {n} patches", h.nrows())));
    }
    if recon.len() != MS_BANDS
        || recon
            .iter()
            .any(|r| r.dim() != (layout.block_len(), 2 * h.ncols()))
    {
        return Err(shape_err("decoder shapes do not match H and the patch size"));
    }
    if lrms_up.height() != layout.height
        || lrms_up.width() != layout.width
        || lrms_up.channels() != MS_BANDS
    {
        return Err(shape_err("upsampled LR-MS does not match the patch layout"));
    }
    let inputs = decoder_inputs(&h.to_owned(), n);
    let out = decode_residual(&inputs, recon, layout, &lrms_up.to_f64());
    Image::from_f64(layout.height, layout.width, MS_BANDS, &out)
}

/// Everything about a scene that does not depend on the parameters.
#[derive(Clone, Debug)]
pub struct PreparedScene {
    pub layout: PatchLayout,
    pub pan_patches: Array2<f64>,
    pub band_patches: Vec<Array2<f64>>,
    pub lrms_up: Image,
    pub lrms_up_f64: Vec<f64>,
    pub gt: Option<Vec<f64>>,
}

impl PreparedScene {
    pub fn new(scene: &ScenePair, patch: usize, stride: usize) -> Result<Self> {
        scene.validate()?;
        let lrms_up = upsample_bicubic(&scene.lrms, scene.scale)?;
        let pan_grid = extract_patches(&scene.pan, patch, stride)?;
        let band_grids = (0..MS_BANDS)
            .map(|b| extract_patches(&lrms_up.channel(b), patch, stride))
            .collect::<Result<Vec<_>>>()?;
        let (pan_patches, band_patches) = patch_matrices(&pan_grid, &band_grids);
        Ok(Self {
            layout: pan_grid.layout,
            pan_patches,
            band_patches,
            lrms_up_f64: lrms_up.to_f64(),
            lrms_up,
            gt: scene.gt.as_ref().map(Image::to_f64),
        })
    }

    pub fn n_patches(&self) -> usize {
        self.layout.len()
    }

    pub fn embed(&self, params: &ModelParams) -> Result<Embeddings> {
        if params.patch_len() != self.pan_patches.ncols() {
            return Err(shape_err(format!(
                "embedding expects {} samples per patch, scene has {}",
                params.patch_len(),
                self.pan_patches.ncols()
            )));
        }
        Ok(Embeddings {
            pan: self.pan_patches.dot(&params.w_pan.t()),
            bands: self
                .band_patches
                .iter()
                .zip(&params.w_band)
                .map(|(m, w)| m.dot(&w.t()))
                .collect(),
        })
    }
}

/// All intermediates of one forward pass, kept for the reverse pass.
#[derive(Clone, Debug)]
pub struct ForwardPass {
    pub embeddings: Embeddings,
    pub graph: HetGraph,
    pub patterns: PatternSet,
    pub local: LocalOperator,
    pub global: GlobalOperator,
    pub repr: NodeRepr,
    pub(crate) z_local: Array2<f64>,
    pub(crate) prefix_local: Vec<Array2<f64>>,
    pub(crate) v_global: Array2<f64>,
    pub(crate) prefix_global: Vec<Array2<f64>>,
    pub(crate) decoder_inputs: Vec<Array2<f64>>,
    /// Reconstruction before clamping, channel-last.
    pub(crate) unclamped: Vec<f64>,
    /// Reconstruction in `[0, 1]`, channel-last.
    pub fused: Vec<f64>,
}

impl ForwardPass {
    pub fn fused_image(&self, layout: &PatchLayout) -> Image {
        Image::from_f64(layout.height, layout.width, MS_BANDS, &self.fused)
            .expect("fused buffer matches layout")
    }
}

fn ensure_finite(a: &Array2<f64>, what: &str) -> Result<()> {
    if a.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what.into()))
    }
}

/// Runs the network on a prepared scene. With `topology` given, neighbor
/// selection is frozen to it and only edge weights follow the parameters.
pub fn forward_prepared(
    prep: &PreparedScene,
    params: &ModelParams,
    cfg: &TrainConfig,
    topology: Option<&Topology>,
) -> Result<ForwardPass> {
    params.validate()?;
    let embeddings = prep.embed(params)?;
    let graph = match topology {
        Some(t) => build_with_topology(&embeddings, cfg.k, t.clone())?,
        None => build_hetss_graph(&embeddings, cfg.k)?,
    };
    let patterns = generate_patterns(&graph);
    let alpha = params.alpha.as_slice().expect("contiguous alpha");
    let beta = params.beta.as_slice().expect("contiguous beta");
    let u = graph.features.view();

    let local = LocalOperator::new(&patterns, alpha)?;
    let z_local = local.apply(u);
    let prefix_local = prefix_products(&params.w_local);
    let h_local = layer_mean(&z_local, &prefix_local);
    ensure_finite(&h_local, "local aggregation")?;

    let global = GlobalOperator::new(&patterns, beta)?;
    let v_global = global.apply(u);
    let prefix_global = prefix_products(&params.w_global);
    let h_global = v_global.dot(prefix_global.last().expect("at least one layer"));
    ensure_finite(&h_global, "global aggregation")?;

    let h = match cfg.ablation {
        Ablation::Full => fuse(h_local.view(), h_global.view())?,
        Ablation::LocalOnly => h_local.clone(),
        Ablation::GlobalOnly => h_global.clone(),
    };
    let inputs = decoder_inputs(&h, prep.n_patches());
    let unclamped = decode_residual(&inputs, &params.recon, &prep.layout, &prep.lrms_up_f64);
    if unclamped.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("reconstruction".into()));
    }
    let fused = unclamped.iter().map(|v| v.clamp(0.0, 1.0)).collect();
    Ok(ForwardPass {
        embeddings,
        graph,
        patterns,
        local,
        global,
        repr: NodeRepr {
            h_local,
            h_global,
            h,
        },
        z_local,
        prefix_local,
        v_global,
        prefix_global,
        decoder_inputs: inputs,
        unclamped,
        fused,
    })
}

/// Output of [`forward`].
#[derive(Clone, Debug)]
pub struct ForwardOutput {
    pub fused: Image,
    pub repr: NodeRepr,
    pub graph: HetGraph,
    pub patterns: PatternSet,
}

/// Upsample, patch, embed, build the graph, generate patterns, aggregate,
/// fuse and reconstruct.
pub fn forward(scene: &ScenePair, params: &ModelParams, cfg: &TrainConfig) -> Result<ForwardOutput> {
    let prep = PreparedScene::new(scene, cfg.patch, cfg.stride)?;
    let pass = forward_prepared(&prep, params, cfg, None)?;
    Ok(ForwardOutput {
        fused: pass.fused_image(&prep.layout),
        repr: pass.repr,
        graph: pass.graph,
        patterns: pass.patterns,
    })
}
