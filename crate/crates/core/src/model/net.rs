use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{toy_specs, BackboneKind, ModelConfig, Variant, RESNET_DOWN, RESNET_STEM};
use super::params::{Binder, ParamId, Params};
use crate::autograd::{ConvSpec, Graph, Var};
use crate::error::{shape_err, Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug)]
struct ConvLayer {
    w: ParamId,
    b: Option<ParamId>,
    norm: Option<(ParamId, ParamId)>,
    spec: ConvSpec,
}

struct LayerBuilder<'p, T: Scalar> {
    params: &'p mut Params<T>,
    rng: ChaCha8Rng,
}

impl<T: Scalar> LayerBuilder<'_, T> {
    /// Convolution with a learned bias.
    fn conv(&mut self, name: &str, cin: usize, cout: usize, k: usize, spec: ConvSpec) -> ConvLayer {
        self.conv_gain(name, cin, cout, k, spec, 1.0)
    }

    fn conv_gain(&mut self, name: &str, cin: usize, cout: usize, k: usize, spec: ConvSpec, gain: f64) -> ConvLayer {
        let w = self.params.conv(
            format!("{name}.weight"),
            [cout, cin, k, k],
            cin * k * k,
            gain,
            &mut self.rng,
        );
        let b = self.params.filled(format!("{name}.bias"), &[cout], 0.0, false);
        ConvLayer {
            w,
            b: Some(b),
            norm: None,
            spec,
        }
    }

    /// Bias-free convolution followed by a frozen per-channel affine.
    fn conv_norm(&mut self, name: &str, cin: usize, cout: usize, k: usize, spec: ConvSpec) -> ConvLayer {
        let w = self.params.conv(
            format!("{name}.weight"),
            [cout, cin, k, k],
            cin * k * k,
            1.0,
            &mut self.rng,
        );
        let s = self.params.filled(format!("{name}.norm.scale"), &[cout], 1.0, true);
        let t = self.params.filled(format!("{name}.norm.shift"), &[cout], 0.0, true);
        ConvLayer {
            w,
            b: None,
            norm: Some((s, t)),
            spec,
        }
    }
}

impl ConvLayer {
    fn apply<'a, T: Scalar>(&self, g: &mut Graph<'a, T>, p: &mut Binder<'a, T>, x: Var) -> Result<Var> {
        let w = p.var(g, self.w);
        let b = self.b.map(|b| p.var(g, b));
        let y = g.conv2d(x, w, b, self.spec)?;
        match self.norm {
            Some((s, t)) => {
                let (s, t) = (p.var(g, s), p.var(g, t));
                g.channel_affine(y, s, t)
            }
            None => Ok(y),
        }
    }

    fn apply_relu<'a, T: Scalar>(&self, g: &mut Graph<'a, T>, p: &mut Binder<'a, T>, x: Var) -> Result<Var> {
        let y = self.apply(g, p, x)?;
        Ok(g.relu(y))
    }
}

struct Bottleneck {
    reduce: ConvLayer,
    spatial: ConvLayer,
    expand: ConvLayer,
    shortcut: Option<ConvLayer>,
}

impl Bottleneck {
    fn apply<'a, T: Scalar>(&self, g: &mut Graph<'a, T>, p: &mut Binder<'a, T>, x: Var) -> Result<Var> {
        let y = self.reduce.apply_relu(g, p, x)?;
        let y = self.spatial.apply_relu(g, p, y)?;
        let y = self.expand.apply(g, p, y)?;
        let skip = match &self.shortcut {
            Some(s) => s.apply(g, p, x)?,
            None => x,
        };
        let y = g.add(y, skip)?;
        Ok(g.relu(y))
    }
}

enum Backbone {
    Toy([ConvLayer; 4]),
    Resnet {
        stem: ConvLayer,
        stages: [Vec<Bottleneck>; 3],
    },
}

struct Head {
    hidden: ConvLayer,
    out: ConvLayer,
}

impl Head {
    fn apply<'a, T: Scalar>(&self, g: &mut Graph<'a, T>, p: &mut Binder<'a, T>, x: Var) -> Result<Var> {
        let h = self.hidden.apply_relu(g, p, x)?;
        self.out.apply(g, p, h)
    }
}

struct Refiner {
    kernel: ParamId,
    bias: ParamId,
    /// Per module: two convs on the decoder state, three on the skip features,
    /// one after upsampling.
    modules: [RefineModule; 3],
}

struct RefineModule {
    state: [ConvLayer; 2],
    skip: [ConvLayer; 3],
    post: ConvLayer,
}

struct Layout {
    backbone: Backbone,
    adjust_z: ConvLayer,
    adjust_x: ConvLayer,
    score: Head,
    boxes: Option<Head>,
    mask: Head,
    refiner: Refiner,
}

/// Search-patch features: the adjusted stride-8 map plus the three backbone taps used
/// by the refinement modules (deepest first).
#[derive(Clone, Copy, Debug)]
pub struct SearchVars {
    pub features: Var,
    pub skips: [Var; 3],
}

/// Materialised backbone outputs of a search patch.
#[derive(Clone, Debug, PartialEq)]
pub struct FeaturePyramid<T> {
    /// Adjusted stride-8 features.
    pub features: Tensor<T>,
    /// Skip taps from progressively shallower stages.
    pub skips: [Tensor<T>; 3],
}

/// Everything the network says about one search patch.
#[derive(Clone, Debug)]
pub struct ResponseGrid<T> {
    /// Depth-wise correlation features, `[feature_channels, side, side]`.
    pub correlation: Tensor<T>,
    /// `[score_channels, side, side]`.
    pub scores: Tensor<T>,
    /// `[4k, side, side]` for the three-branch variant.
    pub deltas: Option<Tensor<T>>,
    pub pyramid: FeaturePyramid<T>,
}

impl<T: Scalar> ResponseGrid<T> {
    pub fn side(&self) -> usize {
        self.scores.shape()[1]
    }
}

/// The Siamese network: weights plus the layer layout that interprets them.
pub struct Network<T: Scalar> {
    config: ModelConfig,
    params: Params<T>,
    layout: Layout,
}

impl<T: Scalar> core::fmt::Debug for Network<T> {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("Network")
            .field("backbone", &self.config.backbone)
            .field("variant", &self.config.variant)
            .field("weights", &self.params.scalar_count())
            .finish()
    }
}

impl<T: Scalar> Network<T> {
    /// Builds the layout for `config` and draws initial weights from `seed`.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut params = Params::default();
        let mut b = LayerBuilder {
            params: &mut params,
            rng: ChaCha8Rng::seed_from_u64(seed),
        };
        let backbone = match config.backbone {
            BackboneKind::ToyConvnet => {
                let ch = &config.toy_channels;
                let specs = toy_specs();
                let mut cin = 3;
                let layers: Vec<ConvLayer> = (0..4)
                    .map(|i| {
                        let l = b.conv(&format!("backbone.conv{}", i + 1), cin, ch[i], 3, specs[i]);
                        cin = ch[i];
                        l
                    })
                    .collect();
                Backbone::Toy([layers[0], layers[1], layers[2], layers[3]])
            }
            BackboneKind::Resnet50C4 => build_resnet(&mut b),
        };
        let f = config.feature_channels;
        let cb = config.backbone_channels();
        let pw = ConvSpec::UNIT;
        // the correlation sums zs^2 products; shrinking both sides by zs keeps it O(1)
        let zs = config.level_sides(config.exemplar_side).map_or(1, |s| s.out) as f64;
        let adjust_z = b.conv_gain("adjust.exemplar", cb, f, 1, pw, 1.0 / zs);
        let adjust_x = b.conv_gain("adjust.search", cb, f, 1, pw, 1.0 / zs);
        let hh = config.head_hidden;
        let mut head = |name: &str, out: usize| Head {
            hidden: b.conv(&format!("{name}.hidden"), f, hh, 1, pw),
            out: b.conv(&format!("{name}.out"), hh, out, 1, pw),
        };
        let score = head("head.score", config.score_channels());
        let boxes = (config.variant == Variant::ThreeBranch).then(|| head("head.box", config.box_channels()));
        let mask = head("head.mask", config.mask_channels());

        let rc = &config.refinement_channels;
        let seed_side = config.seed_side();
        let kernel = b.params.conv(
            String::from("refine.deconv.weight"),
            [f, rc[0], seed_side, seed_side],
            f,
            1.0,
            &mut b.rng,
        );
        let bias = b
            .params
            .filled(String::from("refine.deconv.bias"), &[rc[0]], 0.0, false);
        let skip_ch = config.skip_channels();
        let same = ConvSpec::new(1, 1, 1);
        let mut module = |t: usize| {
            let c = rc[t];
            let next = if t == 2 { 1 } else { rc[t + 1] };
            let n = format!("refine.u{}", t + 1);
            RefineModule {
                state: [
                    b.conv(&format!("{n}.state1"), c, c, 3, same),
                    b.conv(&format!("{n}.state2"), c, c, 3, same),
                ],
                skip: [
                    b.conv(&format!("{n}.skip1"), skip_ch[t], c, 3, same),
                    b.conv(&format!("{n}.skip2"), c, c, 3, same),
                    b.conv(&format!("{n}.skip3"), c, c, 3, same),
                ],
                post: b.conv(&format!("{n}.post"), c, next, 3, same),
            }
        };
        let modules = [module(0), module(1), module(2)];
        let layout = Layout {
            backbone,
            adjust_z,
            adjust_x,
            score,
            boxes,
            mask,
            refiner: Refiner { kernel, bias, modules },
        };
        Ok(Self { config, params, layout })
    }

    /// Same layout with weights replaced by `params` (which must match it exactly).
    pub fn with_params(config: ModelConfig, params: Params<T>) -> Result<Self> {
        let mut net = Self::new(config, 0)?;
        let named = params.iter().map(|(n, t)| (String::from(n), t.clone())).collect();
        net.params.load(named)?;
        Ok(net)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &Params<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut Params<T> {
        &mut self.params
    }

    pub fn binder(&self) -> Binder<'_, T> {
        Binder::new(&self.params)
    }

    /// Converts the weights to another precision.
    pub fn cast<U: Scalar>(&self) -> Network<U> {
        Network::with_params(self.config.clone(), self.params.cast()).expect("identical layout")
    }

    fn check_patch(&self, g: &Graph<'_, T>, patch: Var, side: usize) -> Result<()> {
        let s = g.value(patch).shape();
        if s != [3, side, side] {
            return Err(shape_err(
                "backbone",
                format!("expected a [3, {side}, {side}] patch, got {:?}", s),
            ));
        }
        Ok(())
    }

    /// Backbone taps: `(final, [deepest skip, middle skip, shallowest skip])`.
    fn backbone<'a>(&'a self, g: &mut Graph<'a, T>, p: &mut Binder<'a, T>, x: Var) -> Result<(Var, [Var; 3])> {
        match &self.layout.backbone {
            Backbone::Toy(layers) => {
                let c1 = layers[0].apply_relu(g, p, x)?;
                let c2 = layers[1].apply_relu(g, p, c1)?;
                let c3 = layers[2].apply_relu(g, p, c2)?;
                let c4 = layers[3].apply_relu(g, p, c3)?;
                Ok((c4, [c3, c2, c1]))
            }
            Backbone::Resnet { stem, stages } => {
                let s = stem.apply_relu(g, p, x)?;
                let mut y = g.max_pool(s, 3, 2, 1)?;
                let mut taps = [s; 3];
                for (i, stage) in stages.iter().enumerate() {
                    for block in stage {
                        y = block.apply(g, p, y)?;
                    }
                    taps[i] = y;
                }
                Ok((taps[2], [taps[1], taps[0], s]))
            }
        }
    }

    /// Adjusted exemplar features for a `[3, exemplar_side, exemplar_side]` patch.
    pub fn exemplar<'a>(&'a self, g: &mut Graph<'a, T>, p: &mut Binder<'a, T>, patch: Var) -> Result<Var> {
        self.check_patch(g, patch, self.config.exemplar_side)?;
        let (out, _) = self.backbone(g, p, patch)?;
        self.layout.adjust_z.apply(g, p, out)
    }

    /// Adjusted search features and skip taps for a `[3, search_side, search_side]` patch.
    pub fn search<'a>(&'a self, g: &mut Graph<'a, T>, p: &mut Binder<'a, T>, patch: Var) -> Result<SearchVars> {
        self.check_patch(g, patch, self.config.search_side)?;
        let (out, skips) = self.backbone(g, p, patch)?;
        let features = self.layout.adjust_x.apply(g, p, out)?;
        Ok(SearchVars { features, skips })
    }

    /// `[score_channels, R, R]` logits.
    pub fn scores<'a>(&'a self, g: &mut Graph<'a, T>, p: &mut Binder<'a, T>, corr: Var) -> Result<Var> {
        self.layout.score.apply(g, p, corr)
    }

    /// `[4k, R, R]` box deltas, channel `j * k + a` holding coordinate `j` of anchor `a`.
    pub fn deltas<'a>(&'a self, g: &mut Graph<'a, T>, p: &mut Binder<'a, T>, corr: Var) -> Result<Var> {
        match &self.layout.boxes {
            Some(h) => h.apply(g, p, corr),
            None => Err(Error::Config("the two-branch variant has no box head".into())),
        }
    }

    /// Plain mask logits at the given RoWs: `[mask_side^2, n, 1]`, row-major per mask.
    pub fn masks_at<'a>(
        &'a self,
        g: &mut Graph<'a, T>,
        p: &mut Binder<'a, T>,
        corr: Var,
        rows: &[(usize, usize)],
    ) -> Result<Var> {
        let picked = g.gather(corr, rows)?;
        self.layout.mask.apply(g, p, picked)
    }

    /// Plain mask logits for every RoW: `[mask_side^2, R, R]`.
    pub fn masks_all<'a>(&'a self, g: &mut Graph<'a, T>, p: &mut Binder<'a, T>, corr: Var) -> Result<Var> {
        self.layout.mask.apply(g, p, corr)
    }

    /// Refined `[1, S, S]` mask logits for RoW `(row, col)`, aligned with its
    /// exemplar-sized candidate window.
    pub fn refine<'a>(
        &'a self,
        g: &mut Graph<'a, T>,
        p: &mut Binder<'a, T>,
        corr: Var,
        search: &SearchVars,
        (row, col): (usize, usize),
    ) -> Result<Var> {
        let r = self.config.response_side;
        if row >= r || col >= r {
            return Err(Error::InvalidArgument(format!(
                "RoW ({row}, {col}) outside a {r}x{r} grid"
            )));
        }
        let zs = self
            .config
            .level_sides(self.config.exemplar_side)
            .expect("validated")
            .skips;
        let rf = &self.layout.refiner;
        let vec = g.gather(corr, &[(row, col)])?;
        let (k, bias) = (p.var(g, rf.kernel), p.var(g, rf.bias));
        let mut e = g.deconv_point(vec, k, bias)?;
        for (t, m) in rf.modules.iter().enumerate() {
            let f = search.skips[t];
            let xs = g.value(f).shape()[1];
            let step = if r > 1 { (xs - zs[t]) / (r - 1) } else { 0 };
            let window = g.crop(f, row * step, col * step, zs[t], zs[t])?;
            let a = m.state[0].apply_relu(g, p, e)?;
            let a = m.state[1].apply(g, p, a)?;
            let mut bvar = m.skip[0].apply_relu(g, p, window)?;
            bvar = m.skip[1].apply_relu(g, p, bvar)?;
            bvar = m.skip[2].apply(g, p, bvar)?;
            let sum = g.add(a, bvar)?;
            let next = if t == 2 {
                self.config.refined_mask_side
            } else {
                zs[t + 1]
            };
            let up = g.upsample(sum, next, next)?;
            e = m.post.apply(g, p, up)?;
            if t < 2 {
                e = g.relu(e);
            }
        }
        Ok(e)
    }

    /// Cached exemplar features for tracking.
    pub fn embed_exemplar(&self, patch: &Tensor<T>) -> Result<Tensor<T>> {
        let mut g = Graph::inference();
        let mut p = self.binder();
        let x = g.constant(patch);
        let z = self.exemplar(&mut g, &mut p, x)?;
        Ok(g.take(z))
    }

    /// Correlates cached exemplar features with a search patch and runs the
    /// score (and box) heads.
    pub fn respond(&self, exemplar: &Tensor<T>, patch: &Tensor<T>) -> Result<ResponseGrid<T>> {
        let mut g = Graph::inference();
        let mut p = self.binder();
        let z = g.constant(exemplar);
        let x = g.constant(patch);
        let s = self.search(&mut g, &mut p, x)?;
        let corr = g.xcorr(z, s.features)?;
        let scores = self.scores(&mut g, &mut p, corr)?;
        let deltas = match self.config.variant {
            Variant::ThreeBranch => Some(self.deltas(&mut g, &mut p, corr)?),
            Variant::TwoBranch => None,
        };
        Ok(ResponseGrid {
            scores: g.take(scores),
            deltas: deltas.map(|d| g.take(d)),
            pyramid: FeaturePyramid {
                skips: s.skips.map(|v| g.take(v)),
                features: g.take(s.features),
            },
            correlation: g.take(corr),
        })
    }

    /// Mask logits of one RoW as a square `[side, side]` tensor: the refined decoder
    /// when `refined`, otherwise the plain head.
    pub fn mask_logits(&self, grid: &ResponseGrid<T>, rc: (usize, usize), refined: bool) -> Result<Tensor<T>> {
        let mut g = Graph::inference();
        let mut p = self.binder();
        let corr = g.constant(&grid.correlation);
        if refined {
            let skips = [
                g.constant(&grid.pyramid.skips[0]),
                g.constant(&grid.pyramid.skips[1]),
                g.constant(&grid.pyramid.skips[2]),
            ];
            let features = g.constant(&grid.pyramid.features);
            let v = self.refine(&mut g, &mut p, corr, &SearchVars { features, skips }, rc)?;
            let s = self.config.refined_mask_side;
            g.take(v).reshaped(&[s, s])
        } else {
            let v = self.masks_at(&mut g, &mut p, corr, &[rc])?;
            let s = self.config.mask_side;
            g.take(v).reshaped(&[s, s])
        }
    }

    /// Plain mask logits for the whole grid, `[mask_side^2, R, R]`.
    pub fn mask_grid(&self, grid: &ResponseGrid<T>) -> Result<Tensor<T>> {
        let mut g = Graph::inference();
        let mut p = self.binder();
        let corr = g.constant(&grid.correlation);
        let m = self.masks_all(&mut g, &mut p, corr)?;
        Ok(g.take(m))
    }
}

fn build_resnet<T: Scalar>(b: &mut LayerBuilder<'_, T>) -> Backbone {
    let stem = b.conv_norm("backbone.stem", 3, 64, 7, RESNET_STEM);
    // (blocks, width, first spatial spec, later spatial spec, shortcut kernel, shortcut spec)
    let plan = [
        (3, 64, ConvSpec::new(1, 1, 1), ConvSpec::new(1, 1, 1), 1, ConvSpec::UNIT),
        (4, 128, RESNET_DOWN, ConvSpec::new(1, 1, 1), 3, RESNET_DOWN),
        (
            6,
            256,
            ConvSpec::new(1, 2, 2),
            ConvSpec::new(1, 2, 2),
            1,
            ConvSpec::UNIT,
        ),
    ];
    let mut cin = 64;
    let mut stages: [Vec<Bottleneck>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for (si, &(blocks, width, first, later, sk, sspec)) in plan.iter().enumerate() {
        let cout = width * 4;
        for bi in 0..blocks {
            let n = format!("backbone.layer{}.{bi}", si + 1);
            let spatial_spec = if bi == 0 { first } else { later };
            let block = Bottleneck {
                reduce: b.conv_norm(&format!("{n}.reduce"), cin, width, 1, ConvSpec::UNIT),
                spatial: b.conv_norm(&format!("{n}.spatial"), width, width, 3, spatial_spec),
                expand: b.conv_norm(&format!("{n}.expand"), width, cout, 1, ConvSpec::UNIT),
                shortcut: (bi == 0).then(|| b.conv_norm(&format!("{n}.shortcut"), cin, cout, sk, sspec)),
            };
            stages[si].push(block);
            cin = cout;
        }
    }
    Backbone::Resnet { stem, stages }
}
