//! Synthetic datasets drawn from a known model.
//!
//! Labels come from a Gibbs chain over the context part of the potential
//! (alpha and beta). Evidence is rendered from the truth: each score vector
//! is `q · onehot(truth) + σ·ε`, where `q` is the IoU between the box the
//! classifier looks at and the true box. Overlapping candidates see nearly
//! the same pixels, so `ε` mixes a per-side draw shared by all candidates
//! with a per-candidate draw. Training frames carry evidence at the true
//! boxes only; test frames carry full candidate grids.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    apply_offsets, generate_candidates, iou, BoundingBox, CandidateGrid, OffsetVector,
};
use crate::io::FrameRecord;
use crate::labels::{Dims, LabelSpace, Side};
use crate::learning::TrainingFrame;
use crate::potentials::{
    EvidenceBundle, HandCandidate, ModelParams, ObjectCandidate, SceneState, SideState,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub actions: usize,
    pub grasps: usize,
    pub attributes: usize,
    pub train_frames: usize,
    pub test_frames: usize,
    /// Scale of the generating alpha and beta.
    pub sharpness: f64,
    /// Standard deviation σ of classifier score noise.
    pub evidence_noise: f64,
    /// Correlation of score noise between candidates of the same side.
    pub noise_correlation: f64,
    /// Pixel jitter of detected hand boxes; also sets offset-regression noise.
    pub box_noise: f64,
    pub seed: u64,
    /// Candidate grid for test-frame hand and object boxes.
    pub grid: CandidateGrid,
    pub burn_in: usize,
    /// Gibbs sweeps between recorded samples.
    pub thin: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            actions: 4,
            grasps: 5,
            attributes: 4,
            train_frames: 2000,
            test_frames: 500,
            sharpness: 3.0,
            evidence_noise: 0.6,
            noise_correlation: 0.9,
            box_noise: 2.0,
            seed: 0,
            grid: CandidateGrid::default(),
            burn_in: 500,
            thin: 10,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.actions == 0 || self.grasps == 0 || self.attributes == 0 {
            return bad("label-space sizes must be positive");
        }
        if !(self.sharpness > 0.0 && self.sharpness.is_finite()) {
            return bad("sharpness must be > 0");
        }
        if !(self.evidence_noise >= 0.0 && self.evidence_noise.is_finite()) {
            return bad("evidence_noise must be ≥ 0");
        }
        if !(0.0..=1.0).contains(&self.noise_correlation) {
            return bad("noise_correlation must lie in [0, 1]");
        }
        if !(self.box_noise >= 0.0 && self.box_noise.is_finite()) {
            return bad("box_noise must be ≥ 0");
        }
        if self.thin == 0 {
            return bad("thin must be ≥ 1");
        }
        self.grid.validate()
    }

    pub fn dims(&self) -> Dims {
        Dims {
            actions: self.actions,
            grasps: self.grasps,
            attributes: self.attributes,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthDataset {
    pub label_space: LabelSpace,
    /// The model the labels were drawn from, with evidence weights matched
    /// to the noise level.
    pub generating: ModelParams,
    pub train: Vec<FrameRecord>,
    pub test: Vec<FrameRecord>,
}

fn normal<R: Rng>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Random context tables of the given sharpness plus evidence weights
/// `1/σ²` (capped at 100) on the diagonal.
///
/// alpha is built from per-action grasp and attribute affinities (shared by
/// both sides, evenly spaced in [-1, 1]) plus a smaller unstructured part;
/// beta is i.i.d. normal.
pub fn generating_params<R: Rng>(
    rng: &mut R,
    dims: Dims,
    sharpness: f64,
    noise: f64,
) -> ModelParams {
    let (g1, o1) = (dims.grasps + 1, dims.attributes + 1);
    let s = sharpness;
    // each action ranks the non-null labels by its own permutation of one
    // shared profile, so label marginals stay flat and the information sits
    // in the co-occurrences
    let mut profile = |n: usize| -> Vec<Vec<f64>> {
        (0..dims.actions)
            .map(|_| {
                let mut ranks: Vec<usize> = (0..n).collect();
                ranks.shuffle(rng);
                let spread = |r: usize| {
                    if n > 1 {
                        2.0 * r as f64 / (n - 1) as f64 - 1.0
                    } else {
                        0.0
                    }
                };
                std::iter::once(0.0)
                    .chain(ranks.into_iter().map(spread))
                    .collect()
            })
            .collect()
    };
    let u = profile(dims.grasps);
    let v = profile(dims.attributes);
    let mut p = ModelParams::zeros(dims);
    for k in 0..dims.actions {
        for i in 0..g1 {
            for j in 0..g1 {
                for m in 0..o1 {
                    for n in 0..o1 {
                        let structured = u[k][i] + u[k][j] + v[k][m] + v[k][n];
                        p.set_alpha(k, i, j, m, n, s * (0.5 * structured + 0.25 * normal(rng)));
                    }
                }
            }
        }
    }
    for i in 1..=dims.grasps {
        for m in 1..=dims.attributes {
            p.set_beta(i, m, s * 0.5 * normal(rng));
        }
    }
    let w = 1.0 / (noise * noise).max(1e-2);
    for side in Side::BOTH {
        p.set_gamma(side, 1.0);
        p.zeta_mut(side)[side.detection_index()] = 1.0;
    }
    for i in 1..=dims.grasps {
        p.eta_mut(i)[i - 1] = w;
    }
    for m in 1..=dims.attributes {
        p.lambda_mut(m)[m - 1] = w;
    }
    for k in 0..dims.actions {
        p.xi_mut(k)[k] = w;
    }
    p
}

/// Label tuples drawn from `exp(alpha + beta)` by block Gibbs sampling: the
/// action, then each side's (grasp, attribute) pair. A side is either null
/// or has both a grasp and an attribute.
pub fn sample_labels<R: Rng>(
    rng: &mut R,
    params: &ModelParams,
    count: usize,
    burn_in: usize,
    thin: usize,
) -> Vec<(usize, [(usize, usize); 2])> {
    let dims = params.dims();
    let mut options = vec![(0, 0)];
    for g in 1..=dims.grasps {
        options.extend((1..=dims.attributes).map(|m| (g, m)));
    }
    let score = |k: usize, l: (usize, usize), r: (usize, usize)| {
        params.alpha(k, l.0, r.0, l.1, r.1) + params.beta(l.0, l.1) + params.beta(r.0, r.1)
    };
    let mut sides = [(0, 0), (0, 0)];
    let mut weights = Vec::new();
    let mut out = Vec::with_capacity(count);
    let mut sweep = 0;
    while out.len() < count {
        let logits: Vec<f64> = (0..dims.actions)
            .map(|a| score(a, sides[0], sides[1]))
            .collect();
        let k = draw(rng, &logits, &mut weights);
        let logits: Vec<f64> = options.iter().map(|&o| score(k, o, sides[1])).collect();
        sides[0] = options[draw(rng, &logits, &mut weights)];
        let logits: Vec<f64> = options.iter().map(|&o| score(k, sides[0], o)).collect();
        sides[1] = options[draw(rng, &logits, &mut weights)];
        sweep += 1;
        if sweep > burn_in && (sweep - burn_in).is_multiple_of(thin) {
            out.push((k, sides));
        }
    }
    out
}

/// Index drawn with probability proportional to `exp(logits)`.
fn draw<R: Rng>(rng: &mut R, logits: &[f64], weights: &mut Vec<f64>) -> usize {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    weights.clear();
    weights.extend(logits.iter().map(|x| (x - m).exp()));
    let total: f64 = weights.iter().sum();
    let mut u = rng.random_range(0.0..total);
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    weights.len() - 1
}

fn noisy_onehot<R: Rng>(rng: &mut R, n: usize, hot: Option<usize>, q: f64, sigma: f64) -> Vec<f64> {
    (0..n)
        .map(|i| if Some(i) == hot { q } else { 0.0 } + sigma * normal(rng))
        .collect()
}

/// Score noise for one side: `rho · shared + sqrt(1 − rho²) · own`.
struct SideNoise {
    grasp: Vec<f64>,
    attribute: Vec<f64>,
    rho: f64,
}

impl SideNoise {
    fn draw<R: Rng>(rng: &mut R, dims: Dims, rho: f64) -> Self {
        SideNoise {
            grasp: (0..dims.grasps).map(|_| normal(rng)).collect(),
            attribute: (0..dims.attributes).map(|_| normal(rng)).collect(),
            rho,
        }
    }

    fn scores<R: Rng>(
        &self,
        rng: &mut R,
        shared: &[f64],
        hot: usize,
        q: f64,
        sigma: f64,
    ) -> Vec<f64> {
        let own = (1.0 - self.rho * self.rho).sqrt();
        shared
            .iter()
            .enumerate()
            .map(|(i, e)| {
                let signal = if i == hot { q } else { 0.0 };
                signal + sigma * (self.rho * e + own * normal(rng))
            })
            .collect()
    }
}

fn hand_scores<R: Rng>(rng: &mut R, side: Side, q: f64, sigma: f64) -> [f64; 3] {
    let s = (0.75 + 0.25 * q + 0.05 * sigma * normal(rng)).clamp(0.0, 1.0);
    let mut phi = [(1.0 - s) / 2.0; 3];
    phi[side.detection_index()] = s;
    phi
}

struct SideGeometry {
    hand: BoundingBox,
    object: BoundingBox,
    predicted_offset: OffsetVector,
}

fn side_geometry<R: Rng>(rng: &mut R, side: Side, box_noise: f64) -> SideGeometry {
    let (base_x, dir) = match side {
        Side::Left => (200.0, 1.0),
        Side::Right => (440.0, -1.0),
    };
    let hand = BoundingBox {
        cx: base_x + rng.random_range(-30.0..30.0),
        cy: 300.0 + rng.random_range(-30.0..30.0),
        w: rng.random_range(70.0..100.0),
        h: rng.random_range(80.0..110.0),
    };
    let truth = OffsetVector {
        nx: dir * rng.random_range(0.3..0.7),
        ny: rng.random_range(-0.4..0.0),
        nw: rng.random_range(0.6..1.4),
        nh: rng.random_range(0.6..1.4),
    };
    let object = apply_offsets(&hand, &truth);
    let sx = box_noise / hand.w;
    let sy = box_noise / hand.h;
    let predicted_offset = OffsetVector {
        nx: truth.nx + sx * normal(rng),
        ny: truth.ny + sy * normal(rng),
        nw: (truth.nw + sx * normal(rng)).max(0.1),
        nh: (truth.nh + sy * normal(rng)).max(0.1),
    };
    SideGeometry {
        hand,
        object,
        predicted_offset,
    }
}

fn jitter<R: Rng>(rng: &mut R, b: &BoundingBox, px: f64) -> BoundingBox {
    BoundingBox {
        cx: b.cx + px * normal(rng),
        cy: b.cy + px * normal(rng),
        w: (b.w + px * normal(rng)).max(5.0),
        h: (b.h + px * normal(rng)).max(5.0),
    }
}

/// Renders one frame. With `candidates` the evidence holds the full grid
/// around a jittered hand detection; otherwise only the true boxes.
fn render<R: Rng>(
    rng: &mut R,
    cfg: &SynthConfig,
    dims: Dims,
    labels: (usize, [(usize, usize); 2]),
    candidates: bool,
) -> (EvidenceBundle, SceneState) {
    let sigma = cfg.evidence_noise;
    let (k, sides) = labels;
    let mut ev = EvidenceBundle::new(noisy_onehot(rng, dims.actions, Some(k), 1.0, sigma));
    let mut truth = SceneState::new(k);
    for side in Side::BOTH {
        // geometry is drawn for both sides so the stream does not depend on
        // the labels
        let geo = side_geometry(rng, side, cfg.box_noise);
        let noise = SideNoise::draw(rng, dims, cfg.noise_correlation);
        let (g, m) = sides[side.index()];
        if g == 0 {
            continue;
        }
        *truth.side_mut(side) = SideState {
            grasp: g,
            attribute: m,
            hand: Some(geo.hand),
            object: Some(geo.object),
        };
        if !candidates {
            ev.side_mut(side).push(HandCandidate {
                bbox: geo.hand,
                phi_h: hand_scores(rng, side, 1.0, sigma),
                phi_g: noise.scores(rng, &noise.grasp, g - 1, 1.0, sigma),
                offset: Some(geo.predicted_offset),
                objects: vec![ObjectCandidate {
                    bbox: geo.object,
                    phi_o: noise.scores(rng, &noise.attribute, m - 1, 1.0, sigma),
                }],
            });
            continue;
        }
        let detected = jitter(rng, &geo.hand, cfg.box_noise);
        for hb in generate_candidates(&detected, &cfg.grid) {
            let qh = iou(&hb, &geo.hand);
            let reference = apply_offsets(&hb, &geo.predicted_offset);
            let objects = generate_candidates(&reference, &cfg.grid)
                .into_iter()
                .map(|ob| {
                    let qo = iou(&ob, &geo.object);
                    ObjectCandidate {
                        bbox: ob,
                        phi_o: noise.scores(rng, &noise.attribute, m - 1, qo, sigma),
                    }
                })
                .collect();
            ev.side_mut(side).push(HandCandidate {
                bbox: hb,
                phi_h: hand_scores(rng, side, qh, sigma),
                phi_g: noise.scores(rng, &noise.grasp, g - 1, qh, sigma),
                offset: Some(geo.predicted_offset),
                objects,
            });
        }
    }
    (ev, truth)
}

/// Deterministic in `config`. Labels use their own random stream, so
/// changing only the noise levels keeps every frame's labels and boxes.
pub fn synth_generate(config: &SynthConfig) -> Result<SynthDataset> {
    config.validate()?;
    let dims = config.dims();
    let label_space = LabelSpace::synthetic(dims.actions, dims.grasps, dims.attributes)?;

    let mut model_rng = ChaCha8Rng::seed_from_u64(config.seed);
    model_rng.set_stream(0);
    let generating = generating_params(
        &mut model_rng,
        dims,
        config.sharpness,
        config.evidence_noise,
    );
    let mut label_rng = ChaCha8Rng::seed_from_u64(config.seed);
    label_rng.set_stream(1);
    let n = config.train_frames + config.test_frames;
    let labels = sample_labels(&mut label_rng, &generating, n, config.burn_in, config.thin);

    let mut geo_rng = ChaCha8Rng::seed_from_u64(config.seed);
    geo_rng.set_stream(2);
    let mut train = Vec::with_capacity(config.train_frames);
    let mut test = Vec::with_capacity(config.test_frames);
    for (i, l) in labels.into_iter().enumerate() {
        let is_train = i < config.train_frames;
        let (evidence, truth) = render(&mut geo_rng, config, dims, l, !is_train);
        let rec = FrameRecord {
            frame_id: format!("{}{:05}", if is_train { "train" } else { "test" }, i),
            evidence,
            truth: Some(truth),
        };
        if is_train {
            train.push(rec);
        } else {
            test.push(rec);
        }
    }
    Ok(SynthDataset {
        label_space,
        generating,
        train,
        test,
    })
}

/// Pairs evidence with its ground truth for learning.
pub fn to_training(record: &FrameRecord) -> Result<TrainingFrame> {
    let truth = record.truth.ok_or_else(|| {
        Error::MissingEvidence(format!("frame `{}` has no ground truth", record.frame_id))
    })?;
    Ok(TrainingFrame {
        evidence: record.evidence.clone(),
        truth,
    })
}

pub fn to_training_set(records: &[FrameRecord]) -> Result<Vec<TrainingFrame>> {
    records.iter().map(to_training).collect()
}
