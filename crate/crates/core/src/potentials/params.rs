use crate::error::{Error, Result};
use crate::labels::{Dims, Side};

/// Number of entries in a hand-detection score vector
/// ({Background, LeftHand, RightHand}).
pub const HAND_SCORE_DIMS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Block {
    Alpha,
    Beta,
    Gamma,
    Zeta,
    Eta,
    Lambda,
    Xi,
}

impl Block {
    pub const ALL: [Block; 7] = [
        Block::Alpha,
        Block::Beta,
        Block::Gamma,
        Block::Zeta,
        Block::Eta,
        Block::Lambda,
        Block::Xi,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Block::Alpha => "alpha",
            Block::Beta => "beta",
            Block::Gamma => "gamma",
            Block::Zeta => "zeta",
            Block::Eta => "eta",
            Block::Lambda => "lambda",
            Block::Xi => "xi",
        }
    }
}

/// Offsets of each parameter block inside the flat value vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    dims: Dims,
    starts: [usize; 8],
}

impl Layout {
    pub fn new(dims: Dims) -> Self {
        let Dims {
            actions: a,
            grasps: g,
            attributes: o,
        } = dims;
        let sizes = [
            a * (g + 1) * (g + 1) * (o + 1) * (o + 1),
            g * o,
            2,
            2 * HAND_SCORE_DIMS,
            g * g,
            o * o,
            a * a,
        ];
        let mut starts = [0; 8];
        for (i, s) in sizes.iter().enumerate() {
            starts[i + 1] = starts[i] + s;
        }
        Layout { dims, starts }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.starts[7]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self, block: Block) -> std::ops::Range<usize> {
        let i = block as usize;
        self.starts[i]..self.starts[i + 1]
    }

    #[inline]
    pub fn alpha_index(&self, k: usize, i: usize, j: usize, m: usize, n: usize) -> usize {
        let g1 = self.dims.grasps + 1;
        let o1 = self.dims.attributes + 1;
        (((k * g1 + i) * g1 + j) * o1 + m) * o1 + n
    }

    /// Stride between consecutive actions in the alpha block.
    pub fn alpha_action_stride(&self) -> usize {
        let g1 = self.dims.grasps + 1;
        let o1 = self.dims.attributes + 1;
        g1 * g1 * o1 * o1
    }

    /// `i`, `m` are 1-based (non-null) labels.
    #[inline]
    pub fn beta_index(&self, i: usize, m: usize) -> usize {
        self.starts[1] + (i - 1) * self.dims.attributes + (m - 1)
    }

    pub fn gamma_index(&self, side: Side) -> usize {
        self.starts[2] + side.index()
    }

    pub fn zeta_index(&self, side: Side, d: usize) -> usize {
        self.starts[3] + side.index() * HAND_SCORE_DIMS + d
    }

    /// Row start for grasp `i` (1-based).
    pub fn eta_row(&self, i: usize) -> usize {
        self.starts[4] + (i - 1) * self.dims.grasps
    }

    /// Row start for attribute `m` (1-based).
    pub fn lambda_row(&self, m: usize) -> usize {
        self.starts[5] + (m - 1) * self.dims.attributes
    }

    /// Row start for action `k` (0-based).
    pub fn xi_row(&self, k: usize) -> usize {
        self.starts[6] + k * self.dims.actions
    }
}

/// The full parameter set weighting every potential, stored as one flat
/// vector so the learner can treat it as a point in ℝⁿ.
///
/// * alpha: `N_a × (N_g+1)² × (N_o+1)²` functional-context table, indexed by
///   raw labels including the null classes
/// * beta: `N_g × N_o` physical-context table over non-null labels
/// * gamma: spatial-context weight per side
/// * zeta: per-side weights over hand-detection scores
/// * eta / lambda / xi: per-class weight rows over grasp / attribute /
///   action score vectors
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    layout: Layout,
    values: Vec<f64>,
}

impl ModelParams {
    pub fn zeros(dims: Dims) -> Self {
        let layout = Layout::new(dims);
        ModelParams {
            values: vec![0.0; layout.len()],
            layout,
        }
    }

    pub fn from_values(dims: Dims, values: Vec<f64>) -> Result<Self> {
        let layout = Layout::new(dims);
        if values.len() != layout.len() {
            return Err(Error::DimensionMismatch {
                what: "parameter vector".into(),
                expected: layout.len(),
                found: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("parameters must be finite".into()));
        }
        Ok(ModelParams { layout, values })
    }

    pub fn dims(&self) -> Dims {
        self.layout.dims
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn block(&self, block: Block) -> &[f64] {
        &self.values[self.layout.range(block)]
    }

    pub fn block_mut(&mut self, block: Block) -> &mut [f64] {
        let r = self.layout.range(block);
        &mut self.values[r]
    }

    pub fn check_dims(&self, dims: Dims) -> Result<()> {
        let own = self.dims();
        for (what, expected, found) in [
            ("actions", dims.actions, own.actions),
            ("grasps", dims.grasps, own.grasps),
            ("attributes", dims.attributes, own.attributes),
        ] {
            if expected != found {
                return Err(Error::DimensionMismatch {
                    what: format!("parameter {what}"),
                    expected,
                    found,
                });
            }
        }
        Ok(())
    }

    #[inline]
    pub fn alpha(&self, k: usize, i: usize, j: usize, m: usize, n: usize) -> f64 {
        self.values[self.layout.alpha_index(k, i, j, m, n)]
    }

    pub fn set_alpha(&mut self, k: usize, i: usize, j: usize, m: usize, n: usize, v: f64) {
        let idx = self.layout.alpha_index(k, i, j, m, n);
        self.values[idx] = v;
    }

    /// Alpha slice `[i][j][m][n]` for action `k`.
    pub fn alpha_slice(&self, k: usize) -> &[f64] {
        let stride = self.layout.alpha_action_stride();
        &self.values[k * stride..(k + 1) * stride]
    }

    /// Zero for null labels.
    #[inline]
    pub fn beta(&self, i: usize, m: usize) -> f64 {
        if i == 0 || m == 0 {
            0.0
        } else {
            self.values[self.layout.beta_index(i, m)]
        }
    }

    pub fn set_beta(&mut self, i: usize, m: usize, v: f64) {
        let idx = self.layout.beta_index(i, m);
        self.values[idx] = v;
    }

    pub fn gamma(&self, side: Side) -> f64 {
        self.values[self.layout.gamma_index(side)]
    }

    pub fn set_gamma(&mut self, side: Side, v: f64) {
        let idx = self.layout.gamma_index(side);
        self.values[idx] = v;
    }

    pub fn zeta(&self, side: Side) -> &[f64] {
        let s = self.layout.zeta_index(side, 0);
        &self.values[s..s + HAND_SCORE_DIMS]
    }

    pub fn zeta_mut(&mut self, side: Side) -> &mut [f64] {
        let s = self.layout.zeta_index(side, 0);
        &mut self.values[s..s + HAND_SCORE_DIMS]
    }

    /// Weights for grasp `i ≥ 1`.
    pub fn eta(&self, i: usize) -> &[f64] {
        let s = self.layout.eta_row(i);
        &self.values[s..s + self.layout.dims.grasps]
    }

    pub fn eta_mut(&mut self, i: usize) -> &mut [f64] {
        let s = self.layout.eta_row(i);
        let n = self.layout.dims.grasps;
        &mut self.values[s..s + n]
    }

    /// Weights for attribute `m ≥ 1`.
    pub fn lambda(&self, m: usize) -> &[f64] {
        let s = self.layout.lambda_row(m);
        &self.values[s..s + self.layout.dims.attributes]
    }

    pub fn lambda_mut(&mut self, m: usize) -> &mut [f64] {
        let s = self.layout.lambda_row(m);
        let n = self.layout.dims.attributes;
        &mut self.values[s..s + n]
    }

    /// Weights for action `k`.
    pub fn xi(&self, k: usize) -> &[f64] {
        let s = self.layout.xi_row(k);
        &self.values[s..s + self.layout.dims.actions]
    }

    pub fn xi_mut(&mut self, k: usize) -> &mut [f64] {
        let s = self.layout.xi_row(k);
        let n = self.layout.dims.actions;
        &mut self.values[s..s + n]
    }

    pub fn squared_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    /// Zeroes the given blocks.
    pub fn clear(&mut self, blocks: &[Block]) {
        for &b in blocks {
            self.block_mut(b).fill(0.0);
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
