use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::laplacian::{LaplacianBundle, SurfaceOperator};
use super::operator::CsrMatrix;
use crate::error::{Error, Result};
use crate::ingest::Surface;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Network and optimiser settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MagnetHyperparams {
    pub q: f64,
    /// Chebyshev order; the filter uses polynomials `T_0..=T_order`.
    pub order: usize,
    pub layers: usize,
    pub hidden: usize,
    pub use_activation: bool,
    pub label_smoothing: f64,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub dropout: f64,
    pub initial_epochs: usize,
    pub retrain_epochs: usize,
    pub retrain_interval_snapshots: usize,
}

impl Default for MagnetHyperparams {
    fn default() -> Self {
        MagnetHyperparams {
            q: 0.25,
            order: 2,
            layers: 2,
            hidden: 64,
            use_activation: false,
            label_smoothing: 0.19,
            learning_rate: 0.003,
            weight_decay: 1e-4,
            dropout: 0.3,
            initial_epochs: 150,
            retrain_epochs: 30,
            retrain_interval_snapshots: 38,
        }
    }
}

impl MagnetHyperparams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(0.0..=0.25).contains(&self.q) {
            return bad("q must lie in [0, 0.25]");
        }
        if self.order < 1 || self.layers < 1 || self.hidden < 1 {
            return bad("order, layers and hidden must be at least 1");
        }
        if !(0.0..=0.2).contains(&self.label_smoothing) {
            return bad("label_smoothing must lie in [0, 0.2]");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        if !(self.learning_rate > 0.0) || !(self.weight_decay >= 0.0) {
            return bad("learning_rate must be positive and weight_decay non-negative");
        }
        if self.retrain_interval_snapshots == 0 {
            return bad("retrain_interval_snapshots must be positive");
        }
        Ok(())
    }

    /// Two-class smoothed target for a hard label in `{0, 1}`.
    pub fn smoothed_target(&self, label: f64) -> f64 {
        label * (1.0 - self.label_smoothing) + self.label_smoothing / 2.0
    }
}

/// First and second Adam moments for one tensor. Complex tensors keep the
/// real and imaginary parts' statistics in the matching components.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments<T> {
    pub first: T,
    pub second: T,
}

/// Trainable parameters plus optimiser state.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    pub input_dim: usize,
    /// `filters[layer][k]` maps `F_in × F_out` channels.
    pub filters: Vec<Vec<DMatrix<Complex64>>>,
    pub head_weight: DMatrix<f64>,
    pub head_bias: [f64; 2],
    pub filter_moments: Vec<Vec<Moments<DMatrix<Complex64>>>>,
    pub head_weight_moments: Moments<DMatrix<f64>>,
    pub head_bias_moments: Moments<[f64; 2]>,
    pub adam_steps: u64,
    pub epochs_done: u64,
    pub seed: u64,
}

impl ModelState {
    /// Filters drawn with variance `1/(F_in (order+1))` split evenly over the
    /// real and imaginary parts; the head starts at zero.
    pub fn new(input_dim: usize, hp: &MagnetHyperparams, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut filters = Vec::with_capacity(hp.layers);
        let mut fan_in = input_dim;
        for _ in 0..hp.layers {
            let sd = (0.5 / (fan_in.max(1) * (hp.order + 1)) as f64).sqrt();
            let normal = Normal::new(0.0, sd).expect("positive standard deviation");
            let layer = (0..=hp.order)
                .map(|_| DMatrix::from_fn(fan_in, hp.hidden, |_, _| Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng))))
                .collect();
            filters.push(layer);
            fan_in = hp.hidden;
        }
        let head_cols = 4 * hp.hidden;
        let filter_moments = filters
            .iter()
            .map(|layer: &Vec<DMatrix<Complex64>>| {
                layer
                    .iter()
                    .map(|m| Moments {
                        first: DMatrix::zeros(m.nrows(), m.ncols()),
                        second: DMatrix::zeros(m.nrows(), m.ncols()),
                    })
                    .collect()
            })
            .collect();
        ModelState {
            input_dim,
            filters,
            head_weight: DMatrix::zeros(2, head_cols),
            head_bias: [0.0; 2],
            filter_moments,
            head_weight_moments: Moments {
                first: DMatrix::zeros(2, head_cols),
                second: DMatrix::zeros(2, head_cols),
            },
            head_bias_moments: Moments {
                first: [0.0; 2],
                second: [0.0; 2],
            },
            adam_steps: 0,
            epochs_done: 0,
            seed,
        }
    }

    pub fn layers(&self) -> usize {
        self.filters.len()
    }

    pub fn order(&self) -> usize {
        self.filters.first().map_or(0, |l| l.len() - 1)
    }

    /// Output channels of the last layer.
    pub fn width(&self) -> usize {
        self.filters.last().map_or(self.input_dim, |l| l[0].ncols())
    }

    /// Checks internal shape agreement.
    pub fn check_shapes(&self) -> Result<()> {
        let mut fan_in = self.input_dim;
        let order = self.order();
        for (l, layer) in self.filters.iter().enumerate() {
            if layer.len() != order + 1 {
                return Err(Error::Shape(format!("layer {l} has {} filter terms, expected {}", layer.len(), order + 1)));
            }
            let out = layer[0].ncols();
            for m in layer {
                if m.nrows() != fan_in || m.ncols() != out {
                    return Err(Error::Shape(format!("layer {l} filter is {}x{}, expected {fan_in}x{out}", m.nrows(), m.ncols())));
                }
            }
            fan_in = out;
        }
        if self.head_weight.nrows() != 2 || self.head_weight.ncols() != 4 * self.width() {
            return Err(Error::Shape(format!(
                "head is {}x{}, expected 2x{}",
                self.head_weight.nrows(),
                self.head_weight.ncols(),
                4 * self.width()
            )));
        }
        Ok(())
    }
}

/// Per-sample training target: a set between `u` and `v` on `surface`,
/// `label = 1` when `u` took it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SetSample {
    pub u: usize,
    pub v: usize,
    pub surface: Surface,
    pub label: f64,
}

struct LayerCache {
    terms: Vec<DMatrix<Complex64>>,
    pre_activation: Option<DMatrix<Complex64>>,
}

/// Result of a forward pass on one surface.
pub struct Forward {
    layers: Vec<LayerCache>,
    /// Dropout multipliers (already scaled by `1/(1-p)`), when active.
    mask: Option<DMatrix<f64>>,
    /// Unwound real embedding `[Re | Im]`, after dropout if active.
    pub embedding: DMatrix<f64>,
}

fn chebyshev_terms(op: &CsrMatrix, z: DMatrix<Complex64>, order: usize) -> Vec<DMatrix<Complex64>> {
    let mut terms = Vec::with_capacity(order + 1);
    terms.push(z);
    if order >= 1 {
        let t1 = op.mul_dense(&terms[0]);
        terms.push(t1);
    }
    for k in 2..=order {
        let t = op.mul_dense(&terms[k - 1]) * Complex64::new(2.0, 0.0) - &terms[k - 2];
        terms.push(t);
    }
    terms
}

fn complex_relu(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    m.map(|z| if z.re >= 0.0 { z } else { ZERO })
}

/// Forward pass on one surface operator. `dropout_rng` switches on training
/// mode.
pub fn forward(
    op: &SurfaceOperator,
    features: &DMatrix<f64>,
    state: &ModelState,
    hp: &MagnetHyperparams,
    dropout_rng: Option<&mut ChaCha8Rng>,
) -> Result<Forward> {
    let n = op.n_nodes();
    if features.nrows() != n || features.ncols() != state.input_dim {
        return Err(Error::Shape(format!(
            "features are {}x{}, expected {n}x{}",
            features.nrows(),
            features.ncols(),
            state.input_dim
        )));
    }
    state.check_shapes()?;
    let mut z: DMatrix<Complex64> = features.map(|x| Complex64::new(x, 0.0));
    let mut layers = Vec::with_capacity(state.layers());
    for layer in &state.filters {
        let terms = chebyshev_terms(&op.scaled, z, layer.len() - 1);
        let mut out = DMatrix::zeros(n, layer[0].ncols());
        for (t, theta) in terms.iter().zip(layer) {
            out += t * theta;
        }
        let (next, pre_activation) = if hp.use_activation {
            (complex_relu(&out), Some(out))
        } else {
            (out, None)
        };
        layers.push(LayerCache { terms, pre_activation });
        z = next;
    }
    let width = z.ncols();
    let mut embedding = DMatrix::from_fn(n, 2 * width, |i, j| if j < width { z[(i, j)].re } else { z[(i, j - width)].im });
    let mask = match dropout_rng {
        Some(rng) if hp.dropout > 0.0 => {
            let keep = 1.0 - hp.dropout;
            let mask = DMatrix::from_fn(n, 2 * width, |_, _| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 });
            embedding.component_mul_assign(&mask);
            Some(mask)
        }
        _ => None,
    };
    Ok(Forward { layers, mask, embedding })
}

fn head_scores(embedding: &DMatrix<f64>, a: usize, b: usize, state: &ModelState) -> [f64; 2] {
    let w2 = embedding.ncols();
    let mut s = state.head_bias;
    for (r, out) in s.iter_mut().enumerate() {
        let mut acc = 0.0;
        for j in 0..w2 {
            acc += state.head_weight[(r, j)] * embedding[(a, j)] + state.head_weight[(r, w2 + j)] * embedding[(b, j)];
        }
        *out += acc;
    }
    s
}

fn softmax2(s: [f64; 2]) -> [f64; 2] {
    let m = s[0].max(s[1]);
    let e0 = (s[0] - m).exp();
    let e1 = (s[1] - m).exp();
    [e0 / (e0 + e1), e1 / (e0 + e1)]
}

/// Order-dependent probability vector for the ordered pair `(u, v)`.
pub fn edge_probability(embedding: &DMatrix<f64>, u: usize, v: usize, state: &ModelState) -> [f64; 2] {
    softmax2(head_scores(embedding, u, v, state))
}

/// Order-symmetrised probability that `u` wins a set against `v`.
pub fn set_win_probability(embedding: &DMatrix<f64>, u: usize, v: usize, state: &ModelState) -> f64 {
    0.5 * (edge_probability(embedding, u, v, state)[0] + edge_probability(embedding, v, u, state)[1])
}

/// Gradients for every trainable tensor, laid out like [`ModelState`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub filters: Vec<Vec<DMatrix<Complex64>>>,
    pub head_weight: DMatrix<f64>,
    pub head_bias: [f64; 2],
}

impl Gradients {
    fn zeros_like(state: &ModelState) -> Self {
        Gradients {
            filters: state
                .filters
                .iter()
                .map(|l| l.iter().map(|m| DMatrix::zeros(m.nrows(), m.ncols())).collect())
                .collect(),
            head_weight: DMatrix::zeros(state.head_weight.nrows(), state.head_weight.ncols()),
            head_bias: [0.0; 2],
        }
    }
}

/// Smoothed binary cross-entropy of the symmetrised set probabilities and
/// its gradients. Complex gradients follow `∂L/∂Re + i ∂L/∂Im`.
///
/// With `dropout_seed` set, each surface draws its dropout mask from a
/// generator seeded with it on stream `surface.index()`.
pub fn loss_and_gradients(
    bundle: &LaplacianBundle,
    features: &DMatrix<f64>,
    samples: &[SetSample],
    state: &ModelState,
    hp: &MagnetHyperparams,
    dropout_seed: Option<u64>,
) -> Result<(f64, Gradients)> {
    if samples.is_empty() {
        return Err(Error::NoTrainingSamples);
    }
    let n_samples = samples.len() as f64;
    let mut grads = Gradients::zeros_like(state);
    let mut loss = 0.0;
    for surface in Surface::ALL {
        let subset: Vec<&SetSample> = samples.iter().filter(|s| s.surface == surface).collect();
        if subset.is_empty() {
            continue;
        }
        let op = &bundle.surfaces[surface.index()];
        let mut rng = dropout_seed.map(|seed| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            r.set_stream(surface.index() as u64);
            r
        });
        let fwd = forward(op, features, state, hp, rng.as_mut())?;
        let h = &fwd.embedding;
        let w2 = h.ncols();
        let mut d_emb = DMatrix::<f64>::zeros(h.nrows(), w2);
        for s in subset {
            let z_uv = edge_probability(h, s.u, s.v, state);
            let z_vu = edge_probability(h, s.v, s.u, state);
            let p = 0.5 * (z_uv[0] + z_vu[1]);
            let y = hp.smoothed_target(s.label);
            let pc = p.clamp(1e-12, 1.0 - 1e-12);
            loss -= (y * pc.ln() + (1.0 - y) * (1.0 - pc).ln()) / n_samples;
            let dp = (p - y) / (p * (1.0 - p)) / n_samples;
            let g_uv = 0.5 * dp * z_uv[0] * z_uv[1];
            let g_vu = 0.5 * dp * z_vu[0] * z_vu[1];
            // d/ds of the two score vectors
            for (a, b, ds) in [(s.u, s.v, [g_uv, -g_uv]), (s.v, s.u, [-g_vu, g_vu])] {
                for r in 0..2 {
                    grads.head_bias[r] += ds[r];
                    for j in 0..w2 {
                        grads.head_weight[(r, j)] += ds[r] * h[(a, j)];
                        grads.head_weight[(r, w2 + j)] += ds[r] * h[(b, j)];
                        d_emb[(a, j)] += ds[r] * state.head_weight[(r, j)];
                        d_emb[(b, j)] += ds[r] * state.head_weight[(r, w2 + j)];
                    }
                }
            }
        }
        if let Some(mask) = &fwd.mask {
            d_emb.component_mul_assign(mask);
        }
        backward_filters(&op.scaled, &fwd, &d_emb, state, &mut grads);
    }
    Ok((loss, grads))
}

fn backward_filters(op: &CsrMatrix, fwd: &Forward, d_emb: &DMatrix<f64>, state: &ModelState, grads: &mut Gradients) {
    let width = d_emb.ncols() / 2;
    let mut g = DMatrix::from_fn(d_emb.nrows(), width, |i, j| Complex64::new(d_emb[(i, j)], d_emb[(i, width + j)]));
    for l in (0..state.layers()).rev() {
        let cache = &fwd.layers[l];
        if let Some(pre) = &cache.pre_activation {
            g.zip_apply(pre, |gz, p| {
                if p.re < 0.0 {
                    *gz = ZERO;
                }
            });
        }
        let layer = &state.filters[l];
        let mut d_terms: Vec<DMatrix<Complex64>> = Vec::with_capacity(layer.len());
        for (k, theta) in layer.iter().enumerate() {
            grads.filters[l][k] += cache.terms[k].adjoint() * &g;
            if l > 0 {
                d_terms.push(&g * theta.adjoint());
            }
        }
        if l == 0 {
            break;
        }
        for k in (2..d_terms.len()).rev() {
            let back = op.mul_dense(&d_terms[k]) * Complex64::new(2.0, 0.0);
            d_terms[k - 1] += back;
            let dk = d_terms[k].clone();
            d_terms[k - 2] -= dk;
        }
        let mut dz = d_terms[0].clone();
        if d_terms.len() > 1 {
            dz += op.mul_dense(&d_terms[1]);
        }
        g = dz;
    }
}

/// Inference embeddings for all three surfaces (dropout off).
pub fn embed_all(bundle: &LaplacianBundle, features: &DMatrix<f64>, state: &ModelState, hp: &MagnetHyperparams) -> Result<[DMatrix<f64>; 3]> {
    let run = |s: Surface| forward(&bundle.surfaces[s.index()], features, state, hp, None).map(|f| f.embedding);
    Ok([run(Surface::Hard)?, run(Surface::Clay)?, run(Surface::Grass)?])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::Edge;

    fn small_hp() -> MagnetHyperparams {
        MagnetHyperparams {
            hidden: 3,
            dropout: 0.0,
            ..MagnetHyperparams::default()
        }
    }

    fn fixture() -> (LaplacianBundle, DMatrix<f64>) {
        let e = |from, to, weight| Edge { from, to, weight };
        let hard = vec![e(0, 1, 0.8), e(1, 2, 0.6), e(2, 0, 0.7), e(3, 4, 0.9)];
        let clay = vec![e(1, 0, 0.55), e(4, 5, 0.75)];
        let bundle = LaplacianBundle {
            surfaces: [
                SurfaceOperator::new(6, &hard, 0.25),
                SurfaceOperator::new(6, &clay, 0.25),
                SurfaceOperator::new(6, &[], 0.25),
            ],
        };
        let x = DMatrix::from_fn(6, 4, |i, j| ((i * 7 + j * 3) % 5) as f64 / 5.0 + 0.1);
        (bundle, x)
    }

    #[test]
    fn zero_head_gives_even_split() {
        let (bundle, x) = fixture();
        let hp = small_hp();
        let state = ModelState::new(4, &hp, 7);
        let f = forward(&bundle.surfaces[0], &x, &state, &hp, None).unwrap();
        assert_eq!(edge_probability(&f.embedding, 0, 1, &state), [0.5, 0.5]);
        assert_eq!(set_win_probability(&f.embedding, 0, 1, &state), 0.5);
    }

    #[test]
    fn symmetrised_probabilities_complement() {
        let (bundle, x) = fixture();
        let hp = small_hp();
        let mut state = ModelState::new(4, &hp, 3);
        state.head_weight = DMatrix::from_fn(2, 12, |r, c| ((r * 13 + c * 5) % 7) as f64 - 3.0);
        state.head_bias = [0.3, -0.1];
        let f = forward(&bundle.surfaces[0], &x, &state, &hp, None).unwrap();
        for u in 0..6 {
            for v in 0..6 {
                let z = edge_probability(&f.embedding, u, v, &state);
                assert!((z[0] + z[1] - 1.0).abs() < 1e-12);
                let s = set_win_probability(&f.embedding, u, v, &state) + set_win_probability(&f.embedding, v, u, &state);
                assert!((s - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn first_order_identity_filter_is_linear_map() {
        let (bundle, x) = fixture();
        let hp = MagnetHyperparams {
            order: 1,
            layers: 1,
            hidden: 4,
            ..small_hp()
        };
        let mut state = ModelState::new(4, &hp, 1);
        state.filters[0][0] = DMatrix::identity(4, 4) * Complex64::new(2.0, 0.0);
        state.filters[0][1] = DMatrix::zeros(4, 4);
        let f = forward(&bundle.surfaces[0], &x, &state, &hp, None).unwrap();
        for i in 0..6 {
            for j in 0..4 {
                assert_eq!(f.embedding[(i, j)], 2.0 * x[(i, j)]);
                assert_eq!(f.embedding[(i, 4 + j)], 0.0);
            }
        }
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let (bundle, _) = fixture();
        let hp = small_hp();
        let state = ModelState::new(4, &hp, 1);
        let bad = DMatrix::zeros(6, 5);
        assert!(matches!(forward(&bundle.surfaces[0], &bad, &state, &hp, None), Err(Error::Shape(_))));
    }

    #[test]
    fn smoothing_targets() {
        let hp = MagnetHyperparams::default();
        assert!((hp.smoothed_target(1.0) - 0.905).abs() < 1e-15);
        assert!((hp.smoothed_target(0.0) - 0.095).abs() < 1e-15);
    }

    #[test]
    fn empty_samples_rejected() {
        let (bundle, x) = fixture();
        let hp = small_hp();
        let state = ModelState::new(4, &hp, 1);
        assert!(matches!(loss_and_gradients(&bundle, &x, &[], &state, &hp, None), Err(Error::NoTrainingSamples)));
    }
}
