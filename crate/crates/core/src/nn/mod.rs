//! Dense feed-forward networks with analytic reverse-mode gradients.
//!
//! Parameters of a network live in a single flat `Vec<f64>`. Layer `l` owns a
//! row-major weight block of shape `(out, in)` followed by its bias vector.
//! [`GradBundle`] uses the identical layout, which keeps the optimizer, Polyak
//! averaging, projection and the finite-difference oracle agnostic of depth.
//!
//! Hidden layers use ELU, the output layer is linear.
//!
//! Batched entry points ([`Mlp::forward_batch`], [`Mlp::backward_batch`]) treat
//! shape mismatches as programmer error and panic. The single-sample entry
//! points validate shapes and return [`Result`].

mod adam;
mod gradcheck;

pub use adam::{Adam, LinearSchedule};
pub use gradcheck::{finite_diff_grad, finite_diff_slice, max_relative_error};

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exponential linear unit.
#[inline]
pub fn elu(x: f64) -> f64 {
    if x >= 0.0 {
        x
    } else {
        x.exp_m1()
    }
}

/// Derivative of [`elu`].
#[inline]
pub fn elu_prime(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        x.exp()
    }
}

/// `e^x` for `x` in `[-40, 0]`, written so the compiler can vectorize it.
///
/// Cody-Waite reduction `x = n ln2 + r`, `|r| <= ln2 / 2`, then a degree-12
/// Taylor polynomial; relative error stays within a few ulps.
#[inline(always)]
fn exp_nonpositive(x: f64) -> f64 {
    const LOG2E: f64 = std::f64::consts::LOG2_E;
    const LN2_HI: f64 = 6.931_471_803_691_238_2e-1;
    const LN2_LO: f64 = 1.908_214_929_270_587_7e-10;
    const SHIFTER: f64 = 6_755_399_441_055_744.0; // 1.5 * 2^52
    let t = x * LOG2E + SHIFTER;
    let n = t - SHIFTER;
    let r = (x - n * LN2_HI) - n * LN2_LO;
    let p = 1.0 / 479_001_600.0;
    let p = p * r + 1.0 / 39_916_800.0;
    let p = p * r + 1.0 / 3_628_800.0;
    let p = p * r + 1.0 / 362_880.0;
    let p = p * r + 1.0 / 40_320.0;
    let p = p * r + 1.0 / 5_040.0;
    let p = p * r + 1.0 / 720.0;
    let p = p * r + 1.0 / 120.0;
    let p = p * r + 1.0 / 24.0;
    let p = p * r + 1.0 / 6.0;
    let p = p * r + 0.5;
    let p = p * r + 1.0;
    let p = p * r + 1.0;
    // low mantissa bits of t hold n in two's complement
    let scale = f64::from_bits((t.to_bits().wrapping_add(1023)) << 52);
    p * scale
}

/// In-place [`elu`] over a slice. Below -40, `e^x - 1` rounds to -1 exactly.
fn elu_slice(values: &mut [f64]) {
    #[cfg(target_arch = "x86_64")]
    if std::arch::is_x86_feature_detected!("avx2") {
        // SAFETY: the required CPU feature was detected at runtime.
        unsafe { elu_slice_avx2(values) };
        return;
    }
    elu_slice_portable(values);
}

/// Same arithmetic as the portable kernel, compiled for wider vectors.
/// No fused multiply-add is introduced, so results are bit-identical.
#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn elu_slice_avx2(values: &mut [f64]) {
    elu_slice_portable(values);
}

#[inline(always)]
fn elu_slice_portable(values: &mut [f64]) {
    let elu_lane = |x: f64| {
        let c = if x < -40.0 { -40.0 } else { x };
        let c = if c > 0.0 { 0.0 } else { c };
        let e = exp_nonpositive(c) - 1.0;
        if x >= 0.0 {
            x
        } else {
            e
        }
    };
    let mut chunks = values.chunks_exact_mut(8);
    for chunk in &mut chunks {
        let mut lanes = [0.0; 8];
        lanes.copy_from_slice(chunk);
        chunk.copy_from_slice(&lanes.map(elu_lane));
    }
    for v in chunks.into_remainder() {
        *v = elu_lane(*v);
    }
}

/// Multi-layer perceptron with ELU hidden layers and a linear head.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    layer_sizes: Vec<usize>,
    params: Vec<f64>,
}

/// Gradient with the same flat layout as the parameters of an [`Mlp`].
#[derive(Clone, Debug, PartialEq)]
pub struct GradBundle(pub Vec<f64>);

impl GradBundle {
    pub fn zeros_like(net: &Mlp) -> Self {
        GradBundle(vec![0.0; net.num_params()])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|g| g.is_finite())
    }

    pub fn add_assign(&mut self, other: &GradBundle) {
        assert_eq!(self.0.len(), other.0.len(), "gradient layout mismatch");
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += b;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.0.iter_mut().for_each(|g| *g *= factor);
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, g| m.max(g.abs()))
    }
}

/// Activations recorded by a batched forward pass.
///
/// `activations[l]` is the input to layer `l`; the last entry is the network
/// output.
#[derive(Clone, Debug)]
pub struct Tape {
    activations: Vec<Array2<f64>>,
}

impl Tape {
    pub fn output(&self) -> &Array2<f64> {
        self.activations.last().expect("tape is never empty")
    }

    pub fn into_output(mut self) -> Array2<f64> {
        self.activations.pop().expect("tape is never empty")
    }
}

#[derive(Clone, Copy)]
struct LayerSpan {
    fan_in: usize,
    fan_out: usize,
    offset: usize,
}

impl LayerSpan {
    fn weight_len(&self) -> usize {
        self.fan_in * self.fan_out
    }

    fn len(&self) -> usize {
        self.weight_len() + self.fan_out
    }
}

impl Mlp {
    /// Builds a network with weights uniform in `±1/sqrt(fan_in)` and zero biases.
    pub fn new(layer_sizes: &[usize], seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::with_rng(layer_sizes, &mut rng)
    }

    pub fn with_rng<R: Rng + ?Sized>(layer_sizes: &[usize], rng: &mut R) -> Result<Self> {
        Self::validate_sizes(layer_sizes)?;
        let mut net = Self::zeros(layer_sizes)?;
        for span in net.spans() {
            let bound = 1.0 / (span.fan_in as f64).sqrt();
            for w in &mut net.params[span.offset..span.offset + span.weight_len()] {
                *w = rng.random_range(-bound..=bound);
            }
        }
        Ok(net)
    }

    /// All-zero network, mostly useful in tests.
    pub fn zeros(layer_sizes: &[usize]) -> Result<Self> {
        Self::validate_sizes(layer_sizes)?;
        let count = layer_sizes
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum();
        Ok(Mlp {
            layer_sizes: layer_sizes.to_vec(),
            params: vec![0.0; count],
        })
    }

    /// Rebuilds a network from a flat parameter vector (checkpoint loading).
    pub fn from_parts(layer_sizes: Vec<usize>, params: Vec<f64>) -> Result<Self> {
        let mut net = Self::zeros(&layer_sizes)?;
        if params.len() != net.params.len() {
            return Err(Error::Shape {
                expected: net.params.len(),
                got: params.len(),
            });
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Config("non-finite network parameter".into()));
        }
        net.params = params;
        Ok(net)
    }

    fn validate_sizes(layer_sizes: &[usize]) -> Result<()> {
        if layer_sizes.len() < 2 {
            return Err(Error::Config(format!(
                "an MLP needs at least an input and an output layer, got {layer_sizes:?}"
            )));
        }
        if layer_sizes.contains(&0) {
            return Err(Error::Config(format!(
                "layer sizes must be positive, got {layer_sizes:?}"
            )));
        }
        Ok(())
    }

    fn spans(&self) -> Vec<LayerSpan> {
        let mut offset = 0;
        self.layer_sizes
            .windows(2)
            .map(|w| {
                let span = LayerSpan {
                    fan_in: w[0],
                    fan_out: w[1],
                    offset,
                };
                offset += span.len();
                span
            })
            .collect()
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Weight matrix of layer `l`, shape `(fan_out, fan_in)`.
    pub fn weight(&self, layer: usize) -> ArrayView2<'_, f64> {
        let span = self.spans()[layer];
        ArrayView2::from_shape(
            (span.fan_out, span.fan_in),
            &self.params[span.offset..span.offset + span.weight_len()],
        )
        .unwrap()
    }

    pub fn bias(&self, layer: usize) -> ArrayView1<'_, f64> {
        let span = self.spans()[layer];
        let start = span.offset + span.weight_len();
        ArrayView1::from(&self.params[start..start + span.fan_out])
    }

    pub fn weight_mut(&mut self, layer: usize) -> ndarray::ArrayViewMut2<'_, f64> {
        let span = self.spans()[layer];
        ndarray::ArrayViewMut2::from_shape(
            (span.fan_out, span.fan_in),
            &mut self.params[span.offset..span.offset + span.weight_len()],
        )
        .unwrap()
    }

    pub fn bias_mut(&mut self, layer: usize) -> ndarray::ArrayViewMut1<'_, f64> {
        let span = self.spans()[layer];
        let start = span.offset + span.weight_len();
        ndarray::ArrayViewMut1::from(&mut self.params[start..start + span.fan_out])
    }

    pub fn num_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    /// Batched forward pass over rows of `input`, recording activations.
    pub fn forward_batch(&self, input: ArrayView2<'_, f64>) -> Tape {
        assert_eq!(input.ncols(), self.input_dim(), "input width mismatch");
        let spans = self.spans();
        let mut activations = Vec::with_capacity(spans.len() + 1);
        activations.push(input.to_owned());
        for (l, span) in spans.iter().enumerate() {
            let w = ArrayView2::from_shape(
                (span.fan_out, span.fan_in),
                &self.params[span.offset..span.offset + span.weight_len()],
            )
            .unwrap();
            let b_start = span.offset + span.weight_len();
            let b = ArrayView1::from(&self.params[b_start..b_start + span.fan_out]);
            let x: &Array2<f64> = &activations[l];
            // A single row goes through gemv. The gemm path allocates an aligned packing
            // buffer per call, and interleaving those with replay inserts fragments the heap.
            let mut z = if x.nrows() == 1 {
                w.dot(&x.row(0)).insert_axis(ndarray::Axis(0))
            } else {
                x.dot(&w.t())
            };
            z += &b;
            if l + 1 < spans.len() {
                match z.as_slice_memory_order_mut() {
                    Some(values) => elu_slice(values),
                    None => z.mapv_inplace(elu),
                }
            }
            activations.push(z);
        }
        Tape { activations }
    }

    /// Reverse pass for a tape produced by [`Mlp::forward_batch`].
    ///
    /// Returns the input cotangent and the parameter gradient summed over rows.
    pub fn backward_batch(
        &self,
        tape: &Tape,
        output_cotangent: ArrayView2<'_, f64>,
    ) -> (Array2<f64>, GradBundle) {
        let spans = self.spans();
        assert_eq!(tape.activations.len(), spans.len() + 1, "foreign tape");
        assert_eq!(
            output_cotangent.dim(),
            tape.output().dim(),
            "cotangent shape mismatch"
        );
        let mut grads = vec![0.0; self.params.len()];
        let mut delta = output_cotangent.to_owned();
        for l in (0..spans.len()).rev() {
            let span = spans[l];
            if l + 1 < spans.len() {
                // elu'(z) recovered from elu(z): 1 on the identity branch, elu(z)+1 otherwise.
                let act = &tape.activations[l + 1];
                ndarray::Zip::from(&mut delta).and(act).for_each(|d, &a| *d *= (a + 1.0).min(1.0));
            }
            let x = &tape.activations[l];
            let gw = delta.t().dot(x);
            let gb = delta.sum_axis(Axis(0));
            let w_end = span.offset + span.weight_len();
            // iter() walks logical row-major order whatever the memory layout
            grads[span.offset..w_end].iter_mut().zip(gw.iter()).for_each(|(g, &v)| *g = v);
            grads[w_end..w_end + span.fan_out].iter_mut().zip(gb.iter()).for_each(|(g, &v)| *g = v);
            let w = ArrayView2::from_shape((span.fan_out, span.fan_in), &self.params[span.offset..w_end])
                .unwrap();
            delta = delta.dot(&w);
        }
        (delta, GradBundle(grads))
    }

    /// Reverse pass that only propagates the cotangent to the input.
    pub fn backward_input(&self, tape: &Tape, output_cotangent: ArrayView2<'_, f64>) -> Array2<f64> {
        let spans = self.spans();
        assert_eq!(tape.activations.len(), spans.len() + 1, "foreign tape");
        assert_eq!(output_cotangent.dim(), tape.output().dim(), "cotangent shape mismatch");
        let mut delta = output_cotangent.to_owned();
        for l in (0..spans.len()).rev() {
            let span = spans[l];
            if l + 1 < spans.len() {
                let act = &tape.activations[l + 1];
                ndarray::Zip::from(&mut delta).and(act).for_each(|d, &a| *d *= (a + 1.0).min(1.0));
            }
            let w = ArrayView2::from_shape(
                (span.fan_out, span.fan_in),
                &self.params[span.offset..span.offset + span.weight_len()],
            )
            .unwrap();
            delta = delta.dot(&w);
        }
        delta
    }

    /// Batched forward pass without keeping intermediate activations.
    pub fn predict(&self, input: ArrayView2<'_, f64>) -> Array2<f64> {
        self.forward_batch(input).into_output()
    }

    /// Single-sample forward pass.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.check_input(input)?;
        let x = ArrayView2::from_shape((1, input.len()), input).unwrap();
        Ok(self.predict(x).into_raw_vec_and_offset().0)
    }

    /// Single-sample reverse pass: returns `(input_cotangent, parameter_gradient)`.
    pub fn backward(&self, input: &[f64], output_cotangent: &[f64]) -> Result<(Vec<f64>, GradBundle)> {
        self.check_input(input)?;
        if output_cotangent.len() != self.output_dim() {
            return Err(Error::Shape {
                expected: self.output_dim(),
                got: output_cotangent.len(),
            });
        }
        let x = ArrayView2::from_shape((1, input.len()), input).unwrap();
        let tape = self.forward_batch(x);
        let ct = ArrayView2::from_shape((1, output_cotangent.len()), output_cotangent).unwrap();
        let (dx, grads) = self.backward_batch(&tape, ct);
        Ok((dx.into_raw_vec_and_offset().0, grads))
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.input_dim() {
            return Err(Error::Shape {
                expected: self.input_dim(),
                got: input.len(),
            });
        }
        Ok(())
    }

    /// Clamps every parameter into `[-bound, bound]`. An infinite bound is a no-op.
    pub fn project(&mut self, bound: f64) {
        project_params(&mut self.params, bound);
    }

    /// Polyak averaging `self <- tau * online + (1 - tau) * self`.
    pub fn soft_update_from(&mut self, online: &Mlp, tau: f64) -> Result<()> {
        if self.layer_sizes != online.layer_sizes {
            return Err(Error::Shape {
                expected: self.params.len(),
                got: online.params.len(),
            });
        }
        for (t, o) in self.params.iter_mut().zip(&online.params) {
            *t = tau * o + (1.0 - tau) * *t;
        }
        Ok(())
    }

    pub fn max_abs_param(&self) -> f64 {
        self.params.iter().fold(0.0, |m, p| m.max(p.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }
}

/// Clamps a parameter slice into `[-bound, bound]`.
pub fn project_params(params: &mut [f64], bound: f64) {
    if !bound.is_finite() {
        return;
    }
    for p in params {
        *p = p.clamp(-bound, bound);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn batched_elu_matches_scalar() {
        let mut xs: Vec<f64> = (0..20001).map(|i| -50.0 + 0.0025 * i as f64).collect();
        xs.extend([-1e-300, -1e-12, -708.0, -1e300, f64::MIN, 0.0, -0.0, 3.0]);
        let mut ys = xs.clone();
        elu_slice(&mut ys);
        let mut portable = xs.clone();
        elu_slice_portable(&mut portable);
        assert_eq!(ys, portable);
        for (&x, &y) in xs.iter().zip(&ys) {
            let reference = elu(x);
            assert!((y - reference).abs() <= 4e-16, "x={x}: {y} vs {reference}");
        }
    }

    #[test]
    fn elu_values() {
        assert_eq!(elu(0.0), 0.0);
        assert_eq!(elu(1.0), 1.0);
        assert!((elu(-1.0) - (-0.632_120_558_828_557_7)).abs() < 1e-12);
        assert_eq!(elu_prime(0.0), 1.0);
        assert_eq!(elu_prime(2.5), 1.0);
        assert!((elu_prime(-1.0) - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn init_shapes_chain() {
        let net = Mlp::new(&[3, 4, 2], 0).unwrap();
        assert_eq!(net.weight(0).dim(), (4, 3));
        assert_eq!(net.weight(1).dim(), (2, 4));
        assert_eq!(net.bias(0).len(), 4);
        assert_eq!(net.bias(1).len(), 2);
        assert_eq!(net.num_params(), 4 * 3 + 4 + 2 * 4 + 2);
        assert!(net.bias(0).iter().all(|&b| b == 0.0));
        let bound = 1.0 / 3f64.sqrt();
        assert!(net.weight(0).iter().all(|w| w.abs() <= bound));
    }

    #[test]
    fn init_is_deterministic() {
        let a = Mlp::new(&[5, 7, 3], 42).unwrap();
        let b = Mlp::new(&[5, 7, 3], 42).unwrap();
        let c = Mlp::new(&[5, 7, 3], 43).unwrap();
        assert_eq!(a.params(), b.params());
        assert_ne!(a.params(), c.params());
    }

    #[test]
    fn degenerate_sizes_rejected() {
        assert!(matches!(Mlp::new(&[2], 0), Err(Error::Config(_))));
        assert!(matches!(Mlp::new(&[], 0), Err(Error::Config(_))));
        assert!(matches!(Mlp::new(&[3, 0, 1], 0), Err(Error::Config(_))));
    }

    #[test]
    fn zero_net_outputs_zero() {
        let net = Mlp::zeros(&[3, 5, 2]).unwrap();
        assert_eq!(net.forward(&[1.0, -2.0, 3.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn hand_evaluated_scalar_chain() {
        // 1 -> 1 -> 1: hidden w=2, b=0; output w=1, b=0; input 1 gives elu(2) = 2.
        let mut net = Mlp::zeros(&[1, 1, 1]).unwrap();
        net.weight_mut(0)[[0, 0]] = 2.0;
        net.weight_mut(1)[[0, 0]] = 1.0;
        assert_eq!(net.forward(&[1.0]).unwrap(), vec![2.0]);
        // negative branch: input -1 gives elu(-2)
        assert!((net.forward(&[-1.0]).unwrap()[0] - (-2f64).exp_m1()).abs() < 1e-15);
    }

    #[test]
    fn hidden_permutation_symmetry() {
        let net = Mlp::new(&[3, 4, 2], 9).unwrap();
        let mut swapped = net.clone();
        // swap hidden units 0 and 2: rows of W1/b1 and columns of W2
        {
            let w0 = net.weight(0).to_owned();
            let mut w = swapped.weight_mut(0);
            for j in 0..3 {
                w[[0, j]] = w0[[2, j]];
                w[[2, j]] = w0[[0, j]];
            }
        }
        {
            let w1 = net.weight(1).to_owned();
            let mut w = swapped.weight_mut(1);
            for i in 0..2 {
                w[[i, 0]] = w1[[i, 2]];
                w[[i, 2]] = w1[[i, 0]];
            }
        }
        let x = [0.3, -1.2, 0.8];
        let a = net.forward(&x).unwrap();
        let b = swapped.forward(&x).unwrap();
        for (p, q) in a.iter().zip(&b) {
            assert!((p - q).abs() < 1e-14);
        }
    }

    #[test]
    fn forward_shape_error() {
        let net = Mlp::new(&[3, 4, 2], 0).unwrap();
        assert!(matches!(
            net.forward(&[1.0, 2.0]),
            Err(Error::Shape { expected: 3, got: 2 })
        ));
        assert!(net.backward(&[1.0, 2.0, 3.0], &[1.0]).is_err());
    }

    #[test]
    fn zero_cotangent_gives_zero_gradients() {
        let net = Mlp::new(&[4, 8, 2], 3).unwrap();
        let (dx, g) = net.backward(&[0.1, 0.2, -0.3, 0.4], &[0.0, 0.0]).unwrap();
        assert!(dx.iter().all(|&v| v == 0.0));
        assert!(g.0.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn linear_layer_outer_product() {
        let mut net = Mlp::zeros(&[3, 2]).unwrap();
        net.weight_mut(0).assign(&array![[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]);
        let x = [0.5, -1.0, 2.0];
        let ct = [3.0, -2.0];
        let (dx, g) = net.backward(&x, &ct).unwrap();
        // dL/dW = ct ⊗ x, dL/db = ct, dL/dx = Wᵀ ct
        assert_eq!(&g.0[..6], &[1.5, -3.0, 6.0, -1.0, 2.0, -4.0]);
        assert_eq!(&g.0[6..], &[3.0, -2.0]);
        assert_eq!(dx, vec![3.0 - 8.0, 6.0 - 10.0, 9.0 - 12.0]);
    }

    #[test]
    fn batched_matches_single() {
        let net = Mlp::new(&[3, 6, 6, 2], 11).unwrap();
        let xs = array![[0.1, 0.2, 0.3], [-1.0, 0.5, 2.0], [0.0, 0.0, -3.0]];
        let cts = array![[1.0, 0.0], [0.5, -0.5], [-2.0, 1.0]];
        let tape = net.forward_batch(xs.view());
        let (dx, g) = net.backward_batch(&tape, cts.view());
        let mut g_sum = GradBundle::zeros_like(&net);
        for r in 0..3 {
            let x = xs.row(r).to_vec();
            let y = net.forward(&x).unwrap();
            for (a, b) in y.iter().zip(tape.output().row(r)) {
                assert!((a - b).abs() < 1e-13);
            }
            let (dxi, gi) = net.backward(&x, &cts.row(r).to_vec()).unwrap();
            for (a, b) in dxi.iter().zip(dx.row(r)) {
                assert!((a - b).abs() < 1e-13);
            }
            g_sum.add_assign(&gi);
        }
        for (a, b) in g_sum.0.iter().zip(&g.0) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn projection_clamps() {
        let mut net = Mlp::new(&[2, 3, 1], 0).unwrap();
        let before = net.clone();
        net.project(100.0);
        assert_eq!(net, before);
        net.params_mut()[0] = 1e9;
        net.params_mut()[1] = -1e9;
        net.project(100.0);
        assert_eq!(net.params()[0], 100.0);
        assert_eq!(net.params()[1], -100.0);
        net.params_mut()[0] = 1e9;
        net.project(f64::INFINITY);
        assert_eq!(net.params()[0], 1e9);
    }

    #[test]
    fn soft_update_cases() {
        let online = Mlp::new(&[2, 3, 1], 1).unwrap();
        let mut target = Mlp::zeros(&[2, 3, 1]).unwrap();
        target.soft_update_from(&online, 0.0).unwrap();
        assert!(target.params().iter().all(|&p| p == 0.0));
        target.soft_update_from(&online, 1.0).unwrap();
        assert_eq!(target.params(), online.params());

        let mut ones = Mlp::zeros(&[1, 1]).unwrap();
        ones.params_mut().fill(1.0);
        let mut t = Mlp::zeros(&[1, 1]).unwrap();
        t.soft_update_from(&ones, 0.005).unwrap();
        assert!(t.params().iter().all(|&p| (p - 0.005).abs() < 1e-18));

        let other = Mlp::zeros(&[2, 4, 1]).unwrap();
        assert!(target.soft_update_from(&other, 0.5).is_err());
    }
}
