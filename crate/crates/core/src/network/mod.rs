//! Network families `u_θ(X, t)`: a fully-connected tanh MLP and a residual
//! network of tanh blocks with identity skips.
//!
//! Parameters are stored as one flat vector (per affine layer: weight matrix
//! `out × in` row-major, then bias) so optimizers can work on it directly;
//! [`ParamView`] exposes the per-layer matrices.

pub mod batch;
mod checkpoint;

pub use batch::{JetBatch, JetOrder};
pub use checkpoint::{read_checkpoint, write_checkpoint, CheckpointError};

use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{InputJet, Jet, JetScalar};
use crate::Real;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NetworkError {
    #[error("invalid network spec: {0}")]
    InvalidSpec(String),
    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: usize, actual: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub hidden_layers: usize,
    pub width: usize,
    pub output_dim: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ResNetSpec {
    pub input_dim: usize,
    pub blocks: usize,
    pub block_depth: usize,
    pub width: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NetworkSpec {
    Mlp(MlpSpec),
    ResNet(ResNetSpec),
}

impl NetworkSpec {
    pub fn mlp(input_dim: usize, hidden_layers: usize, width: usize) -> Self {
        NetworkSpec::Mlp(MlpSpec {
            input_dim,
            hidden_layers,
            width,
            output_dim: 1,
        })
    }

    pub fn resnet(input_dim: usize, blocks: usize, width: usize) -> Self {
        NetworkSpec::ResNet(ResNetSpec {
            input_dim,
            blocks,
            block_depth: 3,
            width,
        })
    }

    pub fn input_dim(&self) -> usize {
        match self {
            NetworkSpec::Mlp(s) => s.input_dim,
            NetworkSpec::ResNet(s) => s.input_dim,
        }
    }

    pub fn spatial_dim(&self) -> usize {
        self.input_dim() - 1
    }

    pub fn tag(&self) -> &'static str {
        match self {
            NetworkSpec::Mlp(_) => "mlp",
            NetworkSpec::ResNet(_) => "resnet",
        }
    }

    pub fn validate(&self) -> Result<(), NetworkError> {
        let bad = |m: &str| Err(NetworkError::InvalidSpec(m.to_string()));
        match *self {
            NetworkSpec::Mlp(s) => {
                if s.input_dim < 2 {
                    return bad("input_dim must cover at least one spatial coordinate and time");
                }
                if s.hidden_layers < 1 {
                    return bad("hidden_layers must be at least 1");
                }
                if s.width < 1 {
                    return bad("width must be at least 1");
                }
                if s.output_dim != 1 {
                    return bad("output_dim must be 1");
                }
            }
            NetworkSpec::ResNet(s) => {
                if s.input_dim < 2 {
                    return bad("input_dim must cover at least one spatial coordinate and time");
                }
                if s.blocks < 1 {
                    return bad("blocks must be at least 1");
                }
                if s.block_depth < 1 {
                    return bad("block_depth must be at least 1");
                }
                if s.width < 1 {
                    return bad("width must be at least 1");
                }
            }
        }
        Ok(())
    }

    /// `(out, in)` for every affine layer in evaluation order.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        match *self {
            NetworkSpec::Mlp(s) => {
                let mut shapes = vec![(s.width, s.input_dim)];
                shapes.extend((1..s.hidden_layers).map(|_| (s.width, s.width)));
                shapes.push((s.output_dim, s.width));
                shapes
            }
            NetworkSpec::ResNet(s) => {
                let mut shapes = vec![(s.width, s.input_dim)];
                shapes.extend((0..s.blocks * s.block_depth).map(|_| (s.width, s.width)));
                shapes.push((1, s.width));
                shapes
            }
        }
    }

    pub fn param_count(&self) -> usize {
        self.layer_shapes().iter().map(|(o, i)| o * i + o).sum()
    }

    /// Start of each layer's weights in the flat parameter vector.
    pub fn layer_offsets(&self) -> Vec<usize> {
        let mut offsets = Vec::new();
        let mut at = 0;
        for (o, i) in self.layer_shapes() {
            offsets.push(at);
            at += o * i + o;
        }
        offsets
    }
}

/// Owned parameters `θ` of a network.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    spec: NetworkSpec,
    values: Vec<Real>,
}

impl NetworkParams {
    pub fn from_flat(spec: NetworkSpec, values: Vec<Real>) -> Result<Self, NetworkError> {
        spec.validate()?;
        let expected = spec.param_count();
        if values.len() != expected {
            return Err(NetworkError::Shape {
                expected,
                actual: values.len(),
            });
        }
        Ok(Self { spec, values })
    }

    pub fn zeros(spec: NetworkSpec) -> Result<Self, NetworkError> {
        let n = spec.param_count();
        Self::from_flat(spec, vec![0.0; n])
    }

    /// Glorot-uniform weights, zero biases.
    pub fn xavier_init(spec: NetworkSpec, seed: u64) -> Result<Self, NetworkError> {
        let mut params = Self::zeros(spec)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (offset, (fan_out, fan_in)) in spec.layer_offsets().into_iter().zip(spec.layer_shapes()) {
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for w in &mut params.values[offset..offset + fan_out * fan_in] {
                *w = rng.random_range(-bound..=bound) as Real;
            }
        }
        Ok(params)
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn values(&self) -> &[Real] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Real] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Real> {
        self.values
    }

    pub fn view(&self) -> ParamView<'_> {
        ParamView {
            spec: &self.spec,
            values: &self.values,
        }
    }

    /// Value and input derivatives at one point `(X, t)`.
    pub fn forward(&self, point: &[Real]) -> Result<InputJet, NetworkError> {
        self.view().forward(point)
    }

    /// Values only, for many points (rows of `points`).
    pub fn predict(&self, points: ArrayView2<'_, Real>) -> Result<Vec<Real>, NetworkError> {
        self.view().predict(points)
    }
}

/// Borrowed parameters: a spec plus a flat value slice.
#[derive(Debug, Clone, Copy)]
pub struct ParamView<'a> {
    pub spec: &'a NetworkSpec,
    pub values: &'a [Real],
}

impl<'a> ParamView<'a> {
    pub fn new(spec: &'a NetworkSpec, values: &'a [Real]) -> Result<Self, NetworkError> {
        let expected = spec.param_count();
        if values.len() != expected {
            return Err(NetworkError::Shape {
                expected,
                actual: values.len(),
            });
        }
        Ok(Self { spec, values })
    }

    /// Weight (`out × in`) and bias of affine layer `index`.
    pub fn layer(&self, index: usize) -> (ArrayView2<'a, Real>, ArrayView1<'a, Real>) {
        let (o, i) = self.spec.layer_shapes()[index];
        let off = self.spec.layer_offsets()[index];
        layer_at(self.values, off, o, i)
    }

    pub fn layers(&self) -> Vec<(ArrayView2<'a, Real>, ArrayView1<'a, Real>)> {
        self.spec
            .layer_shapes()
            .into_iter()
            .zip(self.spec.layer_offsets())
            .map(|((o, i), off)| layer_at(self.values, off, o, i))
            .collect()
    }

    pub fn forward(&self, point: &[Real]) -> Result<InputJet, NetworkError> {
        check_point(self.spec, point.len())?;
        let pts = Array2::from_shape_vec((1, point.len()), point.to_vec()).expect("row shape");
        let out = batch::evaluate(*self, pts.view(), JetOrder::Second);
        Ok(out.jet(0))
    }

    pub fn predict(&self, points: ArrayView2<'_, Real>) -> Result<Vec<Real>, NetworkError> {
        check_point(self.spec, points.ncols())?;
        let out = batch::evaluate(*self, points, JetOrder::Value);
        Ok(out.value().to_vec())
    }
}

fn layer_at(values: &[Real], off: usize, o: usize, i: usize) -> (ArrayView2<'_, Real>, ArrayView1<'_, Real>) {
    let w = ArrayView2::from_shape((o, i), &values[off..off + o * i]).expect("layer shape");
    let b = ArrayView1::from(&values[off + o * i..off + o * i + o]);
    (w, b)
}

fn check_point(spec: &NetworkSpec, len: usize) -> Result<(), NetworkError> {
    if len != spec.input_dim() {
        return Err(NetworkError::Shape {
            expected: spec.input_dim(),
            actual: len,
        });
    }
    Ok(())
}

/// Scalar-route forward pass over jets with arbitrary coefficients.
///
/// With `S = Var` this records the whole evaluation, including the input
/// derivative channels, on a tape. It is slow and meant for cross-checking
/// the batched kernels and for small oracle computations.
pub fn forward_jets<S: JetScalar>(spec: &NetworkSpec, values: &[S], inputs: &[Jet<S>]) -> Jet<S> {
    assert_eq!(values.len(), spec.param_count(), "parameter count");
    assert_eq!(inputs.len(), spec.input_dim(), "input count");
    let shapes = spec.layer_shapes();
    let offsets = spec.layer_offsets();
    let affine = |layer: usize, h: &[Jet<S>]| -> Vec<Jet<S>> {
        let (o, i) = shapes[layer];
        let off = offsets[layer];
        (0..o)
            .map(|r| {
                let w = &values[off + r * i..off + (r + 1) * i];
                Jet::affine(w, h, values[off + o * i + r].clone())
            })
            .collect()
    };
    let tanh = |h: Vec<Jet<S>>| -> Vec<Jet<S>> { h.iter().map(|j| j.tanh()).collect() };
    let last = shapes.len() - 1;
    let h = match *spec {
        NetworkSpec::Mlp(_) => {
            let mut h = inputs.to_vec();
            for layer in 0..last {
                h = tanh(affine(layer, &h));
            }
            h
        }
        NetworkSpec::ResNet(s) => {
            let mut h = affine(0, inputs);
            let mut layer = 1;
            for _ in 0..s.blocks {
                let skip = h.clone();
                for _ in 0..s.block_depth {
                    h = tanh(affine(layer, &h));
                    layer += 1;
                }
                h = h.into_iter().zip(skip).map(|(a, b)| a + b).collect();
            }
            h
        }
    };
    affine(last, &h).remove(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes_and_counts() {
        let mlp = NetworkSpec::mlp(2, 5, 50);
        assert_eq!(mlp.layer_shapes().len(), 6);
        assert_eq!(mlp.param_count(), 2 * 50 + 50 + 4 * (50 * 50 + 50) + 51);
        let res = NetworkSpec::resnet(3, 5, 50);
        assert_eq!(res.layer_shapes().len(), 1 + 15 + 1);
        assert_eq!(res.layer_offsets()[1], 3 * 50 + 50);
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(NetworkSpec::mlp(2, 0, 5).validate().is_err());
        assert!(NetworkSpec::mlp(2, 1, 0).validate().is_err());
        assert!(NetworkSpec::resnet(2, 0, 5).validate().is_err());
        assert!(NetworkParams::from_flat(NetworkSpec::mlp(2, 1, 1), vec![0.0; 3]).is_err());
    }

    #[test]
    fn xavier_one_to_one_bound() {
        // single weight layer 1 -> 1 does not exist as an MLP; check the first
        // layer of a 1-wide net (fan_in = 2 inputs, fan_out = 1) and the head
        // (fan_in = fan_out = 1, bound sqrt(3)).
        for seed in 0..50 {
            let p = NetworkParams::xavier_init(NetworkSpec::mlp(2, 1, 1), seed).unwrap();
            let (w, b) = p.view().layer(1);
            assert!(w[[0, 0]].abs() <= (3.0 as Real).sqrt());
            assert_eq!(b[0], 0.0);
            let (w0, _) = p.view().layer(0);
            assert!(w0.iter().all(|v| v.abs() <= (2.0 as Real).sqrt()));
        }
    }

    #[test]
    fn xavier_is_deterministic_per_seed() {
        let spec = NetworkSpec::mlp(2, 1, 50);
        let a = NetworkParams::xavier_init(spec, 7).unwrap();
        let b = NetworkParams::xavier_init(spec, 7).unwrap();
        let c = NetworkParams::xavier_init(spec, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn zero_params_give_zero_jet() {
        let p = NetworkParams::zeros(NetworkSpec::mlp(3, 2, 4)).unwrap();
        let j = p.forward(&[0.3, -0.2, 0.9]).unwrap();
        assert_eq!(j.value, 0.0);
        assert!(j.first.iter().chain(&j.second).all(|&v| v == 0.0));
    }

    #[test]
    fn single_unit_is_tanh() {
        // input (x, t), one hidden unit with weights 1 on x and 0 on t.
        let spec = NetworkSpec::mlp(2, 1, 1);
        let p = NetworkParams::from_flat(spec, vec![1.0, 0.0, 0.0, 1.0, 0.0]).unwrap();
        let j = p.forward(&[0.0, 0.4]).unwrap();
        assert_eq!(j.value, 0.0);
        assert_eq!(j.first[0], 1.0);
        let j = p.forward(&[0.8, 0.0]).unwrap();
        assert!((j.value - (0.8 as Real).tanh()).abs() < 1e-15);
    }

    #[test]
    fn point_length_checked() {
        let p = NetworkParams::zeros(NetworkSpec::mlp(2, 1, 3)).unwrap();
        assert_eq!(p.forward(&[1.0]), Err(NetworkError::Shape { expected: 2, actual: 1 }));
    }
}
