//! Batched jet propagation with a hand-derived reverse pass.
//!
//! A batch of `n` points is carried through the network as one stacked matrix
//! of `C·n` rows: block 0 holds the values, blocks `1..=d+1` the first
//! partials (time last), blocks `d+2..` the diagonal spatial second partials.
//! Affine layers act on every block with the same weights (bias only on the
//! value block), so each layer is a single matrix product. The tanh layer
//! mixes blocks through
//!
//! ```text
//! a   = tanh(z)          s = 1 - a²
//! a_k = s z_k
//! a_jj = s z_jj - 2 a s z_j²
//! ```
//!
//! and its adjoint is written out explicitly in [`tanh_backward`].

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, ArrayViewMut1, ArrayViewMut2, Axis};

use super::{NetworkSpec, ParamView};
use crate::autodiff::InputJet;
use crate::Real;

/// Which input derivatives a batch carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum JetOrder {
    Value,
    First,
    Second,
}

impl JetOrder {
    pub fn channels(self, spatial_dim: usize) -> usize {
        match self {
            JetOrder::Value => 1,
            JetOrder::First => spatial_dim + 2,
            JetOrder::Second => 2 * spatial_dim + 2,
        }
    }
}

/// Network output channels for a batch of points.
#[derive(Debug, Clone, PartialEq)]
pub struct JetBatch {
    order: JetOrder,
    spatial_dim: usize,
    n: usize,
    data: Array1<Real>,
}

impl JetBatch {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn order(&self) -> JetOrder {
        self.order
    }

    pub fn channels(&self) -> usize {
        self.order.channels(self.spatial_dim)
    }

    pub fn channel(&self, c: usize) -> ArrayView1<'_, Real> {
        self.data.slice(s![c * self.n..(c + 1) * self.n])
    }

    pub fn value(&self) -> ArrayView1<'_, Real> {
        self.channel(0)
    }

    /// `∂u/∂x_k`, with `k == spatial_dim` meaning `∂u/∂t`.
    pub fn first(&self, k: usize) -> ArrayView1<'_, Real> {
        assert!(self.order >= JetOrder::First && k <= self.spatial_dim);
        self.channel(1 + k)
    }

    pub fn dt(&self) -> ArrayView1<'_, Real> {
        self.first(self.spatial_dim)
    }

    /// `∂²u/∂x_j²`.
    pub fn second(&self, j: usize) -> ArrayView1<'_, Real> {
        assert!(self.order == JetOrder::Second && j < self.spatial_dim);
        self.channel(2 + self.spatial_dim + j)
    }

    /// All channels of point `i` as a jet (absent channels are zero).
    pub fn jet(&self, i: usize) -> InputJet {
        let d = self.spatial_dim;
        let at = |c: usize| self.data[c * self.n + i];
        let first = (0..=d)
            .map(|k| if self.order >= JetOrder::First { at(1 + k) } else { 0.0 })
            .collect();
        let second = (0..d)
            .map(|j| {
                if self.order == JetOrder::Second {
                    at(2 + d + j)
                } else {
                    0.0
                }
            })
            .collect();
        InputJet {
            value: at(0),
            first,
            second,
        }
    }

    /// Channel-major raw storage: channel `c` of point `i` at `c·n + i`.
    pub fn raw(&self) -> &[Real] {
        self.data.as_slice().expect("contiguous")
    }
}

enum Step {
    Affine(usize),
    Tanh,
    SkipOpen,
    SkipClose,
}

fn plan(spec: &NetworkSpec) -> Vec<Step> {
    let last = spec.layer_shapes().len() - 1;
    let mut steps = Vec::new();
    match *spec {
        NetworkSpec::Mlp(_) => {
            for layer in 0..last {
                steps.push(Step::Affine(layer));
                steps.push(Step::Tanh);
            }
        }
        NetworkSpec::ResNet(s) => {
            steps.push(Step::Affine(0));
            let mut layer = 1;
            for _ in 0..s.blocks {
                steps.push(Step::SkipOpen);
                for _ in 0..s.block_depth {
                    steps.push(Step::Affine(layer));
                    steps.push(Step::Tanh);
                    layer += 1;
                }
                steps.push(Step::SkipClose);
            }
        }
    }
    steps.push(Step::Affine(last));
    steps
}

enum Saved {
    /// Input to an affine layer.
    Affine(Array2<Real>),
    /// Pre-activation and `tanh` of its value block.
    Tanh {
        z: Array2<Real>,
        t: Array2<Real>,
    },
    Skip,
}

/// Intermediate values kept by [`forward`] for [`backward`].
pub struct Tape {
    order: JetOrder,
    spatial_dim: usize,
    n: usize,
    saved: Vec<Saved>,
}

/// Evaluates the network on the rows of `points` without recording.
pub fn evaluate(params: ParamView<'_>, points: ArrayView2<'_, Real>, order: JetOrder) -> JetBatch {
    run(params, points, order, false).0
}

/// Evaluates the network and records what the reverse pass needs.
pub fn forward(params: ParamView<'_>, points: ArrayView2<'_, Real>, order: JetOrder) -> (JetBatch, Tape) {
    let (out, tape) = run(params, points, order, true);
    (out, tape.expect("recording requested"))
}

fn input_block(points: ArrayView2<'_, Real>, order: JetOrder, d: usize) -> Array2<Real> {
    let n = points.nrows();
    let c = order.channels(d);
    let mut h = Array2::<Real>::zeros((c * n, d + 1));
    h.slice_mut(s![0..n, ..]).assign(&points);
    if order >= JetOrder::First {
        for k in 0..=d {
            h.slice_mut(s![(1 + k) * n..(2 + k) * n, k]).fill(1.0);
        }
    }
    h
}

fn run(params: ParamView<'_>, points: ArrayView2<'_, Real>, order: JetOrder, record: bool) -> (JetBatch, Option<Tape>) {
    let spec = params.spec;
    assert_eq!(points.ncols(), spec.input_dim(), "point dimension");
    let d = spec.spatial_dim();
    let n = points.nrows();
    let layers = params.layers();
    let mut saved = Vec::new();
    let mut skips: Vec<Array2<Real>> = Vec::new();
    let mut h = input_block(points, order, d);
    for step in plan(spec) {
        match step {
            Step::Affine(l) => {
                let (w, b) = &layers[l];
                let z = affine_forward(&h, w, b, n);
                if record {
                    saved.push(Saved::Affine(std::mem::replace(&mut h, z)));
                } else {
                    h = z;
                }
            }
            Step::Tanh => {
                let (a, t) = tanh_forward(&h, order, d, n);
                if record {
                    saved.push(Saved::Tanh {
                        z: std::mem::replace(&mut h, a),
                        t,
                    });
                } else {
                    h = a;
                }
            }
            Step::SkipOpen => {
                skips.push(h.clone());
                if record {
                    saved.push(Saved::Skip);
                }
            }
            Step::SkipClose => {
                h += &skips.pop().expect("balanced skips");
                if record {
                    saved.push(Saved::Skip);
                }
            }
        }
    }
    let data = h
        .into_shape_with_order(order.channels(d) * n)
        .expect("single output column");
    let out = JetBatch {
        order,
        spatial_dim: d,
        n,
        data,
    };
    let tape = record.then_some(Tape {
        order,
        spatial_dim: d,
        n,
        saved,
    });
    (out, tape)
}

fn affine_forward(h: &Array2<Real>, w: &ArrayView2<'_, Real>, b: &ArrayView1<'_, Real>, n: usize) -> Array2<Real> {
    let mut z = h.dot(&w.t());
    z.slice_mut(s![0..n, ..])
        .rows_mut()
        .into_iter()
        .for_each(|mut row| row += b);
    z
}

fn tanh_forward(z: &Array2<Real>, order: JetOrder, d: usize, n: usize) -> (Array2<Real>, Array2<Real>) {
    let w = z.ncols();
    let nw = n * w;
    let zs = z.as_slice().expect("standard layout");
    let mut a = Array2::<Real>::zeros(z.raw_dim());
    let t: Vec<Real> = zs[..nw].iter().map(|v| v.tanh()).collect();
    {
        let av = a.as_slice_mut().expect("standard layout");
        av[..nw].copy_from_slice(&t);
        if order >= JetOrder::First {
            for k in 0..=d {
                let (zk, ak) = (&zs[(1 + k) * nw..(2 + k) * nw], &mut av[(1 + k) * nw..(2 + k) * nw]);
                for ((ak, zk), t) in ak.iter_mut().zip(zk).zip(&t) {
                    *ak = (1.0 - t * t) * zk;
                }
            }
        }
        if order == JetOrder::Second {
            for j in 0..d {
                let zj = &zs[(1 + j) * nw..(2 + j) * nw];
                let c = 2 + d + j;
                let (zjj, ajj) = (&zs[c * nw..(c + 1) * nw], &mut av[c * nw..(c + 1) * nw]);
                for q in 0..nw {
                    let tq = t[q];
                    let sq = 1.0 - tq * tq;
                    ajj[q] = sq * zjj[q] - 2.0 * tq * sq * zj[q] * zj[q];
                }
            }
        }
    }
    let t = Array2::from_shape_vec((n, w), t).expect("value block");
    (a, t)
}

/// Adjoint of the tanh jet layer: maps `∂L/∂a` (stacked) to `∂L/∂z`.
fn tanh_backward(
    g: &Array2<Real>,
    z: &Array2<Real>,
    t: &Array2<Real>,
    order: JetOrder,
    d: usize,
    n: usize,
) -> Array2<Real> {
    let w = z.ncols();
    let nw = n * w;
    let gs = g.as_slice().expect("standard layout");
    let zs = z.as_slice().expect("standard layout");
    let ts = t.as_slice().expect("standard layout");
    let mut gz = Array2::<Real>::zeros(z.raw_dim());
    let out = gz.as_slice_mut().expect("standard layout");
    let blk = |c: usize| c * nw..(c + 1) * nw;
    // value block: direct term
    for q in 0..nw {
        let tq = ts[q];
        out[q] = gs[q] * (1.0 - tq * tq);
    }
    if order >= JetOrder::First {
        for k in 0..=d {
            let (gk, zk) = (&gs[blk(1 + k)], &zs[blk(1 + k)]);
            for q in 0..nw {
                let tq = ts[q];
                let sq = 1.0 - tq * tq;
                out[q] += -2.0 * tq * sq * zk[q] * gk[q];
            }
            let o = &mut out[blk(1 + k)];
            for q in 0..nw {
                let tq = ts[q];
                o[q] = (1.0 - tq * tq) * gk[q];
            }
        }
    }
    if order == JetOrder::Second {
        for j in 0..d {
            let c = 2 + d + j;
            let (gjj, zjj, zj) = (&gs[blk(c)], &zs[blk(c)], &zs[blk(1 + j)]);
            for q in 0..nw {
                let tq = ts[q];
                let sq = 1.0 - tq * tq;
                let dts = sq * sq - 2.0 * tq * tq * sq;
                out[q] += gjj[q] * (-2.0 * tq * sq * zjj[q] - 2.0 * dts * zj[q] * zj[q]);
            }
            {
                let o = &mut out[blk(1 + j)];
                for q in 0..nw {
                    let tq = ts[q];
                    let sq = 1.0 - tq * tq;
                    o[q] += gjj[q] * (-4.0 * tq * sq * zj[q]);
                }
            }
            let o = &mut out[blk(c)];
            for q in 0..nw {
                let tq = ts[q];
                o[q] = (1.0 - tq * tq) * gjj[q];
            }
        }
    }
    gz
}

/// Reverse pass: accumulates `∂L/∂θ` into `grad` given `∂L/∂output` in the
/// channel-major layout of [`JetBatch::raw`].
pub fn backward(params: ParamView<'_>, tape: Tape, grad_output: &[Real], grad: &mut [Real]) {
    let spec = params.spec;
    let d = tape.spatial_dim;
    let n = tape.n;
    let c = tape.order.channels(d);
    assert_eq!(grad_output.len(), c * n, "output gradient length");
    assert_eq!(grad.len(), spec.param_count(), "gradient length");
    let layers = params.layers();
    let shapes = spec.layer_shapes();
    let offsets = spec.layer_offsets();
    let mut g = Array2::from_shape_vec((c * n, 1), grad_output.to_vec()).expect("output column");
    let mut skip_grads: Vec<Array2<Real>> = Vec::new();
    let steps = plan(spec);
    let mut saved = tape.saved;
    for (idx, step) in steps.iter().enumerate().rev() {
        let rec = saved.pop().expect("one record per step");
        match (step, rec) {
            (Step::Affine(l), Saved::Affine(h)) => {
                let (o, i) = shapes[*l];
                let off = offsets[*l];
                let (gw_slice, rest) = grad[off..off + o * i + o].split_at_mut(o * i);
                let mut gw = ArrayViewMut2::from_shape((o, i), gw_slice).expect("weight grad");
                general_mat_mul(1.0, &g.t(), &h, 1.0, &mut gw);
                let mut gb = ArrayViewMut1::from(rest);
                gb += &g.slice(s![0..n, ..]).sum_axis(Axis(0));
                if idx > 0 {
                    g = g.dot(&layers[*l].0);
                }
            }
            (Step::Tanh, Saved::Tanh { z, t }) => {
                g = tanh_backward(&g, &z, &t, tape.order, d, n);
            }
            (Step::SkipClose, Saved::Skip) => skip_grads.push(g.clone()),
            (Step::SkipOpen, Saved::Skip) => g += &skip_grads.pop().expect("balanced skips"),
            _ => unreachable!("tape does not match network plan"),
        }
    }
}
