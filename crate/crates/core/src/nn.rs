//! Transformer building blocks on top of [`crate::autograd`].

use rand::Rng;

use crate::autograd::{Graph, Mat, Var};
use crate::params::{ParamId, ParamStore};

/// Affine map `x · W + b`.
#[derive(Debug, Clone)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: Option<ParamId>,
}

impl Linear {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        d_in: usize,
        d_out: usize,
        bias: bool,
        rng: &mut R,
    ) -> Self {
        Self::with_std(store, name, d_in, d_out, bias, 1.0 / (d_in as f64).sqrt(), rng)
    }

    pub fn with_std<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        d_in: usize,
        d_out: usize,
        bias: bool,
        std: f64,
        rng: &mut R,
    ) -> Self {
        let weight = store.add_normal(format!("{name}.weight"), (d_in, d_out), std, rng);
        let bias = bias.then(|| store.add_const(format!("{name}.bias"), (1, d_out), 0.0));
        Linear { weight, bias }
    }

    pub fn forward(&self, g: &mut Graph, x: Var) -> Var {
        let w = g.param(self.weight);
        let y = g.matmul(x, w);
        match self.bias {
            Some(b) => {
                let b = g.param(b);
                g.add_row(y, b)
            }
            None => y,
        }
    }
}

/// Per-feature layer normalization with learned gain and bias.
#[derive(Debug, Clone)]
pub struct LayerNorm {
    pub gain: ParamId,
    pub bias: ParamId,
}

impl LayerNorm {
    pub fn new(store: &mut ParamStore, name: &str, d: usize) -> Self {
        LayerNorm {
            gain: store.add_const(format!("{name}.gain"), (1, d), 1.0),
            bias: store.add_const(format!("{name}.bias"), (1, d), 0.0),
        }
    }

    pub fn forward(&self, g: &mut Graph, x: Var) -> Var {
        let n = g.normalize(x);
        let gain = g.param(self.gain);
        let y = g.mul_row(n, gain);
        let b = g.param(self.bias);
        g.add_row(y, b)
    }
}

/// Two-layer position-wise network with a GELU hidden layer.
#[derive(Debug, Clone)]
pub struct FeedForward {
    pub up: Linear,
    pub down: Linear,
}

impl FeedForward {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        d: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Self {
        FeedForward {
            up: Linear::new(store, &format!("{name}.up"), d, hidden, true, rng),
            down: Linear::new(store, &format!("{name}.down"), hidden, d, true, rng),
        }
    }

    pub fn forward(&self, g: &mut Graph, x: Var) -> Var {
        let h = self.up.forward(g, x);
        let h = g.gelu(h);
        self.down.forward(g, h)
    }
}

/// Multi-head scaled dot-product attention.
#[derive(Debug, Clone)]
pub struct Attention {
    pub query: Linear,
    pub key: Linear,
    pub value: Linear,
    pub out: Linear,
    pub heads: usize,
    pub d_model: usize,
}

impl Attention {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        d_model: usize,
        heads: usize,
        rng: &mut R,
    ) -> Self {
        assert!(d_model % heads == 0, "d_model {d_model} not divisible by {heads} heads");
        Attention {
            query: Linear::new(store, &format!("{name}.query"), d_model, d_model, true, rng),
            key: Linear::new(store, &format!("{name}.key"), d_model, d_model, true, rng),
            value: Linear::new(store, &format!("{name}.value"), d_model, d_model, true, rng),
            out: Linear::new(store, &format!("{name}.out"), d_model, d_model, true, rng),
            heads,
            d_model,
        }
    }

    /// Attend from the rows of `x` to the rows of `memory`.
    pub fn forward(&self, g: &mut Graph, x: Var, memory: Var, causal: bool) -> Var {
        let q = self.query.forward(g, x);
        let k = self.key.forward(g, memory);
        let v = self.value.forward(g, memory);
        let dh = self.d_model / self.heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let mask = causal.then(|| {
            let (t, s) = (g.value(q).nrows(), g.value(k).nrows());
            causal_mask(t, s)
        });
        let mut outs = Vec::with_capacity(self.heads);
        for h in 0..self.heads {
            let (a, b) = (h * dh, (h + 1) * dh);
            let (qh, kh, vh) = if self.heads == 1 {
                (q, k, v)
            } else {
                (g.slice_cols(q, a, b), g.slice_cols(k, a, b), g.slice_cols(v, a, b))
            };
            let scores = g.matmul_t(qh, kh);
            let mut scores = g.scale(scores, scale);
            if let Some(m) = &mask {
                scores = g.add_const(scores, m);
            }
            let w = g.softmax(scores);
            outs.push(g.matmul(w, vh));
        }
        let joined = if outs.len() == 1 { outs[0] } else { g.concat_cols(&outs) };
        self.out.forward(g, joined)
    }
}

fn causal_mask(rows: usize, cols: usize) -> Mat {
    Mat::from_shape_fn((rows, cols), |(i, j)| if j > i { -1e9 } else { 0.0 })
}

/// Pre-norm encoder layer: self-attention then feed-forward, each residual.
#[derive(Debug, Clone)]
pub struct EncoderLayer {
    pub norm1: LayerNorm,
    pub attn: Attention,
    pub norm2: LayerNorm,
    pub ff: FeedForward,
}

impl EncoderLayer {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, name: &str, d: usize, heads: usize, rng: &mut R) -> Self {
        EncoderLayer {
            norm1: LayerNorm::new(store, &format!("{name}.norm1"), d),
            attn: Attention::new(store, &format!("{name}.attn"), d, heads, rng),
            norm2: LayerNorm::new(store, &format!("{name}.norm2"), d),
            ff: FeedForward::new(store, &format!("{name}.ff"), d, 4 * d, rng),
        }
    }

    pub fn forward(&self, g: &mut Graph, x: Var) -> Var {
        let h = self.norm1.forward(g, x);
        let a = self.attn.forward(g, h, h, false);
        let x = g.add(x, a);
        let h = self.norm2.forward(g, x);
        let f = self.ff.forward(g, h);
        g.add(x, f)
    }
}

/// Pre-norm decoder layer: causal self-attention, cross-attention, feed-forward.
#[derive(Debug, Clone)]
pub struct DecoderLayer {
    pub norm1: LayerNorm,
    pub self_attn: Attention,
    pub norm2: LayerNorm,
    pub cross_attn: Attention,
    pub norm3: LayerNorm,
    pub ff: FeedForward,
}

impl DecoderLayer {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, name: &str, d: usize, heads: usize, rng: &mut R) -> Self {
        DecoderLayer {
            norm1: LayerNorm::new(store, &format!("{name}.norm1"), d),
            self_attn: Attention::new(store, &format!("{name}.self_attn"), d, heads, rng),
            norm2: LayerNorm::new(store, &format!("{name}.norm2"), d),
            cross_attn: Attention::new(store, &format!("{name}.cross_attn"), d, heads, rng),
            norm3: LayerNorm::new(store, &format!("{name}.norm3"), d),
            ff: FeedForward::new(store, &format!("{name}.ff"), d, 4 * d, rng),
        }
    }

    pub fn forward(&self, g: &mut Graph, x: Var, context: Var) -> Var {
        let h = self.norm1.forward(g, x);
        let a = self.self_attn.forward(g, h, h, true);
        let x = g.add(x, a);
        let h = self.norm2.forward(g, x);
        let c = self.cross_attn.forward(g, h, context, false);
        let x = g.add(x, c);
        let h = self.norm3.forward(g, x);
        let f = self.ff.forward(g, h);
        g.add(x, f)
    }
}

/// Fixed sinusoidal position table, `len × d`.
pub fn sinusoidal_positions(len: usize, d: usize) -> Mat {
    Mat::from_shape_fn((len, d), |(pos, i)| {
        let rate = 1.0 / 10_000f64.powf((2 * (i / 2)) as f64 / d as f64);
        let angle = pos as f64 * rate;
        if i % 2 == 0 {
            angle.sin()
        } else {
            angle.cos()
        }
    })
}
