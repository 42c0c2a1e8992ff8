//! LSTM cell over a window followed by a dense head
//! `hidden -> 64 (linear) -> 32 (ReLU) -> 1 (linear)`.
//!
//! All parameters live in one flat vector; [`ParamLayout`] gives the
//! offsets. Gate rows are ordered input, forget, candidate, output.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};
use twin_core::Scalar;

use crate::error::{ModelError, Result};
use crate::features::Matrix;

pub const PAPER_HIDDEN: usize = 128;
pub const DENSE1: usize = 64;
pub const DENSE2: usize = 32;

/// Closed-form parameter count for widths `(input, hidden, 64, 32, 1)`.
pub fn param_count(input: usize, hidden: usize) -> usize {
    4 * hidden * (input + hidden + 1) + (hidden + 1) * DENSE1 + (DENSE1 + 1) * DENSE2 + (DENSE2 + 1)
}

static GENERATION: AtomicU64 = AtomicU64::new(1);

fn next_generation() -> u64 {
    GENERATION.fetch_add(1, Ordering::Relaxed)
}

/// Offsets of each tensor in the flat parameter vector. Matrices are
/// row-major with one row per output unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamLayout {
    pub input: usize,
    pub hidden: usize,
    /// `4H x D`
    pub wx: usize,
    /// `4H x H`
    pub wh: usize,
    /// `4H`
    pub b: usize,
    /// `64 x H`
    pub w1: usize,
    pub b1: usize,
    /// `32 x 64`
    pub w2: usize,
    pub b2: usize,
    /// `1 x 32`
    pub w3: usize,
    pub b3: usize,
    pub total: usize,
}

impl ParamLayout {
    pub fn new(input: usize, hidden: usize) -> Self {
        let g = 4 * hidden;
        let wx = 0;
        let wh = wx + g * input;
        let b = wh + g * hidden;
        let w1 = b + g;
        let b1 = w1 + DENSE1 * hidden;
        let w2 = b1 + DENSE1;
        let b2 = w2 + DENSE2 * DENSE1;
        let w3 = b2 + DENSE2;
        let b3 = w3 + DENSE2;
        let total = b3 + 1;
        assert_eq!(total, param_count(input, hidden), "layout disagrees with closed-form count");
        ParamLayout {
            input,
            hidden,
            wx,
            wh,
            b,
            w1,
            b1,
            w2,
            b2,
            w3,
            b3,
            total,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LstmNetwork<T> {
    layout: ParamLayout,
    params: Vec<T>,
    generation: u64,
}

impl<T: PartialEq> PartialEq for LstmNetwork<T> {
    fn eq(&self, other: &Self) -> bool {
        self.layout == other.layout && self.params == other.params
    }
}

/// Intermediates of one forward pass, tied to the exact parameters that
/// produced them.
#[derive(Debug, Clone)]
pub struct Cache<T> {
    generation: u64,
    steps: usize,
    x: Vec<T>,
    /// Per step: activated gates `[i, f, g, o]`, `4H` each.
    gates: Vec<T>,
    /// Cell states `c_0 .. c_W` (`c_0 = 0`), `H` each.
    c: Vec<T>,
    /// Hidden states `h_0 .. h_W` (`h_0 = 0`).
    h: Vec<T>,
    z1: Vec<T>,
    z2: Vec<T>,
    pub output: T,
}

fn sigmoid<T: Scalar>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

impl<T: Scalar> LstmNetwork<T> {
    pub fn zeros(input: usize, hidden: usize) -> Result<Self> {
        if input == 0 || hidden == 0 {
            return Err(ModelError::usage("input width and hidden units must be >= 1"));
        }
        let layout = ParamLayout::new(input, hidden);
        Ok(LstmNetwork {
            layout,
            params: vec![T::zero(); layout.total],
            generation: next_generation(),
        })
    }

    /// Glorot-uniform weights, zero biases except the forget gate (1.0).
    pub fn seeded(input: usize, hidden: usize, seed: u64) -> Result<Self> {
        let mut net = Self::zeros(input, hidden)?;
        let l = net.layout;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fill = |p: &mut [T], fan_in: usize, fan_out: usize| {
            let lim = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let u = Uniform::new_inclusive(-lim, lim).expect("valid bounds");
            for v in p.iter_mut() {
                *v = T::lit(u.sample(&mut rng));
            }
        };
        let h = l.hidden;
        fill(&mut net.params[l.wx..l.wh], l.input, 4 * h);
        fill(&mut net.params[l.wh..l.b], h, 4 * h);
        fill(&mut net.params[l.w1..l.b1], h, DENSE1);
        fill(&mut net.params[l.w2..l.b2], DENSE1, DENSE2);
        fill(&mut net.params[l.w3..l.b3], DENSE2, 1);
        for v in &mut net.params[l.b + h..l.b + 2 * h] {
            *v = T::one();
        }
        Ok(net)
    }

    pub fn from_params(input: usize, hidden: usize, params: Vec<T>) -> Result<Self> {
        let mut net = Self::zeros(input, hidden)?;
        if params.len() != net.layout.total {
            return Err(ModelError::usage(format!(
                "{} parameters given, architecture needs {}",
                params.len(),
                net.layout.total
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(ModelError::usage("parameters must be finite"));
        }
        net.params = params;
        Ok(net)
    }

    pub fn layout(&self) -> ParamLayout {
        self.layout
    }

    pub fn input_width(&self) -> usize {
        self.layout.input
    }

    pub fn hidden(&self) -> usize {
        self.layout.hidden
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    /// Mutable access; any cache from before this call becomes stale.
    pub fn params_mut(&mut self) -> &mut [T] {
        self.generation = next_generation();
        &mut self.params
    }

    pub fn predict(&self, seq: &Matrix<T>) -> Result<T> {
        Ok(self.forward(seq)?.output)
    }

    pub fn forward(&self, seq: &Matrix<T>) -> Result<Cache<T>> {
        if seq.cols() != self.layout.input {
            return Err(ModelError::usage(format!(
                "sequence width {} does not match network input {}",
                seq.cols(),
                self.layout.input
            )));
        }
        self.forward_flat(seq.as_slice())
    }

    /// `seq` is `W` rows of `input` values, row-major.
    pub fn forward_flat(&self, seq: &[T]) -> Result<Cache<T>> {
        let l = &self.layout;
        let (d, h) = (l.input, l.hidden);
        if seq.is_empty() || seq.len() % d != 0 {
            return Err(ModelError::usage(format!(
                "sequence of {} values is not a non-empty multiple of width {d}",
                seq.len()
            )));
        }
        let steps = seq.len() / d;
        let p = &self.params;
        let mut gates = vec![T::zero(); steps * 4 * h];
        let mut c = vec![T::zero(); (steps + 1) * h];
        let mut hs = vec![T::zero(); (steps + 1) * h];
        let mut a = vec![T::zero(); 4 * h];
        for t in 0..steps {
            let x = &seq[t * d..(t + 1) * d];
            let h_prev = &hs[t * h..(t + 1) * h];
            for (r, ar) in a.iter_mut().enumerate() {
                let mut acc = p[l.b + r];
                let wx = &p[l.wx + r * d..l.wx + (r + 1) * d];
                for (w, xv) in wx.iter().zip(x) {
                    acc += *w * *xv;
                }
                let wh = &p[l.wh + r * h..l.wh + (r + 1) * h];
                for (w, hv) in wh.iter().zip(h_prev) {
                    acc += *w * *hv;
                }
                *ar = acc;
            }
            let g = &mut gates[t * 4 * h..(t + 1) * 4 * h];
            for j in 0..h {
                g[j] = sigmoid(a[j]);
                g[h + j] = sigmoid(a[h + j]);
                g[2 * h + j] = a[2 * h + j].tanh();
                g[3 * h + j] = sigmoid(a[3 * h + j]);
            }
            for j in 0..h {
                let cn = g[h + j] * c[t * h + j] + g[j] * g[2 * h + j];
                c[(t + 1) * h + j] = cn;
                hs[(t + 1) * h + j] = g[3 * h + j] * cn.tanh();
            }
        }
        let h_last = &hs[steps * h..];
        let mut z1 = vec![T::zero(); DENSE1];
        for (k, z) in z1.iter_mut().enumerate() {
            let w = &p[l.w1 + k * h..l.w1 + (k + 1) * h];
            *z = w.iter().zip(h_last).fold(p[l.b1 + k], |acc, (w, v)| acc + *w * *v);
        }
        let mut z2 = vec![T::zero(); DENSE2];
        for (k, z) in z2.iter_mut().enumerate() {
            let w = &p[l.w2 + k * DENSE1..l.w2 + (k + 1) * DENSE1];
            *z = w.iter().zip(&z1).fold(p[l.b2 + k], |acc, (w, v)| acc + *w * *v);
        }
        let mut y = p[l.b3];
        for k in 0..DENSE2 {
            y += p[l.w3 + k] * z2[k].max(T::zero());
        }
        Ok(Cache {
            generation: self.generation,
            steps,
            x: seq.to_vec(),
            gates,
            c,
            h: hs,
            z1,
            z2,
            output: y,
        })
    }

    /// Gradient of a loss with `dL/dy = dy` with respect to every
    /// parameter, by backpropagation through time.
    pub fn backward(&self, cache: &Cache<T>, dy: T) -> Result<Vec<T>> {
        let mut grad = vec![T::zero(); self.params.len()];
        self.backward_into(cache, dy, &mut grad)?;
        Ok(grad)
    }

    /// Like [`backward`](Self::backward) but adds into `grad`.
    pub fn backward_into(&self, cache: &Cache<T>, dy: T, grad: &mut [T]) -> Result<()> {
        if cache.generation != self.generation {
            return Err(ModelError::usage("cache is stale: parameters changed since the forward pass"));
        }
        if grad.len() != self.params.len() {
            return Err(ModelError::usage("gradient buffer has the wrong length"));
        }
        let l = &self.layout;
        let (d, h) = (l.input, l.hidden);
        let p = &self.params;
        let steps = cache.steps;

        // Head.
        grad[l.b3] += dy;
        let mut dz2 = [T::zero(); DENSE2];
        for k in 0..DENSE2 {
            let a2 = cache.z2[k].max(T::zero());
            grad[l.w3 + k] += dy * a2;
            if cache.z2[k] > T::zero() {
                dz2[k] = dy * p[l.w3 + k];
            }
        }
        let mut dz1 = [T::zero(); DENSE1];
        for k in 0..DENSE2 {
            if dz2[k] == T::zero() {
                continue;
            }
            grad[l.b2 + k] += dz2[k];
            for j in 0..DENSE1 {
                grad[l.w2 + k * DENSE1 + j] += dz2[k] * cache.z1[j];
                dz1[j] += p[l.w2 + k * DENSE1 + j] * dz2[k];
            }
        }
        let h_last = &cache.h[steps * h..];
        let mut dh = vec![T::zero(); h];
        for k in 0..DENSE1 {
            grad[l.b1 + k] += dz1[k];
            for j in 0..h {
                grad[l.w1 + k * h + j] += dz1[k] * h_last[j];
                dh[j] += p[l.w1 + k * h + j] * dz1[k];
            }
        }

        // Through time.
        let mut dc = vec![T::zero(); h];
        let mut da = vec![T::zero(); 4 * h];
        for t in (0..steps).rev() {
            let g = &cache.gates[t * 4 * h..(t + 1) * 4 * h];
            let c_prev = &cache.c[t * h..(t + 1) * h];
            let c_now = &cache.c[(t + 1) * h..(t + 2) * h];
            for j in 0..h {
                let (i, f, gg, o) = (g[j], g[h + j], g[2 * h + j], g[3 * h + j]);
                let tc = c_now[j].tanh();
                let d_o = dh[j] * tc;
                let dcj = dc[j] + dh[j] * o * (T::one() - tc * tc);
                let di = dcj * gg;
                let dg = dcj * i;
                let df = dcj * c_prev[j];
                dc[j] = dcj * f;
                da[j] = di * i * (T::one() - i);
                da[h + j] = df * f * (T::one() - f);
                da[2 * h + j] = dg * (T::one() - gg * gg);
                da[3 * h + j] = d_o * o * (T::one() - o);
            }
            let x = &cache.x[t * d..(t + 1) * d];
            let h_prev = &cache.h[t * h..(t + 1) * h];
            for v in dh.iter_mut() {
                *v = T::zero();
            }
            for r in 0..4 * h {
                let a = da[r];
                if a == T::zero() {
                    continue;
                }
                grad[l.b + r] += a;
                for (k, xv) in x.iter().enumerate() {
                    grad[l.wx + r * d + k] += a * *xv;
                }
                for k in 0..h {
                    grad[l.wh + r * h + k] += a * h_prev[k];
                    dh[k] += p[l.wh + r * h + k] * a;
                }
            }
        }
        Ok(())
    }
}

/// Squared error `(y - target)^2` and its parameter gradient.
pub fn loss_and_grad<T: Scalar>(net: &LstmNetwork<T>, seq: &Matrix<T>, target: T) -> Result<(T, Vec<T>)> {
    let cache = net.forward(seq)?;
    let r = cache.output - target;
    let grad = net.backward(&cache, T::lit(2.0) * r)?;
    Ok((r * r, grad))
}

/// Largest relative error between analytic gradients and central
/// differences with step `eps`, over all parameters. The denominator is
/// floored at `1e-6` so parameters with vanishing gradient compare by
/// absolute error.
pub fn gradient_check(net: &LstmNetwork<f64>, seq: &Matrix<f64>, target: f64, eps: f64) -> Result<f64> {
    let (_, analytic) = loss_and_grad(net, seq, target)?;
    let mut probe = net.clone();
    let mut worst: f64 = 0.0;
    for k in 0..analytic.len() {
        let orig = probe.params[k];
        probe.params[k] = orig + eps;
        let up = probe.forward(seq)?.output - target;
        probe.params[k] = orig - eps;
        let down = probe.forward(seq)?.output - target;
        probe.params[k] = orig;
        let numeric = (up * up - down * down) / (2.0 * eps);
        let denom = analytic[k].abs().max(numeric.abs()).max(1e-6);
        worst = worst.max((analytic[k] - numeric).abs() / denom);
    }
    Ok(worst)
}
