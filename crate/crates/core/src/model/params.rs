use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Parameter roles; together with the seed and layer index they select an
/// independent generator stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    Annotation,
    NodeProjection,
    Head,
    Branch(usize),
    Score,
}

impl Role {
    fn tag(self) -> u64 {
        match self {
            Role::Annotation => 1,
            Role::NodeProjection => 2,
            Role::Head => 3,
            Role::Score => 4,
            Role::Branch(k) => 16 + k as u64,
        }
    }
}

/// Generator for `(seed, layer, role)`. Layer `usize::MAX` is used for
/// parameters outside the layer stack.
pub fn stream(seed: u64, layer: usize, role: Role) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((layer as u64) << 32) ^ role.tag());
    rng
}

/// Uniform in `[-1, 1) / sqrt(fan_in)`.
pub fn uniform_scaled(rng: &mut impl Rng, len: usize, fan_in: usize) -> Vec<f64> {
    let s = 1.0 / (fan_in.max(1) as f64).sqrt();
    (0..len).map(|_| rng.gen_range(-1.0..1.0) * s).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Linear {
    pub input: usize,
    pub output: usize,
    /// Row-major `output × input`.
    pub weight: Vec<f64>,
    pub bias: Option<Vec<f64>>,
}

impl Linear {
    pub fn seeded(rng: &mut impl Rng, input: usize, output: usize, bias: bool) -> Self {
        let weight = uniform_scaled(rng, input * output, input);
        let bias = bias.then(|| uniform_scaled(rng, output, input));
        Self { input, output, weight, bias }
    }

    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (o, w) in out.iter_mut().zip(self.weight.chunks_exact(self.input)) {
            *o = w.iter().zip(x).map(|(a, b)| a * b).sum();
        }
        if let Some(b) = &self.bias {
            for (o, b) in out.iter_mut().zip(b) {
                *o += b;
            }
        }
    }
}

pub fn silu(x: f64) -> f64 {
    x / (1.0 + (-x).exp())
}

/// `Linear → Norm → SiLU → Linear`; the normalization is applied by the
/// caller between the two halves because it needs tuple statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    pub first: Linear,
    pub second: Linear,
}

impl Mlp {
    pub fn seeded(rng: &mut impl Rng, input: usize, hidden: usize, output: usize) -> Self {
        let first = Linear::seeded(rng, input, hidden, true);
        let second = Linear::seeded(rng, hidden, output, true);
        Self { first, second }
    }
}

pub const NORM_EPS: f64 = 1e-5;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a = uniform_scaled(&mut stream(1, 0, Role::Branch(0)), 8, 4);
        let b = uniform_scaled(&mut stream(1, 0, Role::Branch(0)), 8, 4);
        let c = uniform_scaled(&mut stream(1, 0, Role::Branch(1)), 8, 4);
        let d = uniform_scaled(&mut stream(1, 1, Role::Branch(0)), 8, 4);
        let e = uniform_scaled(&mut stream(2, 0, Role::Branch(0)), 8, 4);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
        assert_ne!(a, e);
        assert!(a.iter().all(|v| v.abs() <= 0.5));
    }

    #[test]
    fn linear_apply() {
        let l = Linear { input: 2, output: 2, weight: vec![1.0, 2.0, 3.0, 4.0], bias: Some(vec![0.5, -0.5]) };
        let mut out = [0.0; 2];
        l.apply(&[1.0, -1.0], &mut out);
        assert_eq!(out, [-0.5, -1.5]);
    }

    #[test]
    fn silu_values() {
        assert_eq!(silu(0.0), 0.0);
        assert!((silu(1.0) - 0.731_058_578_630_004_9).abs() < 1e-15);
        assert!(silu(-50.0).abs() < 1e-18);
    }
}
