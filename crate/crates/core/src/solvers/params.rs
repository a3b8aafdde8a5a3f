//! Flat parameter vectors for the neural meta-solvers.
//!
//! Every architecture is a fixed list of affine blocks. Each block stores its
//! weight matrix row-major (`out × in`) followed by its bias (`out`), and the
//! blocks are concatenated in the order returned by [`Arch::blocks`].

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::seed::{rng_from, stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arch {
    Mlp,
    Conv1d,
    Gru,
}

impl Arch {
    pub fn name(self) -> &'static str {
        match self {
            Arch::Mlp => "mlp",
            Arch::Conv1d => "conv1d",
            Arch::Gru => "gru",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mlp" => Ok(Arch::Mlp),
            "conv1d" | "conv" => Ok(Arch::Conv1d),
            "gru" => Ok(Arch::Gru),
            other => Err(Error::Config(format!("unknown meta-solver architecture `{other}`"))),
        }
    }

    /// `(out, in)` of every affine block for width `h` (hidden units, or
    /// channels for [`Arch::Conv1d`]).
    ///
    /// * Mlp: entry `1→h, h→h`; row `h→h, h→h`; head `2h→2h, 2h→1`.
    /// * Conv1d (kernel 3, so `in` counts `channels × 3`): row block
    ///   `1→h, h→h, h→1`; final block `2→h, h→h, h→1`.
    /// * Gru: entry `1→h, h→h`; column GRU input `h→3h` and hidden `h→3h`;
    ///   row GRU likewise; head `2h→2h, 2h→1`.
    pub fn blocks(self, h: usize) -> Vec<(usize, usize)> {
        match self {
            Arch::Mlp => vec![(h, 1), (h, h), (h, h), (h, h), (2 * h, 2 * h), (1, 2 * h)],
            Arch::Conv1d => {
                let k = super::conv::KERNEL;
                vec![(h, k), (h, h * k), (1, h * k), (h, 2 * k), (h, h * k), (1, h * k)]
            }
            Arch::Gru => vec![
                (h, 1),
                (h, h),
                (3 * h, h),
                (3 * h, h),
                (3 * h, h),
                (3 * h, h),
                (2 * h, 2 * h),
                (1, 2 * h),
            ],
        }
    }

    pub fn param_count(self, h: usize) -> usize {
        self.blocks(h).iter().map(|&(o, i)| o * i + o).sum()
    }
}

/// Architecture plus its flat parameter vector θ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaSolverParams {
    pub arch: Arch,
    /// `[width]`: hidden units (Mlp, Gru) or channels (Conv1d).
    pub layer_sizes: Vec<usize>,
    pub flat: Vec<f64>,
}

impl MetaSolverParams {
    pub fn new(arch: Arch, layer_sizes: Vec<usize>, flat: Vec<f64>) -> Result<Self> {
        let p = Self {
            arch,
            layer_sizes,
            flat,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn width(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_sizes.len() != 1 || self.layer_sizes[0] == 0 {
            return Err(Error::Config(format!(
                "layer sizes must be a single positive width, got {:?}",
                self.layer_sizes
            )));
        }
        let expected = self.arch.param_count(self.width());
        if self.flat.len() != expected {
            return Err(Error::Dimension {
                expected,
                got: self.flat.len(),
                context: "meta-solver parameter count",
            });
        }
        ensure_finite(&self.flat, "meta-solver parameters")
    }

    pub fn with_flat(&self, flat: Vec<f64>) -> Self {
        Self {
            arch: self.arch,
            layer_sizes: self.layer_sizes.clone(),
            flat,
        }
    }
}

/// Weights uniform in `±1/√fan_in`, biases zero.
pub fn init_params(arch: Arch, width: usize, seed: u64) -> Result<MetaSolverParams> {
    if width == 0 {
        return Err(Error::Config("meta-solver width must be positive".into()));
    }
    let mut rng = rng_from(&[stream::SOLVER_INIT, seed]);
    let mut flat = Vec::with_capacity(arch.param_count(width));
    for (out, fan_in) in arch.blocks(width) {
        let bound = 1.0 / (fan_in as f64).sqrt();
        flat.extend((0..out * fan_in).map(|_| rng.random_range(-bound..=bound)));
        flat.extend(std::iter::repeat_n(0.0, out));
    }
    MetaSolverParams::new(arch, vec![width], flat)
}

/// Sequential reader over the blocks of a flat parameter slice.
pub(crate) struct Blocks<'a, R> {
    flat: &'a [R],
    offset: usize,
}

impl<'a, R> Blocks<'a, R> {
    pub(crate) fn new(flat: &'a [R]) -> Self {
        Self { flat, offset: 0 }
    }

    /// Next `(weight, bias)` pair for an `out × in` block.
    pub(crate) fn next(&mut self, out: usize, fan_in: usize) -> (&'a [R], &'a [R]) {
        let w = &self.flat[self.offset..self.offset + out * fan_in];
        self.offset += out * fan_in;
        let b = &self.flat[self.offset..self.offset + out];
        self.offset += out;
        (w, b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mlp_count_matches_layer_arithmetic() {
        let h = 64;
        let expected = (h + h) + 3 * (h * h + h) + (4 * h * h + 2 * h) + (2 * h + 1);
        assert_eq!(Arch::Mlp.param_count(h), expected);
        assert_eq!(expected, 29_249);
    }

    #[test]
    fn init_is_deterministic_with_zero_biases() {
        for arch in [Arch::Mlp, Arch::Conv1d, Arch::Gru] {
            let a = init_params(arch, 8, 3).unwrap();
            assert_eq!(a, init_params(arch, 8, 3).unwrap());
            assert_ne!(a, init_params(arch, 8, 4).unwrap());
            let mut blocks = Blocks::new(&a.flat);
            for (o, i) in arch.blocks(8) {
                let (w, b) = blocks.next(o, i);
                assert!(b.iter().all(|&v| v == 0.0));
                let bound = 1.0 / (i as f64).sqrt();
                assert!(w.iter().all(|v| v.abs() <= bound));
            }
        }
    }

    #[test]
    fn zero_width_is_rejected() {
        assert!(init_params(Arch::Mlp, 0, 0).is_err());
    }

    #[test]
    fn wrong_length_is_rejected() {
        assert!(matches!(
            MetaSolverParams::new(Arch::Mlp, vec![2], vec![0.0; 3]),
            Err(Error::Dimension { .. })
        ));
    }
}
