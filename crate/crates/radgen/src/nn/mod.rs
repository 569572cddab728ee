//! Minimal neural-network foundation: a reverse-mode autodiff tape over
//! `ndarray` matrices, a named parameter set, Adam, and a binary weights
//! format.
//!
//! Everything is `f64` and single-threaded by design — training runs must
//! be bit-reproducible for a fixed seed, which rules out nondeterministic
//! reduction orders. The models in this crate are deliberately small
//! (desk-scale), so clarity wins over throughput everywhere.

mod adam;
mod graph;
mod io;

pub use adam::Adam;
pub use graph::{Tape, Var};
pub use io::{config_fingerprint, load_weights, save_weights};

use ndarray::Array2;
use rand::Rng;
use serde::Serialize;

/// Per-epoch training record: mean loss and the learning rate used.
#[derive(Debug, Clone, Default, Serialize)]
pub struct TrainLog {
    pub epoch_losses: Vec<f64>,
    pub learning_rates: Vec<f64>,
}

impl TrainLog {
    /// Number of epochs where the loss failed to improve on the previous
    /// epoch — training-health diagnostics.
    pub fn non_improving_epochs(&self) -> usize {
        self.epoch_losses
            .windows(2)
            .filter(|w| w[1] >= w[0])
            .count()
    }
}

/// An ordered, named collection of trainable matrices.
///
/// Order is the identity of a parameter for the optimizer and the
/// checkpoint format, so parameters must be registered in a fixed order.
#[derive(Debug, Clone, Default)]
pub struct ParamSet {
    entries: Vec<(String, Array2<f64>)>,
}

impl ParamSet {
    pub fn new() -> ParamSet {
        ParamSet::default()
    }

    /// Registers a parameter and returns its index. Names must be unique.
    pub fn add(&mut self, name: &str, value: Array2<f64>) -> usize {
        assert!(
            self.index_of(name).is_none(),
            "duplicate parameter name {name:?}"
        );
        self.entries.push((name.to_string(), value));
        self.entries.len() - 1
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.entries.iter().position(|(n, _)| n == name)
    }

    pub fn value(&self, index: usize) -> &Array2<f64> {
        &self.entries[index].1
    }

    pub fn value_mut(&mut self, index: usize) -> &mut Array2<f64> {
        &mut self.entries[index].1
    }

    pub fn by_name(&self, name: &str) -> Option<&Array2<f64>> {
        self.index_of(name).map(|i| self.value(i))
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &Array2<f64>)> {
        self.entries.iter().map(|(n, v)| (n.as_str(), v))
    }

    /// Inserts every parameter into a tape as a leaf, in registration
    /// order, returning the variables in the same order. A training step
    /// reads gradients back through these.
    pub fn insert_into(&self, tape: &mut Tape) -> Vec<Var> {
        self.entries
            .iter()
            .map(|(_, v)| tape.leaf(v.clone()))
            .collect()
    }
}

/// Uniform Xavier/Glorot initialization: U(±√(6/(fan_in + fan_out))).
pub fn xavier_init<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Array2<f64> {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_simple_fn((rows, cols), || rng.gen_range(-bound..bound))
}

/// All-zeros matrix, the conventional bias initialization.
pub fn zeros(rows: usize, cols: usize) -> Array2<f64> {
    Array2::zeros((rows, cols))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn param_registration_preserves_order_and_uniqueness() {
        let mut params = ParamSet::new();
        let a = params.add("a", zeros(2, 2));
        let b = params.add("b", zeros(1, 3));
        assert_eq!((a, b), (0, 1));
        assert_eq!(params.index_of("b"), Some(1));
        assert!(params.by_name("c").is_none());
    }

    #[test]
    #[should_panic(expected = "duplicate parameter name")]
    fn duplicate_names_are_rejected() {
        let mut params = ParamSet::new();
        params.add("w", zeros(1, 1));
        params.add("w", zeros(1, 1));
    }

    #[test]
    fn xavier_respects_bound_and_seed() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let w = xavier_init(&mut rng, 30, 34);
        let bound = (6.0 / 64.0f64).sqrt();
        assert!(w.iter().all(|x| x.abs() < bound));

        let mut rng2 = ChaCha8Rng::seed_from_u64(7);
        let w2 = xavier_init(&mut rng2, 30, 34);
        assert_eq!(w, w2);
    }
}
