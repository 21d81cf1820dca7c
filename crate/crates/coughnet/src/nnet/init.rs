//! Seeded parameter initialization.

use rand::Rng;

/// Kaiming-uniform fan-in initialization: U(−√(6/fan_in), √(6/fan_in)).
///
/// The variance-preserving choice for ReLU stacks. Biases are left at zero
/// by the layer constructors, so only weight tensors pass through here.
pub fn kaiming_uniform(rng: &mut impl Rng, fan_in: usize, weights: &mut [f64]) {
    let bound = (6.0 / fan_in as f64).sqrt();
    for w in weights {
        *w = rng.random_range(-bound..bound);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn bounds_and_determinism() {
        let mut a = vec![0.0; 1000];
        let mut b = vec![0.0; 1000];
        kaiming_uniform(&mut ChaCha8Rng::seed_from_u64(7), 64, &mut a);
        kaiming_uniform(&mut ChaCha8Rng::seed_from_u64(7), 64, &mut b);
        assert_eq!(a, b);
        let bound = (6.0f64 / 64.0).sqrt();
        assert!(a.iter().all(|w| w.abs() < bound));
        // Not degenerate: both signs present and spread out.
        assert!(a.iter().filter(|w| **w > 0.0).count() > 300);
        assert!(a.iter().filter(|w| **w < 0.0).count() > 300);
    }
}
