//! Seeded random desk-scale instances for verification suites.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::instance::{normalize, BinType, Incarnation, Instance, ItemType, WeightVec};

/// Ranges for random instances; every range is inclusive.
#[derive(Clone, Debug)]
pub struct RandomParams {
    pub dims: (usize, usize),
    pub bins: (usize, usize),
    pub items: (usize, usize),
    pub incarnations: (usize, usize),
    pub demand: (i64, i64),
    pub capacity: (i64, i64),
    pub cost: (i64, i64),
}

impl Default for RandomParams {
    fn default() -> Self {
        RandomParams {
            dims: (1, 3),
            bins: (1, 3),
            items: (1, 5),
            incarnations: (1, 2),
            demand: (1, 3),
            capacity: (1, 12),
            cost: (1, 5),
        }
    }
}

/// A normalized random instance. Every incarnation is non-zero and fits the
/// bin type it was drawn against, so normalization never empties an item.
pub fn random_instance(seed: u64, params: &RandomParams) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = rng.gen_range(params.dims.0..=params.dims.1);
    let q = rng.gen_range(params.bins.0..=params.bins.1);
    let m = rng.gen_range(params.items.0..=params.items.1);
    let bins: Vec<BinType> = (0..q)
        .map(|_| BinType {
            capacity: WeightVec::new((0..p).map(|_| rng.gen_range(params.capacity.0..=params.capacity.1)).collect()),
            cost: rng.gen_range(params.cost.0..=params.cost.1),
        })
        .collect();
    let items = (0..m)
        .map(|_| {
            let count = rng.gen_range(params.incarnations.0..=params.incarnations.1);
            let incarnations = (1..=count as u32)
                .map(|j| {
                    let cap = &bins[rng.gen_range(0..q)].capacity;
                    let weight = loop {
                        let w: Vec<i64> = cap.iter().map(|&c| rng.gen_range(0..=c)).collect();
                        if w.iter().any(|&x| x > 0) {
                            break WeightVec::new(w);
                        }
                    };
                    Incarnation { index: j, weight }
                })
                .collect();
            ItemType {
                demand: rng.gen_range(params.demand.0..=params.demand.1),
                incarnations,
            }
        })
        .collect();
    let raw = Instance::new(p, bins, items).expect("generated instance is well formed");
    normalize(&raw).expect("every incarnation fits some bin").0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_and_within_ranges() {
        let params = RandomParams::default();
        for seed in 0..200 {
            let inst = random_instance(seed, &params);
            assert_eq!(inst, random_instance(seed, &params));
            assert!((1..=3).contains(&inst.dims()));
            assert!((1..=3).contains(&inst.num_bins()));
            assert!((1..=5).contains(&inst.num_items()));
            for item in inst.items() {
                assert!((1..=3).contains(&item.demand));
                assert!((1..=2).contains(&item.incarnations.len()));
                for inc in &item.incarnations {
                    assert!(!inc.weight.is_zero());
                    assert!(inst.bins().iter().any(|b| inc.weight.fits_in(&b.capacity)));
                }
            }
            assert!(inst.bins().iter().all(|b| b.capacity.iter().all(|&c| c <= 12)));
        }
    }
}
