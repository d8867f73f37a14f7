//! Shared inputs for the criterion benches.

use levyflat::hilbert::{orthonormalize, GridSpace, HVector, Subspace, DEFAULT_RANK_TOL};

/// `count` random subspaces of dimension `k` in a Chebyshev space of size `n`,
/// all containing the first coordinate direction.
pub fn subspaces(n: usize, k: usize, count: usize, seed: u64) -> (GridSpace, Vec<Subspace>) {
    let space = GridSpace::chebyshev(n, 10.0, "xi").expect("grid");
    let mut state = seed;
    let mut next = || {
        state = levyflat::levy::derive_seed(state, 1);
        (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    let shared = HVector::from_fn(n, |i, _| if i == 0 { 1.0 } else { 0.0 });
    let subs = (0..count)
        .map(|_| {
            let mut gens = vec![shared.clone()];
            gens.extend((1..k).map(|_| HVector::from_fn(n, |_, _| next())));
            orthonormalize(&space, &gens, DEFAULT_RANK_TOL).expect("basis")
        })
        .collect();
    (space, subs)
}
