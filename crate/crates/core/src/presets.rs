//! Named network instances used by tests, the acceptance suite and the CLI.

use crate::channel::{ChannelRealization, NetworkSpec};
use crate::linalg::{FpMatrix, Matrix, PrimeField, ScalarDomain};

/// `M = N = (10, 8, 6)`, `D_12 = 6`, `D_21 = 5`, every other cross link full
/// rank. Half the cake is 12, yet 25/2 is achievable.
pub fn counterexample() -> NetworkSpec {
    NetworkSpec::square(
        vec![10, 8, 6],
        vec![vec![0, 6, 6], vec![5, 0, 6], vec![6, 6, 0]],
    )
    .expect("preset is valid")
}

/// Same antennas as [`counterexample`]; the stripped matrix is generically
/// full rank and the ranks reduce to `[[-, 8, 2], [4, -, 4], [6, 0, -]]`.
pub fn reducible_example() -> NetworkSpec {
    NetworkSpec::square(
        vec![10, 8, 6],
        vec![vec![0, 8, 3], vec![5, 0, 4], vec![6, 2, 0]],
    )
    .expect("preset is valid")
}

/// Three users with 2 transmit and 3 receive antennas, all links full rank.
/// Sum DoF 18/5.
pub fn example_2x3() -> NetworkSpec {
    NetworkSpec::full_rank(vec![2, 2, 2], vec![3, 3, 3]).expect("preset is valid")
}

/// `M = (10, 8, 6)`, `N = (10, 10, 3)`, `D_31 = 0`, every other cross link
/// at `min(M_i, N_j)`. Sum DoF 12, achieved by `(7, 3, 2)`.
pub fn example_asym() -> NetworkSpec {
    NetworkSpec::new(
        vec![10, 8, 6],
        vec![10, 10, 3],
        vec![vec![0, 8, 6], vec![10, 0, 6], vec![0, 3, 0]],
    )
    .expect("preset is valid")
}

/// `M = (5, 3, 2)`, `D_21 = 3`, `D_31 = 2`, other cross links zero: half the
/// cake is optimal although no reduced-rank certificate exists.
pub fn theorem5_instance() -> NetworkSpec {
    NetworkSpec::square(
        vec![5, 3, 2],
        vec![vec![0, 0, 0], vec![3, 0, 0], vec![2, 0, 0]],
    )
    .expect("preset is valid")
}

/// `M = (5, 5, 3)`, `D_21 = 5`, `D_31 = D_23 = 3`, other cross links zero.
pub fn theorem6_instance() -> NetworkSpec {
    NetworkSpec::square(
        vec![5, 5, 3],
        vec![vec![0, 0, 0], vec![5, 0, 3], vec![3, 0, 0]],
    )
    .expect("preset is valid")
}

/// `rows x cols` 0/1 matrix with a diagonal run of `len` ones from `(r0, c0)`.
fn run(rows: usize, cols: usize, r0: usize, c0: usize, len: usize) -> Matrix {
    Matrix::Prime(FpMatrix::from_fn(PrimeField::mersenne61(), rows, cols, |r, c| {
        u64::from(r >= r0 && r - r0 < len && c + r0 == r + c0)
    }))
}

fn witness(spec: &NetworkSpec, block: impl Fn(usize, usize) -> Matrix) -> ChannelRealization {
    let k = spec.k();
    let blocks = (0..k).map(|j| (0..k).map(|i| block(j, i)).collect()).collect();
    ChannelRealization::from_blocks(spec, ScalarDomain::prime(), None, blocks).expect("witness fits its preset")
}

/// 0/1 channel of [`example_2x3`] whose shift-replicated cooperative
/// matrix has rank 18.
pub fn example_2x3_witness() -> ChannelRealization {
    witness(&example_2x3(), |j, i| {
        if i == (j + 2) % 3 {
            run(3, 2, 1, 0, 2)
        } else {
            run(3, 2, 0, 0, 2)
        }
    })
}

/// 0/1 channel of [`example_asym`] whose mirrored cooperative matrix has
/// rank 23.
pub fn example_asym_witness() -> ChannelRealization {
    let spec = example_asym();
    witness(&spec, |j, i| {
        let (r, c) = (spec.rx(j), spec.tx(i));
        match (j, i) {
            (0, 1) => run(r, c, 2, 0, 8),
            (2, 0) => run(r, c, 0, 0, 0),
            _ => run(r, c, 0, 0, r.min(c)),
        }
    })
}

/// 0/1 channel of [`theorem6_instance`] for which the auxiliary-user
/// cooperative matrix is square and nonsingular.
pub fn theorem6_witness() -> ChannelRealization {
    let spec = theorem6_instance();
    witness(&spec, |j, i| {
        let (r, c) = (spec.rx(j), spec.tx(i));
        let len = if j == i { r.min(c) } else { spec.rank(j, i) };
        run(r, c, 0, 0, len)
    })
}

/// Seeded random square network: `K` in `2..=k_max`, `M_k` in `1..=m_max`,
/// each cross rank uniform in `0..=min(M_i, M_j)`.
pub fn random_square_spec<R: rand::Rng + ?Sized>(rng: &mut R, k_max: usize, m_max: usize) -> NetworkSpec {
    let k = rng.random_range(2..=k_max.max(2));
    let m: Vec<usize> = (0..k).map(|_| rng.random_range(1..=m_max.max(1))).collect();
    let d = (0..k)
        .map(|j| {
            (0..k)
                .map(|i| if i == j { 0 } else { rng.random_range(0..=m[i].min(m[j])) })
                .collect()
        })
        .collect();
    NetworkSpec::square(m, d).expect("ranks drawn within bounds")
}

/// Looks a preset up by its CLI name.
pub fn by_name(name: &str) -> Option<NetworkSpec> {
    Some(match name {
        "counterexample" => counterexample(),
        "reducible" => reducible_example(),
        "example-2x3" => example_2x3(),
        "example-asym" => example_asym(),
        "theorem5" => theorem5_instance(),
        "theorem6" => theorem6_instance(),
        _ => return None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_valid_and_named() {
        for name in ["counterexample", "reducible", "example-2x3", "example-asym", "theorem5", "theorem6"] {
            assert!(by_name(name).is_some(), "{name}");
        }
        assert!(by_name("nope").is_none());
        assert_eq!(example_asym().rank(0, 1), 8);
        assert_eq!(example_asym().rank(2, 1), 3);
        assert!(!example_asym().is_square());
    }

    #[test]
    fn witnesses_respect_ranks() {
        for real in [example_2x3_witness(), example_asym_witness(), theorem6_witness()] {
            let spec = real.spec();
            for j in 0..spec.k() {
                for i in 0..spec.k() {
                    let r = real.block(j, i).as_prime().unwrap().rank();
                    assert_eq!(r, spec.rank(j, i), "H_{}_{}", j + 1, i + 1);
                }
            }
        }
    }
}
