//! Seeded random generators for the randomized checks.
//!
//! Everything here is deterministic given the seed, so runs that record a
//! seed reproduce byte-identical artifacts.

use nalgebra::{DMatrix, DVector};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::fock;
use crate::gsb::{ModelSpec, SpinSystem};
use crate::linalg::{self, C64, CMatrix, CVector};
use crate::modes::{Dispersion, FormFactor, ModeGrid, Tail};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_complex(rng: &mut ChaCha8Rng) -> C64 {
    C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

pub fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> CVector {
    DVector::from_fn(n, |_, _| random_complex(rng))
}

pub fn random_hermitian(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
    let a = DMatrix::from_fn(n, n, |_, _| random_complex(rng));
    (&a + a.adjoint()).scale(0.5)
}

/// Haar-ish unitary: eigenvectors of a random Hermitian matrix.
pub fn random_unitary(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
    let h = random_hermitian(rng, n);
    linalg::HermitianEig::new(&h, 1e-9)
        .expect("random Hermitian matrix decomposes")
        .vectors
}

/// Random form factor on a grid; finitely many samples carry no declared
/// asymptotics, so the tail is compact.
pub fn random_form_factor(rng: &mut ChaCha8Rng, grid: &ModeGrid, label: &str) -> FormFactor {
    FormFactor::new(
        (0..grid.len()).map(|_| random_complex(rng)).collect(),
        Tail::Compact,
        label,
    )
}

/// Commuting normal family B_j = U diag_j adj(U) with a shared random
/// eigenbasis. Every eigenvector carries at least one eigenvalue of
/// modulus 0.3 or more, so the joint kernel is trivial. Returns the
/// family, the generating unitary, and the eigenvalue tables.
pub fn random_commuting_normal_family(
    rng: &mut ChaCha8Rng,
    dim: usize,
    count: usize,
) -> (Vec<CMatrix>, CMatrix, Vec<CVector>) {
    let u = random_unitary(rng, dim);
    let mut tables: Vec<CVector> = (0..count).map(|_| random_vector(rng, dim)).collect();
    for a in 0..dim {
        let max_mod = tables.iter().map(|t| t[a].norm()).fold(0.0, f64::max);
        if max_mod < 0.3 {
            tables[0][a] = C64::new(0.5, 0.3);
        }
    }
    let family = tables
        .iter()
        .map(|t| &u * CMatrix::from_diagonal(t) * u.adjoint())
        .collect();
    (family, u, tables)
}

/// Random admissible model for the resolvent cross-checks: small level
/// count, few modes, couplings and factors scaled so that the spectrum
/// stays above -2.5 and the probe points on the negative axis keep a safe
/// distance from it.
pub fn random_small_model(rng: &mut ChaCha8Rng) -> ModelSpec {
    let d = rng.random_range(1..=3usize);
    let n = rng.random_range(1..=2usize);
    let m = rng.random_range(1..=3usize);
    let n_max = rng.random_range(2..=3usize);

    let grid = if m == 1 {
        ModeGrid::from_nodes(
            vec![1.0],
            vec![1.0],
            Dispersion::Constant { value: 1.0 + rng.random_range(0.0..2.0) },
            1.0,
        )
        .unwrap()
    } else {
        ModeGrid::uniform(
            1.0,
            1.0 + m as f64,
            m,
            Dispersion::Massive { mass: 1.0 },
            1.0,
        )
        .unwrap()
    };
    let basis = fock::build_basis(m, n_max).unwrap();

    let (family, _, _) = random_commuting_normal_family(rng, d, n);
    let family: Vec<CMatrix> = family.into_iter().map(|b| b.scale(0.7)).collect();
    let k = random_hermitian(rng, d).scale(0.3);
    let spin = SpinSystem::new(k, family, vec![]).unwrap();

    let mut factors: Vec<FormFactor> = (0..n)
        .map(|j| {
            let f = random_form_factor(rng, &grid, &format!("f{j}"));
            FormFactor::new(
                f.values.iter().map(|v| v * 0.4).collect(),
                f.tail,
                f.label,
            )
        })
        .collect();

    // keep the interacting spectrum well above the probe points
    loop {
        let spec = ModelSpec::new(spin.clone(), grid.clone(), factors.clone(), basis.clone())
            .unwrap();
        let h = crate::gsb::assemble_hamiltonian(&spec).unwrap();
        let eig = linalg::HermitianEig::new(&h.matrix, 1e-10).unwrap();
        if eig.min_value() > -2.5 {
            return spec;
        }
        for f in &mut factors {
            for v in &mut f.values {
                *v *= 0.5;
            }
        }
    }
}
