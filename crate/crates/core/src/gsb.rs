//! Spin-boson Hamiltonians on the product of a finite level space with the
//! truncated Fock space.
//!
//! A model is a finite-dimensional energy matrix K, a family of coupling
//! matrices B_1..B_N, and one form factor per coupling. The interaction is
//! assembled as A = sum_j adj(B_j) (x) a(f_j), and the full Hamiltonian is
//! H = K (x) 1 + 1 (x) dGamma(omega) + adj(A) + A.
//!
//! The couplings are admissible when each B_j is normal, they all commute,
//! and their joint kernel is trivial; `validate_interaction` grades all
//! three. Admissible families share a common orthonormal eigenbasis, in
//! which A splits into one ordinary annihilator per eigenvector, with the
//! combined factor sum_j b_j^(a) f_j.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{self, FockBasis, LinOp};
use crate::linalg::{self, C64, CMatrix, CVector};
use crate::modes::{FormFactor, FormFactorSpec, ModeGrid};

/// Residual tolerance for the interaction assumption.
pub const ASSUMPTION_TOL: f64 = 1e-10;

/// Residual tolerance for the common eigenbasis.
pub const EIGENBASIS_TOL: f64 = 1e-9;

/// Atom system: level dimension, self-adjoint energy matrix, and the
/// coupling matrices modulating the interaction with the field.
#[derive(Debug, Clone)]
pub struct SpinSystem {
    dim: usize,
    energy: CMatrix,
    couplings: Vec<CMatrix>,
    labels: Vec<String>,
}

impl SpinSystem {
    pub fn new(energy: CMatrix, couplings: Vec<CMatrix>, labels: Vec<String>) -> Result<Self> {
        let dim = energy.nrows();
        if dim == 0 || energy.ncols() != dim {
            return Err(Error::InvalidSpin("energy matrix must be square and nonempty".into()));
        }
        let defect = linalg::hermiticity_defect(&energy);
        if defect > 1e-12 {
            return Err(Error::InvalidSpin(format!(
                "energy matrix is not self-adjoint (defect {defect:.3e})"
            )));
        }
        if couplings.is_empty() {
            return Err(Error::InvalidSpin("need at least one coupling matrix".into()));
        }
        if couplings.iter().any(|b| b.nrows() != dim || b.ncols() != dim) {
            return Err(Error::InvalidSpin("coupling dimensions do not match the energy matrix".into()));
        }
        let labels = if labels.is_empty() {
            (0..couplings.len()).map(|j| format!("B{}", j + 1)).collect()
        } else if labels.len() == couplings.len() {
            labels
        } else {
            return Err(Error::InvalidSpin("one label per coupling required".into()));
        };
        Ok(Self {
            dim,
            energy,
            couplings,
            labels,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coupling_count(&self) -> usize {
        self.couplings.len()
    }

    pub fn energy(&self) -> &CMatrix {
        &self.energy
    }

    pub fn couplings(&self) -> &[CMatrix] {
        &self.couplings
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }
}

/// Per-coupling diagnostics for the normal/commuting/joint-kernel check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AssumptionReport {
    /// || adj(B_j) B_j - B_j adj(B_j) || per coupling.
    pub normal_defects: Vec<f64>,
    /// || [B_j, B_l] || for j < l.
    pub commutator_defects: Vec<(usize, usize, f64)>,
    /// Smallest singular value of the vertically stacked couplings; positive
    /// means the joint kernel is trivial.
    pub joint_kernel_margin: f64,
    pub verdict: bool,
}

impl AssumptionReport {
    pub fn all_normal(&self) -> bool {
        self.normal_defects.iter().all(|&d| d < ASSUMPTION_TOL)
    }

    pub fn all_commuting(&self) -> bool {
        self.commutator_defects.iter().all(|&(_, _, d)| d < ASSUMPTION_TOL)
    }

    pub fn joint_kernel_trivial(&self) -> bool {
        self.joint_kernel_margin > ASSUMPTION_TOL
    }
}

/// Grade the coupling family: normality per matrix, commutation per pair,
/// and triviality of the joint kernel via the stacked singular values.
pub fn validate_interaction(spin: &SpinSystem) -> AssumptionReport {
    let normal_defects: Vec<f64> = spin
        .couplings
        .iter()
        .map(|b| linalg::operator_norm(&(b.adjoint() * b - b * b.adjoint())))
        .collect();
    let mut commutator_defects = Vec::new();
    for j in 0..spin.couplings.len() {
        for l in (j + 1)..spin.couplings.len() {
            let comm = &spin.couplings[j] * &spin.couplings[l]
                - &spin.couplings[l] * &spin.couplings[j];
            commutator_defects.push((j, l, linalg::operator_norm(&comm)));
        }
    }
    let n = spin.couplings.len();
    let mut stacked = CMatrix::zeros(n * spin.dim, spin.dim);
    for (j, b) in spin.couplings.iter().enumerate() {
        stacked.view_mut((j * spin.dim, 0), (spin.dim, spin.dim)).copy_from(b);
    }
    let joint_kernel_margin = linalg::smallest_singular_value(&stacked);
    let verdict = normal_defects.iter().all(|&d| d < ASSUMPTION_TOL)
        && commutator_defects.iter().all(|&(_, _, d)| d < ASSUMPTION_TOL)
        && joint_kernel_margin > ASSUMPTION_TOL;
    AssumptionReport {
        normal_defects,
        commutator_defects,
        joint_kernel_margin,
        verdict,
    }
}

/// Common orthonormal eigenbasis of an admissible coupling family.
#[derive(Debug, Clone)]
pub struct EigStructure {
    /// Columns are the common eigenvectors u^(a).
    pub unitary: CMatrix,
    /// `eigenvalues[j][a]` is the eigenvalue of B_j on u^(a).
    pub eigenvalues: Vec<CVector>,
}

impl EigStructure {
    pub fn dim(&self) -> usize {
        self.unitary.nrows()
    }

    /// || adj(U) U - 1 ||.
    pub fn unitarity_defect(&self) -> f64 {
        let d = self.dim();
        linalg::operator_norm(&(self.unitary.adjoint() * &self.unitary - linalg::identity(d)))
    }

    /// max_j || B_j U - U diag(b_j) ||.
    pub fn diagonalization_defect(&self, spin: &SpinSystem) -> f64 {
        spin.couplings
            .iter()
            .zip(&self.eigenvalues)
            .map(|(b, vals)| {
                let diag = CMatrix::from_diagonal(vals);
                linalg::operator_norm(&(b * &self.unitary - &self.unitary * diag))
            })
            .fold(0.0, f64::max)
    }
}

/// Simultaneously diagonalize the coupling family.
///
/// Requires `validate_interaction` to pass. A random self-adjoint mixture of
/// the couplings and their adjoints is diagonalized; clusters that the
/// mixture leaves degenerate are refined recursively, and clusters that are
/// jointly degenerate are re-spanned deterministically from the standard
/// basis. Column phases are canonical (largest entry real positive) and
/// columns are sorted by their eigenvalue tuples, descending.
pub fn common_eigenbasis(spin: &SpinSystem) -> Result<EigStructure> {
    let report = validate_interaction(spin);
    if !report.verdict {
        return Err(Error::AssumptionViolated(describe_failure(&report)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED_CA5E);
    let mut best_residual = f64::INFINITY;
    for _attempt in 0..8 {
        let basis = diagonalize_family(&spin.couplings, &mut rng, 0)?;
        let mut structure = assemble_structure(spin, basis);
        canonicalize(&mut structure);
        let residual = structure
            .diagonalization_defect(spin)
            .max(structure.unitarity_defect());
        if residual < EIGENBASIS_TOL {
            // the trivial joint kernel guarantees every eigenvector carries
            // a nonzero eigenvalue of some coupling
            for a in 0..spin.dim {
                let max_mod = structure
                    .eigenvalues
                    .iter()
                    .map(|vals| vals[a].norm())
                    .fold(0.0, f64::max);
                debug_assert!(max_mod > ASSUMPTION_TOL, "column {a} annihilated by all couplings");
            }
            return Ok(structure);
        }
        best_residual = best_residual.min(residual);
    }
    Err(Error::DiagonalizationFailed {
        residual: best_residual,
        tol: EIGENBASIS_TOL,
    })
}

fn describe_failure(report: &AssumptionReport) -> String {
    let mut parts = Vec::new();
    if !report.all_normal() {
        parts.push("a coupling is not normal".to_string());
    }
    if !report.all_commuting() {
        parts.push("couplings do not commute".to_string());
    }
    if !report.joint_kernel_trivial() {
        parts.push(format!(
            "joint kernel is nontrivial (stacked singular margin {:.3e})",
            report.joint_kernel_margin
        ));
    }
    parts.join("; ")
}

/// Recursively produce an orthonormal basis diagonalizing every matrix in
/// the (commuting, normal) family. Returns the basis as matrix columns.
fn diagonalize_family(family: &[CMatrix], rng: &mut ChaCha8Rng, depth: usize) -> Result<CMatrix> {
    let d = family[0].nrows();
    if d == 1 {
        return Ok(linalg::identity(1));
    }
    if depth > 6 {
        return Err(Error::DiagonalizationFailed {
            residual: f64::INFINITY,
            tol: EIGENBASIS_TOL,
        });
    }
    let i = C64::new(0.0, 1.0);
    let mut mixture = CMatrix::zeros(d, d);
    for b in family {
        let c: f64 = rng.random_range(-1.0..1.0);
        let s: f64 = rng.random_range(-1.0..1.0);
        mixture += (b + b.adjoint()).scale(c);
        mixture += (b - b.adjoint()).map(|x| x * i).scale(s);
    }
    let eig = linalg::HermitianEig::new(&mixture, 1e-9)?;
    let scale = eig
        .values
        .iter()
        .fold(0.0f64, |m, &v| m.max(v.abs()))
        .max(1.0);
    let cluster_tol = 1e-9 * scale;

    let mut basis = CMatrix::zeros(d, d);
    let mut filled = 0;
    let mut start = 0;
    while start < d {
        let mut end = start + 1;
        while end < d && (eig.values[end] - eig.values[end - 1]).abs() <= cluster_tol {
            end += 1;
        }
        let cluster = eig.vectors.columns(start, end - start).into_owned();
        let width = end - start;
        if width == 1 {
            basis.set_column(filled, &cluster.column(0));
            filled += 1;
        } else {
            // compress the family onto the cluster and check whether any
            // member still acts nontrivially there
            let compressed: Vec<CMatrix> = family
                .iter()
                .map(|b| cluster.adjoint() * b * &cluster)
                .collect();
            let nontrivial = compressed.iter().any(|c| off_diagonal_norm(c) > cluster_tol);
            let columns = if nontrivial {
                let inner = diagonalize_family(&compressed, rng, depth + 1)?;
                &cluster * inner
            } else {
                // jointly degenerate: re-span deterministically from the
                // standard basis
                standard_respan(&cluster)
            };
            for c in 0..width {
                basis.set_column(filled, &columns.column(c));
                filled += 1;
            }
        }
        start = end;
    }
    debug_assert_eq!(filled, d);
    Ok(basis)
}

fn off_diagonal_norm(m: &CMatrix) -> f64 {
    let mut off = m.clone();
    for i in 0..m.nrows().min(m.ncols()) {
        off[(i, i)] = C64::new(0.0, 0.0);
    }
    linalg::operator_norm(&off)
}

/// Orthonormal basis of the column span of `cluster`, built by projecting
/// standard basis vectors in index order and running Gram-Schmidt.
fn standard_respan(cluster: &CMatrix) -> CMatrix {
    let d = cluster.nrows();
    let width = cluster.ncols();
    let projector = cluster * cluster.adjoint();
    let mut out = CMatrix::zeros(d, width);
    let mut got = 0;
    for k in 0..d {
        if got == width {
            break;
        }
        let mut v: CVector = projector.column(k).into_owned();
        for c in 0..got {
            let col = out.column(c).into_owned();
            let overlap = col.dotc(&v);
            v -= col * overlap;
        }
        let norm = v.norm();
        if norm > 1e-8 {
            out.set_column(got, &v.unscale(norm));
            got += 1;
        }
    }
    if got < width {
        // projected standard vectors did not span; fall back to the cluster
        return cluster.clone();
    }
    out
}

fn assemble_structure(spin: &SpinSystem, basis: CMatrix) -> EigStructure {
    let d = spin.dim;
    let eigenvalues: Vec<CVector> = spin
        .couplings
        .iter()
        .map(|b| {
            CVector::from_iterator(
                d,
                (0..d).map(|a| {
                    let u = basis.column(a);
                    u.dotc(&(b * u.into_owned()))
                }),
            )
        })
        .collect();
    EigStructure {
        unitary: basis,
        eigenvalues,
    }
}

/// Canonical phases and deterministic column order.
fn canonicalize(structure: &mut EigStructure) {
    let d = structure.dim();
    let n = structure.eigenvalues.len();
    for a in 0..d {
        let col = structure.unitary.column(a).into_owned();
        let (mut phase, mut maxmod) = (C64::new(1.0, 0.0), 0.0);
        for x in col.iter() {
            if x.norm() > maxmod + 1e-12 {
                maxmod = x.norm();
                phase = x / x.norm();
            }
        }
        let fixed = col.map(|x| x / phase);
        structure.unitary.set_column(a, &fixed);
    }
    let mut order: Vec<usize> = (0..d).collect();
    let key = |a: usize| -> Vec<(f64, f64)> {
        (0..n)
            .map(|j| {
                let v = structure.eigenvalues[j][a];
                (snap(v.re), snap(v.im))
            })
            .collect()
    };
    order.sort_by(|&p, &q| key(q).partial_cmp(&key(p)).unwrap());
    let unitary = CMatrix::from_fn(d, d, |i, a| structure.unitary[(i, order[a])]);
    let eigenvalues = structure
        .eigenvalues
        .iter()
        .map(|vals| CVector::from_iterator(d, order.iter().map(|&a| vals[a])))
        .collect();
    structure.unitary = unitary;
    structure.eigenvalues = eigenvalues;
}

fn snap(x: f64) -> f64 {
    (x / 1e-8).round() * 1e-8
}

/// A complete model: atom system, mode grid, one form factor per coupling,
/// and the truncated Fock basis.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub spin: SpinSystem,
    pub grid: ModeGrid,
    pub factors: Vec<FormFactor>,
    pub basis: FockBasis,
    pub preset: Option<String>,
}

impl ModelSpec {
    pub fn new(
        spin: SpinSystem,
        grid: ModeGrid,
        factors: Vec<FormFactor>,
        basis: FockBasis,
    ) -> Result<Self> {
        if factors.len() != spin.coupling_count() {
            return Err(Error::PresetParams(format!(
                "{} factors for {} couplings",
                factors.len(),
                spin.coupling_count()
            )));
        }
        for f in &factors {
            if f.values.len() != grid.len() {
                return Err(Error::GridMismatch {
                    factor: f.values.len(),
                    grid: grid.len(),
                });
            }
        }
        if basis.mode_count() != grid.len() {
            return Err(Error::BasisMismatch {
                basis: basis.mode_count(),
                grid: grid.len(),
            });
        }
        Ok(Self {
            spin,
            grid,
            factors,
            basis,
            preset: None,
        })
    }

    /// Dimension of the product space.
    pub fn total_dim(&self) -> usize {
        self.spin.dim() * self.basis.len()
    }

    /// Same model with the factors replaced (for cutoff ladders).
    pub fn with_factors(&self, factors: Vec<FormFactor>) -> Result<Self> {
        let mut other = Self::new(self.spin.clone(), self.grid.clone(), factors, self.basis.clone())?;
        other.preset = self.preset.clone();
        Ok(other)
    }
}

/// Free Hamiltonian K (x) 1 + 1 (x) dGamma(omega).
pub fn assemble_free(spec: &ModelSpec) -> Result<LinOp> {
    let fock_dim = spec.basis.len();
    let dgamma = fock::second_quantize(&spec.grid, &spec.basis)?;
    let id_fock = linalg::identity(fock_dim);
    let id_spin = linalg::identity(spec.spin.dim());
    let m = spec.spin.energy().kronecker(&id_fock) + id_spin.kronecker(&dgamma.matrix);
    Ok(LinOp::new(m))
}

/// Annihilation part of the interaction: A = sum_j adj(B_j) (x) a(f_j).
pub fn assemble_a(spec: &ModelSpec) -> Result<LinOp> {
    let dim = spec.total_dim();
    let mut m = CMatrix::zeros(dim, dim);
    let mut src_scale = 0.0f64;
    for (b, f) in spec.spin.couplings().iter().zip(&spec.factors) {
        let a = fock::annihilator(f, &spec.basis, &spec.grid)?;
        m += b.adjoint().kronecker(&a.matrix);
        src_scale = src_scale.max(a.src_scale);
    }
    Ok(LinOp::with_scales(m, src_scale, 0.0))
}

/// Full Hamiltonian H = H_free + adj(A) + A; Hermitian by construction.
pub fn assemble_hamiltonian(spec: &ModelSpec) -> Result<LinOp> {
    let free = assemble_free(spec)?;
    let a = assemble_a(spec)?;
    Ok(&(&free + &a.adjoint()) + &a)
}

/// Split the interaction along the common eigenbasis: one annihilator
/// a(sum_j b_j^(a) f_j) per eigenvector.
pub fn block_decompose(spec: &ModelSpec, eig: &EigStructure) -> Result<Vec<LinOp>> {
    let d = spec.spin.dim();
    let refs: Vec<&FormFactor> = spec.factors.iter().collect();
    let mut blocks = Vec::with_capacity(d);
    for a in 0..d {
        let coeffs: Vec<C64> = (0..spec.spin.coupling_count())
            .map(|j| eig.eigenvalues[j][a])
            .collect();
        let combined = FormFactor::linear_combination(&coeffs, &refs, format!("block{a}"))?;
        blocks.push(fock::annihilator(&combined, &spec.basis, &spec.grid)?);
    }
    Ok(blocks)
}

/// || adj(U (x) 1) A (U (x) 1) - blockdiag(blocks) ||.
pub fn block_defect(spec: &ModelSpec, eig: &EigStructure, blocks: &[LinOp]) -> Result<f64> {
    let a = assemble_a(spec)?;
    let id_fock = linalg::identity(spec.basis.len());
    let u_full = eig.unitary.kronecker(&id_fock);
    let conjugated = u_full.adjoint() * &a.matrix * &u_full;
    let fdim = spec.basis.len();
    let mut direct_sum = CMatrix::zeros(spec.total_dim(), spec.total_dim());
    for (i, b) in blocks.iter().enumerate() {
        direct_sum
            .view_mut((i * fdim, i * fdim), (fdim, fdim))
            .copy_from(&b.matrix);
    }
    Ok(linalg::operator_norm(&(conjugated - direct_sum)))
}

pub mod pauli {
    use super::*;

    pub fn sigma_x() -> CMatrix {
        CMatrix::from_row_slice(
            2,
            2,
            &[
                C64::new(0.0, 0.0),
                C64::new(1.0, 0.0),
                C64::new(1.0, 0.0),
                C64::new(0.0, 0.0),
            ],
        )
    }

    pub fn sigma_z() -> CMatrix {
        CMatrix::from_row_slice(
            2,
            2,
            &[
                C64::new(1.0, 0.0),
                C64::new(0.0, 0.0),
                C64::new(0.0, 0.0),
                C64::new(-1.0, 0.0),
            ],
        )
    }

    pub fn sigma_plus() -> CMatrix {
        CMatrix::from_row_slice(
            2,
            2,
            &[
                C64::new(0.0, 0.0),
                C64::new(1.0, 0.0),
                C64::new(0.0, 0.0),
                C64::new(0.0, 0.0),
            ],
        )
    }

    /// 1 (x) ... (x) op (x) ... (x) 1 with `op` in slot `j` of `n` qubit
    /// factors.
    pub fn embed_qubit(op: &CMatrix, j: usize, n: usize) -> CMatrix {
        let mut out = linalg::identity(1);
        for slot in 0..n {
            let factor = if slot == j { op.clone() } else { linalg::identity(2) };
            out = out.kronecker(&factor);
        }
        out
    }
}

/// Parameters accepted by [`preset`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PresetParams {
    /// Level splittings, one per atom.
    pub splittings: Vec<f64>,
    /// Form factor recipes, one per coupling; a single entry is broadcast.
    pub factors: Vec<FormFactorSpec>,
}

impl PresetParams {
    pub fn single(eta: f64, factor: FormFactorSpec) -> Self {
        Self {
            splittings: vec![eta],
            factors: vec![factor],
        }
    }
}

/// Build one of the shipped models.
///
/// - `sigma_x`: one two-level atom with off-diagonal coupling (decay),
/// - `sigma_x_multi`: N such atoms, couplings acting on their own factor,
/// - `sigma_z`: one two-level atom with diagonal coupling (dephasing),
/// - `sigma_z_multi`: N atoms with diagonal couplings,
/// - `rwa`: the rotating-wave coupling; rejected by the validator, shipped
///   for the negative test only,
/// - `van_hove`: one trivial level, a single scalar coupling.
pub fn preset(
    name: &str,
    params: &PresetParams,
    grid: ModeGrid,
    basis: FockBasis,
) -> Result<ModelSpec> {
    let n_atoms = params.splittings.len();
    if n_atoms == 0 {
        return Err(Error::PresetParams("need at least one splitting".into()));
    }
    let factor_specs: Vec<FormFactorSpec> = if params.factors.len() == n_atoms {
        params.factors.clone()
    } else if params.factors.len() == 1 {
        vec![params.factors[0].clone(); n_atoms]
    } else {
        return Err(Error::PresetParams(format!(
            "{} factor recipes for {} atoms",
            params.factors.len(),
            n_atoms
        )));
    };
    let factors: Vec<FormFactor> = factor_specs.iter().map(|s| s.realize(&grid)).collect();

    let single_atom = |coupling: CMatrix| -> Result<ModelSpec> {
        if n_atoms != 1 {
            return Err(Error::PresetParams(format!(
                "preset `{name}` takes exactly one atom, got {n_atoms}"
            )));
        }
        let k = pauli::sigma_z().scale(params.splittings[0] / 2.0);
        let spin = SpinSystem::new(k, vec![coupling], vec![name.to_string()])?;
        ModelSpec::new(spin, grid.clone(), factors.clone(), basis.clone())
    };

    let multi_atom = |op: CMatrix| -> Result<ModelSpec> {
        if n_atoms > 12 {
            return Err(Error::PresetParams(format!(
                "{n_atoms} atoms would need a 2^{n_atoms}-dimensional level space"
            )));
        }
        let mut k = CMatrix::zeros(1 << n_atoms, 1 << n_atoms);
        for (j, &eta) in params.splittings.iter().enumerate() {
            k += pauli::embed_qubit(&pauli::sigma_z(), j, n_atoms).scale(eta / 2.0);
        }
        let couplings: Vec<CMatrix> = (0..n_atoms)
            .map(|j| pauli::embed_qubit(&op, j, n_atoms))
            .collect();
        let labels = (0..n_atoms).map(|j| format!("{name}[{j}]")).collect();
        let spin = SpinSystem::new(k, couplings, labels)?;
        ModelSpec::new(spin, grid.clone(), factors.clone(), basis.clone())
    };

    let mut spec = match name {
        "sigma_x" => single_atom(pauli::sigma_x())?,
        "sigma_z" => single_atom(pauli::sigma_z())?,
        "rwa" => single_atom(pauli::sigma_plus())?,
        "sigma_x_multi" => multi_atom(pauli::sigma_x())?,
        "sigma_z_multi" => multi_atom(pauli::sigma_z())?,
        "van_hove" => {
            if n_atoms != 1 {
                return Err(Error::PresetParams("van_hove takes one atom entry".into()));
            }
            let k = CMatrix::from_element(1, 1, C64::new(params.splittings[0], 0.0));
            let b = CMatrix::from_element(1, 1, C64::new(1.0, 0.0));
            let spin = SpinSystem::new(k, vec![b], vec!["van_hove".into()])?;
            ModelSpec::new(spin, grid.clone(), factors.clone(), basis.clone())?
        }
        other => return Err(Error::UnknownPreset(other.to_string())),
    };
    spec.preset = Some(name.to_string());
    Ok(spec)
}
