//! Truncated symmetric Fock space over a mode grid, in the occupation-number
//! representation, and the second-quantized operators built on it.
//!
//! States are occupation tuples (n_1, ..., n_M) with total particle number
//! at most `n_max`, ordered lexicographically with the vacuum first; that
//! ordering is a stable contract, so serialized vectors and matrices are
//! portable across runs. Quadrature weights are folded into the ladder
//! amplitudes with a sqrt(w) convention so that the commutator of an
//! annihilator and a creator reproduces the quadrature pairing exactly.
//! Creator rows that would leave the truncation are dropped, so identities
//! that are exact in infinite dimension hold here on the "safe sector" of
//! total occupation at most n_max - 1.

use std::collections::HashMap;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg::{self, C64, CMatrix, CVector};
use crate::modes::{CaseLabel, FormFactor, ModeGrid, Tail};

/// Default cap on the number of occupation states.
pub const DEFAULT_STATE_CAP: usize = 20_000;

/// Occupation-number basis of the truncated symmetric Fock space.
#[derive(Debug, Clone)]
pub struct FockBasis {
    mode_count: usize,
    n_max: usize,
    states: Vec<Vec<u32>>,
    index: HashMap<Vec<u32>, usize>,
}

/// C(m + n_max, m) without overflow for desk-scale arguments.
fn basis_dimension(modes: usize, n_max: usize) -> usize {
    let mut acc: u128 = 1;
    for i in 1..=modes {
        acc = acc * (n_max + i) as u128 / i as u128;
        if acc > usize::MAX as u128 {
            return usize::MAX;
        }
    }
    acc as usize
}

/// Enumerate occupation tuples with the configured size cap.
pub fn build_basis(mode_count: usize, n_max: usize) -> Result<FockBasis> {
    build_basis_capped(mode_count, n_max, DEFAULT_STATE_CAP)
}

pub fn build_basis_capped(mode_count: usize, n_max: usize, cap: usize) -> Result<FockBasis> {
    if mode_count == 0 {
        return Err(Error::Invalid("need at least one mode".into()));
    }
    let size = basis_dimension(mode_count, n_max);
    if size > cap {
        return Err(Error::BasisCap { size, cap });
    }
    let mut states = Vec::with_capacity(size);
    let mut current = vec![0u32; mode_count];
    enumerate(&mut states, &mut current, 0, n_max as u32);
    debug_assert_eq!(states.len(), size);
    let index = states
        .iter()
        .enumerate()
        .map(|(i, s)| (s.clone(), i))
        .collect();
    Ok(FockBasis {
        mode_count,
        n_max,
        states,
        index,
    })
}

fn enumerate(out: &mut Vec<Vec<u32>>, current: &mut Vec<u32>, mode: usize, budget: u32) {
    if mode == current.len() {
        out.push(current.clone());
        return;
    }
    for n in 0..=budget {
        current[mode] = n;
        enumerate(out, current, mode + 1, budget - n);
    }
    current[mode] = 0;
}

impl FockBasis {
    pub fn mode_count(&self) -> usize {
        self.mode_count
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[Vec<u32>] {
        &self.states
    }

    pub fn state(&self, i: usize) -> &[u32] {
        &self.states[i]
    }

    pub fn position(&self, occ: &[u32]) -> Option<usize> {
        self.index.get(occ).copied()
    }

    pub fn total_occupation(&self, i: usize) -> u32 {
        self.states[i].iter().sum()
    }

    fn check_grid(&self, grid: &ModeGrid) -> Result<()> {
        if grid.len() != self.mode_count {
            return Err(Error::BasisMismatch {
                basis: self.mode_count,
                grid: grid.len(),
            });
        }
        Ok(())
    }
}

/// Vector in the truncated Fock space, tied to its basis.
#[derive(Debug, Clone)]
pub struct FockVec<'a> {
    pub basis: &'a FockBasis,
    pub amps: CVector,
}

impl<'a> FockVec<'a> {
    pub fn new(basis: &'a FockBasis, amps: CVector) -> Result<Self> {
        if amps.len() != basis.len() {
            return Err(Error::Invalid(format!(
                "amplitude count {} does not match basis size {}",
                amps.len(),
                basis.len()
            )));
        }
        Ok(Self { basis, amps })
    }

    pub fn vacuum(basis: &'a FockBasis) -> Self {
        let mut amps = CVector::zeros(basis.len());
        amps[0] = C64::new(1.0, 0.0);
        Self { basis, amps }
    }
}

/// Dense complex matrix annotated with the Hilbert-scale exponents it is
/// read as mapping between. The annotations are metadata only.
#[derive(Debug, Clone)]
pub struct LinOp {
    pub matrix: CMatrix,
    pub src_scale: f64,
    pub dst_scale: f64,
}

impl LinOp {
    pub fn new(matrix: CMatrix) -> Self {
        Self::with_scales(matrix, 0.0, 0.0)
    }

    pub fn with_scales(matrix: CMatrix, src_scale: f64, dst_scale: f64) -> Self {
        debug_assert!(
            matrix.iter().all(|x| x.re.is_finite() && x.im.is_finite()),
            "operator entries must be finite"
        );
        Self {
            matrix,
            src_scale,
            dst_scale,
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::new(CMatrix::zeros(rows, cols))
    }

    pub fn identity(n: usize) -> Self {
        Self::new(linalg::identity(n))
    }

    pub fn dim(&self) -> usize {
        debug_assert_eq!(self.matrix.nrows(), self.matrix.ncols());
        self.matrix.nrows()
    }

    /// Conjugate transpose; by duality the scale annotations swap and flip.
    pub fn adjoint(&self) -> Self {
        Self {
            matrix: self.matrix.adjoint(),
            src_scale: -self.dst_scale,
            dst_scale: -self.src_scale,
        }
    }

    pub fn operator_norm(&self) -> f64 {
        linalg::operator_norm(&self.matrix)
    }

    pub fn hermiticity_defect(&self) -> f64 {
        linalg::hermiticity_defect(&self.matrix)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_defect() <= tol
    }

    pub fn apply(&self, v: &CVector) -> CVector {
        &self.matrix * v
    }

    pub fn scale(&self, c: C64) -> Self {
        Self {
            matrix: self.matrix.map(|x| x * c),
            src_scale: self.src_scale,
            dst_scale: self.dst_scale,
        }
    }
}

impl Mul for &LinOp {
    type Output = LinOp;
    fn mul(self, rhs: &LinOp) -> LinOp {
        LinOp {
            matrix: &self.matrix * &rhs.matrix,
            src_scale: rhs.src_scale,
            dst_scale: self.dst_scale,
        }
    }
}

impl Add for &LinOp {
    type Output = LinOp;
    fn add(self, rhs: &LinOp) -> LinOp {
        LinOp {
            matrix: &self.matrix + &rhs.matrix,
            src_scale: self.src_scale.max(rhs.src_scale),
            dst_scale: self.dst_scale.min(rhs.dst_scale),
        }
    }
}

impl Sub for &LinOp {
    type Output = LinOp;
    fn sub(self, rhs: &LinOp) -> LinOp {
        LinOp {
            matrix: &self.matrix - &rhs.matrix,
            src_scale: self.src_scale.max(rhs.src_scale),
            dst_scale: self.dst_scale.min(rhs.dst_scale),
        }
    }
}

impl Neg for &LinOp {
    type Output = LinOp;
    fn neg(self) -> LinOp {
        LinOp {
            matrix: -self.matrix.clone(),
            src_scale: self.src_scale,
            dst_scale: self.dst_scale,
        }
    }
}

fn annihilator_src_scale(tail: Tail) -> f64 {
    match crate::modes::analytic_case_of(tail) {
        CaseLabel::Case0 => 0.0,
        CaseLabel::Case1 => 1.0,
        CaseLabel::Case2 => 2.0,
        CaseLabel::Case3 => 3.0,
    }
}

/// Matrix of the annihilator a(f) in the occupation basis.
///
/// a(f) lowers mode i with amplitude conj(f_i) sqrt(w_i) sqrt(n_i); it kills
/// the vacuum, and together with its adjoint satisfies
/// [a(f), a'(g)] = pairing(f, g) on the safe sector.
pub fn annihilator(f: &FormFactor, basis: &FockBasis, grid: &ModeGrid) -> Result<LinOp> {
    basis.check_grid(grid)?;
    if f.values.len() != grid.len() {
        return Err(Error::GridMismatch {
            factor: f.values.len(),
            grid: grid.len(),
        });
    }
    let dim = basis.len();
    let mut m = CMatrix::zeros(dim, dim);
    let mut scratch = vec![0u32; basis.mode_count()];
    for (col, state) in basis.states().iter().enumerate() {
        for i in 0..basis.mode_count() {
            let n = state[i];
            if n == 0 {
                continue;
            }
            scratch.copy_from_slice(state);
            scratch[i] = n - 1;
            let row = basis
                .position(&scratch)
                .expect("lowered state stays inside the truncation");
            let amp = f.values[i].conj() * grid.weights()[i].sqrt() * (n as f64).sqrt();
            m[(row, col)] += amp;
        }
    }
    Ok(LinOp::with_scales(m, annihilator_src_scale(f.tail), 0.0))
}

/// Matrix of the creator: the conjugate transpose of the annihilator.
/// Rows that would exceed the truncation are dropped.
pub fn creator(f: &FormFactor, basis: &FockBasis, grid: &ModeGrid) -> Result<LinOp> {
    Ok(annihilator(f, basis, grid)?.adjoint())
}

/// Second quantization of the dispersion: diagonal with entries
/// sum_i n_i omega(k_i).
pub fn second_quantize(grid: &ModeGrid, basis: &FockBasis) -> Result<LinOp> {
    basis.check_grid(grid)?;
    let diag = CVector::from_iterator(
        basis.len(),
        basis.states().iter().map(|s| {
            let e: f64 = s
                .iter()
                .zip(grid.omega())
                .map(|(&n, &om)| n as f64 * om)
                .sum();
            C64::new(e, 0.0)
        }),
    );
    Ok(LinOp::new(CMatrix::from_diagonal(&diag)))
}

/// Total particle number: diagonal with entries sum_i n_i.
pub fn number_op(basis: &FockBasis) -> LinOp {
    let diag = CVector::from_iterator(
        basis.len(),
        basis
            .states()
            .iter()
            .map(|s| C64::new(s.iter().sum::<u32>() as f64, 0.0)),
    );
    LinOp::new(CMatrix::from_diagonal(&diag))
}

/// Non-normalized coherent vector with amplitudes
/// prod_i (sqrt(w_i) g_i)^{n_i} / sqrt(n_i!), truncated at n_max.
/// Every annihilator has it as an eigenvector on the safe sector:
/// a(f) eps(g) = pairing(f, g) eps(g) there.
pub fn coherent_vector<'a>(
    g_vec: &FormFactor,
    basis: &'a FockBasis,
    grid: &ModeGrid,
) -> Result<FockVec<'a>> {
    basis.check_grid(grid)?;
    if g_vec.values.len() != grid.len() {
        return Err(Error::GridMismatch {
            factor: g_vec.values.len(),
            grid: grid.len(),
        });
    }
    let alphas: Vec<C64> = g_vec
        .values
        .iter()
        .zip(grid.weights())
        .map(|(g, &w)| g * w.sqrt())
        .collect();
    let amps = CVector::from_iterator(
        basis.len(),
        basis.states().iter().map(|state| {
            let mut amp = C64::new(1.0, 0.0);
            for (i, &n) in state.iter().enumerate() {
                for m in 1..=n {
                    amp *= alphas[i] / C64::new((m as f64).sqrt(), 0.0);
                }
            }
            amp
        }),
    );
    FockVec::new(basis, amps)
}

/// Size above which callers should prefer the matrix-free applicators over
/// dense operator matrices.
pub const DENSE_STATE_THRESHOLD: usize = 5_000;

/// Apply a(f) to amplitudes without materializing the matrix. Same
/// amplitude convention as [`annihilator`]; meant for bases above
/// [`DENSE_STATE_THRESHOLD`] where dense storage stops being sensible.
pub fn apply_annihilator(
    f: &FormFactor,
    basis: &FockBasis,
    grid: &ModeGrid,
    psi: &CVector,
) -> Result<CVector> {
    basis.check_grid(grid)?;
    if f.values.len() != grid.len() {
        return Err(Error::GridMismatch {
            factor: f.values.len(),
            grid: grid.len(),
        });
    }
    if psi.len() != basis.len() {
        return Err(Error::Invalid("state length does not match the basis".into()));
    }
    let mut out = CVector::zeros(basis.len());
    let mut scratch = vec![0u32; basis.mode_count()];
    for (col, state) in basis.states().iter().enumerate() {
        let amp_in = psi[col];
        if amp_in == C64::new(0.0, 0.0) {
            continue;
        }
        for i in 0..basis.mode_count() {
            let n = state[i];
            if n == 0 {
                continue;
            }
            scratch.copy_from_slice(state);
            scratch[i] = n - 1;
            let row = basis.position(&scratch).expect("lowering stays inside");
            out[row] += f.values[i].conj() * grid.weights()[i].sqrt() * (n as f64).sqrt() * amp_in;
        }
    }
    Ok(out)
}

/// Matrix-free adjoint of [`apply_annihilator`]; rows beyond the truncation
/// are dropped.
pub fn apply_creator(
    f: &FormFactor,
    basis: &FockBasis,
    grid: &ModeGrid,
    psi: &CVector,
) -> Result<CVector> {
    basis.check_grid(grid)?;
    if f.values.len() != grid.len() {
        return Err(Error::GridMismatch {
            factor: f.values.len(),
            grid: grid.len(),
        });
    }
    if psi.len() != basis.len() {
        return Err(Error::Invalid("state length does not match the basis".into()));
    }
    let mut out = CVector::zeros(basis.len());
    let mut scratch = vec![0u32; basis.mode_count()];
    for (col, state) in basis.states().iter().enumerate() {
        let amp_in = psi[col];
        if amp_in == C64::new(0.0, 0.0) {
            continue;
        }
        for i in 0..basis.mode_count() {
            scratch.copy_from_slice(state);
            scratch[i] += 1;
            match basis.position(&scratch) {
                Some(row) => {
                    let n_new = scratch[i];
                    out[row] +=
                        f.values[i] * grid.weights()[i].sqrt() * (n_new as f64).sqrt() * amp_in;
                }
                None => continue, // beyond the truncation
            }
        }
    }
    Ok(out)
}

/// Scale norm on the truncated Fock space:
/// sqrt( sum_states (1 + sum_i n_i omega_i)^s |amp|^2 ).
pub fn fock_scale_norm(psi: &FockVec<'_>, s: f64, grid: &ModeGrid) -> Result<f64> {
    psi.basis.check_grid(grid)?;
    let sum: f64 = psi
        .basis
        .states()
        .iter()
        .zip(psi.amps.iter())
        .map(|(state, amp)| {
            let e: f64 = state
                .iter()
                .zip(grid.omega())
                .map(|(&n, &om)| n as f64 * om)
                .sum();
            (1.0 + e).powf(s) * amp.norm_sqr()
        })
        .sum();
    Ok(sum.sqrt())
}

/// Orthogonal projector onto total occupation <= cap.
pub fn occupation_projector(basis: &FockBasis, cap: u32) -> LinOp {
    let diag = CVector::from_iterator(
        basis.len(),
        basis.states().iter().map(|s| {
            if s.iter().sum::<u32>() <= cap {
                C64::new(1.0, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        }),
    );
    LinOp::new(CMatrix::from_diagonal(&diag))
}

/// Projector onto the safe sector, total occupation <= n_max - 1, where
/// truncation artifacts cannot reach.
pub fn safe_sector_projector(basis: &FockBasis) -> LinOp {
    occupation_projector(basis, basis.n_max().saturating_sub(1) as u32)
}

/// Diagonal weights (1 + sum_i n_i omega_i)^s of the field-scale metric.
pub fn field_scale_weights(basis: &FockBasis, grid: &ModeGrid, s: f64) -> Result<DVector<f64>> {
    basis.check_grid(grid)?;
    Ok(DVector::from_iterator(
        basis.len(),
        basis.states().iter().map(|state| {
            let e: f64 = state
                .iter()
                .zip(grid.omega())
                .map(|(&n, &om)| n as f64 * om)
                .sum();
            (1.0 + e).powf(s)
        }),
    ))
}

/// Operator norm of `op` read as a map between field scales:
/// || W^{dst/2} op W^{-src/2} || with W the diagonal field-scale metric.
pub fn field_scaled_norm(
    op: &LinOp,
    src: f64,
    dst: f64,
    basis: &FockBasis,
    grid: &ModeGrid,
) -> Result<f64> {
    let w_src = field_scale_weights(basis, grid, -src / 2.0)?;
    let w_dst = field_scale_weights(basis, grid, dst / 2.0)?;
    let mut m = op.matrix.clone();
    for j in 0..m.ncols() {
        let c = C64::new(w_src[j], 0.0);
        for i in 0..m.nrows() {
            m[(i, j)] *= c * C64::new(w_dst[i], 0.0);
        }
    }
    Ok(linalg::operator_norm(&m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modes::{Dispersion, FormFactorSpec};

    fn grid3() -> ModeGrid {
        ModeGrid::uniform(1.0, 3.0, 3, Dispersion::Linear, 1.0).unwrap()
    }

    fn unit_grid(omega: f64) -> ModeGrid {
        ModeGrid::from_nodes(vec![1.0], vec![1.0], Dispersion::Constant { value: omega }, omega)
            .unwrap()
    }

    /// Independent enumeration count: number of tuples with sum <= n_max.
    fn count_states(modes: usize, n_max: u32) -> usize {
        if modes == 0 {
            return 1;
        }
        (0..=n_max)
            .map(|n| count_states(modes - 1, n_max - n))
            .sum()
    }

    #[test]
    fn basis_sizes_and_order() {
        let b = build_basis(1, 3).unwrap();
        assert_eq!(b.states(), &[vec![0], vec![1], vec![2], vec![3]]);

        let b = build_basis(2, 2).unwrap();
        assert_eq!(b.len(), 6);
        assert_eq!(b.state(0), &[0, 0]);

        let b = build_basis(3, 4).unwrap();
        assert_eq!(b.len(), 35);
        assert_eq!(b.len(), count_states(3, 4));
        // lexicographic, vacuum first
        for w in b.states().windows(2) {
            assert!(w[0] < w[1]);
        }
        // index is a bijection
        for (i, s) in b.states().iter().enumerate() {
            assert_eq!(b.position(s), Some(i));
        }
    }

    #[test]
    fn basis_cap_guard() {
        assert!(matches!(
            build_basis_capped(6, 20, 1000),
            Err(Error::BasisCap { .. })
        ));
    }

    #[test]
    fn annihilator_kills_vacuum() {
        let grid = grid3();
        let basis = build_basis(3, 3).unwrap();
        let f = FormFactorSpec::OmegaPower { exponent: -0.25, scale: 1.0 }.realize(&grid);
        let a = annihilator(&f, &basis, &grid).unwrap();
        let vac = FockVec::vacuum(&basis);
        assert!(a.apply(&vac.amps).norm() == 0.0);
    }

    #[test]
    fn single_mode_ladder_amplitudes() {
        // w = 1, f = 1: a|n> = sqrt(n)|n-1>, a'|n> = sqrt(n+1)|n+1>
        let grid = unit_grid(1.0);
        let basis = build_basis(1, 4).unwrap();
        let f = FormFactor::new(vec![C64::new(1.0, 0.0)], Tail::Compact, "unit");
        let a = annihilator(&f, &basis, &grid).unwrap();
        let adag = creator(&f, &basis, &grid).unwrap();
        for n in 1..=4usize {
            assert!((a.matrix[(n - 1, n)] - C64::new((n as f64).sqrt(), 0.0)).norm() < 1e-15);
        }
        for n in 0..4usize {
            assert!((adag.matrix[(n + 1, n)] - C64::new((n as f64 + 1.0).sqrt(), 0.0)).norm() < 1e-15);
        }
        // top of the truncation: creator drops out
        let top = CVector::from_fn(basis.len(), |i, _| {
            if i == 4 { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) }
        });
        assert!(adag.apply(&top).norm() == 0.0);
    }

    #[test]
    fn creator_is_entrywise_adjoint() {
        let grid = grid3();
        let basis = build_basis(3, 2).unwrap();
        let f = FormFactor::new(
            vec![C64::new(0.3, 0.7), C64::new(-0.2, 0.1), C64::new(0.9, -0.4)],
            Tail::Compact,
            "f",
        );
        let a = annihilator(&f, &basis, &grid).unwrap();
        let adag = creator(&f, &basis, &grid).unwrap();
        assert_eq!(a.matrix.adjoint(), adag.matrix);
    }

    #[test]
    fn vacuum_expectation_reproduces_pairing() {
        let grid = grid3();
        let basis = build_basis(3, 2).unwrap();
        let f = FormFactor::new(
            vec![C64::new(0.3, 0.7), C64::new(-0.2, 0.1), C64::new(0.9, -0.4)],
            Tail::Compact,
            "f",
        );
        let g = FormFactor::new(
            vec![C64::new(-0.5, 0.2), C64::new(0.8, 0.3), C64::new(0.1, 0.6)],
            Tail::Compact,
            "g",
        );
        let a = annihilator(&f, &basis, &grid).unwrap();
        let adag = creator(&g, &basis, &grid).unwrap();
        let vac = FockVec::vacuum(&basis);
        let lifted = adag.apply(&vac.amps);
        let back = a.apply(&lifted);
        let got = vac.amps.dotc(&back);
        let expect = grid.pairing(&f, &g).unwrap();
        assert!((got - expect).norm() < 1e-14);
    }

    #[test]
    fn ccr_on_safe_sector() {
        let grid = grid3();
        let basis = build_basis(3, 3).unwrap();
        let f = FormFactor::new(
            vec![C64::new(0.3, 0.7), C64::new(-0.2, 0.1), C64::new(0.9, -0.4)],
            Tail::Compact,
            "f",
        );
        let g = FormFactor::new(
            vec![C64::new(-0.5, 0.2), C64::new(0.8, 0.3), C64::new(0.1, 0.6)],
            Tail::Compact,
            "g",
        );
        let af = annihilator(&f, &basis, &grid).unwrap();
        let ag = annihilator(&g, &basis, &grid).unwrap();
        let cg = creator(&g, &basis, &grid).unwrap();
        let p = safe_sector_projector(&basis);
        let comm = &(&af * &cg) - &(&cg * &af);
        let pairing = grid.pairing(&f, &g).unwrap();
        let defect = &(&comm - &LinOp::identity(basis.len()).scale(pairing)) * &p;
        assert!(defect.operator_norm() < 1e-12);
        let comm_aa = &(&(&af * &ag) - &(&ag * &af)) * &p;
        assert!(comm_aa.operator_norm() < 1e-14);
    }

    #[test]
    fn second_quantize_and_number() {
        let grid = unit_grid(2.0);
        let basis = build_basis(1, 3).unwrap();
        let dg = second_quantize(&grid, &basis).unwrap();
        let expect = [0.0, 2.0, 4.0, 6.0];
        for (i, &e) in expect.iter().enumerate() {
            assert_eq!(dg.matrix[(i, i)], C64::new(e, 0.0));
        }
        let vac = FockVec::vacuum(&basis);
        assert!(dg.apply(&vac.amps).norm() == 0.0);

        let n = number_op(&basis);
        let comm = &(&dg * &n) - &(&n * &dg);
        assert!(comm.operator_norm() == 0.0);

        // number operator is second quantization of omega = 1
        let unit = unit_grid(1.0);
        let n_alt = second_quantize(&unit, &basis).unwrap();
        assert_eq!(n.matrix, n_alt.matrix);
    }

    #[test]
    fn number_op_counts_particles() {
        let basis = build_basis(2, 3).unwrap();
        let n = number_op(&basis);
        let pos = basis.position(&[2, 1]).unwrap();
        assert_eq!(n.matrix[(pos, pos)], C64::new(3.0, 0.0));
    }

    #[test]
    fn coherent_vector_amplitudes_single_mode() {
        let grid = unit_grid(1.0);
        let basis = build_basis(1, 5).unwrap();
        let c = C64::new(0.4, -0.3);
        let g = FormFactor::new(vec![c], Tail::Compact, "g");
        let eps = coherent_vector(&g, &basis, &grid).unwrap();
        let mut fact = 1.0;
        for n in 0..=5usize {
            if n > 0 {
                fact *= n as f64;
            }
            let expect = c.powu(n as u32) / C64::new(fact.sqrt(), 0.0);
            assert!((eps.amps[n] - expect).norm() < 1e-14, "n = {n}");
        }
        let zero = FormFactor::zero(&grid);
        let vac = coherent_vector(&zero, &basis, &grid).unwrap();
        assert_eq!(vac.amps, FockVec::vacuum(&basis).amps);
    }

    #[test]
    fn coherent_eigenrelation_on_safe_sector() {
        let grid = grid3();
        let basis = build_basis(3, 4).unwrap();
        let f = FormFactor::new(
            vec![C64::new(0.3, 0.7), C64::new(-0.2, 0.1), C64::new(0.9, -0.4)],
            Tail::Compact,
            "f",
        );
        let g = FormFactor::new(
            vec![C64::new(0.25, -0.15), C64::new(0.1, 0.2), C64::new(-0.3, 0.05)],
            Tail::Compact,
            "g",
        );
        let eps = coherent_vector(&g, &basis, &grid).unwrap();
        let a = annihilator(&f, &basis, &grid).unwrap();
        let p = safe_sector_projector(&basis);
        let lhs = p.apply(&a.apply(&eps.amps));
        let pairing = grid.pairing(&f, &g).unwrap();
        let rhs = p.apply(&eps.amps.map(|x| x * pairing));
        let rel = (lhs.clone() - rhs).norm() / eps.amps.norm();
        assert!(rel < 1e-12, "relative defect {rel:.3e}");
    }

    #[test]
    fn fock_scale_norm_basics() {
        let grid = unit_grid(2.0);
        let basis = build_basis(1, 3).unwrap();
        let vac = FockVec::vacuum(&basis);
        for &s in &[-2.0, 0.0, 1.5] {
            assert!((fock_scale_norm(&vac, s, &grid).unwrap() - 1.0).abs() < 1e-15);
        }
        let psi = FockVec::new(
            &basis,
            CVector::from_vec(vec![
                C64::new(0.5, 0.0),
                C64::new(0.0, 0.5),
                C64::new(0.5, 0.0),
                C64::new(0.0, 0.5),
            ]),
        )
        .unwrap();
        let plain = fock_scale_norm(&psi, 0.0, &grid).unwrap();
        assert!((plain - 1.0).abs() < 1e-14);
        // weights (1 + n omega) >= 1: monotone in s
        let lo = fock_scale_norm(&psi, 0.5, &grid).unwrap();
        let hi = fock_scale_norm(&psi, 1.0, &grid).unwrap();
        assert!(plain <= lo && lo <= hi);
    }

    #[test]
    fn number_bound_against_field_energy() {
        // ||(dGamma(omega)+1)^{1/2} psi|| >= min(m0,1)^{1/2} ||(N+1)^{1/2} psi||
        let grid = grid3();
        let basis = build_basis(3, 3).unwrap();
        let m0 = grid.mass_floor().min(1.0);
        let mut s = 0.345_f64;
        let mut next = || {
            s = (s * 887.0).fract();
            s - 0.5
        };
        for _ in 0..20 {
            let psi = FockVec::new(
                &basis,
                CVector::from_fn(basis.len(), |_, _| C64::new(next(), next())),
            )
            .unwrap();
            let lhs = fock_scale_norm(&psi, 1.0, &grid).unwrap();
            let nw: f64 = basis
                .states()
                .iter()
                .zip(psi.amps.iter())
                .map(|(st, a)| (1.0 + st.iter().sum::<u32>() as f64) * a.norm_sqr())
                .sum();
            let rhs = m0.sqrt() * nw.sqrt();
            assert!(lhs >= rhs - 1e-10, "number bound violated: {lhs} < {rhs}");
        }
    }

    #[test]
    fn annihilator_bound_by_number_norm() {
        let grid = grid3();
        let basis = build_basis(3, 3).unwrap();
        let f = FormFactorSpec::OmegaPower { exponent: -0.25, scale: 0.8 }.realize(&grid);
        let a = annihilator(&f, &basis, &grid).unwrap();
        let fnorm = grid.scale_norm(&f, 0.0).unwrap();
        let mut s = 0.71_f64;
        let mut next = || {
            s = (s * 677.0).fract();
            s - 0.5
        };
        for _ in 0..20 {
            let psi = CVector::from_fn(basis.len(), |_, _| C64::new(next(), next()));
            let lhs = a.apply(&psi).norm();
            let nw: f64 = basis
                .states()
                .iter()
                .zip(psi.iter())
                .map(|(st, amp)| (1.0 + st.iter().sum::<u32>() as f64) * amp.norm_sqr())
                .sum();
            assert!(lhs <= fnorm * nw.sqrt() + 1e-12);
        }
    }

    #[test]
    fn matrix_free_application_agrees_with_dense() {
        let grid = grid3();
        let basis = build_basis(3, 3).unwrap();
        let f = FormFactor::new(
            vec![C64::new(0.3, 0.7), C64::new(-0.2, 0.1), C64::new(0.9, -0.4)],
            Tail::Compact,
            "f",
        );
        let a = annihilator(&f, &basis, &grid).unwrap();
        let adag = creator(&f, &basis, &grid).unwrap();
        let mut s = 0.11_f64;
        let mut next = || {
            s = (s * 797.0).fract();
            s - 0.5
        };
        let psi = CVector::from_fn(basis.len(), |_, _| C64::new(next(), next()));
        let low_dense = a.apply(&psi);
        let low_free = apply_annihilator(&f, &basis, &grid, &psi).unwrap();
        assert!((low_dense - low_free).norm() < 1e-13);
        let up_dense = adag.apply(&psi);
        let up_free = apply_creator(&f, &basis, &grid, &psi).unwrap();
        assert!((up_dense - up_free).norm() < 1e-13);
    }

    #[test]
    fn matrix_free_application_scales_past_the_dense_threshold() {
        // 5456 states: above DENSE_STATE_THRESHOLD, where a dense operator
        // would hold ~30M entries; the applicators stay cheap
        let grid = ModeGrid::uniform(1.0, 30.0, 30, Dispersion::Linear, 1.0).unwrap();
        let basis = build_basis_capped(30, 3, 6000).unwrap();
        assert!(basis.len() > DENSE_STATE_THRESHOLD);
        let f = FormFactorSpec::OmegaPower { exponent: -0.25, scale: 1.0 }.realize(&grid);
        let g = FormFactorSpec::OmegaPower { exponent: -0.5, scale: 0.7 }.realize(&grid);
        let mut psi = CVector::zeros(basis.len());
        psi[0] = C64::new(1.0, 0.0);
        // [a(f), a'(g)] on the vacuum reproduces the pairing
        let up = apply_creator(&g, &basis, &grid, &psi).unwrap();
        let down = apply_annihilator(&f, &basis, &grid, &up).unwrap();
        let expect = grid.pairing(&f, &g).unwrap();
        assert!((down[0] - expect).norm() < 1e-13);
    }

    #[test]
    fn annihilator_cutoff_convergence_tracks_h_minus1_distance() {
        // || a(f_L) - a(f) || as a map from the field-scale-1 space is
        // controlled by || f_L - f ||_{H_{-1}} with a stable constant.
        let grid = ModeGrid::uniform(1.0, 24.0, 24, Dispersion::Linear, 1.0).unwrap();
        let basis = build_basis(24, 1).unwrap();
        let f = FormFactorSpec::Power { exponent: -0.25, scale: 1.0 }.realize(&grid);
        let a_full = annihilator(&f, &basis, &grid).unwrap();
        let mut ratios = Vec::new();
        for &cut in &[4.0, 8.0, 12.0, 16.0, 20.0] {
            let fc = crate::modes::truncate(&f, cut, &grid).unwrap();
            let ac = annihilator(&fc, &basis, &grid).unwrap();
            let diff = &ac - &a_full;
            let opnorm = field_scaled_norm(&diff, 1.0, 0.0, &basis, &grid).unwrap();
            let gap = FormFactor::linear_combination(
                &[C64::new(1.0, 0.0), C64::new(-1.0, 0.0)],
                &[&fc, &f],
                "gap",
            )
            .unwrap();
            let dist = grid.scale_norm(&gap, -1.0).unwrap();
            assert!(dist > 0.0);
            ratios.push(opnorm / dist);
        }
        let max = ratios.iter().cloned().fold(0.0, f64::max);
        let min = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(max.is_finite() && min > 0.0);
        assert!(max / min < 3.0, "constant drifts: ratios {ratios:?}");
        assert!(max <= 1.0 + 1e-12, "bound exceeds the sharp constant");
    }
}
