//! Tensor-product state space of two three-level atoms and two truncated
//! cavity modes, plus the dense operator algebra built on it.
//!
//! Canonical factor order is `atom_L, atom_R, mode_L, mode_R`. Within an atom
//! the basis is `|0>, |1>, |e>`; within a mode it is Fock `|0> .. |n_max>`.
//! Global basis indices are row-major over the factors (the last factor varies
//! fastest), which is the convention of the Kronecker product.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Local dimension of every atom factor.
pub const ATOM_DIM: usize = 3;
/// Atom basis labels.
pub const GROUND: usize = 0;
pub const ACTIVE: usize = 1;
pub const EXCITED: usize = 2;

/// Factor indices in the canonical cavity-QED space.
pub const ATOM_L: usize = 0;
pub const ATOM_R: usize = 1;
pub const MODE_L: usize = 2;
pub const MODE_R: usize = 3;

/// Entrywise tolerance for calling a freshly built operator Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Tolerance accepted for a density matrix handed in from outside.
pub const STATE_HERMITIAN_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FactorKind {
    Atom,
    Mode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Factor {
    pub kind: FactorKind,
    pub dim: usize,
}

impl Factor {
    pub fn atom() -> Self {
        Factor { kind: FactorKind::Atom, dim: ATOM_DIM }
    }

    /// A bosonic mode truncated at `n_max` photons.
    pub fn mode(n_max: usize) -> Self {
        Factor { kind: FactorKind::Mode, dim: n_max + 1 }
    }
}

/// Ordered list of tensor factors.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SpaceDescriptor {
    factors: Vec<Factor>,
}

impl SpaceDescriptor {
    pub fn new(factors: Vec<Factor>) -> Result<Self> {
        for (i, f) in factors.iter().enumerate() {
            if f.dim == 0 {
                return Err(Error::argument(format!("factor {i} has zero dimension")));
            }
            if f.kind == FactorKind::Atom && f.dim != ATOM_DIM {
                return Err(Error::argument(format!(
                    "atom factor {i} must have dimension {ATOM_DIM}, got {}",
                    f.dim
                )));
            }
            if f.kind == FactorKind::Mode && f.dim < 2 {
                return Err(Error::argument(format!(
                    "mode factor {i} needs n_max >= 1"
                )));
            }
        }
        Ok(SpaceDescriptor { factors })
    }

    /// `atom_L ⊗ atom_R`.
    pub fn two_atoms() -> Self {
        SpaceDescriptor { factors: vec![Factor::atom(), Factor::atom()] }
    }

    /// `atom_L ⊗ atom_R ⊗ mode_L ⊗ mode_R` with both modes truncated at `n_max`.
    pub fn cavity_qed(n_max: usize) -> Result<Self> {
        if n_max < 1 {
            return Err(Error::argument("n_max must be at least 1"));
        }
        Ok(SpaceDescriptor {
            factors: vec![
                Factor::atom(),
                Factor::atom(),
                Factor::mode(n_max),
                Factor::mode(n_max),
            ],
        })
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn total_dim(&self) -> usize {
        self.factors.iter().map(|f| f.dim).product()
    }

    pub fn local_dim(&self, factor: usize) -> Option<usize> {
        self.factors.get(factor).map(|f| f.dim)
    }

    /// Indices of all factors of the given kind, in canonical order.
    pub fn factors_of_kind(&self, kind: FactorKind) -> Vec<usize> {
        self.factors
            .iter()
            .enumerate()
            .filter(|(_, f)| f.kind == kind)
            .map(|(i, _)| i)
            .collect()
    }

    /// Splits a global basis index into per-factor local indices.
    pub fn digits(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.factors.len()];
        for (slot, f) in out.iter_mut().zip(&self.factors).rev() {
            *slot = index % f.dim;
            index /= f.dim;
        }
        out
    }

    /// Inverse of [`SpaceDescriptor::digits`].
    pub fn index_of(&self, digits: &[usize]) -> usize {
        debug_assert_eq!(digits.len(), self.factors.len());
        digits
            .iter()
            .zip(&self.factors)
            .fold(0, |acc, (&d, f)| acc * f.dim + d)
    }

    /// Product-basis vector `|d_0> ⊗ |d_1> ⊗ ...`.
    pub fn basis_vector(&self, digits: &[usize]) -> CVector {
        let mut v = CVector::zeros(self.total_dim());
        v[self.index_of(digits)] = C64::new(1.0, 0.0);
        v
    }

    /// Descriptor for the kept factors, in canonical order.
    pub fn subspace(&self, keep: &[usize]) -> Result<Self> {
        let keep = normalize_keep(keep, self.factors.len())?;
        Ok(SpaceDescriptor {
            factors: keep.iter().map(|&i| self.factors[i]).collect(),
        })
    }

    fn check_same(&self, other: &SpaceDescriptor) -> Result<()> {
        if self != other {
            return Err(Error::SpaceMismatch {
                left: self.to_string(),
                right: other.to_string(),
            });
        }
        Ok(())
    }
}

impl fmt::Display for SpaceDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .factors
            .iter()
            .map(|fac| match fac.kind {
                FactorKind::Atom => "atom(3)".to_string(),
                FactorKind::Mode => format!("mode({})", fac.dim),
            })
            .collect();
        write!(f, "[{}]", parts.join(" x "))
    }
}

fn normalize_keep(keep: &[usize], n_factors: usize) -> Result<Vec<usize>> {
    if keep.is_empty() {
        return Err(Error::argument("the set of kept factors is empty"));
    }
    let mut keep = keep.to_vec();
    keep.sort_unstable();
    keep.dedup();
    if let Some(&bad) = keep.iter().find(|&&i| i >= n_factors) {
        return Err(Error::argument(format!(
            "factor index {bad} out of range for a {n_factors}-factor space"
        )));
    }
    Ok(keep)
}

fn check_square(m: &CMatrix, expected: usize) -> Result<()> {
    if m.nrows() != expected || m.ncols() != expected {
        return Err(Error::Shape { expected, rows: m.nrows(), cols: m.ncols() });
    }
    Ok(())
}

/// Largest entry of `|A - A†|`.
pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for j in 0..n {
        for i in 0..=j {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Dense operator on a tagged tensor space.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    space: SpaceDescriptor,
    data: CMatrix,
}

impl Operator {
    pub fn new(space: SpaceDescriptor, data: CMatrix) -> Result<Self> {
        check_square(&data, space.total_dim())?;
        Ok(Operator { space, data })
    }

    pub fn identity(space: &SpaceDescriptor) -> Self {
        let n = space.total_dim();
        Operator { space: space.clone(), data: CMatrix::identity(n, n) }
    }

    pub fn zeros(space: &SpaceDescriptor) -> Self {
        let n = space.total_dim();
        Operator { space: space.clone(), data: CMatrix::zeros(n, n) }
    }

    pub fn space(&self) -> &SpaceDescriptor {
        &self.space
    }

    pub fn data(&self) -> &CMatrix {
        &self.data
    }

    pub fn into_data(self) -> CMatrix {
        self.data
    }

    pub fn adjoint(&self) -> Self {
        Operator { space: self.space.clone(), data: self.data.adjoint() }
    }

    pub fn scale(&self, factor: C64) -> Self {
        Operator { space: self.space.clone(), data: &self.data * factor }
    }

    pub fn hermiticity_defect(&self) -> f64 {
        hermiticity_defect(&self.data)
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermiticity_defect() <= HERMITIAN_TOL
    }

    pub fn commutator(&self, other: &Operator) -> Operator {
        &(self * other) - &(other * self)
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn apply(&self, v: &CVector) -> CVector {
        &self.data * v
    }
}

macro_rules! impl_binop {
    ($trait:ident, $method:ident, $op:tt) => {
        impl $trait<&Operator> for &Operator {
            type Output = Operator;

            fn $method(self, rhs: &Operator) -> Operator {
                assert_eq!(
                    self.space, rhs.space,
                    "operators on different spaces cannot be combined"
                );
                Operator { space: self.space.clone(), data: &self.data $op &rhs.data }
            }
        }
    };
}

impl_binop!(Add, add, +);
impl_binop!(Sub, sub, -);
impl_binop!(Mul, mul, *);

/// Possibly unnormalized density matrix. Under no-click evolution the trace
/// is the probability that no click has happened yet.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    space: SpaceDescriptor,
    data: CMatrix,
}

impl DensityMatrix {
    /// Validates shape and Hermiticity (within 1e-10) and symmetrizes.
    pub fn new(space: SpaceDescriptor, data: CMatrix) -> Result<Self> {
        check_square(&data, space.total_dim())?;
        let defect = hermiticity_defect(&data);
        if defect > STATE_HERMITIAN_TOL {
            return Err(Error::argument(format!(
                "density matrix is not Hermitian (defect {defect:e})"
            )));
        }
        let data = (&data + data.adjoint()) * C64::new(0.5, 0.0);
        Ok(DensityMatrix { space, data })
    }

    /// `|psi><psi|`.
    pub fn from_pure(space: SpaceDescriptor, psi: &CVector) -> Result<Self> {
        if psi.len() != space.total_dim() {
            return Err(Error::Shape { expected: space.total_dim(), rows: psi.len(), cols: 1 });
        }
        let data = psi * psi.adjoint();
        Ok(DensityMatrix { space, data })
    }

    pub(crate) fn from_raw(space: SpaceDescriptor, data: CMatrix) -> Self {
        debug_assert_eq!(data.nrows(), space.total_dim());
        DensityMatrix { space, data }
    }

    pub fn space(&self) -> &SpaceDescriptor {
        &self.space
    }

    pub fn data(&self) -> &CMatrix {
        &self.data
    }

    pub fn into_data(self) -> CMatrix {
        self.data
    }

    pub fn trace(&self) -> f64 {
        self.data.trace().re
    }

    /// `Tr[A rho]`.
    pub fn expectation(&self, op: &Operator) -> Result<C64> {
        self.space.check_same(op.space())?;
        let n = self.space.total_dim();
        let mut acc = C64::new(0.0, 0.0);
        for j in 0..n {
            for i in 0..n {
                acc += op.data[(j, i)] * self.data[(i, j)];
            }
        }
        Ok(acc)
    }

    /// `A rho A†`, unnormalized.
    pub fn sandwich(&self, op: &Operator) -> Result<DensityMatrix> {
        self.space.check_same(op.space())?;
        let data = &op.data * &self.data * op.data.adjoint();
        Ok(DensityMatrix { space: self.space.clone(), data })
    }

    /// Rescaled to unit trace.
    pub fn normalized(&self) -> Result<DensityMatrix> {
        let tr = self.trace();
        if tr.is_nan() || tr <= 0.0 {
            return Err(Error::argument(format!("cannot normalize a state of trace {tr}")));
        }
        Ok(DensityMatrix {
            space: self.space.clone(),
            data: &self.data * C64::new(1.0 / tr, 0.0),
        })
    }

    pub fn hermiticity_defect(&self) -> f64 {
        hermiticity_defect(&self.data)
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let herm = (&self.data + self.data.adjoint()) * C64::new(0.5, 0.0);
        let mut ev: Vec<f64> = herm.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }

    /// `<v| rho |v>`.
    pub fn population(&self, v: &CVector) -> Result<f64> {
        if v.len() != self.space.total_dim() {
            return Err(Error::Shape { expected: self.space.total_dim(), rows: v.len(), cols: 1 });
        }
        Ok((v.adjoint() * &self.data * v)[(0, 0)].re)
    }

    /// Half the trace norm of `self - other`.
    pub fn trace_distance(&self, other: &DensityMatrix) -> Result<f64> {
        self.space.check_same(&other.space)?;
        let diff = DensityMatrix {
            space: self.space.clone(),
            data: &self.data - &other.data,
        };
        Ok(0.5 * diff.eigenvalues().iter().map(|x| x.abs()).sum::<f64>())
    }
}

/// Lifts a single-factor operator to the full space:
/// `1 ⊗ ... ⊗ local_op ⊗ ... ⊗ 1`.
pub fn embed(local_op: &CMatrix, factor_index: usize, space: &SpaceDescriptor) -> Result<Operator> {
    let expected = space.local_dim(factor_index).ok_or_else(|| {
        Error::argument(format!(
            "factor index {factor_index} out of range for space {space}"
        ))
    })?;
    if local_op.nrows() != expected || local_op.ncols() != expected {
        return Err(Error::FactorDimension {
            factor: factor_index,
            expected,
            rows: local_op.nrows(),
            cols: local_op.ncols(),
        });
    }
    let mut data = CMatrix::identity(1, 1);
    for (i, f) in space.factors().iter().enumerate() {
        let local = if i == factor_index {
            local_op.clone()
        } else {
            CMatrix::identity(f.dim, f.dim)
        };
        data = data.kronecker(&local);
    }
    Ok(Operator { space: space.clone(), data })
}

/// Truncated bosonic annihilation operator, `<n-1|a|n> = sqrt(n)`.
pub fn annihilator(n_max: usize) -> Result<CMatrix> {
    if n_max < 1 {
        return Err(Error::argument("annihilator needs n_max >= 1"));
    }
    let d = n_max + 1;
    let mut a = CMatrix::zeros(d, d);
    for n in 1..d {
        a[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
    }
    Ok(a)
}

/// Single-atom operators in the `|0>, |1>, |e>` basis.
#[derive(Debug, Clone)]
pub struct AtomicOperators {
    pub proj_0: CMatrix,
    pub proj_1: CMatrix,
    pub proj_e: CMatrix,
    /// `|e><1|`
    pub sigma_plus: CMatrix,
    /// `|1><e|`
    pub sigma_minus: CMatrix,
}

fn atom_ket_bra(row: usize, col: usize) -> CMatrix {
    let mut m = CMatrix::zeros(ATOM_DIM, ATOM_DIM);
    m[(row, col)] = C64::new(1.0, 0.0);
    m
}

pub fn atomic_operators() -> AtomicOperators {
    AtomicOperators {
        proj_0: atom_ket_bra(GROUND, GROUND),
        proj_1: atom_ket_bra(ACTIVE, ACTIVE),
        proj_e: atom_ket_bra(EXCITED, EXCITED),
        sigma_plus: atom_ket_bra(EXCITED, ACTIVE),
        sigma_minus: atom_ket_bra(ACTIVE, EXCITED),
    }
}

/// Reduced state on the kept factors (canonical order). Trace is preserved.
pub fn partial_trace(rho: &DensityMatrix, keep: &[usize]) -> Result<DensityMatrix> {
    let space = rho.space();
    let keep = normalize_keep(keep, space.factors().len())?;
    let traced: Vec<usize> = (0..space.factors().len())
        .filter(|i| !keep.contains(i))
        .collect();
    let kept_space = space.subspace(&keep)?;
    let traced_dims: Vec<usize> = traced.iter().map(|&i| space.factors()[i].dim).collect();
    let traced_total: usize = traced_dims.iter().product();
    let kept_total = kept_space.total_dim();

    // Global index for every (kept, traced) pair.
    let mut digits = vec![0usize; space.factors().len()];
    let mut global = vec![0usize; kept_total * traced_total];
    for k in 0..kept_total {
        let kd = kept_space.digits(k);
        for t in 0..traced_total {
            let mut rem = t;
            for (slot, &dim) in traced.iter().zip(&traced_dims).rev() {
                digits[*slot] = rem % dim;
                rem /= dim;
            }
            for (slot, &d) in keep.iter().zip(&kd) {
                digits[*slot] = d;
            }
            global[k * traced_total + t] = space.index_of(&digits);
        }
    }

    let src = rho.data();
    let mut out = CMatrix::zeros(kept_total, kept_total);
    for b in 0..kept_total {
        for a in 0..kept_total {
            let mut acc = C64::new(0.0, 0.0);
            for t in 0..traced_total {
                acc += src[(global[a * traced_total + t], global[b * traced_total + t])];
            }
            out[(a, b)] = acc;
        }
    }
    Ok(DensityMatrix { space: kept_space, data: out })
}
