//! Random generators for valid systems and hypothesis-satisfying families.
//!
//! Ginibre draws are Hermitized, symmetrized or unitarized (polar factor)
//! to land on the constraint sets. Linear side conditions on the Hamiltonian
//! (for instance `[L, H] = 0`) are imposed by sampling from the null space of
//! the constraint map over the real parameters of `(Ω₋, Ω₊)`.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::Result;
use crate::matcore::{CMatrix, RMatrix, I};
use crate::qsys::{QuantumLinearSystem, SystemParams};

pub fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

pub fn real_gaussian<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> RMatrix {
    DMatrix::from_fn(rows, cols, |_, _| normal(rng))
}

pub fn ginibre<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    DMatrix::from_fn(rows, cols, |_, _| Complex64::new(normal(rng), normal(rng)))
}

pub fn hermitian<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMatrix {
    let g = ginibre(rng, n, n);
    (&g + g.adjoint()).map(|z| z * 0.5)
}

pub fn complex_symmetric<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMatrix {
    let g = ginibre(rng, n, n);
    (&g + g.transpose()).map(|z| z * 0.5)
}

pub fn real_symmetric<R: Rng + ?Sized>(rng: &mut R, n: usize) -> RMatrix {
    let g = real_gaussian(rng, n, n);
    (&g + g.transpose()) * 0.5
}

pub fn real_antisymmetric<R: Rng + ?Sized>(rng: &mut R, n: usize) -> RMatrix {
    let g = real_gaussian(rng, n, n);
    (&g - g.transpose()) * 0.5
}

/// Unitary polar factor `U V†` of a Ginibre draw `U Σ V†`.
pub fn unitary<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMatrix {
    let svd = ginibre(rng, n, n).svd(true, true);
    svd.u.unwrap() * svd.v_t.unwrap()
}

pub fn orthogonal<R: Rng + ?Sized>(rng: &mut R, n: usize) -> RMatrix {
    let svd = real_gaussian(rng, n, n).svd(true, true);
    svd.u.unwrap() * svd.v_t.unwrap()
}

fn cx(x: &RMatrix) -> CMatrix {
    x.map(|v| Complex64::new(v, 0.0))
}

fn ix(x: &RMatrix) -> CMatrix {
    x.map(|v| Complex64::new(0.0, v))
}

/// Fully generic valid system.
pub fn system<R: Rng + ?Sized>(rng: &mut R, n: usize, m: usize) -> QuantumLinearSystem {
    QuantumLinearSystem::new(SystemParams {
        s: unitary(rng, m),
        c_minus: ginibre(rng, m, n),
        c_plus: ginibre(rng, m, n),
        omega_minus: hermitian(rng, n),
        omega_plus: complex_symmetric(rng, n),
    })
    .expect("generated parameters satisfy every invariant")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OmegaShape {
    General,
    /// Ω₋ = iX (X antisymmetric), Ω₊ = iY (Y symmetric).
    Imaginary,
    /// Re(Ω₋) = Re(Ω₊).
    SameRealPart,
    /// Re(Ω₋) = −Re(Ω₊).
    OppositeRealPart,
    /// Ω₋ = Ω₊, both real symmetric.
    EqualReal,
    /// Ω₋ = −Ω₊, both real symmetric.
    OppositeReal,
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Entries {
    General,
    Real,
    Imaginary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CouplingRelation {
    Independent,
    /// C₊ = C₋ (q coupling).
    Equal,
    /// C₊ = −C₋ (p coupling).
    Negated,
    /// C₊ = 0.
    PlusZero,
    /// C₋ = 0.
    MinusZero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scattering {
    Unitary,
    Identity,
    /// Real orthogonal.
    Real,
    /// i times a real orthogonal matrix.
    Imaginary,
}

/// Structural family to sample from.
#[derive(Debug, Clone, Copy)]
pub struct Family {
    pub omega: OmegaShape,
    pub coupling: Entries,
    pub relation: CouplingRelation,
    pub scattering: Scattering,
}

impl Default for Family {
    fn default() -> Self {
        Self {
            omega: OmegaShape::General,
            coupling: Entries::General,
            relation: CouplingRelation::Independent,
            scattering: Scattering::Unitary,
        }
    }
}

fn entries<R: Rng + ?Sized>(rng: &mut R, kind: Entries, r: usize, c: usize) -> CMatrix {
    match kind {
        Entries::General => ginibre(rng, r, c),
        Entries::Real => cx(&real_gaussian(rng, r, c)),
        Entries::Imaginary => ix(&real_gaussian(rng, r, c)),
    }
}

pub fn omega_pair<R: Rng + ?Sized>(rng: &mut R, shape: OmegaShape, n: usize) -> (CMatrix, CMatrix) {
    match shape {
        OmegaShape::General => (hermitian(rng, n), complex_symmetric(rng, n)),
        OmegaShape::Imaginary => (ix(&real_antisymmetric(rng, n)), ix(&real_symmetric(rng, n))),
        OmegaShape::SameRealPart | OmegaShape::OppositeRealPart => {
            let re = cx(&real_symmetric(rng, n));
            let om = &re + ix(&real_antisymmetric(rng, n));
            let sign = if shape == OmegaShape::SameRealPart { 1.0 } else { -1.0 };
            let op = re.map(|z| z * sign) + ix(&real_symmetric(rng, n));
            (om, op)
        }
        OmegaShape::EqualReal => {
            let r = cx(&real_symmetric(rng, n));
            (r.clone(), r)
        }
        OmegaShape::OppositeReal => {
            let r = cx(&real_symmetric(rng, n));
            (r.clone(), -r)
        }
        OmegaShape::Zero => (CMatrix::zeros(n, n), CMatrix::zeros(n, n)),
    }
}

pub fn scattering<R: Rng + ?Sized>(rng: &mut R, kind: Scattering, m: usize) -> CMatrix {
    match kind {
        Scattering::Unitary => unitary(rng, m),
        Scattering::Identity => CMatrix::identity(m, m),
        Scattering::Real => cx(&orthogonal(rng, m)),
        Scattering::Imaginary => cx(&orthogonal(rng, m)) * I,
    }
}

pub fn coupling_pair<R: Rng + ?Sized>(
    rng: &mut R,
    kind: Entries,
    relation: CouplingRelation,
    m: usize,
    n: usize,
) -> (CMatrix, CMatrix) {
    let cm = entries(rng, kind, m, n);
    match relation {
        CouplingRelation::Independent => {
            let cp = entries(rng, kind, m, n);
            (cm, cp)
        }
        CouplingRelation::Equal => (cm.clone(), cm),
        CouplingRelation::Negated => (cm.clone(), -cm),
        CouplingRelation::PlusZero => (cm, CMatrix::zeros(m, n)),
        CouplingRelation::MinusZero => (CMatrix::zeros(m, n), cm),
    }
}

pub fn from_family<R: Rng + ?Sized>(rng: &mut R, family: Family, n: usize, m: usize) -> QuantumLinearSystem {
    let (omega_minus, omega_plus) = omega_pair(rng, family.omega, n);
    let (c_minus, c_plus) = coupling_pair(rng, family.coupling, family.relation, m, n);
    QuantumLinearSystem::new(SystemParams {
        s: scattering(rng, family.scattering, m),
        c_minus,
        c_plus,
        omega_minus,
        omega_plus,
    })
    .expect("family members are valid systems")
}

/// Which blocks of Ω a constrained sample may populate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FreeBlocks {
    Both,
    MinusOnly,
    PlusOnly,
}

/// Real basis of the admissible `(Ω₋, Ω₊)` pairs: Hermitian Ω₋ and complex
/// symmetric Ω₊.
pub fn omega_basis(n: usize, free: FreeBlocks) -> Vec<(CMatrix, CMatrix)> {
    let mut out = Vec::new();
    let zero = CMatrix::zeros(n, n);
    let unit = |i: usize, j: usize, z: Complex64, hermitian: bool| {
        let mut x = CMatrix::zeros(n, n);
        x[(i, j)] = z;
        x[(j, i)] = if hermitian { z.conj() } else { z };
        x
    };
    if free != FreeBlocks::PlusOnly {
        for i in 0..n {
            out.push((unit(i, i, Complex64::new(1.0, 0.0), true), zero.clone()));
            for j in i + 1..n {
                out.push((unit(i, j, Complex64::new(1.0, 0.0), true), zero.clone()));
                out.push((unit(i, j, Complex64::new(0.0, 1.0), true), zero.clone()));
            }
        }
    }
    if free != FreeBlocks::MinusOnly {
        for i in 0..n {
            for j in i..n {
                out.push((zero.clone(), unit(i, j, Complex64::new(1.0, 0.0), false)));
                out.push((zero.clone(), unit(i, j, Complex64::new(0.0, 1.0), false)));
            }
        }
    }
    out
}

/// Samples a Gaussian combination of the null space of a linear map on the
/// Hamiltonian parameters. `constraint` must be real-linear in `(Ω₋, Ω₊)`.
///
/// Returns `None` when the null space is trivial.
pub fn constrained_omega<R, F>(
    rng: &mut R,
    n: usize,
    free: FreeBlocks,
    constraint: F,
) -> Option<(CMatrix, CMatrix)>
where
    R: Rng + ?Sized,
    F: Fn(&CMatrix, &CMatrix) -> CMatrix,
{
    let basis = omega_basis(n, free);
    let columns: Vec<Vec<f64>> = basis
        .iter()
        .map(|(om, op)| {
            constraint(om, op)
                .iter()
                .flat_map(|z| [z.re, z.im])
                .collect()
        })
        .collect();
    let rows = columns.first().map_or(0, Vec::len);
    let map = DMatrix::from_fn(rows, basis.len(), |i, j| columns[j][i]);
    let gram = map.transpose() * &map;
    let eig = SymmetricEigen::new(gram);
    let top = eig.eigenvalues.iter().cloned().fold(0.0, f64::max).max(1.0);
    let null: Vec<usize> = (0..basis.len())
        .filter(|&k| eig.eigenvalues[k] <= 1e-20 * top)
        .collect();
    if null.is_empty() {
        return None;
    }
    let mut om = CMatrix::zeros(n, n);
    let mut op = CMatrix::zeros(n, n);
    for &k in &null {
        let w = normal(rng);
        let v = eig.eigenvectors.column(k);
        for (j, (bm, bp)) in basis.iter().enumerate() {
            let coef = Complex64::new(w * v[j], 0.0);
            om += bm * coef;
            op += bp * coef;
        }
    }
    Some((om, op))
}

/// Builds a system whose Hamiltonian satisfies a linear constraint.
pub fn system_with_constrained_omega<R, F>(
    rng: &mut R,
    s: CMatrix,
    c_minus: CMatrix,
    c_plus: CMatrix,
    free: FreeBlocks,
    constraint: F,
) -> Option<Result<QuantumLinearSystem>>
where
    R: Rng + ?Sized,
    F: Fn(&CMatrix, &CMatrix) -> CMatrix,
{
    let n = c_minus.ncols();
    let (omega_minus, omega_plus) = constrained_omega(rng, n, free, constraint)?;
    Some(QuantumLinearSystem::new(SystemParams { s, c_minus, c_plus, omega_minus, omega_plus }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::{inf_norm, is_imaginary, is_real};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn families_have_the_requested_structure() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let fam = Family {
                omega: OmegaShape::Imaginary,
                coupling: Entries::Imaginary,
                relation: CouplingRelation::Equal,
                scattering: Scattering::Imaginary,
            };
            let sys = from_family(&mut rng, fam, 3, 2);
            assert!(is_imaginary(sys.omega_minus(), 1e-14));
            assert!(is_imaginary(sys.omega_plus(), 1e-14));
            assert!(is_imaginary(sys.c_minus(), 1e-14));
            assert!(is_imaginary(sys.s(), 1e-14));
            assert_eq!(sys.c_minus(), sys.c_plus());

            let fam = Family { omega: OmegaShape::SameRealPart, coupling: Entries::Real, ..Family::default() };
            let sys = from_family(&mut rng, fam, 3, 2);
            let d = sys.omega_minus().map(|z| z.re) - sys.omega_plus().map(|z| z.re);
            assert!(d.amax() < 1e-15);
            assert!(is_real(sys.c_plus(), 1e-14));
        }
    }

    #[test]
    fn constrained_sample_satisfies_constraint() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cm = ginibre(&mut rng, 1, 3);
        let cp = ginibre(&mut rng, 1, 3);
        let (om, op) = constrained_omega(&mut rng, 3, FreeBlocks::Both, |om, op| {
            let a = &cm * om - &cp * op.adjoint();
            let b = &cm * op - &cp * om.transpose();
            let mut out = CMatrix::zeros(2, 3);
            out.row_mut(0).copy_from(&a.row(0));
            out.row_mut(1).copy_from(&b.row(0));
            out
        })
        .expect("nontrivial null space");
        assert!(inf_norm(&om) > 1e-3);
        assert!(inf_norm(&(&cm * &om - &cp * op.adjoint())) < 1e-10);
        assert!(inf_norm(&(&cm * &op - &cp * om.transpose())) < 1e-10);
        assert!(inf_norm(&(&om - om.adjoint())) < 1e-12);
        assert!(inf_norm(&(&op - op.transpose())) < 1e-12);
    }
}
