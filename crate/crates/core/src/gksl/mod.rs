//! Markovian open-system dynamics (GKSL / Lindblad form) on small Hilbert
//! spaces, and dichotomic projective measurements on the evolved states.
//!
//! Density matrices are vectorized by column stacking, so that
//! `vec(A X B) = (B^T kron A) vec(X)`. A [`Generator`] is the `N^2 x N^2`
//! matrix `L` with `d vec(rho)/dt = L vec(rho)`, and an [`EvolutionMap`] is
//! its exponential `exp(L t)`. Time is the L/E parameter and hbar = 1.

mod description;

use nalgebra::{Complex, ComplexField, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::oscillation::{OscillationParams, PmnsMatrix};
use crate::constants::PHASE_KAPPA;
use crate::scalar::{lit, re, tol, Real};

pub use description::{parse_complex, SystemDescription};

pub type CMatrix<T> = DMatrix<Complex<T>>;
pub type CVector<T> = DVector<Complex<T>>;

fn max_abs<T: Real>(m: &CMatrix<T>) -> T {
    m.iter().map(|z| z.modulus()).fold(T::zero(), |a, b| a.max(b))
}

fn trace<T: Real>(m: &CMatrix<T>) -> Complex<T> {
    m.diagonal().iter().fold(Complex::new(T::zero(), T::zero()), |a, &b| a + b)
}

fn hermiticity_defect<T: Real>(m: &CMatrix<T>) -> T {
    max_abs(&(m - m.adjoint()))
}

fn vectorize<T: Real>(m: &CMatrix<T>) -> CVector<T> {
    CVector::from_column_slice(m.as_slice())
}

fn unvectorize<T: Real>(v: &CVector<T>, dim: usize) -> CMatrix<T> {
    CMatrix::from_column_slice(dim, dim, v.as_slice())
}

fn require_square<T: Real>(m: &CMatrix<T>, what: &str) -> Result<usize> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(Error::domain(format!("{what} must be a non-empty square matrix")));
    }
    Ok(m.nrows())
}

/// Hermitian, unit-trace, positive semidefinite state.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix<T: Real> {
    rho: CMatrix<T>,
}

impl<T: Real> DensityMatrix<T> {
    pub fn new(rho: CMatrix<T>) -> Result<Self> {
        require_square(&rho, "density matrix")?;
        let state = Self { rho };
        state.check(tol(1e-12), tol(1e-10))?;
        Ok(state)
    }

    /// Wraps a matrix produced by trusted numerics (e.g. an evolution map)
    /// without re-validating it.
    pub(crate) fn from_matrix_unchecked(rho: CMatrix<T>) -> Self {
        Self { rho }
    }

    /// `|psi><psi|` for the normalized `psi`.
    pub fn pure(psi: &CVector<T>) -> Result<Self> {
        let norm = psi.norm();
        if !(norm > T::zero()) {
            return Err(Error::domain("state vector must be non-zero"));
        }
        let psi = psi.unscale(norm);
        Ok(Self {
            rho: &psi * psi.adjoint(),
        })
    }

    /// Pure state on computational basis vector `index`.
    pub fn basis_state(dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return Err(Error::domain(format!("basis index {index} out of range for dimension {dim}")));
        }
        let mut rho = CMatrix::zeros(dim, dim);
        rho[(index, index)] = re(T::one());
        Ok(Self { rho })
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        let rho = CMatrix::identity(dim, dim).unscale(lit(dim as f64));
        Self { rho }
    }

    pub fn dim(&self) -> usize {
        self.rho.nrows()
    }

    pub fn matrix(&self) -> &CMatrix<T> {
        &self.rho
    }

    pub fn into_matrix(self) -> CMatrix<T> {
        self.rho
    }

    pub fn trace(&self) -> Complex<T> {
        trace(&self.rho)
    }

    pub fn hermiticity_defect(&self) -> T {
        hermiticity_defect(&self.rho)
    }

    /// Smallest eigenvalue of the Hermitian part `(rho + rho^dagger) / 2`.
    pub fn min_eigenvalue(&self) -> T {
        let h = (&self.rho + self.rho.adjoint()).unscale(lit(2.0));
        h.symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(T::max_value().unwrap_or_else(T::one), |a, b| a.min(b))
    }

    /// Largest modulus among off-diagonal entries.
    pub fn max_off_diagonal(&self) -> T {
        let n = self.dim();
        let mut best = T::zero();
        for j in 0..n {
            for i in 0..n {
                if i != j {
                    best = best.max(self.rho[(i, j)].modulus());
                }
            }
        }
        best
    }

    /// Validates hermiticity and trace to `tol_abs` and positivity to `-tol_eig`.
    pub fn check(&self, tol_abs: T, tol_eig: T) -> Result<()> {
        let herm = self.hermiticity_defect();
        if !(herm <= tol_abs) {
            return Err(Error::validation("density matrix", format!("not Hermitian (defect {herm})")));
        }
        let tr = self.trace();
        if !((tr.re - T::one()).abs() <= tol_abs && tr.im.abs() <= tol_abs) {
            return Err(Error::validation("density matrix", format!("trace {tr} != 1")));
        }
        let min = self.min_eigenvalue();
        if !(min >= -tol_eig) {
            return Err(Error::validation("density matrix", format!("negative eigenvalue {min}")));
        }
        Ok(())
    }
}

/// Two-outcome projective measurement `Q = Pi+ - Pi-` with eigenvalues +-1.
#[derive(Debug, Clone, PartialEq)]
pub struct DichotomicPvm<T: Real> {
    pi_plus: CMatrix<T>,
    pi_minus: CMatrix<T>,
    plus_basis: Vec<CVector<T>>,
    minus_basis: Vec<CVector<T>>,
}

impl<T: Real> DichotomicPvm<T> {
    /// Builds the measurement from `Pi+`; `Pi- = I - Pi+`. Both outcomes must
    /// be possible (`m >= 1`, `n >= 1`).
    pub fn new(pi_plus: CMatrix<T>) -> Result<Self> {
        let dim = require_square(&pi_plus, "projector")?;
        let pi_minus = CMatrix::identity(dim, dim) - &pi_plus;
        Self::from_projectors(pi_plus, pi_minus)
    }

    pub fn from_projectors(pi_plus: CMatrix<T>, pi_minus: CMatrix<T>) -> Result<Self> {
        let dim = require_square(&pi_plus, "projector")?;
        if pi_minus.shape() != pi_plus.shape() {
            return Err(Error::domain("projector dimensions differ"));
        }
        let eps: T = tol(1e-10);
        let id = CMatrix::identity(dim, dim);
        for (name, p) in [("Pi+", &pi_plus), ("Pi-", &pi_minus)] {
            if hermiticity_defect(p) > eps {
                return Err(Error::validation(name, "not Hermitian"));
            }
            if max_abs(&(p * p - p)) > eps {
                return Err(Error::validation(name, "not idempotent"));
            }
        }
        if max_abs(&(&pi_plus + &pi_minus - &id)) > eps {
            return Err(Error::validation("projectors", "Pi+ + Pi- != I"));
        }
        if max_abs(&(&pi_plus * &pi_minus)) > eps {
            return Err(Error::validation("projectors", "Pi+ Pi- != 0"));
        }

        let eig = pi_plus.clone().symmetric_eigen();
        let half: T = lit(0.5);
        let mut plus_basis = Vec::new();
        let mut minus_basis = Vec::new();
        for (i, &lambda) in eig.eigenvalues.iter().enumerate() {
            let v = eig.eigenvectors.column(i).into_owned();
            if lambda > half {
                plus_basis.push(v);
            } else {
                minus_basis.push(v);
            }
        }
        if plus_basis.is_empty() || minus_basis.is_empty() {
            return Err(Error::validation("projectors", "both outcomes must have non-zero rank"));
        }
        Ok(Self {
            pi_plus,
            pi_minus,
            plus_basis,
            minus_basis,
        })
    }

    /// Diagonal measurement with `+` on the listed computational basis states.
    pub fn computational(dim: usize, plus: &[usize]) -> Result<Self> {
        let mut p = CMatrix::zeros(dim, dim);
        for &i in plus {
            if i >= dim {
                return Err(Error::domain(format!("basis index {i} out of range for dimension {dim}")));
            }
            p[(i, i)] = re(T::one());
        }
        Self::new(p)
    }

    /// `Pi+ = |psi><psi|`: "is the system still in `psi`?".
    pub fn rank_one(psi: &CVector<T>) -> Result<Self> {
        Self::new(DensityMatrix::pure(psi)?.into_matrix())
    }

    pub fn dim(&self) -> usize {
        self.pi_plus.nrows()
    }

    /// Rank of `Pi+`.
    pub fn m(&self) -> usize {
        self.plus_basis.len()
    }

    /// Rank of `Pi-`.
    pub fn n(&self) -> usize {
        self.minus_basis.len()
    }

    pub fn pi_plus(&self) -> &CMatrix<T> {
        &self.pi_plus
    }

    pub fn pi_minus(&self) -> &CMatrix<T> {
        &self.pi_minus
    }

    pub fn observable(&self) -> CMatrix<T> {
        &self.pi_plus - &self.pi_minus
    }

    /// Matrix units `|a><b|` within each block: a spanning set of the
    /// incoherent (block-diagonal) operators.
    fn block_basis(&self) -> impl Iterator<Item = CMatrix<T>> + '_ {
        let within = |basis: &'_ [CVector<T>]| {
            basis
                .iter()
                .flat_map(move |a| basis.iter().map(move |b| a * b.adjoint()))
                .collect::<Vec<_>>()
        };
        within(&self.plus_basis).into_iter().chain(within(&self.minus_basis))
    }

    /// Largest modulus of `Pi+ rho Pi-`; zero iff `rho` is incoherent.
    pub fn coherence(&self, rho: &CMatrix<T>) -> T {
        max_abs(&(&self.pi_plus * rho * &self.pi_minus))
    }
}

/// Outcome statistics of a dichotomic measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement<T> {
    pub p_plus: T,
    pub p_minus: T,
    /// `<Q> = p_plus - p_minus`
    pub expectation: T,
}

/// A dissipative channel `V` with rate `gamma`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dissipator<T: Real> {
    v: CMatrix<T>,
    gamma: T,
}

impl<T: Real> Dissipator<T> {
    pub fn new(v: CMatrix<T>, gamma: T) -> Result<Self> {
        require_square(&v, "dissipator")?;
        let tr = trace(&v).modulus();
        if tr > tol::<T>(1e-12) * max_abs(&v).max(T::one()) {
            return Err(Error::validation("dissipator", format!("operator not traceless (|tr| = {tr})")));
        }
        if !(gamma >= T::zero() && gamma.is_finite()) {
            return Err(Error::validation("dissipator", format!("rate {gamma} must be >= 0")));
        }
        Ok(Self { v, gamma })
    }

    pub fn operator(&self) -> &CMatrix<T> {
        &self.v
    }

    pub fn rate(&self) -> T {
        self.gamma
    }
}

/// Vectorized GKSL generator.
#[derive(Debug, Clone, PartialEq)]
pub struct Generator<T: Real> {
    dim: usize,
    matrix: CMatrix<T>,
}

/// Builds `L` for
/// `drho/dt = -i[H, rho] + sum_k gamma_k (V rho V^dag - {V^dag V, rho} / 2)`,
/// which is the same as `1/2 sum_k gamma_k ([V, rho V^dag] + [V rho, V^dag])`.
pub fn build_liouvillian<T: Real>(h: &CMatrix<T>, dissipators: &[Dissipator<T>]) -> Result<Generator<T>> {
    let n = require_square(h, "Hamiltonian")?;
    let scale = max_abs(h).max(T::one());
    if hermiticity_defect(h) > tol::<T>(1e-12) * scale {
        return Err(Error::domain("Hamiltonian is not Hermitian"));
    }
    let id = CMatrix::<T>::identity(n, n);
    let minus_i = Complex::new(T::zero(), -T::one());
    let mut l = (id.kronecker(h) - h.transpose().kronecker(&id)) * minus_i;
    for d in dissipators {
        if d.v.nrows() != n {
            return Err(Error::domain(format!(
                "dissipator dimension {} does not match Hamiltonian dimension {n}",
                d.v.nrows()
            )));
        }
        if d.gamma == T::zero() {
            continue;
        }
        let v = &d.v;
        let vdv = v.adjoint() * v;
        let half = re(lit::<T>(0.5));
        let term = v.conjugate().kronecker(v) - (id.kronecker(&vdv) + vdv.transpose().kronecker(&id)) * half;
        l += term * re(d.gamma);
    }
    Ok(Generator { dim: n, matrix: l })
}

impl<T: Real> Generator<T> {
    /// Hilbert-space dimension `N`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// The `N^2 x N^2` matrix.
    pub fn matrix(&self) -> &CMatrix<T> {
        &self.matrix
    }

    /// `drho/dt` at `rho`.
    pub fn apply(&self, rho: &CMatrix<T>) -> CMatrix<T> {
        unvectorize(&(&self.matrix * vectorize(rho)), self.dim)
    }

    /// `exp(L t)` by Pade scaling and squaring.
    pub fn evolution_map(&self, t: T) -> Result<EvolutionMap<T>> {
        if !(t >= T::zero() && t.is_finite()) {
            return Err(Error::domain(format!("evolution time {t} must be >= 0")));
        }
        if t == T::zero() {
            return Ok(EvolutionMap::identity(self.dim));
        }
        Ok(EvolutionMap {
            dim: self.dim,
            t,
            superop: (&self.matrix * re(t)).exp(),
        })
    }
}

/// `phi_t = exp(L t)` acting on vectorized density matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionMap<T: Real> {
    dim: usize,
    t: T,
    superop: CMatrix<T>,
}

impl<T: Real> EvolutionMap<T> {
    pub fn identity(dim: usize) -> Self {
        Self {
            dim,
            t: T::zero(),
            superop: CMatrix::identity(dim * dim, dim * dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn time(&self) -> T {
        self.t
    }

    pub fn superoperator(&self) -> &CMatrix<T> {
        &self.superop
    }

    /// Applies the map to an arbitrary operator (linear extension).
    pub fn apply_operator(&self, x: &CMatrix<T>) -> CMatrix<T> {
        assert_eq!(x.nrows(), self.dim, "operator dimension mismatch");
        unvectorize(&(&self.superop * vectorize(x)), self.dim)
    }

    pub fn apply(&self, rho: &DensityMatrix<T>) -> DensityMatrix<T> {
        DensityMatrix::from_matrix_unchecked(self.apply_operator(rho.matrix()))
    }

    /// `self` after `earlier`: the map for total time `earlier.t + self.t`.
    pub fn compose(&self, earlier: &EvolutionMap<T>) -> EvolutionMap<T> {
        assert_eq!(self.dim, earlier.dim, "map dimension mismatch");
        EvolutionMap {
            dim: self.dim,
            t: self.t + earlier.t,
            superop: &self.superop * &earlier.superop,
        }
    }

    pub fn max_abs_diff(&self, other: &EvolutionMap<T>) -> T {
        max_abs(&(&self.superop - &other.superop))
    }
}

/// `rho(t) = exp(L t)[rho0]`. At `t = 0` the input is returned unchanged.
pub fn evolve<T: Real>(generator: &Generator<T>, rho0: &DensityMatrix<T>, t: T) -> Result<DensityMatrix<T>> {
    if !(t >= T::zero() && t.is_finite()) {
        return Err(Error::domain(format!("evolution time {t} must be >= 0")));
    }
    if rho0.dim() != generator.dim {
        return Err(Error::domain("state and generator dimensions differ"));
    }
    if t == T::zero() {
        return Ok(rho0.clone());
    }
    Ok(generator.evolution_map(t)?.apply(rho0))
}

pub fn measure<T: Real>(pvm: &DichotomicPvm<T>, rho: &DensityMatrix<T>) -> Result<Measurement<T>> {
    if pvm.dim() != rho.dim() {
        return Err(Error::domain(format!(
            "measurement dimension {} does not match state dimension {}",
            pvm.dim(),
            rho.dim()
        )));
    }
    let p_plus = trace(&(pvm.pi_plus() * rho.matrix())).re;
    let p_minus = trace(&(pvm.pi_minus() * rho.matrix())).re;
    Ok(Measurement {
        p_plus,
        p_minus,
        expectation: p_plus - p_minus,
    })
}

/// Whether `rho` is block diagonal w.r.t. the measurement: `max|Pi+ rho Pi-| < tol`.
///
/// Panics if the dimensions differ.
pub fn is_incoherent<T: Real>(pvm: &DichotomicPvm<T>, rho: &DensityMatrix<T>, tol: T) -> bool {
    assert_eq!(pvm.dim(), rho.dim(), "measurement/state dimension mismatch");
    pvm.coherence(rho.matrix()) < tol
}

/// Whether `map` sends every incoherent operator to an incoherent one, i.e.
/// whether it splits into the four block maps `phi++, phi+-, phi-+, phi--`.
/// Checked on the `m^2 + n^2` block matrix units, which span the incoherent set.
pub fn preserves_incoherence<T: Real>(map: &EvolutionMap<T>, pvm: &DichotomicPvm<T>, tol: T) -> bool {
    assert_eq!(pvm.dim(), map.dim(), "measurement/map dimension mismatch");
    pvm.block_basis().all(|x| {
        let y = map.apply_operator(&x);
        pvm.coherence(&y) < tol && pvm.coherence(&y.adjoint()) < tol
    })
}

/// `Pi+ / m`: uniform over the `+` subspace, nothing in the `-` subspace.
pub fn equiprobable_plus_state<T: Real>(pvm: &DichotomicPvm<T>) -> DensityMatrix<T> {
    DensityMatrix::from_matrix_unchecked(pvm.pi_plus().unscale(lit(pvm.m() as f64)))
}

/// Two-time correlation `C(t1, t2) = <Q(t1) Q(t2)>` under the stationary
/// reading `C(t1, t2) = C(0, t2 - t1)`: one projective measurement on `rho0`
/// at time zero, free evolution for `t2 - t1`, then a second measurement.
///
/// Only two-level measurements (`m = n = 1`) are supported.
pub fn correlation<T: Real>(
    generator: &Generator<T>,
    pvm: &DichotomicPvm<T>,
    rho0: &DensityMatrix<T>,
    t1: T,
    t2: T,
) -> Result<T> {
    if pvm.m() != 1 || pvm.n() != 1 {
        return Err(Error::Unsupported(format!(
            "stationary correlation needs m = n = 1, got m = {}, n = {}",
            pvm.m(),
            pvm.n()
        )));
    }
    if !(t1 >= T::zero() && t2 >= t1) {
        return Err(Error::domain(format!("need 0 <= t1 <= t2, got t1 = {t1}, t2 = {t2}")));
    }
    if rho0.dim() != pvm.dim() || generator.dim() != pvm.dim() {
        return Err(Error::domain("generator, measurement and state dimensions differ"));
    }
    let map = generator.evolution_map(t2 - t1)?;
    let q = pvm.observable();
    let mut c = T::zero();
    for (sign, proj) in [(T::one(), pvm.pi_plus()), (-T::one(), pvm.pi_minus())] {
        let branch = map.apply_operator(&(proj * rho0.matrix() * proj));
        c += sign * trace(&(&q * branch)).re;
    }
    Ok(c)
}

/// Vacuum flavor-basis Hamiltonian `U diag(0, kappa dm2_21, kappa dm2_31) U^dagger`.
pub fn flavor_hamiltonian<T: Real>(params: &OscillationParams<T>, antineutrino: bool) -> Result<CMatrix<T>> {
    let u = PmnsMatrix::build(params, antineutrino)?;
    let u = CMatrix::from_iterator(3, 3, u.matrix().iter().copied());
    let kappa: T = lit(PHASE_KAPPA);
    let d = CMatrix::from_diagonal(&CVector::from_vec(vec![
        re(T::zero()),
        re(kappa * params.dm2_21),
        re(kappa * params.dm2_31),
    ]));
    Ok(&u * d * u.adjoint())
}

/// Two dephasing channels diagonal in the mass basis that damp every
/// mass-basis coherence `rho_kl` (k != l) at the same rate `gamma`.
pub fn mass_basis_dephasing<T: Real>(
    params: &OscillationParams<T>,
    antineutrino: bool,
    gamma: T,
) -> Result<Vec<Dissipator<T>>> {
    let u = PmnsMatrix::build(params, antineutrino)?;
    let u = CMatrix::from_iterator(3, 3, u.matrix().iter().copied());
    let s2: T = lit(2.0_f64.sqrt().recip());
    let s6: T = lit(6.0_f64.sqrt().recip());
    [[s2, -s2, T::zero()], [s6, s6, lit::<T>(-2.0) * s6]]
        .into_iter()
        .map(|diag| {
            let d = CMatrix::from_diagonal(&CVector::from_iterator(3, diag.into_iter().map(re)));
            Dissipator::new(&u * d * u.adjoint(), gamma)
        })
        .collect()
}
