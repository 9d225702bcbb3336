//! Exponential-memory statevector oracle.
//!
//! Atom `k` is bit `k` of the basis index, set meaning "up". Dicke states are
//! equal-weight sums over all indices of the right popcount, and the
//! interference operator is applied one atom at a time.

use num_complex::Complex;

use super::{base_meta, OverlapEngine, OverlapSeries, SeriesMeta, TimeGrid};
use crate::ensemble::{AtomicEnsemble, DickeLabel, FieldVector, SuperpositionState};
use crate::error::{Error, Result};
use crate::overlap::EngineId;
use crate::scalar::Real;
use crate::su2::{interference_operator, Mat2};

/// `2^22` complex doubles is 64 MiB per vector.
pub const ORACLE_MAX_ATOMS: usize = 22;

fn check_size(n_atoms: usize) -> Result<()> {
    if n_atoms > ORACLE_MAX_ATOMS {
        return Err(Error::ResourceLimit {
            what: format!("statevector oracle for {n_atoms} atoms"),
            estimate: 2f64.powi(n_atoms as i32),
            limit: 2f64.powi(ORACLE_MAX_ATOMS as i32),
        });
    }
    Ok(())
}

/// Dense statevector of `sum_M c_M |J, M>`.
pub fn dicke_statevector<T: Real>(n_atoms: usize, terms: &[(DickeLabel, Complex<T>)]) -> Vec<Complex<T>> {
    let dim = 1usize << n_atoms;
    let mut psi = vec![Complex::new(T::zero(), T::zero()); dim];
    for (label, c) in terms {
        let n = label.excitations();
        let count = (0..dim).filter(|i| i.count_ones() == n).count();
        let amp = *c / T::cast(count).sqrt();
        for (i, slot) in psi.iter_mut().enumerate() {
            if i.count_ones() == n {
                *slot += amp;
            }
        }
    }
    psi
}

/// Applies `op` to atom `k` in place.
pub fn apply_single_atom<T: Real>(psi: &mut [Complex<T>], k: usize, op: &Mat2<T>) {
    let bit = 1usize << k;
    for i in 0..psi.len() {
        if i & bit != 0 {
            continue;
        }
        let j = i | bit;
        let (down, up) = (psi[i], psi[j]);
        psi[i] = op.du * up + op.dd * down;
        psi[j] = op.uu * up + op.ud * down;
    }
}

/// `prod_k O^(k)(t) |psi>`.
pub fn evolve_interference<T: Real>(
    psi: &mut [Complex<T>],
    mean: &FieldVector<T>,
    fields: &[FieldVector<T>],
    t: T,
) {
    for (k, f) in fields.iter().enumerate() {
        apply_single_atom(psi, k, &interference_operator(mean, f, t));
    }
}

fn inner<T: Real>(bra: &[Complex<T>], ket: &[Complex<T>]) -> Complex<T> {
    bra.iter()
        .zip(ket)
        .fold(Complex::new(T::zero(), T::zero()), |acc, (b, k)| acc + b.conj() * k)
}

pub struct OracleEngine<T> {
    mean: FieldVector<T>,
    fields: Vec<FieldVector<T>>,
    m_prime: DickeLabel,
    m: DickeLabel,
    meta: SeriesMeta,
}

impl<T: Real> OracleEngine<T> {
    pub fn prepare(ensemble: &AtomicEnsemble<T>, m_prime: DickeLabel, m: DickeLabel) -> Result<Self> {
        check_size(ensemble.n_atoms())?;
        m.check_atoms(ensemble.n_atoms())?;
        m_prime.check_atoms(ensemble.n_atoms())?;
        let digits = -((1usize << ensemble.n_atoms()) as f64 * T::eps_f64()).log10();
        Ok(Self {
            mean: ensemble.mean(),
            fields: ensemble.fields().to_vec(),
            m_prime,
            m,
            meta: base_meta(EngineId::Oracle, ensemble, m_prime, m, digits),
        })
    }
}

impl<T: Real> OverlapEngine<T> for OracleEngine<T> {
    fn id(&self) -> EngineId {
        EngineId::Oracle
    }

    fn at(&self, t: T) -> Complex<T> {
        let one = Complex::new(T::one(), T::zero());
        let n_atoms = self.fields.len();
        let mut psi = dicke_statevector(n_atoms, &[(self.m, one)]);
        evolve_interference(&mut psi, &self.mean, &self.fields, t);
        let bra = dicke_statevector(n_atoms, &[(self.m_prime, one)]);
        inner(&bra, &psi)
    }

    fn meta(&self) -> SeriesMeta {
        self.meta.clone()
    }

    fn cost_per_point(&self) -> f64 {
        (self.fields.len() << self.fields.len()) as f64
    }
}

/// `O_{M'M}(t)` by brute force; `N <= 22`.
pub fn oracle_overlap<T: Real>(
    ensemble: &AtomicEnsemble<T>,
    m_prime: DickeLabel,
    m: DickeLabel,
    grid: &TimeGrid<T>,
) -> Result<OverlapSeries<T>> {
    Ok(OracleEngine::prepare(ensemble, m_prime, m)?.series(grid))
}

/// Full `(N+1) x (N+1)` matrix `O[n'][n]` at one time, indexed by excitation
/// numbers. One evolution per column.
pub fn oracle_overlap_matrix<T: Real>(ensemble: &AtomicEnsemble<T>, t: T) -> Result<Vec<Vec<Complex<T>>>> {
    let n_atoms = ensemble.n_atoms();
    check_size(n_atoms)?;
    let mean = ensemble.mean();
    let one = Complex::new(T::one(), T::zero());
    let labels: Vec<DickeLabel> = (0..=n_atoms as u32)
        .map(|n| DickeLabel::from_excitations(n_atoms as u32, n))
        .collect::<Result<_>>()?;
    let bras: Vec<Vec<Complex<T>>> = labels.iter().map(|l| dicke_statevector(n_atoms, &[(*l, one)])).collect();
    let mut out = vec![vec![Complex::new(T::zero(), T::zero()); n_atoms + 1]; n_atoms + 1];
    for (col, l) in labels.iter().enumerate() {
        let mut psi = dicke_statevector(n_atoms, &[(*l, one)]);
        evolve_interference(&mut psi, &mean, ensemble.fields(), t);
        for (row, bra) in bras.iter().enumerate() {
            out[row][col] = inner(bra, &psi);
        }
    }
    Ok(out)
}

/// `1 - |<phi_0(t)|phi(t)>|^2` straight from the statevector, using actual
/// `U_0` and `U` propagators rather than the interference product.
pub fn oracle_leakage<T: Real>(
    state: &SuperpositionState<T>,
    ensemble: &AtomicEnsemble<T>,
    grid: &TimeGrid<T>,
) -> Result<Vec<T>> {
    let n_atoms = ensemble.n_atoms();
    check_size(n_atoms)?;
    for (l, _) in state.terms() {
        l.check_atoms(n_atoms)?;
    }
    let mean = ensemble.mean();
    let phi0 = dicke_statevector(n_atoms, state.terms());
    Ok(grid
        .times()
        .iter()
        .map(|&t| {
            let mut ideal = phi0.clone();
            let mut actual = phi0.clone();
            for (k, f) in ensemble.fields().iter().enumerate() {
                apply_single_atom(&mut ideal, k, &crate::su2::propagator(&mean, t));
                apply_single_atom(&mut actual, k, &crate::su2::propagator(f, t));
            }
            T::one() - inner(&ideal, &actual).norm_sqr()
        })
        .collect())
}
