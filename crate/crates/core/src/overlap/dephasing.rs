//! Diagonal overlap for pure-`z` ensembles.
//!
//! With `delta_k = B_z^(k) - mean` and `z_k = exp(-2 i delta_k t)`,
//! `O_MM(t) = exp(i t sum_k delta_k) e_n(z) / C(N, n)` where `e_n` is the
//! elementary symmetric polynomial of degree `n = J + M`. The prefactor is
//! unity in exact arithmetic; keeping it makes the result agree with the
//! statevector to rounding for the actual floating-point fluctuations.
//!
//! `e_n / C(N, n)` is accumulated through the convex recurrence
//! `E_m <- (k - m)/k E_m + m/k z_k E_{m-1}`, so every stored value is an
//! average of unit-modulus products and can neither overflow nor underflow.

use num_complex::Complex;

use super::{base_meta, OverlapEngine, OverlapSeries, SeriesMeta, TimeGrid};
use crate::ensemble::{AtomicEnsemble, DickeLabel};
use crate::error::{Error, Result};
use crate::overlap::EngineId;
use crate::scalar::Real;

pub struct DephasingEngine<T> {
    deltas: Vec<T>,
    delta_sum: T,
    degree: usize,
    /// Evaluate `e_{N-n}(conj z)` instead of `e_n(z)`.
    flipped: bool,
    meta: SeriesMeta,
}

impl<T: Real> DephasingEngine<T> {
    pub fn prepare(ensemble: &AtomicEnsemble<T>, m: DickeLabel) -> Result<Self> {
        m.check_atoms(ensemble.n_atoms())?;
        if !ensemble.is_longitudinal() {
            return Err(Error::WrongEngine(
                "ensemble has transverse field components; use the general engine".into(),
            ));
        }
        let n_atoms = ensemble.n_atoms();
        let mean = ensemble.mean().bz;
        let deltas: Vec<T> = ensemble.fields().iter().map(|f| f.bz - mean).collect();
        let delta_sum = deltas.iter().copied().fold(T::zero(), |a, b| a + b);
        let n = m.excitations() as usize;
        let flipped = 2 * n > n_atoms;
        let degree = if flipped { n_atoms - n } else { n };
        let digits = -(n_atoms as f64 * T::eps_f64()).log10();
        Ok(Self {
            deltas,
            delta_sum,
            degree,
            flipped,
            meta: base_meta(EngineId::Dephasing, ensemble, m, m, digits),
        })
    }
}

impl<T: Real> OverlapEngine<T> for DephasingEngine<T> {
    fn id(&self) -> EngineId {
        EngineId::Dephasing
    }

    fn at(&self, t: T) -> Complex<T> {
        let two = T::cast(2.0);
        let zero = Complex::new(T::zero(), T::zero());
        let mut e = vec![zero; self.degree + 1];
        e[0] = Complex::new(T::one(), T::zero());
        // conj(z_k) = exp(+2 i delta_k t) on the flipped branch
        let sign = if self.flipped { T::one() } else { -T::one() };
        for (idx, &delta) in self.deltas.iter().enumerate() {
            let k = idx + 1;
            let kf = T::cast(k);
            let z = Complex::from_polar(T::one(), sign * two * delta * t);
            for m in (1..=self.degree.min(k)).rev() {
                let mf = T::cast(m);
                e[m] = e[m] * ((kf - mf) / kf) + z * e[m - 1] * (mf / kf);
            }
        }
        // prefactor exp(i t sum delta); the flipped branch also carries prod z_k
        let phase = if self.flipped { -self.delta_sum * t } else { self.delta_sum * t };
        e[self.degree] * Complex::from_polar(T::one(), phase)
    }

    fn meta(&self) -> SeriesMeta {
        self.meta.clone()
    }

    fn cost_per_point(&self) -> f64 {
        (self.deltas.len() * (self.degree + 1)) as f64
    }
}

/// `O_MM(t)` on `grid` for a pure-`z` ensemble.
pub fn dephasing_overlap<T: Real>(
    ensemble: &AtomicEnsemble<T>,
    m: DickeLabel,
    grid: &TimeGrid<T>,
) -> Result<OverlapSeries<T>> {
    Ok(DephasingEngine::prepare(ensemble, m)?.series(grid))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{sample_ensemble, FieldDistribution, FieldVector};
    use proptest::prelude::*;

    fn label(two_j: u32, n: u32) -> DickeLabel {
        DickeLabel::from_excitations(two_j, n).unwrap()
    }

    /// e_n(z) / C(N, n) by enumerating all n-subsets.
    fn brute_force(deltas: &[f64], n: usize, t: f64) -> Complex<f64> {
        let big_n = deltas.len();
        let mut sum = Complex::new(0.0, 0.0);
        let mut count = 0.0;
        for mask in 0u32..(1 << big_n) {
            if mask.count_ones() as usize != n {
                continue;
            }
            let mut p = Complex::new(1.0, 0.0);
            for (k, d) in deltas.iter().enumerate() {
                if mask >> k & 1 == 1 {
                    p *= Complex::from_polar(1.0, -2.0 * d * t);
                }
            }
            sum += p;
            count += 1.0;
        }
        sum / count
    }

    #[test]
    fn edge_labels_are_unimodular() {
        let d = FieldDistribution::dephasing(1.0, 0.1, 3).unwrap();
        let e: AtomicEnsemble<f64> = sample_ensemble(&d, 40).unwrap();
        for n in [0, 40] {
            let eng = DephasingEngine::prepare(&e, label(40, n)).unwrap();
            for t in [0.0, 1.0, 50.0, 1e4] {
                assert!((eng.at(t).norm() - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn two_atom_closed_form() {
        let d: f64 = 0.37;
        let e = AtomicEnsemble::longitudinal([1.0 - d, 1.0 + d]).unwrap();
        let eng = DephasingEngine::prepare(&e, label(2, 1)).unwrap();
        for t in [0.0, 0.3, 1.7, 12.0] {
            let v = eng.at(t);
            assert!((v - Complex::new((2.0 * d * t).cos(), 0.0)).norm() < 1e-14, "t={t}");
        }
    }

    #[test]
    fn commensurate_revival_at_pi() {
        let e = AtomicEnsemble::longitudinal((1..=10).map(|k| k as f64)).unwrap();
        for n in 0..=10 {
            let v = DephasingEngine::prepare(&e, label(10, n)).unwrap().at(std::f64::consts::PI);
            assert!((v.norm() - 1.0).abs() < 1e-12, "n={n}: {v}");
        }
    }

    #[test]
    fn rejects_transverse_fields() {
        let e = AtomicEnsemble::new(vec![FieldVector::new(0.0, 1e-9, 1.0); 3]).unwrap();
        assert!(matches!(
            DephasingEngine::prepare(&e, label(3, 1)),
            Err(Error::WrongEngine(_))
        ));
    }

    #[test]
    fn works_in_single_precision() {
        let e = AtomicEnsemble::longitudinal([0.9f32, 1.0, 1.3, 0.8, 1.1, 1.05]).unwrap();
        let e64 = AtomicEnsemble::longitudinal([0.9f64, 1.0, 1.3, 0.8, 1.1, 1.05].map(|x| x as f32 as f64)).unwrap();
        let a = DephasingEngine::prepare(&e, label(6, 3)).unwrap();
        let b = DephasingEngine::prepare(&e64, label(6, 3)).unwrap();
        for t in [0.5f32, 2.0, 7.0] {
            let (x, y) = (a.at(t), b.at(t as f64));
            assert!((x.re as f64 - y.re).abs() < 1e-5 && (x.im as f64 - y.im).abs() < 1e-5);
        }
    }

    proptest! {
        #[test]
        fn matches_subset_enumeration(
            raw in proptest::collection::vec(-2.0..2.0f64, 1..11),
            t in -5.0..5.0f64,
            pick in 0usize..11,
        ) {
            let big_n = raw.len();
            let n = pick % (big_n + 1);
            let e = AtomicEnsemble::longitudinal(raw.clone()).unwrap();
            let eng = DephasingEngine::prepare(&e, label(big_n as u32, n as u32)).unwrap();
            let (mean, fl) = e.decompose();
            let _ = mean;
            let deltas: Vec<f64> = fl.iter().map(|f| f.bz).collect();
            let sum: f64 = deltas.iter().sum();
            let want = brute_force(&deltas, n, t) * Complex::from_polar(1.0, sum * t);
            prop_assert!((eng.at(t) - want).norm() < 1e-12);
        }

        #[test]
        fn time_reversal_and_shift_invariance(
            seed in any::<u64>(), n_atoms in 2usize..60, frac in 0.0..1.0f64,
            t in 0.0..40.0f64, shift in -3.0..3.0f64,
        ) {
            let d = FieldDistribution::dephasing(1.0, 0.2, seed).unwrap();
            let e: AtomicEnsemble<f64> = sample_ensemble(&d, n_atoms).unwrap();
            let n = (frac * n_atoms as f64).floor() as u32;
            let l = label(n_atoms as u32, n);
            let eng = DephasingEngine::prepare(&e, l).unwrap();
            let v = eng.at(t);
            prop_assert!(v.norm() <= 1.0 + 1e-12);
            prop_assert!((eng.at(-t) - v.conj()).norm() < 1e-12);
            let shifted = AtomicEnsemble::longitudinal(e.fields().iter().map(|f| f.bz + shift)).unwrap();
            let w = DephasingEngine::prepare(&shifted, l).unwrap().at(t);
            prop_assert!((w - v).norm() < 1e-12);
        }
    }
}
