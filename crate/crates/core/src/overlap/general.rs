//! General overlap via the factorised phase-coherent representation.
//!
//! `O_{M'M} = N_JM N_JM' [x^n y^n'] prod_k G_k(x, y)` with
//! `G_k = a_k + b_k x + c_k y + d_k x y`. Only coefficients with `p <= n` and
//! `q <= n'` can reach `x^n y^n'`, so the product is truncated there.
//!
//! After `k` atoms the raw coefficient is stored divided by
//! `2^-k sqrt(C(k, p) C(k, q))`. That entry is the overlap of `k`-atom Dicke
//! states `<k, q| prod O |k, p>`, so it is bounded by one and, unlike a
//! `1 / (C(k, p) C(k, q))` normalisation, has no dynamic range across the
//! table to underflow. The update becomes
//!
//! ```text
//! u[p][q] <- (2a) s(p) s(q) u[p][q]     + (2b) r(p) s(q) u[p-1][q]
//!          + (2c) s(p) r(q) u[p][q-1]   + (2d) r(p) r(q) u[p-1][q-1]
//! ```
//!
//! with `s(p) = sqrt((k-p)/k)`, `r(p) = sqrt(p/k)`, and `u[n][n']` is the
//! answer with no final rescale.
//!
//! When `n > N/2` (resp. `n' > N/2`) the polynomial is reversed in `x` (resp.
//! `y`) and the complementary coefficient is extracted instead, so the table
//! never exceeds `(min(n, N-n) + 1) x (min(n', N-n') + 1)`.

use num_complex::Complex;

use super::{base_meta, OverlapEngine, OverlapSeries, SeriesMeta, TimeGrid};
use crate::ensemble::{AtomicEnsemble, DickeLabel, FieldVector};
use crate::error::{Error, Result};
use crate::overlap::EngineId;
use crate::scalar::Real;
use crate::su2::{g_factor, interference_operator, GFactor};

/// Upper bound on complex multiply-adds a single request may schedule.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CostBudget(pub f64);

impl CostBudget {
    pub const DEFAULT: CostBudget = CostBudget(2e11);

    pub fn unlimited() -> Self {
        CostBudget(f64::INFINITY)
    }

    pub fn check(&self, estimate: f64, what: &str) -> Result<()> {
        if estimate > self.0 {
            return Err(Error::ResourceLimit {
                what: what.to_string(),
                estimate,
                limit: self.0,
            });
        }
        Ok(())
    }
}

impl Default for CostBudget {
    fn default() -> Self {
        Self::DEFAULT
    }
}

fn fill_weights<T: Real>(stay: &mut [T], step: &mut [T], k: T) {
    for (p, (s, t)) in stay.iter_mut().zip(step.iter_mut()).enumerate() {
        let pf = T::cast(p);
        *s = ((k - pf) / k).sqrt();
        *t = (pf / k).sqrt();
    }
}

pub struct GeneralEngine<T> {
    mean: FieldVector<T>,
    fields: Vec<FieldVector<T>>,
    /// truncation degrees after reindexing
    p_max: usize,
    q_max: usize,
    flip_x: bool,
    flip_y: bool,
    meta: SeriesMeta,
}

impl<T: Real> GeneralEngine<T> {
    pub fn prepare(
        ensemble: &AtomicEnsemble<T>,
        m_prime: DickeLabel,
        m: DickeLabel,
        budget: CostBudget,
    ) -> Result<Self> {
        let n_atoms = ensemble.n_atoms();
        m.check_atoms(n_atoms)?;
        m_prime.check_atoms(n_atoms)?;
        let n = m.excitations() as usize;
        let n_prime = m_prime.excitations() as usize;
        let flip_x = 2 * n > n_atoms;
        let flip_y = 2 * n_prime > n_atoms;
        let p_max = if flip_x { n_atoms - n } else { n };
        let q_max = if flip_y { n_atoms - n_prime } else { n_prime };
        let cost = n_atoms as f64 * (p_max + 1) as f64 * (q_max + 1) as f64;
        budget.check(cost, "general engine, single time point")?;
        let digits = -(n_atoms as f64 * T::eps_f64()).log10();
        Ok(Self {
            mean: ensemble.mean(),
            fields: ensemble.fields().to_vec(),
            p_max,
            q_max,
            flip_x,
            flip_y,
            meta: base_meta(EngineId::General, ensemble, m_prime, m, digits),
        })
    }

    fn factor(&self, field: &FieldVector<T>, t: T) -> GFactor<T> {
        let mut g = g_factor(&interference_operator(&self.mean, field, t));
        if self.flip_x {
            g = g.flip_x();
        }
        if self.flip_y {
            g = g.flip_y();
        }
        g
    }
}

impl<T: Real> OverlapEngine<T> for GeneralEngine<T> {
    fn id(&self) -> EngineId {
        EngineId::General
    }

    fn at(&self, t: T) -> Complex<T> {
        let zero = Complex::new(T::zero(), T::zero());
        let width = self.q_max + 1;
        let mut table = vec![zero; (self.p_max + 1) * width];
        table[0] = Complex::new(T::one(), T::zero());
        // per-step weights sqrt((k - p)/k) and sqrt(p/k)
        let mut stay_p = vec![T::zero(); self.p_max + 1];
        let mut step_p = vec![T::zero(); self.p_max + 1];
        let mut stay_q = vec![T::zero(); self.q_max + 1];
        let mut step_q = vec![T::zero(); self.q_max + 1];

        for (idx, field) in self.fields.iter().enumerate() {
            let k = idx + 1;
            let kf = T::cast(k);
            let g = self.factor(field, t);
            let two = T::cast(2.0);
            let (a, b, c, d) = (g.a * two, g.b * two, g.c * two, g.d * two);
            let p_top = self.p_max.min(k);
            let q_top = self.q_max.min(k);
            fill_weights(&mut stay_p[..=p_top], &mut step_p[..=p_top], kf);
            fill_weights(&mut stay_q[..=q_top], &mut step_q[..=q_top], kf);
            // descending order reads only not-yet-updated neighbours
            for p in (0..=p_top).rev() {
                let row = p * width;
                let (sp, tp) = (stay_p[p], step_p[p]);
                for q in (0..=q_top).rev() {
                    let (sq, tq) = (stay_q[q], step_q[q]);
                    let mut v = table[row + q] * a * (sp * sq);
                    if p > 0 {
                        v += table[row - width + q] * b * (tp * sq);
                        if q > 0 {
                            v += table[row - width + q - 1] * d * (tp * tq);
                        }
                    }
                    if q > 0 {
                        v += table[row + q - 1] * c * (sp * tq);
                    }
                    table[row + q] = v;
                }
            }
        }
        table[self.p_max * width + self.q_max]
    }

    fn meta(&self) -> SeriesMeta {
        self.meta.clone()
    }

    fn cost_per_point(&self) -> f64 {
        self.fields.len() as f64 * ((self.p_max + 1) * (self.q_max + 1)) as f64
    }
}

/// `O_{M'M}(t)` on `grid` for arbitrary fields.
pub fn general_overlap<T: Real>(
    ensemble: &AtomicEnsemble<T>,
    m_prime: DickeLabel,
    m: DickeLabel,
    grid: &TimeGrid<T>,
) -> Result<OverlapSeries<T>> {
    let budget = CostBudget::default();
    let eng = GeneralEngine::prepare(ensemble, m_prime, m, budget)?;
    budget.check(eng.cost_per_point() * grid.len() as f64, "general engine series")?;
    Ok(eng.series(grid))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::combinatorics::ln_binomial;
    use crate::ensemble::{sample_ensemble, FieldDistribution};
    use crate::overlap::dephasing::DephasingEngine;
    use proptest::prelude::*;

    fn label(two_j: u32, n: u32) -> DickeLabel {
        DickeLabel::from_excitations(two_j, n).unwrap()
    }

    /// Raw coefficient of x^n y^n' by full (untruncated, unnormalised)
    /// polynomial multiplication; fine for small N.
    fn raw_coefficient(factors: &[GFactor<f64>], n: usize, n_prime: usize) -> Complex<f64> {
        let big_n = factors.len();
        let w = big_n + 1;
        let mut poly = vec![Complex::new(0.0, 0.0); w * w];
        poly[0] = Complex::new(1.0, 0.0);
        for g in factors {
            let mut next = vec![Complex::new(0.0, 0.0); w * w];
            for p in 0..w {
                for q in 0..w {
                    let v = poly[p * w + q];
                    if v == Complex::new(0.0, 0.0) {
                        continue;
                    }
                    next[p * w + q] += v * g.a;
                    if p + 1 < w {
                        next[(p + 1) * w + q] += v * g.b;
                    }
                    if q + 1 < w {
                        next[p * w + q + 1] += v * g.c;
                    }
                    if p + 1 < w && q + 1 < w {
                        next[(p + 1) * w + q + 1] += v * g.d;
                    }
                }
            }
            poly = next;
        }
        poly[n * w + n_prime]
    }

    #[test]
    fn homogeneous_is_identity_matrix() {
        let f = FieldVector::new(0.3, -0.8, 0.45);
        let e = AtomicEnsemble::homogeneous(f, 9).unwrap();
        for n in 0..=9 {
            for np in 0..=9 {
                let eng = GeneralEngine::prepare(&e, label(9, np), label(9, n), CostBudget::default()).unwrap();
                for t in [0.0, 0.7, 33.0] {
                    let want = if n == np { 1.0 } else { 0.0 };
                    assert!((eng.at(t) - Complex::new(want, 0.0)).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn budget_guard() {
        let e = AtomicEnsemble::homogeneous(FieldVector::new(1.0, 0.0, 0.0), 100).unwrap();
        let r = GeneralEngine::prepare(&e, label(100, 50), label(100, 50), CostBudget(1e3));
        assert!(matches!(r, Err(Error::ResourceLimit { .. })));
    }

    #[test]
    fn large_ensemble_stays_normal() {
        // C(1400, 700) ~ 1e420 is far beyond f64; the power-of-two rescale
        // must keep the homogeneous diagonal at exactly one
        let e = AtomicEnsemble::homogeneous(FieldVector::new(0.2, 0.1, 1.0), 1400).unwrap();
        let eng = GeneralEngine::prepare(&e, label(1400, 700), label(1400, 700), CostBudget::unlimited()).unwrap();
        let v = eng.at(2.0);
        assert!((v - Complex::new(1.0, 0.0)).norm() < 1e-9, "{v}");
    }

    proptest! {
        #[test]
        fn matches_untruncated_product(
            seed in any::<u64>(), n_atoms in 1usize..9, pn in 0.0..1.0f64, pnp in 0.0..1.0f64,
            t in 0.0..6.0f64,
        ) {
            let dist = FieldDistribution::new(FieldVector::new(0.4, -0.3, 0.8), [0.5, 0.5, 0.5], seed).unwrap();
            let e: AtomicEnsemble<f64> = sample_ensemble(&dist, n_atoms).unwrap();
            let n = (pn * (n_atoms + 1) as f64).floor().min(n_atoms as f64) as usize;
            let np = (pnp * (n_atoms + 1) as f64).floor().min(n_atoms as f64) as usize;
            let eng = GeneralEngine::prepare(&e, label(n_atoms as u32, np as u32), label(n_atoms as u32, n as u32), CostBudget::default()).unwrap();
            let mean = e.mean();
            let factors: Vec<_> = e.fields().iter().map(|f| g_factor(&interference_operator(&mean, f, t))).collect();
            let norm = 2f64.powi(n_atoms as i32)
                / ((ln_binomial(n_atoms as u64, n as u64) + ln_binomial(n_atoms as u64, np as u64)) * 0.5).exp();
            let want = raw_coefficient(&factors, n, np) * norm;
            prop_assert!((eng.at(t) - want).norm() < 1e-12);
            prop_assert!(eng.at(t).norm() <= 1.0 + 1e-12);
        }

        #[test]
        fn matches_dephasing_engine(seed in any::<u64>(), n_atoms in 1usize..120, frac in 0.0..1.0f64, t in 0.0..30.0f64) {
            let dist = FieldDistribution::dephasing(1.0, 0.1, seed).unwrap();
            let e: AtomicEnsemble<f64> = sample_ensemble(&dist, n_atoms).unwrap();
            let n = ((frac * n_atoms as f64).round() as u32).min(n_atoms as u32);
            let l = label(n_atoms as u32, n);
            let g = GeneralEngine::prepare(&e, l, l, CostBudget::default()).unwrap();
            let d = DephasingEngine::prepare(&e, l).unwrap();
            prop_assert!((g.at(t) - d.at(t)).norm() < 1e-10);
            if n > 0 {
                let off = GeneralEngine::prepare(&e, label(n_atoms as u32, n - 1), l, CostBudget::default()).unwrap();
                prop_assert!(off.at(t).norm() < 1e-10);
            }
        }
    }
}
