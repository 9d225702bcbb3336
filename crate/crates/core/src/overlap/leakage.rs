//! Leakage `xi(t) = 1 - |A(t)|^2` with `A = sum_{M',M} c*_{M'} c_M O_{M'M}`.

use num_complex::Complex;

use super::{prepare, CostBudget, EngineChoice, EngineId, TimeGrid};
use crate::ensemble::{AtomicEnsemble, SuperpositionState};
use crate::error::Result;
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct LeakageSeries<T> {
    pub grid: TimeGrid<T>,
    pub engine: EngineId,
    /// `<phi_0(t)|phi(t)>`
    pub amplitude: Vec<Complex<T>>,
    pub xi: Vec<T>,
}

pub fn leakage<T: Real>(
    state: &SuperpositionState<T>,
    ensemble: &AtomicEnsemble<T>,
    grid: &TimeGrid<T>,
    engine: EngineChoice,
    budget: CostBudget,
) -> Result<LeakageSeries<T>> {
    let id = engine.resolve(ensemble);
    let zero = Complex::new(T::zero(), T::zero());
    let mut amplitude = vec![zero; grid.len()];
    let mut total_cost = 0.0;
    let mut pairs = Vec::new();
    for &(lp, cp) in state.terms() {
        for &(l, c) in state.terms() {
            let e = prepare(id, ensemble, lp, l, budget)?;
            total_cost += e.cost_per_point() * grid.len() as f64;
            pairs.push((cp.conj() * c, e));
        }
    }
    budget.check(total_cost, "leakage")?;
    for (w, e) in &pairs {
        let s = e.series(grid);
        for (a, v) in amplitude.iter_mut().zip(&s.values) {
            *a += *w * *v;
        }
    }
    let xi = amplitude.iter().map(|a| T::one() - a.norm_sqr()).collect();
    Ok(LeakageSeries {
        grid: grid.clone(),
        engine: id,
        amplitude,
        xi,
    })
}
