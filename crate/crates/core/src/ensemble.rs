//! Physical configuration: per-atom coupling fields, their random generation,
//! the mean/fluctuation split, and Dicke-basis bookkeeping.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::combinatorics::ln_half_binomial_pmf;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Name of the pseudo-random pipeline used by [`sample_ensemble`]; recorded in
/// every output manifest.
pub const GENERATOR: &str = "chacha20(seed_from_u64)/rand_distr::StandardNormal";

/// Detuning and complex Rabi coupling of a single atom, both in angular
/// frequency units.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RawAtomParams<T> {
    pub detuning: T,
    pub rabi: Complex<T>,
}

/// Real 3-vector `B` in the single-atom Hamiltonian `B . sigma`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FieldVector<T> {
    pub bx: T,
    pub by: T,
    pub bz: T,
}

impl<T: Real> FieldVector<T> {
    pub fn new(bx: T, by: T, bz: T) -> Self {
        Self { bx, by, bz }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    pub fn from_array(a: [T; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn to_array(self) -> [T; 3] {
        [self.bx, self.by, self.bz]
    }

    pub fn is_finite(&self) -> bool {
        self.bx.is_finite() && self.by.is_finite() && self.bz.is_finite()
    }

    pub fn magnitude(&self) -> T {
        self.bx.hypot(self.by).hypot(self.bz)
    }

    /// Unit direction, `None` when the field vanishes.
    pub fn direction(&self) -> Option<Self> {
        let b = self.magnitude();
        (b > T::zero()).then(|| self.scale(T::one() / b))
    }

    pub fn scale(&self, s: T) -> Self {
        Self::new(self.bx * s, self.by * s, self.bz * s)
    }

    pub fn add(&self, o: &Self) -> Self {
        Self::new(self.bx + o.bx, self.by + o.by, self.bz + o.bz)
    }

    pub fn sub(&self, o: &Self) -> Self {
        Self::new(self.bx - o.bx, self.by - o.by, self.bz - o.bz)
    }

    pub fn dot(&self, o: &Self) -> T {
        self.bx * o.bx + self.by * o.by + self.bz * o.bz
    }

    pub fn cross(&self, o: &Self) -> Self {
        Self::new(
            self.by * o.bz - self.bz * o.by,
            self.bz * o.bx - self.bx * o.bz,
            self.bx * o.by - self.by * o.bx,
        )
    }

    pub fn cast<U: Real>(&self) -> FieldVector<U> {
        FieldVector::new(U::cast(self.bx), U::cast(self.by), U::cast(self.bz))
    }
}

/// `(omega_a, g0) -> B = (Re g0 / 2, -Im g0 / 2, omega_a / 2)`.
///
/// With `sigma_+ = |up><down|` the single-atom term
/// `omega_a sigma_z / 2 + (g0 sigma_+ + h.c.) / 2` equals `B . sigma`.
pub fn map_raw_to_field<T: Real>(params: RawAtomParams<T>) -> Result<FieldVector<T>> {
    let RawAtomParams { detuning, rabi } = params;
    if !(detuning.is_finite() && rabi.re.is_finite() && rabi.im.is_finite()) {
        return Err(Error::invalid("atom parameters must be finite"));
    }
    let half = T::cast(0.5);
    Ok(FieldVector::new(rabi.re * half, -rabi.im * half, detuning * half))
}

/// Per-atom coupling fields of an `N`-atom ensemble.
#[derive(Clone, Debug, PartialEq)]
pub struct AtomicEnsemble<T> {
    fields: Vec<FieldVector<T>>,
    seed: Option<u64>,
}

impl<T: Real> AtomicEnsemble<T> {
    pub fn new(fields: Vec<FieldVector<T>>) -> Result<Self> {
        if fields.is_empty() {
            return Err(Error::invalid("an ensemble needs at least one atom"));
        }
        if let Some(k) = fields.iter().position(|f| !f.is_finite()) {
            return Err(Error::invalid(format!("field of atom {k} is not finite")));
        }
        Ok(Self { fields, seed: None })
    }

    /// Every atom sees the same field.
    pub fn homogeneous(field: FieldVector<T>, n_atoms: usize) -> Result<Self> {
        Self::new(vec![field; n_atoms])
    }

    /// Pure-`z` ensemble with the given longitudinal fields.
    pub fn longitudinal(bz: impl IntoIterator<Item = T>) -> Result<Self> {
        Self::new(
            bz.into_iter()
                .map(|z| FieldVector::new(T::zero(), T::zero(), z))
                .collect(),
        )
    }

    pub fn n_atoms(&self) -> usize {
        self.fields.len()
    }

    pub fn fields(&self) -> &[FieldVector<T>] {
        &self.fields
    }

    /// Seed of the distribution this ensemble was drawn from, if any.
    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// Empirical mean field.
    pub fn mean(&self) -> FieldVector<T> {
        let sum = self
            .fields
            .iter()
            .fold(FieldVector::zero(), |acc, f| acc.add(f));
        sum.scale(T::one() / T::cast(self.fields.len()))
    }

    /// Mean field and per-atom fluctuations around it.
    pub fn decompose(&self) -> (FieldVector<T>, Vec<FieldVector<T>>) {
        let mean = self.mean();
        let fluct = self.fields.iter().map(|f| f.sub(&mean)).collect();
        (mean, fluct)
    }

    /// True when every transverse component is exactly zero.
    pub fn is_longitudinal(&self) -> bool {
        self.fields
            .iter()
            .all(|f| f.bx == T::zero() && f.by == T::zero())
    }

    pub fn max_magnitude(&self) -> T {
        self.fields
            .iter()
            .map(|f| f.magnitude())
            .fold(T::zero(), T::max)
    }

    /// All fields multiplied by `lambda`; equivalent to rescaling time by `1/lambda`.
    pub fn scaled(&self, lambda: T) -> Self {
        Self {
            fields: self.fields.iter().map(|f| f.scale(lambda)).collect(),
            seed: self.seed,
        }
    }

    /// Hex SHA-256 over the `f64` bit patterns of every field component.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for f in &self.fields {
            for c in f.to_array() {
                h.update(c.to_f64_lossy().to_bits().to_le_bytes());
            }
        }
        let digest = h.finalize();
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

/// Gaussian specification from which ensembles are drawn.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldDistribution {
    pub mean: FieldVector<f64>,
    pub sigma: [f64; 3],
    pub seed: u64,
}

impl FieldDistribution {
    pub fn new(mean: FieldVector<f64>, sigma: [f64; 3], seed: u64) -> Result<Self> {
        let d = Self { mean, sigma, seed };
        d.validate()?;
        Ok(d)
    }

    /// Inhomogeneous broadening: `B^(k) = (0, 0, b_z + sigma_z xi_k)`.
    pub fn dephasing(b_z: f64, sigma_z: f64, seed: u64) -> Result<Self> {
        Self::new(FieldVector::new(0.0, 0.0, b_z), [0.0, 0.0, sigma_z], seed)
    }

    /// Inhomogeneous Rabi coupling: mean `(b_r, b_r, 0)`, spread `sigma_r` in x and y.
    pub fn rabi(b_r: f64, sigma_r: f64, seed: u64) -> Result<Self> {
        Self::new(FieldVector::new(b_r, b_r, 0.0), [sigma_r, sigma_r, 0.0], seed)
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.mean.is_finite() {
            return Err(Error::invalid("distribution mean must be finite"));
        }
        if self.sigma.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(Error::invalid("distribution sigma must be finite and >= 0"));
        }
        Ok(())
    }

    /// No transverse mean and no transverse spread.
    pub fn is_longitudinal(&self) -> bool {
        self.mean.bx == 0.0 && self.mean.by == 0.0 && self.sigma[0] == 0.0 && self.sigma[1] == 0.0
    }
}

/// Draws `n_atoms` independent field vectors; a pure function of `(dist, n_atoms)`.
///
/// Three standard normals are consumed per atom (x, y, z order) regardless of
/// which sigmas vanish, so zeroing one component never reshuffles the others.
pub fn sample_ensemble<T: Real>(dist: &FieldDistribution, n_atoms: usize) -> Result<AtomicEnsemble<T>> {
    dist.validate()?;
    if n_atoms == 0 {
        return Err(Error::invalid("n_atoms must be >= 1"));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(dist.seed);
    let mean = dist.mean.to_array();
    let fields = (0..n_atoms)
        .map(|_| {
            let mut c = [0.0f64; 3];
            for (mu, slot) in c.iter_mut().enumerate() {
                let z: f64 = rng.sample(StandardNormal);
                *slot = if dist.sigma[mu] == 0.0 {
                    mean[mu]
                } else {
                    mean[mu] + dist.sigma[mu] * z
                };
            }
            FieldVector::from_array(c).cast::<T>()
        })
        .collect();
    let mut ens = AtomicEnsemble::new(fields)?;
    ens.seed = Some(dist.seed);
    Ok(ens)
}

/// Symmetric collective state `|J, M>` stored as doubled quantum numbers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DickeLabel {
    two_j: u32,
    two_m: i32,
}

impl DickeLabel {
    pub fn new(two_j: u32, two_m: i32) -> Result<Self> {
        if two_m.unsigned_abs() > two_j {
            return Err(Error::invalid(format!("|2M| = {} exceeds 2J = {two_j}", two_m.abs())));
        }
        if (two_j as i64 - two_m as i64).rem_euclid(2) != 0 {
            return Err(Error::invalid(format!("2M = {two_m} and 2J = {two_j} differ in parity")));
        }
        Ok(Self { two_j, two_m })
    }

    /// Label of the Dicke state with `excitations` atoms up out of `n_atoms`.
    pub fn from_excitations(n_atoms: u32, excitations: u32) -> Result<Self> {
        if excitations > n_atoms {
            return Err(Error::invalid(format!(
                "{excitations} excitations exceed {n_atoms} atoms"
            )));
        }
        Self::new(n_atoms, 2 * excitations as i32 - n_atoms as i32)
    }

    pub fn two_j(&self) -> u32 {
        self.two_j
    }

    pub fn two_m(&self) -> i32 {
        self.two_m
    }

    pub fn j(&self) -> f64 {
        self.two_j as f64 / 2.0
    }

    pub fn m(&self) -> f64 {
        self.two_m as f64 / 2.0
    }

    /// Number of excited atoms `n = J + M`.
    pub fn excitations(&self) -> u32 {
        ((self.two_j as i64 + self.two_m as i64) / 2) as u32
    }

    /// Fails unless this label lives in the symmetric space of `n_atoms` atoms.
    pub fn check_atoms(&self, n_atoms: usize) -> Result<()> {
        if self.two_j as usize != n_atoms {
            return Err(Error::invalid(format!(
                "label has 2J = {} but the ensemble has {n_atoms} atoms",
                self.two_j
            )));
        }
        Ok(())
    }
}

/// `ln N_JM` with `N_JM = sqrt((J+M)! (J-M)! 2^N / (2J)!)`.
pub fn log_dicke_norm(label: DickeLabel) -> f64 {
    -0.5 * ln_half_binomial_pmf(label.two_j as u64, label.excitations() as u64)
}

/// Normalised superposition `sum_M c_M |J, M>` over one `J` multiplet.
#[derive(Clone, Debug, PartialEq)]
pub struct SuperpositionState<T> {
    terms: Vec<(DickeLabel, Complex<T>)>,
}

impl<T: Real> SuperpositionState<T> {
    pub fn new(terms: Vec<(DickeLabel, Complex<T>)>) -> Result<Self> {
        let Some(first) = terms.first() else {
            return Err(Error::invalid("superposition needs at least one term"));
        };
        let two_j = first.0.two_j();
        let mut seen = std::collections::BTreeSet::new();
        for (label, c) in &terms {
            if label.two_j() != two_j {
                return Err(Error::invalid("all superposition terms must share 2J"));
            }
            if !seen.insert(label.two_m()) {
                return Err(Error::invalid(format!("label 2M = {} repeated", label.two_m())));
            }
            if !(c.re.is_finite() && c.im.is_finite()) {
                return Err(Error::invalid("coefficients must be finite"));
            }
        }
        let norm: f64 = terms.iter().map(|(_, c)| c.norm_sqr().to_f64_lossy()).sum();
        let tol = 1e-12f64.max(64.0 * T::eps_f64());
        if (norm - 1.0).abs() > tol {
            return Err(Error::invalid(format!("sum |c|^2 = {norm}, expected 1")));
        }
        Ok(Self { terms })
    }

    /// Rescales the coefficients to unit norm before validating.
    pub fn normalized(terms: Vec<(DickeLabel, Complex<T>)>) -> Result<Self> {
        let norm = terms
            .iter()
            .map(|(_, c)| c.norm_sqr())
            .fold(T::zero(), |a, b| a + b)
            .sqrt();
        if !(norm > T::zero()) {
            return Err(Error::invalid("superposition has zero norm"));
        }
        Self::new(terms.into_iter().map(|(l, c)| (l, c / norm)).collect())
    }

    /// Single Dicke state.
    pub fn basis(label: DickeLabel) -> Self {
        Self {
            terms: vec![(label, Complex::new(T::one(), T::zero()))],
        }
    }

    pub fn terms(&self) -> &[(DickeLabel, Complex<T>)] {
        &self.terms
    }

    pub fn two_j(&self) -> u32 {
        self.terms[0].0.two_j()
    }
}
