//! Single-atom 2x2 unitary algebra: propagators, the interference operator
//! `O^(k) = exp(+i t B . sigma) exp(-i t B^(k) . sigma)`, and the
//! four-coefficient phase factor `G^(k)` built from it.
//!
//! Basis order is `(up, down)`; `sigma_+ / 2 = |up><down|`.

use std::ops::Mul;

use num_complex::Complex;

use crate::ensemble::FieldVector;
use crate::scalar::Real;

/// Complex 2x2 matrix, row-major `[uu, ud, du, dd]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat2<T> {
    pub uu: Complex<T>,
    pub ud: Complex<T>,
    pub du: Complex<T>,
    pub dd: Complex<T>,
}

impl<T: Real> Mat2<T> {
    pub fn new(uu: Complex<T>, ud: Complex<T>, du: Complex<T>, dd: Complex<T>) -> Self {
        Self { uu, ud, du, dd }
    }

    pub fn identity() -> Self {
        let (o, z) = (Complex::new(T::one(), T::zero()), Complex::new(T::zero(), T::zero()));
        Self::new(o, z, z, o)
    }

    pub fn diag(up: Complex<T>, down: Complex<T>) -> Self {
        let z = Complex::new(T::zero(), T::zero());
        Self::new(up, z, z, down)
    }

    pub fn adjoint(&self) -> Self {
        Self::new(self.uu.conj(), self.du.conj(), self.ud.conj(), self.dd.conj())
    }

    pub fn entries(&self) -> [Complex<T>; 4] {
        [self.uu, self.ud, self.du, self.dd]
    }

    pub fn is_finite(&self) -> bool {
        self.entries().iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    /// Largest entry-wise modulus of `self - other`.
    pub fn max_diff(&self, other: &Self) -> T {
        self.entries()
            .iter()
            .zip(other.entries().iter())
            .map(|(a, b)| (*a - *b).norm())
            .fold(T::zero(), T::max)
    }

    /// `max |(M^dagger M - 1)_ij|`.
    pub fn unitarity_defect(&self) -> T {
        (self.adjoint() * *self).max_diff(&Self::identity())
    }

    /// Writes the matrix as `R 1 + i I . sigma` (plus whatever is left over for
    /// a non-SU(2) input). Returns the complex `R` and complex `I`; for an
    /// SU(2) element both are real.
    pub fn pauli_decompose(&self) -> (Complex<T>, [Complex<T>; 3]) {
        let half = T::cast(0.5);
        let i = Complex::new(T::zero(), T::one());
        let r = (self.uu + self.dd) * half;
        // uu - dd = 2 i Iz, ud + du = 2 i Ix, ud - du = 2 Iy
        let iz = (self.uu - self.dd) * half / i;
        let ix = (self.ud + self.du) * half / i;
        let iy = (self.ud - self.du) * half;
        (r, [ix, iy, iz])
    }
}

impl<T: Real> Mul for Mat2<T> {
    type Output = Mat2<T>;

    fn mul(self, o: Mat2<T>) -> Mat2<T> {
        Mat2::new(
            self.uu * o.uu + self.ud * o.du,
            self.uu * o.ud + self.ud * o.dd,
            self.du * o.uu + self.dd * o.du,
            self.du * o.ud + self.dd * o.dd,
        )
    }
}

/// `cos(|B| t)` and `sin(|B| t) / |B|` (the latter tends to `t` as `B -> 0`).
fn cos_sinc<T: Real>(field: &FieldVector<T>, t: T) -> (T, T) {
    let b = field.magnitude();
    if b > T::zero() {
        let (s, c) = (b * t).sin_cos();
        (c, s / b)
    } else {
        (T::one(), t)
    }
}

/// `exp(-i t B . sigma) = cos(Bt) 1 - i sin(Bt) n . sigma`.
pub fn propagator<T: Real>(field: &FieldVector<T>, t: T) -> Mat2<T> {
    let (c, s) = cos_sinc(field, t);
    let (x, y, z) = (field.bx * s, field.by * s, field.bz * s);
    Mat2::new(
        Complex::new(c, -z),
        Complex::new(-y, -x),
        Complex::new(y, -x),
        Complex::new(c, z),
    )
}

/// Per-atom factor of `U_0^dagger(t) U(t)`: `exp(+i t mean . sigma) exp(-i t atom . sigma)`.
pub fn interference_operator<T: Real>(
    mean: &FieldVector<T>,
    atom_field: &FieldVector<T>,
    t: T,
) -> Mat2<T> {
    propagator(mean, -t) * propagator(atom_field, t)
}

/// Closed-form `(R, I)` of the interference operator,
///
/// ```text
/// R = cos(Bt) cos(B_k t) + (n . n_k) sin(Bt) sin(B_k t)
/// I = n sin(Bt) cos(B_k t) - n_k cos(Bt) sin(B_k t) + (n x n_k) sin(Bt) sin(B_k t)
/// ```
///
/// Note the minus sign on the second term of `I`; it is what makes `O = 1`
/// when `B_k = B`. Used as an independent cross-check of
/// [`interference_operator`].
pub fn interference_components<T: Real>(
    mean: &FieldVector<T>,
    atom_field: &FieldVector<T>,
    t: T,
) -> (T, [T; 3]) {
    let (c0, s0) = cos_sinc(mean, t);
    let (ck, sk) = cos_sinc(atom_field, t);
    let r = c0 * ck + s0 * sk * mean.dot(atom_field);
    let i = mean
        .scale(s0 * ck)
        .sub(&atom_field.scale(c0 * sk))
        .add(&mean.cross(atom_field).scale(s0 * sk));
    (r, i.to_array())
}

/// Coefficients of `G(x, y) = a + b x + c y + d x y` with `x = e^{i theta}` and
/// `y = e^{-i theta'}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GFactor<T> {
    pub a: Complex<T>,
    pub b: Complex<T>,
    pub c: Complex<T>,
    pub d: Complex<T>,
}

impl<T: Real> GFactor<T> {
    pub fn eval(&self, theta: T, theta_prime: T) -> Complex<T> {
        let x = Complex::from_polar(T::one(), theta);
        let y = Complex::from_polar(T::one(), -theta_prime);
        self.a + self.b * x + self.c * y + self.d * x * y
    }

    /// Coefficients of the reversed polynomial in `x`: `x G(1/x, y)`.
    pub fn flip_x(self) -> Self {
        Self { a: self.b, b: self.a, c: self.d, d: self.c }
    }

    /// Coefficients of the reversed polynomial in `y`: `y G(x, 1/y)`.
    pub fn flip_y(self) -> Self {
        Self { a: self.c, b: self.d, c: self.a, d: self.b }
    }
}

/// `G = <down| (1 + y sigma_-/2) O (1 + x sigma_+/2) |down> / 2`, i.e.
/// `(a, b, c, d) = (O_dd, O_du, O_ud, O_uu) / 2`.
pub fn g_factor<T: Real>(op: &Mat2<T>) -> GFactor<T> {
    let half = T::cast(0.5);
    GFactor {
        a: op.dd * half,
        b: op.du * half,
        c: op.ud * half,
        d: op.uu * half,
    }
}
