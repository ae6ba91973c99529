//! Minimal 2x2 real linear algebra for the switched-affine phase flows.
//!
//! The matrix exponential uses the closed form for 2x2 matrices: with
//! `mu = tr(A)/2` and `w^2 = mu^2 - det(A)`,
//!
//! ```text
//! exp(A t) = e^{mu t} ( C(w^2 t^2) I + t S(w^2 t^2) (A - mu I) )
//! ```
//!
//! where `C(s) = cosh(sqrt(s))` and `S(s) = sinh(sqrt(s))/sqrt(s)` for
//! `s >= 0`, and the circular analogues for `s < 0`. Near the repeated
//! eigenvalue case (`s ~ 0`) both reduce to their power series, which is what
//! the implementation switches to; this keeps the flow exact to machine
//! precision for every damping regime.

/// 2x2 real matrix in row-major order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

/// 2-vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }

    pub fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }

    pub fn scale(self, k: f64) -> Vec2 {
        Vec2::new(k * self.x, k * self.y)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }
}

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2 {
        a: 1.0,
        b: 0.0,
        c: 0.0,
        d: 1.0,
    };

    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Mat2 { a, b, c, d }
    }

    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn trace(&self) -> f64 {
        self.a + self.d
    }

    pub fn mul_vec(&self, v: Vec2) -> Vec2 {
        Vec2::new(self.a * v.x + self.b * v.y, self.c * v.x + self.d * v.y)
    }

    pub fn mul_mat(&self, o: &Mat2) -> Mat2 {
        Mat2::new(
            self.a * o.a + self.b * o.c,
            self.a * o.b + self.b * o.d,
            self.c * o.a + self.d * o.c,
            self.c * o.b + self.d * o.d,
        )
    }

    pub fn add(&self, o: &Mat2) -> Mat2 {
        Mat2::new(self.a + o.a, self.b + o.b, self.c + o.c, self.d + o.d)
    }

    pub fn scale(&self, k: f64) -> Mat2 {
        Mat2::new(k * self.a, k * self.b, k * self.c, k * self.d)
    }

    /// Inverse; `None` if singular.
    pub fn inverse(&self) -> Option<Mat2> {
        let det = self.det();
        if det == 0.0 {
            return None;
        }
        Some(Mat2::new(self.d / det, -self.b / det, -self.c / det, self.a / det))
    }

    /// Matrix exponential `exp(self * t)` in closed form.
    pub fn exp_scaled(&self, t: f64) -> Mat2 {
        let mu = 0.5 * self.trace();
        // s = (w t)^2, signed: positive for real eigenvalue splitting,
        // negative for a complex pair.
        let s = (mu * mu - self.det()) * t * t;
        let (ch, shc) = cosh_sinhc(s);
        let dev = Mat2::new(self.a - mu, self.b, self.c, self.d - mu);
        let emt = (mu * t).exp();
        Mat2::new(
            emt * (ch + t * shc * dev.a),
            emt * (t * shc * dev.b),
            emt * (t * shc * dev.c),
            emt * (ch + t * shc * dev.d),
        )
    }
}

/// Evaluate `C(s) = sum s^k/(2k)!` and `S(s) = sum s^k/(2k+1)!`.
///
/// For `s > 0` these are `cosh(sqrt(s))` and `sinh(sqrt(s))/sqrt(s)`, for
/// `s < 0` they are `cos(sqrt(-s))` and `sin(sqrt(-s))/sqrt(-s)`. The series
/// branch covers the neighbourhood of repeated eigenvalues.
fn cosh_sinhc(s: f64) -> (f64, f64) {
    if s.abs() < 1e-6 {
        // Truncation error < s^4/8! ~ 1e-29 at the branch point.
        let c = 1.0 + s / 2.0 * (1.0 + s / 12.0 * (1.0 + s / 30.0));
        let sh = 1.0 + s / 6.0 * (1.0 + s / 20.0 * (1.0 + s / 42.0));
        (c, sh)
    } else if s > 0.0 {
        let r = s.sqrt();
        (r.cosh(), r.sinh() / r)
    } else {
        let r = (-s).sqrt();
        (r.cos(), r.sin() / r)
    }
}
