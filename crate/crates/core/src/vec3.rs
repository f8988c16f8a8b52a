use std::ops::{Add, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    #[inline]
    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    #[inline]
    pub fn normalized(self) -> Vec3 {
        self * (1.0 / self.norm())
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Rotate this unit direction by polar angle `acos(mu)` and azimuth `phi`
    /// about itself.
    pub fn scatter(self, mu: f64, phi: f64) -> Vec3 {
        let sin_t = (1.0 - mu * mu).max(0.0).sqrt();
        let (sin_p, cos_p) = phi.sin_cos();
        let Vec3 {
            x: ux,
            y: uy,
            z: uz,
        } = self;
        if uz.abs() > 0.99999 {
            let sign = uz.signum();
            return Vec3::new(sin_t * cos_p, sin_t * sin_p, sign * mu).normalized();
        }
        let den = (1.0 - uz * uz).sqrt();
        Vec3::new(
            sin_t * (ux * uz * cos_p - uy * sin_p) / den + ux * mu,
            sin_t * (uy * uz * cos_p + ux * sin_p) / den + uy * mu,
            -sin_t * cos_p * den + uz * mu,
        )
        .normalized()
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    #[inline]
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    #[inline]
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    #[inline]
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scatter_preserves_angle() {
        let dirs = [
            Vec3::new(0.5, 0.0, 3f64.sqrt() / 2.0),
            Vec3::new(0.0, 0.0, 1.0),
            Vec3::new(0.0, 0.0, -1.0),
            Vec3::new(0.3, -0.4, 0.1).normalized(),
        ];
        for d in dirs {
            for &(mu, phi) in &[(0.3, 1.0), (-0.8, 4.0), (0.999, 0.1)] {
                let n = d.scatter(mu, phi);
                assert!((n.norm() - 1.0).abs() < 1e-12);
                assert!((n.dot(d) - mu).abs() < 1e-9, "{d:?} {mu} {}", n.dot(d));
            }
        }
    }
}
