use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use std::ops::Mul;

/// Reduces an angle to `[0, 2π)`.
pub fn wrap_angle(theta: f64) -> f64 {
    let r = theta.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Element `(x, θ)` of the planar Euclidean group `ℂ ∔ 𝕊¹`, with
/// `(x₁, θ₁)·(x₂, θ₂) = (e^{iθ₁}x₂ + x₁, θ₁ + θ₂)`.
///
/// The angle is kept unreduced; [`GroupElement::act`] reduces the bundle
/// angle on output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupElement {
    pub x: Complex64,
    pub theta: f64,
}

impl GroupElement {
    pub const IDENTITY: GroupElement = GroupElement {
        x: Complex64::new(0.0, 0.0),
        theta: 0.0,
    };

    pub fn new(x: Complex64, theta: f64) -> Self {
        GroupElement { x, theta }
    }

    pub fn translation(x: Complex64) -> Self {
        GroupElement { x, theta: 0.0 }
    }

    pub fn rotation(theta: f64) -> Self {
        GroupElement {
            x: Complex64::new(0.0, 0.0),
            theta,
        }
    }

    /// Rotation by `θ` about `ξ`: `(ξ, 0)·(0, θ)·(−ξ, 0)`.
    pub fn rotation_about(xi: Complex64, theta: f64) -> Self {
        GroupElement::translation(xi) * GroupElement::rotation(theta) * GroupElement::translation(-xi)
    }

    pub fn inverse(&self) -> Self {
        let r = Complex64::from_polar(1.0, -self.theta);
        GroupElement {
            x: -(r * self.x),
            theta: -self.theta,
        }
    }

    /// `e^{iθ}p + x` without the bundle angle.
    #[inline]
    pub fn apply(&self, p: Complex64) -> Complex64 {
        Complex64::from_polar(1.0, self.theta) * p + self.x
    }

    /// Action on the bundle `ℂ × 𝕊¹`: `(e^{iθ}p + x, φ + θ mod 2π)`.
    pub fn act(&self, p: Complex64, phi: f64) -> (Complex64, f64) {
        (self.apply(p), wrap_angle(phi + self.theta))
    }
}

impl Mul for GroupElement {
    type Output = GroupElement;

    fn mul(self, rhs: GroupElement) -> GroupElement {
        GroupElement {
            x: Complex64::from_polar(1.0, self.theta) * rhs.x + self.x,
            theta: self.theta + rhs.theta,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn close(a: (Complex64, f64), b: (Complex64, f64), tol: f64) -> bool {
        let da = (a.1 - b.1).abs();
        (a.0 - b.0).norm() <= tol && (da <= tol || (TAU - da) <= tol)
    }

    #[test]
    fn identity_acts_trivially() {
        let p = Complex64::new(0.3, -1.2);
        let out = GroupElement::IDENTITY.act(p, 1.0);
        assert_eq!(out, (p, 1.0));
    }

    #[test]
    fn half_turn_plus_translation() {
        // (1, π)·(i, 0) = (e^{iπ} i + 1, π) = (1 − i, π)
        let g = GroupElement::new(Complex64::new(1.0, 0.0), PI);
        let (q, phi) = g.act(Complex64::new(0.0, 1.0), 0.0);
        assert!((q - Complex64::new(1.0, -1.0)).norm() < 1e-15);
        assert!((phi - PI).abs() < 1e-15);
    }

    #[test]
    fn rotation_about_fixes_center() {
        let xi = Complex64::new(2.0, -1.0);
        let g = GroupElement::rotation_about(xi, 0.7);
        assert!((g.apply(xi) - xi).norm() < 1e-15);
    }

    #[test]
    fn wrap_is_in_range() {
        for &a in &[-1e-18, -TAU, 7.0 * TAU + 0.1, 0.0, -3.0] {
            let w = wrap_angle(a);
            assert!((0.0..TAU).contains(&w), "{a} -> {w}");
        }
    }

    fn element() -> impl Strategy<Value = GroupElement> {
        (-10.0..10.0f64, -10.0..10.0f64, -7.0..7.0f64)
            .prop_map(|(a, b, t)| GroupElement::new(Complex64::new(a, b), t))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn action_is_compatible(g1 in element(), g2 in element(),
                                pr in -10.0..10.0f64, pi in -10.0..10.0f64, phi in 0.0..TAU) {
            let p = Complex64::new(pr, pi);
            let (q, psi) = g2.act(p, phi);
            let lhs = g1.act(q, psi);
            let rhs = (g1 * g2).act(p, phi);
            prop_assert!(close(lhs, rhs, 1e-13 * (1.0 + p.norm() + g1.x.norm() + g2.x.norm())));
        }

        #[test]
        fn composition_is_associative(a in element(), b in element(), c in element()) {
            let l = (a * b) * c;
            let r = a * (b * c);
            prop_assert!((l.x - r.x).norm() < 1e-12 && (l.theta - r.theta).abs() < 1e-12);
        }

        #[test]
        fn inverse_cancels(g in element()) {
            let e = g * g.inverse();
            prop_assert!(e.x.norm() < 1e-13 && e.theta.abs() < 1e-15);
        }
    }
}
