//! Hyperbolic geometry of the unit disk.
//!
//! Distances use the density 1/(1 - |z|^2), so the distance from the origin
//! to a point at radius r is artanh(r). All disk automorphisms are kept in
//! the normal form z -> rotation * (z - center) / (1 - conj(center) z).

use num_complex::Complex64;

use crate::{Error, Result};

/// Checks that `z` lies in the open unit disk and returns it unchanged.
pub fn require_in_disk(z: Complex64) -> Result<Complex64> {
    let modulus = z.norm();
    if modulus < 1.0 {
        Ok(z)
    } else {
        Err(Error::OutsideDisk { modulus })
    }
}

/// Hyperbolic density 1/(1 - |z|^2) of the unit disk at `z`.
pub fn disk_density(z: Complex64) -> Result<f64> {
    require_in_disk(z)?;
    Ok(1.0 / (1.0 - z.norm_sqr()))
}

/// Hyperbolic distance between two points of the unit disk:
/// artanh |(z - w) / (1 - conj(w) z)|.
pub fn disk_distance(z: Complex64, w: Complex64) -> Result<f64> {
    require_in_disk(z)?;
    require_in_disk(w)?;
    let t = (z - w) / (Complex64::new(1.0, 0.0) - w.conj() * z);
    Ok(t.norm().atanh())
}

/// Euclidean radius of the complement of the hyperbolic ball of radius `d`
/// about the origin: points with d(0, xi) >= d satisfy |xi| >= tanh(d).
pub fn exclusion_radius_tight(d: f64) -> f64 {
    d.tanh()
}

/// Weaker exclusion radius tanh(d / 2) used by the kernel mass bound. It is
/// dominated by [`exclusion_radius_tight`], so the containment it asserts is
/// implied by the tight one; the mass bound only relies on this weaker form.
pub fn exclusion_radius(d: f64) -> f64 {
    (d / 2.0).tanh()
}

/// Disk automorphism in normal form: z -> rotation * (z - center) / (1 - conj(center) z)
/// with |rotation| = 1 and |center| < 1. The form is unique, which makes
/// composition and inversion drift-free under repeated use.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MobiusMap {
    rotation: Complex64,
    center: Complex64,
}

impl MobiusMap {
    /// Builds a map from its normal-form data. `rotation` is renormalized to
    /// unit modulus; a zero rotation or a center outside the disk is rejected.
    pub fn new(rotation: Complex64, center: Complex64) -> Result<Self> {
        let r = rotation.norm();
        if r == 0.0 || !r.is_finite() {
            return Err(Error::OutOfRange {
                name: "rotation",
                value: r,
                range: "|rotation| = 1",
            });
        }
        require_in_disk(center)?;
        Ok(Self {
            rotation: rotation / r,
            center,
        })
    }

    pub fn identity() -> Self {
        Self {
            rotation: Complex64::new(1.0, 0.0),
            center: Complex64::new(0.0, 0.0),
        }
    }

    /// Pure rotation by angle `phi`.
    pub fn rotation_by(phi: f64) -> Self {
        Self {
            rotation: Complex64::from_polar(1.0, phi),
            center: Complex64::new(0.0, 0.0),
        }
    }

    /// The automorphism z -> (z - w) / (1 - conj(w) z) sending `w` to 0.
    pub fn to_zero(w: Complex64) -> Result<Self> {
        require_in_disk(w)?;
        Ok(Self {
            rotation: Complex64::new(1.0, 0.0),
            center: w,
        })
    }

    /// Builds the normal form of the Mobius map (a z + b) / (c z + d),
    /// which must preserve the unit disk.
    pub fn from_matrix(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Result<Self> {
        let det = a * d - b * c;
        if det.norm() == 0.0 {
            return Err(Error::OutOfRange {
                name: "det",
                value: 0.0,
                range: "nonzero",
            });
        }
        // The preimage of 0 is -b/a; the rotation follows from the derivative
        // at 0, since in normal form f'(0) = rotation * (1 - |center|^2).
        let center = -b / a;
        require_in_disk(center)?;
        let deriv0 = det / (d * d);
        let rotation = deriv0 / (1.0 - center.norm_sqr());
        Self::new(rotation, center)
    }

    pub fn rotation(&self) -> Complex64 {
        self.rotation
    }

    pub fn center(&self) -> Complex64 {
        self.center
    }

    pub fn apply(&self, z: Complex64) -> Complex64 {
        self.rotation * (z - self.center) / (Complex64::new(1.0, 0.0) - self.center.conj() * z)
    }

    /// Complex derivative at `z`:
    /// rotation * (1 - |center|^2) / (1 - conj(center) z)^2.
    pub fn derivative(&self, z: Complex64) -> Complex64 {
        let denom = Complex64::new(1.0, 0.0) - self.center.conj() * z;
        self.rotation * (1.0 - self.center.norm_sqr()) / (denom * denom)
    }

    /// Composition self o other, returned in normal form.
    pub fn compose(&self, other: &MobiusMap) -> MobiusMap {
        // The new center is the preimage of 0; the rotation again follows
        // from the chain-rule derivative at 0.
        let center = other.inverse().apply(self.center);
        let deriv0 = self.derivative(other.apply(Complex64::new(0.0, 0.0)))
            * other.derivative(Complex64::new(0.0, 0.0));
        let rotation = deriv0 / (1.0 - center.norm_sqr());
        MobiusMap {
            rotation: rotation / rotation.norm(),
            center,
        }
    }

    /// Inverse in closed form: rotation -> conj(rotation), center -> -rotation * center.
    pub fn inverse(&self) -> MobiusMap {
        MobiusMap {
            rotation: self.rotation.conj(),
            center: -self.rotation * self.center,
        }
    }

    /// |trace| of a unit-determinant matrix representative. Parabolic maps
    /// have |trace| = 2, hyperbolic ones |trace| > 2.
    pub fn trace_abs(&self) -> f64 {
        // Matrix [[rotation, -rotation*center], [-conj(center), 1]] has
        // determinant rotation * (1 - |center|^2).
        let det = self.rotation * (1.0 - self.center.norm_sqr());
        let trace = self.rotation + Complex64::new(1.0, 0.0);
        trace.norm() / det.norm().sqrt()
    }

    /// Fixed points in the closed plane, from conj(center) z^2 + (rotation - 1) z
    /// - rotation * center = 0. A double root signals a parabolic map.
    pub fn fixed_points(&self) -> (Complex64, Complex64) {
        let a = self.center.conj();
        let b = self.rotation - 1.0;
        let c = -self.rotation * self.center;
        if a.norm() == 0.0 {
            // Rotation about 0: fixed points 0 and infinity.
            return (
                Complex64::new(0.0, 0.0),
                Complex64::new(f64::INFINITY, 0.0),
            );
        }
        let disc = (b * b - 4.0 * a * c).sqrt();
        ((-b + disc) / (2.0 * a), (-b - disc) / (2.0 * a))
    }
}

/// Constants of the Koebe chain used to floor the hyperbolic density of a
/// punctured plane domain: a univalence radius `r0` for the uniformizing map,
/// the injectivity radius `t0 = artanh(r0)` that produces it, and the density
/// floor `s0 = r0 / 8`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct KoebeConstants {
    pub t0: f64,
    pub r0: f64,
    pub s0: f64,
}

/// Builds the Koebe-chain constants from the univalence radius `r0` in (0, 1].
///
/// The chain they certify: with pi the uniformizing map of the domain and
/// r1 = (r0 / 4) |pi'(0)|, univalence of the quarter-Koebe disk forces r1 < 2,
/// hence |pi'(0)| < 8 / r0 and the density floor s0 = r0 / 8.
pub fn koebe_constants(r0: f64) -> Result<KoebeConstants> {
    if !(r0 > 0.0 && r0 <= 1.0) {
        return Err(Error::OutOfRange {
            name: "r0",
            value: r0,
            range: "(0, 1]",
        });
    }
    Ok(KoebeConstants {
        t0: r0.atanh(),
        r0,
        s0: r0 / 8.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sample_disk(rng: &mut ChaCha8Rng, rmax: f64) -> Complex64 {
        // Uniform in the disk of radius rmax.
        let r = rmax * rng.random::<f64>().sqrt();
        let phi = rng.random::<f64>() * std::f64::consts::TAU;
        Complex64::from_polar(r, phi)
    }

    fn sample_map(rng: &mut ChaCha8Rng) -> MobiusMap {
        let phi = rng.random::<f64>() * std::f64::consts::TAU;
        MobiusMap::new(Complex64::from_polar(1.0, phi), sample_disk(rng, 0.9)).unwrap()
    }

    #[test]
    fn density_at_origin_is_one_and_grows_toward_boundary() {
        assert_abs_diff_eq!(disk_density(Complex64::new(0.0, 0.0)).unwrap(), 1.0);
        let d = disk_density(Complex64::new(0.9, 0.0)).unwrap();
        assert_relative_eq!(d, 1.0 / 0.19, epsilon = 1e-12);
    }

    #[test]
    fn density_outside_disk_is_domain_error() {
        let err = disk_density(Complex64::new(1.0, 0.0)).unwrap_err();
        assert!(matches!(err, Error::OutsideDisk { .. }));
        assert!(disk_density(Complex64::new(0.8, 0.7)).is_err());
    }

    #[test]
    fn distance_from_origin_is_artanh_of_radius() {
        // 0.5 * ln(1.9 / 0.1) = 1.472219...
        let d = disk_distance(Complex64::new(0.9, 0.0), Complex64::new(0.0, 0.0)).unwrap();
        assert_relative_eq!(d, 0.9_f64.atanh(), epsilon = 1e-15);
        assert_relative_eq!(d, 1.47221948958322, epsilon = 1e-12);
    }

    #[test]
    fn distance_is_symmetric_and_mobius_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let z = sample_disk(&mut rng, 0.95);
            let w = sample_disk(&mut rng, 0.95);
            let a = sample_map(&mut rng);
            let d = disk_distance(z, w).unwrap();
            assert_relative_eq!(d, disk_distance(w, z).unwrap(), epsilon = 1e-12);
            let d2 = disk_distance(a.apply(z), a.apply(w)).unwrap();
            assert_abs_diff_eq!(d, d2, epsilon = 1e-9);
        }
    }

    #[test]
    fn to_zero_sends_its_base_point_to_origin() {
        let w = Complex64::new(0.3, -0.4);
        let t = MobiusMap::to_zero(w).unwrap();
        assert_abs_diff_eq!(t.apply(w).norm(), 0.0, epsilon = 1e-16);
    }

    #[test]
    fn compose_matches_pointwise_application() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..100 {
            let a = sample_map(&mut rng);
            let b = sample_map(&mut rng);
            let ab = a.compose(&b);
            for _ in 0..5 {
                let z = sample_disk(&mut rng, 0.95);
                let direct = a.apply(b.apply(z));
                assert_abs_diff_eq!((ab.apply(z) - direct).norm(), 0.0, epsilon = 1e-12);
                // Chain rule must agree with the composed derivative.
                let chain = a.derivative(b.apply(z)) * b.derivative(z);
                assert_abs_diff_eq!((ab.derivative(z) - chain).norm(), 0.0, epsilon = 1e-11);
            }
        }
    }

    #[test]
    fn inverse_composes_to_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..100 {
            let a = sample_map(&mut rng);
            let id = a.compose(&a.inverse());
            for _ in 0..3 {
                let z = sample_disk(&mut rng, 0.95);
                assert_abs_diff_eq!((id.apply(z) - z).norm(), 0.0, epsilon = 1e-12);
                assert_abs_diff_eq!(
                    (a.inverse().apply(a.apply(z)) - z).norm(),
                    0.0,
                    epsilon = 1e-12
                );
            }
        }
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let h = 1e-6;
        for _ in 0..50 {
            let a = sample_map(&mut rng);
            let z = sample_disk(&mut rng, 0.8);
            let fd = (a.apply(z + Complex64::new(h, 0.0)) - a.apply(z - Complex64::new(h, 0.0)))
                / Complex64::new(2.0 * h, 0.0);
            assert_abs_diff_eq!((a.derivative(z) - fd).norm(), 0.0, epsilon = 1e-7);
        }
    }

    #[test]
    fn from_matrix_recovers_normal_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        for _ in 0..50 {
            let a = sample_map(&mut rng);
            // Matrix representative of the normal form.
            let m = MobiusMap::from_matrix(
                a.rotation(),
                -a.rotation() * a.center(),
                -a.center().conj(),
                Complex64::new(1.0, 0.0),
            )
            .unwrap();
            let z = sample_disk(&mut rng, 0.9);
            assert_abs_diff_eq!((m.apply(z) - a.apply(z)).norm(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn exclusion_radii_are_ordered_and_contain_far_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        for _ in 0..200 {
            let d = rng.random::<f64>() * 3.0 + 0.05;
            let tight = exclusion_radius_tight(d);
            let weak = exclusion_radius(d);
            assert!(weak < tight, "tanh(d/2) < tanh(d) for d > 0");
            // A point at hyperbolic distance exactly d sits on the tight
            // radius, hence beyond the weak one.
            let xi = Complex64::from_polar(d.tanh(), rng.random::<f64>() * std::f64::consts::TAU);
            assert!(xi.norm() >= weak);
            assert_abs_diff_eq!(disk_distance(xi, Complex64::default()).unwrap(), d, epsilon = 1e-12);
        }
    }

    #[test]
    fn koebe_constants_follow_the_chain() {
        let k = koebe_constants(1.0).unwrap();
        assert_abs_diff_eq!(k.s0, 0.125);
        let k = koebe_constants(0.4).unwrap();
        assert_abs_diff_eq!(k.s0, 0.05);
        assert_relative_eq!(k.t0, 0.4_f64.atanh(), epsilon = 1e-15);
        // s0 is consistent with r1 = (r0/4)|pi'(0)| < 2 => |pi'(0)| < 8/r0:
        // the extremal derivative bound 8/r0 inverts to the floor r0/8.
        assert_relative_eq!(k.s0, 1.0 / (8.0 / k.r0), epsilon = 1e-15);
        assert!(koebe_constants(0.0).is_err());
        assert!(koebe_constants(1.2).is_err());
        assert!(koebe_constants(-0.3).is_err());
    }

    #[test]
    fn trace_abs_detects_conjugacy_classes() {
        // Rotation by pi/3 about 0 is elliptic: |trace| = 2|cos(pi/6)| < 2.
        let e = MobiusMap::rotation_by(std::f64::consts::FRAC_PI_3);
        assert!(e.trace_abs() < 2.0);
        // Axis translation moving 0 to tanh(1): hyperbolic with |trace| = 2 cosh(1) > 2
        // (the disk distance d(0, A0) = 1 is half the curvature -1 length).
        let s = 1.0_f64.tanh();
        let h = MobiusMap::new(Complex64::new(1.0, 0.0), Complex64::new(-s, 0.0)).unwrap();
        assert!(h.trace_abs() > 2.0);
        assert_relative_eq!(h.trace_abs(), 2.0 * 1.0_f64.cosh(), epsilon = 1e-12);
    }
}
