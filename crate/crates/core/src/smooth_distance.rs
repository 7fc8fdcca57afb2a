//! Smoothed distance fields over the tube around a curve.
//!
//! `d1` freezes the distance to its dyadic floor (`2^(n-1)` on the shell
//! `2^(n-1) < d <= 2^n`). `d2` is the ball average of `d1`, `d0` the ball
//! average of `d2`; both averages use a radius keyed to the sqrt(2)-shifted
//! dyadic shell of the distance, so the radius switches only where `d1` is
//! locally constant and the averaged fields stay continuous. All three stay
//! within a constant factor of the true distance (and never drop below half
//! of it).

use crate::geometry::{sigma_shell, Curve, Point3};
use crate::quadrature::BallRule;
use crate::scalar::Real;
use std::sync::Arc;

/// How the averaging radius is derived from the distance.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RadiusRule {
    /// `2^(m-1) / 8` on the shell `sqrt(2) * 2^(m-1) < d <= sqrt(2) * 2^m`;
    /// between `d/(16 sqrt 2)` and `d/(8 sqrt 2)`, and constant across the
    /// jumps of `d1`.
    ShellKeyed,
    /// `d1 / 8`: simpler, but its switches coincide with the jumps of `d1`.
    EighthOfD1,
}

pub struct SmoothDistance<T> {
    curve: Arc<Curve<T>>,
    rule: BallRule<T>,
    radius_rule: RadiusRule,
}

impl<T: Real> SmoothDistance<T> {
    pub fn new(curve: Arc<Curve<T>>, degree: usize, radius_rule: RadiusRule) -> Self {
        Self {
            curve,
            rule: BallRule::degree(degree),
            radius_rule,
        }
    }

    #[inline]
    pub fn curve(&self) -> &Arc<Curve<T>> {
        &self.curve
    }

    #[inline]
    pub fn dist(&self, p: Point3<T>) -> T {
        self.curve.dist(p)
    }

    /// Dyadic floor of the distance.
    #[inline]
    pub fn d1_of(&self, d: T) -> T {
        if d <= T::zero() {
            T::zero()
        } else {
            T::exp2i(sigma_shell(d) - 1)
        }
    }

    #[inline]
    pub fn d1(&self, p: Point3<T>) -> T {
        self.d1_of(self.dist(p))
    }

    /// Averaging radius as a function of the distance.
    pub fn radius_of(&self, d: T) -> T {
        if d <= T::zero() {
            return T::zero();
        }
        match self.radius_rule {
            RadiusRule::ShellKeyed => {
                let m = sigma_shell(d / T::of(std::f64::consts::SQRT_2));
                T::exp2i(m - 1) / T::of(8.0)
            }
            RadiusRule::EighthOfD1 => self.d1_of(d) / T::of(8.0),
        }
    }

    pub fn d2_at(&self, p: Point3<T>, d: T) -> T {
        let r = self.radius_of(d);
        if r <= T::zero() {
            return self.d1_of(d);
        }
        self.rule.mean(p, r, |q| self.d1(q))
    }

    #[inline]
    pub fn d2(&self, p: Point3<T>) -> T {
        self.d2_at(p, self.dist(p))
    }

    pub fn d0_at(&self, p: Point3<T>, d: T) -> T {
        let r = self.radius_of(d);
        if r <= T::zero() {
            return self.d1_of(d);
        }
        self.rule.mean(p, r, |q| self.d2(q))
    }

    #[inline]
    pub fn d0(&self, p: Point3<T>) -> T {
        self.d0_at(p, self.dist(p))
    }
}
