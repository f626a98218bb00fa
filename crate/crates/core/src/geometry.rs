//! Spatial primitives: Poisson point patterns on a disk, the nearest /
//! second-nearest distance pair, the center/edge classification rule and the
//! conditional serving-distance laws of the two user classes.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};

/// Deterministic generator used by every sampler in the crate.
pub type SimRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives an independent stream seed for replication `index` (splitmix64).
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Disk {
    pub center: Point,
    pub radius: f64,
}

impl Disk {
    pub fn new(center: Point, radius: f64) -> Result<Self> {
        ensure(radius > 0.0 && radius.is_finite(), "window.radius", || {
            format!("must be positive and finite, got {radius}")
        })?;
        Ok(Disk { center, radius })
    }

    pub fn centered(radius: f64) -> Result<Self> {
        Disk::new(Point::new(0.0, 0.0), radius)
    }

    pub fn area(&self) -> f64 {
        PI * self.radius * self.radius
    }

    pub fn contains(&self, p: &Point) -> bool {
        self.center.distance(p) <= self.radius
    }

    /// Uniform point in the disk.
    pub fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        let r = self.radius * rng.random::<f64>().sqrt();
        let theta = 2.0 * PI * rng.random::<f64>();
        Point::new(
            self.center.x + r * theta.cos(),
            self.center.y + r * theta.sin(),
        )
    }
}

/// A finite realization of a homogeneous PPP restricted to a disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointPattern {
    points: Vec<Point>,
    window: Disk,
    density: f64,
}

impl PointPattern {
    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn window(&self) -> &Disk {
        &self.window
    }

    pub fn density(&self) -> f64 {
        self.density
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Distances to the nearest and second-nearest points, if two exist.
    pub fn nearest_two(&self, from: &Point) -> Option<DistancePair> {
        let mut best = f64::INFINITY;
        let mut second = f64::INFINITY;
        for p in &self.points {
            let d = from.distance(p);
            if d < best {
                second = best;
                best = d;
            } else if d < second {
                second = d;
            }
        }
        if second.is_finite() && best > 0.0 {
            Some(DistancePair {
                r_m: best,
                r_d: second,
            })
        } else {
            None
        }
    }
}

/// Number of points of a PPP with mean `mean`.
pub fn sample_poisson_count<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean)
        .map(|d| d.sample(rng) as usize)
        .unwrap_or(0)
}

/// Homogeneous PPP of intensity `density` (points per m²) in `window`.
pub fn sample_ppp(density: f64, window: Disk, seed: u64) -> Result<PointPattern> {
    let mut rng = rng_from_seed(seed);
    sample_ppp_with(density, window, &mut rng)
}

pub fn sample_ppp_with<R: Rng + ?Sized>(
    density: f64,
    window: Disk,
    rng: &mut R,
) -> Result<PointPattern> {
    ensure(density >= 0.0 && density.is_finite(), "density", || {
        format!("must be non-negative, got {density}")
    })?;
    let n = sample_poisson_count(density * window.area(), rng);
    let points = (0..n).map(|_| window.sample_point(rng)).collect();
    Ok(PointPattern {
        points,
        window,
        density,
    })
}

/// Distances from a user to its nearest (`r_m`) and second-nearest (`r_d`) MBS.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistancePair {
    r_m: f64,
    r_d: f64,
}

impl DistancePair {
    pub fn new(r_m: f64, r_d: f64) -> Result<Self> {
        ensure(
            r_m > 0.0 && r_m <= r_d && r_d.is_finite(),
            "distance_pair",
            || format!("need 0 < r_m <= r_d, got r_m={r_m}, r_d={r_d}"),
        )?;
        Ok(DistancePair { r_m, r_d })
    }

    pub fn r_m(&self) -> f64 {
        self.r_m
    }

    pub fn r_d(&self) -> f64 {
        self.r_d
    }

    pub fn ratio(&self) -> f64 {
        self.r_m / self.r_d
    }
}

/// Distance-ratio threshold `R ∈ (0, 1]` separating center and edge users.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct RegionThreshold(f64);

impl RegionThreshold {
    pub fn new(r: f64) -> Result<Self> {
        ensure(r > 0.0 && r <= 1.0, "region_threshold", || {
            format!("must lie in (0, 1], got {r}")
        })?;
        Ok(RegionThreshold(r))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn squared(self) -> f64 {
        self.0 * self.0
    }

    /// Rejects `R = 1`, for which the edge class has probability zero.
    pub fn require_edge(self) -> Result<Self> {
        if self.0 < 1.0 {
            Ok(self)
        } else {
            Err(Error::invalid(
                "region_threshold",
                "edge-user quantities need R < 1 (the edge region is empty at R = 1)",
            ))
        }
    }
}

impl TryFrom<f64> for RegionThreshold {
    type Error = Error;
    fn try_from(v: f64) -> Result<Self> {
        RegionThreshold::new(v)
    }
}

impl From<RegionThreshold> for f64 {
    fn from(r: RegionThreshold) -> f64 {
        r.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum UserClass {
    Center,
    Edge,
}

impl UserClass {
    pub fn label(self) -> &'static str {
        match self {
            UserClass::Center => "ccu",
            UserClass::Edge => "ceu",
        }
    }
}

/// Center iff `r_m / r_d <= R`.
pub fn classify_user(pair: DistancePair, threshold: RegionThreshold) -> UserClass {
    // r_m <= R r_d avoids the division and keeps the rule exactly scale invariant
    if pair.r_m <= threshold.value() * pair.r_d {
        UserClass::Center
    } else {
        UserClass::Edge
    }
}

pub fn prob_ccu(threshold: RegionThreshold) -> f64 {
    threshold.squared()
}

pub fn prob_ceu(threshold: RegionThreshold) -> f64 {
    1.0 - threshold.squared()
}

/// Density of the serving distance of a center user.
pub fn pdf_serving_distance_ccu(r: f64, lambda_b: f64, threshold: RegionThreshold) -> f64 {
    if r <= 0.0 {
        return 0.0;
    }
    let r2 = threshold.squared();
    2.0 * PI * lambda_b * r / r2 * (-PI * lambda_b * r * r / r2).exp()
}

pub fn cdf_serving_distance_ccu(r: f64, lambda_b: f64, threshold: RegionThreshold) -> f64 {
    if r <= 0.0 {
        return 0.0;
    }
    -(-PI * lambda_b * r * r / threshold.squared()).exp_m1()
}

/// Density of the serving distance of an edge user; requires `R < 1`.
pub fn pdf_serving_distance_ceu(r: f64, lambda_b: f64, threshold: RegionThreshold) -> Result<f64> {
    let threshold = threshold.require_edge()?;
    if r <= 0.0 {
        return Ok(0.0);
    }
    let r2 = threshold.squared();
    let x = PI * lambda_b * r * r;
    // e^{-x} - e^{-x/R²} = e^{-x} (1 - e^{-x(1/R² - 1)})
    let bracket = (-x).exp() * -(-x * (1.0 / r2 - 1.0)).exp_m1();
    Ok(2.0 * PI * lambda_b * r / (1.0 - r2) * bracket)
}

pub fn cdf_serving_distance_ceu(r: f64, lambda_b: f64, threshold: RegionThreshold) -> Result<f64> {
    let threshold = threshold.require_edge()?;
    if r <= 0.0 {
        return Ok(0.0);
    }
    let r2 = threshold.squared();
    let x = PI * lambda_b * r * r;
    let survival = ((-x).exp() - r2 * (-x / r2).exp()) / (1.0 - r2);
    Ok(1.0 - survival)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::{integrate_to_infinity, QuadOptions};

    fn pair(a: f64, b: f64) -> DistancePair {
        DistancePair::new(a, b).unwrap()
    }

    #[test]
    fn classification_examples() {
        let r = RegionThreshold::new(0.707).unwrap();
        assert_eq!(classify_user(pair(100.0, 300.0), r), UserClass::Center);
        assert_eq!(classify_user(pair(290.0, 300.0), r), UserClass::Edge);
        assert_eq!(classify_user(pair(250.0, 250.0), r), UserClass::Edge);
        let one = RegionThreshold::new(1.0).unwrap();
        assert_eq!(classify_user(pair(250.0, 250.0), one), UserClass::Center);
    }

    #[test]
    fn invalid_inputs_rejected() {
        assert!(DistancePair::new(3.0, 2.0).is_err());
        assert!(DistancePair::new(0.0, 2.0).is_err());
        assert!(RegionThreshold::new(0.0).is_err());
        assert!(RegionThreshold::new(1.01).is_err());
        assert!(Disk::centered(0.0).is_err());
        assert!(sample_ppp(-1.0, Disk::centered(1.0).unwrap(), 1).is_err());
    }

    #[test]
    fn class_probabilities() {
        let one = RegionThreshold::new(1.0).unwrap();
        assert_eq!(prob_ccu(one), 1.0);
        let r = RegionThreshold::new(0.707).unwrap();
        assert!((prob_ccu(r) - 0.499849).abs() < 1e-6);
        let half = RegionThreshold::new(0.5).unwrap();
        assert_eq!(prob_ccu(half), 0.25);
        assert_eq!(prob_ccu(half) + prob_ceu(half), 1.0);
    }

    #[test]
    fn empty_pattern_at_zero_density() {
        let p = sample_ppp(0.0, Disk::centered(1000.0).unwrap(), 9).unwrap();
        assert!(p.is_empty());
        assert!(p.nearest_two(&Point::new(0.0, 0.0)).is_none());
    }

    #[test]
    fn sampling_is_deterministic_and_inside_window() {
        let w = Disk::new(Point::new(10.0, -5.0), 2000.0).unwrap();
        let a = sample_ppp(1e-4, w, 42).unwrap();
        let b = sample_ppp(1e-4, w, 42).unwrap();
        assert_eq!(a, b);
        assert!(a.points().iter().all(|p| w.contains(p)));
        let c = sample_ppp(1e-4, w, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn pdfs_vanish_at_origin_and_normalize() {
        let lb = 5e-6;
        for &rv in &[0.3, 0.707, 0.95] {
            let r = RegionThreshold::new(rv).unwrap();
            assert_eq!(pdf_serving_distance_ccu(0.0, lb, r), 0.0);
            assert_eq!(pdf_serving_distance_ceu(0.0, lb, r).unwrap(), 0.0);
            let opts = QuadOptions::with_rel_tol(1e-12);
            let c =
                integrate_to_infinity(|x| pdf_serving_distance_ccu(x, lb, r), 0.0, opts).unwrap();
            let e =
                integrate_to_infinity(|x| pdf_serving_distance_ceu(x, lb, r).unwrap(), 0.0, opts)
                    .unwrap();
            assert!((c.value - 1.0).abs() < 1e-9, "ccu R={rv}: {}", c.value);
            assert!((e.value - 1.0).abs() < 1e-9, "ceu R={rv}: {}", e.value);
        }
    }

    #[test]
    fn ccu_pdf_reduces_to_nearest_neighbour_law() {
        let one = RegionThreshold::new(1.0).unwrap();
        let lb = 1e-5;
        for &x in &[10.0, 100.0, 400.0] {
            let nn = 2.0 * PI * lb * x * (-PI * lb * x * x).exp();
            assert!((pdf_serving_distance_ccu(x, lb, one) - nn).abs() < 1e-18);
        }
        assert!(pdf_serving_distance_ceu(10.0, lb, one).is_err());
    }

    #[test]
    fn derived_seeds_differ() {
        let s: std::collections::HashSet<u64> = (0..1000).map(|i| derive_seed(7, i)).collect();
        assert_eq!(s.len(), 1000);
    }
}
