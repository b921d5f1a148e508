use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream_rng, SimRng, Stream};

/// Rejection-sampling budget for a single user position.
pub const MAX_PLACEMENT_ATTEMPTS: usize = 10_000;

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// A point in the plane, in km.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn dist(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

impl std::ops::Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl std::ops::Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometryConfig {
    /// Number of virtual hexagonal cells; the wrap-around layout needs 7.
    pub num_virtual_cells: usize,
    pub cell_radius_km: f64,
    pub rrhs_per_cell: usize,
    /// Users per km².
    pub user_density: f64,
    /// Fixed user count. `None` draws a Poisson count with mean
    /// `user_density * area`.
    pub user_count: Option<usize>,
    pub exclusion_radius_km: f64,
    pub seed: u64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        GeometryConfig {
            num_virtual_cells: 7,
            cell_radius_km: 0.5,
            rrhs_per_cell: 10,
            user_density: 200.0,
            user_count: None,
            exclusion_radius_km: 0.02,
            seed: 0,
        }
    }
}

impl GeometryConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_virtual_cells != 7 {
            return Err(Error::config(
                "num_virtual_cells",
                "the wrap-around layout is defined for exactly 7 cells",
            ));
        }
        if !(self.cell_radius_km > 0.0) || !self.cell_radius_km.is_finite() {
            return Err(Error::config("cell_radius_km", "must be positive"));
        }
        if !(self.exclusion_radius_km >= 0.0) || self.exclusion_radius_km >= self.cell_radius_km {
            return Err(Error::config(
                "exclusion_radius_km",
                "must be in [0, cell_radius_km)",
            ));
        }
        if self.rrhs_per_cell == 0 {
            return Err(Error::config("rrhs_per_cell", "must be at least 1"));
        }
        if self.user_count.is_none() && !(self.user_density > 0.0) {
            return Err(Error::config("user_density", "must be positive"));
        }
        Ok(())
    }

    pub fn layout(&self) -> HexLayout {
        HexLayout::new(self.cell_radius_km)
    }

    /// Mean number of users implied by the density.
    pub fn mean_users(&self) -> f64 {
        self.user_density * self.layout().area_km2()
    }
}

/// Area of one hexagon with circumradius `radius`.
pub fn hex_area_km2(radius: f64) -> f64 {
    1.5 * SQRT3 * radius * radius
}

/// Seven pointy-top hexagons (a centre cell and its first ring) that tile
/// the plane under a hexagonal super-lattice, which makes the region a torus.
#[derive(Debug, Clone, PartialEq)]
pub struct HexLayout {
    radius: f64,
    centers: [Point; 7],
    translations: [Point; 6],
}

impl HexLayout {
    pub fn new(radius: f64) -> Self {
        let spacing = SQRT3 * radius;
        let mut centers = [Point::new(0.0, 0.0); 7];
        for k in 0..6 {
            let a = std::f64::consts::FRAC_PI_3 * k as f64;
            centers[k + 1] = Point::new(spacing * a.cos(), spacing * a.sin());
        }
        // 2 a1 + a2 with a1 = spacing (1, 0), a2 = spacing (1/2, sqrt3/2),
        // then its rotations by multiples of 60 degrees.
        let t = Point::new(spacing * 2.5, spacing * SQRT3 / 2.0);
        let mut translations = [Point::new(0.0, 0.0); 6];
        for (k, slot) in translations.iter_mut().enumerate() {
            let a = std::f64::consts::FRAC_PI_3 * k as f64;
            let (s, c) = a.sin_cos();
            *slot = Point::new(c * t.x - s * t.y, s * t.x + c * t.y);
        }
        HexLayout {
            radius,
            centers,
            translations,
        }
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn centers(&self) -> &[Point; 7] {
        &self.centers
    }

    /// Super-lattice vectors of the wrap-around.
    pub fn translations(&self) -> &[Point; 6] {
        &self.translations
    }

    pub fn area_km2(&self) -> f64 {
        7.0 * hex_area_km2(self.radius)
    }

    /// Whether `p` lies in the hexagon centred at the origin.
    pub fn in_hexagon(&self, p: Point) -> bool {
        let (ax, ay) = (p.x.abs(), p.y.abs());
        ax <= SQRT3 / 2.0 * self.radius && ay + ax / SQRT3 <= self.radius
    }

    pub fn contains(&self, p: Point) -> bool {
        self.centers.iter().any(|&c| self.in_hexagon(p - c))
    }

    /// Uniform point inside cell `cell`.
    pub fn sample_in_cell<R: Rng + ?Sized>(&self, cell: usize, rng: &mut R) -> Point {
        let hx = SQRT3 / 2.0 * self.radius;
        loop {
            let p = Point::new(
                rng.random_range(-hx..=hx),
                rng.random_range(-self.radius..=self.radius),
            );
            if self.in_hexagon(p) {
                return p + self.centers[cell];
            }
        }
    }

    /// Distance on the torus: the minimum over the identity and the six
    /// first-ring super-lattice images.
    pub fn wrapped_distance(&self, a: Point, b: Point) -> f64 {
        let d = a - b;
        let mut best = d.x.hypot(d.y);
        for t in &self.translations {
            best = best.min((d.x + t.x).hypot(d.y + t.y));
        }
        best
    }
}

/// Positions of all RRHs and users for one Monte-Carlo realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkRealization {
    pub rrh_positions: Vec<Point>,
    pub user_positions: Vec<Point>,
    pub geometry: GeometryConfig,
}

impl NetworkRealization {
    pub fn num_rrhs(&self) -> usize {
        self.rrh_positions.len()
    }

    pub fn num_users(&self) -> usize {
        self.user_positions.len()
    }

    pub fn layout(&self) -> HexLayout {
        self.geometry.layout()
    }
}

pub fn wrapped_distance(a: Point, b: Point, geometry: &GeometryConfig) -> f64 {
    geometry.layout().wrapped_distance(a, b)
}

/// Places `N` RRHs uniformly in every cell and users uniformly over the
/// seven cells, resampling users that fall inside an RRH exclusion zone.
pub fn generate_layout(config: &GeometryConfig) -> Result<NetworkRealization> {
    config.validate()?;
    let layout = config.layout();
    let mut rng: SimRng = stream_rng(config.seed, Stream::Geometry, &[]);

    let mut rrh_positions = Vec::with_capacity(7 * config.rrhs_per_cell);
    for cell in 0..7 {
        for _ in 0..config.rrhs_per_cell {
            rrh_positions.push(layout.sample_in_cell(cell, &mut rng));
        }
    }

    let num_users = match config.user_count {
        Some(n) => n,
        None => {
            let mean = config.mean_users();
            let poisson = Poisson::new(mean)
                .map_err(|e| Error::config("user_density", e.to_string()))?;
            poisson.sample(&mut rng) as usize
        }
    };

    let mut user_positions = Vec::with_capacity(num_users);
    for _ in 0..num_users {
        let mut placed = None;
        for _ in 0..MAX_PLACEMENT_ATTEMPTS {
            let cell = rng.random_range(0..7);
            let p = layout.sample_in_cell(cell, &mut rng);
            let clear = rrh_positions
                .iter()
                .all(|&r| layout.wrapped_distance(p, r) >= config.exclusion_radius_km);
            if clear {
                placed = Some(p);
                break;
            }
        }
        match placed {
            Some(p) => user_positions.push(p),
            None => {
                return Err(Error::GeometryInfeasible {
                    attempts: MAX_PLACEMENT_ATTEMPTS,
                })
            }
        }
    }

    Ok(NetworkRealization {
        rrh_positions,
        user_positions,
        geometry: config.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn brute_force_wrapped(layout: &HexLayout, a: Point, b: Point) -> f64 {
        // All lattice images with small integer coefficients.
        let t1 = layout.translations()[0];
        let t2 = layout.translations()[1];
        let mut best = f64::INFINITY;
        for i in -3i32..=3 {
            for j in -3i32..=3 {
                let shift = Point::new(
                    i as f64 * t1.x + j as f64 * t2.x,
                    i as f64 * t1.y + j as f64 * t2.y,
                );
                best = best.min((a - b + shift).dist(Point::new(0.0, 0.0)));
            }
        }
        best
    }

    #[test]
    fn rrh_count_matches_config() {
        let cfg = GeometryConfig {
            user_count: Some(5),
            ..GeometryConfig::default()
        };
        let net = generate_layout(&cfg).unwrap();
        assert_eq!(net.num_rrhs(), 70);
        assert_eq!(net.num_users(), 5);
        for (k, p) in net.rrh_positions.iter().enumerate() {
            let cell = k / 10;
            assert!(net.layout().in_hexagon(*p - net.layout().centers()[cell]));
        }
    }

    #[test]
    fn same_seed_same_realization() {
        let cfg = GeometryConfig {
            seed: 99,
            user_density: 50.0,
            ..GeometryConfig::default()
        };
        assert_eq!(generate_layout(&cfg).unwrap(), generate_layout(&cfg).unwrap());
    }

    #[test]
    fn area_of_seven_cells() {
        let layout = HexLayout::new(0.5);
        let expected = 7.0 * 1.5 * 3f64.sqrt() * 0.25;
        assert!((layout.area_km2() - expected).abs() < 1e-12);
        assert!((layout.area_km2() - 4.547).abs() < 1e-3);
    }

    #[test]
    fn poisson_user_count_mean() {
        // density 200 over ~4.547 km^2 -> ~909.3 users on average.
        let mean_expected = 200.0 * HexLayout::new(0.5).area_km2();
        let trials = 200;
        let mut total = 0usize;
        for seed in 0..trials {
            let cfg = GeometryConfig {
                seed,
                rrhs_per_cell: 1,
                exclusion_radius_km: 0.0,
                ..GeometryConfig::default()
            };
            total += generate_layout(&cfg).unwrap().num_users();
        }
        let mean = total as f64 / trials as f64;
        // Poisson std of the sample mean is sqrt(909/200) ~ 2.1.
        assert!((mean - mean_expected).abs() < 4.0 * (mean_expected / trials as f64).sqrt());
    }

    #[test]
    fn exclusion_zone_is_respected() {
        let cfg = GeometryConfig {
            seed: 3,
            user_density: 300.0,
            ..GeometryConfig::default()
        };
        let net = generate_layout(&cfg).unwrap();
        let layout = net.layout();
        for u in &net.user_positions {
            assert!(layout.contains(*u));
            for r in &net.rrh_positions {
                assert!(layout.wrapped_distance(*u, *r) >= 0.02);
            }
        }
    }

    #[test]
    fn infeasible_geometry_is_reported() {
        let cfg = GeometryConfig {
            rrhs_per_cell: 400,
            exclusion_radius_km: 0.49,
            user_count: Some(1),
            ..GeometryConfig::default()
        };
        assert!(matches!(
            generate_layout(&cfg),
            Err(Error::GeometryInfeasible { .. })
        ));
    }

    #[test]
    fn mirrored_edge_points_are_close_when_wrapped() {
        let layout = HexLayout::new(0.5);
        // Opposite outer edges of the seven-cell region along the x axis.
        let edge = layout.centers()[1].x + 3f64.sqrt() / 2.0 * 0.5 - 1e-3;
        let a = Point::new(edge, 0.0);
        let b = Point::new(-edge, 0.0);
        let wrapped = layout.wrapped_distance(a, b);
        let oracle = brute_force_wrapped(&layout, a, b);
        assert!(wrapped < a.dist(b));
        assert!((wrapped - oracle).abs() < 1e-12);
    }

    #[test]
    fn invalid_cell_count_rejected() {
        let cfg = GeometryConfig {
            num_virtual_cells: 3,
            ..GeometryConfig::default()
        };
        assert!(matches!(
            cfg.validate(),
            Err(Error::InvalidConfig { ref key, .. }) if key == "num_virtual_cells"
        ));
    }

    proptest! {
        #[test]
        fn wrapped_distance_is_symmetric_and_minimal(seed in 0u64..1000) {
            let layout = HexLayout::new(0.5);
            let mut rng = stream_rng(seed, Stream::Geometry, &[]);
            let a = layout.sample_in_cell(rng.random_range(0..7), &mut rng);
            let b = layout.sample_in_cell(rng.random_range(0..7), &mut rng);
            let d = layout.wrapped_distance(a, b);
            prop_assert!((d - layout.wrapped_distance(b, a)).abs() < 1e-12);
            prop_assert!(d <= a.dist(b) + 1e-12);
            prop_assert!((d - brute_force_wrapped(&layout, a, b)).abs() < 1e-9);
            prop_assert_eq!(layout.wrapped_distance(a, a), 0.0);
        }
    }
}
