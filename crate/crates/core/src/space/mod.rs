//! Compact metric spaces and the semigroup actions shipped on them.
//!
//! Metrics:
//!
//! - `Torus { k }`: max over coordinates of the circle distance
//!   `min(|a - b|, 1 - |a - b|)`.
//! - `ZBarPlus`: the compactified naturals embedded in `[0, 1]` through
//!   `n -> 1 / (n + 1)` with `inf -> 0`, so `d(m, n) = |1/(m+1) - 1/(n+1)|`.
//!   Any metric inducing the one-point-compactification topology would do;
//!   this one is fixed here.
//! - `BinaryCircle`: the circle with points stored as binary expansions, the
//!   natural home of the doubling map.
//! - `Finite`: the discrete metric, or an explicit distance matrix.
//! - `Product`: max over components.

mod action;
mod binary;

use std::sync::Arc;

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::{circle_distance, wrap_unit};
use crate::semigroup::ZBar;

pub use action::{binary_point, orbit, ActionKind, ActionSystem, OrbitSample};
pub use binary::{BinaryPoint, DEFAULT_BINARY_BITS};

#[derive(Debug, Clone, PartialEq)]
pub enum Point {
    Torus(Vec<f64>),
    ZBar(ZBar),
    Binary(BinaryPoint),
    Finite(usize),
    Product(Vec<Point>),
}

impl Point {
    pub fn torus(coords: impl Into<Vec<f64>>) -> Point {
        Point::Torus(coords.into().into_iter().map(wrap_unit).collect())
    }

    pub fn circle(x: f64) -> Point {
        Point::Torus(vec![wrap_unit(x)])
    }

    /// Numeric coordinates; `inf` maps to `f64::INFINITY`.
    pub fn coordinates(&self) -> Vec<f64> {
        match self {
            Point::Torus(c) => c.clone(),
            Point::ZBar(ZBar::Fin(n)) => vec![*n as f64],
            Point::ZBar(ZBar::Inf) => vec![f64::INFINITY],
            Point::Binary(b) => vec![b.value()],
            Point::Finite(i) => vec![*i as f64],
            Point::Product(ps) => ps.iter().flat_map(Point::coordinates).collect(),
        }
    }

    pub fn coordinate_fields(&self) -> Vec<String> {
        match self {
            Point::ZBar(z) => vec![z.to_string()],
            Point::Product(ps) => ps.iter().flat_map(Point::coordinate_fields).collect(),
            _ => self.coordinates().iter().map(|v| format!("{v}")).collect(),
        }
    }

    /// Total order by coordinates, used to make aggregated supports canonical.
    pub fn coordinate_cmp(&self, other: &Point) -> std::cmp::Ordering {
        let a = self.coordinates();
        let b = other.coordinates();
        for (x, y) in a.iter().zip(&b) {
            match x.total_cmp(y) {
                std::cmp::Ordering::Equal => continue,
                o => return o,
            }
        }
        a.len().cmp(&b.len())
    }

    fn kind(&self) -> &'static str {
        match self {
            Point::Torus(_) => "torus point",
            Point::ZBar(_) => "zbar point",
            Point::Binary(_) => "binary point",
            Point::Finite(_) => "finite point",
            Point::Product(_) => "product point",
        }
    }
}

impl Serialize for Point {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.coordinate_fields().serialize(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Space {
    Torus { k: usize },
    ZBarPlus,
    BinaryCircle,
    Finite { n: usize, distances: Option<Arc<Vec<f64>>> },
    Product(Vec<Space>),
}

impl Space {
    pub fn tag(&self) -> String {
        match self {
            Space::Torus { k } => format!("torus:k={k}"),
            Space::ZBarPlus => "zbarplus-space".into(),
            Space::BinaryCircle => "binary-circle".into(),
            Space::Finite { n, .. } => format!("finite:n={n}"),
            Space::Product(parts) => {
                let tags: Vec<String> = parts.iter().map(Space::tag).collect();
                format!("product({})", tags.join(";"))
            }
        }
    }

    pub fn finite_with_distances(n: usize, distances: Vec<f64>) -> Result<Space> {
        if distances.len() != n * n {
            return Err(Error::InvalidInput("distance matrix must be n x n".into()));
        }
        for i in 0..n {
            for j in 0..n {
                let d = distances[i * n + j];
                if !(d >= 0.0) || (i == j) != (d == 0.0) || d != distances[j * n + i] {
                    return Err(Error::InvalidInput(format!("bad distance at ({i}, {j})")));
                }
            }
        }
        Ok(Space::Finite {
            n,
            distances: Some(Arc::new(distances)),
        })
    }

    pub fn contains(&self, x: &Point) -> bool {
        match (self, x) {
            (Space::Torus { k }, Point::Torus(c)) => {
                c.len() == *k && c.iter().all(|v| (0.0..1.0).contains(v))
            }
            (Space::ZBarPlus, Point::ZBar(_)) => true,
            (Space::BinaryCircle, Point::Binary(_)) => true,
            (Space::Finite { n, .. }, Point::Finite(i)) => i < n,
            (Space::Product(parts), Point::Product(ps)) => {
                parts.len() == ps.len() && parts.iter().zip(ps).all(|(s, p)| s.contains(p))
            }
            _ => false,
        }
    }

    pub fn check(&self, x: &Point) -> Result<()> {
        if self.contains(x) {
            Ok(())
        } else {
            Err(Error::mismatch(self.tag(), format!("{} {:?}", x.kind(), x.coordinates())))
        }
    }

    pub fn distance(&self, x: &Point, y: &Point) -> Result<f64> {
        match (self, x, y) {
            (Space::Torus { k }, Point::Torus(a), Point::Torus(b)) if a.len() == *k && b.len() == *k => {
                Ok(a.iter().zip(b).map(|(u, v)| circle_distance(*u, *v)).fold(0.0, f64::max))
            }
            (Space::ZBarPlus, Point::ZBar(a), Point::ZBar(b)) => Ok((zbar_embed(*a) - zbar_embed(*b)).abs()),
            (Space::BinaryCircle, Point::Binary(a), Point::Binary(b)) => Ok(a.distance(b)),
            (Space::Finite { n, distances }, Point::Finite(i), Point::Finite(j)) if i < n && j < n => {
                Ok(match distances {
                    Some(d) => d[i * n + j],
                    None if i == j => 0.0,
                    None => 1.0,
                })
            }
            (Space::Product(parts), Point::Product(a), Point::Product(b))
                if parts.len() == a.len() && parts.len() == b.len() =>
            {
                let mut m = 0.0f64;
                for ((s, p), q) in parts.iter().zip(a).zip(b) {
                    m = m.max(s.distance(p, q)?);
                }
                Ok(m)
            }
            _ => {
                self.check(x)?;
                self.check(y)?;
                unreachable!("both points belong to the space")
            }
        }
    }

    pub fn diameter(&self) -> f64 {
        match self {
            Space::Torus { .. } | Space::BinaryCircle => 0.5,
            Space::ZBarPlus => 1.0,
            Space::Finite { n, distances } => match distances {
                Some(d) => d.iter().copied().fold(0.0, f64::max),
                None if *n > 1 => 1.0,
                None => 0.0,
            },
            Space::Product(parts) => parts.iter().map(Space::diameter).fold(0.0, f64::max),
        }
    }

    /// Draws a point from a fixed reference distribution (uniform on tori and
    /// finite spaces, uniform bits on the binary circle).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        match self {
            Space::Torus { k } => Point::Torus((0..*k).map(|_| rng.random::<f64>()).collect()),
            Space::ZBarPlus => {
                if rng.random_ratio(1, 16) {
                    Point::ZBar(ZBar::Inf)
                } else {
                    Point::ZBar(ZBar::Fin(rng.random_range(0..1000)))
                }
            }
            Space::BinaryCircle => Point::Binary(BinaryPoint::random(rng, DEFAULT_BINARY_BITS)),
            Space::Finite { n, .. } => Point::Finite(rng.random_range(0..*n)),
            Space::Product(parts) => Point::Product(parts.iter().map(|s| s.sample(rng)).collect()),
        }
    }

    /// A point `z` with `0 < d(x, z) < r`, as far from `x` as the space
    /// conveniently allows; `None` if no such point exists or is found.
    pub fn neighbor_within(&self, x: &Point, r: f64) -> Result<Option<Point>> {
        self.check(x)?;
        if !(r > 0.0) {
            return Ok(None);
        }
        // Probe just inside the open ball.
        let reach = r * (1.0 - 1.0 / 1024.0);
        Ok(match (self, x) {
            (Space::Torus { .. }, Point::Torus(c)) => {
                if reach >= 0.5 {
                    return Ok(None);
                }
                let mut c = c.clone();
                c[0] = wrap_unit(c[0] + reach);
                let z = Point::Torus(c);
                (self.distance(x, &z)? > 0.0).then_some(z)
            }
            (Space::BinaryCircle, Point::Binary(b)) => {
                let off = binary::offset_bits(reach.min(0.5));
                (off > 0).then(|| Point::Binary(b.add_offset(off)))
            }
            (Space::ZBarPlus, Point::ZBar(ZBar::Fin(n))) => {
                let n = *n;
                let here = zbar_embed(ZBar::Fin(n));
                let d = |m: u64| (here - zbar_embed(ZBar::Fin(m))).abs();
                // Farthest neighbour above n (inf if it is close enough).
                let above = if here < r {
                    Some((here, ZBar::Inf))
                } else {
                    let mut m = ((1.0 / (here - r)).ceil() as u64).saturating_sub(2).max(n);
                    while m > n && d(m) >= r {
                        m -= 1;
                    }
                    while d(m + 1) < r {
                        m += 1;
                    }
                    (m > n).then(|| (d(m), ZBar::Fin(m)))
                };
                // Farthest neighbour below n.
                let below = if n == 0 {
                    None
                } else {
                    let mut m = ((1.0 / (here + r)).floor() as u64).min(n - 1);
                    while m < n && d(m) >= r {
                        m += 1;
                    }
                    while m > 0 && d(m - 1) < r {
                        m -= 1;
                    }
                    (m < n).then(|| (d(m), ZBar::Fin(m)))
                };
                match (above, below) {
                    (Some(a), Some(b)) => Some(Point::ZBar(if b.0 > a.0 { b.1 } else { a.1 })),
                    (a, b) => a.or(b).map(|(_, z)| Point::ZBar(z)),
                }
            }
            (Space::ZBarPlus, Point::ZBar(ZBar::Inf)) => {
                let mut m = (1.0 / r).floor() as u64;
                while zbar_embed(ZBar::Fin(m)) >= r {
                    m += 1;
                }
                while m > 0 && zbar_embed(ZBar::Fin(m - 1)) < r {
                    m -= 1;
                }
                Some(Point::ZBar(ZBar::Fin(m)))
            }
            (Space::Finite { n, .. }, Point::Finite(_)) => {
                let mut best: Option<(f64, usize)> = None;
                for j in 0..*n {
                    let d = self.distance(x, &Point::Finite(j))?;
                    if d > 0.0 && d < r && best.is_none_or(|(bd, _)| d > bd) {
                        best = Some((d, j));
                    }
                }
                best.map(|(_, j)| Point::Finite(j))
            }
            (Space::Product(parts), Point::Product(ps)) => {
                let Some(first) = parts[0].neighbor_within(&ps[0], r)? else {
                    return Ok(None);
                };
                let mut ps = ps.clone();
                ps[0] = first;
                Some(Point::Product(ps))
            }
            _ => unreachable!("membership checked"),
        })
    }
}

/// Embedding of the compactified naturals into `[0, 1]`.
pub fn zbar_embed(z: ZBar) -> f64 {
    match z {
        ZBar::Fin(n) => 1.0 / (n as f64 + 1.0),
        ZBar::Inf => 0.0,
    }
}

/// Greedy ε-net: scans `points` in order and keeps a point when it is more
/// than `eps` away from every point kept so far. Returns the kept indices.
pub fn epsilon_net_indices(space: &Space, points: &[Point], eps: f64) -> Result<Vec<usize>> {
    if !(eps > 0.0) {
        return Err(Error::InvalidInput(format!("eps must be positive, got {eps}")));
    }
    let mut kept: Vec<usize> = Vec::new();
    'outer: for (i, p) in points.iter().enumerate() {
        for &j in &kept {
            if space.distance(p, &points[j])? <= eps {
                continue 'outer;
            }
        }
        kept.push(i);
    }
    Ok(kept)
}

pub fn epsilon_net(space: &Space, points: &[Point], eps: f64) -> Result<Vec<Point>> {
    Ok(epsilon_net_indices(space, points, eps)?
        .into_iter()
        .map(|i| points[i].clone())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn distance_examples() {
        let t = Space::Torus { k: 1 };
        assert!((t.distance(&Point::circle(0.1), &Point::circle(0.9)).unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(t.distance(&Point::circle(0.3), &Point::circle(0.3)).unwrap(), 0.0);
        let z = Space::ZBarPlus;
        assert_eq!(
            z.distance(&Point::ZBar(ZBar::Fin(0)), &Point::ZBar(ZBar::Inf)).unwrap(),
            1.0
        );
        let f = Space::Finite { n: 3, distances: None };
        assert_eq!(f.distance(&Point::Finite(0), &Point::Finite(2)).unwrap(), 1.0);
    }

    #[test]
    fn distance_rejects_foreign_points() {
        let t = Space::Torus { k: 2 };
        assert!(t.distance(&Point::circle(0.1), &Point::circle(0.2)).is_err());
        assert!(t.distance(&Point::torus([0.1, 0.2]), &Point::ZBar(ZBar::Inf)).is_err());
    }

    fn check_metric_axioms(space: &Space, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..500 {
            let x = space.sample(&mut rng);
            let y = space.sample(&mut rng);
            let z = space.sample(&mut rng);
            let dxy = space.distance(&x, &y).unwrap();
            let dyz = space.distance(&y, &z).unwrap();
            let dxz = space.distance(&x, &z).unwrap();
            assert!(dxy >= 0.0);
            assert_eq!(space.distance(&x, &x).unwrap(), 0.0);
            assert_eq!(dxy, space.distance(&y, &x).unwrap());
            assert!(dxz <= dxy + dyz + 1e-15);
            assert!(dxy <= space.diameter());
            if dxy == 0.0 {
                assert_eq!(x, y);
            }
        }
    }

    #[test]
    fn metric_axioms_on_random_triples() {
        check_metric_axioms(&Space::Torus { k: 1 }, 1);
        check_metric_axioms(&Space::Torus { k: 3 }, 2);
        check_metric_axioms(&Space::ZBarPlus, 3);
        check_metric_axioms(&Space::BinaryCircle, 4);
        check_metric_axioms(&Space::Finite { n: 7, distances: None }, 5);
        check_metric_axioms(
            &Space::Product(vec![Space::Torus { k: 1 }, Space::ZBarPlus]),
            6,
        );
    }

    #[test]
    fn finite_distance_matrix_validation() {
        assert!(Space::finite_with_distances(2, vec![0.0, 1.0, 1.0, 0.0]).is_ok());
        assert!(Space::finite_with_distances(2, vec![0.0, 1.0, 2.0, 0.0]).is_err());
        assert!(Space::finite_with_distances(2, vec![0.0, 0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn neighbors_are_inside_the_ball() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let spaces = [
            Space::Torus { k: 2 },
            Space::BinaryCircle,
            Space::ZBarPlus,
        ];
        for space in spaces {
            for _ in 0..200 {
                let x = space.sample(&mut rng);
                for r in [0.3, 0.01, 1e-6] {
                    if let Some(z) = space.neighbor_within(&x, r).unwrap() {
                        let d = space.distance(&x, &z).unwrap();
                        assert!(d > 0.0 && d < r, "{} r={r} d={d}", space.tag());
                    }
                }
            }
        }
        let f = Space::Finite { n: 3, distances: None };
        assert!(f.neighbor_within(&Point::Finite(0), 0.5).unwrap().is_none());
        assert_eq!(f.neighbor_within(&Point::Finite(0), 2.0).unwrap(), Some(Point::Finite(1)));
    }

    #[test]
    fn net_examples() {
        let t = Space::Torus { k: 1 };
        let pts = [Point::circle(0.0), Point::circle(0.5)];
        assert_eq!(epsilon_net(&t, &pts, 0.6).unwrap(), vec![Point::circle(0.0)]);
        assert_eq!(epsilon_net(&t, &pts, 0.4).unwrap(), pts.to_vec());
        assert!(epsilon_net(&t, &pts, 0.0).is_err());
    }
}
