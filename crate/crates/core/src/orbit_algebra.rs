//! The commutative product on an orbit closure, modelled on an ε-net.
//!
//! With representatives `g_i` for the net points `x_i ~ pi(g_i, y)`, the
//! product is `x ⋄ z = pi(g_x g_z, y)` where `g_x`, `g_z` belong to the
//! nearest net points.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::semigroup::{coords, Element, WindowSpec};
use crate::space::{epsilon_net_indices, orbit, ActionSystem, Point};

#[derive(Debug, Clone, Serialize)]
pub struct OrbitClosureNet {
    pub basepoint: Point,
    pub eps: f64,
    pub window: WindowSpec,
    pub points: Vec<Point>,
    /// `points[i] = pi(representatives[i], basepoint)`.
    #[serde(serialize_with = "coords::list")]
    pub representatives: Vec<Element>,
}

/// Greedy net over the orbit sample, keeping the first element that reached
/// each net point as its representative. Net point 0 is `y` itself, with
/// representative `e`.
pub fn build_orbit_net(sys: &ActionSystem, y: &Point, eps: f64, window: &WindowSpec) -> Result<OrbitClosureNet> {
    let sample = orbit(sys, y, window)?;
    if sample.pairs.is_empty() {
        return Err(Error::InvalidInput("window is empty".into()));
    }
    let points = sample.points();
    let kept = epsilon_net_indices(&sys.space, &points, eps)?;
    let (representatives, points) = kept.into_iter().map(|i| sample.pairs[i].clone()).unzip();
    Ok(OrbitClosureNet {
        basepoint: y.clone(),
        eps,
        window: window.clone(),
        points,
        representatives,
    })
}

impl OrbitClosureNet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Nearest net point (lowest index on ties) and its distance.
    pub fn nearest(&self, sys: &ActionSystem, x: &Point) -> Result<(usize, f64)> {
        let mut best = (0, f64::INFINITY);
        for (i, p) in self.points.iter().enumerate() {
            let d = sys.space.distance(x, p)?;
            if d < best.1 {
                best = (i, d);
            }
        }
        Ok(best)
    }

    /// Like [`nearest`](Self::nearest) but fails beyond `eps`.
    pub fn snap(&self, sys: &ActionSystem, x: &Point) -> Result<usize> {
        let (i, d) = self.nearest(sys, x)?;
        if d > self.eps {
            return Err(Error::OutOfNet {
                distance: d,
                eps: self.eps,
            });
        }
        Ok(i)
    }
}

/// All products `pi(g_i g_j, y)` of net representatives.
#[derive(Debug, Clone)]
pub struct DiamondTable {
    pub system: ActionSystem,
    pub net: OrbitClosureNet,
    /// Row-major `n x n` products.
    pub entries: Vec<Point>,
    /// Nearest net index of each entry.
    pub nearest: Vec<usize>,
    /// Distance of each entry to its nearest net point.
    pub snap_defects: Vec<f64>,
}

pub fn diamond_table(sys: &ActionSystem, net: OrbitClosureNet) -> Result<DiamondTable> {
    let n = net.len();
    let cells = (0..n * n)
        .into_par_iter()
        .map(|c| {
            let g = sys
                .semigroup
                .compose(&net.representatives[c / n], &net.representatives[c % n])?;
            let p = sys.apply(&g, &net.basepoint)?;
            let (k, d) = net.nearest(sys, &p)?;
            Ok((p, k, d))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut entries = Vec::with_capacity(n * n);
    let mut nearest = Vec::with_capacity(n * n);
    let mut snap_defects = Vec::with_capacity(n * n);
    for (p, k, d) in cells {
        entries.push(p);
        nearest.push(k);
        snap_defects.push(d);
    }
    Ok(DiamondTable {
        system: sys.clone(),
        net,
        entries,
        nearest,
        snap_defects,
    })
}

impl DiamondTable {
    pub fn len(&self) -> usize {
        self.net.len()
    }

    pub fn is_empty(&self) -> bool {
        self.net.is_empty()
    }

    pub fn entry(&self, i: usize, j: usize) -> &Point {
        &self.entries[i * self.len() + j]
    }

    fn snapped(&self, i: usize, j: usize) -> usize {
        self.nearest[i * self.len() + j]
    }

    /// `x ⋄ z` through the representatives of the nearest net points.
    pub fn diamond(&self, x: &Point, z: &Point) -> Result<Point> {
        let i = self.net.snap(&self.system, x)?;
        let j = self.net.snap(&self.system, z)?;
        Ok(self.entry(i, j).clone())
    }

    /// `d(pi(g, x), pi(g, y) ⋄ x)`.
    pub fn translation_consistency(&self, g: &Element, x: &Point) -> Result<f64> {
        let gy = self.system.apply(g, &self.net.basepoint)?;
        let lhs = self.system.apply(g, x)?;
        self.system.space.distance(&lhs, &self.diamond(&gy, x)?)
    }

    /// CSV rows `i, j, product coordinates, distance to the nearest net point`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let n = self.len();
        if let Some(first) = self.entries.first() {
            let mut header = vec!["i".to_string(), "j".to_string()];
            header.extend((0..first.coordinate_fields().len()).map(|k| format!("x{k}")));
            header.push("defect".into());
            w.write_record(&header)?;
        }
        for (c, p) in self.entries.iter().enumerate() {
            let mut rec = vec![(c / n).to_string(), (c % n).to_string()];
            rec.extend(p.coordinate_fields());
            rec.push(format!("{:e}", self.snap_defects[c]));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Defect {
    pub value: f64,
    /// Net indices of the worst pair or triple.
    pub witness: Vec<usize>,
}

impl Defect {
    fn zero() -> Self {
        Defect {
            value: 0.0,
            witness: Vec::new(),
        }
    }

    fn update(&mut self, value: f64, witness: &[usize]) {
        if value > self.value {
            self.value = value;
            self.witness = witness.to_vec();
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxiomDefects {
    pub commutativity: Defect,
    pub associativity: Defect,
    pub identity: Defect,
}

impl AxiomDefects {
    pub fn max(&self) -> f64 {
        self.commutativity
            .value
            .max(self.associativity.value)
            .max(self.identity.value)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlgebraReport {
    /// Defects on the representatives themselves, where `x_i ⋄ (x_j ⋄ x_k)`
    /// is `pi(g_i, pi(g_j g_k, y))` and `(x_i ⋄ x_j) ⋄ x_k` is
    /// `pi(g_k, pi(g_i g_j, y))`.
    pub lifted: AxiomDefects,
    /// Defects after snapping every product back onto the net.
    pub snapped: AxiomDefects,
    /// Largest distance from a table entry to the net.
    pub max_snap_defect: f64,
}

/// Commutativity, associativity and identity defects of the table.
pub fn algebra_check(table: &DiamondTable) -> Result<AlgebraReport> {
    let n = table.len();
    let sys = &table.system;
    let net = &table.net;
    let d = |a: &Point, b: &Point| sys.space.distance(a, b);
    let identity_index = sys.identity().ok().and_then(|e| net.representatives.iter().position(|g| *g == e));

    let mut lifted_comm = Defect::zero();
    let mut snapped_comm = Defect::zero();
    let mut lifted_id = Defect::zero();
    let mut snapped_id = Defect::zero();
    for i in 0..n {
        for j in 0..n {
            lifted_comm.update(d(table.entry(i, j), table.entry(j, i))?, &[i, j]);
            snapped_comm.update(
                d(&net.points[table.snapped(i, j)], &net.points[table.snapped(j, i)])?,
                &[i, j],
            );
        }
        if let Some(e) = identity_index {
            lifted_id.update(d(table.entry(e, i), &net.points[i])?, &[e, i]);
            snapped_id.update(d(&net.points[table.snapped(e, i)], &net.points[i])?, &[e, i]);
        }
    }
    if identity_index.is_none() && n > 0 {
        lifted_id.update(f64::INFINITY, &[]);
        snapped_id.update(f64::INFINITY, &[]);
    }

    let triples = (0..n * n * n)
        .into_par_iter()
        .map(|c| {
            let (i, j, k) = (c / (n * n), (c / n) % n, c % n);
            let left = sys.apply(&net.representatives[k], table.entry(i, j))?;
            let right = sys.apply(&net.representatives[i], table.entry(j, k))?;
            let lifted = d(&left, &right)?;
            let snapped = d(
                &net.points[table.snapped(table.snapped(i, j), k)],
                &net.points[table.snapped(i, table.snapped(j, k))],
            )?;
            Ok((lifted, snapped))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut lifted_assoc = Defect::zero();
    let mut snapped_assoc = Defect::zero();
    for (c, (lifted, snapped)) in triples.into_iter().enumerate() {
        let w = [c / (n * n), (c / n) % n, c % n];
        lifted_assoc.update(lifted, &w);
        snapped_assoc.update(snapped, &w);
    }

    Ok(AlgebraReport {
        lifted: AxiomDefects {
            commutativity: lifted_comm,
            associativity: lifted_assoc,
            identity: lifted_id,
        },
        snapped: AxiomDefects {
            commutativity: snapped_comm,
            associativity: snapped_assoc,
            identity: snapped_id,
        },
        max_snap_defect: table.snap_defects.iter().copied().fold(0.0, f64::max),
    })
}

/// Default acceptance threshold for algebra defects at resolution `eps`.
pub fn default_defect_threshold(eps: f64) -> f64 {
    (2.5 * eps).max(1e-9)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semigroup::ZBar;

    fn golden_table(eps: f64, width: u64) -> DiamondTable {
        let sys = ActionSystem::golden_rotation();
        let net = build_orbit_net(&sys, &Point::circle(0.0), eps, &WindowSpec::Box { width }).unwrap();
        diamond_table(&sys, net).unwrap()
    }

    fn zbar_table(eps: f64, n: u64) -> DiamondTable {
        let sys = ActionSystem::zbar_self();
        let net = build_orbit_net(&sys, &Point::ZBar(ZBar::Fin(0)), eps, &WindowSpec::Cutoff { n }).unwrap();
        diamond_table(&sys, net).unwrap()
    }

    fn frac(k: f64) -> f64 {
        (k * 0.6180339887498949).fract()
    }

    #[test]
    fn golden_net_covers_orbit() {
        let sys = ActionSystem::golden_rotation();
        let w = WindowSpec::Box { width: 1000 };
        let net = build_orbit_net(&sys, &Point::circle(0.0), 0.1, &w).unwrap();
        let reps: Vec<u64> = net.representatives.iter().map(|g| g.sup_norm().unwrap()).collect();
        assert_eq!(reps, vec![0, 1, 2, 3, 4, 18, 19, 20]);
        for p in orbit(&sys, &Point::circle(0.0), &w).unwrap().points() {
            assert!(net.nearest(&sys, &p).unwrap().1 <= 0.1);
        }
        for (g, p) in net.representatives.iter().zip(&net.points) {
            assert_eq!(&sys.apply(g, &net.basepoint).unwrap(), p);
        }
    }

    #[test]
    fn single_point_net() {
        let sys = ActionSystem::golden_rotation();
        let net = build_orbit_net(&sys, &Point::circle(0.4), 0.1, &WindowSpec::Box { width: 1 }).unwrap();
        assert_eq!(net.points, vec![Point::circle(0.4)]);
        assert_eq!(net.representatives, vec![Element::n(0)]);
        let report = algebra_check(&diamond_table(&sys, net).unwrap()).unwrap();
        assert_eq!(report.lifted.max(), 0.0);
        assert_eq!(report.snapped.max(), 0.0);
    }

    #[test]
    fn zbar_net_is_pinned() {
        let table = zbar_table(0.05, 1000);
        let reps: Vec<Element> = table.net.representatives.clone();
        let expected: Vec<Element> = [0, 1, 2, 3, 5, 8, 16, 113].iter().map(|&n| Element::ZBar(ZBar::Fin(n))).collect();
        assert_eq!(reps, expected);
    }

    #[test]
    fn diamond_of_golden_points() {
        let t = golden_table(0.1, 10_000);
        let p = t.diamond(&Point::circle(frac(2.0)), &Point::circle(frac(3.0))).unwrap();
        assert!((p.coordinates()[0] - 0.09016994374947451).abs() < 1e-12);
        let y = Point::circle(0.0);
        for z in &t.net.points {
            assert_eq!(&t.diamond(&y, z).unwrap(), z);
        }
    }

    #[test]
    fn diamond_out_of_net() {
        let sys = ActionSystem::zbar_self();
        let net = build_orbit_net(&sys, &Point::ZBar(ZBar::Fin(5)), 0.01, &WindowSpec::Cutoff { n: 3 }).unwrap();
        let t = diamond_table(&sys, net).unwrap();
        let err = t.diamond(&Point::ZBar(ZBar::Fin(0)), &Point::ZBar(ZBar::Fin(5))).unwrap_err();
        assert!(matches!(err, Error::OutOfNet { .. }));
    }

    #[test]
    fn zbar_infinity_absorbs() {
        let t = zbar_table(0.05, 1000);
        // The last net point's representative is the inf-cluster one.
        let inf_rep = t.net.points.last().unwrap().clone();
        for z in &t.net.points {
            let p = t.diamond(&inf_rep, z).unwrap();
            assert!(t.system.space.distance(&p, &Point::ZBar(ZBar::Inf)).unwrap() <= 0.05);
        }
        let exact = diamond_table(
            &t.system,
            OrbitClosureNet {
                basepoint: Point::ZBar(ZBar::Fin(0)),
                eps: 0.05,
                window: WindowSpec::Cutoff { n: 2 },
                points: vec![Point::ZBar(ZBar::Fin(0)), Point::ZBar(ZBar::Inf)],
                representatives: vec![Element::ZBar(ZBar::Fin(0)), Element::ZBar(ZBar::Inf)],
            },
        )
        .unwrap();
        for z in &exact.net.points {
            assert_eq!(exact.diamond(&Point::ZBar(ZBar::Inf), z).unwrap(), Point::ZBar(ZBar::Inf));
        }
        assert_eq!(
            exact.translation_consistency(&Element::ZBar(ZBar::Inf), &Point::ZBar(ZBar::Inf)).unwrap(),
            0.0
        );
    }

    #[test]
    fn golden_algebra_is_exact() {
        let t = golden_table(0.1, 10_000);
        let r = algebra_check(&t).unwrap();
        assert!(r.lifted.max() <= 1e-12, "{r:?}");
        assert!(r.snapped.max() <= default_defect_threshold(0.1), "{r:?}");
        // The table is symmetric.
        for i in 0..t.len() {
            for j in 0..t.len() {
                assert_eq!(t.entry(i, j), t.entry(j, i));
            }
        }
    }

    #[test]
    fn zbar_algebra_within_snap_budget() {
        let t = zbar_table(0.05, 1000);
        let r = algebra_check(&t).unwrap();
        assert_eq!(r.lifted.max(), 0.0);
        assert!(r.snapped.max() <= 2.0 * 0.05, "{r:?}");
    }

    #[test]
    fn translation_consistency_bounds() {
        let t = golden_table(0.1, 1000);
        for g in 0..1000 {
            for x in &t.net.points {
                assert!(t.translation_consistency(&Element::n(g), x).unwrap() <= 0.2);
            }
        }
        for x in &t.net.points {
            assert_eq!(t.translation_consistency(&Element::n(0), x).unwrap(), 0.0);
        }
        let z = zbar_table(0.05, 1000);
        for g in z.system.semigroup.enumerate_window(&WindowSpec::Cutoff { n: 1000 }).unwrap() {
            for x in &z.net.points {
                assert!(z.translation_consistency(&g, x).unwrap() <= 0.1);
            }
        }
    }

    #[test]
    fn torus_defects_stay_exact_under_refinement() {
        for (eps, width) in [(0.2, 10), (0.1, 100), (0.05, 10_000)] {
            let r = algebra_check(&golden_table(eps, width)).unwrap();
            assert!(r.lifted.max() <= 1e-12, "{eps}: {r:?}");
        }
    }

    #[test]
    fn csv_rows() {
        let t = golden_table(0.3, 10);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "i,j,x0,defect");
        assert_eq!(lines.len(), 1 + t.len() * t.len());
    }
}
