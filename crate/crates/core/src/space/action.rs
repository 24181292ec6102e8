use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;

use super::{BinaryPoint, Point, Space};
use crate::error::{Error, Result};
use crate::numeric::{rotate, DoubleDouble};
use crate::semigroup::{Element, FiniteTable, Semigroup, WindowSpec};
use crate::tags::Tag;

/// How a semigroup element moves a point.
#[derive(Debug, Clone, PartialEq)]
pub enum ActionKind {
    /// `x + g A (mod 1)`; row `i` of `A` is the translation vector of the
    /// `i`-th generator. Grid elements are scaled by the grid step first.
    TorusTranslation { rows: Vec<Vec<DoubleDouble>> },
    /// The compactified naturals acting on themselves by addition.
    ZBarSelf,
    /// `x -> 2^n x (mod 1)` on binary expansions.
    Doubling,
    /// `Z_+` acting on a finite set through the iterates of one map.
    FiniteMap { map: Vec<usize> },
    /// A finite semigroup acting through a table: row `g`, column `x`.
    FiniteTable { table: Vec<Vec<usize>> },
    /// Componentwise action of one semigroup on a product space.
    Product(Vec<ActionKind>),
}

/// A compact metric space with a continuous left action of a semigroup.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionSystem {
    pub semigroup: Semigroup,
    pub space: Space,
    pub action: ActionKind,
    /// Whether every map `x -> g x` is an isometry (declared, not measured).
    pub isometric: bool,
}

impl ActionSystem {
    /// `Z_+^d` (or an `R_+^d` grid) translating the `k`-torus by the rows of `rows`.
    pub fn torus_translation(semigroup: Semigroup, rows: Vec<Vec<DoubleDouble>>) -> Result<Self> {
        let d = match &semigroup {
            Semigroup::ZPlus { dim } | Semigroup::RPlusGrid { dim, .. } => *dim,
            other => return Err(Error::Unsupported(format!("{} cannot translate a torus", other.tag()))),
        };
        let k = rows.first().map_or(0, Vec::len);
        if rows.len() != d || k == 0 || rows.iter().any(|r| r.len() != k) {
            return Err(Error::InvalidInput(format!(
                "translation matrix must be {d} x k with k >= 1"
            )));
        }
        Ok(ActionSystem {
            semigroup,
            space: Space::Torus { k },
            action: ActionKind::TorusTranslation { rows },
            isometric: true,
        })
    }

    /// Rotation of the circle by the golden mean `(sqrt 5 - 1) / 2`.
    pub fn golden_rotation() -> Self {
        Self::torus_translation(Semigroup::ZPlus { dim: 1 }, vec![vec![DoubleDouble::GOLDEN]])
            .expect("valid rotation")
    }

    pub fn rotation(alpha: f64) -> Self {
        Self::torus_translation(Semigroup::ZPlus { dim: 1 }, vec![vec![DoubleDouble::from_f64(alpha)]])
            .expect("valid rotation")
    }

    pub fn zbar_self() -> Self {
        ActionSystem {
            semigroup: Semigroup::ZBarPlus,
            space: Space::ZBarPlus,
            action: ActionKind::ZBarSelf,
            isometric: false,
        }
    }

    pub fn doubling() -> Self {
        ActionSystem {
            semigroup: Semigroup::ZPlus { dim: 1 },
            space: Space::BinaryCircle,
            action: ActionKind::Doubling,
            isometric: false,
        }
    }

    /// `Z_+` acting on `{0, ..., n-1}` (discrete metric) by iterates of `map`.
    pub fn finite_map(map: Vec<usize>) -> Result<Self> {
        let n = map.len();
        if n == 0 || map.iter().any(|&v| v >= n) {
            return Err(Error::InvalidInput("finite map must send {0..n-1} into itself".into()));
        }
        let mut seen = vec![false; n];
        for &v in &map {
            seen[v] = true;
        }
        let isometric = seen.iter().all(|&s| s);
        Ok(ActionSystem {
            semigroup: Semigroup::ZPlus { dim: 1 },
            space: Space::Finite { n, distances: None },
            action: ActionKind::FiniteMap { map },
            isometric,
        })
    }

    /// A finite semigroup acting on `{0, ..., n-1}` through `table[g][x]`.
    /// The action law and (when the table has one) the identity law are
    /// checked exhaustively.
    pub fn finite_table_action(sg: Arc<FiniteTable>, table: Vec<Vec<usize>>) -> Result<Self> {
        let n = table.first().map_or(0, Vec::len);
        if table.len() != sg.len() || n == 0 || table.iter().any(|r| r.len() != n || r.iter().any(|&v| v >= n)) {
            return Err(Error::InvalidInput(format!(
                "action table must have {} rows of equal length with entries below the row length",
                sg.len()
            )));
        }
        for g in 0..sg.len() {
            for h in 0..sg.len() {
                for x in 0..n {
                    if table[sg.op(g, h)][x] != table[g][table[h][x]] {
                        return Err(Error::InvalidInput(format!(
                            "action law fails for ({}, {}) at point {x}",
                            sg.names()[g],
                            sg.names()[h]
                        )));
                    }
                }
            }
        }
        if let Some(e) = sg.identity() {
            if (0..n).any(|x| table[e][x] != x) {
                return Err(Error::InvalidInput("identity does not act trivially".into()));
            }
        }
        let isometric = table.iter().all(|row| {
            let mut seen = vec![false; n];
            row.iter().for_each(|&v| seen[v] = true);
            seen.iter().all(|&s| s)
        });
        Ok(ActionSystem {
            semigroup: Semigroup::Finite(sg),
            space: Space::Finite { n, distances: None },
            action: ActionKind::FiniteTable { table },
            isometric,
        })
    }

    /// Componentwise action of a common semigroup on a product space.
    pub fn product(systems: Vec<ActionSystem>) -> Result<Self> {
        let first = systems
            .first()
            .ok_or_else(|| Error::InvalidInput("empty product".into()))?;
        if systems.iter().any(|s| s.semigroup != first.semigroup) {
            return Err(Error::InvalidInput("product factors must share the semigroup".into()));
        }
        Ok(ActionSystem {
            semigroup: first.semigroup.clone(),
            space: Space::Product(systems.iter().map(|s| s.space.clone()).collect()),
            isometric: systems.iter().all(|s| s.isometric),
            action: ActionKind::Product(systems.into_iter().map(|s| s.action).collect()),
        })
    }

    pub fn name(&self) -> String {
        let action = match &self.action {
            ActionKind::TorusTranslation { .. } => "translation",
            ActionKind::ZBarSelf => "self-action",
            ActionKind::Doubling => "doubling",
            ActionKind::FiniteMap { .. } => "finite-map",
            ActionKind::FiniteTable { .. } => "finite-table",
            ActionKind::Product(_) => "product",
        };
        format!("{} on {} ({action})", self.semigroup.tag(), self.space.tag())
    }

    pub fn identity(&self) -> Result<Element> {
        self.semigroup
            .identity()
            .ok_or_else(|| Error::Unsupported(format!("{} has no identity", self.semigroup.tag())))
    }

    /// `pi(g, x)`.
    pub fn apply(&self, g: &Element, x: &Point) -> Result<Point> {
        self.semigroup.check_member(g)?;
        self.space.check(x)?;
        Ok(apply_kind(&self.action, &self.semigroup, g, x))
    }

    /// Builds a system from a semigroup tag and a space/action tag, e.g.
    /// `("zplus", "torus:k=1,alpha=golden")` or `("zbarplus", "zbarplus-space")`.
    pub fn from_tags(semigroup_tag: &str, space_tag: &str) -> Result<(Self, Option<WindowSpec>)> {
        let (semigroup, window) = Semigroup::parse_tag(semigroup_tag)?;
        let tag = Tag::parse(space_tag)?;
        let system = match tag.name.as_str() {
            "torus" => {
                let d = semigroup.dim().unwrap_or(1);
                let alpha = tag.params.get("alpha").map(String::as_str);
                let default_k = alpha.map_or(1, |a| a.split(';').next().unwrap_or("").split('/').count());
                let k = tag.get_or("k", default_k)?;
                let rows = parse_translation_rows(alpha, d, k)?;
                Self::torus_translation(semigroup, rows)?
            }
            "zbarplus-space" | "zbarplus" => {
                if semigroup != Semigroup::ZBarPlus {
                    return Err(Error::Config("zbarplus-space needs the zbarplus semigroup".into()));
                }
                Self::zbar_self()
            }
            "doubling" => {
                if semigroup != (Semigroup::ZPlus { dim: 1 }) {
                    return Err(Error::Config("the doubling map needs zplus:d=1".into()));
                }
                Self::doubling()
            }
            "finite" => {
                let path = tag
                    .raw
                    .as_deref()
                    .ok_or_else(|| Error::Config("finite: needs an action table".into()))?;
                let rows = match builtin_map(path) {
                    Some(map) => vec![map],
                    None => read_action_csv(path)?,
                };
                match &semigroup {
                    Semigroup::ZPlus { dim: 1 } if rows.len() == 1 => {
                        Self::finite_map(rows.into_iter().next().expect("one row"))?
                    }
                    Semigroup::Finite(sg) => Self::finite_table_action(Arc::clone(sg), rows)?,
                    other => {
                        return Err(Error::Config(format!(
                            "finite action table does not fit semigroup {}",
                            other.tag()
                        )))
                    }
                }
            }
            other => return Err(Error::Config(format!("unknown space `{other}`"))),
        };
        Ok((system, window))
    }
}

fn apply_kind(kind: &ActionKind, sg: &Semigroup, g: &Element, x: &Point) -> Point {
    match (kind, g, x) {
        (ActionKind::TorusTranslation { rows }, Element::ZPlus(n) | Element::Grid(n), Point::Torus(c)) => {
            let scale = match sg {
                Semigroup::RPlusGrid { step, .. } => *step,
                _ => 1.0,
            };
            let coords = (0..c.len())
                .map(|j| rotate(c[j], n.iter().zip(rows).map(|(&ni, row)| (ni as f64 * scale, row[j]))))
                .collect();
            Point::Torus(coords)
        }
        (ActionKind::ZBarSelf, Element::ZBar(s), Point::ZBar(t)) => Point::ZBar(*s + *t),
        (ActionKind::Doubling, Element::ZPlus(n), Point::Binary(b)) => Point::Binary(b.shifted(n[0])),
        (ActionKind::FiniteMap { map }, Element::ZPlus(n), Point::Finite(i)) => {
            Point::Finite(iterate_map(map, *i, n[0]))
        }
        (ActionKind::FiniteTable { table }, Element::Finite(g), Point::Finite(i)) => Point::Finite(table[*g][*i]),
        (ActionKind::Product(kinds), _, Point::Product(ps)) => Point::Product(
            kinds.iter().zip(ps).map(|(k, p)| apply_kind(k, sg, g, p)).collect(),
        ),
        _ => unreachable!("semigroup and space membership checked by the caller"),
    }
}

/// `map^n(start)` using the tail-plus-cycle structure of the path.
fn iterate_map(map: &[usize], start: usize, n: u64) -> usize {
    let mut first_visit = vec![usize::MAX; map.len()];
    let mut path = Vec::new();
    let mut cur = start;
    while first_visit[cur] == usize::MAX {
        if path.len() as u64 == n {
            return cur;
        }
        first_visit[cur] = path.len();
        path.push(cur);
        cur = map[cur];
    }
    let tail = first_visit[cur] as u64;
    let cycle = path.len() as u64 - tail;
    if n < path.len() as u64 {
        return path[n as usize];
    }
    path[(tail + (n - tail) % cycle) as usize]
}

fn parse_constant(s: &str) -> Result<DoubleDouble> {
    match s.trim() {
        "golden" => Ok(DoubleDouble::GOLDEN),
        "silver" => Ok(DoubleDouble::SILVER),
        v => v
            .parse::<f64>()
            .map(DoubleDouble::from_f64)
            .map_err(|_| Error::Config(format!("bad translation constant `{v}`"))),
    }
}

/// Rows separated by `;`, entries by `/`. Without an explicit matrix the
/// entries cycle through (golden, silver), shifted by one per row.
fn parse_translation_rows(spec: Option<&str>, d: usize, k: usize) -> Result<Vec<Vec<DoubleDouble>>> {
    match spec {
        None => {
            let base = [DoubleDouble::GOLDEN, DoubleDouble::SILVER];
            Ok((0..d).map(|i| (0..k).map(|j| base[(i + j) % 2]).collect()).collect())
        }
        Some(s) => {
            let rows: Vec<Vec<DoubleDouble>> = s
                .split(';')
                .map(|r| r.split('/').map(parse_constant).collect::<Result<Vec<_>>>())
                .collect::<Result<_>>()?;
            if rows.len() != d || rows.iter().any(|r| r.len() != k) {
                return Err(Error::Config(format!("alpha must be a {d} x {k} matrix")));
            }
            Ok(rows)
        }
    }
}

/// Built-in maps: `cycle<n>` (rotation of n points) and `contract<n>`
/// (`i -> max(i - 1, 0)`).
fn builtin_map(name: &str) -> Option<Vec<usize>> {
    let parse = |p: &str| name.strip_prefix(p).and_then(|s| s.parse::<usize>().ok()).filter(|&n| n > 0);
    if let Some(n) = parse("cycle") {
        Some((0..n).map(|i| (i + 1) % n).collect())
    } else {
        parse("contract").map(|n| (0..n).map(|i| i.saturating_sub(1)).collect())
    }
}

/// Action CSV: a header row of point names, then one row per semigroup
/// element naming the image of each point.
fn read_action_csv(path: &str) -> Result<Vec<Vec<usize>>> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::Config(format!("cannot open action table {path}: {e}")))?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let names: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|cell| {
                names
                    .iter()
                    .position(|n| n == cell)
                    .ok_or_else(|| Error::InvalidInput(format!("unknown point `{cell}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

/// Finite piece of an orbit `G(y)`: `(g, pi(g, y))` in window order.
#[derive(Debug, Clone)]
pub struct OrbitSample {
    pub basepoint: Point,
    pub pairs: Vec<(Element, Point)>,
}

impl OrbitSample {
    pub fn points(&self) -> Vec<Point> {
        self.pairs.iter().map(|(_, p)| p.clone()).collect()
    }

    /// CSV with the element coordinates followed by the point coordinates.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        if let Some((g, p)) = self.pairs.first() {
            let header: Vec<String> = (0..g.coordinate_fields().len())
                .map(|i| format!("g{i}"))
                .chain((0..p.coordinate_fields().len()).map(|i| format!("x{i}")))
                .collect();
            w.write_record(&header)?;
        }
        for (g, p) in &self.pairs {
            let mut rec = g.coordinate_fields();
            rec.extend(p.coordinate_fields());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn orbit(sys: &ActionSystem, y: &Point, window: &WindowSpec) -> Result<OrbitSample> {
    sys.space.check(y)?;
    let elems = sys.semigroup.enumerate_window(window)?;
    let pairs = elems
        .into_par_iter()
        .map(|g| {
            let p = apply_kind(&sys.action, &sys.semigroup, &g, y);
            (g, p)
        })
        .collect();
    Ok(OrbitSample {
        basepoint: y.clone(),
        pairs,
    })
}

/// Convenience for the doubling map: a binary point from a float.
pub fn binary_point(x: f64) -> Point {
    Point::Binary(BinaryPoint::from_f64(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semigroup::ZBar;

    fn zbar(n: u64) -> Point {
        Point::ZBar(ZBar::Fin(n))
    }
    use crate::space::epsilon_net_indices;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const ALPHA: f64 = 0.6180339887498949;

    #[test]
    fn torus_rotation_example() {
        let sys = ActionSystem::golden_rotation();
        let p = sys.apply(&Element::n(3), &Point::circle(0.0)).unwrap();
        assert!((p.coordinates()[0] - 0.8541019662496846).abs() < 1e-15);
    }

    #[test]
    fn zbar_self_action_absorbs() {
        let sys = ActionSystem::zbar_self();
        let p = sys.apply(&Element::ZBar(ZBar::Fin(5)), &Point::ZBar(ZBar::Inf)).unwrap();
        assert_eq!(p, Point::ZBar(ZBar::Inf));
        assert_eq!(sys.apply(&Element::ZBar(ZBar::Fin(5)), &zbar(2)).unwrap(), zbar(7));
    }

    #[test]
    fn doubling_identity_and_step() {
        let sys = ActionSystem::doubling();
        let x = binary_point(0.3);
        assert_eq!(sys.apply(&Element::n(0), &x).unwrap(), x);
        let y = sys.apply(&Element::n(1), &x).unwrap();
        assert!((y.coordinates()[0] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn apply_rejects_mismatches() {
        let sys = ActionSystem::golden_rotation();
        assert!(sys.apply(&Element::ZBar(ZBar::Inf), &Point::circle(0.0)).is_err());
        assert!(sys.apply(&Element::n(1), &zbar(1)).is_err());
    }

    #[test]
    fn orbit_examples() {
        let sys = ActionSystem::golden_rotation();
        let o = orbit(&sys, &Point::circle(0.0), &WindowSpec::Box { width: 3 }).unwrap();
        let xs: Vec<f64> = o.pairs.iter().map(|(_, p)| p.coordinates()[0]).collect();
        assert_eq!(o.pairs[2].0, Element::n(2));
        for (n, x) in xs.iter().enumerate() {
            let expect = (n as f64 * ALPHA).fract();
            assert!((x - expect).abs() < 1e-15);
        }
        let single = orbit(&sys, &Point::circle(0.25), &WindowSpec::Box { width: 1 }).unwrap();
        assert_eq!(single.pairs, vec![(Element::n(0), Point::circle(0.25))]);

        let dbl = ActionSystem::doubling();
        let o = orbit(&dbl, &binary_point(0.0), &WindowSpec::Box { width: 4 }).unwrap();
        assert!(o.pairs.iter().all(|(_, p)| p.coordinates()[0] == 0.0));
    }

    #[test]
    fn orbit_csv_has_header_and_rows() {
        let sys = ActionSystem::golden_rotation();
        let o = orbit(&sys, &Point::circle(0.0), &WindowSpec::Box { width: 3 }).unwrap();
        let mut buf = Vec::new();
        o.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "g0,x0");
        assert_eq!(lines.len(), 4);
        assert!(lines[2].starts_with("1,0.618"));
    }

    fn sample_element(sg: &Semigroup, rng: &mut ChaCha8Rng) -> Element {
        match sg {
            Semigroup::ZPlus { dim } => Element::ZPlus((0..*dim).map(|_| rng.random_range(0..1_000_000)).collect()),
            Semigroup::RPlusGrid { dim, .. } => {
                Element::Grid((0..*dim).map(|_| rng.random_range(0..1_000_000)).collect())
            }
            Semigroup::ZBarPlus => {
                if rng.random_ratio(1, 10) {
                    Element::ZBar(ZBar::Inf)
                } else {
                    Element::ZBar(ZBar::Fin(rng.random_range(0..1000)))
                }
            }
            Semigroup::Finite(t) => Element::Finite(rng.random_range(0..t.len())),
            Semigroup::Matrix { .. } => unreachable!(),
        }
    }

    #[test]
    fn action_law_on_random_triples() {
        let systems = vec![
            ActionSystem::golden_rotation(),
            ActionSystem::from_tags("zplus:d=2", "torus:k=2").unwrap().0,
            ActionSystem::from_tags("rplusgrid:h=0.015625", "torus:k=2,alpha=golden/silver").unwrap().0,
            ActionSystem::zbar_self(),
            ActionSystem::doubling(),
            ActionSystem::finite_map(vec![1, 2, 0, 0]).unwrap(),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for sys in systems {
            let e = sys.identity().unwrap();
            let mut worst = 0.0f64;
            for _ in 0..10_000 {
                let mut g = sample_element(&sys.semigroup, &mut rng);
                let mut h = sample_element(&sys.semigroup, &mut rng);
                if matches!(sys.action, ActionKind::Doubling) {
                    // Keep shifts inside the stored expansion.
                    g = Element::n(rng.random_range(0..50_000));
                    h = Element::n(rng.random_range(0..50_000));
                }
                let x = sys.space.sample(&mut rng);
                let gh = sys.semigroup.compose(&g, &h).unwrap();
                let lhs = sys.apply(&gh, &x).unwrap();
                let rhs = sys.apply(&g, &sys.apply(&h, &x).unwrap()).unwrap();
                worst = worst.max(sys.space.distance(&lhs, &rhs).unwrap());
                assert_eq!(sys.apply(&e, &x).unwrap(), x);
            }
            assert!(worst <= 1e-12, "{}: {worst}", sys.name());
        }
    }

    #[test]
    fn torus_translations_are_isometries() {
        let sys = ActionSystem::from_tags("zplus:d=2", "torus:k=2").unwrap().0;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let g = sample_element(&sys.semigroup, &mut rng);
            let x = sys.space.sample(&mut rng);
            let z = sys.space.sample(&mut rng);
            let before = sys.space.distance(&x, &z).unwrap();
            let after = sys
                .space
                .distance(&sys.apply(&g, &x).unwrap(), &sys.apply(&g, &z).unwrap())
                .unwrap();
            assert!((before - after).abs() <= 1e-12);
        }
    }

    #[test]
    fn doubling_expands_small_distances() {
        let sys = ActionSystem::doubling();
        let x = binary_point(0.1);
        let z = binary_point(0.15);
        let d0 = sys.space.distance(&x, &z).unwrap();
        let one = Element::n(1);
        let d1 = sys
            .space
            .distance(&sys.apply(&one, &x).unwrap(), &sys.apply(&one, &z).unwrap())
            .unwrap();
        assert!((d1 - 2.0 * d0).abs() < 1e-15);
    }

    #[test]
    fn finite_map_iterates_through_cycle() {
        // 3 -> 0 -> 1 -> 2 -> 0
        let map = vec![1, 2, 0, 0];
        for n in 0..20u64 {
            let mut cur = 3;
            for _ in 0..n {
                cur = map[cur];
            }
            assert_eq!(iterate_map(&map, 3, n), cur);
        }
        assert_eq!(iterate_map(&map, 3, 1_000_000_000_001), iterate_map(&map, 3, 2 + 3 * 333));
    }

    #[test]
    fn finite_table_action_validation() {
        let z2 = Arc::new(FiniteTable::cyclic(2));
        // Z_2 swapping two points.
        assert!(ActionSystem::finite_table_action(Arc::clone(&z2), vec![vec![0, 1], vec![1, 0]]).is_ok());
        // Wrong: the generator collapses points, violating g.g = e.
        assert!(ActionSystem::finite_table_action(z2, vec![vec![0, 1], vec![0, 0]]).is_err());
    }

    #[test]
    fn tags_build_systems() {
        let (sys, w) = ActionSystem::from_tags("zbarplus:N=100", "zbarplus-space:N=100").unwrap();
        assert_eq!(sys, ActionSystem::zbar_self());
        assert_eq!(w, Some(WindowSpec::Cutoff { n: 100 }));
        let (sys, _) = ActionSystem::from_tags("zplus", "torus:k=1,alpha=golden").unwrap();
        assert_eq!(sys, ActionSystem::golden_rotation());
        assert!(ActionSystem::from_tags("zplus", "doubling").is_ok());
        assert!(ActionSystem::from_tags("zplus:d=2", "doubling").is_err());
        assert!(ActionSystem::from_tags("zplus", "finite:cycle5").unwrap().0.isometric);
        assert!(!ActionSystem::from_tags("zplus", "finite:contract5").unwrap().0.isometric);
        assert!(ActionSystem::from_tags("zplus", "torus:k=2,alpha=golden").is_err());
        assert!(ActionSystem::from_tags("zplus", "klein-bottle").is_err());
    }

    #[test]
    fn golden_orbit_net_brute_force_cover() {
        let sys = ActionSystem::golden_rotation();
        let o = orbit(&sys, &Point::circle(0.0), &WindowSpec::Box { width: 1000 }).unwrap();
        let pts = o.points();
        let net = epsilon_net_indices(&sys.space, &pts, 0.1).unwrap();
        // Pinned by an independent 50-digit greedy computation.
        assert_eq!(net, vec![0, 1, 2, 3, 4, 18, 19, 20]);
        for p in &pts {
            assert!(net.iter().any(|&j| sys.space.distance(p, &pts[j]).unwrap() <= 0.1));
        }
        for (a, &i) in net.iter().enumerate() {
            for &j in &net[a + 1..] {
                assert!(sys.space.distance(&pts[i], &pts[j]).unwrap() > 0.1);
            }
        }
    }
}
