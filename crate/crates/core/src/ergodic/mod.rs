//! Følner averaging, empirical measures and convergence probes.

mod haar;
mod test_functions;

use std::collections::HashSet;
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::{compensated_sum, CompensatedSum};
use crate::semigroup::{Element, QuasiHaar, Semigroup, DEFAULT_GRID_STEP};
use crate::space::{ActionSystem, BinaryPoint, Point, Space};
use crate::tags::Tag;

pub use haar::{
    haar_solve_finite, invariance_residual, linear_oracle, random_start, HaarOptions, InvariantMeasureSolution,
    DEFAULT_HAAR_MAX_ITERATIONS, DEFAULT_HAAR_TOLERANCE, ORACLE_TOLERANCE,
};
pub use test_functions::{bl_distance, Normalization, TestFamily, TestFunction};

/// A sequence of finite sets `F_1, F_2, ...` (indexed from 1).
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FolnerSequence {
    /// `[0, n)^d` in `Z_+^d`.
    Cube { dim: usize },
    /// `n` grid steps per axis in `R_+^d`.
    GridCube { dim: usize, step: f64 },
    /// `{n^2, n^2 + 1, ..., n^2 + n}` in `Z_+`.
    Jr,
    Explicit { sets: Vec<Vec<Element>> },
}

impl FolnerSequence {
    pub fn set(&self, n: u64) -> Result<Vec<Element>> {
        if n == 0 {
            return Err(Error::InvalidInput("Følner sets are indexed from 1".into()));
        }
        match self {
            FolnerSequence::Cube { dim } => Ok(cube(*dim, n, false)),
            FolnerSequence::GridCube { dim, .. } => Ok(cube(*dim, n, true)),
            FolnerSequence::Jr => jr_sequence(n),
            FolnerSequence::Explicit { sets } => sets
                .get(n as usize - 1)
                .cloned()
                .ok_or_else(|| Error::InvalidInput(format!("explicit sequence has only {} sets", sets.len()))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            FolnerSequence::Cube { .. } => "cube",
            FolnerSequence::GridCube { .. } => "gridcube",
            FolnerSequence::Jr => "jr",
            FolnerSequence::Explicit { .. } => "explicit",
        }
    }

    /// The natural sequence for a semigroup: cubes on `Z_+^d`, grid cubes on
    /// `R_+^d`.
    pub fn cubes_for(sg: &Semigroup) -> Result<FolnerSequence> {
        match sg {
            Semigroup::ZPlus { dim } => Ok(FolnerSequence::Cube { dim: *dim }),
            Semigroup::RPlusGrid { dim, step } => Ok(FolnerSequence::GridCube { dim: *dim, step: *step }),
            other => Err(Error::Unsupported(format!("no cube Følner sequence on {}", other.tag()))),
        }
    }

    /// `cube[:d=2]`, `gridcube[:d=1,h=0.015625]` or `jr`.
    pub fn parse(tag: &str) -> Result<FolnerSequence> {
        let t = Tag::parse(tag)?;
        match t.name.as_str() {
            "cube" => Ok(FolnerSequence::Cube { dim: t.get_or("d", 1)? }),
            "gridcube" => Ok(FolnerSequence::GridCube {
                dim: t.get_or("d", 1)?,
                step: t.get_or("h", DEFAULT_GRID_STEP)?,
            }),
            "jr" => Ok(FolnerSequence::Jr),
            other => Err(Error::InvalidInput(format!("unknown Følner kind {other:?}"))),
        }
    }

    fn check_fits(&self, sg: &Semigroup) -> Result<()> {
        let ok = match (self, sg) {
            (FolnerSequence::Cube { dim }, Semigroup::ZPlus { dim: d }) => dim == d,
            (FolnerSequence::GridCube { dim, .. }, Semigroup::RPlusGrid { dim: d, .. }) => dim == d,
            (FolnerSequence::Jr, Semigroup::ZPlus { dim: 1 }) => true,
            (FolnerSequence::Explicit { .. }, _) => true,
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::mismatch(sg.tag(), self.name()))
        }
    }
}

fn cube(dim: usize, n: u64, grid: bool) -> Vec<Element> {
    let total = (n as usize).pow(dim as u32);
    (0..total)
        .map(|mut i| {
            let mut coords = vec![0u64; dim];
            for c in coords.iter_mut().rev() {
                *c = (i % n as usize) as u64;
                i /= n as usize;
            }
            if grid {
                Element::Grid(coords)
            } else {
                Element::ZPlus(coords)
            }
        })
        .collect()
}

/// `{n^2, ..., n^2 + n}`.
pub fn jr_sequence(n: u64) -> Result<Vec<Element>> {
    if n == 0 {
        return Err(Error::InvalidInput("n must be at least 1".into()));
    }
    let start = n
        .checked_mul(n)
        .ok_or_else(|| Error::InvalidInput(format!("n = {n} overflows")))?;
    Ok((start..=start + n).map(Element::n).collect())
}

/// `lambda(F △ gF) / lambda(F)`.
pub fn folner_ratio(sg: &Semigroup, mu: &QuasiHaar, set: &[Element], g: &Element) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::InvalidInput("Følner set is empty".into()));
    }
    let f: HashSet<&Element> = set.iter().collect();
    let shifted = set.iter().map(|t| sg.compose(g, t)).collect::<Result<Vec<_>>>()?;
    let gf: HashSet<&Element> = shifted.iter().collect();
    let mut sym: Vec<Element> = f.symmetric_difference(&gf).map(|&e| e.clone()).collect();
    sym.sort();
    Ok(mu.mass(&sym)? / mu.mass(set)?)
}

/// Normalised pushforward of `lambda` restricted to `F` along the orbit of `x`.
/// Support points are aggregated and sorted by coordinates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalMeasure {
    #[serde(skip)]
    pub space: Space,
    pub support: Vec<Point>,
    pub weights: Vec<f64>,
}

impl EmpiricalMeasure {
    /// Aggregates weighted points; weights are renormalised to sum to 1.
    pub fn from_weighted(space: Space, points: Vec<(Point, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidInput("empty measure".into()));
        }
        for (p, w) in &points {
            space.check(p)?;
            if !(w.is_finite() && *w >= 0.0) {
                return Err(Error::InvalidInput(format!("weight {w} is not a nonnegative number")));
            }
        }
        let mut points = points;
        points.sort_by(|a, b| a.0.coordinate_cmp(&b.0));
        let mut support: Vec<Point> = Vec::new();
        let mut sums: Vec<CompensatedSum> = Vec::new();
        for (p, w) in points {
            match support.last() {
                Some(last) if *last == p => sums.last_mut().expect("parallel vectors").add(w),
                _ => {
                    support.push(p);
                    let mut s = CompensatedSum::new();
                    s.add(w);
                    sums.push(s);
                }
            }
        }
        let raw: Vec<f64> = sums.iter().map(CompensatedSum::value).collect();
        let total = compensated_sum(raw.iter().copied());
        if !(total > 0.0) {
            return Err(Error::InvalidInput("measure has zero mass".into()));
        }
        Ok(EmpiricalMeasure {
            space,
            support,
            weights: raw.into_iter().map(|w| w / total).collect(),
        })
    }

    pub fn point_mass(space: Space, x: Point) -> Result<Self> {
        Self::from_weighted(space, vec![(x, 1.0)])
    }

    /// Equal weights on the grid `{j / m}^k` of a torus, or on the dyadic
    /// points `j / m` of the binary circle.
    pub fn uniform_grid(space: &Space, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidInput("grid needs at least one point".into()));
        }
        let points: Vec<(Point, f64)> = match space {
            Space::Torus { k } => {
                let total = m.pow(*k as u32);
                (0..total)
                    .map(|mut i| {
                        let mut c = vec![0.0; *k];
                        for v in c.iter_mut().rev() {
                            *v = (i % m) as f64 / m as f64;
                            i /= m;
                        }
                        (Point::Torus(c), 1.0)
                    })
                    .collect()
            }
            Space::BinaryCircle => (0..m)
                .map(|j| (Point::Binary(BinaryPoint::from_f64(j as f64 / m as f64)), 1.0))
                .collect(),
            other => return Err(Error::Unsupported(format!("no uniform grid on {}", other.tag()))),
        };
        Self::from_weighted(space.clone(), points)
    }

    pub fn total_mass(&self) -> f64 {
        compensated_sum(self.weights.iter().copied())
    }

    pub fn integrate(&self, phi: &TestFunction) -> Result<f64> {
        let mut s = CompensatedSum::new();
        for (p, w) in self.support.iter().zip(&self.weights) {
            s.add(w * phi.eval(&self.space, p)?);
        }
        Ok(s.value())
    }

    /// `g_* mu`.
    pub fn pushforward(&self, sys: &ActionSystem, g: &Element) -> Result<Self> {
        let points = self
            .support
            .iter()
            .zip(&self.weights)
            .map(|(p, &w)| Ok((sys.apply(g, p)?, w)))
            .collect::<Result<Vec<_>>>()?;
        Self::from_weighted(self.space.clone(), points)
    }

    /// CSV with point coordinates followed by the weight.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        if let Some(first) = self.support.first() {
            let mut header: Vec<String> = (0..first.coordinate_fields().len()).map(|i| format!("x{i}")).collect();
            header.push("weight".into());
            w.write_record(&header)?;
        }
        for (p, wt) in self.support.iter().zip(&self.weights) {
            let mut rec = p.coordinate_fields();
            rec.push(format!("{wt:e}"));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn weighted_orbit(sys: &ActionSystem, x: &Point, set: &[Element], mu: &QuasiHaar) -> Result<Vec<(Point, f64)>> {
    if set.is_empty() {
        return Err(Error::InvalidInput("Følner set is empty".into()));
    }
    sys.space.check(x)?;
    set.par_iter()
        .map(|t| Ok((sys.apply(t, x)?, mu.point_mass(t)?)))
        .collect()
}

pub fn empirical_measure(sys: &ActionSystem, x: &Point, set: &[Element], mu: &QuasiHaar) -> Result<EmpiricalMeasure> {
    EmpiricalMeasure::from_weighted(sys.space.clone(), weighted_orbit(sys, x, set, mu)?)
}

/// `(1 / lambda(F)) sum_{t in F} lambda({t}) phi(pi(t, x))`, summed in the
/// order of `set`.
pub fn folner_average(
    sys: &ActionSystem,
    x: &Point,
    phi: &TestFunction,
    set: &[Element],
    mu: &QuasiHaar,
) -> Result<f64> {
    let terms = weighted_orbit(sys, x, set, mu)?;
    let mut num = CompensatedSum::new();
    let mut den = CompensatedSum::new();
    for (p, w) in &terms {
        num.add(w * phi.eval(&sys.space, p)?);
        den.add(*w);
    }
    Ok(num.value() / den.value())
}

fn integrals(measure: &EmpiricalMeasure, fam: &TestFamily) -> Result<Vec<f64>> {
    fam.members.iter().map(|phi| measure.integrate(phi)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiameterRow {
    pub n: u64,
    pub diameter: f64,
    /// Basepoint indices attaining the diameter.
    pub pair: (usize, usize),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniqueErgodicityReport {
    pub folner: String,
    pub basepoints: usize,
    pub rows: Vec<DiameterRow>,
    pub final_diameter: f64,
    pub tolerance: f64,
    pub decreasing: bool,
    /// Diameters nonincreasing along the schedule and the last one within
    /// tolerance.
    pub consistent: bool,
}

/// Weak-* diameter `max_{x, z} bl(mu_{x,n}, mu_{z,n})` over the basepoints
/// for each `n` of the schedule.
#[allow(clippy::too_many_arguments)]
pub fn unique_ergodicity_probe(
    sys: &ActionSystem,
    basepoints: &[Point],
    folner: &FolnerSequence,
    fam: &TestFamily,
    schedule: &[u64],
    mu: &QuasiHaar,
    norm: Normalization,
    tolerance: f64,
) -> Result<UniqueErgodicityReport> {
    if basepoints.len() < 2 {
        return Err(Error::Precondition(format!(
            "unique-ergodicity probe needs at least 2 basepoints, got {}",
            basepoints.len()
        )));
    }
    if fam.members.is_empty() {
        return Err(Error::InvalidInput("test family is empty".into()));
    }
    check_increasing(schedule)?;
    folner.check_fits(&sys.semigroup)?;
    let scales = fam.scales(&sys.space, norm);
    let mut rows = Vec::with_capacity(schedule.len());
    for &n in schedule {
        let set = folner.set(n)?;
        let values = basepoints
            .par_iter()
            .map(|x| integrals(&empirical_measure(sys, x, &set, mu)?, fam))
            .collect::<Result<Vec<_>>>()?;
        let mut row = DiameterRow {
            n,
            diameter: 0.0,
            pair: (0, 0),
        };
        for i in 0..values.len() {
            for j in i + 1..values.len() {
                let d = values[i]
                    .iter()
                    .zip(&values[j])
                    .zip(&scales)
                    .map(|((a, b), s)| (a - b).abs() / s)
                    .fold(0.0, f64::max);
                if d > row.diameter {
                    row.diameter = d;
                    row.pair = (i, j);
                }
            }
        }
        rows.push(row);
    }
    let final_diameter = rows.last().map_or(0.0, |r| r.diameter);
    let decreasing = rows.windows(2).all(|w| w[1].diameter <= w[0].diameter);
    Ok(UniqueErgodicityReport {
        folner: folner.name().into(),
        basepoints: basepoints.len(),
        consistent: decreasing && final_diameter <= tolerance,
        rows,
        final_diameter,
        tolerance,
        decreasing,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviationRow {
    pub n: u64,
    pub deviation: f64,
    pub basepoint: usize,
    /// Følner averages for every basepoint.
    pub averages: Vec<f64>,
}

/// `max_x |A_n phi(x) - target|` along the schedule.
#[allow(clippy::too_many_arguments)]
pub fn uniform_convergence_probe(
    sys: &ActionSystem,
    basepoints: &[Point],
    folner: &FolnerSequence,
    phi: &TestFunction,
    target: f64,
    schedule: &[u64],
    mu: &QuasiHaar,
) -> Result<Vec<DeviationRow>> {
    if basepoints.is_empty() {
        return Err(Error::InvalidInput("no basepoints".into()));
    }
    check_increasing(schedule)?;
    folner.check_fits(&sys.semigroup)?;
    schedule
        .iter()
        .map(|&n| {
            let set = folner.set(n)?;
            let averages = basepoints
                .iter()
                .map(|x| folner_average(sys, x, phi, &set, mu))
                .collect::<Result<Vec<_>>>()?;
            let (basepoint, deviation) = averages
                .iter()
                .map(|a| (a - target).abs())
                .enumerate()
                .fold((0, 0.0), |best, (i, d)| if d > best.1 { (i, d) } else { best });
            Ok(DeviationRow {
                n,
                deviation,
                basepoint,
                averages,
            })
        })
        .collect()
}

fn check_increasing(schedule: &[u64]) -> Result<()> {
    if schedule.is_empty() {
        return Err(Error::Precondition("schedule is empty".into()));
    }
    if schedule[0] == 0 || schedule.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Precondition(format!(
            "schedule must be positive and strictly increasing: {schedule:?}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ShulmanVerdict {
    BoundedLooking,
    Growing,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShulmanReport {
    pub folner: String,
    /// `(n, c_n)` for `n = 1..=n_max`.
    pub constants: Vec<(u64, f64)>,
    pub max_constant: f64,
    pub verdict: ShulmanVerdict,
}

/// `c_n = lambda(U_{k<n} F_k^{-1} F_n) / lambda(F_n)` with the differences
/// taken in `Z^d`. The verdict is `Growing` when `c_{n_max}` exceeds 1.5
/// times `c_{n_max / 2}`.
pub fn shulman_constant(folner: &FolnerSequence, n_max: u64) -> Result<ShulmanReport> {
    if n_max == 0 {
        return Err(Error::InvalidInput("n_max must be at least 1".into()));
    }
    let cell = match folner {
        FolnerSequence::GridCube { dim, step } => step.powi(*dim as i32),
        FolnerSequence::Explicit { sets } => {
            let ok = sets
                .iter()
                .flatten()
                .all(|g| matches!(g, Element::ZPlus(_) | Element::Grid(_)));
            if !ok {
                return Err(Error::Unsupported(
                    "Shulman constants need a family embedded in Z^d".into(),
                ));
            }
            1.0
        }
        _ => 1.0,
    };
    let mut constants = Vec::with_capacity(n_max as usize);
    for n in 1..=n_max {
        let fn_set = coords_of(&folner.set(n)?);
        let union = match folner {
            FolnerSequence::Cube { .. } | FolnerSequence::GridCube { .. } | FolnerSequence::Jr => {
                box_union_size(folner, n)?
            }
            FolnerSequence::Explicit { .. } => {
                let mut seen: HashSet<Vec<i64>> = HashSet::new();
                for k in 1..n {
                    for h in coords_of(&folner.set(k)?) {
                        for f in &fn_set {
                            seen.insert(f.iter().zip(&h).map(|(a, b)| a - b).collect());
                        }
                    }
                }
                seen.len() as u128
            }
        };
        constants.push((n, union as f64 * cell / (fn_set.len() as f64 * cell)));
    }
    let max_constant = constants.iter().map(|c| c.1).fold(0.0, f64::max);
    let last = constants.last().expect("n_max >= 1").1;
    let mid = constants[(n_max as usize / 2).saturating_sub(1)].1;
    let verdict = if n_max >= 2 && last > 1.5 * mid {
        ShulmanVerdict::Growing
    } else {
        ShulmanVerdict::BoundedLooking
    };
    Ok(ShulmanReport {
        folner: folner.name().into(),
        constants,
        max_constant,
        verdict,
    })
}

fn coords_of(set: &[Element]) -> Vec<Vec<i64>> {
    set.iter()
        .map(|g| match g {
            Element::ZPlus(v) | Element::Grid(v) => v.iter().map(|&c| c as i64).collect(),
            _ => Vec::new(),
        })
        .collect()
}

/// Size of `U_{k<n} (F_n - F_k)` for sequences of boxes. Each difference of
/// boxes is a box; in one dimension the union is merged interval by
/// interval, and for cubes the boxes are nested.
fn box_union_size(folner: &FolnerSequence, n: u64) -> Result<u128> {
    let interval = |k: u64| -> (i64, i64) {
        match folner {
            FolnerSequence::Jr => ((k * k) as i64, (k * k + k) as i64),
            _ => (0, k as i64 - 1),
        }
    };
    let dim = match folner {
        FolnerSequence::Cube { dim } | FolnerSequence::GridCube { dim, .. } => *dim,
        _ => 1,
    };
    let (c, d) = interval(n);
    let mut pieces: Vec<(i64, i64)> = (1..n)
        .map(|k| {
            let (a, b) = interval(k);
            (c - b, d - a)
        })
        .collect();
    if pieces.is_empty() {
        return Ok(0);
    }
    if dim > 1 {
        // Cube differences grow with k; the last one contains the others.
        let (lo, hi) = *pieces.last().expect("nonempty");
        return Ok(((hi - lo + 1) as u128).pow(dim as u32));
    }
    pieces.sort();
    let mut total: u128 = 0;
    let (mut lo, mut hi) = pieces[0];
    for &(a, b) in &pieces[1..] {
        if a > hi + 1 {
            total += (hi - lo + 1) as u128;
            lo = a;
            hi = b;
        } else {
            hi = hi.max(b);
        }
    }
    total += (hi - lo + 1) as u128;
    Ok(total)
}

/// `(n, value, basepoint)` CSV rows.
pub fn write_series_csv<W: Write>(out: W, rows: &[(u64, f64, Option<usize>)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["n", "value", "basepoint"])?;
    for (n, v, b) in rows {
        w.write_record([n.to_string(), format!("{v:e}"), b.map_or(String::new(), |b| b.to_string())])?;
    }
    w.flush()?;
    Ok(())
}
