//! Finite-resolution evidence for Bohr almost periodicity.
//!
//! The ε-error period set of `x` is
//! `P(eps) = { tau : d(pi(g, x), pi(tau g, x)) < eps for all g }`, and `x` is
//! Bohr almost periodic when every `P(eps)` is left syndetic (`P L = G` for a
//! compact `L`). Everything here works on finite windows, so results are
//! evidence at a resolution, never proofs.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::orbit_table::OrbitTable;
use crate::semigroup::{coords, Element, Semigroup, WindowSpec, ZBar};
use crate::space::{epsilon_net, orbit, ActionSystem, Point};

/// Default bound on the syndeticity gauge searched by [`syndeticity_witness`].
pub const DEFAULT_MAX_GAUGE: u64 = 64;
/// Default number of rungs `eps 2^-j` in the equicontinuity ladder.
pub const DEFAULT_LADDER_DEPTH: u32 = 60;
/// `delta_hat < eps * DEFAULT_COLLAPSE_RATIO` counts as a collapsed modulus.
pub const DEFAULT_COLLAPSE_RATIO: f64 = 1.0 / 1048576.0;

/// `max_{g in window} d(pi(g, x), pi(tau g, x))`.
pub fn period_defect(sys: &ActionSystem, x: &Point, tau: &Element, window: &WindowSpec) -> Result<f64> {
    sys.semigroup.check_member(tau)?;
    let elems = sys.semigroup.enumerate_window(window)?;
    let table = OrbitTable::for_products(sys, x, std::slice::from_ref(tau), &elems)?;
    let t = table.index(tau)?;
    let mut worst: f64 = 0.0;
    for g in &elems {
        let gi = table.index(g)?;
        worst = worst.max(sys.space.distance(table.point(gi), table.point(table.product(t, gi)))?);
    }
    Ok(worst)
}

/// Period defects of every candidate over a fixed window.
#[derive(Debug, Clone, Serialize)]
pub struct DefectTable {
    pub window: WindowSpec,
    #[serde(serialize_with = "coords::list")]
    pub candidates: Vec<Element>,
    pub defects: Vec<f64>,
}

pub fn defect_table(
    sys: &ActionSystem,
    x: &Point,
    window: &WindowSpec,
    candidate_window: &WindowSpec,
) -> Result<DefectTable> {
    let elems = sys.semigroup.enumerate_window(window)?;
    let candidates = sys.semigroup.enumerate_window(candidate_window)?;
    let table = OrbitTable::for_products(sys, x, &candidates, &elems)?;
    let gis = elems.iter().map(|g| table.index(g)).collect::<Result<Vec<_>>>()?;
    let space = &sys.space;
    let defects = candidates
        .par_iter()
        .map(|tau| {
            let t = table.index(tau)?;
            let mut worst: f64 = 0.0;
            for &g in &gis {
                worst = worst.max(space.distance(table.point(g), table.point(table.product(t, g)))?);
            }
            Ok(worst)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DefectTable {
        window: window.clone(),
        candidates,
        defects,
    })
}

impl DefectTable {
    /// Candidates with defect strictly below `eps`, in candidate order.
    pub fn period_set(&self, eps: f64) -> Result<EpsilonPeriodSet> {
        check_eps(eps)?;
        let (members, defects) = self
            .candidates
            .iter()
            .zip(&self.defects)
            .filter(|(_, &d)| d < eps)
            .map(|(g, &d)| (g.clone(), d))
            .unzip();
        Ok(EpsilonPeriodSet {
            eps,
            window: self.window.clone(),
            members,
            defects,
        })
    }

    /// CSV with the candidate coordinates followed by its defect.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        if let Some(first) = self.candidates.first() {
            let mut header: Vec<String> = (0..first.coordinate_fields().len()).map(|i| format!("tau{i}")).collect();
            header.push("defect".into());
            w.write_record(&header)?;
        }
        for (tau, d) in self.candidates.iter().zip(&self.defects) {
            let mut rec = tau.coordinate_fields();
            rec.push(format!("{d:e}"));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("eps must be positive and finite, got {eps}")))
    }
}

/// Window approximation of `P(eps)`. `defects[i]` is the measured defect of
/// `members[i]`; it is empty for hand-built sets.
#[derive(Debug, Clone, Serialize)]
pub struct EpsilonPeriodSet {
    pub eps: f64,
    pub window: WindowSpec,
    #[serde(serialize_with = "coords::list")]
    pub members: Vec<Element>,
    pub defects: Vec<f64>,
}

impl EpsilonPeriodSet {
    pub fn from_members(eps: f64, window: WindowSpec, members: Vec<Element>) -> Self {
        EpsilonPeriodSet {
            eps,
            window,
            members,
            defects: Vec::new(),
        }
    }

    pub fn contains(&self, g: &Element) -> bool {
        self.members.contains(g)
    }
}

pub fn epsilon_period_set(
    sys: &ActionSystem,
    x: &Point,
    eps: f64,
    window: &WindowSpec,
    candidate_window: &WindowSpec,
) -> Result<EpsilonPeriodSet> {
    check_eps(eps)?;
    defect_table(sys, x, window, candidate_window)?.period_set(eps)
}

/// Family-specific compact gauge sets `L`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Gauge {
    /// `[0, side)^d`.
    Box { side: u64 },
    /// The first `len` elements in window order.
    Prefix { len: u64 },
    /// `L = G`, available when `G` is compact.
    WholeSemigroup,
}

impl Gauge {
    fn size(self) -> u64 {
        match self {
            Gauge::Box { side } => side,
            Gauge::Prefix { len } => len,
            Gauge::WholeSemigroup => u64::MAX,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SyndeticityWitness {
    /// Smallest gauge that works, `None` on failure.
    pub gauge: Option<Gauge>,
    /// The part of the window required to be covered by `P L`.
    pub covered: Option<WindowSpec>,
    /// First element left uncovered by the largest gauge tried.
    #[serde(serialize_with = "coords::option")]
    pub uncovered: Option<Element>,
    pub max_gauge: u64,
}

impl SyndeticityWitness {
    pub fn success(&self) -> bool {
        self.gauge.is_some()
    }
}

/// Searches the smallest gauge `L` with `P L` covering the window shrunk by
/// `L`: boxes `[0, l)^d` on additive families, prefixes on the compact ones
/// (falling back to `L = G` there when `e` is a member).
pub fn syndeticity_witness(
    pset: &EpsilonPeriodSet,
    sg: &Semigroup,
    window: &WindowSpec,
    max_gauge: u64,
) -> Result<SyndeticityWitness> {
    for g in &pset.members {
        sg.check_member(g)?;
    }
    let fail = |uncovered| SyndeticityWitness {
        gauge: None,
        covered: None,
        uncovered,
        max_gauge,
    };
    match (sg, window) {
        (Semigroup::ZPlus { dim } | Semigroup::RPlusGrid { dim, .. }, WindowSpec::Box { width }) => {
            let mut uncovered = sg.identity();
            for l in 1..=max_gauge.min(width.saturating_sub(1)) {
                match first_uncovered_box(&pset.members, *dim, width - l, l) {
                    None => {
                        return Ok(SyndeticityWitness {
                            gauge: Some(Gauge::Box { side: l }),
                            covered: Some(WindowSpec::Box { width: width - l }),
                            uncovered: None,
                            max_gauge,
                        })
                    }
                    Some(coords) => {
                        uncovered = Some(match sg {
                            Semigroup::ZPlus { .. } => Element::ZPlus(coords),
                            _ => Element::Grid(coords),
                        })
                    }
                }
            }
            Ok(fail(uncovered))
        }
        (Semigroup::ZBarPlus, WindowSpec::Cutoff { n }) => {
            let has_inf = pset.contains(&Element::ZBar(ZBar::Inf));
            let fins: Vec<u64> = pset
                .members
                .iter()
                .filter_map(|g| match g {
                    Element::ZBar(ZBar::Fin(a)) => Some(*a),
                    _ => None,
                })
                .collect();
            let mut uncovered = None;
            for l in 1..=max_gauge.min(*n) {
                let shrunk = n - l;
                let mut covered = vec![false; shrunk as usize];
                for &a in &fins {
                    for t in a..(a + l).min(shrunk) {
                        covered[t as usize] = true;
                    }
                }
                uncovered = match covered.iter().position(|c| !c) {
                    Some(t) => Some(Element::ZBar(ZBar::Fin(t as u64))),
                    None if !has_inf => Some(Element::ZBar(ZBar::Inf)),
                    None => {
                        return Ok(SyndeticityWitness {
                            gauge: Some(Gauge::Prefix { len: l }),
                            covered: Some(WindowSpec::Cutoff { n: shrunk }),
                            uncovered: None,
                            max_gauge,
                        })
                    }
                };
            }
            Ok(compact_fallback(pset, sg, window, max_gauge, uncovered))
        }
        (Semigroup::Finite(table), WindowSpec::All) => {
            let n = table.len();
            let mut uncovered = None;
            for l in 1..=max_gauge.min(n as u64) {
                let mut covered = vec![false; n];
                for g in &pset.members {
                    let Element::Finite(a) = g else { unreachable!("membership checked") };
                    for b in 0..l as usize {
                        covered[table.op(*a, b)] = true;
                    }
                }
                match covered.iter().position(|c| !c) {
                    Some(i) => uncovered = Some(Element::Finite(i)),
                    None => {
                        return Ok(SyndeticityWitness {
                            gauge: Some(Gauge::Prefix { len: l }),
                            covered: Some(WindowSpec::All),
                            uncovered: None,
                            max_gauge,
                        })
                    }
                }
            }
            Ok(compact_fallback(pset, sg, window, max_gauge, uncovered))
        }
        (Semigroup::Matrix { .. }, _) => Err(Error::Unsupported(
            "syndeticity gauges are only defined for the abelian families".into(),
        )),
        _ => Err(Error::InvalidInput(format!("window {window:?} does not fit {}", sg.tag()))),
    }
}

/// On a compact `G`, `P G = G` as soon as `e` is in `P`.
fn compact_fallback(
    pset: &EpsilonPeriodSet,
    sg: &Semigroup,
    window: &WindowSpec,
    max_gauge: u64,
    uncovered: Option<Element>,
) -> SyndeticityWitness {
    let has_identity = sg.identity().is_some_and(|e| pset.contains(&e));
    if has_identity {
        SyndeticityWitness {
            gauge: Some(Gauge::WholeSemigroup),
            covered: Some(window.clone()),
            uncovered: None,
            max_gauge,
        }
    } else {
        SyndeticityWitness {
            gauge: None,
            covered: None,
            uncovered: uncovered.or_else(|| sg.identity()),
            max_gauge,
        }
    }
}

/// First point of `[0, shrunk)^dim` (lexicographic) not of the form
/// `tau + l` with `tau` a member and `l in [0, side)^dim`.
fn first_uncovered_box(members: &[Element], dim: usize, shrunk: u64, side: u64) -> Option<Vec<u64>> {
    let total = (shrunk as usize).pow(dim as u32);
    let mut covered = vec![false; total];
    let offsets = (side as usize).pow(dim as u32);
    for tau in members {
        let (Element::ZPlus(t) | Element::Grid(t)) = tau else { continue };
        if t.iter().any(|&c| c >= shrunk) {
            continue;
        }
        'offsets: for o in 0..offsets {
            let mut rem = o as u64;
            let mut idx = 0u64;
            let mut scale = 1u64;
            for axis in (0..dim).rev() {
                let c = t[axis] + rem % side;
                rem /= side;
                if c >= shrunk {
                    continue 'offsets;
                }
                idx += c * scale;
                scale *= shrunk;
            }
            covered[idx as usize] = true;
        }
    }
    let i = covered.iter().position(|c| !c)?;
    let mut coords = vec![0; dim];
    let mut rem = i as u64;
    for c in coords.iter_mut().rev() {
        *c = rem % shrunk;
        rem /= shrunk;
    }
    Some(coords)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CertificateStatus {
    CertifiedAtResolution,
    RefutedAtResolution,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CertifyOptions {
    pub max_gauge: u64,
    pub ladder_depth: u32,
    pub collapse_ratio: f64,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions {
            max_gauge: DEFAULT_MAX_GAUGE,
            ladder_depth: DEFAULT_LADDER_DEPTH,
            collapse_ratio: DEFAULT_COLLAPSE_RATIO,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BohrCertificate {
    pub status: CertificateStatus,
    pub reason: String,
    pub eps: f64,
    pub windows: Vec<WindowSpec>,
    pub gauge_history: Vec<Option<Gauge>>,
    pub member_counts: Vec<usize>,
    /// Members and defects on the last window.
    #[serde(serialize_with = "coords::list")]
    pub members: Vec<Element>,
    pub defect_table: DefectTable,
    pub uncovered: Option<SyndeticityWitness>,
    pub equicontinuity: EquicontinuityEstimate,
}

/// Certifies, refutes or gives up on Bohr almost periodicity of `x` at
/// resolution `eps` along a schedule of growing windows.
///
/// Certified: every window has a gauge and the gauge does not grow over the
/// last half of the schedule. Refuted: some window needs a gauge beyond
/// `max_gauge`, or the equicontinuity modulus on the last window collapses.
pub fn certify_bohr(
    sys: &ActionSystem,
    x: &Point,
    eps: f64,
    schedule: &[WindowSpec],
    opts: &CertifyOptions,
) -> Result<BohrCertificate> {
    check_eps(eps)?;
    check_schedule(schedule)?;
    let mut gauge_history = Vec::with_capacity(schedule.len());
    let mut member_counts = Vec::with_capacity(schedule.len());
    let mut failure = None;
    let mut last = None;
    for window in schedule {
        let table = defect_table(sys, x, window, window)?;
        let pset = table.period_set(eps)?;
        let witness = syndeticity_witness(&pset, &sys.semigroup, window, opts.max_gauge)?;
        gauge_history.push(witness.gauge);
        member_counts.push(pset.members.len());
        if !witness.success() && failure.is_none() {
            failure = Some(witness);
        }
        last = Some((table, pset));
    }
    let (defect_table, pset) = last.expect("schedule is nonempty");
    let window = schedule.last().expect("schedule is nonempty");
    let orbit_points = orbit(sys, x, window)?.points();
    let net = epsilon_net(&sys.space, &orbit_points, eps)?;
    let equicontinuity = equicontinuity_modulus(sys, &net, eps, window, opts.ladder_depth)?;

    let tail = &gauge_history[schedule.len() / 2..];
    let stable = tail
        .windows(2)
        .all(|w| matches!((w[0], w[1]), (Some(a), Some(b)) if b.size() <= a.size()));
    let (status, reason) = if let Some(w) = &failure {
        (
            CertificateStatus::RefutedAtResolution,
            format!("no gauge up to {} covers the window", w.max_gauge),
        )
    } else if equicontinuity.delta_hat < eps * opts.collapse_ratio {
        (
            CertificateStatus::RefutedAtResolution,
            format!("equicontinuity modulus collapsed to {:e}", equicontinuity.delta_hat),
        )
    } else if stable {
        (
            CertificateStatus::CertifiedAtResolution,
            "gauge stable over the last half of the schedule".into(),
        )
    } else {
        (
            CertificateStatus::Inconclusive,
            "gauge still growing over the last half of the schedule".into(),
        )
    };
    Ok(BohrCertificate {
        status,
        reason,
        eps,
        windows: schedule.to_vec(),
        gauge_history,
        member_counts,
        members: pset.members,
        defect_table,
        uncovered: failure,
        equicontinuity,
    })
}

fn check_schedule(schedule: &[WindowSpec]) -> Result<()> {
    if schedule.is_empty() {
        return Err(Error::Precondition("window schedule is empty".into()));
    }
    for pair in schedule.windows(2) {
        let same_kind = std::mem::discriminant(&pair[0]) == std::mem::discriminant(&pair[1]);
        if !same_kind || pair[1].size_parameter() <= pair[0].size_parameter() {
            return Err(Error::Precondition(format!(
                "window schedule must grow strictly: {:?} then {:?}",
                pair[0], pair[1]
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairRecord {
    pub x: Point,
    pub z: Point,
    pub initial: f64,
    pub propagated: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquicontinuityEstimate {
    pub eps: f64,
    pub delta_hat: f64,
    pub window: WindowSpec,
    /// Number of pairs whose propagation was evaluated.
    pub sample_size: usize,
    /// Worst violation at the rung just above `delta_hat`, or the pair with
    /// the largest propagation at `delta_hat` if the top rung holds.
    pub worst_pair: Option<PairRecord>,
}

/// Largest `delta = eps 2^-j` (`j <= ladder_depth`) such that every pair with
/// `d(x, z) < delta` keeps `max_g d(pi(g, x), pi(g, z)) <= eps`. The pairs are
/// the net pairs plus one probe per net point at distance just under `delta`.
/// Returns `delta_hat = 0` if no rung holds.
pub fn equicontinuity_modulus(
    sys: &ActionSystem,
    net: &[Point],
    eps: f64,
    window: &WindowSpec,
    ladder_depth: u32,
) -> Result<EquicontinuityEstimate> {
    check_eps(eps)?;
    if net.is_empty() {
        return Err(Error::InvalidInput("equicontinuity needs a nonempty net".into()));
    }
    let elems = sys.semigroup.enumerate_window(window)?;
    let propagate = |p: &Point, q: &Point| -> Result<f64> {
        let mut worst: f64 = 0.0;
        for g in &elems {
            worst = worst.max(sys.space.distance(&sys.apply(g, p)?, &sys.apply(g, q)?)?);
        }
        Ok(worst)
    };

    let mut candidates = Vec::new();
    for i in 0..net.len() {
        for j in i + 1..net.len() {
            let initial = sys.space.distance(&net[i], &net[j])?;
            if initial < eps {
                candidates.push((i, j, initial));
            }
        }
    }
    let close_pairs = candidates
        .into_par_iter()
        .map(|(i, j, initial)| {
            Ok(PairRecord {
                x: net[i].clone(),
                z: net[j].clone(),
                initial,
                propagated: propagate(&net[i], &net[j])?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut sample_size = close_pairs.len();

    let mut last_violation: Option<PairRecord> = None;
    for rung in 0..=ladder_depth {
        let delta = eps * (-(rung as f64)).exp2();
        let mut pairs: Vec<PairRecord> = close_pairs.iter().filter(|p| p.initial < delta).cloned().collect();
        let probes = net
            .par_iter()
            .map(|p| {
                let Some(z) = sys.space.neighbor_within(p, delta)? else {
                    return Ok(None);
                };
                Ok(Some(PairRecord {
                    x: p.clone(),
                    initial: sys.space.distance(p, &z)?,
                    propagated: propagate(p, &z)?,
                    z,
                }))
            })
            .collect::<Result<Vec<_>>>()?;
        for probe in probes.into_iter().flatten() {
            sample_size += 1;
            pairs.push(probe);
        }
        let worst = pairs.into_iter().max_by(|a, b| a.propagated.total_cmp(&b.propagated));
        match worst {
            Some(w) if w.propagated > eps => last_violation = Some(w),
            w => {
                return Ok(EquicontinuityEstimate {
                    eps,
                    delta_hat: delta,
                    window: window.clone(),
                    sample_size,
                    worst_pair: last_violation.or(w),
                })
            }
        }
    }
    Ok(EquicontinuityEstimate {
        eps,
        delta_hat: 0.0,
        window: window.clone(),
        sample_size,
        worst_pair: last_violation,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CauchyReport {
    /// `max_{n, m >= tail} d(pi(t_n s_n, y), pi(t_m s_m, y))`.
    pub product_defect: f64,
    pub t_tail_diameter: f64,
    pub s_tail_diameter: f64,
    pub tail: usize,
    pub terms: usize,
}

/// Checks that products of two Cauchy sequences push forward to a Cauchy
/// sequence. Both pushed-forward tails (from index `tail`) must have diameter
/// at most `threshold`, otherwise a precondition error names the sequence.
pub fn cauchy_product_check(
    sys: &ActionSystem,
    y: &Point,
    seq_t: &[Element],
    seq_s: &[Element],
    tail: usize,
    threshold: f64,
) -> Result<CauchyReport> {
    if seq_t.len() != seq_s.len() {
        return Err(Error::InvalidInput(format!(
            "sequences differ in length: {} and {}",
            seq_t.len(),
            seq_s.len()
        )));
    }
    if tail >= seq_t.len() {
        return Err(Error::InvalidInput(format!("tail {tail} is past the {} terms", seq_t.len())));
    }
    sys.space.check(y)?;
    let push = |seq: &[Element]| -> Result<Vec<Point>> { seq[tail..].iter().map(|g| sys.apply(g, y)).collect() };
    let diameter = |pts: &[Point]| -> Result<f64> {
        let mut worst: f64 = 0.0;
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                worst = worst.max(sys.space.distance(&pts[i], &pts[j])?);
            }
        }
        Ok(worst)
    };
    let t_tail_diameter = diameter(&push(seq_t)?)?;
    let s_tail_diameter = diameter(&push(seq_s)?)?;
    for (name, d) in [("t", t_tail_diameter), ("s", s_tail_diameter)] {
        if d > threshold {
            return Err(Error::Precondition(format!(
                "{name}-sequence tail diameter {d:e} exceeds the threshold {threshold:e} by {:e}",
                d - threshold
            )));
        }
    }
    let products = seq_t[tail..]
        .iter()
        .zip(&seq_s[tail..])
        .map(|(t, s)| sys.semigroup.compose(t, s))
        .collect::<Result<Vec<_>>>()?;
    let product_defect = diameter(&products.iter().map(|g| sys.apply(g, y)).collect::<Result<Vec<_>>>()?)?;
    Ok(CauchyReport {
        product_defect,
        t_tail_diameter,
        s_tail_diameter,
        tail,
        terms: seq_t.len(),
    })
}

/// Largest distance from a probe point to the orbit sample; a small value is
/// consistent with a dense orbit. Purely diagnostic.
pub fn orbit_density_gap(sys: &ActionSystem, y: &Point, window: &WindowSpec, probes: &[Point]) -> Result<f64> {
    let points = orbit(sys, y, window)?.points();
    let gaps = probes
        .par_iter()
        .map(|p| {
            let mut best = f64::INFINITY;
            for q in &points {
                best = best.min(sys.space.distance(p, q)?);
            }
            Ok(best)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(gaps.into_iter().fold(0.0, f64::max))
}
