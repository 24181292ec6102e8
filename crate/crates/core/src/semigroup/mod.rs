//! Concrete semigroup families.
//!
//! Each family exposes composition, its identity and a way to enumerate
//! finite windows. The additive families ([`Semigroup::ZPlus`],
//! [`Semigroup::RPlusGrid`], [`Semigroup::ZBarPlus`]) and finite operation
//! tables are abelian; [`Semigroup::Matrix`] (nonnegative integer matrices
//! with nonzero determinant under multiplication) is the one non-abelian
//! family and is only used for semigroup-level diagnostics.
//!
//! `R_+^d` is represented on a uniform grid of step `h`: an element stores
//! the integer multiples of `h`, so composition stays exact.

mod finite;
mod measure;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tags::Tag;

pub use finite::FiniteTable;
pub use measure::{
    check_left_injective, translate_preimage_mass, Collision, InjectivityReport, QuasiHaar,
};

/// Default grid step for `R_+^d`: `2^-6`.
pub const DEFAULT_GRID_STEP: f64 = 0.015625;

/// Upper bound on the number of elements a window may enumerate.
pub const MAX_WINDOW_ELEMENTS: usize = 1 << 24;

/// A point of the one-point compactification of `Z_+`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ZBar {
    Fin(u64),
    Inf,
}

impl fmt::Display for ZBar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ZBar::Fin(n) => write!(f, "{n}"),
            ZBar::Inf => f.write_str("inf"),
        }
    }
}

impl std::ops::Add for ZBar {
    type Output = ZBar;

    fn add(self, other: ZBar) -> ZBar {
        match (self, other) {
            (ZBar::Fin(a), ZBar::Fin(b)) => a.checked_add(b).map_or(ZBar::Inf, ZBar::Fin),
            _ => ZBar::Inf,
        }
    }
}

/// Square matrix with nonnegative integer entries, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct IntMatrix {
    pub n: usize,
    pub entries: Vec<u64>,
}

impl IntMatrix {
    pub fn new(n: usize, entries: Vec<u64>) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::InvalidInput(format!(
                "matrix of size {n} needs {} entries, got {}",
                n * n,
                entries.len()
            )));
        }
        let m = IntMatrix { n, entries };
        if m.determinant() == 0 {
            return Err(Error::InvalidInput("matrix is singular".into()));
        }
        Ok(m)
    }

    pub fn identity(n: usize) -> Self {
        let mut entries = vec![0; n * n];
        for i in 0..n {
            entries[i * n + i] = 1;
        }
        IntMatrix { n, entries }
    }

    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.entries[i * self.n + j]
    }

    pub fn mul(&self, other: &IntMatrix) -> Option<IntMatrix> {
        let n = self.n;
        let mut entries = vec![0u64; n * n];
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0u64;
                for k in 0..n {
                    acc = acc.checked_add(self.get(i, k).checked_mul(other.get(k, j))?)?;
                }
                entries[i * n + j] = acc;
            }
        }
        Some(IntMatrix { n, entries })
    }

    /// Fraction-free Gaussian elimination (Bareiss).
    pub fn determinant(&self) -> i128 {
        let n = self.n;
        if n == 0 {
            return 1;
        }
        let mut a: Vec<i128> = self.entries.iter().map(|&v| v as i128).collect();
        let mut sign = 1i128;
        let mut prev = 1i128;
        for k in 0..n - 1 {
            if a[k * n + k] == 0 {
                let Some(p) = (k + 1..n).find(|&r| a[r * n + k] != 0) else {
                    return 0;
                };
                for c in 0..n {
                    a.swap(k * n + c, p * n + c);
                }
                sign = -sign;
            }
            for i in k + 1..n {
                for j in k + 1..n {
                    a[i * n + j] = (a[i * n + j] * a[k * n + k] - a[i * n + k] * a[k * n + j]) / prev;
                }
            }
            prev = a[k * n + k];
        }
        sign * a[n * n - 1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    ZPlusD,
    RPlusGrid,
    ZBarPlus,
    NonnegIntMatrix,
    FiniteTable,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Family::ZPlusD => "zplus",
            Family::RPlusGrid => "rplusgrid",
            Family::ZBarPlus => "zbarplus",
            Family::NonnegIntMatrix => "matnn",
            Family::FiniteTable => "finite",
        };
        f.write_str(s)
    }
}

/// An element of one of the shipped semigroups. The derived ordering is the
/// lexicographic payload order used for window enumeration.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Element {
    ZPlus(Vec<u64>),
    /// Integer multiples of the grid step.
    Grid(Vec<u64>),
    ZBar(ZBar),
    Matrix(IntMatrix),
    Finite(usize),
}

impl Element {
    pub fn zplus(coords: impl Into<Vec<u64>>) -> Element {
        Element::ZPlus(coords.into())
    }

    pub fn n(n: u64) -> Element {
        Element::ZPlus(vec![n])
    }

    pub fn family(&self) -> Family {
        match self {
            Element::ZPlus(_) => Family::ZPlusD,
            Element::Grid(_) => Family::RPlusGrid,
            Element::ZBar(_) => Family::ZBarPlus,
            Element::Matrix(_) => Family::NonnegIntMatrix,
            Element::Finite(_) => Family::FiniteTable,
        }
    }

    /// Coordinates as text, one field per coordinate (used for CSV output).
    pub fn coordinate_fields(&self) -> Vec<String> {
        match self {
            Element::ZPlus(v) | Element::Grid(v) => v.iter().map(u64::to_string).collect(),
            Element::ZBar(z) => vec![z.to_string()],
            Element::Matrix(m) => m.entries.iter().map(u64::to_string).collect(),
            Element::Finite(i) => vec![i.to_string()],
        }
    }

    /// Sup-norm of an additive element, `None` for the other families.
    pub fn sup_norm(&self) -> Option<u64> {
        match self {
            Element::ZPlus(v) | Element::Grid(v) => Some(v.iter().copied().max().unwrap_or(0)),
            Element::ZBar(ZBar::Fin(n)) => Some(*n),
            _ => None,
        }
    }
}

impl Element {
    /// Coordinates as a JSON array; `inf` is the string `"inf"`.
    pub fn to_json(&self) -> serde_json::Value {
        use serde_json::Value;
        match self {
            Element::ZPlus(v) | Element::Grid(v) => v.iter().map(|&c| Value::from(c)).collect(),
            Element::ZBar(ZBar::Fin(n)) => Value::Array(vec![Value::from(*n)]),
            Element::ZBar(ZBar::Inf) => Value::Array(vec![Value::from("inf")]),
            Element::Matrix(m) => m.entries.iter().map(|&c| Value::from(c)).collect(),
            Element::Finite(i) => Value::Array(vec![Value::from(*i)]),
        }
    }
}

/// `serialize_with` helpers writing elements as coordinate lists.
pub mod coords {
    use super::Element;
    use serde::ser::{SerializeSeq, Serializer};

    pub fn one<S: Serializer>(g: &Element, s: S) -> Result<S::Ok, S::Error> {
        serde::Serialize::serialize(&g.to_json(), s)
    }

    pub fn list<S: Serializer>(v: &[Element], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(v.len()))?;
        for g in v {
            seq.serialize_element(&g.to_json())?;
        }
        seq.end()
    }

    pub fn option<S: Serializer>(g: &Option<Element>, s: S) -> Result<S::Ok, S::Error> {
        serde::Serialize::serialize(&g.as_ref().map(Element::to_json), s)
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Element::ZPlus(v) | Element::Grid(v) if v.len() == 1 => write!(f, "{}", v[0]),
            Element::ZPlus(v) | Element::Grid(v) => write!(f, "{v:?}"),
            Element::ZBar(z) => write!(f, "{z}"),
            Element::Matrix(m) => write!(f, "{:?}", m.entries),
            Element::Finite(i) => write!(f, "#{i}"),
        }
    }
}

/// A semigroup family together with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum Semigroup {
    ZPlus { dim: usize },
    RPlusGrid { dim: usize, step: f64 },
    ZBarPlus,
    Matrix { n: usize },
    Finite(Arc<FiniteTable>),
}

/// Finite window of a semigroup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowSpec {
    /// `[0, width)^d` for `Z_+^d`, or `width` grid steps per axis for `R_+^d`.
    Box { width: u64 },
    /// `{0, ..., n-1, inf}` for the compactified naturals.
    Cutoff { n: u64 },
    /// All nonsingular `n x n` matrices with entries in `[0, max]`.
    MatrixEntries { max: u64 },
    /// The whole carrier of a finite table.
    All,
    Explicit(Vec<Element>),
}

impl WindowSpec {
    /// Grid window `[0, horizon)` for step `step`.
    pub fn horizon(horizon: f64, step: f64) -> WindowSpec {
        WindowSpec::Box {
            width: (horizon / step).round().max(1.0) as u64,
        }
    }

    /// A single integer describing the window size, used in reports.
    pub fn size_parameter(&self) -> u64 {
        match self {
            WindowSpec::Box { width } => *width,
            WindowSpec::Cutoff { n } => *n,
            WindowSpec::MatrixEntries { max } => *max,
            WindowSpec::All => 0,
            WindowSpec::Explicit(v) => v.len() as u64,
        }
    }
}

impl Semigroup {
    pub fn family(&self) -> Family {
        match self {
            Semigroup::ZPlus { .. } => Family::ZPlusD,
            Semigroup::RPlusGrid { .. } => Family::RPlusGrid,
            Semigroup::ZBarPlus => Family::ZBarPlus,
            Semigroup::Matrix { .. } => Family::NonnegIntMatrix,
            Semigroup::Finite(_) => Family::FiniteTable,
        }
    }

    pub fn is_abelian(&self) -> bool {
        match self {
            Semigroup::Matrix { n } => *n <= 1,
            Semigroup::Finite(t) => t.is_commutative(),
            _ => true,
        }
    }

    /// Whether the semigroup itself is compact (so it is its own gauge set).
    pub fn is_compact(&self) -> bool {
        matches!(self, Semigroup::ZBarPlus | Semigroup::Finite(_))
    }

    /// Dimension of the additive families.
    pub fn dim(&self) -> Option<usize> {
        match self {
            Semigroup::ZPlus { dim } | Semigroup::RPlusGrid { dim, .. } => Some(*dim),
            Semigroup::ZBarPlus => Some(1),
            _ => None,
        }
    }

    pub fn identity(&self) -> Option<Element> {
        match self {
            Semigroup::ZPlus { dim } => Some(Element::ZPlus(vec![0; *dim])),
            Semigroup::RPlusGrid { dim, .. } => Some(Element::Grid(vec![0; *dim])),
            Semigroup::ZBarPlus => Some(Element::ZBar(ZBar::Fin(0))),
            Semigroup::Matrix { n } => Some(Element::Matrix(IntMatrix::identity(*n))),
            Semigroup::Finite(t) => t.identity().map(Element::Finite),
        }
    }

    pub fn check_member(&self, g: &Element) -> Result<()> {
        let ok = match (self, g) {
            (Semigroup::ZPlus { dim }, Element::ZPlus(v)) => v.len() == *dim,
            (Semigroup::RPlusGrid { dim, .. }, Element::Grid(v)) => v.len() == *dim,
            (Semigroup::ZBarPlus, Element::ZBar(_)) => true,
            (Semigroup::Matrix { n }, Element::Matrix(m)) => m.n == *n,
            (Semigroup::Finite(t), Element::Finite(i)) => *i < t.len(),
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::mismatch(self.tag(), format!("{} element {g}", g.family())))
        }
    }

    pub fn compose(&self, g: &Element, h: &Element) -> Result<Element> {
        self.check_member(g)?;
        self.check_member(h)?;
        let overflow = || Error::InvalidInput(format!("composition of {g} and {h} overflows"));
        Ok(match (self, g, h) {
            (Semigroup::ZPlus { .. }, Element::ZPlus(a), Element::ZPlus(b)) => Element::ZPlus(
                a.iter()
                    .zip(b)
                    .map(|(x, y)| x.checked_add(*y))
                    .collect::<Option<_>>()
                    .ok_or_else(overflow)?,
            ),
            (Semigroup::RPlusGrid { .. }, Element::Grid(a), Element::Grid(b)) => Element::Grid(
                a.iter()
                    .zip(b)
                    .map(|(x, y)| x.checked_add(*y))
                    .collect::<Option<_>>()
                    .ok_or_else(overflow)?,
            ),
            (Semigroup::ZBarPlus, Element::ZBar(a), Element::ZBar(b)) => Element::ZBar(*a + *b),
            (Semigroup::Matrix { .. }, Element::Matrix(a), Element::Matrix(b)) => {
                Element::Matrix(a.mul(b).ok_or_else(overflow)?)
            }
            (Semigroup::Finite(t), Element::Finite(a), Element::Finite(b)) => {
                Element::Finite(t.op(*a, *b))
            }
            _ => unreachable!("membership checked above"),
        })
    }

    pub fn enumerate_window(&self, window: &WindowSpec) -> Result<Vec<Element>> {
        self.enumerate_window_limited(window, MAX_WINDOW_ELEMENTS)
    }

    /// Enumerates `window` in lexicographic payload order. The identity, when
    /// the family has one, is always part of the result.
    pub fn enumerate_window_limited(&self, window: &WindowSpec, limit: usize) -> Result<Vec<Element>> {
        let check = |count: u128| {
            if count > limit as u128 {
                Err(Error::Resource {
                    requested: count,
                    limit,
                })
            } else {
                Ok(())
            }
        };
        let bad = || {
            Error::InvalidInput(format!(
                "window {window:?} does not apply to {}",
                self.tag()
            ))
        };
        match (self, window) {
            (Semigroup::ZPlus { dim } | Semigroup::RPlusGrid { dim, .. }, WindowSpec::Box { width }) => {
                if *width == 0 {
                    return Err(Error::InvalidInput("window width must be positive".into()));
                }
                check((*width as u128).saturating_pow(*dim as u32))?;
                let grid = matches!(self, Semigroup::RPlusGrid { .. });
                Ok(box_points(*dim, *width)
                    .into_iter()
                    .map(|v| if grid { Element::Grid(v) } else { Element::ZPlus(v) })
                    .collect())
            }
            (Semigroup::ZBarPlus, WindowSpec::Cutoff { n }) => {
                if *n == 0 {
                    return Err(Error::InvalidInput("cutoff must be positive".into()));
                }
                check(*n as u128 + 1)?;
                Ok((0..*n)
                    .map(|k| Element::ZBar(ZBar::Fin(k)))
                    .chain(std::iter::once(Element::ZBar(ZBar::Inf)))
                    .collect())
            }
            (Semigroup::Matrix { n }, WindowSpec::MatrixEntries { max }) => {
                if *max == 0 {
                    return Err(Error::InvalidInput("matrix entry bound must be positive".into()));
                }
                check((*max as u128 + 1).saturating_pow((*n * *n) as u32))?;
                Ok(box_points(n * n, max + 1)
                    .into_iter()
                    .map(|entries| IntMatrix { n: *n, entries })
                    .filter(|m| m.determinant() != 0)
                    .map(Element::Matrix)
                    .collect())
            }
            (Semigroup::Finite(t), WindowSpec::All) => {
                check(t.len() as u128)?;
                Ok((0..t.len()).map(Element::Finite).collect())
            }
            (_, WindowSpec::Explicit(items)) => {
                check(items.len() as u128 + 1)?;
                let mut out = Vec::with_capacity(items.len() + 1);
                for g in items {
                    self.check_member(g)?;
                    out.push(g.clone());
                }
                if let Some(e) = self.identity() {
                    out.push(e);
                }
                out.sort();
                out.dedup();
                Ok(out)
            }
            _ => Err(bad()),
        }
    }

    /// The natural window of the family at size parameter `size`.
    pub fn default_window(&self, size: u64) -> WindowSpec {
        match self {
            Semigroup::ZPlus { .. } | Semigroup::RPlusGrid { .. } => WindowSpec::Box { width: size },
            Semigroup::ZBarPlus => WindowSpec::Cutoff { n: size },
            Semigroup::Matrix { .. } => WindowSpec::MatrixEntries { max: size },
            Semigroup::Finite(_) => WindowSpec::All,
        }
    }

    /// Returns a pair `(g, h)` with `g h != h g`, if the window contains one.
    pub fn commutativity_witness(&self, window: &[Element]) -> Result<Option<(Element, Element)>> {
        for (i, g) in window.iter().enumerate() {
            for h in &window[i + 1..] {
                if self.compose(g, h)? != self.compose(h, g)? {
                    return Ok(Some((g.clone(), h.clone())));
                }
            }
        }
        Ok(None)
    }

    /// Returns a triple violating associativity, if the window contains one.
    pub fn associativity_witness(
        &self,
        window: &[Element],
    ) -> Result<Option<(Element, Element, Element)>> {
        for a in window {
            for b in window {
                let ab = self.compose(a, b)?;
                for c in window {
                    if self.compose(&ab, c)? != self.compose(a, &self.compose(b, c)?)? {
                        return Ok(Some((a.clone(), b.clone(), c.clone())));
                    }
                }
            }
        }
        Ok(None)
    }

    pub fn tag(&self) -> String {
        match self {
            Semigroup::ZPlus { dim } => format!("zplus:d={dim}"),
            Semigroup::RPlusGrid { dim, step } if *dim == 1 => format!("rplusgrid:h={step}"),
            Semigroup::RPlusGrid { dim, step } => format!("rplusgrid:h={step},d={dim}"),
            Semigroup::ZBarPlus => "zbarplus".to_string(),
            Semigroup::Matrix { n } => format!("matnn:n={n}"),
            Semigroup::Finite(t) => format!("finite:{}", t.name()),
        }
    }

    /// Parses a config tag such as `zplus:d=2` or `zbarplus:N=100`. Window
    /// bounds carried by the tag (`T`, `N`, `W`, `max`) are returned as the
    /// default window.
    pub fn parse_tag(s: &str) -> Result<(Semigroup, Option<WindowSpec>)> {
        let tag = Tag::parse(s)?;
        match tag.name.as_str() {
            "zplus" => {
                let dim = tag.get_or("d", 1usize)?;
                if dim == 0 {
                    return Err(Error::Config("zplus needs d >= 1".into()));
                }
                let w = tag.get::<u64>("W")?.map(|width| WindowSpec::Box { width });
                Ok((Semigroup::ZPlus { dim }, w))
            }
            "rplusgrid" => {
                let step = tag.get_or("h", DEFAULT_GRID_STEP)?;
                let dim = tag.get_or("d", 1usize)?;
                if !(step > 0.0) || dim == 0 {
                    return Err(Error::Config("rplusgrid needs h > 0 and d >= 1".into()));
                }
                let w = tag.get::<f64>("T")?.map(|t| WindowSpec::horizon(t, step));
                Ok((Semigroup::RPlusGrid { dim, step }, w))
            }
            "zbarplus" => {
                let w = tag.get::<u64>("N")?.map(|n| WindowSpec::Cutoff { n });
                Ok((Semigroup::ZBarPlus, w))
            }
            "matnn" => {
                let n = tag.get_or("n", 2usize)?;
                let w = tag.get::<u64>("max")?.map(|max| WindowSpec::MatrixEntries { max });
                Ok((Semigroup::Matrix { n }, w))
            }
            "finite" => {
                let path = tag
                    .raw
                    .as_deref()
                    .filter(|p| !p.is_empty())
                    .ok_or_else(|| Error::Config("finite: needs a table path".into()))?;
                let table = FiniteTable::builtin(path).map_or_else(
                    || FiniteTable::from_path(path),
                    Ok,
                )?;
                Ok((Semigroup::Finite(Arc::new(table)), Some(WindowSpec::All)))
            }
            other => Err(Error::Config(format!("unknown semigroup `{other}`"))),
        }
    }
}

/// Lexicographic enumeration of `[0, width)^dim` (last coordinate fastest).
fn box_points(dim: usize, width: u64) -> Vec<Vec<u64>> {
    let total = (width as usize).pow(dim as u32);
    let mut out = Vec::with_capacity(total);
    let mut cur = vec![0u64; dim];
    loop {
        out.push(cur.clone());
        let mut k = dim;
        loop {
            if k == 0 {
                return out;
            }
            k -= 1;
            cur[k] += 1;
            if cur[k] < width {
                break;
            }
            cur[k] = 0;
        }
    }
}
