//! Memoised orbit points `pi(h, x)` for every product `h = a b` of two
//! element lists, with O(1) lookup of the product index.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::semigroup::{Element, Semigroup, ZBar, MAX_WINDOW_ELEMENTS};
use crate::space::{ActionSystem, Point};

enum Layout {
    /// Dense box `[0, width)^dim`; indices add without carries.
    Additive { dim: usize, width: u64 },
    /// `{0, ..., cutoff-1}` followed by `inf` at index `cutoff`.
    ZBar { cutoff: u64 },
    Hashed {
        semigroup: Semigroup,
        elements: Vec<Element>,
        index: HashMap<Element, usize>,
    },
}

pub(crate) struct OrbitTable {
    layout: Layout,
    points: Vec<Point>,
}

impl OrbitTable {
    /// Table covering `left`, `right` and every product `l r`.
    pub fn for_products(sys: &ActionSystem, x: &Point, left: &[Element], right: &[Element]) -> Result<Self> {
        sys.space.check(x)?;
        let sg = &sys.semigroup;
        let max_coord = |v: &[Element]| v.iter().filter_map(Element::sup_norm).max().unwrap_or(0);
        let layout = match sg {
            Semigroup::ZPlus { dim } | Semigroup::RPlusGrid { dim, .. } => {
                let width = max_coord(left) + max_coord(right) + 1;
                let total = (width as u128).saturating_pow(*dim as u32);
                if total > MAX_WINDOW_ELEMENTS as u128 {
                    return Err(Error::Resource {
                        requested: total,
                        limit: MAX_WINDOW_ELEMENTS,
                    });
                }
                Layout::Additive { dim: *dim, width }
            }
            Semigroup::ZBarPlus => Layout::ZBar {
                cutoff: max_coord(left) + max_coord(right) + 1,
            },
            _ => {
                let mut elements: Vec<Element> = left.iter().chain(right).cloned().collect();
                for a in left {
                    for b in right {
                        elements.push(sg.compose(a, b)?);
                    }
                }
                elements.sort();
                elements.dedup();
                let index = elements.iter().cloned().enumerate().map(|(i, e)| (e, i)).collect();
                Layout::Hashed {
                    semigroup: sg.clone(),
                    elements,
                    index,
                }
            }
        };
        let elements: Vec<Element> = match &layout {
            Layout::Additive { dim, width } => {
                let n = (*width as usize).pow(*dim as u32);
                let grid = matches!(sg, Semigroup::RPlusGrid { .. });
                (0..n)
                    .map(|i| {
                        let coords = unravel(i as u64, *dim, *width);
                        if grid {
                            Element::Grid(coords)
                        } else {
                            Element::ZPlus(coords)
                        }
                    })
                    .collect()
            }
            Layout::ZBar { cutoff } => (0..*cutoff)
                .map(|k| Element::ZBar(ZBar::Fin(k)))
                .chain(std::iter::once(Element::ZBar(ZBar::Inf)))
                .collect(),
            Layout::Hashed { elements, .. } => elements.clone(),
        };
        let points = elements
            .par_iter()
            .map(|g| sys.apply(g, x))
            .collect::<Result<Vec<_>>>()?;
        Ok(OrbitTable { layout, points })
    }

    pub fn index(&self, g: &Element) -> Result<usize> {
        let missing = || Error::InvalidInput(format!("{g} is outside the orbit table"));
        match (&self.layout, g) {
            (Layout::Additive { dim, width }, Element::ZPlus(v) | Element::Grid(v)) if v.len() == *dim => {
                let mut idx = 0u64;
                for &c in v.iter() {
                    if c >= *width {
                        return Err(missing());
                    }
                    idx = idx * width + c;
                }
                Ok(idx as usize)
            }
            (Layout::ZBar { cutoff }, Element::ZBar(ZBar::Fin(n))) if n < cutoff => Ok(*n as usize),
            (Layout::ZBar { cutoff }, Element::ZBar(ZBar::Inf)) => Ok(*cutoff as usize),
            (Layout::Hashed { index, .. }, g) => index.get(g).copied().ok_or_else(missing),
            _ => Err(missing()),
        }
    }

    /// Index of `a b` given the indices of `a` and `b`; both must come from
    /// the lists the table was built for.
    #[inline]
    pub fn product(&self, a: usize, b: usize) -> usize {
        match &self.layout {
            Layout::Additive { .. } => a + b,
            Layout::ZBar { cutoff } => {
                let inf = *cutoff as usize;
                if a == inf || b == inf {
                    inf
                } else {
                    a + b
                }
            }
            Layout::Hashed {
                semigroup,
                elements,
                index,
            } => {
                let p = semigroup
                    .compose(&elements[a], &elements[b])
                    .expect("members of the table compose");
                index[&p]
            }
        }
    }

    #[inline]
    pub fn point(&self, i: usize) -> &Point {
        &self.points[i]
    }
}

fn unravel(mut i: u64, dim: usize, width: u64) -> Vec<u64> {
    let mut coords = vec![0; dim];
    for c in coords.iter_mut().rev() {
        *c = i % width;
        i /= width;
    }
    coords
}
