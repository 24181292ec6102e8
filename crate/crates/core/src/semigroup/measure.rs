use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::{Element, Semigroup, WindowSpec, ZBar};
use crate::error::{Error, Result};

/// Translation-invariant (but not necessarily Haar) reference measure on a
/// semigroup: `lambda(K) = lambda(g K)` for finite `K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum QuasiHaar {
    Counting,
    /// Counting measure scaled by the cell volume `step^dim`.
    GridLebesgue { step: f64, dim: usize },
    /// Per-element weights on a finite table.
    FiniteWeights { weights: Vec<f64> },
}

impl QuasiHaar {
    /// The natural quasi-Haar measure of a family.
    pub fn for_semigroup(sg: &Semigroup) -> QuasiHaar {
        match sg {
            Semigroup::RPlusGrid { dim, step } => QuasiHaar::GridLebesgue {
                step: *step,
                dim: *dim,
            },
            _ => QuasiHaar::Counting,
        }
    }

    /// Weights must be nonnegative with at least one strictly positive entry.
    pub fn finite_weights(weights: Vec<f64>) -> Result<QuasiHaar> {
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidInput("weights must be finite and nonnegative".into()));
        }
        if !weights.iter().any(|&w| w > 0.0) {
            return Err(Error::InvalidInput("at least one weight must be positive".into()));
        }
        Ok(QuasiHaar::FiniteWeights { weights })
    }

    /// Mass of a single element.
    pub fn point_mass(&self, g: &Element) -> Result<f64> {
        match (self, g) {
            (QuasiHaar::Counting, _) => Ok(1.0),
            (QuasiHaar::GridLebesgue { step, dim }, Element::Grid(v)) if v.len() == *dim => {
                Ok(step.powi(*dim as i32))
            }
            (QuasiHaar::FiniteWeights { weights }, Element::Finite(i)) => weights
                .get(*i)
                .copied()
                .ok_or_else(|| Error::InvalidInput(format!("no weight for element {i}"))),
            _ => Err(Error::mismatch(format!("{self:?}"), g.to_string())),
        }
    }

    /// `lambda(S)`; repeated elements count once.
    pub fn mass(&self, set: &[Element]) -> Result<f64> {
        let distinct: BTreeSet<&Element> = set.iter().collect();
        match self {
            QuasiHaar::Counting => Ok(distinct.len() as f64),
            QuasiHaar::GridLebesgue { step, dim } => {
                for g in &distinct {
                    self.point_mass(g)?;
                }
                Ok(distinct.len() as f64 * step.powi(*dim as i32))
            }
            QuasiHaar::FiniteWeights { .. } => {
                let masses = distinct
                    .iter()
                    .map(|g| self.point_mass(g))
                    .collect::<Result<Vec<_>>>()?;
                Ok(crate::numeric::compensated_sum(masses))
            }
        }
    }
}

/// `lambda(L_g^{-1} S)` where `L_g(t) = g t`, computed by enumerating a window
/// large enough to hold the whole preimage.
pub fn translate_preimage_mass(
    sg: &Semigroup,
    mu: &QuasiHaar,
    g: &Element,
    set: &[Element],
) -> Result<f64> {
    sg.check_member(g)?;
    for s in set {
        sg.check_member(s)?;
    }
    let targets: BTreeSet<&Element> = set.iter().collect();
    if targets.is_empty() {
        return Ok(0.0);
    }
    let window = match sg {
        Semigroup::ZPlus { .. } | Semigroup::RPlusGrid { .. } => {
            let max = targets.iter().filter_map(|s| s.sup_norm()).max().unwrap_or(0);
            WindowSpec::Box { width: max + 1 }
        }
        Semigroup::ZBarPlus => {
            if *g == Element::ZBar(ZBar::Inf) && targets.contains(&Element::ZBar(ZBar::Inf)) {
                return Err(Error::Resolution(
                    "preimage of inf under translation by inf is the whole semigroup".into(),
                ));
            }
            let max = targets.iter().filter_map(|s| s.sup_norm()).max().unwrap_or(0);
            WindowSpec::Cutoff { n: max + 1 }
        }
        Semigroup::Matrix { .. } => {
            // For a nonsingular nonnegative g every column has a positive
            // entry, so each entry of t is bounded by the entries of g t.
            let max = targets
                .iter()
                .filter_map(|s| match s {
                    Element::Matrix(m) => m.entries.iter().copied().max(),
                    _ => None,
                })
                .max()
                .unwrap_or(1)
                .max(1);
            WindowSpec::MatrixEntries { max }
        }
        Semigroup::Finite(_) => WindowSpec::All,
    };
    let mut preimage = Vec::new();
    for t in sg.enumerate_window(&window)? {
        if targets.contains(&sg.compose(g, &t)?) {
            preimage.push(t);
        }
    }
    mu.mass(&preimage)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Collision {
    pub g: Element,
    pub first: Element,
    pub second: Element,
    pub image: Element,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InjectivityReport {
    pub injective: bool,
    pub translations_checked: usize,
    pub collision: Option<Collision>,
}

/// Maximum number of translations `g` examined by [`check_left_injective`].
const INJECTIVITY_SAMPLE: usize = 256;

/// Checks that `t -> g t` is injective on the window for a deterministic
/// sample of translations `g` drawn from the same window.
pub fn check_left_injective(sg: &Semigroup, window: &WindowSpec) -> Result<InjectivityReport> {
    let elems = sg.enumerate_window(window)?;
    let stride = elems.len().div_ceil(INJECTIVITY_SAMPLE).max(1);
    let mut sample: Vec<&Element> = elems.iter().step_by(stride).collect();
    // The last element of a compactified window (inf) is the interesting one.
    if let Some(last) = elems.last() {
        if sample.last() != Some(&last) {
            sample.push(last);
        }
    }
    let mut checked = 0;
    for g in sample {
        checked += 1;
        let mut seen: HashMap<Element, &Element> = HashMap::with_capacity(elems.len());
        for t in &elems {
            let image = sg.compose(g, t)?;
            if let Some(prev) = seen.get(&image) {
                return Ok(InjectivityReport {
                    injective: false,
                    translations_checked: checked,
                    collision: Some(Collision {
                        g: g.clone(),
                        first: (*prev).clone(),
                        second: t.clone(),
                        image,
                    }),
                });
            }
            seen.insert(image, t);
        }
    }
    Ok(InjectivityReport {
        injective: true,
        translations_checked: checked,
        collision: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semigroup::{FiniteTable, DEFAULT_GRID_STEP};
    use std::sync::Arc;

    fn ints(v: impl IntoIterator<Item = u64>) -> Vec<Element> {
        v.into_iter().map(Element::n).collect()
    }

    #[test]
    fn counting_mass_examples() {
        let mu = QuasiHaar::Counting;
        assert_eq!(mu.mass(&ints([0, 1, 2])).unwrap(), 3.0);
        assert_eq!(mu.mass(&[]).unwrap(), 0.0);
        assert_eq!(mu.mass(&ints([1, 1, 2])).unwrap(), 2.0);
    }

    #[test]
    fn grid_lebesgue_unit_interval() {
        let mu = QuasiHaar::GridLebesgue { step: 0.25, dim: 1 };
        let s: Vec<Element> = (0..4).map(|k| Element::Grid(vec![k])).collect();
        assert_eq!(mu.mass(&s).unwrap(), 1.0);
        assert!(mu.mass(&ints([0])).is_err());
    }

    #[test]
    fn finite_weights_validation() {
        assert!(QuasiHaar::finite_weights(vec![0.0, 0.0]).is_err());
        assert!(QuasiHaar::finite_weights(vec![-1.0, 2.0]).is_err());
        let mu = QuasiHaar::finite_weights(vec![0.5, 0.0, 2.0]).unwrap();
        assert_eq!(mu.mass(&[Element::Finite(0), Element::Finite(2)]).unwrap(), 2.5);
        assert!(mu.mass(&[Element::Finite(3)]).is_err());
    }

    #[test]
    fn preimage_mass_examples() {
        let z = Semigroup::ZPlus { dim: 1 };
        let mu = QuasiHaar::Counting;
        let s = ints([0, 1, 2]);
        assert_eq!(translate_preimage_mass(&z, &mu, &Element::n(1), &s).unwrap(), 2.0);
        assert_eq!(translate_preimage_mass(&z, &mu, &Element::n(0), &s).unwrap(), 3.0);

        let z2 = Semigroup::ZPlus { dim: 2 };
        let square: Vec<Element> = z2.enumerate_window(&WindowSpec::Box { width: 3 }).unwrap();
        let g = Element::zplus([1, 0]);
        assert_eq!(translate_preimage_mass(&z2, &mu, &g, &square).unwrap(), 6.0);
    }

    #[test]
    fn preimage_mass_zbar() {
        let zb = Semigroup::ZBarPlus;
        let mu = QuasiHaar::Counting;
        let s = vec![Element::ZBar(ZBar::Fin(2)), Element::ZBar(ZBar::Inf)];
        // t with 1 + t in {2, inf}: t = 1 or t = inf.
        let g = Element::ZBar(ZBar::Fin(1));
        assert_eq!(translate_preimage_mass(&zb, &mu, &g, &s).unwrap(), 2.0);
        let err = translate_preimage_mass(&zb, &mu, &Element::ZBar(ZBar::Inf), &s).unwrap_err();
        assert!(matches!(err, Error::Resolution(_)));
        let fin_only = vec![Element::ZBar(ZBar::Fin(2))];
        assert_eq!(
            translate_preimage_mass(&zb, &mu, &Element::ZBar(ZBar::Inf), &fin_only).unwrap(),
            0.0
        );
    }

    #[test]
    fn injectivity_examples() {
        let z = Semigroup::ZPlus { dim: 2 };
        assert!(check_left_injective(&z, &WindowSpec::Box { width: 6 }).unwrap().injective);

        let report = check_left_injective(&Semigroup::ZBarPlus, &WindowSpec::Cutoff { n: 6 }).unwrap();
        assert!(!report.injective);
        let c = report.collision.unwrap();
        assert_eq!(c.g, Element::ZBar(ZBar::Inf));
        assert_eq!(c.image, Element::ZBar(ZBar::Inf));

        let m = Semigroup::Matrix { n: 2 };
        assert!(check_left_injective(&m, &WindowSpec::MatrixEntries { max: 2 }).unwrap().injective);

        let trunc = Semigroup::Finite(Arc::new(FiniteTable::truncated_addition(3)));
        assert!(!check_left_injective(&trunc, &WindowSpec::All).unwrap().injective);
    }

    #[test]
    fn translation_invariance_on_windows() {
        // Quasi-Haar property: lambda(g K) = lambda(K) for finite K.
        let z = Semigroup::ZPlus { dim: 2 };
        let k = z.enumerate_window(&WindowSpec::Box { width: 5 }).unwrap();
        for g in z.enumerate_window(&WindowSpec::Box { width: 4 }).unwrap() {
            let gk: Vec<Element> = k.iter().map(|t| z.compose(&g, t).unwrap()).collect();
            assert_eq!(QuasiHaar::Counting.mass(&gk).unwrap(), QuasiHaar::Counting.mass(&k).unwrap());
        }
        let grid = Semigroup::RPlusGrid { dim: 1, step: DEFAULT_GRID_STEP };
        let mu = QuasiHaar::for_semigroup(&grid);
        let k = grid.enumerate_window(&WindowSpec::Box { width: 64 }).unwrap();
        let g = Element::Grid(vec![37]);
        let gk: Vec<Element> = k.iter().map(|t| grid.compose(&g, t).unwrap()).collect();
        assert_eq!(mu.mass(&gk).unwrap(), mu.mass(&k).unwrap());
        assert_eq!(mu.mass(&k).unwrap(), 1.0);
    }
}
