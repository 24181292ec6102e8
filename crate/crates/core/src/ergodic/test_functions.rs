use std::f64::consts::TAU;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::EmpiricalMeasure;
use crate::error::{Error, Result};
use crate::numeric::wrap_unit;
use crate::space::{Point, Space};

/// A bounded function on a space with declared Lipschitz and sup bounds.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestFunction {
    Constant { value: f64 },
    /// `cos(2 pi k.x)` on a torus (or the binary circle).
    Cos { k: Vec<i64> },
    /// `sin(2 pi k.x)`.
    Sin { k: Vec<i64> },
    /// `d(x, point)`.
    DistanceTo { point: Point },
    /// `min(1, d(x, point) / radius)`.
    Landmark { point: Point, radius: f64 },
    /// Indicator of the arc `[start, end)` (wrapping) on one torus axis. Its
    /// endpoints must be null sets for the measures it is used against.
    Arc { axis: usize, start: f64, end: f64 },
}

fn circle_coords(x: &Point) -> Option<Vec<f64>> {
    match x {
        Point::Torus(c) => Some(c.clone()),
        Point::Binary(b) => Some(vec![b.value()]),
        _ => None,
    }
}

impl TestFunction {
    pub fn name(&self) -> String {
        match self {
            TestFunction::Constant { value } => format!("const({value})"),
            TestFunction::Cos { k } => format!("cos{k:?}"),
            TestFunction::Sin { k } => format!("sin{k:?}"),
            TestFunction::DistanceTo { point } => format!("dist({:?})", point.coordinate_fields()),
            TestFunction::Landmark { point, radius } => format!("landmark({:?},{radius})", point.coordinate_fields()),
            TestFunction::Arc { axis, start, end } => format!("arc{axis}[{start},{end})"),
        }
    }

    pub fn eval(&self, space: &Space, x: &Point) -> Result<f64> {
        let phase = |k: &[i64]| -> Result<f64> {
            let c = circle_coords(x)
                .filter(|c| c.len() == k.len())
                .ok_or_else(|| Error::mismatch(format!("{}-dimensional circle point", k.len()), format!("{x:?}")))?;
            Ok(TAU * wrap_unit(k.iter().zip(&c).map(|(&ki, ci)| ki as f64 * ci).sum::<f64>()))
        };
        match self {
            TestFunction::Constant { value } => Ok(*value),
            TestFunction::Cos { k } => Ok(phase(k)?.cos()),
            TestFunction::Sin { k } => Ok(phase(k)?.sin()),
            TestFunction::DistanceTo { point } => space.distance(x, point),
            TestFunction::Landmark { point, radius } => Ok((space.distance(x, point)? / radius).min(1.0)),
            TestFunction::Arc { axis, start, end } => {
                let c = circle_coords(x)
                    .and_then(|c| c.get(*axis).copied())
                    .ok_or_else(|| Error::mismatch(format!("torus with axis {axis}"), format!("{x:?}")))?;
                let inside = if start <= end {
                    *start <= c && c < *end
                } else {
                    c >= *start || c < *end
                };
                Ok(if inside { 1.0 } else { 0.0 })
            }
        }
    }

    /// Declared Lipschitz constant; infinite for arc indicators.
    pub fn lipschitz(&self) -> f64 {
        match self {
            TestFunction::Constant { .. } => 0.0,
            TestFunction::Cos { k } | TestFunction::Sin { k } => TAU * k.iter().map(|v| v.unsigned_abs() as f64).sum::<f64>(),
            TestFunction::DistanceTo { .. } => 1.0,
            TestFunction::Landmark { radius, .. } => 1.0 / radius,
            TestFunction::Arc { .. } => f64::INFINITY,
        }
    }

    pub fn sup_bound(&self, space: &Space) -> f64 {
        match self {
            TestFunction::Constant { value } => value.abs(),
            TestFunction::DistanceTo { .. } => space.diameter(),
            _ => 1.0,
        }
    }
}

/// How differences of integrals are scaled in [`bl_distance`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Divide by `max(1, sup |phi|)`.
    #[default]
    Sup,
    /// Divide by `max(1, Lip(phi), sup |phi|)`.
    BoundedLipschitz,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestFamily {
    pub members: Vec<TestFunction>,
}

impl TestFamily {
    /// Real and imaginary parts of the characters `e^{2 pi i k.x}` with
    /// `1 <= |k|_inf <= k_max`, one `k` from each pair `{k, -k}`.
    pub fn characters(dim: usize, k_max: i64) -> TestFamily {
        let side = (2 * k_max + 1) as usize;
        let mut members = Vec::new();
        for i in 0..side.pow(dim as u32) {
            let mut rem = i;
            let mut k = vec![0i64; dim];
            for v in k.iter_mut().rev() {
                *v = (rem % side) as i64 - k_max;
                rem /= side;
            }
            // Keep k whose first nonzero coordinate is positive.
            if k.iter().find(|&&v| v != 0).is_some_and(|&v| v > 0) {
                members.push(TestFunction::Cos { k: k.clone() });
                members.push(TestFunction::Sin { k });
            }
        }
        TestFamily { members }
    }

    /// `count` landmark functions at points drawn from the space's sampler.
    pub fn landmarks<R: Rng + ?Sized>(space: &Space, count: usize, radius: f64, rng: &mut R) -> Result<TestFamily> {
        if !(radius > 0.0) {
            return Err(Error::InvalidInput(format!("landmark radius must be positive, got {radius}")));
        }
        Ok(TestFamily {
            members: (0..count)
                .map(|_| TestFunction::Landmark {
                    point: space.sample(rng),
                    radius,
                })
                .collect(),
        })
    }

    /// `k_max` characters on tori and the binary circle, landmarks elsewhere.
    pub fn default_for<R: Rng + ?Sized>(space: &Space, k_max: i64, rng: &mut R) -> Result<TestFamily> {
        match space {
            Space::Torus { k } => Ok(Self::characters(*k, k_max)),
            Space::BinaryCircle => Ok(Self::characters(1, k_max)),
            _ => Self::landmarks(space, (2 * k_max) as usize, 0.25 * space.diameter().max(1e-9), rng),
        }
    }

    pub(crate) fn scales(&self, space: &Space, norm: Normalization) -> Vec<f64> {
        self.members
            .iter()
            .map(|phi| {
                let base = phi.sup_bound(space).max(1.0);
                match norm {
                    Normalization::Sup => base,
                    Normalization::BoundedLipschitz => base.max(phi.lipschitz()),
                }
            })
            .collect()
    }
}

/// `max_phi |int phi dmu1 - int phi dmu2| / scale(phi)`.
pub fn bl_distance(
    mu1: &EmpiricalMeasure,
    mu2: &EmpiricalMeasure,
    fam: &TestFamily,
    norm: Normalization,
) -> Result<f64> {
    if fam.members.is_empty() {
        return Err(Error::InvalidInput("test family is empty".into()));
    }
    if mu1.space != mu2.space {
        return Err(Error::mismatch(mu1.space.tag(), mu2.space.tag()));
    }
    let scales = fam.scales(&mu1.space, norm);
    let mut worst: f64 = 0.0;
    for (phi, s) in fam.members.iter().zip(scales) {
        worst = worst.max((mu1.integrate(phi)? - mu2.integrate(phi)?).abs() / s);
    }
    Ok(worst)
}
