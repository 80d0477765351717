use crate::error::{Error, Result};

/// Whether a design variable takes real or integer values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VarKind {
    Continuous,
    Integer,
}

/// Axis-aligned box `lo <= y <= hi`.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Bounds {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::Invalid(format!(
                "bounds need matching nonempty lo/hi, got {} and {}",
                lo.len(),
                hi.len()
            )));
        }
        for (j, (l, h)) in lo.iter().zip(&hi).enumerate() {
            if !(l.is_finite() && h.is_finite() && l < h) {
                return Err(Error::Invalid(format!("bound {j}: need lo < hi, got [{l}, {h}]")));
            }
        }
        Ok(Bounds { lo, hi })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn width(&self, j: usize) -> f64 {
        self.hi[j] - self.lo[j]
    }

    /// Componentwise clamp, the projection onto the box.
    pub fn clamp(&self, y: &[f64]) -> Vec<f64> {
        y.iter()
            .enumerate()
            .map(|(j, &v)| v.clamp(self.lo[j], self.hi[j]))
            .collect()
    }

    pub fn contains(&self, y: &[f64]) -> bool {
        y.len() == self.dim()
            && y
                .iter()
                .enumerate()
                .all(|(j, &v)| v >= self.lo[j] && v <= self.hi[j])
    }

    /// Maps `y` into the unit cube.
    pub fn to_unit(&self, y: &[f64]) -> Vec<f64> {
        y.iter()
            .enumerate()
            .map(|(j, &v)| (v - self.lo[j]) / self.width(j))
            .collect()
    }

    pub fn from_unit(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(j, &v)| self.lo[j] + v * self.width(j))
            .collect()
    }

    pub(crate) fn check_point(&self, y: &[f64], what: &str) -> Result<()> {
        if self.contains(y) {
            Ok(())
        } else {
            Err(Error::Invalid(format!(
                "{what} {y:?} is outside the box lo={:?} hi={:?}",
                self.lo, self.hi
            )))
        }
    }
}
