//! Shared discretization axes.

use crate::error::{Error, Result};

/// Fixed-width temperature axis. Indices are absolute (`floor(t / width)`),
/// clamped to the range covering `[min, max]`; edges are lower-inclusive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TempAxis {
    pub width: f64,
    pub min: f64,
    pub max: f64,
}

impl TempAxis {
    pub fn new(width: f64, min: f64, max: f64) -> Result<Self> {
        let axis = Self { width, min, max };
        axis.validate()?;
        Ok(axis)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.width > 0.0 && self.width.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "temperature bin width must be > 0, got {}",
                self.width
            )));
        }
        if !(self.min.is_finite() && self.max.is_finite() && self.min < self.max) {
            return Err(Error::InvalidParams("temperature axis needs min < max".into()));
        }
        Ok(())
    }

    pub fn first_index(&self) -> i64 {
        (self.min / self.width).floor() as i64
    }

    pub fn last_index(&self) -> i64 {
        ((self.max / self.width).ceil() as i64 - 1).max(self.first_index())
    }

    /// Number of bins on the axis.
    pub fn len(&self) -> usize {
        (self.last_index() - self.first_index() + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Absolute bin index of `t`.
    pub fn absolute_index(&self, t: f64) -> i64 {
        let raw = (t / self.width).floor();
        let raw = if raw.is_nan() { self.first_index() as f64 } else { raw };
        (raw as i64).clamp(self.first_index(), self.last_index())
    }

    /// Zero-based bin index of `t` within the axis.
    pub fn index(&self, t: f64) -> u32 {
        (self.absolute_index(t) - self.first_index()) as u32
    }
}

/// Draw-volume classes: class `c` holds volumes in `(edges[c-1], edges[c]]`,
/// class 0 holds volumes `<= edges[0]`.
#[derive(Debug, Clone, PartialEq)]
pub struct VolumeClasses {
    pub edges: Vec<f64>,
}

impl Default for VolumeClasses {
    /// `{0}`, `(0, 10]`, `(10, 30]`, `> 30` liters.
    fn default() -> Self {
        Self {
            edges: vec![0.0, 10.0, 30.0],
        }
    }
}

impl VolumeClasses {
    pub fn validate(&self) -> Result<()> {
        if self.edges.windows(2).any(|w| w[0] >= w[1]) || self.edges.iter().any(|e| !e.is_finite())
        {
            return Err(Error::InvalidParams(
                "volume class edges must be finite and strictly increasing".into(),
            ));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.edges.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn class_of(&self, volume: f64) -> u32 {
        self.edges.iter().filter(|&&e| volume > e).count() as u32
    }
}

/// Lower-inclusive class of `x` given strictly increasing `edges`.
pub(crate) fn lower_inclusive_class(edges: &[f64], x: f64) -> u32 {
    edges.iter().filter(|&&e| x >= e).count() as u32
}
