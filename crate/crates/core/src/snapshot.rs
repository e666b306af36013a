//! Self-describing JSON snapshots of a support function.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::body::SupportFunction;
use crate::error::{Error, Result};
use crate::spectral::SphereGrid;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub dimension: usize,
    pub degree: usize,
    pub time: f64,
    pub coefficients: Vec<f64>,
}

impl Snapshot {
    pub fn capture(body: &SupportFunction, time: f64) -> Self {
        Self {
            dimension: body.dim(),
            degree: body.grid().degree(),
            time,
            coefficients: body.coefficients().to_vec(),
        }
    }

    /// Rebuild the body on `grid`, or on a fresh grid of the recorded degree.
    pub fn body(&self, grid: Option<Arc<SphereGrid>>) -> Result<SupportFunction> {
        let grid = match grid {
            Some(g) => {
                if g.dim() != self.dimension {
                    return Err(Error::Dimension {
                        expected: g.dim(),
                        found: self.dimension,
                    });
                }
                g
            }
            None => Arc::new(SphereGrid::new(self.dimension, self.degree)?),
        };
        SupportFunction::from_coefficients(&self.coefficients, grid)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let grid = Arc::new(SphereGrid::sphere(12));
        let body = SupportFunction::ellipsoid(grid.clone(), &[1.0, 1.1, 1.3]).unwrap();
        let snap = Snapshot::capture(&body, 0.1 + 0.2);
        let back = Snapshot::from_json(&snap.to_json().unwrap()).unwrap();
        assert_eq!(snap, back);
        let rebuilt = back.body(Some(grid)).unwrap();
        assert_eq!(rebuilt.values(), body.values());
        assert_eq!(back.body(None).unwrap().coefficients(), body.coefficients());
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let snap = Snapshot {
            dimension: 2,
            degree: 4,
            time: 0.0,
            coefficients: vec![1.0],
        };
        let circle = Arc::new(SphereGrid::circle(4));
        assert!(matches!(snap.body(Some(circle)), Err(Error::Dimension { .. })));
    }
}
