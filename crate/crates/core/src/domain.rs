//! Convex decision sets: Euclidean balls and axis-aligned boxes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{norm2, sub};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConvexDomain {
    Ball { center: Vec<f64>, radius: f64 },
    Box { lower: Vec<f64>, upper: Vec<f64> },
}

impl ConvexDomain {
    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        let d = ConvexDomain::Ball { center, radius };
        d.validate()?;
        Ok(d)
    }

    /// Ball of the given radius centered at the origin of R^dim.
    pub fn centered_ball(dim: usize, radius: f64) -> Result<Self> {
        Self::ball(vec![0.0; dim], radius)
    }

    pub fn boxed(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let d = ConvexDomain::Box { lower, upper };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ConvexDomain::Ball { center, radius } => {
                if center.is_empty() {
                    return Err(Error::Config("ball dimension must be positive".into()));
                }
                if !(radius.is_finite() && *radius > 0.0) {
                    return Err(Error::Config(format!("ball radius must be positive, got {radius}")));
                }
                if center.iter().any(|c| !c.is_finite()) {
                    return Err(Error::Config("ball center must be finite".into()));
                }
            }
            ConvexDomain::Box { lower, upper } => {
                if lower.is_empty() || lower.len() != upper.len() {
                    return Err(Error::Config("box bounds must be non-empty and equal length".into()));
                }
                for (l, u) in lower.iter().zip(upper) {
                    if !(l.is_finite() && u.is_finite() && l < u) {
                        return Err(Error::Config(format!("invalid box side [{l}, {u}]")));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self {
            ConvexDomain::Ball { center, .. } => center.len(),
            ConvexDomain::Box { lower, .. } => lower.len(),
        }
    }

    /// Upper bound D on ‖x − y‖ over the set.
    pub fn diameter(&self) -> f64 {
        match self {
            ConvexDomain::Ball { radius, .. } => 2.0 * radius,
            ConvexDomain::Box { lower, upper } => norm2(&sub(upper, lower)),
        }
    }

    pub fn center(&self) -> Vec<f64> {
        match self {
            ConvexDomain::Ball { center, .. } => center.clone(),
            ConvexDomain::Box { lower, upper } => {
                lower.iter().zip(upper).map(|(l, u)| 0.5 * (l + u)).collect()
            }
        }
    }

    /// Euclidean projection.
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        match self {
            ConvexDomain::Ball { center, radius } => {
                let offset = sub(x, center);
                let r = norm2(&offset);
                if r <= *radius {
                    x.to_vec()
                } else {
                    let s = radius / r;
                    center.iter().zip(&offset).map(|(c, o)| c + s * o).collect()
                }
            }
            ConvexDomain::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .map(|(v, (l, u))| v.clamp(*l, *u))
                .collect(),
        }
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        match self {
            ConvexDomain::Ball { center, radius } => norm2(&sub(x, center)) <= radius + tol,
            ConvexDomain::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(v, (l, u))| *v >= l - tol && *v <= u + tol),
        }
    }

    /// sup over the set of ‖x − p‖.
    pub fn max_distance_from(&self, p: &[f64]) -> f64 {
        match self {
            ConvexDomain::Ball { center, radius } => norm2(&sub(p, center)) + radius,
            ConvexDomain::Box { lower, upper } => p
                .iter()
                .zip(lower.iter().zip(upper))
                .map(|(v, (l, u))| {
                    let m = (v - l).abs().max((u - v).abs());
                    m * m
                })
                .sum::<f64>()
                .sqrt(),
        }
    }
}
