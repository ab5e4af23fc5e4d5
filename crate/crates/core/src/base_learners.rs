//! Optimistic online mirror descent base learners, one per curvature
//! family, with g_{t−1} as the optimism vector and g₀ = 0.

use serde::{Deserialize, Serialize};

use crate::domain::ConvexDomain;
use crate::error::{Error, Result};
use crate::linalg::{dist_sq, dot, norm2_sq, sub};
use crate::numerics::{euclidean_omd_step, MetricSolver, PsdMatrix};
use crate::pea_core::ceil_log2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Curvature {
    Convex { gamma: f64 },
    ExpConcave { alpha: f64, gamma: f64 },
    StronglyConvex { mu: f64, gamma: f64 },
}

impl Curvature {
    fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        match *self {
            Curvature::Convex { gamma } if ok(gamma) => Ok(()),
            Curvature::ExpConcave { alpha, gamma } if ok(alpha) && gamma.is_finite() && gamma > 0.0 => Ok(()),
            Curvature::StronglyConvex { mu, gamma } if mu.is_finite() && mu > 0.0 && ok(gamma) => Ok(()),
            c => Err(Error::Config(format!("invalid curvature parameters {c:?}"))),
        }
    }
}

#[derive(Clone)]
pub struct BaseLearner {
    curvature: Curvature,
    domain: ConvexDomain,
    diameter: f64,
    point: Vec<f64>,
    aux: Vec<f64>,
    last_gradient: Vec<f64>,
    variation: f64,
    metric: Option<PsdMatrix>,
    solver: Option<MetricSolver>,
    rounds: u64,
}

impl std::fmt::Debug for BaseLearner {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BaseLearner")
            .field("curvature", &self.curvature)
            .field("point", &self.point)
            .field("rounds", &self.rounds)
            .finish()
    }
}

impl BaseLearner {
    pub fn new(curvature: Curvature, domain: ConvexDomain) -> Result<Self> {
        curvature.validate()?;
        domain.validate()?;
        let d = domain.dim();
        let center = domain.center();
        let metric = match curvature {
            Curvature::ExpConcave { gamma, .. } => Some(PsdMatrix::scaled_identity(d, gamma)),
            _ => None,
        };
        Ok(Self {
            curvature,
            diameter: domain.diameter(),
            domain,
            point: center.clone(),
            aux: center,
            last_gradient: vec![0.0; d],
            variation: 0.0,
            metric,
            solver: None,
            rounds: 0,
        })
    }

    pub fn curvature(&self) -> Curvature {
        self.curvature
    }

    pub fn domain(&self) -> &ConvexDomain {
        &self.domain
    }

    /// x_t from the latest step.
    pub fn point(&self) -> &[f64] {
        &self.point
    }

    /// x'_t, the anchor of the next step.
    pub fn anchor(&self) -> &[f64] {
        &self.aux
    }

    /// V̄ over the gradients fed so far.
    pub fn variation(&self) -> f64 {
        self.variation
    }

    pub fn metric(&self) -> Option<&PsdMatrix> {
        self.metric.as_ref()
    }

    pub fn rounds(&self) -> u64 {
        self.rounds
    }

    /// Euclidean step size of the current round; `None` for the metric learner.
    pub fn learning_rate(&self) -> Option<f64> {
        let t = (self.rounds + 1) as f64;
        match self.curvature {
            Curvature::Convex { gamma } => {
                let cap = if gamma > 0.0 { 1.0 / gamma } else { f64::INFINITY };
                Some((self.diameter / (1.0 + self.variation).sqrt()).min(cap))
            }
            Curvature::StronglyConvex { mu, gamma } => Some(2.0 / (gamma + mu * t)),
            Curvature::ExpConcave { .. } => None,
        }
    }

    fn half_step(&mut self, gradient: &[f64]) -> Result<Vec<f64>> {
        if let Some(eta) = self.learning_rate() {
            return Ok(euclidean_omd_step(gradient, &self.aux, eta, &self.domain));
        }
        if self.solver.is_none() {
            self.solver = Some(MetricSolver::new(self.metric.clone().expect("metric learner"))?);
        }
        self.solver.as_mut().unwrap().step(gradient, &self.aux, &self.domain)
    }

    /// Optimistic half-step with g_{t−1}; returns x_t.
    pub fn step(&mut self) -> Result<&[f64]> {
        let g = self.last_gradient.clone();
        self.point = self.half_step(&g)?;
        Ok(&self.point)
    }

    /// Second half-step with the observed g_t, then folds g_t into the
    /// learning-rate state.
    pub fn update(&mut self, gradient: &[f64]) -> Result<()> {
        if gradient.len() != self.point.len() {
            return Err(Error::Domain("gradient dimension mismatch".into()));
        }
        if gradient.iter().any(|g| !g.is_finite()) {
            return Err(Error::Numerical("non-finite gradient".into()));
        }
        self.aux = self.half_step(gradient)?;
        let diff = sub(gradient, &self.last_gradient);
        self.variation += norm2_sq(&diff);
        if let (Curvature::ExpConcave { alpha, .. }, Some(m)) = (self.curvature, self.metric.as_mut()) {
            m.add_rank_one(&diff, 0.5 * alpha);
        }
        self.solver = None;
        self.last_gradient = gradient.to_vec();
        self.rounds += 1;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SurrogateKind {
    Linear,
    ExpConcave { alpha: f64 },
    StronglyConvex { mu: f64 },
}

/// Surrogate built from one gradient g_t observed at the ensemble point x_t.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateLoss<'a> {
    pub kind: SurrogateKind,
    pub anchor: &'a [f64],
    pub gradient: &'a [f64],
}

impl SurrogateLoss<'_> {
    pub fn value(&self, x: &[f64]) -> f64 {
        let lin = dot(self.gradient, x);
        match self.kind {
            SurrogateKind::Linear => lin,
            SurrogateKind::ExpConcave { alpha } => {
                let s = dot(self.gradient, &sub(x, self.anchor));
                lin + 0.5 * alpha * s * s
            }
            SurrogateKind::StronglyConvex { mu } => lin + 0.5 * mu * dist_sq(x, self.anchor),
        }
    }

    pub fn gradient_at(&self, x: &[f64]) -> Vec<f64> {
        match self.kind {
            SurrogateKind::Linear => self.gradient.to_vec(),
            SurrogateKind::ExpConcave { alpha } => {
                let s = alpha * dot(self.gradient, &sub(x, self.anchor));
                self.gradient.iter().map(|g| g + s * g).collect()
            }
            SurrogateKind::StronglyConvex { mu } => self
                .gradient
                .iter()
                .zip(x.iter().zip(self.anchor))
                .map(|(g, (a, b))| g + mu * (a - b))
                .collect(),
        }
    }

    pub fn eval(&self, x: &[f64]) -> (f64, Vec<f64>) {
        (self.value(x), self.gradient_at(x))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RosterKind {
    Standard,
    Sea,
    SingleGradient,
}

/// Constants of the single-gradient ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SingleGradientConstants {
    pub c2: f64,
    pub lambda: f64,
    pub c0: f64,
    pub gamma: f64,
}

impl SingleGradientConstants {
    /// Smallest values meeting every constraint jointly.
    pub fn minimal(diameter: f64, smoothness: f64, lipschitz: f64) -> Self {
        let (d, l, g) = (diameter, smoothness, lipschitz);
        let c2 = c2(d, l, g);
        let lambda = (4.0 * d * d * l * l).max(2.0 * c2);
        let c0 = (4.0 * d.powi(4) * l * l).max(0.5 * c2 * d * d);
        let gamma = 4.0 * lambda + 32.0 * g.powi(4);
        Self { c2, lambda, c0, gamma }
    }

    /// Lists every violated constraint.
    pub fn validate(&self, diameter: f64, smoothness: f64, lipschitz: f64) -> Result<()> {
        let (d, l, g) = (diameter, smoothness, lipschitz);
        let c2 = c2(d, l, g);
        let checks = [
            ("C0 >= 4 D^4 L^2", self.c0 >= 4.0 * d.powi(4) * l * l),
            ("gamma >= 4 lambda", self.gamma >= 4.0 * self.lambda),
            ("lambda >= 4 D^2 L^2", self.lambda >= 4.0 * d * d * l * l),
            ("C0 >= C2 D^2 / 2", self.c0 >= 0.5 * c2 * d * d),
            ("lambda >= 2 C2", self.lambda >= 2.0 * c2),
            ("gamma >= 4 lambda + 32 G^4", self.gamma >= 4.0 * self.lambda + 32.0 * g.powi(4)),
            ("C0 > 0", self.c0 > 0.0),
        ];
        let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
        if failed.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(format!("single-gradient constants violate: {}", failed.join(", "))))
        }
    }
}

/// C₂ = 4L² + 32G²D²L² + 8G⁴.
pub fn c2(diameter: f64, smoothness: f64, lipschitz: f64) -> f64 {
    let (d, l, g) = (diameter, smoothness, lipschitz);
    4.0 * l * l + 32.0 * g * g * d * d * l * l + 8.0 * g.powi(4)
}

pub struct Roster {
    pub learners: Vec<BaseLearner>,
    /// Surrogate each learner is fed in single-gradient mode.
    pub surrogates: Vec<SurrogateKind>,
    pub convex_index: usize,
    pub constants: Option<SingleGradientConstants>,
}

fn dyadic(m: u32) -> impl Iterator<Item = f64> + Clone {
    (1..=m as i32).map(|k| 2f64.powi(-k))
}

/// Builds the learner set for a horizon. `smoothness` is L, `lipschitz` G;
/// single-gradient mode needs both, the others need L.
pub fn roster_build(
    kind: RosterKind,
    horizon: u64,
    domain: &ConvexDomain,
    smoothness: Option<f64>,
    lipschitz: Option<f64>,
    constants: Option<SingleGradientConstants>,
) -> Result<Roster> {
    if horizon < 2 {
        return Err(Error::Config("roster needs a horizon of at least 2".into()));
    }
    let l = smoothness.ok_or_else(|| Error::Config("smoothness L is required".into()))?;
    if !(l.is_finite() && l >= 0.0) {
        return Err(Error::Config(format!("smoothness must be non-negative, got {l}")));
    }
    let m = ceil_log2(horizon);
    let mut learners = Vec::new();
    let mut surrogates = Vec::new();
    let mut push = |c: Curvature, s: SurrogateKind| -> Result<()> {
        learners.push(BaseLearner::new(c, domain.clone())?);
        surrogates.push(s);
        Ok(())
    };
    let mut chosen = None;
    match kind {
        RosterKind::Standard | RosterKind::Sea => {
            let floor = if kind == RosterKind::Standard { 2.0 * l * l } else { 16.0 * l * l };
            push(Curvature::Convex { gamma: l }, SurrogateKind::Linear)?;
            for alpha in dyadic(m) {
                for k in 1..=m as i32 {
                    let gamma = floor.max(1.0 + alpha * 4f64.powi(k));
                    push(Curvature::ExpConcave { alpha, gamma }, SurrogateKind::ExpConcave { alpha })?;
                }
            }
            for mu in dyadic(m) {
                push(Curvature::StronglyConvex { mu, gamma: 0.0 }, SurrogateKind::StronglyConvex { mu })?;
            }
        }
        RosterKind::SingleGradient => {
            let g = lipschitz.ok_or_else(|| Error::Config("Lipschitz constant G is required".into()))?;
            if !(g.is_finite() && g > 0.0) {
                return Err(Error::Config(format!("Lipschitz constant must be positive, got {g}")));
            }
            let d = domain.diameter();
            let c = constants.unwrap_or_else(|| SingleGradientConstants::minimal(d, l, g));
            c.validate(d, l, g)?;
            chosen = Some(c);
            push(Curvature::Convex { gamma: c.gamma }, SurrogateKind::Linear)?;
            for alpha in dyadic(m) {
                push(Curvature::ExpConcave { alpha, gamma: c.gamma }, SurrogateKind::ExpConcave { alpha })?;
            }
            for mu in dyadic(m) {
                push(Curvature::StronglyConvex { mu, gamma: c.gamma }, SurrogateKind::StronglyConvex { mu })?;
            }
        }
    }
    Ok(Roster { learners, surrogates, convex_index: 0, constants: chosen })
}

/// Both sides of the trajectory gradient-variation inequality
/// Σ‖∇f_t(x_t) − ∇f_{t−1}(x_{t−1})‖² ≤ 2(V_T + c) + 2L²Σ‖x_{t+1} − x_t‖²,
/// with c = G (`rhs_linear`) and c = G² (`rhs_squared`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VariationCheck {
    pub lhs: f64,
    pub rhs_linear: f64,
    pub rhs_squared: f64,
}

impl VariationCheck {
    pub fn linear_holds(&self) -> bool {
        self.lhs <= self.rhs_linear + 1e-9 * self.rhs_linear.abs().max(1.0)
    }

    pub fn squared_holds(&self) -> bool {
        self.lhs <= self.rhs_squared + 1e-9 * self.rhs_squared.abs().max(1.0)
    }
}

/// `gradients[t]` is ∇f_t at `points[t]`; f₀ ≡ 0 is implicit.
pub fn variation_check(
    gradients: &[Vec<f64>],
    points: &[Vec<f64>],
    variation: f64,
    lipschitz: f64,
    smoothness: f64,
) -> VariationCheck {
    let mut lhs = 0.0;
    let zero = vec![0.0; gradients.first().map_or(0, Vec::len)];
    let mut prev = &zero;
    for g in gradients {
        lhs += dist_sq(g, prev);
        prev = g;
    }
    let path: f64 = points.windows(2).map(|w| dist_sq(&w[1], &w[0])).sum();
    let tail = 2.0 * smoothness * smoothness * path;
    VariationCheck {
        lhs,
        rhs_linear: 2.0 * (variation + lipschitz) + tail,
        rhs_squared: 2.0 * (variation + lipschitz * lipschitz) + tail,
    }
}
