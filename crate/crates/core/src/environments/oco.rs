use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{fmt_float, symmetric, unit_vector};
use crate::domain::ConvexDomain;
use crate::error::{Error, Result};
use crate::linalg::{dist_sq, dot, norm2, norm2_sq, sub};

fn default_burn_in() -> u64 {
    32
}

/// Convex-loss streams on the origin-centered ball of the given radius.
///
/// Draw order:
/// * `linear_drift`: unit direction of the bias, then of the oscillation,
///   then (random schedule only) one U[0,1) per period block for the sign.
/// * `quadratic_drift`: unit start direction, then unit drift direction.
/// * `logistic_drift`: unit weight direction, then one U[0,1) per burn-in
///   round for the label (−1 below ½).
/// * `sea_sampler`: as `quadratic_drift`, then d draws of U[−1,1) per round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OcoStreamConfig {
    /// f_t(x) = ⟨a + s_t v, x⟩ with s_t = ±1 constant on blocks of `period`
    /// rounds, alternating or (with `random_signs`) drawn by a fair coin.
    LinearDrift {
        dim: usize,
        radius: f64,
        bias: f64,
        amplitude: f64,
        period: u64,
        #[serde(default)]
        random_signs: bool,
    },
    /// f_t(x) = ‖x − c_t‖²; c_t moves `drift` per round for the first
    /// `burn_in` steps and then stays put.
    QuadraticDrift {
        dim: usize,
        radius: f64,
        drift: f64,
        #[serde(default = "default_burn_in")]
        burn_in: u64,
    },
    /// f_t(x) = log(1 + exp(−y_t⟨a, x⟩)) with random labels during burn-in
    /// and y_t = +1 afterwards.
    LogisticDrift {
        dim: usize,
        radius: f64,
        weight: f64,
        #[serde(default = "default_burn_in")]
        burn_in: u64,
    },
    /// f_t(x) = ‖x − c_t − ξ_t‖² with ξ_t uniform on [−noise, noise]^d.
    SeaSampler {
        dim: usize,
        radius: f64,
        drift: f64,
        #[serde(default = "default_burn_in")]
        burn_in: u64,
        noise: f64,
    },
}

/// Curvature of the generated losses; reported, never fed to learners.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CurvatureTruth {
    Convex,
    ExpConcave { alpha: f64, beta: f64 },
    StronglyConvex { mu: f64 },
}

/// Loss of a single round.
#[derive(Debug, Clone, PartialEq)]
pub enum RoundLoss {
    Linear { g: Vec<f64> },
    Quadratic { target: Vec<f64> },
    Logistic { a: Vec<f64>, label: f64 },
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// log(1 + e^{−z}) without overflow.
fn softplus_neg(z: f64) -> f64 {
    if z > 0.0 {
        (-z).exp().ln_1p()
    } else {
        -z + z.exp().ln_1p()
    }
}

impl RoundLoss {
    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            RoundLoss::Linear { g } => dot(g, x),
            RoundLoss::Quadratic { target } => dist_sq(x, target),
            RoundLoss::Logistic { a, label } => softplus_neg(label * dot(a, x)),
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        match self {
            RoundLoss::Linear { g } => g.clone(),
            RoundLoss::Quadratic { target } => x.iter().zip(target).map(|(a, b)| 2.0 * (a - b)).collect(),
            RoundLoss::Logistic { a, label } => {
                let s = -label * sigmoid(-label * dot(a, x));
                a.iter().map(|v| s * v).collect()
            }
        }
    }
}

pub trait GradientOracle {
    fn gradient(&mut self, x: &[f64]) -> Vec<f64>;
}

/// Wraps one round's loss and counts the queries made against it.
#[derive(Debug)]
pub struct CountingOracle<'a> {
    loss: &'a RoundLoss,
    pub value_calls: u64,
    pub gradient_calls: u64,
}

impl<'a> CountingOracle<'a> {
    pub fn new(loss: &'a RoundLoss) -> Self {
        Self { loss, value_calls: 0, gradient_calls: 0 }
    }

    pub fn value(&mut self, x: &[f64]) -> f64 {
        self.value_calls += 1;
        self.loss.value(x)
    }
}

impl GradientOracle for CountingOracle<'_> {
    fn gradient(&mut self, x: &[f64]) -> Vec<f64> {
        self.gradient_calls += 1;
        self.loss.gradient(x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcoStatistics {
    /// Σ_{t≥2} sup_x ‖∇f_t(x) − ∇f_{t−1}(x)‖².
    pub gradient_variation: f64,
    /// Σ_t σ_t² (zero for deterministic streams).
    pub sigma_sq: f64,
    /// Σ_t sup_x ‖∇F_t(x) − ∇F_{t−1}(x)‖² with F₀ ≡ 0.
    pub drift_sq: f64,
    /// min_x Σ_t f_t(x).
    pub best_total: f64,
    pub minimizer: Vec<f64>,
    pub lipschitz: f64,
    pub smoothness: f64,
    pub curvature: CurvatureTruth,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OcoStream {
    pub config: OcoStreamConfig,
    pub domain: ConvexDomain,
    pub rounds: Vec<RoundLoss>,
    /// Mean targets c_t of `sea_sampler` (the expected loss is ‖x − c_t‖² + const).
    pub means: Vec<Vec<f64>>,
}

impl OcoStreamConfig {
    pub fn name(&self) -> &'static str {
        match self {
            OcoStreamConfig::LinearDrift { .. } => "linear_drift",
            OcoStreamConfig::QuadraticDrift { .. } => "quadratic_drift",
            OcoStreamConfig::LogisticDrift { .. } => "logistic_drift",
            OcoStreamConfig::SeaSampler { .. } => "sea_sampler",
        }
    }

    fn shape(&self) -> (usize, f64) {
        match *self {
            OcoStreamConfig::LinearDrift { dim, radius, .. }
            | OcoStreamConfig::QuadraticDrift { dim, radius, .. }
            | OcoStreamConfig::LogisticDrift { dim, radius, .. }
            | OcoStreamConfig::SeaSampler { dim, radius, .. } => (dim, radius),
        }
    }

    pub fn domain(&self) -> Result<ConvexDomain> {
        let (dim, radius) = self.shape();
        ConvexDomain::centered_ball(dim, radius)
    }

    /// Smoothness L and Lipschitz G bounds valid for every seed and horizon.
    pub fn declared_constants(&self) -> (f64, f64) {
        let (dim, radius) = self.shape();
        let target = |drift: f64, burn_in: u64| 0.5 * radius + drift * burn_in as f64;
        match *self {
            OcoStreamConfig::LinearDrift { bias, amplitude, .. } => (0.0, bias + amplitude),
            OcoStreamConfig::QuadraticDrift { drift, burn_in, .. } => (2.0, 2.0 * (radius + target(drift, burn_in))),
            OcoStreamConfig::LogisticDrift { weight, .. } => (0.25 * weight * weight, weight),
            OcoStreamConfig::SeaSampler { drift, burn_in, noise, .. } => {
                (2.0, 2.0 * (radius + target(drift, burn_in) + noise * (dim as f64).sqrt()))
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.domain()?;
        let nonneg = |v: f64| v.is_finite() && v >= 0.0;
        let ok = match *self {
            OcoStreamConfig::LinearDrift { bias, amplitude, period, .. } => nonneg(bias) && nonneg(amplitude) && period > 0,
            OcoStreamConfig::QuadraticDrift { drift, .. } => nonneg(drift),
            OcoStreamConfig::LogisticDrift { weight, .. } => weight.is_finite() && weight > 0.0,
            OcoStreamConfig::SeaSampler { drift, noise, .. } => nonneg(drift) && nonneg(noise),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid parameters for stream {}", self.name())))
        }
    }

    pub fn generate(&self, horizon: u64, seed: u64) -> Result<OcoStream> {
        self.validate()?;
        let domain = self.domain()?;
        let (dim, radius) = self.shape();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut means = Vec::new();
        let drifting_targets = |rng: &mut ChaCha8Rng, drift: f64, burn_in: u64| -> Vec<Vec<f64>> {
            let start: Vec<f64> = unit_vector(rng, dim).into_iter().map(|v| 0.5 * radius * v).collect();
            let dir = unit_vector(rng, dim);
            (1..=horizon)
                .map(|t| {
                    let steps = (t - 1).min(burn_in) as f64;
                    start.iter().zip(&dir).map(|(s, d)| s + drift * steps * d).collect()
                })
                .collect()
        };
        let rounds = match *self {
            OcoStreamConfig::LinearDrift { bias, amplitude, period, random_signs, .. } => {
                let a: Vec<f64> = unit_vector(&mut rng, dim).into_iter().map(|v| bias * v).collect();
                let v: Vec<f64> = unit_vector(&mut rng, dim).into_iter().map(|x| amplitude * x).collect();
                let mut s = 1.0;
                (1..=horizon)
                    .map(|t| {
                        let block = (t - 1) / period;
                        if (t - 1) % period == 0 {
                            s = if random_signs {
                                if rand::Rng::random::<f64>(&mut rng) < 0.5 { -1.0 } else { 1.0 }
                            } else if block % 2 == 0 {
                                1.0
                            } else {
                                -1.0
                            };
                        }
                        RoundLoss::Linear { g: a.iter().zip(&v).map(|(x, y)| x + s * y).collect() }
                    })
                    .collect()
            }
            OcoStreamConfig::QuadraticDrift { drift, burn_in, .. } => drifting_targets(&mut rng, drift, burn_in)
                .into_iter()
                .map(|target| RoundLoss::Quadratic { target })
                .collect(),
            OcoStreamConfig::LogisticDrift { weight, burn_in, .. } => {
                let a: Vec<f64> = unit_vector(&mut rng, dim).into_iter().map(|v| weight * v).collect();
                (1..=horizon)
                    .map(|t| {
                        let label = if t <= burn_in && rand::Rng::random::<f64>(&mut rng) < 0.5 { -1.0 } else { 1.0 };
                        RoundLoss::Logistic { a: a.clone(), label }
                    })
                    .collect()
            }
            OcoStreamConfig::SeaSampler { drift, burn_in, noise, .. } => {
                means = drifting_targets(&mut rng, drift, burn_in);
                means
                    .iter()
                    .map(|c| RoundLoss::Quadratic {
                        target: c.iter().map(|v| v + noise * symmetric(&mut rng)).collect(),
                    })
                    .collect()
            }
        };
        Ok(OcoStream { config: self.clone(), domain, rounds, means })
    }
}

impl OcoStream {
    pub fn len(&self) -> usize {
        self.rounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rounds.is_empty()
    }

    /// f_t for 1-based t.
    pub fn round(&self, t: usize) -> &RoundLoss {
        &self.rounds[t - 1]
    }

    pub fn radius(&self) -> f64 {
        self.config.shape().1
    }

    /// Σ_t f_t(x).
    pub fn total_loss(&self, x: &[f64]) -> f64 {
        self.rounds.iter().map(|f| f.value(x)).sum()
    }

    fn targets(&self) -> Vec<&[f64]> {
        self.rounds
            .iter()
            .filter_map(|f| match f {
                RoundLoss::Quadratic { target } => Some(target.as_slice()),
                _ => None,
            })
            .collect()
    }

    fn minimize(&self) -> Vec<f64> {
        let r = self.radius();
        let dim = self.domain.dim();
        if self.rounds.is_empty() {
            return vec![0.0; dim];
        }
        match &self.rounds[0] {
            RoundLoss::Linear { .. } => {
                let mut s = vec![0.0; dim];
                for f in &self.rounds {
                    if let RoundLoss::Linear { g } = f {
                        s.iter_mut().zip(g).for_each(|(a, b)| *a += b);
                    }
                }
                let n = norm2(&s);
                if n == 0.0 {
                    vec![0.0; dim]
                } else {
                    s.iter().map(|v| -r * v / n).collect()
                }
            }
            RoundLoss::Quadratic { .. } => {
                let targets = self.targets();
                let n = targets.len() as f64;
                let mean: Vec<f64> = (0..dim).map(|k| targets.iter().map(|c| c[k]).sum::<f64>() / n).collect();
                self.domain.project(&mean)
            }
            RoundLoss::Logistic { a, .. } => {
                // Only z = ⟨a, x⟩ ∈ [−‖a‖R, ‖a‖R] matters; the 1-D objective
                // n₊ log(1 + e^{−z}) + n₋ log(1 + e^{z}) is minimized at
                // z = ln(n₊ / n₋), clamped to the interval.
                let pos = self.rounds.iter().filter(|f| matches!(f, RoundLoss::Logistic { label, .. } if *label > 0.0)).count() as f64;
                let neg = self.rounds.len() as f64 - pos;
                let zmax = norm2(a) * r;
                let z = if neg == 0.0 {
                    zmax
                } else if pos == 0.0 {
                    -zmax
                } else {
                    (pos / neg).ln().clamp(-zmax, zmax)
                };
                let an = norm2_sq(a);
                a.iter().map(|v| z * v / an).collect()
            }
        }
    }

    /// Exact difficulty statistics of the generated sequence.
    pub fn statistics(&self) -> OcoStatistics {
        let r = self.radius();
        let dim = self.domain.dim();
        let mut variation = 0.0;
        for w in self.rounds.windows(2) {
            variation += match (&w[0], &w[1]) {
                (RoundLoss::Linear { g: a }, RoundLoss::Linear { g: b }) => dist_sq(a, b),
                (RoundLoss::Quadratic { target: a }, RoundLoss::Quadratic { target: b }) => 4.0 * dist_sq(a, b),
                (RoundLoss::Logistic { a, label: y0 }, RoundLoss::Logistic { label: y1, .. }) => {
                    if y0 != y1 {
                        norm2_sq(a)
                    } else {
                        0.0
                    }
                }
                _ => unreachable!("streams are homogeneous"),
            };
        }
        let (lipschitz, smoothness, curvature) = match &self.config {
            OcoStreamConfig::LinearDrift { .. } => {
                let g = self.rounds.iter().map(|f| norm2(&f.gradient(&vec![0.0; dim]))).fold(0.0, f64::max);
                (g, 0.0, CurvatureTruth::Convex)
            }
            OcoStreamConfig::QuadraticDrift { .. } | OcoStreamConfig::SeaSampler { .. } => {
                let g = self.targets().iter().map(|c| 2.0 * (r + norm2(c))).fold(0.0, f64::max);
                (g, 2.0, CurvatureTruth::StronglyConvex { mu: 2.0 })
            }
            OcoStreamConfig::LogisticDrift { weight, .. } => {
                let g = *weight;
                let beta = (-weight * r).exp();
                let alpha = 0.5 * (1.0 / (4.0 * g * 2.0 * r)).min(beta);
                (g, 0.25 * weight * weight, CurvatureTruth::ExpConcave { alpha, beta })
            }
        };
        let (sigma_sq, drift_sq) = match &self.config {
            OcoStreamConfig::SeaSampler { noise, .. } => {
                let per_round = 4.0 * dim as f64 * noise * noise / 3.0;
                let mut drift = self.means.first().map_or(0.0, |c| 4.0 * (r + norm2(c)).powi(2));
                drift += self.means.windows(2).map(|w| 4.0 * dist_sq(&w[0], &w[1])).sum::<f64>();
                (per_round * self.rounds.len() as f64, drift)
            }
            _ => {
                let first = self.rounds.first().map_or(0.0, |f| {
                    let x = self.worst_first_point(f);
                    norm2_sq(&f.gradient(&x))
                });
                (0.0, first + variation)
            }
        };
        let minimizer = self.minimize();
        OcoStatistics {
            gradient_variation: variation,
            sigma_sq,
            drift_sq,
            best_total: self.total_loss(&minimizer),
            minimizer,
            lipschitz,
            smoothness,
            curvature,
        }
    }

    // Maximizer of ‖∇f₁(x)‖ over the ball, for the F₀ ≡ 0 drift term.
    fn worst_first_point(&self, f: &RoundLoss) -> Vec<f64> {
        let r = self.radius();
        match f {
            RoundLoss::Quadratic { target } => {
                let n = norm2(target);
                if n == 0.0 {
                    let mut x = vec![0.0; target.len()];
                    x[0] = r;
                    x
                } else {
                    target.iter().map(|c| -r * c / n).collect()
                }
            }
            RoundLoss::Logistic { a, label } => {
                // |σ(−y z)| grows as y z decreases
                let an = norm2(a);
                a.iter().map(|v| -label * r * v / an).collect()
            }
            RoundLoss::Linear { g } => vec![0.0; g.len()],
        }
    }

    /// Header `t,<param>_0..`: the linear gradient, quadratic target, or
    /// logistic label followed by the weight vector.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let dim = self.domain.dim();
        let (name, extra) = match self.rounds.first() {
            Some(RoundLoss::Linear { .. }) | None => ("g", false),
            Some(RoundLoss::Quadratic { .. }) => ("c", false),
            Some(RoundLoss::Logistic { .. }) => ("a", true),
        };
        let mut header = vec!["t".to_string()];
        if extra {
            header.push("y".into());
        }
        header.extend((0..dim).map(|k| format!("{name}_{k}")));
        writeln!(w, "{}", header.join(","))?;
        for (t, f) in self.rounds.iter().enumerate() {
            let mut row = vec![(t + 1).to_string()];
            let v = match f {
                RoundLoss::Linear { g } => g,
                RoundLoss::Quadratic { target } => target,
                RoundLoss::Logistic { a, label } => {
                    row.push(fmt_float(*label));
                    a
                }
            };
            row.extend(v.iter().map(|x| fmt_float(*x)));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    /// f₁(x) − f₁(y) − ⟨∇f₁(x), x − y⟩ in the convention used by the
    /// curvature two-point tests.
    pub fn two_point_gap(f: &RoundLoss, x: &[f64], y: &[f64]) -> (f64, f64) {
        let g = f.gradient(x);
        let d = sub(x, y);
        (f.value(x) - f.value(y) - dot(&g, &d), dot(&g, &d))
    }
}
