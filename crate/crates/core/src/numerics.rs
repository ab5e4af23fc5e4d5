//! Bregman divergences and the constrained mirror-descent solves used by the
//! expert algorithms and the base learners.
//!
//! The entropic solve works in log space throughout. Learning rates on the
//! meta grid span a factor of T², so the weights after the auxiliary round
//! routinely sit far below the smallest normal `f64`; keeping log-weights
//! lets divergences against those coordinates stay finite.

use std::collections::HashMap;

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use crate::domain::ConvexDomain;
use crate::error::{Error, Result};
use crate::linalg::{dot, norm2};

/// Positive per-coordinate learning rates of the weighted negative entropy
/// ψ(w) = Σ_j (1/η_j) w_j ln w_j.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedEntropyGeometry {
    rates: Vec<f64>,
}

impl WeightedEntropyGeometry {
    pub fn new(rates: Vec<f64>) -> Result<Self> {
        if rates.is_empty() {
            return Err(Error::Config("geometry needs at least one coordinate".into()));
        }
        if let Some(bad) = rates.iter().find(|r| !(r.is_finite() && **r > 0.0)) {
            return Err(Error::Config(format!("learning rate must be positive and finite, got {bad}")));
        }
        Ok(Self { rates })
    }

    pub fn uniform(dim: usize, rate: f64) -> Result<Self> {
        Self::new(vec![rate; dim])
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn dim(&self) -> usize {
        self.rates.len()
    }
}

/// A point of the probability simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexPoint(Vec<f64>);

impl SimplexPoint {
    pub const TOLERANCE: f64 = 1e-12;

    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Config("simplex point must be non-empty".into()));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::Domain("simplex weights must be finite and nonnegative".into()));
        }
        let s: f64 = weights.iter().sum();
        if (s - 1.0).abs() > 1e-9 {
            return Err(Error::Domain(format!("simplex weights sum to {s}, expected 1")));
        }
        Ok(Self(weights))
    }

    pub fn uniform(dim: usize) -> Self {
        Self(vec![1.0 / dim as f64; dim])
    }

    pub fn vertex(dim: usize, i: usize) -> Self {
        let mut w = vec![0.0; dim];
        w[i] = 1.0;
        Self(w)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

fn log_or_neg_inf(x: f64) -> f64 {
    if x > 0.0 {
        x.ln()
    } else {
        f64::NEG_INFINITY
    }
}

/// Per-coordinate generalized KL term w log(w/w') − w + w', from logs.
fn entropy_term(w: f64, log_w: f64, w_ref: f64, log_w_ref: f64, index: usize) -> Result<f64> {
    if w > 0.0 {
        if log_w_ref == f64::NEG_INFINITY {
            return Err(Error::Domain(format!(
                "coordinate {index} has mass {w} but the reference point has none"
            )));
        }
        Ok(w * (log_w - log_w_ref) - w + w_ref)
    } else {
        Ok(w_ref)
    }
}

fn check_same_len(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::Domain(format!("dimension mismatch: {a} vs {b}")));
    }
    Ok(())
}

/// Generalized KL divergence Σ_i (w_i log(w_i/w'_i) − w_i + w'_i) with 0·log 0 = 0.
pub fn kl_divergence(w: &[f64], w_ref: &[f64]) -> Result<f64> {
    check_same_len(w.len(), w_ref.len())?;
    let mut total = 0.0;
    for (i, (&a, &b)) in w.iter().zip(w_ref).enumerate() {
        if !(a.is_finite() && b.is_finite()) {
            return Err(Error::Domain(format!("non-finite entry at coordinate {i}")));
        }
        total += entropy_term(a, log_or_neg_inf(a), b, log_or_neg_inf(b), i)?;
    }
    Ok(total)
}

/// Bregman divergence D_ψ(w, w') of the weighted negative entropy.
pub fn weighted_entropy_bregman(
    w: &[f64],
    w_ref: &[f64],
    geometry: &WeightedEntropyGeometry,
) -> Result<f64> {
    check_same_len(w.len(), w_ref.len())?;
    check_same_len(w.len(), geometry.dim())?;
    let mut total = 0.0;
    for (i, ((&a, &b), &eta)) in w.iter().zip(w_ref).zip(geometry.rates()).enumerate() {
        total += entropy_term(a, log_or_neg_inf(a), b, log_or_neg_inf(b), i)? / eta;
    }
    Ok(total)
}

/// Weights carried together with their logarithms. Entries can be far below
/// the `f64` normal range; `logs` stays exact where `values` underflows.
#[derive(Debug, Clone, PartialEq)]
pub struct LogWeights {
    pub values: Vec<f64>,
    pub logs: Vec<f64>,
}

impl LogWeights {
    pub fn from_values(values: Vec<f64>) -> Self {
        let logs = values.iter().map(|&v| log_or_neg_inf(v)).collect();
        Self { values, logs }
    }

    pub fn from_logs(logs: Vec<f64>) -> Self {
        let values = logs.iter().map(|l| l.exp()).collect();
        Self { values, logs }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// D_ψ(w, w') evaluated from log-weights, so that reference coordinates that
/// underflow in linear scale still contribute their exact penalty.
pub fn weighted_entropy_bregman_log(
    w: &LogWeights,
    w_ref: &LogWeights,
    geometry: &WeightedEntropyGeometry,
) -> Result<f64> {
    check_same_len(w.len(), w_ref.len())?;
    check_same_len(w.len(), geometry.dim())?;
    let mut total = 0.0;
    for (i, &eta) in geometry.rates().iter().enumerate() {
        total += entropy_term(w.values[i], w.logs[i], w_ref.values[i], w_ref.logs[i], i)? / eta;
    }
    Ok(total)
}

fn comparator_gap_term(u: &LogWeights, a: &LogWeights, b: &LogWeights, j: usize) -> Result<f64> {
    if u.values[j] > 0.0 {
        entropy_term(u.values[j], u.logs[j], a.values[j], a.logs[j], j)?;
        entropy_term(u.values[j], u.logs[j], b.values[j], b.logs[j], j)?;
        Ok(u.values[j] * (b.logs[j] - a.logs[j]) + a.values[j] - b.values[j])
    } else {
        Ok(a.values[j] - b.values[j])
    }
}

/// D_ψ(u, a) − D_ψ(u, b) with the u·log u terms cancelled per coordinate.
pub fn bregman_gap_log(
    u: &LogWeights,
    a: &LogWeights,
    b: &LogWeights,
    geometry: &WeightedEntropyGeometry,
) -> Result<f64> {
    check_same_len(u.len(), geometry.dim())?;
    check_same_len(a.len(), geometry.dim())?;
    check_same_len(b.len(), geometry.dim())?;
    let mut total = 0.0;
    for (j, &eta) in geometry.rates().iter().enumerate() {
        total += comparator_gap_term(u, a, b, j)? / eta;
    }
    Ok(total)
}

/// Result of an entropic mirror-descent solve.
#[derive(Debug, Clone, PartialEq)]
pub struct OmdSolution {
    pub weights: LogWeights,
    /// Lagrange multiplier μ of the simplex constraint.
    pub multiplier: f64,
}

impl OmdSolution {
    pub fn values(&self) -> &[f64] {
        &self.weights.values
    }
}

/// argmin over the active face of the simplex of ⟨cost, w⟩ + D_ψ(w, prior).
pub fn entropic_omd_solve(
    cost: &[f64],
    prior: &[f64],
    geometry: &WeightedEntropyGeometry,
    active: &[bool],
) -> Result<OmdSolution> {
    if let Some(p) = prior.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
        return Err(Error::Domain(format!("prior entries must be finite and nonnegative, got {p}")));
    }
    let log_prior: Vec<f64> = prior.iter().map(|&p| log_or_neg_inf(p)).collect();
    entropic_omd_solve_log(cost, &log_prior, geometry, active)
}

/// Log-prior form of [`entropic_omd_solve`]; −∞ marks a zero prior entry.
///
/// KKT form: w_j = prior_j · exp(−η_j (cost_j + μ)) on active coordinates
/// with positive prior, 0 elsewhere, μ chosen so the active weights sum to 1.
pub fn entropic_omd_solve_log(
    cost: &[f64],
    log_prior: &[f64],
    geometry: &WeightedEntropyGeometry,
    active: &[bool],
) -> Result<OmdSolution> {
    let n = geometry.dim();
    check_same_len(cost.len(), n)?;
    check_same_len(log_prior.len(), n)?;
    check_same_len(active.len(), n)?;
    let rates = geometry.rates();

    // Group live coordinates by exact rate value: the multiplier equation only
    // depends on the per-rate aggregates L_k = log Σ_{j: η_j = η_k} prior_j e^{−η_k c_j}.
    let mut tilted = vec![f64::NEG_INFINITY; n];
    let mut groups: Vec<(f64, f64)> = Vec::new(); // (rate, running max of tilted)
    let mut group_of = vec![usize::MAX; n];
    let mut index: HashMap<u64, usize> = HashMap::new();
    let mut live = 0usize;
    for j in 0..n {
        if !active[j] || log_prior[j] == f64::NEG_INFINITY {
            continue;
        }
        if !cost[j].is_finite() || log_prior[j].is_nan() || log_prior[j] == f64::INFINITY {
            return Err(Error::Numerical(format!("non-finite input at coordinate {j}")));
        }
        live += 1;
        tilted[j] = log_prior[j] - rates[j] * cost[j];
        let k = *index.entry(rates[j].to_bits()).or_insert_with(|| {
            groups.push((rates[j], f64::NEG_INFINITY));
            groups.len() - 1
        });
        group_of[j] = k;
        groups[k].1 = groups[k].1.max(tilted[j]);
    }
    if live == 0 {
        return Err(Error::Config("active set carries no prior mass".into()));
    }
    let mut sums = vec![0.0; groups.len()];
    for j in 0..n {
        if tilted[j] == f64::NEG_INFINITY {
            continue;
        }
        let k = group_of[j];
        sums[k] += (tilted[j] - groups[k].1).exp();
    }
    let aggregates: Vec<(f64, f64)> =
        groups.iter().zip(&sums).map(|(&(r, m), &s)| (r, m + s.ln())).collect();

    let mu = simplex_multiplier(&aggregates)?;
    let normalizer = log_partition(&aggregates, mu);

    let mut logs = vec![f64::NEG_INFINITY; n];
    for j in 0..n {
        if tilted[j] > f64::NEG_INFINITY {
            logs[j] = tilted[j] - rates[j] * mu - normalizer;
        }
    }
    let mut weights = LogWeights::from_logs(logs);
    // One more exact renormalization in linear scale pins Σw = 1 to rounding.
    let s: f64 = weights.values.iter().sum();
    if !(s.is_finite() && s > 0.0) {
        return Err(Error::Numerical(format!("solution mass {s} after normalization")));
    }
    if (s - 1.0).abs() > 1e-15 {
        let ls = s.ln();
        for (v, l) in weights.values.iter_mut().zip(weights.logs.iter_mut()) {
            *v /= s;
            *l -= ls;
        }
    }
    Ok(OmdSolution { weights, multiplier: mu })
}

/// g(μ) = log Σ_k exp(L_k − η_k μ).
fn log_partition(aggregates: &[(f64, f64)], mu: f64) -> f64 {
    crate::linalg::log_sum_exp(aggregates.iter().map(|&(r, l)| l - r * mu))
}

/// Root μ of g(μ) = log Σ_k exp(L_k − η_k μ) for (η_k, L_k) pairs with
/// distinct rates: safeguarded Newton inside a bisection bracket.
pub fn simplex_multiplier(aggregates: &[(f64, f64)]) -> Result<f64> {
    let groups = aggregates.len() as f64;
    // g(lo) ≥ 0 because the maximizing group alone contributes exp(0).
    let mut lo = aggregates.iter().map(|&(r, l)| l / r).fold(f64::NEG_INFINITY, f64::max);
    // g(hi) ≤ 0 because every group contributes at most 1/groups.
    let mut hi = aggregates
        .iter()
        .map(|&(r, l)| (l + groups.ln()) / r)
        .fold(f64::NEG_INFINITY, f64::max);
    let g = |mu: f64| log_partition(aggregates, mu);

    let mut g_lo = g(lo);
    let mut expand = 0;
    while g_lo < 0.0 {
        let width = (hi - lo).abs().max(1.0);
        lo -= width;
        g_lo = g(lo);
        expand += 1;
        if expand > 200 || !lo.is_finite() {
            return Err(Error::Numerical("could not bracket the simplex multiplier from below".into()));
        }
    }
    let mut g_hi = g(hi);
    expand = 0;
    while g_hi > 0.0 {
        let width = (hi - lo).abs().max(1.0);
        hi += width;
        g_hi = g(hi);
        expand += 1;
        if expand > 200 || !hi.is_finite() {
            return Err(Error::Numerical("could not bracket the simplex multiplier from above".into()));
        }
    }
    if g_lo == 0.0 {
        return Ok(lo);
    }
    if g_hi == 0.0 {
        return Ok(hi);
    }

    // g'(μ) = −Σ_k η_k π_k(μ) with π the normalized group weights.
    let slope = |mu: f64, gm: f64| -> f64 {
        -aggregates.iter().map(|&(r, l)| r * (l - r * mu - gm).exp()).sum::<f64>()
    };

    let mut mu = lo;
    let mut gm = g_lo;
    for _ in 0..500 {
        let d = slope(mu, gm);
        let newton = mu - gm / d;
        // From the left of the root Newton never overshoots (g is convex and
        // decreasing); from the right it may, and then bisection takes over.
        let next = if d < 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        let gn = g(next);
        if gn == 0.0 {
            return Ok(next);
        }
        if gn > 0.0 {
            lo = next;
        } else {
            hi = next;
        }
        let moved = (next - mu).abs();
        mu = next;
        gm = gn;
        let scale = mu.abs().max(1.0);
        if gm.abs() <= 1e-15 || moved <= 1e-16 * scale || hi - lo <= 1e-16 * scale {
            break;
        }
    }
    Ok(mu)
}

/// KKT residual of a solve: the larger of |Σw − 1| and the per-coordinate
/// gap |w_j − prior_j·exp(−η_j (cost_j + μ))| on live coordinates. Dead
/// coordinates carrying mass make the residual infinite.
pub fn kkt_residual(
    cost: &[f64],
    prior: &[f64],
    geometry: &WeightedEntropyGeometry,
    active: &[bool],
    solution: &OmdSolution,
) -> f64 {
    let w = &solution.weights;
    let mut worst = (w.values.iter().sum::<f64>() - 1.0).abs();
    for j in 0..cost.len() {
        let live = active[j] && prior[j] > 0.0;
        if !live {
            if w.values[j] != 0.0 {
                return f64::INFINITY;
            }
            continue;
        }
        let target = (prior[j].ln() - geometry.rates()[j] * (cost[j] + solution.multiplier)).exp();
        worst = worst.max((w.values[j] - target).abs());
    }
    worst
}

/// Stationarity gap |ln w_j − ln prior_j + η_j (cost_j + μ)| on live
/// coordinates, in units of the largest |η_j (cost_j + μ)|. Exact in log
/// scale even where the weights underflow.
pub fn log_stationarity_gap(
    cost: &[f64],
    prior: &[f64],
    geometry: &WeightedEntropyGeometry,
    active: &[bool],
    solution: &OmdSolution,
) -> f64 {
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 1.0;
    for j in 0..cost.len() {
        if !(active[j] && prior[j] > 0.0) {
            continue;
        }
        let shift = geometry.rates()[j] * (cost[j] + solution.multiplier);
        scale = scale.max(shift.abs()).max(prior[j].ln().abs());
        worst = worst.max((solution.weights.logs[j] - prior[j].ln() + shift).abs());
    }
    worst / scale
}

/// argmin_{x∈domain} ⟨g, x⟩ + (1/η)‖x − center‖², i.e. the projection of
/// center − (η/2)·g.
pub fn euclidean_omd_step(gradient: &[f64], center: &[f64], step: f64, domain: &ConvexDomain) -> Vec<f64> {
    debug_assert!(step > 0.0);
    let target: Vec<f64> = center.iter().zip(gradient).map(|(c, g)| c - 0.5 * step * g).collect();
    domain.project(&target)
}

/// Symmetric positive semidefinite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdMatrix {
    inner: DMatrix<f64>,
}

impl PsdMatrix {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        if !entries.is_square() {
            return Err(Error::Config("metric must be square".into()));
        }
        let scale = entries.amax().max(1.0);
        if (&entries - entries.transpose()).amax() > 1e-12 * scale {
            return Err(Error::Config("metric is not symmetric".into()));
        }
        let m = Self { inner: entries };
        if m.min_eigenvalue() < -1e-10 * scale {
            return Err(Error::Config("metric is not positive semidefinite".into()));
        }
        Ok(m)
    }

    pub fn scaled_identity(dim: usize, gamma: f64) -> Self {
        Self { inner: DMatrix::identity(dim, dim) * gamma }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.len();
        Self::new(DMatrix::from_fn(d, d, |i, j| rows[i][j]))
    }

    pub fn dim(&self) -> usize {
        self.inner.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.inner
    }

    /// M ← M + c·v vᵀ (c ≥ 0 keeps the matrix PSD).
    pub fn add_rank_one(&mut self, v: &[f64], c: f64) {
        let d = self.dim();
        for i in 0..d {
            for j in 0..d {
                self.inner[(i, j)] += c * v[i] * v[j];
            }
        }
    }

    pub fn quad_form(&self, v: &[f64]) -> f64 {
        let x = DVector::from_column_slice(v);
        x.dot(&(&self.inner * &x))
    }

    pub fn min_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.inner.clone()).eigenvalues.min()
    }

    pub fn is_diagonal(&self) -> bool {
        let d = self.dim();
        (0..d).all(|i| (0..d).all(|j| i == j || self.inner[(i, j)] == 0.0))
    }
}

/// Cached factorizations of one metric, reused across the two half-steps of
/// an optimistic round.
#[derive(Clone)]
pub struct MetricSolver {
    metric: PsdMatrix,
    cholesky: Cholesky<f64, nalgebra::Dyn>,
    eigen: Option<SymmetricEigen<f64, nalgebra::Dyn>>,
}

impl MetricSolver {
    pub fn new(metric: PsdMatrix) -> Result<Self> {
        let cholesky = Cholesky::new(metric.inner.clone())
            .ok_or_else(|| Error::Numerical("metric is singular (Cholesky failed)".into()))?;
        Ok(Self { metric, cholesky, eigen: None })
    }

    /// argmin_{x∈domain} ⟨g, x⟩ + ½‖x − center‖²_U.
    pub fn step(&mut self, gradient: &[f64], center: &[f64], domain: &ConvexDomain) -> Result<Vec<f64>> {
        let d = center.len();
        let g = DVector::from_column_slice(gradient);
        let shift = self.cholesky.solve(&g);
        let free: Vec<f64> = (0..d).map(|k| center[k] - shift[k]).collect();
        if domain.contains(&free, 0.0) {
            return Ok(free);
        }
        match domain {
            ConvexDomain::Box { lower, upper } => {
                if !self.metric.is_diagonal() {
                    return Err(Error::Unsupported(
                        "box domain under a non-diagonal metric".into(),
                    ));
                }
                // Separable: each coordinate is a clamped scalar quadratic.
                Ok((0..d).map(|k| free[k].clamp(lower[k], upper[k])).collect())
            }
            ConvexDomain::Ball { center: z, radius } => {
                let x = self.ball_step(gradient, center, z, *radius)?;
                Ok(domain.project(&x))
            }
        }
    }

    fn ball_step(&mut self, gradient: &[f64], center: &[f64], z: &[f64], radius: f64) -> Result<Vec<f64>> {
        let eig = self
            .eigen
            .get_or_insert_with(|| SymmetricEigen::new(self.metric.inner.clone()));
        let d = center.len();
        // In the eigenbasis, x = z + v with v_k(ν) = b_k / (λ_k + ν), where
        // b = Qᵀ(U(center − z) − g) and ν ≥ 0 is the ball multiplier.
        let a = DVector::from_iterator(d, center.iter().zip(z).map(|(c, zz)| c - zz));
        let rhs = &self.metric.inner * a - DVector::from_column_slice(gradient);
        let b = eig.eigenvectors.transpose() * rhs;
        let lam = &eig.eigenvalues;
        let norm_at = |nu: f64| -> f64 {
            (0..d).map(|k| (b[k] / (lam[k] + nu)).powi(2)).sum::<f64>().sqrt()
        };
        let b_norm = b.norm();
        let mut lo = 0.0_f64;
        let mut hi = b_norm / radius + 1.0;
        while norm_at(hi) > radius {
            hi *= 2.0;
            if !hi.is_finite() {
                return Err(Error::Numerical("ball multiplier bracket diverged".into()));
            }
        }
        // Newton on the secular equation 1/‖v(ν)‖ − 1/r, which is close to
        // linear in ν; bisection keeps it inside the bracket.
        let mut nu = 0.5 * (lo + hi);
        for _ in 0..200 {
            let n = norm_at(nu);
            if (n - radius).abs() <= 1e-13 * radius {
                break;
            }
            if n > radius {
                lo = nu;
            } else {
                hi = nu;
            }
            let dn = -(0..d).map(|k| b[k] * b[k] / (lam[k] + nu).powi(3)).sum::<f64>() / n;
            let phi = 1.0 / n - 1.0 / radius;
            let dphi = -dn / (n * n);
            let mut next = nu - phi / dphi;
            if !(next > lo && next < hi) || !next.is_finite() {
                next = 0.5 * (lo + hi);
            }
            if (next - nu).abs() <= 1e-16 * nu.max(1.0) {
                nu = next;
                break;
            }
            nu = next;
        }
        let v_eig = DVector::from_iterator(d, (0..d).map(|k| b[k] / (lam[k] + nu)));
        let v = &eig.eigenvectors * v_eig;
        let x: Vec<f64> = (0..d).map(|k| z[k] + v[k]).collect();
        let resid = (norm2(v.as_slice()) - radius).abs();
        if resid > 1e-9 * radius.max(1.0) {
            return Err(Error::Numerical(format!("ball projection residual {resid}")));
        }
        Ok(x)
    }
}

/// argmin_{x∈domain} ⟨g, x⟩ + ½‖x − center‖²_U.
pub fn matrix_omd_step(
    gradient: &[f64],
    center: &[f64],
    metric: &PsdMatrix,
    domain: &ConvexDomain,
) -> Result<Vec<f64>> {
    MetricSolver::new(metric.clone())?.step(gradient, center, domain)
}

/// Both sides of the one-step optimistic mirror-descent inequality
///
/// ⟨ℓ, w_t − u⟩ ≤ ⟨w_t − w'_{t+1}, ℓ − m⟩ + D(u, w'_t) − D(u, w'_{t+1})
///                − D(w'_{t+1}, w_t) − D(w_t, w'_t).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InequalityCheck {
    pub lhs: f64,
    pub rhs: f64,
}

impl InequalityCheck {
    pub const TOLERANCE: f64 = 1e-9;

    pub fn slack(&self) -> f64 {
        self.rhs - self.lhs
    }

    pub fn holds(&self) -> bool {
        self.slack() >= -Self::TOLERANCE
    }
}

/// Evaluates the one-step OMD inequality. `loss` is the full vector fed to
/// the second solve, `optimism` the one fed to the first; w_t and w'_{t+1}
/// must come from solves over the same face anchored at w'_t.
pub fn omd_one_step_inequality(
    loss: &[f64],
    optimism: &[f64],
    w_t: &LogWeights,
    w_next: &LogWeights,
    w_prev: &LogWeights,
    comparator: &LogWeights,
    geometry: &WeightedEntropyGeometry,
) -> Result<InequalityCheck> {
    check_same_len(loss.len(), geometry.dim())?;
    for v in [w_t.len(), w_next.len(), w_prev.len(), comparator.len(), optimism.len()] {
        check_same_len(v, loss.len())?;
    }
    // The Bregman terms are each of order |log w|/η; the slack is formed per
    // coordinate first so that their cancellation happens before summation.
    let mut lhs = 0.0;
    let mut slack = 0.0;
    for (j, &eta) in geometry.rates().iter().enumerate() {
        let l = loss[j] * (w_t.values[j] - comparator.values[j]);
        let stability = (w_t.values[j] - w_next.values[j]) * (loss[j] - optimism[j]);
        let bregman = comparator_gap_term(comparator, w_prev, w_next, j)?
            - entropy_term(w_next.values[j], w_next.logs[j], w_t.values[j], w_t.logs[j], j)?
            - entropy_term(w_t.values[j], w_t.logs[j], w_prev.values[j], w_prev.logs[j], j)?;
        lhs += l;
        slack += stability + bregman / eta - l;
    }
    let rhs = lhs + slack;
    Ok(InequalityCheck { lhs, rhs })
}

/// Convenience: inner product of a loss vector with a weight vector.
pub fn inner(loss: &[f64], weights: &[f64]) -> f64 {
    dot(loss, weights)
}
