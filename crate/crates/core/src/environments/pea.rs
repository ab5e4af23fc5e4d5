use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{fmt_float, symmetric};
use crate::error::{Error, Result};
use crate::linalg::dot;

/// Expert streams.
///
/// Draw order, per round t = 1..T:
/// * `iid_gap`, `drifting_leader`: one U[−1,1) per expert, in expert order.
/// * `scale_shock`: one U[−1,1) per expert.
/// * `optimism_quality`: one U[−1,1) per expert for the loss, then one per
///   expert for the optimism noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PeaStreamConfig {
    /// Expert 0 has mean loss 0.5 − Δ/2, the rest 0.5 + Δ/2; noise keeps
    /// losses in [0, 1]. Optimism is the previous loss.
    IidGap { experts: usize, gap: f64 },
    /// Like `iid_gap`, but the favoured expert advances every `period` rounds.
    DriftingLeader { experts: usize, gap: f64, period: u64 },
    /// ℓ_t = s_t·z_t with ‖z_t‖_∞ = 1, m_t = 0, and s_t jumping from 1 to
    /// `factor` at `shock_round` (default: half the horizon).
    ScaleShock {
        experts: usize,
        gap: f64,
        factor: f64,
        #[serde(default)]
        shock_round: Option<u64>,
    },
    /// Losses as in `iid_gap`; m_t(i) = ℓ_t(i) + σ_i·ε with σ_i spaced
    /// geometrically from `noise_min` (expert 0) to `noise_max`.
    OptimismQuality { experts: usize, gap: f64, noise_min: f64, noise_max: f64 },
}

impl PeaStreamConfig {
    pub fn experts(&self) -> usize {
        match *self {
            PeaStreamConfig::IidGap { experts, .. }
            | PeaStreamConfig::DriftingLeader { experts, .. }
            | PeaStreamConfig::ScaleShock { experts, .. }
            | PeaStreamConfig::OptimismQuality { experts, .. } => experts,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            PeaStreamConfig::IidGap { .. } => "iid_gap",
            PeaStreamConfig::DriftingLeader { .. } => "drifting_leader",
            PeaStreamConfig::ScaleShock { .. } => "scale_shock",
            PeaStreamConfig::OptimismQuality { .. } => "optimism_quality",
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.experts() == 0 {
            return Err(Error::Config("stream.experts must be positive".into()));
        }
        let gap_ok = |g: f64| (0.0..1.0).contains(&g);
        match *self {
            PeaStreamConfig::IidGap { gap, .. } if !gap_ok(gap) => {
                Err(Error::Config(format!("stream.gap must lie in [0, 1), got {gap}")))
            }
            PeaStreamConfig::DriftingLeader { gap, period, .. } if !gap_ok(gap) || period == 0 => {
                Err(Error::Config("stream.gap must lie in [0, 1) and stream.period be positive".into()))
            }
            PeaStreamConfig::ScaleShock { gap, factor, .. } if !(gap >= 0.0 && factor.is_finite() && factor > 0.0) => {
                Err(Error::Config("stream.factor must be positive and stream.gap non-negative".into()))
            }
            PeaStreamConfig::OptimismQuality { gap, noise_min, noise_max, .. }
                if !gap_ok(gap) || !(noise_min >= 0.0 && noise_max >= noise_min && noise_max.is_finite()) =>
            {
                Err(Error::Config("stream noise levels must satisfy 0 <= noise_min <= noise_max".into()))
            }
            _ => Ok(()),
        }
    }

    /// Per-expert optimism noise amplitude.
    pub fn noise_levels(&self) -> Vec<f64> {
        match *self {
            PeaStreamConfig::OptimismQuality { experts, noise_min, noise_max, .. } => {
                if experts == 1 {
                    return vec![noise_min];
                }
                (0..experts)
                    .map(|i| {
                        let f = i as f64 / (experts - 1) as f64;
                        if noise_min > 0.0 {
                            noise_min * (noise_max / noise_min).powf(f)
                        } else {
                            noise_max * f
                        }
                    })
                    .collect()
            }
            _ => vec![0.0; self.experts()],
        }
    }

    pub fn generate(&self, horizon: u64, seed: u64) -> Result<PeaSequence> {
        self.validate()?;
        let k = self.experts();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut optimism = Vec::with_capacity(horizon as usize);
        let mut loss: Vec<Vec<f64>> = Vec::with_capacity(horizon as usize);
        let centered = |favoured: usize, gap: f64, rng: &mut ChaCha8Rng| -> Vec<f64> {
            let h = 0.5 - 0.5 * gap;
            (0..k)
                .map(|i| {
                    let mean = if i == favoured { 0.5 - 0.5 * gap } else { 0.5 + 0.5 * gap };
                    mean + h * symmetric(rng)
                })
                .collect()
        };
        let sigma = self.noise_levels();
        for t in 1..=horizon {
            let prev = loss.last().cloned().unwrap_or_else(|| vec![0.0; k]);
            match *self {
                PeaStreamConfig::IidGap { gap, .. } => {
                    loss.push(centered(0, gap, &mut rng));
                    optimism.push(prev);
                }
                PeaStreamConfig::DriftingLeader { gap, period, .. } => {
                    let leader = (((t - 1) / period) % k as u64) as usize;
                    loss.push(centered(leader, gap, &mut rng));
                    optimism.push(prev);
                }
                PeaStreamConfig::ScaleShock { gap, factor, shock_round, .. } => {
                    let tau = shock_round.unwrap_or(horizon / 2 + 1);
                    let s = if t >= tau { factor } else { 1.0 };
                    let raw: Vec<f64> =
                        (0..k).map(|i| symmetric(&mut rng) - if i == 0 { gap } else { 0.0 }).collect();
                    let top = raw.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
                    let z: Vec<f64> = if top > 0.0 { raw.iter().map(|x| x / top).collect() } else { vec![1.0; k] };
                    loss.push(z.into_iter().map(|x| s * x).collect());
                    optimism.push(vec![0.0; k]);
                }
                PeaStreamConfig::OptimismQuality { gap, .. } => {
                    let l = centered(0, gap, &mut rng);
                    let m = l.iter().zip(&sigma).map(|(v, s)| v + s * symmetric(&mut rng)).collect();
                    loss.push(l);
                    optimism.push(m);
                }
            }
        }
        Ok(PeaSequence { optimism, loss })
    }
}

/// A materialized stream: `optimism[t]` is revealed before round t + 1,
/// `loss[t]` after it.
#[derive(Debug, Clone, PartialEq)]
pub struct PeaSequence {
    pub optimism: Vec<Vec<f64>>,
    pub loss: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeaStatistics {
    /// V(e_i) for every expert.
    pub variances: Vec<f64>,
    pub cumulative_losses: Vec<f64>,
    pub best_expert: usize,
    /// max_t ‖ℓ_t − m_t‖_∞.
    pub max_error: f64,
}

impl PeaSequence {
    pub fn len(&self) -> usize {
        self.loss.len()
    }

    pub fn is_empty(&self) -> bool {
        self.loss.is_empty()
    }

    pub fn experts(&self) -> usize {
        self.loss.first().map_or(0, Vec::len)
    }

    /// (m_t, ℓ_t) for 1-based t.
    pub fn round(&self, t: usize) -> (&[f64], &[f64]) {
        (&self.optimism[t - 1], &self.loss[t - 1])
    }

    pub fn statistics(&self) -> PeaStatistics {
        let k = self.experts();
        let mut variances = vec![0.0; k];
        let mut cumulative_losses = vec![0.0; k];
        let mut max_error = 0.0_f64;
        for (m, l) in self.optimism.iter().zip(&self.loss) {
            for i in 0..k {
                let e = l[i] - m[i];
                variances[i] += e * e;
                cumulative_losses[i] += l[i];
                max_error = max_error.max(e.abs());
            }
        }
        let best_expert = (0..k)
            .min_by(|a, b| cumulative_losses[*a].total_cmp(&cumulative_losses[*b]))
            .unwrap_or(0);
        PeaStatistics { variances, cumulative_losses, best_expert, max_error }
    }

    /// V(u) = Σ_i u(i) V(e_i).
    pub fn comparator_variance(&self, u: &[f64]) -> f64 {
        dot(&self.statistics().variances, u)
    }

    /// Header `t,m_0..,l_0..`, one row per round.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let k = self.experts();
        let mut header = vec!["t".to_string()];
        header.extend((0..k).map(|i| format!("m_{i}")));
        header.extend((0..k).map(|i| format!("l_{i}")));
        writeln!(w, "{}", header.join(","))?;
        for (t, (m, l)) in self.optimism.iter().zip(&self.loss).enumerate() {
            let mut row = vec![(t + 1).to_string()];
            row.extend(m.iter().chain(l).map(|v| fmt_float(*v)));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn same_seed_same_stream() {
        let cfg = PeaStreamConfig::OptimismQuality { experts: 4, gap: 0.2, noise_min: 1e-3, noise_max: 0.5 };
        let a = cfg.generate(200, 7).unwrap();
        let b = cfg.generate(200, 7).unwrap();
        let c = cfg.generate(200, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn zero_noise_means_perfect_optimism() {
        let cfg = PeaStreamConfig::OptimismQuality { experts: 3, gap: 0.1, noise_min: 0.0, noise_max: 0.0 };
        let s = cfg.generate(50, 1).unwrap();
        assert_eq!(s.optimism, s.loss);
        assert_eq!(s.comparator_variance(&[0.2, 0.3, 0.5]), 0.0);
    }

    #[test]
    fn scale_shock_jumps_exactly() {
        let cfg = PeaStreamConfig::ScaleShock { experts: 3, gap: 0.1, factor: 1e3, shock_round: Some(11) };
        let s = cfg.generate(20, 3).unwrap();
        for t in 1..=20 {
            let (m, l) = s.round(t);
            let e = l.iter().zip(m).fold(0.0_f64, |a, (x, y)| a.max((x - y).abs()));
            assert_eq!(e, if t >= 11 { 1e3 } else { 1.0 });
        }
    }

    #[test]
    fn iid_gap_uniform_play_regret() {
        let gap = 0.2;
        let t = 20_000;
        let s = PeaStreamConfig::IidGap { experts: 2, gap }.generate(t, 11).unwrap();
        let st = s.statistics();
        let uniform: f64 = s.loss.iter().map(|l| 0.5 * (l[0] + l[1])).sum();
        let regret = uniform - st.cumulative_losses[0];
        assert_eq!(st.best_expert, 0);
        assert!((regret / (gap * t as f64 / 2.0) - 1.0).abs() < 0.05, "{regret}");
        assert!(s.loss.iter().flatten().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn optimism_noise_is_log_spaced() {
        let cfg = PeaStreamConfig::OptimismQuality { experts: 3, gap: 0.0, noise_min: 1e-2, noise_max: 1.0 };
        let n = cfg.noise_levels();
        assert_abs_diff_eq!(n[1], 0.1, epsilon = 1e-15);
    }

    #[test]
    fn csv_has_one_row_per_round() {
        let s = PeaStreamConfig::IidGap { experts: 2, gap: 0.1 }.generate(3, 0).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,m_0,m_1,l_0,l_1");
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("1,0.0000000000000000e0,"));
    }
}
