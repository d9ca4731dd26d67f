//! Information-age metrics.
//!
//! Each camera agent `k` samples every `Δ_k` seconds and its packets take
//! `d_k` seconds (transmission + inference) to become usable, so its
//! steady-state average Age of Information is the sawtooth mean
//!
//! ```text
//! AoI_k = Δ_k/2 + d_k
//! ```
//!
//! The *Age of Perceived Targets* weights that age by how many targets
//! the agent can currently perceive, keeps only agents whose count
//! clears a quality threshold `ε_g`, and takes the worst case:
//!
//! ```text
//! AoPT_St = max_k  1{g_k ≥ ε_g} · g_k · (Δ_k/2 + d_k)
//! ```
//!
//! The maximizing index `k̂` is the *bottleneck agent*. During a
//! calibration phase a fresh snapshot is requested `Δ_T` after the
//! previous calibration result lands, so the bottleneck agent's age
//! averages `(Δ_T + 3·d_k̂)/2` and its AoPT is `½·g_k̂·(3·d_k̂ + Δ_T)`.
//! A full cycle calibrates with probability `p_1`, giving
//!
//! ```text
//! AoPT_cycle = p_1·AoPT_Ca + (1 − p_1)·AoPT_St
//!            = g_k̂·[ (p_1/2)·Δ_T  +  (p_1/2 + 1)·d_k̂ + ((1−p_1)/2)·Δ_k̂ ]
//! ```
//!
//! — the regrouped form splits into a calibration-variable group and a
//! streaming-variable group, which is what makes the scheduler's
//! decomposition exact. Both groupings are computed and reported; they
//! agree to machine precision.
//!
//! Phase occupancies follow the M/G/∞ view of the arrival process: with
//! offered load `ρ`, `π_1 = p_1`, `π_2 = (1−p_1)(1−e^{−ρ})`,
//! `π_0 = (1−p_1)e^{−ρ}`, and the average communication cost is the
//! occupancy-weighted phase cost.
//!
//! [`simulate_aoi_time_average`] and [`simulate_calibration_aoi`] are
//! discrete-event integrators of the underlying age sawtooths; the
//! closed forms above are tested against them, not the other way round.

use thiserror::Error;

use crate::scenario::ArrivalModel;

/// Errors from age-metric computation.
#[derive(Debug, Error, PartialEq)]
pub enum AgeError {
    /// Sampling intervals must be strictly positive.
    #[error("sampling interval {value} must be > 0")]
    InvalidInterval { value: f64 },
    /// Delays must be non-negative and finite.
    #[error("delay {value} must be ≥ 0 and finite")]
    InvalidDelay { value: f64 },
    /// Probabilities live in [0, 1].
    #[error("probability {value} must lie in [0, 1]")]
    InvalidProbability { value: f64 },
    /// The agent list was empty.
    #[error("agent list is empty")]
    EmptyAgentList,
}

/// Per-agent inputs to the age metrics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentAgeInputs {
    /// Sampling interval Δ_k (s).
    pub sampling_interval_s: f64,
    /// Total delay d_k (s): transmission plus inference.
    pub total_delay_s: f64,
    /// Number of targets the agent currently perceives, g_k.
    pub target_count: u64,
}

impl AgentAgeInputs {
    pub fn validate(&self) -> Result<(), AgeError> {
        if !(self.sampling_interval_s > 0.0) || !self.sampling_interval_s.is_finite() {
            return Err(AgeError::InvalidInterval {
                value: self.sampling_interval_s,
            });
        }
        if !(self.total_delay_s >= 0.0) || !self.total_delay_s.is_finite() {
            return Err(AgeError::InvalidDelay {
                value: self.total_delay_s,
            });
        }
        Ok(())
    }
}

/// Per-phase communication costs in bits: idle, calibrating, streaming.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseCosts {
    pub idle_bits: f64,
    pub calibration_bits: f64,
    pub streaming_bits: f64,
}

/// Cycle-level configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleConfig {
    /// Probability p_1 that a cycle runs a calibration phase.
    pub calibration_prob: f64,
    /// Calibration interval Δ_T (s).
    pub calibration_interval_s: f64,
    /// Quality threshold ε_g: agents with fewer perceived targets are
    /// ignored by the supremum. Defaults to 1 — any visible target counts.
    pub count_threshold: u64,
    /// Phase costs for [`average_comm_cost`].
    pub phase_costs: PhaseCosts,
}

impl Default for CycleConfig {
    fn default() -> Self {
        Self {
            calibration_prob: 0.1,
            calibration_interval_s: 1.0,
            count_threshold: 1,
            phase_costs: PhaseCosts {
                idle_bits: 0.0,
                calibration_bits: 0.0,
                streaming_bits: 0.0,
            },
        }
    }
}

/// Steady-state average age for periodic sampling with fixed delay.
pub fn aoi(agent: &AgentAgeInputs) -> Result<f64, AgeError> {
    agent.validate()?;
    Ok(agent.sampling_interval_s / 2.0 + agent.total_delay_s)
}

/// Streaming-phase AoPT plus the bottleneck index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StreamingAopt {
    /// `max_k 1{g_k ≥ ε_g}·g_k·(Δ_k/2 + d_k)`; 0 when every agent is filtered.
    pub value: f64,
    /// The maximizing agent k̂ (first index on exact ties), if any survived
    /// the threshold.
    pub bottleneck: Option<usize>,
    /// True when the threshold filtered every agent.
    pub idle: bool,
}

/// Supremum of count-weighted ages over agents clearing the threshold.
pub fn aopt_streaming(
    agents: &[AgentAgeInputs],
    eps_g: u64,
) -> Result<StreamingAopt, AgeError> {
    if agents.is_empty() {
        return Err(AgeError::EmptyAgentList);
    }
    let mut best: Option<(usize, f64)> = None;
    for (k, agent) in agents.iter().enumerate() {
        agent.validate()?;
        if agent.target_count < eps_g {
            continue;
        }
        let term =
            agent.target_count as f64 * (agent.sampling_interval_s / 2.0 + agent.total_delay_s);
        match best {
            Some((_, v)) if term <= v => {}
            _ => best = Some((k, term)),
        }
    }
    Ok(match best {
        Some((k, v)) => StreamingAopt {
            value: v,
            bottleneck: Some(k),
            idle: false,
        },
        None => StreamingAopt {
            value: 0.0,
            bottleneck: None,
            idle: true,
        },
    })
}

/// Average age during a calibration phase: a fresh snapshot is requested
/// `Δ_T` after the previous result lands and takes `d` to deliver, so the
/// sawtooth runs from `d` to `2d + Δ_T` — mean `(Δ_T + 3d)/2`.
pub fn aoi_calibration(d_total_s: f64, delta_t_s: f64) -> Result<f64, AgeError> {
    if !(d_total_s >= 0.0) || !d_total_s.is_finite() {
        return Err(AgeError::InvalidDelay { value: d_total_s });
    }
    if !(delta_t_s >= 0.0) || !delta_t_s.is_finite() {
        return Err(AgeError::InvalidDelay { value: delta_t_s });
    }
    Ok((delta_t_s + 3.0 * d_total_s) / 2.0)
}

/// Calibration-phase AoPT: the bottleneck agent's count times its
/// calibration-phase age, `½·g_k̂·(3·d_k̂ + Δ_T)`. Zero when all agents
/// are filtered.
pub fn aopt_calibration(
    agents: &[AgentAgeInputs],
    eps_g: u64,
    delta_t_s: f64,
) -> Result<f64, AgeError> {
    let streaming = aopt_streaming(agents, eps_g)?;
    match streaming.bottleneck {
        None => Ok(0.0),
        Some(k) => {
            let a = &agents[k];
            Ok(0.5 * a.target_count as f64 * (3.0 * a.total_delay_s + delta_t_s))
        }
    }
}

/// Cycle-level AoPT report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AoptReport {
    /// Streaming-phase AoPT (target·seconds).
    pub aopt_streaming: f64,
    /// Calibration-phase AoPT (target·seconds).
    pub aopt_calibration: f64,
    /// Cycle AoPT: `p_1·AoPT_Ca + (1−p_1)·AoPT_St`.
    pub aopt_cycle: f64,
    /// Bottleneck agent k̂, if any.
    pub bottleneck_agent: Option<usize>,
    /// Perceived-target count of the bottleneck agent (0 when idle).
    pub bottleneck_count: u64,
    /// Regrouped calibration-variable term `g_k̂·(p_1/2)·Δ_T`.
    pub calibration_term: f64,
    /// Regrouped streaming-variable term
    /// `g_k̂·[(p_1/2 + 1)·d_k̂ + ((1−p_1)/2)·Δ_k̂]`.
    pub streaming_term: f64,
    /// True when every agent was filtered by the threshold.
    pub idle: bool,
}

/// Cycle AoPT: convex combination of phase AoPTs plus the regrouped
/// decomposition used by the scheduler. The two forms agree to machine
/// precision (relative 1e-12) by construction.
pub fn aopt_cycle(agents: &[AgentAgeInputs], cfg: &CycleConfig) -> Result<AoptReport, AgeError> {
    let p1 = cfg.calibration_prob;
    if !(0.0..=1.0).contains(&p1) {
        return Err(AgeError::InvalidProbability { value: p1 });
    }
    if !(cfg.calibration_interval_s >= 0.0) || !cfg.calibration_interval_s.is_finite() {
        return Err(AgeError::InvalidDelay {
            value: cfg.calibration_interval_s,
        });
    }
    let streaming = aopt_streaming(agents, cfg.count_threshold)?;
    let Some(k) = streaming.bottleneck else {
        return Ok(AoptReport {
            aopt_streaming: 0.0,
            aopt_calibration: 0.0,
            aopt_cycle: 0.0,
            bottleneck_agent: None,
            bottleneck_count: 0,
            calibration_term: 0.0,
            streaming_term: 0.0,
            idle: true,
        });
    };
    let a = &agents[k];
    let g = a.target_count as f64;
    let calibration =
        0.5 * g * (3.0 * a.total_delay_s + cfg.calibration_interval_s);
    let cycle = p1 * calibration + (1.0 - p1) * streaming.value;
    let calibration_term = g * (p1 / 2.0) * cfg.calibration_interval_s;
    let streaming_term = g
        * ((p1 / 2.0 + 1.0) * a.total_delay_s
            + (1.0 - p1) / 2.0 * a.sampling_interval_s);
    Ok(AoptReport {
        aopt_streaming: streaming.value,
        aopt_calibration: calibration,
        aopt_cycle: cycle,
        bottleneck_agent: Some(k),
        bottleneck_count: a.target_count,
        calibration_term,
        streaming_term,
        idle: false,
    })
}

/// Steady-state phase occupancies `[π_0, π_1, π_2]` for calibration
/// probability `p_1` and the arrival model's offered load ρ:
/// `π_1 = p_1`, `π_0 = (1−p_1)·e^{−ρ}`, `π_2` the remainder — so the
/// three sum to exactly 1.0 in floating point.
pub fn phase_occupancies(model: &ArrivalModel, p_1: f64) -> Result<[f64; 3], AgeError> {
    if !(0.0..=1.0).contains(&p_1) {
        return Err(AgeError::InvalidProbability { value: p_1 });
    }
    let rho = model.offered_load();
    if !(rho >= 0.0) {
        return Err(AgeError::InvalidDelay { value: rho });
    }
    let pi_0 = (1.0 - p_1) * (-rho).exp();
    let pi_1 = p_1;
    let pi_2 = 1.0 - (pi_0 + pi_1);
    Ok([pi_0, pi_1, pi_2])
}

/// Occupancy-weighted average communication cost in bits:
/// `π_0·C_0 + π_1·C_1 + π_2·C_2`.
pub fn average_comm_cost(occupancies: &[f64; 3], costs: &PhaseCosts) -> f64 {
    occupancies[0] * costs.idle_bits
        + occupancies[1] * costs.calibration_bits
        + occupancies[2] * costs.streaming_bits
}

/// Discrete-event oracle for [`aoi`]: simulates periodic sampling at
/// interval `delta` with constant delay `d` over `n_cycles` updates and
/// integrates the age sawtooth exactly between deliveries.
pub fn simulate_aoi_time_average(delta: f64, d: f64, n_cycles: usize) -> f64 {
    assert!(delta > 0.0 && d >= 0.0 && n_cycles >= 2);
    // Packet i is generated at i·Δ and delivered at i·Δ + d. Deliveries
    // are in order, so between deliveries the age rises linearly from d
    // to d + Δ.
    let mut integral = 0.0;
    let mut t_prev = d; // first delivery
    let mut gen_prev = 0.0;
    for i in 1..n_cycles {
        let gen = i as f64 * delta;
        let deliver = gen + d;
        let age_start = t_prev - gen_prev;
        let age_end = deliver - gen_prev;
        integral += 0.5 * (age_start + age_end) * (deliver - t_prev);
        t_prev = deliver;
        gen_prev = gen;
    }
    integral / (t_prev - d)
}

/// Discrete-event oracle for [`aoi_calibration`]: each calibration
/// snapshot is requested `delta_t` after the previous result lands and
/// takes `d` to deliver; integrates the resulting sawtooth.
pub fn simulate_calibration_aoi(delta_t: f64, d: f64, n_cycles: usize) -> f64 {
    assert!(delta_t >= 0.0 && d >= 0.0 && n_cycles >= 2);
    let mut integral = 0.0;
    let mut deliver_prev = d; // first snapshot requested at 0
    let mut gen_prev = 0.0;
    let mut measured = 0.0;
    for _ in 1..n_cycles {
        let gen = deliver_prev + delta_t;
        let deliver = gen + d;
        let age_start = deliver_prev - gen_prev;
        let age_end = deliver - gen_prev;
        integral += 0.5 * (age_start + age_end) * (deliver - deliver_prev);
        measured += deliver - deliver_prev;
        deliver_prev = deliver;
        gen_prev = gen;
    }
    if measured == 0.0 {
        // Δ_T = d = 0: age is identically 0.
        return 0.0;
    }
    integral / measured
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn agent(delta: f64, d: f64, g: u64) -> AgentAgeInputs {
        AgentAgeInputs {
            sampling_interval_s: delta,
            total_delay_s: d,
            target_count: g,
        }
    }

    #[test]
    fn aoi_closed_forms() {
        assert_eq!(aoi(&agent(2.0, 0.0, 1)).unwrap(), 1.0);
        assert_eq!(aoi(&agent(1.0, 0.5, 1)).unwrap(), 1.0);
        assert!(matches!(
            aoi(&agent(0.0, 0.5, 1)),
            Err(AgeError::InvalidInterval { .. })
        ));
        assert!(matches!(
            aoi(&agent(1.0, -0.5, 1)),
            Err(AgeError::InvalidDelay { .. })
        ));
    }

    /// The closed form must match the event-driven sawtooth integral.
    #[test]
    fn aoi_matches_event_simulation() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..20 {
            let delta = rng.gen_range(0.05..5.0);
            let d = rng.gen_range(0.0..2.0);
            let simulated = simulate_aoi_time_average(delta, d, 10_000);
            let formula = aoi(&agent(delta, d, 1)).unwrap();
            assert!(
                ((simulated - formula) / formula).abs() < 0.01,
                "Δ={delta} d={d}: sim {simulated} vs formula {formula}"
            );
        }
    }

    #[test]
    fn streaming_all_filtered_is_idle_zero() {
        let agents = [agent(1.0, 0.1, 0), agent(2.0, 0.2, 2)];
        let r = aopt_streaming(&agents, 3).unwrap();
        assert_eq!(r.value, 0.0);
        assert_eq!(r.bottleneck, None);
        assert!(r.idle);
    }

    #[test]
    fn streaming_single_agent_closed_form() {
        let r = aopt_streaming(&[agent(1.0, 0.5, 3)], 1).unwrap();
        assert_eq!(r.value, 3.0);
        assert_eq!(r.bottleneck, Some(0));
    }

    #[test]
    fn streaming_empty_list_errors() {
        assert_eq!(aopt_streaming(&[], 1), Err(AgeError::EmptyAgentList));
    }

    /// 7-agent random instances vs an exhaustive re-evaluation oracle.
    #[test]
    fn streaming_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let agents: Vec<AgentAgeInputs> = (0..7)
                .map(|_| {
                    agent(
                        rng.gen_range(0.1..3.0),
                        rng.gen_range(0.0..1.0),
                        rng.gen_range(0..6),
                    )
                })
                .collect();
            let eps = rng.gen_range(0..3);
            let r = aopt_streaming(&agents, eps).unwrap();
            let oracle = agents
                .iter()
                .map(|a| {
                    if a.target_count >= eps {
                        a.target_count as f64
                            * (a.sampling_interval_s / 2.0 + a.total_delay_s)
                    } else {
                        0.0
                    }
                })
                .fold(0.0f64, f64::max);
            assert_eq!(r.value, if oracle > 0.0 { oracle } else { 0.0 });
        }
    }

    #[test]
    fn streaming_ties_break_to_first_index() {
        let agents = [agent(1.0, 0.5, 2), agent(1.0, 0.5, 2), agent(0.5, 0.0, 1)];
        let r = aopt_streaming(&agents, 1).unwrap();
        assert_eq!(r.bottleneck, Some(0));
    }

    #[test]
    fn calibration_aoi_closed_forms() {
        assert_eq!(aoi_calibration(0.0, 0.0).unwrap(), 0.0);
        assert_eq!(aoi_calibration(1.0, 2.0).unwrap(), 2.5);
    }

    #[test]
    fn calibration_aoi_matches_event_simulation() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let delta_t = rng.gen_range(0.1..5.0);
            let d = rng.gen_range(0.01..2.0);
            let simulated = simulate_calibration_aoi(delta_t, d, 10_000);
            let formula = aoi_calibration(d, delta_t).unwrap();
            assert!(
                ((simulated - formula) / formula).abs() < 0.01,
                "Δ_T={delta_t} d={d}: sim {simulated} vs formula {formula}"
            );
        }
    }

    #[test]
    fn calibration_aopt_closed_form() {
        // g=2, d=1, Δ_T=1 → ½·2·(3+1) = 4.
        let agents = [agent(1.0, 1.0, 2)];
        assert_eq!(aopt_calibration(&agents, 1, 1.0).unwrap(), 4.0);
        // All filtered → 0.
        assert_eq!(aopt_calibration(&agents, 5, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn cycle_edge_probabilities() {
        let agents = [agent(0.8, 0.3, 4), agent(1.5, 0.1, 2)];
        let mut cfg = CycleConfig {
            calibration_prob: 0.0,
            calibration_interval_s: 2.0,
            ..CycleConfig::default()
        };
        let r = aopt_cycle(&agents, &cfg).unwrap();
        assert_eq!(r.aopt_cycle, r.aopt_streaming);
        cfg.calibration_prob = 1.0;
        let r = aopt_cycle(&agents, &cfg).unwrap();
        assert_eq!(r.aopt_cycle, r.aopt_calibration);
    }

    /// Convex-combination form vs regrouped decomposition: equal to
    /// 1e-12 relative on 10^4 random instances.
    #[test]
    fn cycle_identity_holds_to_machine_precision() {
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        for _ in 0..10_000 {
            let n = rng.gen_range(1..8);
            let agents: Vec<AgentAgeInputs> = (0..n)
                .map(|_| {
                    agent(
                        rng.gen_range(0.01..10.0),
                        rng.gen_range(0.0..5.0),
                        rng.gen_range(0..10),
                    )
                })
                .collect();
            let cfg = CycleConfig {
                calibration_prob: rng.gen_range(0.0..=1.0),
                calibration_interval_s: rng.gen_range(0.0..10.0),
                count_threshold: rng.gen_range(0..3),
                ..CycleConfig::default()
            };
            let r = aopt_cycle(&agents, &cfg).unwrap();
            let regrouped = r.calibration_term + r.streaming_term;
            let scale = r.aopt_cycle.abs().max(1.0);
            assert!(
                (r.aopt_cycle - regrouped).abs() <= 1e-12 * scale,
                "identity violated: {} vs {}",
                r.aopt_cycle,
                regrouped
            );
        }
    }

    /// AoPT_St is monotone non-decreasing in every Δ_k and d_k.
    #[test]
    fn streaming_monotone_in_interval_and_delay() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let mut agents: Vec<AgentAgeInputs> = (0..5)
                .map(|_| {
                    agent(
                        rng.gen_range(0.1..3.0),
                        rng.gen_range(0.0..1.0),
                        rng.gen_range(1..6),
                    )
                })
                .collect();
            let base = aopt_streaming(&agents, 1).unwrap().value;
            let k = rng.gen_range(0..agents.len());
            if rng.gen_bool(0.5) {
                agents[k].sampling_interval_s += rng.gen_range(0.0..2.0);
            } else {
                agents[k].total_delay_s += rng.gen_range(0.0..2.0);
            }
            let bumped = aopt_streaming(&agents, 1).unwrap().value;
            assert!(bumped >= base);
        }
    }

    /// k̂ is invariant when all per-agent terms scale by a common
    /// positive constant.
    #[test]
    fn bottleneck_invariant_under_common_scaling() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..100 {
            let agents: Vec<AgentAgeInputs> = (0..6)
                .map(|_| {
                    agent(
                        rng.gen_range(0.1..3.0),
                        rng.gen_range(0.0..1.0),
                        rng.gen_range(1..6),
                    )
                })
                .collect();
            let c = rng.gen_range(0.1..8.0);
            let scaled: Vec<AgentAgeInputs> = agents
                .iter()
                .map(|a| agent(a.sampling_interval_s * c, a.total_delay_s * c, a.target_count))
                .collect();
            assert_eq!(
                aopt_streaming(&agents, 1).unwrap().bottleneck,
                aopt_streaming(&scaled, 1).unwrap().bottleneck
            );
        }
    }

    #[test]
    fn occupancies_closed_forms_and_exact_sum() {
        let zero = ArrivalModel {
            arrival_rate_per_s: 0.0,
            dwell_log_mean: 0.0,
            dwell_log_sigma: 0.0,
        };
        for p1 in [0.0, 0.1, 0.5, 1.0] {
            let [pi0, pi1, pi2] = phase_occupancies(&zero, p1).unwrap();
            assert_eq!(pi1, p1);
            assert_eq!(pi0, 1.0 - p1);
            assert!(pi2.abs() < 1e-15);
        }
        // ρ = 20: idle probability below 1e-8.
        let heavy = ArrivalModel {
            arrival_rate_per_s: 20.0,
            dwell_log_mean: 0.0,
            dwell_log_sigma: 0.0,
        };
        let [pi0, pi1, pi2] = phase_occupancies(&heavy, 0.0).unwrap();
        assert!(pi0 < 1e-8);
        assert_eq!(pi1, 0.0);
        assert!(pi2 > 1.0 - 1e-8);
        // Exact unit sum across random inputs.
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..1000 {
            let model = ArrivalModel {
                arrival_rate_per_s: rng.gen_range(0.0..5.0),
                dwell_log_mean: rng.gen_range(-1.0..2.0),
                dwell_log_sigma: rng.gen_range(0.0..1.0),
            };
            let p1 = rng.gen_range(0.0..=1.0);
            let [pi0, pi1, pi2] = phase_occupancies(&model, p1).unwrap();
            assert_eq!(pi0 + pi1 + pi2, 1.0, "occupancies must sum to exactly 1");
            assert!(pi0 >= 0.0 && pi1 >= 0.0 && pi2 >= 0.0);
        }
    }

    /// Closed-form occupancies vs the scenario module's event-driven
    /// phase simulation at ρ = 1, p_1 = 0.1.
    #[test]
    fn occupancies_match_event_simulation() {
        let sigma: f64 = 0.5;
        let model = ArrivalModel {
            arrival_rate_per_s: 4.0,
            dwell_log_mean: 0.25f64.ln() - sigma * sigma / 2.0,
            dwell_log_sigma: sigma,
        };
        assert!((model.offered_load() - 1.0).abs() < 1e-12);
        let closed = phase_occupancies(&model, 0.1).unwrap();
        let simulated =
            crate::scenario::simulate_phase_fractions(&model, 0.1, 50_000.0, 3).unwrap();
        for (c, s) in closed.iter().zip(&simulated) {
            assert!((c - s).abs() < 0.01, "closed {c} vs simulated {s}");
        }
    }

    #[test]
    fn comm_cost_closed_forms() {
        let equal = PhaseCosts {
            idle_bits: 5.0,
            calibration_bits: 5.0,
            streaming_bits: 5.0,
        };
        let occ = [0.3, 0.2, 0.5];
        assert!((average_comm_cost(&occ, &equal) - 5.0).abs() < 1e-12);
        // p_1 = 1 → pure calibration cost.
        let costs = PhaseCosts {
            idle_bits: 1.0,
            calibration_bits: 2.0,
            streaming_bits: 3.0,
        };
        assert_eq!(average_comm_cost(&[0.0, 1.0, 0.0], &costs), 2.0);
        // Random dot-product oracle.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let occ = [rng.gen::<f64>(), rng.gen::<f64>(), rng.gen::<f64>()];
            let costs = PhaseCosts {
                idle_bits: rng.gen_range(0.0..1e6),
                calibration_bits: rng.gen_range(0.0..1e6),
                streaming_bits: rng.gen_range(0.0..1e6),
            };
            let oracle = occ[0] * costs.idle_bits
                + occ[1] * costs.calibration_bits
                + occ[2] * costs.streaming_bits;
            assert_eq!(average_comm_cost(&occ, &costs), oracle);
        }
    }
}
