//! Synthetic price panels with planted lagged dependencies — the pipeline's
//! ground-truth oracle.
//!
//! Every entity is a flat (optionally noisy) baseline onto which jump episodes
//! are overlaid: a ramp of total size J over at most two days, peaking on the
//! scheduled day, followed by a one-day correction of 0.4·J. The shape makes
//! each scheduled peak a detectable drawup by construction. Jumps are
//! scheduled in two passes: first each entity's base jumps (probability
//! `base_jump_prob` per day), then jumps coupled to parent base jumps through
//! the planted edges (probability `alpha`, at the edge lag) plus optional
//! same-entity self-excitation. Regime windows scale noise, jump intensity
//! and self-excitation by their volatility multiplier.

use std::collections::BTreeSet;

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::PricePanel;
use crate::seeds::mix_seed;

/// Jumps are only scheduled after this many warm-up days (epsilon window
/// plus ramp slack), so the detector always has history.
pub const EVENT_MARGIN: usize = 14;

/// Minimum spacing between two peaks of the same entity; closer peaks cannot
/// both be realized as local maxima with their own corrections.
pub const MIN_PEAK_SPACING: usize = 2;

/// A planted directed dependency: a base jump of `source` triggers a jump of
/// `target` exactly `lag` days later with probability `alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlantedEdge {
    pub source: usize,
    pub target: usize,
    pub lag: usize,
}

/// A volatility regime over `[start, end)`; later entries win on overlap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Regime {
    pub start: usize,
    pub end: usize,
    pub multiplier: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_entities: usize,
    pub days: usize,
    pub edges: Vec<PlantedEdge>,
    /// Coupling probability along planted edges.
    pub alpha: f64,
    pub base_jump_prob: f64,
    /// Jump size distribution: exp(Normal(jump_log_mean, jump_log_sd)) bp.
    pub jump_log_mean: f64,
    pub jump_log_sd: f64,
    /// Baseline random-walk step sigma in bp (0 = flat baseline).
    pub noise_sigma: f64,
    /// Probability that a base jump triggers a same-entity jump 2-3 days on.
    pub self_excitation: f64,
    pub regimes: Vec<Regime>,
    pub rng_seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_entities: 20,
            days: 3000,
            edges: cycle_edges(20, &[1, 2, 3]),
            alpha: 0.3,
            base_jump_prob: 0.0067,
            jump_log_mean: 30.0f64.ln(),
            jump_log_sd: 0.4,
            noise_sigma: 0.0,
            self_excitation: 0.0,
            regimes: Vec::new(),
            rng_seed: 7,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_entities == 0 {
            return Err(Error::InvalidSynthSpec("need at least one entity".into()));
        }
        if self.days <= EVENT_MARGIN + 3 {
            return Err(Error::InvalidSynthSpec(format!(
                "need more than {} days, got {}",
                EVENT_MARGIN + 3,
                self.days
            )));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidSynthSpec(format!(
                "alpha must be in [0, 1], got {}",
                self.alpha
            )));
        }
        if self.base_jump_prob < 0.0 || self.base_jump_prob + self.alpha > 1.0 {
            return Err(Error::InvalidSynthSpec(format!(
                "need 0 <= p0 and p0 + alpha <= 1, got p0 {} alpha {}",
                self.base_jump_prob, self.alpha
            )));
        }
        if !(0.0..=1.0).contains(&self.self_excitation) {
            return Err(Error::InvalidSynthSpec(format!(
                "self_excitation must be in [0, 1], got {}",
                self.self_excitation
            )));
        }
        if self.noise_sigma < 0.0 || !self.noise_sigma.is_finite() {
            return Err(Error::InvalidSynthSpec(format!(
                "noise_sigma must be finite and >= 0, got {}",
                self.noise_sigma
            )));
        }
        for e in &self.edges {
            if e.source == e.target {
                return Err(Error::InvalidSynthSpec(format!(
                    "planted adjacency must have zero diagonal (edge {} -> {})",
                    e.source, e.target
                )));
            }
            if e.source >= self.n_entities || e.target >= self.n_entities {
                return Err(Error::InvalidSynthSpec(format!(
                    "edge {} -> {} out of range for {} entities",
                    e.source, e.target, self.n_entities
                )));
            }
            if !(1..=3).contains(&e.lag) {
                return Err(Error::InvalidSynthSpec(format!(
                    "edge lag must be 1..=3, got {}",
                    e.lag
                )));
            }
        }
        for r in &self.regimes {
            if r.start >= r.end || r.end > self.days {
                return Err(Error::InvalidSynthSpec(format!(
                    "regime [{}, {}) out of range for {} days",
                    r.start, r.end, self.days
                )));
            }
            if r.multiplier.is_nan() || r.multiplier <= 0.0 {
                return Err(Error::InvalidSynthSpec(format!(
                    "regime multiplier must be positive, got {}",
                    r.multiplier
                )));
            }
        }
        Ok(())
    }

    fn multipliers(&self) -> Vec<f64> {
        let mut mult = vec![1.0; self.days];
        for r in &self.regimes {
            for m in &mut mult[r.start..r.end] {
                *m = r.multiplier;
            }
        }
        mult
    }
}

/// A directed cycle over all entities with lags rotating through `lags` —
/// the densest planted graph free of shared-parent contamination.
pub fn cycle_edges(n: usize, lags: &[usize]) -> Vec<PlantedEdge> {
    (0..n)
        .map(|i| PlantedEdge {
            source: i,
            target: (i + 1) % n,
            lag: lags[i % lags.len()],
        })
        .collect()
}

/// What the generator actually planted, for oracle comparisons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub edges: Vec<PlantedEdge>,
    pub alpha: f64,
    /// Realized jump peak days per entity, ascending.
    pub events: Vec<Vec<usize>>,
}

impl GroundTruth {
    /// Planted adjacency as a set of ordered index pairs.
    pub fn edge_pairs(&self) -> BTreeSet<(usize, usize)> {
        self.edges.iter().map(|e| (e.source, e.target)).collect()
    }
}

fn entity_name(i: usize) -> String {
    format!("E{i:03}")
}

struct PeakSchedule {
    days: usize,
    peaks: BTreeSet<usize>,
}

impl PeakSchedule {
    fn new(days: usize) -> Self {
        PeakSchedule {
            days,
            peaks: BTreeSet::new(),
        }
    }

    fn can_place(&self, t: usize) -> bool {
        if t < EVENT_MARGIN || t + 2 >= self.days {
            return false;
        }
        self.peaks
            .range(t.saturating_sub(MIN_PEAK_SPACING - 1)..=t + MIN_PEAK_SPACING - 1)
            .next()
            .is_none()
    }

    fn place(&mut self, t: usize) -> bool {
        if self.can_place(t) {
            self.peaks.insert(t);
            true
        } else {
            false
        }
    }
}

/// Generate the price panel and its ground truth. Deterministic per seed:
/// every pass draws from sub-seeded streams, so neither thread scheduling nor
/// edge order can perturb the output.
pub fn generate_panel(spec: &SynthSpec) -> Result<(PricePanel, GroundTruth)> {
    spec.validate()?;
    let n = spec.n_entities;
    let t_len = spec.days;
    let mult = spec.multipliers();

    // pass A: base jumps per entity
    let mut schedules: Vec<PeakSchedule> = (0..n).map(|_| PeakSchedule::new(t_len)).collect();
    let mut base: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(spec.rng_seed, &[1, i as u64]));
        for (t, &m) in mult.iter().enumerate().take(t_len.saturating_sub(2)).skip(EVENT_MARGIN) {
            let p = (spec.base_jump_prob * m).clamp(0.0, 0.5);
            if rng.random_bool(p) && schedules[i].place(t) {
                base[i].push(t);
            }
        }
    }

    // pass B: jumps coupled to parent base jumps, plus self-excitation;
    // candidates are collected first and inserted in sorted order
    let mut extras: Vec<(usize, usize)> = Vec::new();
    for (e_idx, edge) in spec.edges.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(spec.rng_seed, &[2, e_idx as u64]));
        for &t in &base[edge.source] {
            if rng.random_bool(spec.alpha) {
                extras.push((edge.target, t + edge.lag));
            }
        }
    }
    if spec.self_excitation > 0.0 {
        for (i, base_days) in base.iter().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(spec.rng_seed, &[3, i as u64]));
            for &t in base_days {
                let p = (spec.self_excitation * mult[t]).clamp(0.0, 0.95);
                if rng.random_bool(p) {
                    let lag = rng.random_range(2..=3usize);
                    extras.push((i, t + lag));
                }
            }
        }
    }
    extras.sort_unstable();
    for (i, t) in extras {
        schedules[i].place(t);
    }

    // price paths: baseline walk plus jump overlays
    let mut values = Vec::with_capacity(n);
    let mut events = Vec::with_capacity(n);
    for (i, schedule) in schedules.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(spec.rng_seed, &[4, i as u64]));
        let start_level = 80.0 + rng.random_range(0.0..40.0);
        let mut delta = vec![0.0f64; t_len];
        if spec.noise_sigma > 0.0 {
            for t in 1..t_len {
                let z: f64 = rng.sample(StandardNormal);
                delta[t] = z * spec.noise_sigma * mult[t];
            }
        }
        let peaks: Vec<usize> = schedule.peaks.iter().copied().collect();
        let mut prev: Option<usize> = None;
        for &p in &peaks {
            let z: f64 = rng.sample(StandardNormal);
            let jump = (spec.jump_log_mean + spec.jump_log_sd * z).exp();
            let gap = prev.map_or(usize::MAX, |q| p - q);
            let ramp = 2.min(gap.saturating_sub(1)).max(1);
            for d in 0..ramp {
                delta[p - ramp + 1 + d] += jump / ramp as f64;
            }
            delta[p + 1] -= 0.4 * jump;
            prev = Some(p);
        }
        let mut row = Vec::with_capacity(t_len);
        let mut level = start_level;
        for &d in &delta {
            level = (level + d).max(1.0);
            row.push(level);
        }
        // delta[0] is always 0, so the first day sits at the start level
        values.push(row);
        events.push(peaks);
    }

    let start_date = NaiveDate::from_ymd_opt(2006, 1, 2).unwrap();
    let panel = PricePanel {
        entities: (0..n).map(entity_name).collect(),
        calendar: (0..t_len)
            .map(|t| start_date + chrono::Days::new(t as u64))
            .collect(),
        values,
        observed: vec![vec![true; t_len]; n],
    };
    let truth = GroundTruth {
        edges: spec.edges.clone(),
        alpha: spec.alpha,
        events,
    };
    Ok((panel, truth))
}
