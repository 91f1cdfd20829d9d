//! Joint-drawup statistics: lagged joint frequencies, correction for the
//! independence baseline, and per-pair permutation filtering down to the final
//! non-negative dependency matrix W.
//!
//! For entities i, j and lag τ the joint frequency is
//! `D^τ_ij = #{t : V_i(t) = 1 and V_j(t+τ) = 1} / T`, and the raw
//! interdependence is `Wraw^τ_ij = D^τ_ij − P_i·P_j`. Each (pair, lag) cell is
//! kept only if it exceeds the upper 95th percentile of the same statistic
//! recomputed after redrawing both event vectors' positions uniformly at
//! random; surviving cells are summed over lags (lags 1..3 only on the
//! diagonal, where lag 0 is trivially P_i).

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::drawup::DrawupVector;
use crate::error::{Error, Result};
use crate::seeds::mix_seed;

/// The lags the pipeline scans, in days.
pub const LAGS: [usize; 4] = [0, 1, 2, 3];

/// Per-lag joint-frequency matrices plus marginal event frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct LaggedJointMatrix {
    pub lags: Vec<usize>,
    /// One N×N frequency matrix per lag, same order as `lags`.
    pub d: Vec<DMatrix<f64>>,
    /// Marginal drawup frequency P_i per entity.
    pub marginals: DVector<f64>,
    /// Sample length in days.
    pub t: usize,
}

/// Metadata describing how a dependency matrix was filtered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterMeta {
    pub n_perm: usize,
    pub confidence: f64,
    pub seed: u64,
}

/// Final filtered interdependence matrix; diagonal = trend reinforcement.
#[derive(Debug, Clone, PartialEq)]
pub struct DependencyMatrix {
    pub entities: Vec<String>,
    pub w: DMatrix<f64>,
    pub period_label: String,
    pub filter_meta: FilterMeta,
}

impl DependencyMatrix {
    pub fn n(&self) -> usize {
        self.w.nrows()
    }
}

/// Options for the co-movement stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComovementOptions {
    pub n_perm: usize,
    pub confidence: f64,
    pub seed: u64,
    /// Renormalize joint frequencies by P_i (the conditional-probability
    /// reading); off by default, which uses plain joint frequencies.
    pub conditional: bool,
}

impl Default for ComovementOptions {
    fn default() -> Self {
        ComovementOptions {
            n_perm: 100,
            confidence: 0.95,
            seed: 0,
            conditional: false,
        }
    }
}

impl ComovementOptions {
    pub fn validate(&self) -> Result<()> {
        if self.n_perm < 20 {
            return Err(Error::InvalidParameter(format!(
                "n_perm must be >= 20, got {}",
                self.n_perm
            )));
        }
        if !(0.0 < self.confidence && self.confidence < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "confidence must be in (0, 1), got {}",
                self.confidence
            )));
        }
        Ok(())
    }
}

/// Count days t with `V_i(t) = 1` and `V_j(t+τ) = 1` (t + τ < T).
pub fn joint_counts(v_i: &DrawupVector, v_j: &DrawupVector, tau: usize) -> Result<usize> {
    if v_i.events.len() != v_j.events.len() {
        return Err(Error::LengthMismatch {
            left: v_i.events.len(),
            right: v_j.events.len(),
        });
    }
    Ok(joint_count_events(&v_i.events, &v_j.events, tau))
}

fn joint_count_events(a: &[bool], b: &[bool], tau: usize) -> usize {
    let t = a.len();
    if tau >= t {
        return 0;
    }
    (0..t - tau).filter(|&s| a[s] && b[s + tau]).count()
}

/// Build D^τ for τ in [`LAGS`] and the marginals P_i.
pub fn build_joint_matrices(vectors: &[DrawupVector]) -> Result<LaggedJointMatrix> {
    let n = vectors.len();
    if n == 0 {
        return Err(Error::EmptyVectorSet);
    }
    let t = vectors[0].events.len();
    if t == 0 {
        return Err(Error::EmptyVectorSet);
    }
    for v in vectors {
        if v.events.len() != t {
            return Err(Error::LengthMismatch {
                left: t,
                right: v.events.len(),
            });
        }
    }
    let marginals = DVector::from_fn(n, |i, _| vectors[i].event_count() as f64 / t as f64);
    let mut d = Vec::with_capacity(LAGS.len());
    for &tau in &LAGS {
        d.push(DMatrix::from_fn(n, n, |i, j| {
            joint_count_events(&vectors[i].events, &vectors[j].events, tau) as f64 / t as f64
        }));
    }
    Ok(LaggedJointMatrix {
        lags: LAGS.to_vec(),
        d,
        marginals,
        t,
    })
}

/// Subtract the independence baseline: `Wraw^τ_ij = D^τ_ij − P_i·P_j`
/// (divided by P_i under the conditional reading). Entries may be negative.
pub fn raw_interdependence(joint: &LaggedJointMatrix, conditional: bool) -> Vec<DMatrix<f64>> {
    let n = joint.marginals.len();
    joint
        .d
        .iter()
        .map(|d| {
            DMatrix::from_fn(n, n, |i, j| {
                let raw = d[(i, j)] - joint.marginals[i] * joint.marginals[j];
                if conditional {
                    if joint.marginals[i] > 0.0 {
                        raw / joint.marginals[i]
                    } else {
                        0.0
                    }
                } else {
                    raw
                }
            })
        })
        .collect()
}

/// Upper `confidence` percentile (nearest-rank) of the raw interdependence
/// recomputed after redrawing both vectors' event positions uniformly, n_perm
/// times. Zero if either vector has no events.
pub fn permutation_threshold(
    events_i: &[bool],
    events_j: &[bool],
    tau: usize,
    n_perm: usize,
    confidence: f64,
    rng_seed: u64,
) -> Result<f64> {
    if events_i.len() != events_j.len() {
        return Err(Error::LengthMismatch {
            left: events_i.len(),
            right: events_j.len(),
        });
    }
    let opts = ComovementOptions {
        n_perm,
        confidence,
        ..Default::default()
    };
    opts.validate()?;

    let t = events_i.len();
    let k_i = events_i.iter().filter(|&&e| e).count();
    let k_j = events_j.iter().filter(|&&e| e).count();
    if k_i == 0 || k_j == 0 {
        return Ok(0.0);
    }
    let p_ij = (k_i as f64 / t as f64) * (k_j as f64 / t as f64);

    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut scratch = vec![false; t];
    let mut samples = Vec::with_capacity(n_perm);
    for _ in 0..n_perm {
        // redraw positions uniformly without replacement; distributionally the
        // same as permuting the whole vector since only positions matter
        let pos_i = rand::seq::index::sample(&mut rng, t, k_i);
        let pos_j = rand::seq::index::sample(&mut rng, t, k_j);
        for p in pos_j.iter() {
            scratch[p] = true;
        }
        let count = pos_i
            .iter()
            .filter(|&p| p + tau < t && scratch[p + tau])
            .count();
        for p in pos_j.iter() {
            scratch[p] = false;
        }
        samples.push(count as f64 / t as f64 - p_ij);
    }
    samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(samples[percentile_index(n_perm, confidence)])
}

/// Nearest-rank index of the upper `confidence` percentile in a sorted sample
/// of length `n`.
pub(crate) fn percentile_index(n: usize, confidence: f64) -> usize {
    (((confidence * n as f64).ceil() as usize).max(1) - 1).min(n - 1)
}

/// Per-lag threshold matrices for every ordered pair. Pair jobs run in
/// parallel; each owns an RNG seeded from (seed, i, j, τ) so the result is
/// independent of scheduling.
pub fn permutation_thresholds(
    vectors: &[DrawupVector],
    opts: &ComovementOptions,
) -> Result<Vec<DMatrix<f64>>> {
    opts.validate()?;
    let n = vectors.len();
    if n == 0 {
        return Err(Error::EmptyVectorSet);
    }
    let jobs: Vec<(usize, usize, usize)> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .flat_map(|(i, j)| LAGS.iter().map(move |&tau| (i, j, tau)))
        .collect();
    let computed: Vec<((usize, usize, usize), f64)> = jobs
        .par_iter()
        .map(|&(i, j, tau)| {
            let seed = mix_seed(opts.seed, &[i as u64, j as u64, tau as u64]);
            let thr = permutation_threshold(
                &vectors[i].events,
                &vectors[j].events,
                tau,
                opts.n_perm,
                opts.confidence,
                seed,
            )?;
            Ok(((i, j, tau), thr))
        })
        .collect::<Result<_>>()?;
    let mut out = vec![DMatrix::zeros(n, n); LAGS.len()];
    for ((i, j, tau), thr) in computed {
        let scaled = if opts.conditional {
            let p_i = vectors[i].event_count() as f64 / vectors[i].events.len() as f64;
            if p_i > 0.0 {
                thr / p_i
            } else {
                0.0
            }
        } else {
            thr
        };
        out[tau][(i, j)] = scaled;
    }
    Ok(out)
}

/// Zero every cell at or below its threshold, sum survivors over lags (lags
/// 1..3 only on the diagonal) and clamp at zero.
pub fn filter_and_aggregate(
    entities: Vec<String>,
    period_label: impl Into<String>,
    wraw: &[DMatrix<f64>],
    thresholds: &[DMatrix<f64>],
    meta: FilterMeta,
) -> Result<DependencyMatrix> {
    if wraw.len() != LAGS.len() || thresholds.len() != LAGS.len() {
        return Err(Error::ShapeMismatch(format!(
            "expected {} per-lag matrices, got {} raw and {} thresholds",
            LAGS.len(),
            wraw.len(),
            thresholds.len()
        )));
    }
    let n = wraw[0].nrows();
    for m in wraw.iter().chain(thresholds.iter()) {
        if m.nrows() != n || m.ncols() != n {
            return Err(Error::ShapeMismatch(format!(
                "per-lag matrices must all be {n}x{n}"
            )));
        }
    }
    if entities.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "{} entities for a {n}x{n} matrix",
            entities.len()
        )));
    }
    let mut w = DMatrix::zeros(n, n);
    for (idx, &tau) in LAGS.iter().enumerate() {
        for i in 0..n {
            for j in 0..n {
                if i == j && tau == 0 {
                    continue; // self at lag 0 is identically P_i
                }
                let raw = wraw[idx][(i, j)];
                if raw > thresholds[idx][(i, j)] {
                    w[(i, j)] += raw;
                }
            }
        }
    }
    w.apply(|v: &mut f64| *v = v.max(0.0));
    Ok(DependencyMatrix {
        entities,
        w,
        period_label: period_label.into(),
        filter_meta: meta,
    })
}

/// Full co-movement stage output, keeping the intermediates for persistence
/// and audit.
#[derive(Debug, Clone)]
pub struct ComovementOutput {
    pub joint: LaggedJointMatrix,
    pub wraw: Vec<DMatrix<f64>>,
    pub thresholds: Vec<DMatrix<f64>>,
    pub dependency: DependencyMatrix,
}

impl ComovementOutput {
    /// Fraction of off-diagonal (pair, lag) cells that survived the filter.
    pub fn significant_cell_fraction(&self) -> f64 {
        let n = self.dependency.n();
        if n < 2 {
            return 0.0;
        }
        let mut surviving = 0usize;
        for (idx, _) in LAGS.iter().enumerate() {
            for i in 0..n {
                for j in 0..n {
                    if i != j && self.wraw[idx][(i, j)] > self.thresholds[idx][(i, j)] {
                        surviving += 1;
                    }
                }
            }
        }
        surviving as f64 / (LAGS.len() * n * (n - 1)) as f64
    }
}

/// Run the whole stage: joint matrices, raw interdependence, permutation
/// thresholds and the filtered aggregate.
pub fn dependency_from_vectors(
    vectors: &[DrawupVector],
    period_label: impl Into<String>,
    opts: &ComovementOptions,
) -> Result<ComovementOutput> {
    opts.validate()?;
    let joint = build_joint_matrices(vectors)?;
    let wraw = raw_interdependence(&joint, opts.conditional);
    let thresholds = permutation_thresholds(vectors, opts)?;
    let dependency = filter_and_aggregate(
        vectors.iter().map(|v| v.entity_id.clone()).collect(),
        period_label,
        &wraw,
        &thresholds,
        FilterMeta {
            n_perm: opts.n_perm,
            confidence: opts.confidence,
            seed: opts.seed,
        },
    )?;
    Ok(ComovementOutput {
        joint,
        wraw,
        thresholds,
        dependency,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;

    fn vector(id: &str, events: &[u8]) -> DrawupVector {
        DrawupVector {
            entity_id: id.into(),
            events: events.iter().map(|&e| e != 0).collect(),
            episodes: Vec::new(),
        }
    }

    #[test]
    fn self_count_at_lag_zero_is_event_count() {
        let v = vector("A", &[1, 0, 1, 0]);
        assert_eq!(joint_counts(&v, &v, 0).unwrap(), 2);
    }

    #[test]
    fn lagged_count_matches_definition() {
        let a = vector("A", &[1, 0, 0, 0]);
        let b = vector("B", &[0, 0, 1, 0]);
        assert_eq!(joint_counts(&a, &b, 2).unwrap(), 1);
        assert_eq!(joint_counts(&a, &b, 1).unwrap(), 0);
        assert_eq!(joint_counts(&b, &a, 2).unwrap(), 0);
    }

    #[test]
    fn length_mismatch_is_an_error() {
        let a = vector("A", &[1, 0]);
        let b = vector("B", &[1, 0, 0]);
        assert!(matches!(
            joint_counts(&a, &b, 0),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn joint_count_matches_brute_force_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let t = rng.random_range(5..200);
            let a: Vec<bool> = (0..t).map(|_| rng.random_bool(0.2)).collect();
            let b: Vec<bool> = (0..t).map(|_| rng.random_bool(0.2)).collect();
            for tau in LAGS {
                let mut brute = 0;
                for s in 0..t {
                    if s + tau < t && a[s] && b[s + tau] {
                        brute += 1;
                    }
                }
                assert_eq!(joint_count_events(&a, &b, tau), brute);
            }
        }
    }

    #[test]
    fn single_entity_joint_matrix() {
        // events (1,1,0,0): P = 0.5, one (t, t+1) coincidence -> D^1 = 1/4
        let v = vector("A", &[1, 1, 0, 0]);
        let joint = build_joint_matrices(std::slice::from_ref(&v)).unwrap();
        assert_relative_eq!(joint.marginals[0], 0.5);
        assert_relative_eq!(joint.d[1][(0, 0)], 0.25);
        assert_relative_eq!(joint.d[0][(0, 0)], 0.5); // D^0_ii == P_i
    }

    #[test]
    fn disjoint_supports_have_zero_joint_frequency() {
        let a = vector("A", &[1, 0, 0, 0, 0, 0, 0, 0]);
        let b = vector("B", &[0, 0, 0, 0, 0, 1, 0, 0]);
        let joint = build_joint_matrices(&[a, b]).unwrap();
        for d in &joint.d {
            assert_eq!(d[(0, 1)], 0.0);
            assert_eq!(d[(1, 0)], 0.0);
        }
    }

    #[test]
    fn identical_vectors_coincide_at_lag_zero() {
        let a = vector("A", &[1, 0, 1, 0, 1, 0]);
        let b = vector("B", &[1, 0, 1, 0, 1, 0]);
        let joint = build_joint_matrices(&[a, b]).unwrap();
        assert_relative_eq!(joint.d[0][(0, 1)], joint.marginals[0]);
        assert_relative_eq!(joint.d[0][(1, 0)], joint.marginals[0]);
    }

    #[test]
    fn raw_interdependence_subtracts_independence_baseline() {
        let a = vector("A", &[1, 0, 1, 0]);
        let b = vector("B", &[1, 0, 1, 0]);
        let joint = build_joint_matrices(&[a, b]).unwrap();
        let wraw = raw_interdependence(&joint, false);
        // D^0 = 0.5, P_i P_j = 0.25
        assert_relative_eq!(wraw[0][(0, 1)], 0.25);
    }

    #[test]
    fn raw_interdependence_of_independent_vectors_is_small() {
        // long random vectors: |Wraw| below 3 binomial standard errors
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let t = 20_000;
        let a: Vec<u8> = (0..t).map(|_| u8::from(rng.random_bool(0.1))).collect();
        let b: Vec<u8> = (0..t).map(|_| u8::from(rng.random_bool(0.1))).collect();
        let joint =
            build_joint_matrices(&[vector("A", &a), vector("B", &b)]).unwrap();
        let wraw = raw_interdependence(&joint, false);
        let p = joint.marginals[0] * joint.marginals[1];
        let stderr = (p * (1.0 - p) / t as f64).sqrt();
        for (lag_idx, m) in wraw.iter().enumerate() {
            assert!(
                m[(0, 1)].abs() < 3.0 * stderr,
                "lag {}: {} vs stderr {}",
                lag_idx,
                m[(0, 1)],
                stderr
            );
        }
    }

    #[test]
    fn entity_without_events_has_nonpositive_raw_row() {
        let a = vector("A", &[0, 0, 0, 0]);
        let b = vector("B", &[1, 0, 1, 0]);
        let joint = build_joint_matrices(&[a, b]).unwrap();
        let wraw = raw_interdependence(&joint, false);
        for d in &wraw {
            assert!(d[(0, 1)] <= 0.0);
            assert!(d[(0, 0)] <= 0.0);
        }
    }

    #[test]
    fn threshold_zero_for_eventless_vector() {
        let empty = vec![false; 100];
        let busy: Vec<bool> = (0..100).map(|t| t % 7 == 0).collect();
        let thr = permutation_threshold(&empty, &busy, 1, 100, 0.95, 1).unwrap();
        assert_eq!(thr, 0.0);
    }

    #[test]
    fn threshold_is_deterministic_in_the_seed() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a: Vec<bool> = (0..500).map(|_| rng.random_bool(0.3)).collect();
        let b: Vec<bool> = (0..500).map(|_| rng.random_bool(0.3)).collect();
        let t1 = permutation_threshold(&a, &b, 2, 100, 0.95, 99).unwrap();
        let t2 = permutation_threshold(&a, &b, 2, 100, 0.95, 99).unwrap();
        assert_eq!(t1, t2);
    }

    #[test]
    fn threshold_agrees_with_independent_full_shuffle_oracle() {
        // dense vectors, T = 1000: compare against a structurally different
        // implementation (Fisher-Yates full shuffle of the vectors) within a
        // couple of percentile standard errors
        use rand::seq::SliceRandom;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let t = 1000;
        let a: Vec<bool> = (0..t).map(|_| rng.random_bool(0.5)).collect();
        let b: Vec<bool> = (0..t).map(|_| rng.random_bool(0.5)).collect();
        let n_perm = 400;
        let mine = permutation_threshold(&a, &b, 1, n_perm, 0.95, 5).unwrap();

        let p_ij = (a.iter().filter(|&&x| x).count() as f64 / t as f64)
            * (b.iter().filter(|&&x| x).count() as f64 / t as f64);
        let mut oracle_rng = ChaCha8Rng::seed_from_u64(987_654);
        let mut sa = a.clone();
        let mut sb = b.clone();
        let mut samples: Vec<f64> = (0..n_perm)
            .map(|_| {
                sa.shuffle(&mut oracle_rng);
                sb.shuffle(&mut oracle_rng);
                joint_count_events(&sa, &sb, 1) as f64 / t as f64 - p_ij
            })
            .collect();
        samples.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let oracle = samples[percentile_index(n_perm, 0.95)];
        let mean = samples.iter().sum::<f64>() / n_perm as f64;
        let sd = (samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
            / (n_perm as f64 - 1.0))
            .sqrt();
        assert!(
            (mine - oracle).abs() <= 0.4 * sd,
            "mine {mine} vs oracle {oracle} (sd {sd})"
        );
    }

    #[test]
    fn filter_zeroes_everything_below_threshold() {
        let n = 3;
        let wraw = vec![DMatrix::from_element(n, n, 0.1); 4];
        let thr = vec![DMatrix::from_element(n, n, 0.2); 4];
        let dep = filter_and_aggregate(
            vec!["a".into(), "b".into(), "c".into()],
            "p",
            &wraw,
            &thr,
            FilterMeta { n_perm: 100, confidence: 0.95, seed: 0 },
        )
        .unwrap();
        assert_eq!(dep.w, DMatrix::zeros(n, n));
    }

    #[test]
    fn ties_are_filtered_out() {
        let n = 2;
        let wraw = vec![DMatrix::from_element(n, n, 0.2); 4];
        let thr = vec![DMatrix::from_element(n, n, 0.2); 4];
        let dep = filter_and_aggregate(
            vec!["a".into(), "b".into()],
            "p",
            &wraw,
            &thr,
            FilterMeta { n_perm: 100, confidence: 0.95, seed: 0 },
        )
        .unwrap();
        assert_eq!(dep.w, DMatrix::zeros(n, n));
    }

    #[test]
    fn surviving_lags_are_summed() {
        let n = 2;
        let mut wraw = vec![DMatrix::zeros(n, n); 4];
        wraw[1][(0, 1)] = 0.2;
        wraw[2][(0, 1)] = 0.1;
        let thr = vec![DMatrix::zeros(n, n); 4];
        let dep = filter_and_aggregate(
            vec!["a".into(), "b".into()],
            "p",
            &wraw,
            &thr,
            FilterMeta { n_perm: 100, confidence: 0.95, seed: 0 },
        )
        .unwrap();
        assert_relative_eq!(dep.w[(0, 1)], 0.3);
        assert_eq!(dep.w[(1, 0)], 0.0);
    }

    #[test]
    fn diagonal_skips_lag_zero() {
        let n = 2;
        // lag-0 diagonal raw value would survive any threshold, but must not count
        let mut wraw = vec![DMatrix::zeros(n, n); 4];
        wraw[0][(0, 0)] = 0.5;
        wraw[2][(0, 0)] = 0.05;
        let thr = vec![DMatrix::zeros(n, n); 4];
        let dep = filter_and_aggregate(
            vec!["a".into(), "b".into()],
            "p",
            &wraw,
            &thr,
            FilterMeta { n_perm: 100, confidence: 0.95, seed: 0 },
        )
        .unwrap();
        assert_relative_eq!(dep.w[(0, 0)], 0.05);
    }

    #[test]
    fn final_matrix_is_nonnegative_and_bounded_by_joint_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let t = 600;
        let vectors: Vec<DrawupVector> = (0..5)
            .map(|i| {
                let ev: Vec<u8> = (0..t).map(|_| u8::from(rng.random_bool(0.05))).collect();
                vector(&format!("e{i}"), &ev)
            })
            .collect();
        let out = dependency_from_vectors(
            &vectors,
            "p",
            &ComovementOptions { seed: 9, ..Default::default() },
        )
        .unwrap();
        let n = out.dependency.n();
        for i in 0..n {
            for j in 0..n {
                let w = out.dependency.w[(i, j)];
                assert!(w >= 0.0);
                let joint_sum: f64 = out.joint.d.iter().map(|d| d[(i, j)]).sum();
                assert!(w <= joint_sum + 1e-12);
            }
        }
    }

    #[test]
    fn survivor_fraction_non_increasing_in_confidence() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let t = 800;
        let vectors: Vec<DrawupVector> = (0..6)
            .map(|i| {
                let ev: Vec<u8> = (0..t).map(|_| u8::from(rng.random_bool(0.04))).collect();
                vector(&format!("e{i}"), &ev)
            })
            .collect();
        let mut last = f64::INFINITY;
        for confidence in [0.80, 0.90, 0.95, 0.99] {
            let out = dependency_from_vectors(
                &vectors,
                "p",
                &ComovementOptions { confidence, seed: 5, ..Default::default() },
            )
            .unwrap();
            let frac = out.significant_cell_fraction();
            assert!(
                frac <= last + 1e-12,
                "fraction rose from {last} to {frac} at confidence {confidence}"
            );
            last = frac;
        }
    }

    #[test]
    fn symmetric_inputs_give_symmetric_lag_zero_component() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let t = 400;
        let vectors: Vec<DrawupVector> = (0..4)
            .map(|i| {
                let ev: Vec<u8> = (0..t).map(|_| u8::from(rng.random_bool(0.06))).collect();
                vector(&format!("e{i}"), &ev)
            })
            .collect();
        let joint = build_joint_matrices(&vectors).unwrap();
        let wraw = raw_interdependence(&joint, false);
        // the tau = 0 component is symmetric by definition
        let n = vectors.len();
        for i in 0..n {
            for j in 0..n {
                assert_relative_eq!(wraw[0][(i, j)], wraw[0][(j, i)], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn percentile_index_nearest_rank() {
        assert_eq!(percentile_index(100, 0.95), 94);
        assert_eq!(percentile_index(100, 0.99), 98);
        assert_eq!(percentile_index(20, 0.95), 18);
        assert_eq!(percentile_index(1, 0.95), 0);
    }
}
