//! Detection of ε-drawups: persistent upward runs in a price series that end
//! at a peak and are confirmed when the following correction exceeds the local
//! variation threshold ε.
//!
//! The iteration walks the series' alternating local extrema. From the current
//! candidate minimum it advances through successive (maximum, minimum) pairs;
//! at each pair ε is recomputed over the trailing window ending at the maximum
//! day, and the correction amplitude (peak price minus the following trough
//! price) is compared against it. A correction of at least ε confirms the
//! episode: the event is recorded on the peak day and the trough becomes the
//! next candidate minimum. Otherwise the scan continues with the same
//! candidate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the local variation ε is measured over the trailing window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariationKind {
    /// Sample standard deviation of the last `window` daily price changes.
    #[default]
    StddevOfDailyChanges,
    /// Max minus min price over the last `window` days.
    Range,
}

/// Detector configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EpsilonPolicy {
    /// Trailing window length in days (≥ 2).
    pub window: usize,
    pub variation_kind: VariationKind,
    /// Shift applied to the recorded event day relative to the confirming
    /// peak; 0 records on the peak day itself. Exposed for sensitivity runs.
    pub event_day_offset: i64,
}

impl Default for EpsilonPolicy {
    fn default() -> Self {
        EpsilonPolicy {
            window: 10,
            variation_kind: VariationKind::StddevOfDailyChanges,
            event_day_offset: 0,
        }
    }
}

impl EpsilonPolicy {
    pub fn validate(&self) -> Result<()> {
        if self.window < 2 {
            return Err(Error::InvalidParameter(format!(
                "epsilon window must be >= 2, got {}",
                self.window
            )));
        }
        Ok(())
    }
}

/// One confirmed drawup episode, for diagnostics and audit output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    /// Day of the candidate minimum the run started from.
    pub start_day: usize,
    /// Day of the confirming local maximum (the event day at offset 0).
    pub peak_day: usize,
    /// Price rise from start to peak, in basis points.
    pub amplitude: f64,
}

/// Per-entity binary event series plus its episode list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrawupVector {
    pub entity_id: String,
    pub events: Vec<bool>,
    pub episodes: Vec<Episode>,
}

impl DrawupVector {
    pub fn event_count(&self) -> usize {
        self.events.iter().filter(|&&e| e).count()
    }

    /// Days on which an event is recorded, ascending.
    pub fn event_days(&self) -> Vec<usize> {
        self.events
            .iter()
            .enumerate()
            .filter_map(|(t, &e)| e.then_some(t))
            .collect()
    }

    /// An all-zero vector (used for entities excluded from a period).
    pub fn empty(entity_id: impl Into<String>, len: usize) -> Self {
        DrawupVector {
            entity_id: entity_id.into(),
            events: vec![false; len],
            episodes: Vec::new(),
        }
    }
}

/// Local variation over the `policy.window` days ending at day `t`.
///
/// For the stddev kind this is the sample standard deviation of the last
/// `window` daily changes (so day `t - window` supplies the base price); for
/// the range kind it is max − min over days `(t - window, t]`. Zero on a
/// constant window.
pub fn rolling_epsilon(series: &[f64], policy: &EpsilonPolicy, t: usize) -> Result<f64> {
    policy.validate()?;
    let w = policy.window;
    if t < w {
        return Err(Error::InsufficientHistory { t, window: w });
    }
    if t >= series.len() {
        return Err(Error::InvalidParameter(format!(
            "day {t} out of range for series of length {}",
            series.len()
        )));
    }
    match policy.variation_kind {
        VariationKind::StddevOfDailyChanges => {
            let changes: Vec<f64> = (t - w + 1..=t).map(|s| series[s] - series[s - 1]).collect();
            let n = changes.len() as f64;
            let mean = changes.iter().sum::<f64>() / n;
            let ss: f64 = changes.iter().map(|c| (c - mean).powi(2)).sum();
            Ok((ss / (n - 1.0)).sqrt())
        }
        VariationKind::Range => {
            let window = &series[t + 1 - w..=t];
            let max = window.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let min = window.iter().copied().fold(f64::INFINITY, f64::min);
            Ok(max - min)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtremumKind {
    Minimum,
    Maximum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Extremum {
    pub day: usize,
    pub kind: ExtremumKind,
}

/// Strictly alternating local minima and maxima. Plateaus collapse to their
/// first day; the endpoints are included; a constant series yields nothing.
pub fn local_extrema(series: &[f64]) -> Vec<Extremum> {
    let n = series.len();
    let mut out = Vec::new();
    if n < 2 {
        return out;
    }
    // first non-flat move decides whether day 0 is a minimum or a maximum
    let Some(first_move) = (1..n).find(|&t| series[t] != series[t - 1]) else {
        return out;
    };
    let rising = series[first_move] > series[first_move - 1];
    out.push(Extremum {
        day: 0,
        kind: if rising {
            ExtremumKind::Minimum
        } else {
            ExtremumKind::Maximum
        },
    });

    let mut dir_up = rising;
    // day the current plateau started (candidate extremum day on a turn)
    let mut plateau_start = first_move;
    let mut t = first_move + 1;
    while t < n {
        if series[t] == series[t - 1] {
            t += 1;
            continue;
        }
        let up = series[t] > series[t - 1];
        if up != dir_up {
            out.push(Extremum {
                day: plateau_start,
                kind: if dir_up {
                    ExtremumKind::Maximum
                } else {
                    ExtremumKind::Minimum
                },
            });
            dir_up = up;
        }
        plateau_start = t;
        t += 1;
    }
    // terminal extremum at the first day of the final plateau
    out.push(Extremum {
        day: plateau_start,
        kind: if dir_up {
            ExtremumKind::Maximum
        } else {
            ExtremumKind::Minimum
        },
    });
    out
}

/// Run the ε-drawup iteration over a forward-filled series.
pub fn detect_drawups(
    entity_id: impl Into<String>,
    series: &[f64],
    policy: &EpsilonPolicy,
) -> Result<DrawupVector> {
    policy.validate()?;
    let t_len = series.len();
    if t_len <= policy.window {
        return Err(Error::SeriesTooShort {
            len: t_len,
            window: policy.window,
        });
    }

    let entity_id = entity_id.into();
    let extrema = local_extrema(series);
    let mut events = vec![false; t_len];
    let mut episodes = Vec::new();

    // start from the first local minimum
    let Some(mut candidate) = extrema
        .iter()
        .position(|e| e.kind == ExtremumKind::Minimum)
    else {
        return Ok(DrawupVector {
            entity_id,
            events,
            episodes,
        });
    };

    let mut j = candidate + 1;
    while j + 1 < extrema.len() {
        let peak = extrema[j];
        let trough = extrema[j + 1];
        debug_assert_eq!(peak.kind, ExtremumKind::Maximum);
        debug_assert_eq!(trough.kind, ExtremumKind::Minimum);
        // days before the window have no epsilon history and produce no events
        if peak.day >= policy.window {
            let eps = rolling_epsilon(series, policy, peak.day)?;
            let correction = series[peak.day] - series[trough.day];
            if correction >= eps {
                let recorded = peak.day as i64 + policy.event_day_offset;
                if (0..t_len as i64).contains(&recorded) {
                    events[recorded as usize] = true;
                }
                episodes.push(Episode {
                    start_day: extrema[candidate].day,
                    peak_day: peak.day,
                    amplitude: series[peak.day] - series[extrema[candidate].day],
                });
                candidate = j + 1;
            }
        }
        j += 2;
    }

    Ok(DrawupVector {
        entity_id,
        events,
        episodes,
    })
}

/// Drawup vectors for a whole panel, plus the entities the period rule
/// excluded (too few in-period observations for the rolling window).
#[derive(Debug, Clone, Serialize)]
pub struct PanelDrawups {
    pub vectors: Vec<DrawupVector>,
    pub skipped: Vec<String>,
}

/// Detect drawups for every entity of a forward-filled panel.
///
/// Entities with fewer than `window + 2` in-period observations are excluded
/// (empty event vector, listed in `skipped`); remaining entities are detected
/// on their effective series, which starts at their first observation. Event
/// days are indexed on the panel calendar.
pub fn detect_panel(panel: &crate::ingest::PricePanel, policy: &EpsilonPolicy) -> Result<PanelDrawups> {
    policy.validate()?;
    let t_len = panel.n_days();
    let min_obs = policy.window + 2;
    let mut vectors = Vec::with_capacity(panel.n_entities());
    let mut skipped = Vec::new();
    for i in 0..panel.n_entities() {
        let entity = &panel.entities[i];
        let first = panel.first_observation(i);
        let enough = panel.observation_count(i) >= min_obs;
        let Some(first) = first.filter(|_| enough) else {
            skipped.push(entity.clone());
            vectors.push(DrawupVector::empty(entity.clone(), t_len));
            continue;
        };
        let effective = &panel.series(i)[first..];
        if effective.len() <= policy.window {
            skipped.push(entity.clone());
            vectors.push(DrawupVector::empty(entity.clone(), t_len));
            continue;
        }
        let local = detect_drawups(entity.clone(), effective, policy)?;
        let mut events = vec![false; t_len];
        for day in local.event_days() {
            events[first + day] = true;
        }
        let episodes = local
            .episodes
            .into_iter()
            .map(|e| Episode {
                start_day: e.start_day + first,
                peak_day: e.peak_day + first,
                amplitude: e.amplitude,
            })
            .collect();
        vectors.push(DrawupVector {
            entity_id: entity.clone(),
            events,
            episodes,
        });
    }
    Ok(PanelDrawups { vectors, skipped })
}
