//! Loading, cleaning, aligning and period-slicing of raw price series.
//!
//! Input is long-format CSV (`date,entity,price`, one row per observation).
//! The panel calendar is the union of all observed dates; cells an entity did
//! not quote are flagged in the `observed` mask and forward-filled from the
//! last traded price before any analysis runs.

use std::collections::BTreeMap;
use std::io::Read;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A single entity's raw quote history.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    pub entity_id: String,
    pub dates: Vec<NaiveDate>,
    /// Quotes in basis points; meaningful only where `observed` is true.
    pub prices: Vec<f64>,
    pub observed: Vec<bool>,
}

impl PriceSeries {
    pub fn validate(&self) -> Result<()> {
        if self.prices.len() != self.dates.len() || self.observed.len() != self.dates.len() {
            return Err(Error::ShapeMismatch(format!(
                "series `{}`: {} dates, {} prices, {} mask entries",
                self.entity_id,
                self.dates.len(),
                self.prices.len(),
                self.observed.len()
            )));
        }
        if self.dates.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter(format!(
                "series `{}`: dates are not strictly increasing",
                self.entity_id
            )));
        }
        for (i, (&p, &o)) in self.prices.iter().zip(&self.observed).enumerate() {
            if o && (!p.is_finite() || p < 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "series `{}`: negative or non-finite price {} at {}",
                    self.entity_id, p, self.dates[i]
                )));
            }
        }
        Ok(())
    }
}

/// Aligned N-entity panel over a shared trading calendar.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PricePanel {
    pub entities: Vec<String>,
    pub calendar: Vec<NaiveDate>,
    /// Row-major N×T values; NaN before an entity's first observation and, on
    /// an unfilled panel, wherever `observed` is false.
    pub values: Vec<Vec<f64>>,
    /// True where the entity actually quoted that day (forward-filling does
    /// not touch this mask).
    pub observed: Vec<Vec<bool>>,
}

// NaN marks a missing cell, and missing == missing for panel comparisons
impl PartialEq for PricePanel {
    fn eq(&self, other: &Self) -> bool {
        self.entities == other.entities
            && self.calendar == other.calendar
            && self.observed == other.observed
            && self.values.len() == other.values.len()
            && self
                .values
                .iter()
                .zip(&other.values)
                .all(|(a, b)| {
                    a.len() == b.len()
                        && a.iter()
                            .zip(b)
                            .all(|(x, y)| x.to_bits() == y.to_bits() || (x.is_nan() && y.is_nan()))
                })
    }
}

impl PricePanel {
    pub fn n_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn n_days(&self) -> usize {
        self.calendar.len()
    }

    pub fn entity_index(&self, entity: &str) -> Option<usize> {
        self.entities.iter().position(|e| e == entity)
    }

    pub fn series(&self, i: usize) -> &[f64] {
        &self.values[i]
    }

    /// Index of the first quoted day, if any.
    pub fn first_observation(&self, i: usize) -> Option<usize> {
        self.observed[i].iter().position(|&o| o)
    }

    /// Number of quoted days for entity `i`.
    pub fn observation_count(&self, i: usize) -> usize {
        self.observed[i].iter().filter(|&&o| o).count()
    }

    /// Serialize to the columnar JSON cache format (see the book's file-format
    /// chapter). NaN cells are stored as nulls.
    pub fn to_cache_json(&self) -> serde_json::Value {
        let values: Vec<Vec<serde_json::Value>> = self
            .values
            .iter()
            .map(|row| {
                row.iter()
                    .map(|&v| {
                        if v.is_finite() {
                            serde_json::json!(v)
                        } else {
                            serde_json::Value::Null
                        }
                    })
                    .collect()
            })
            .collect();
        serde_json::json!({
            "entities": self.entities,
            "calendar": self.calendar,
            "values": values,
            "observed": self.observed,
        })
    }

    pub fn from_cache_json(value: &serde_json::Value) -> Result<Self> {
        #[derive(Deserialize)]
        struct Cache {
            entities: Vec<String>,
            calendar: Vec<NaiveDate>,
            values: Vec<Vec<Option<f64>>>,
            observed: Vec<Vec<bool>>,
        }
        let cache: Cache = serde_json::from_value(value.clone())?;
        let values = cache
            .values
            .into_iter()
            .map(|row| row.into_iter().map(|v| v.unwrap_or(f64::NAN)).collect())
            .collect();
        let panel = PricePanel {
            entities: cache.entities,
            calendar: cache.calendar,
            values,
            observed: cache.observed,
        };
        panel.check_shape()?;
        Ok(panel)
    }

    fn check_shape(&self) -> Result<()> {
        let (n, t) = (self.entities.len(), self.calendar.len());
        if self.values.len() != n
            || self.observed.len() != n
            || self.values.iter().any(|r| r.len() != t)
            || self.observed.iter().any(|r| r.len() != t)
        {
            return Err(Error::ShapeMismatch(format!(
                "panel claims {n} entities x {t} days but rows disagree"
            )));
        }
        Ok(())
    }
}

/// Half-open analysis window `[start, end)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeriodSpec {
    pub label: String,
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl PeriodSpec {
    pub fn new(label: impl Into<String>, start: NaiveDate, end: NaiveDate) -> Result<Self> {
        let spec = PeriodSpec {
            label: label.into(),
            start,
            end,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.start >= self.end {
            return Err(Error::InvalidPeriod {
                label: self.label.clone(),
                start: self.start,
                end: self.end,
            });
        }
        Ok(())
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        date >= self.start && date < self.end
    }
}

/// The three default analysis windows shipped in the default configuration:
/// a calm phase, a volatile rising phase and a volatile falling phase.
pub fn default_periods() -> Vec<PeriodSpec> {
    let d = |y, m, day| NaiveDate::from_ymd_opt(y, m, day).unwrap();
    vec![
        PeriodSpec {
            label: "period1".into(),
            start: d(2003, 4, 1),
            end: d(2006, 5, 1),
        },
        PeriodSpec {
            label: "period2".into(),
            start: d(2006, 5, 1),
            end: d(2009, 3, 1),
        },
        PeriodSpec {
            label: "period3".into(),
            start: d(2009, 3, 1),
            end: d(2012, 1, 1),
        },
    ]
}

/// Parse long-format `date,entity,price` CSV into a panel over the union
/// calendar of all observed dates.
pub fn parse_panel<R: Read>(source: R) -> Result<PricePanel> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);

    // (entity -> date -> price), both sorted for deterministic layout
    let mut by_entity: BTreeMap<String, BTreeMap<NaiveDate, f64>> = BTreeMap::new();
    let mut record = csv::StringRecord::new();
    while reader
        .read_record(&mut record)
        .map_err(|e| malformed(&record, &e.to_string()))?
    {
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != 3 {
            return Err(Error::MalformedRow {
                line,
                reason: format!("expected 3 fields `date,entity,price`, got {}", record.len()),
            });
        }
        let date: NaiveDate = record[0].parse().map_err(|_| Error::MalformedRow {
            line,
            reason: format!("invalid ISO-8601 date `{}`", &record[0]),
        })?;
        let entity = record[1].to_string();
        if entity.is_empty() {
            return Err(Error::MalformedRow {
                line,
                reason: "empty entity id".into(),
            });
        }
        let price: f64 = record[2].parse().map_err(|_| Error::MalformedRow {
            line,
            reason: format!("invalid price `{}`", &record[2]),
        })?;
        if !price.is_finite() || price < 0.0 {
            return Err(Error::MalformedRow {
                line,
                reason: format!("negative or non-finite price `{}`", &record[2]),
            });
        }
        if by_entity
            .entry(entity.clone())
            .or_default()
            .insert(date, price)
            .is_some()
        {
            return Err(Error::DuplicateObservation { entity, date });
        }
    }
    if by_entity.is_empty() {
        return Err(Error::EmptyInput);
    }

    let mut calendar: Vec<NaiveDate> = by_entity
        .values()
        .flat_map(|m| m.keys().copied())
        .collect();
    calendar.sort_unstable();
    calendar.dedup();

    let day_index: BTreeMap<NaiveDate, usize> =
        calendar.iter().enumerate().map(|(i, &d)| (d, i)).collect();

    let t = calendar.len();
    let mut entities = Vec::with_capacity(by_entity.len());
    let mut values = Vec::with_capacity(by_entity.len());
    let mut observed = Vec::with_capacity(by_entity.len());
    for (entity, quotes) in by_entity {
        let mut row = vec![f64::NAN; t];
        let mut mask = vec![false; t];
        for (date, price) in quotes {
            let idx = day_index[&date];
            row[idx] = price;
            mask[idx] = true;
        }
        entities.push(entity);
        values.push(row);
        observed.push(mask);
    }

    Ok(PricePanel {
        entities,
        calendar,
        values,
        observed,
    })
}

fn malformed(record: &csv::StringRecord, reason: &str) -> Error {
    Error::MalformedRow {
        line: record.position().map(|p| p.line()).unwrap_or(0),
        reason: reason.to_string(),
    }
}

/// Carry the last traded price forward. Cells before an entity's first
/// observation stay NaN; the observation mask is left untouched.
pub fn forward_fill(panel: &PricePanel) -> Result<PricePanel> {
    let mut out = panel.clone();
    for (i, row) in out.values.iter_mut().enumerate() {
        let first = panel
            .first_observation(i)
            .ok_or_else(|| Error::NeverObserved(panel.entities[i].clone()))?;
        let mut last = row[first];
        for (t, cell) in row.iter_mut().enumerate().skip(first) {
            if panel.observed[i][t] {
                last = *cell;
            } else {
                *cell = last;
            }
        }
    }
    Ok(out)
}

/// Restrict the panel to calendar days inside `[spec.start, spec.end)`.
/// Entities without observations in the window are retained (fully missing);
/// downstream stages skip them via the observation-count rule.
pub fn slice_period(panel: &PricePanel, spec: &PeriodSpec) -> Result<PricePanel> {
    spec.validate()?;
    let keep: Vec<usize> = (0..panel.n_days())
        .filter(|&t| spec.contains(panel.calendar[t]))
        .collect();
    if keep.is_empty() {
        return Err(Error::EmptyPeriod {
            label: spec.label.clone(),
            start: spec.start,
            end: spec.end,
        });
    }
    let calendar = keep.iter().map(|&t| panel.calendar[t]).collect();
    let values = panel
        .values
        .iter()
        .map(|row| keep.iter().map(|&t| row[t]).collect())
        .collect();
    let observed = panel
        .observed
        .iter()
        .map(|row| keep.iter().map(|&t| row[t]).collect())
        .collect();
    Ok(PricePanel {
        entities: panel.entities.clone(),
        calendar,
        values,
        observed,
    })
}

/// Write a panel back out as long-format CSV (observed cells only), the exact
/// inverse of [`parse_panel`] for an unfilled panel.
pub fn write_panel_csv<W: std::io::Write>(panel: &PricePanel, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["date", "entity", "price"])
        .map_err(csv_io)?;
    for t in 0..panel.n_days() {
        for i in 0..panel.n_entities() {
            if panel.observed[i][t] {
                w.write_record([
                    panel.calendar[t].to_string(),
                    panel.entities[i].clone(),
                    format!("{}", panel.values[i][t]),
                ])
                .map_err(csv_io)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> Error {
    Error::MalformedRow {
        line: 0,
        reason: e.to_string(),
    }
}

/// Parse the optional `entity,attribute_value` CSV used for layout bubble
/// sizing (debt, leverage, ...).
pub fn parse_node_attributes<R: Read>(source: R) -> Result<Vec<(String, f64)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let mut out = Vec::new();
    let mut record = csv::StringRecord::new();
    while reader
        .read_record(&mut record)
        .map_err(|e| malformed(&record, &e.to_string()))?
    {
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != 2 {
            return Err(Error::MalformedRow {
                line,
                reason: format!("expected 2 fields `entity,attribute_value`, got {}", record.len()),
            });
        }
        let value: f64 = record[1].parse().map_err(|_| Error::MalformedRow {
            line,
            reason: format!("invalid attribute value `{}`", &record[1]),
        })?;
        out.push((record[0].to_string(), value));
    }
    Ok(out)
}
