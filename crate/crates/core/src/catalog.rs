//! Event catalogs, magnitude classes, and the observed Markov renewal
//! sequence with its right-censored tail.
//!
//! Times are measured in days. The first event of a sequence is its time
//! origin: its state is `j_0` and its own waiting time is discarded.

use std::io::{Read, Write};
use std::path::Path;

use chrono::{NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

const MS_PER_DAY: f64 = 86_400_000.0;

/// Parses `YYYY-MM-DD`, `YYYY-MM-DDTHH:MM:SS[.fff]` or the same with a space
/// separator.
pub fn parse_date(s: &str) -> Result<NaiveDateTime> {
    let s = s.trim();
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Ok(dt);
        }
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .map(|d| d.and_hms_opt(0, 0, 0).expect("midnight is valid"))
        .map_err(|_| Error::InvalidDate(s.to_string()))
}

/// Formats a timestamp as a date when it falls on midnight, otherwise with
/// millisecond precision.
pub fn format_date(dt: &NaiveDateTime) -> String {
    if dt.time() == chrono::NaiveTime::MIN {
        dt.format("%Y-%m-%d").to_string()
    } else {
        dt.format("%Y-%m-%dT%H:%M:%S%.3f").to_string()
    }
}

/// Signed number of days from `from` to `to`, fractional days included.
pub fn days_between(from: &NaiveDateTime, to: &NaiveDateTime) -> f64 {
    (*to - *from).num_milliseconds() as f64 / MS_PER_DAY
}

pub fn add_days(origin: &NaiveDateTime, days: f64) -> NaiveDateTime {
    *origin + chrono::Duration::milliseconds((days * MS_PER_DAY).round() as i64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub time: NaiveDateTime,
    pub magnitude: f64,
    pub id: Option<String>,
}

#[derive(Debug, Deserialize)]
struct CsvRow {
    date: String,
    magnitude: f64,
    #[serde(default)]
    id: Option<String>,
}

#[derive(Debug, Serialize)]
struct CsvRowOut<'a> {
    date: String,
    magnitude: f64,
    id: Option<&'a str>,
}

/// Time-ordered list of events. Records are sorted on construction; ties are
/// kept (and rejected later by [`build_sequence`]).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventCatalog {
    records: Vec<EventRecord>,
}

impl EventCatalog {
    pub fn new(mut records: Vec<EventRecord>) -> Self {
        records.sort_by_key(|r| r.time);
        Self { records }
    }

    pub fn records(&self) -> &[EventRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn first_time(&self) -> Option<NaiveDateTime> {
        self.records.first().map(|r| r.time)
    }

    pub fn last_time(&self) -> Option<NaiveDateTime> {
        self.records.last().map(|r| r.time)
    }

    /// Events at or before `end`.
    pub fn truncated(&self, end: &NaiveDateTime) -> Self {
        Self {
            records: self.records.iter().filter(|r| r.time <= *end).cloned().collect(),
        }
    }

    /// First event strictly after `end`.
    pub fn next_after(&self, end: &NaiveDateTime) -> Option<&EventRecord> {
        self.records.iter().find(|r| r.time > *end)
    }

    /// Reads a CSV with header `date,magnitude[,id]`.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut records = Vec::new();
        for row in rdr.deserialize() {
            let row: CsvRow = row?;
            records.push(EventRecord {
                time: parse_date(&row.date)?,
                magnitude: row.magnitude,
                id: row.id.filter(|s| !s.is_empty()),
            });
        }
        Ok(Self::new(records))
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv_reader(std::fs::File::open(path)?)
    }

    pub fn to_csv_writer<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        for r in &self.records {
            wtr.serialize(CsvRowOut {
                date: format_date(&r.time),
                magnitude: r.magnitude,
                id: r.id.as_deref(),
            })?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Magnitude classes `[t_1, t_2), [t_2, t_3), ..., [t_s, +inf)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct StateSpace {
    thresholds: Vec<f64>,
}

impl StateSpace {
    pub fn new(thresholds: Vec<f64>) -> Result<Self> {
        if thresholds.len() < 2 {
            return Err(Error::InvalidStateSpace(format!(
                "need at least 2 thresholds, got {}",
                thresholds.len()
            )));
        }
        if thresholds.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidStateSpace("thresholds must be finite".into()));
        }
        if thresholds.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidStateSpace("thresholds must be strictly ascending".into()));
        }
        Ok(Self { thresholds })
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn num_states(&self) -> usize {
        self.thresholds.len()
    }

    /// Zero-based class of `magnitude`; boundaries belong to the upper class.
    pub fn classify(&self, magnitude: f64) -> Result<usize> {
        let first = self.thresholds[0];
        if magnitude.is_nan() || magnitude < first {
            return Err(Error::BelowThreshold {
                magnitude,
                threshold: first,
            });
        }
        Ok(self.thresholds.partition_point(|&t| t <= magnitude) - 1)
    }
}

impl TryFrom<Vec<f64>> for StateSpace {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<StateSpace> for Vec<f64> {
    fn from(s: StateSpace) -> Self {
        s.thresholds
    }
}

/// Free-function form of [`StateSpace::classify`].
pub fn classify_magnitude(magnitude: f64, space: &StateSpace) -> Result<usize> {
    space.classify(magnitude)
}

/// Observed path `(j_0, ..., j_tau)`, holding times `(x_1, ..., x_tau)` in
/// days and the censored time `u_T` spent in `j_tau` before the horizon.
///
/// States are zero-based in memory and one-based on the wire.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SequenceWire", into = "SequenceWire")]
pub struct SequenceData {
    states: Vec<usize>,
    times: Vec<f64>,
    censored: f64,
    horizon: f64,
    num_states: usize,
}

#[derive(Serialize, Deserialize)]
struct SequenceWire {
    num_states: usize,
    states: Vec<usize>,
    times_days: Vec<f64>,
    censored_days: f64,
    horizon_days: f64,
}

impl TryFrom<SequenceWire> for SequenceData {
    type Error = Error;
    fn try_from(w: SequenceWire) -> Result<Self> {
        if w.states.contains(&0) {
            return Err(Error::InvalidSequence("states are one-based".into()));
        }
        let states = w.states.iter().map(|s| s - 1).collect();
        let seq = SequenceData::new(states, w.times_days, w.censored_days, w.num_states)?;
        let tol = 1e-9 * seq.horizon.abs().max(1.0);
        if (seq.horizon - w.horizon_days).abs() > tol {
            return Err(Error::InvalidSequence(format!(
                "horizon {} differs from sum of times plus censored time {}",
                w.horizon_days, seq.horizon
            )));
        }
        Ok(SequenceData {
            horizon: w.horizon_days,
            ..seq
        })
    }
}

impl From<SequenceData> for SequenceWire {
    fn from(s: SequenceData) -> Self {
        SequenceWire {
            num_states: s.num_states,
            states: s.states.iter().map(|j| j + 1).collect(),
            times_days: s.times,
            censored_days: s.censored,
            horizon_days: s.horizon,
        }
    }
}

impl SequenceData {
    /// Validates the path; the horizon is `sum(times) + censored`.
    pub fn new(states: Vec<usize>, times: Vec<f64>, censored: f64, num_states: usize) -> Result<Self> {
        if num_states == 0 {
            return Err(Error::InvalidSequence("state count must be positive".into()));
        }
        if states.is_empty() {
            return Err(Error::InvalidSequence("no initial state".into()));
        }
        if times.len() + 1 != states.len() {
            return Err(Error::InvalidSequence(format!(
                "{} states need {} holding times, got {}",
                states.len(),
                states.len() - 1,
                times.len()
            )));
        }
        if let Some(&s) = states.iter().find(|&&s| s >= num_states) {
            return Err(Error::InvalidSequence(format!(
                "state {} outside 1..={num_states}",
                s + 1
            )));
        }
        if let Some(x) = times.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
            return Err(Error::InvalidSequence(format!(
                "holding times must be positive and finite, got {x}"
            )));
        }
        if !(censored.is_finite() && censored >= 0.0) {
            return Err(Error::InvalidSequence(format!(
                "censored time must be non-negative, got {censored}"
            )));
        }
        let horizon = times.iter().sum::<f64>() + censored;
        Ok(Self {
            states,
            times,
            censored,
            horizon,
            num_states,
        })
    }

    pub fn states(&self) -> &[usize] {
        &self.states
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn censored(&self) -> f64 {
        self.censored
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    /// Number of observed transitions `tau`.
    pub fn num_transitions(&self) -> usize {
        self.times.len()
    }

    pub fn last_state(&self) -> usize {
        *self.states.last().expect("sequence has an initial state")
    }

    /// Event times `s_0 = 0, s_1, ..., s_tau`.
    pub fn event_times(&self) -> Vec<f64> {
        let mut acc = 0.0;
        std::iter::once(0.0)
            .chain(self.times.iter().map(|x| {
                acc += x;
                acc
            }))
            .collect()
    }
}

/// Builds the sequence from day offsets and zero-based states, with horizon
/// `horizon` measured from the first event.
pub fn sequence_from_events(times: &[f64], states: &[usize], horizon: f64, num_states: usize) -> Result<SequenceData> {
    if times.is_empty() {
        return Err(Error::EmptyCatalog);
    }
    debug_assert_eq!(times.len(), states.len());
    for k in 1..times.len() {
        if times[k] == times[k - 1] {
            return Err(Error::DuplicateTimestamp {
                first: k - 1,
                second: k,
            });
        }
        if times[k] < times[k - 1] {
            return Err(Error::UnsortedCatalog { index: k });
        }
    }
    let origin = times[0];
    let last = times[times.len() - 1] - origin;
    if horizon < last {
        return Err(Error::HorizonBeforeLastEvent { horizon, last });
    }
    let gaps: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
    SequenceData::new(states.to_vec(), gaps, horizon - last, num_states)
}

/// Classifies every event and differences the event times. `horizon` is in
/// days from the first event.
pub fn build_sequence(catalog: &EventCatalog, space: &StateSpace, horizon: f64) -> Result<SequenceData> {
    let first = catalog.first_time().ok_or(Error::EmptyCatalog)?;
    let mut times = Vec::with_capacity(catalog.len());
    let mut states = Vec::with_capacity(catalog.len());
    for r in catalog.records() {
        times.push(days_between(&first, &r.time));
        states.push(space.classify(r.magnitude)?);
    }
    sequence_from_events(&times, &states, horizon, space.num_states())
}

/// [`build_sequence`] with the horizon given as a calendar end date.
pub fn build_sequence_until(catalog: &EventCatalog, space: &StateSpace, end: &NaiveDateTime) -> Result<SequenceData> {
    let first = catalog.first_time().ok_or(Error::EmptyCatalog)?;
    build_sequence(catalog, space, days_between(&first, end))
}

/// Historical prefix, current remainder, and the zero-based index of the
/// last historical event (which is also the current sample's origin).
#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub historical: SequenceData,
    pub current: SequenceData,
    pub cut: usize,
}

/// Cuts at the first event after which every transition has been visited at
/// least `min_count` times.
pub fn split_catalog(seq: &SequenceData, min_count: usize) -> Result<Split> {
    if min_count == 0 {
        return Err(Error::InvalidConfig("min_count must be at least 1".into()));
    }
    let s = seq.num_states;
    let mut counts = Matrix::filled(s, 0usize);
    let mut deficient = s * s;
    let states = &seq.states;
    let mut cut = None;
    for n in 1..states.len() {
        let c = &mut counts[(states[n - 1], states[n])];
        *c += 1;
        if *c == min_count {
            deficient -= 1;
            if deficient == 0 {
                cut = Some(n);
                break;
            }
        }
    }
    let Some(cut) = cut else {
        let missing = counts
            .iter_indexed()
            .filter(|(_, &c)| c < min_count)
            .map(|(ij, _)| ij)
            .collect();
        return Err(Error::SplitFailed {
            min_count,
            deficient: missing,
        });
    };
    let historical = SequenceData::new(states[..=cut].to_vec(), seq.times[..cut].to_vec(), 0.0, s)?;
    let mut current = SequenceData::new(states[cut..].to_vec(), seq.times[cut..].to_vec(), seq.censored, s)?;
    current.horizon = seq.horizon - historical.horizon;
    Ok(Split {
        historical,
        current,
        cut,
    })
}

/// Per-transition counts `N_ij`, holding times `x_ij^rho`, and
/// `sum_rho ln x_ij^rho`, plus the censored tail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionStats {
    pub counts: Matrix<usize>,
    pub times: Matrix<Vec<f64>>,
    pub sum_log: Matrix<f64>,
    /// Zero-based `j_tau`.
    pub last_state: usize,
    pub censored: f64,
}

impl TransitionStats {
    pub fn num_states(&self) -> usize {
        self.counts.dim()
    }

    pub fn total_transitions(&self) -> usize {
        self.counts.as_slice().iter().sum()
    }

    /// All holding times regardless of transition.
    pub fn all_times(&self) -> Vec<f64> {
        self.times.as_slice().iter().flatten().copied().collect()
    }

    /// Whether the censored tail carries information.
    pub fn has_censored_tail(&self) -> bool {
        self.censored > 0.0
    }
}

pub fn sufficient_stats(seq: &SequenceData) -> TransitionStats {
    let s = seq.num_states;
    let mut counts = Matrix::filled(s, 0usize);
    let mut times: Matrix<Vec<f64>> = Matrix::filled(s, Vec::new());
    let mut sum_log = Matrix::filled(s, 0.0);
    for (w, &x) in seq.states.windows(2).zip(&seq.times) {
        let ij = (w[0], w[1]);
        counts[ij] += 1;
        times[ij].push(x);
        sum_log[ij] += x.ln();
    }
    TransitionStats {
        counts,
        times,
        sum_log,
        last_state: seq.last_state(),
        censored: seq.censored,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn paper_space() -> StateSpace {
        StateSpace::new(vec![4.5, 4.9, 5.3]).unwrap()
    }

    #[test]
    fn classify_examples() {
        let sp = paper_space();
        assert_eq!(sp.classify(5.0).unwrap(), 1);
        assert_eq!(sp.classify(4.9).unwrap(), 1);
        assert_eq!(sp.classify(4.5).unwrap(), 0);
        assert_eq!(sp.classify(5.3).unwrap(), 2);
        assert_eq!(sp.classify(9.9).unwrap(), 2);
        let err = sp.classify(4.4).unwrap_err();
        assert!(err.to_string().contains("below completeness threshold"));
    }

    #[test]
    fn state_space_validation() {
        assert!(StateSpace::new(vec![4.5]).is_err());
        assert!(StateSpace::new(vec![4.5, 4.5]).is_err());
        assert!(StateSpace::new(vec![5.0, 4.5]).is_err());
        let sp: StateSpace = serde_json::from_str("[1.0, 2.0]").unwrap();
        assert_eq!(sp.num_states(), 2);
        assert!(serde_json::from_str::<StateSpace>("[2.0, 1.0]").is_err());
    }

    #[test]
    fn build_examples() {
        let seq = sequence_from_events(&[0.0, 10.0, 25.0], &[0, 1, 0], 30.0, 3).unwrap();
        assert_eq!(seq.states(), &[0, 1, 0]);
        assert_eq!(seq.times(), &[10.0, 15.0]);
        assert_eq!(seq.censored(), 5.0);

        let single = sequence_from_events(&[0.0], &[0], 100.0, 3).unwrap();
        assert_eq!(single.num_transitions(), 0);
        assert_eq!(single.censored(), 100.0);

        let flush = sequence_from_events(&[0.0, 10.0], &[0, 0], 10.0, 3).unwrap();
        assert_eq!(flush.censored(), 0.0);
    }

    #[test]
    fn build_rejects_ties_and_short_horizon() {
        assert!(matches!(
            sequence_from_events(&[0.0, 5.0, 5.0], &[0, 1, 2], 9.0, 3),
            Err(Error::DuplicateTimestamp { first: 1, second: 2 })
        ));
        assert!(matches!(
            sequence_from_events(&[0.0, 5.0], &[0, 1], 4.0, 3),
            Err(Error::HorizonBeforeLastEvent { .. })
        ));
    }

    #[test]
    fn build_from_catalog_csv() {
        let csv = "date,magnitude,id\n2000-01-11,5.0,b\n2000-01-01,4.6,a\n2000-01-26,5.5,\n";
        let cat = EventCatalog::from_csv_reader(csv.as_bytes()).unwrap();
        assert_eq!(cat.records()[0].id.as_deref(), Some("a"));
        assert_eq!(cat.records()[2].id, None);
        let end = parse_date("2000-01-31").unwrap();
        let seq = build_sequence_until(&cat, &paper_space(), &end).unwrap();
        assert_eq!(seq.states(), &[0, 1, 2]);
        assert_eq!(seq.times(), &[10.0, 15.0]);
        assert_eq!(seq.censored(), 5.0);
        assert_eq!(seq.horizon(), 30.0);

        let mut out = Vec::new();
        cat.to_csv_writer(&mut out).unwrap();
        let back = EventCatalog::from_csv_reader(out.as_slice()).unwrap();
        assert_eq!(back, cat);
    }

    #[test]
    fn fractional_days() {
        let a = parse_date("2001-03-01T00:00:00").unwrap();
        let b = parse_date("2001-03-02T12:00:00").unwrap();
        assert_eq!(days_between(&a, &b), 1.5);
        assert_eq!(add_days(&a, 1.5), b);
        assert!(parse_date("01/03/2001").is_err());
    }

    #[test]
    fn stats_example() {
        let seq = SequenceData::new(vec![0, 1, 0], vec![10.0, 15.0], 5.0, 3).unwrap();
        let st = sufficient_stats(&seq);
        assert_eq!(st.counts[(0, 1)], 1);
        assert_eq!(st.counts[(1, 0)], 1);
        assert_eq!(st.total_transitions(), 2);
        assert_eq!(st.times[(0, 1)], vec![10.0]);
        assert!((st.sum_log[(1, 0)] - 15f64.ln()).abs() < 1e-15);
        assert_eq!(st.last_state, 0);
    }

    #[test]
    fn split_missing_state_names_all_transitions() {
        let seq = SequenceData::new(vec![0, 1, 0, 1, 1, 0], vec![1.0; 5], 0.0, 3).unwrap();
        match split_catalog(&seq, 1) {
            Err(Error::SplitFailed { deficient, .. }) => {
                assert_eq!(deficient, vec![(0, 0), (0, 2), (1, 2), (2, 0), (2, 1), (2, 2)]);
                let msg = Error::SplitFailed {
                    min_count: 1,
                    deficient,
                }
                .to_string();
                assert!(msg.contains("(1,3)") && msg.contains("(3,3)"), "{msg}");
            }
            other => panic!("expected split failure, got {other:?}"),
        }
    }

    #[test]
    fn sequence_json_is_one_based() {
        let seq = SequenceData::new(vec![0, 2], vec![3.5], 1.0, 3).unwrap();
        let js = serde_json::to_value(&seq).unwrap();
        assert_eq!(js["states"], serde_json::json!([1, 3]));
        assert_eq!(js["horizon_days"], serde_json::json!(4.5));
        let back: SequenceData = serde_json::from_value(js).unwrap();
        assert_eq!(back, seq);
        let bad = serde_json::json!({"num_states": 3, "states": [1, 2], "times_days": [1.0],
            "censored_days": 0.0, "horizon_days": 9.0});
        assert!(serde_json::from_value::<SequenceData>(bad).is_err());
    }
}
