//! Synthetic Markov renewal sequences from known parameters.

use chrono::NaiveDateTime;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::catalog::{add_days, EventCatalog, EventRecord, SequenceData, StateSpace};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::weibull;

/// Generating parameters. `initial_state` is zero-based in memory and
/// one-based in JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TrueModelWire", into = "TrueModelWire")]
pub struct TrueModel {
    pub p: Matrix<f64>,
    pub alpha: Matrix<f64>,
    pub theta: Matrix<f64>,
    pub initial_state: usize,
}

#[derive(Serialize, Deserialize)]
struct TrueModelWire {
    p: Matrix<f64>,
    alpha: Matrix<f64>,
    theta: Matrix<f64>,
    initial_state: usize,
}

impl TryFrom<TrueModelWire> for TrueModel {
    type Error = Error;
    fn try_from(w: TrueModelWire) -> Result<Self> {
        if w.initial_state == 0 {
            return Err(Error::InvalidModel("initial_state is one-based".into()));
        }
        TrueModel::new(w.p, w.alpha, w.theta, w.initial_state - 1)
    }
}

impl From<TrueModel> for TrueModelWire {
    fn from(m: TrueModel) -> Self {
        TrueModelWire {
            p: m.p,
            alpha: m.alpha,
            theta: m.theta,
            initial_state: m.initial_state + 1,
        }
    }
}

impl TrueModel {
    pub fn new(p: Matrix<f64>, alpha: Matrix<f64>, theta: Matrix<f64>, initial_state: usize) -> Result<Self> {
        let s = p.dim();
        if s == 0 || alpha.dim() != s || theta.dim() != s {
            return Err(Error::InvalidModel(
                "p, alpha and theta must share one dimension".into(),
            ));
        }
        if initial_state >= s {
            return Err(Error::InvalidModel(format!(
                "initial state {} outside 1..={s}",
                initial_state + 1
            )));
        }
        for i in 0..s {
            let row = p.row(i);
            if row.iter().any(|v| !(*v >= 0.0)) || (row.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidModel(format!(
                    "row {} of p is not a probability vector",
                    i + 1
                )));
            }
        }
        let positive = |m: &Matrix<f64>| m.as_slice().iter().all(|v| *v > 0.0 && v.is_finite());
        if !positive(&alpha) || !positive(&theta) {
            return Err(Error::InvalidModel("alpha and theta must be positive".into()));
        }
        Ok(Self {
            p,
            alpha,
            theta,
            initial_state,
        })
    }

    pub fn num_states(&self) -> usize {
        self.p.dim()
    }

    /// Holding-time law depends only on the current state: `F_ij = F_i.`.
    pub fn time_predictable(p: Matrix<f64>, alpha: Vec<f64>, theta: Vec<f64>, initial_state: usize) -> Result<Self> {
        let s = p.dim();
        if alpha.len() != s || theta.len() != s {
            return Err(Error::InvalidModel("one shape and scale per source state".into()));
        }
        Self::new(
            p,
            Matrix::from_fn(s, |i, _| alpha[i]),
            Matrix::from_fn(s, |i, _| theta[i]),
            initial_state,
        )
    }

    /// Holding-time law depends only on the next state: `F_ij = F_.j`.
    pub fn slip_predictable(p: Matrix<f64>, alpha: Vec<f64>, theta: Vec<f64>, initial_state: usize) -> Result<Self> {
        let s = p.dim();
        if alpha.len() != s || theta.len() != s {
            return Err(Error::InvalidModel("one shape and scale per destination state".into()));
        }
        Self::new(
            p,
            Matrix::from_fn(s, |_, j| alpha[j]),
            Matrix::from_fn(s, |_, j| theta[j]),
            initial_state,
        )
    }

    pub fn is_time_predictable(&self) -> bool {
        let s = self.num_states();
        (0..s).all(|i| {
            (0..s).all(|j| self.alpha[(i, j)] == self.alpha[(i, 0)] && self.theta[(i, j)] == self.theta[(i, 0)])
        })
    }

    pub fn is_slip_predictable(&self) -> bool {
        let s = self.num_states();
        (0..s).all(|i| {
            (0..s).all(|j| self.alpha[(i, j)] == self.alpha[(0, j)] && self.theta[(i, j)] == self.theta[(0, j)])
        })
    }
}

fn next_state<R: Rng + ?Sized>(row: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (j, &pj) in row.iter().enumerate() {
        acc += pj;
        if u < acc {
            return j;
        }
    }
    row.iter().rposition(|&pj| pj > 0.0).expect("row has positive mass")
}

/// Runs the process on `[0, horizon]`: draw the next state from the current
/// row of `p`, then its Weibull holding time; the first holding time that
/// crosses the horizon becomes the censored tail.
pub fn generate_mrp<R: Rng + ?Sized>(model: &TrueModel, horizon: f64, rng: &mut R) -> Result<SequenceData> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidConfig(format!("horizon must be positive, got {horizon}")));
    }
    let mut states = vec![model.initial_state];
    let mut times = Vec::new();
    let mut now = 0.0;
    loop {
        let i = *states.last().expect("non-empty");
        let j = next_state(model.p.row(i), rng);
        let x = weibull::sample(rng, model.alpha[(i, j)], model.theta[(i, j)]);
        if now + x > horizon || x <= 0.0 {
            break;
        }
        now += x;
        states.push(j);
        times.push(x);
    }
    let censored = (horizon - times.iter().sum::<f64>()).max(0.0);
    SequenceData::new(states, times, censored, model.num_states())
}

/// [`generate_mrp`] for a model whose holding times depend only on the
/// source state.
pub fn generate_tpm<R: Rng + ?Sized>(model: &TrueModel, horizon: f64, rng: &mut R) -> Result<SequenceData> {
    if !model.is_time_predictable() {
        return Err(Error::InvalidModel(
            "time-predictable model needs alpha and theta constant along rows".into(),
        ));
    }
    generate_mrp(model, horizon, rng)
}

/// [`generate_mrp`] for a model whose holding times depend only on the
/// destination state.
pub fn generate_spm<R: Rng + ?Sized>(model: &TrueModel, horizon: f64, rng: &mut R) -> Result<SequenceData> {
    if !model.is_slip_predictable() {
        return Err(Error::InvalidModel(
            "slip-predictable model needs alpha and theta constant along columns".into(),
        ));
    }
    generate_mrp(model, horizon, rng)
}

/// Renders a sequence as a catalog starting at `origin`; each event gets
/// the lower magnitude bound of its class.
pub fn sequence_to_catalog(seq: &SequenceData, space: &StateSpace, origin: &NaiveDateTime) -> Result<EventCatalog> {
    if space.num_states() != seq.num_states() {
        return Err(Error::InvalidStateSpace(format!(
            "{} magnitude classes for {} states",
            space.num_states(),
            seq.num_states()
        )));
    }
    let records = seq
        .event_times()
        .iter()
        .zip(seq.states())
        .enumerate()
        .map(|(k, (&t, &j))| EventRecord {
            time: add_days(origin, t),
            magnitude: space.thresholds()[j],
            id: Some(format!("ev{k}")),
        })
        .collect();
    Ok(EventCatalog::new(records))
}
