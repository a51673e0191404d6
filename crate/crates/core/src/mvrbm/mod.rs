//! Mixed-variate restricted Boltzmann machine.
//!
//! The visible layer mixes binary, Gaussian and categorical units; the hidden
//! layer is binary. With `x` the expanded visible vector (one slot per binary
//! or Gaussian unit, one one-hot slot per category of a categorical unit) the
//! energy is
//!
//! ```text
//! E(v, h) = -( Σ_slot a_slot x_slot - Σ_gauss v_i² / 2σ_i²
//!              + Σ_k b_k h_k + Σ_slot Σ_k x_slot w_slot,k h_k )
//! ```
//!
//! which gives factorised conditionals: `P(h_k = 1 | v)` is logistic, a binary
//! visible unit is Bernoulli, a Gaussian unit is normal with mean
//! `σ²(a + Σ_k w_k h_k)` and scale `σ`, and a categorical unit is a softmax
//! over its categories.

mod exact;
mod io;
mod train;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use exact::{exact_log_likelihood, exact_log_likelihood_gradient, ParamGradient, MAX_ENUMERATION};
pub use io::MODEL_FORMAT_VERSION;
pub use train::{init_params, reconstruction_error, train_cd, train_cd_from, TrainConfig, TrainOutcome};

/// Type of a single visible unit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum UnitType {
    Binary,
    Gaussian,
    Categorical { cardinality: usize },
}

impl UnitType {
    /// Number of expanded slots this unit occupies.
    pub fn slots(&self) -> usize {
        match *self {
            UnitType::Categorical { cardinality } => cardinality,
            UnitType::Binary | UnitType::Gaussian => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VisibleUnit {
    pub name: String,
    #[serde(flatten)]
    pub unit_type: UnitType,
}

impl VisibleUnit {
    pub fn new(name: impl Into<String>, unit_type: UnitType) -> Self {
        VisibleUnit {
            name: name.into(),
            unit_type,
        }
    }
}

/// Ordered, named, typed visible units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SchemaDocument", into = "SchemaDocument")]
pub struct VisibleSchema {
    units: Vec<VisibleUnit>,
    offsets: Vec<usize>,
    n_slots: usize,
}

#[derive(Serialize, Deserialize)]
struct SchemaDocument {
    units: Vec<VisibleUnit>,
}

impl TryFrom<SchemaDocument> for VisibleSchema {
    type Error = Error;

    fn try_from(doc: SchemaDocument) -> Result<Self> {
        VisibleSchema::new(doc.units)
    }
}

impl From<VisibleSchema> for SchemaDocument {
    fn from(schema: VisibleSchema) -> Self {
        SchemaDocument { units: schema.units }
    }
}

impl VisibleSchema {
    pub fn new(units: Vec<VisibleUnit>) -> Result<Self> {
        if units.is_empty() {
            return Err(Error::Schema("a visible schema needs at least one unit".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        let mut offsets = Vec::with_capacity(units.len());
        let mut n_slots = 0;
        for unit in &units {
            if !seen.insert(unit.name.as_str()) {
                return Err(Error::Schema(format!("duplicate unit name `{}`", unit.name)));
            }
            if let UnitType::Categorical { cardinality } = unit.unit_type {
                if cardinality < 2 {
                    return Err(Error::Schema(format!(
                        "categorical unit `{}` has cardinality {cardinality}, need at least 2",
                        unit.name
                    )));
                }
            }
            offsets.push(n_slots);
            n_slots += unit.unit_type.slots();
        }
        Ok(VisibleSchema {
            units,
            offsets,
            n_slots,
        })
    }

    pub fn units(&self) -> &[VisibleUnit] {
        &self.units
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    /// Total expanded width: one slot per binary/Gaussian unit plus one per category.
    pub fn n_slots(&self) -> usize {
        self.n_slots
    }

    /// First slot of unit `unit`.
    pub fn offset(&self, unit: usize) -> usize {
        self.offsets[unit]
    }

    pub fn unit_index(&self, name: &str) -> Option<usize> {
        self.units.iter().position(|u| u.name == name)
    }

    /// Checks that `state` has one admissible value per unit.
    pub fn check(&self, state: &VisibleState) -> Result<()> {
        if state.0.len() != self.units.len() {
            return Err(Error::Schema(format!(
                "state has {} values, schema has {} units",
                state.0.len(),
                self.units.len()
            )));
        }
        for (unit, value) in self.units.iter().zip(&state.0) {
            let ok = match (unit.unit_type, value) {
                (UnitType::Binary, UnitValue::Binary(_)) => true,
                (UnitType::Gaussian, UnitValue::Real(x)) => x.is_finite(),
                (UnitType::Categorical { cardinality }, UnitValue::Category(c)) => *c < cardinality,
                _ => false,
            };
            if !ok {
                return Err(Error::Schema(format!(
                    "value {value:?} is not admissible for unit `{}` ({:?})",
                    unit.name, unit.unit_type
                )));
            }
        }
        Ok(())
    }

    /// Writes the expanded slot vector of `state` into `out`.
    pub(crate) fn fill_slots(&self, state: &VisibleState, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.n_slots);
        out.iter_mut().for_each(|x| *x = 0.0);
        for (i, value) in state.0.iter().enumerate() {
            let off = self.offsets[i];
            match *value {
                UnitValue::Binary(b) => out[off] = if b { 1.0 } else { 0.0 },
                UnitValue::Real(x) => out[off] = x,
                UnitValue::Category(c) => out[off + c] = 1.0,
            }
        }
    }

    pub(crate) fn slots_of(&self, state: &VisibleState) -> Vec<f64> {
        let mut out = vec![0.0; self.n_slots];
        self.fill_slots(state, &mut out);
        out
    }
}

/// Value held by one visible unit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum UnitValue {
    Binary(bool),
    Real(f64),
    Category(usize),
}

impl UnitValue {
    /// Numeric form used in files: 0/1, the real value, or the category index.
    pub fn as_number(&self) -> f64 {
        match *self {
            UnitValue::Binary(b) => f64::from(u8::from(b)),
            UnitValue::Real(x) => x,
            UnitValue::Category(c) => c as f64,
        }
    }
}

/// One value per visible unit, in schema order.
#[derive(Clone, Debug, PartialEq)]
pub struct VisibleState(pub Vec<UnitValue>);

impl VisibleState {
    pub fn values(&self) -> &[UnitValue] {
        &self.0
    }

    pub fn to_numbers(&self) -> Vec<f64> {
        self.0.iter().map(UnitValue::as_number).collect()
    }

    /// Inverse of [`VisibleState::to_numbers`]; rejects values the schema does not admit.
    pub fn from_numbers(schema: &VisibleSchema, numbers: &[f64]) -> Result<Self> {
        if numbers.len() != schema.len() {
            return Err(Error::Schema(format!(
                "row has {} values, schema has {} units",
                numbers.len(),
                schema.len()
            )));
        }
        let values = schema
            .units()
            .iter()
            .zip(numbers)
            .map(|(unit, &x)| match unit.unit_type {
                UnitType::Binary if x == 0.0 => Ok(UnitValue::Binary(false)),
                UnitType::Binary if x == 1.0 => Ok(UnitValue::Binary(true)),
                UnitType::Gaussian if x.is_finite() => Ok(UnitValue::Real(x)),
                UnitType::Categorical { cardinality }
                    if x >= 0.0 && x.fract() == 0.0 && (x as usize) < cardinality =>
                {
                    Ok(UnitValue::Category(x as usize))
                }
                _ => Err(Error::Schema(format!("value {x} is not admissible for unit `{}`", unit.name))),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(VisibleState(values))
    }
}

/// Hidden posteriors and the binary states derived from them.
#[derive(Clone, Debug, PartialEq)]
pub struct HiddenCode {
    pub posteriors: Vec<f64>,
    pub states: Vec<bool>,
}

/// Per-unit conditional distribution given a hidden configuration.
#[derive(Clone, Debug, PartialEq)]
pub enum VisibleDistribution {
    Bernoulli { p: f64 },
    Gaussian { mean: f64, scale: f64 },
    Categorical { probs: Vec<f64> },
}

/// All parameters of the energy function.
///
/// Visible biases and weights are stored per expanded slot, so `a_i` of a
/// binary or Gaussian unit and `a_im` of category `m` of a categorical unit
/// share one array; see [`MvRbmParams::slot`].
#[derive(Clone, Debug, PartialEq)]
pub struct MvRbmParams {
    schema: VisibleSchema,
    hidden: usize,
    /// One bias per visible slot.
    pub visible_bias: Vec<f64>,
    /// One bias per hidden unit.
    pub hidden_bias: Vec<f64>,
    /// Slot-major `n_slots × K` weights.
    pub weights: Vec<f64>,
    sigma: Vec<f64>,
}

pub(crate) fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn softmax_in_place(xs: &mut [f64]) {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for x in xs.iter_mut() {
        *x = (*x - max).exp();
        total += *x;
    }
    for x in xs.iter_mut() {
        *x /= total;
    }
}

impl MvRbmParams {
    /// All-zero parameters with every σ = 1.
    pub fn zeros(schema: VisibleSchema, hidden: usize) -> Result<Self> {
        if hidden == 0 {
            return Err(Error::InvalidArgument("need at least one hidden unit".into()));
        }
        let n = schema.n_slots();
        let sigma = vec![1.0; schema.len()];
        Ok(MvRbmParams {
            visible_bias: vec![0.0; n],
            hidden_bias: vec![0.0; hidden],
            weights: vec![0.0; n * hidden],
            sigma,
            schema,
            hidden,
        })
    }

    pub fn schema(&self) -> &VisibleSchema {
        &self.schema
    }

    pub fn hidden_units(&self) -> usize {
        self.hidden
    }

    /// Slot index of `(unit, category)`; `category` is ignored (use 0) for
    /// binary and Gaussian units.
    pub fn slot(&self, unit: usize, category: usize) -> usize {
        self.schema.offset(unit) + category
    }

    pub fn weight(&self, slot: usize, hidden: usize) -> f64 {
        self.weights[slot * self.hidden + hidden]
    }

    pub fn weight_mut(&mut self, slot: usize, hidden: usize) -> &mut f64 {
        &mut self.weights[slot * self.hidden + hidden]
    }

    /// Gaussian scale of `unit` (1.0 for non-Gaussian units, where it is unused).
    pub fn sigma(&self, unit: usize) -> f64 {
        self.sigma[unit]
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigma
    }

    pub fn set_sigma(&mut self, unit: usize, sigma: f64) -> Result<()> {
        if unit >= self.schema.len() {
            return Err(Error::InvalidArgument(format!("unit index {unit} out of range")));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!("sigma must be positive, got {sigma}")));
        }
        self.sigma[unit] = sigma;
        Ok(())
    }

    fn check_hidden(&self, h_len: usize) -> Result<()> {
        if h_len != self.hidden {
            return Err(Error::Schema(format!(
                "hidden vector has length {h_len}, model has {} hidden units",
                self.hidden
            )));
        }
        Ok(())
    }

    /// Energy `E(v, h)`.
    pub fn energy(&self, v: &VisibleState, h: &[bool]) -> Result<f64> {
        self.schema.check(v)?;
        self.check_hidden(h.len())?;
        let x = self.schema.slots_of(v);
        let mut neg = 0.0;
        for (i, unit) in self.schema.units().iter().enumerate() {
            if unit.unit_type == UnitType::Gaussian {
                let s = self.sigma[i];
                let vi = x[self.schema.offset(i)];
                neg -= vi * vi / (2.0 * s * s);
            }
        }
        for (slot, &xs) in x.iter().enumerate() {
            if xs == 0.0 {
                continue;
            }
            neg += self.visible_bias[slot] * xs;
            let row = &self.weights[slot * self.hidden..(slot + 1) * self.hidden];
            for (k, &on) in h.iter().enumerate() {
                if on {
                    neg += row[k] * xs;
                }
            }
        }
        for (k, &on) in h.iter().enumerate() {
            if on {
                neg += self.hidden_bias[k];
            }
        }
        Ok(-neg)
    }

    /// `b_k + Σ_slot x_slot w_slot,k` for every hidden unit.
    pub(crate) fn hidden_activations(&self, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.hidden_bias);
        for (slot, &xs) in x.iter().enumerate() {
            if xs == 0.0 {
                continue;
            }
            let row = &self.weights[slot * self.hidden..(slot + 1) * self.hidden];
            for (o, w) in out.iter_mut().zip(row) {
                *o += xs * w;
            }
        }
    }

    pub(crate) fn hidden_probs_from_slots(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.hidden];
        self.hidden_activations(x, &mut out);
        out.iter_mut().for_each(|a| *a = logistic(*a));
        out
    }

    /// `P(h_k = 1 | v)` for every hidden unit.
    pub fn hidden_conditional(&self, v: &VisibleState) -> Result<Vec<f64>> {
        self.schema.check(v)?;
        Ok(self.hidden_probs_from_slots(&self.schema.slots_of(v)))
    }

    /// `a_slot + Σ_k w_slot,k h_k` for every slot; `h` may hold probabilities.
    pub(crate) fn visible_activations(&self, h: &[f64], out: &mut [f64]) {
        for (slot, o) in out.iter_mut().enumerate() {
            let row = &self.weights[slot * self.hidden..(slot + 1) * self.hidden];
            *o = self.visible_bias[slot] + row.iter().zip(h).map(|(w, hk)| w * hk).sum::<f64>();
        }
    }

    pub(crate) fn distribution_from_activations(&self, unit: usize, act: &[f64]) -> VisibleDistribution {
        let off = self.schema.offset(unit);
        match self.schema.units()[unit].unit_type {
            UnitType::Binary => VisibleDistribution::Bernoulli { p: logistic(act[off]) },
            UnitType::Gaussian => {
                let s = self.sigma[unit];
                VisibleDistribution::Gaussian {
                    mean: s * s * act[off],
                    scale: s,
                }
            }
            UnitType::Categorical { cardinality } => {
                let mut probs = act[off..off + cardinality].to_vec();
                softmax_in_place(&mut probs);
                VisibleDistribution::Categorical { probs }
            }
        }
    }

    /// Conditional distribution of visible unit `unit` given hidden states `h`.
    pub fn visible_conditional(&self, h: &[bool], unit: usize) -> Result<VisibleDistribution> {
        self.check_hidden(h.len())?;
        if unit >= self.schema.len() {
            return Err(Error::InvalidArgument(format!(
                "unit index {unit} out of range for {} units",
                self.schema.len()
            )));
        }
        let hf: Vec<f64> = h.iter().map(|&b| f64::from(u8::from(b))).collect();
        let off = self.schema.offset(unit);
        let width = self.schema.units()[unit].unit_type.slots();
        let mut act = vec![0.0; self.schema.n_slots()];
        for slot in off..off + width {
            let row = &self.weights[slot * self.hidden..(slot + 1) * self.hidden];
            act[slot] = self.visible_bias[slot] + row.iter().zip(&hf).map(|(w, hk)| w * hk).sum::<f64>();
        }
        Ok(self.distribution_from_activations(unit, &act))
    }

    /// Samples a full visible state from `P(v | h)` given slot activations.
    pub(crate) fn sample_visible<R: Rng + ?Sized>(&self, act: &[f64], rng: &mut R) -> VisibleState {
        let values = (0..self.schema.len())
            .map(|i| match self.distribution_from_activations(i, act) {
                VisibleDistribution::Bernoulli { p } => UnitValue::Binary(rng.random::<f64>() < p),
                VisibleDistribution::Gaussian { mean, scale } => {
                    let normal = Normal::new(mean, scale).expect("scale is positive");
                    UnitValue::Real(normal.sample(rng))
                }
                VisibleDistribution::Categorical { probs } => UnitValue::Category(sample_index(&probs, rng)),
            })
            .collect();
        VisibleState(values)
    }

    /// One block Gibbs sweep: `h ~ P(h | v)` then `v' ~ P(v | h)`.
    pub fn gibbs_step<R: Rng + ?Sized>(&self, v: &VisibleState, rng: &mut R) -> Result<VisibleState> {
        let probs = self.hidden_conditional(v)?;
        let h: Vec<f64> = probs
            .iter()
            .map(|&p| if rng.random::<f64>() < p { 1.0 } else { 0.0 })
            .collect();
        let mut act = vec![0.0; self.schema.n_slots()];
        self.visible_activations(&h, &mut act);
        Ok(self.sample_visible(&act, rng))
    }

    /// Latent code with states thresholded at 0.5 (`posterior >= 0.5` is on).
    pub fn encode(&self, v: &VisibleState) -> Result<HiddenCode> {
        let posteriors = self.hidden_conditional(v)?;
        let states = posteriors.iter().map(|&p| p >= 0.5).collect();
        Ok(HiddenCode { posteriors, states })
    }

    /// Latent code with states sampled from the posteriors instead of thresholded.
    pub fn encode_sampled<R: Rng + ?Sized>(&self, v: &VisibleState, rng: &mut R) -> Result<HiddenCode> {
        let posteriors = self.hidden_conditional(v)?;
        let states = posteriors.iter().map(|&p| rng.random::<f64>() < p).collect();
        Ok(HiddenCode { posteriors, states })
    }
}

pub(crate) fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn binary_schema(n: usize) -> VisibleSchema {
        VisibleSchema::new((0..n).map(|i| VisibleUnit::new(format!("b{i}"), UnitType::Binary)).collect()).unwrap()
    }

    #[test]
    fn schema_rejects_bad_units() {
        assert!(VisibleSchema::new(vec![]).is_err());
        let dup = vec![
            VisibleUnit::new("x", UnitType::Binary),
            VisibleUnit::new("x", UnitType::Gaussian),
        ];
        assert!(VisibleSchema::new(dup).is_err());
        let cat = vec![VisibleUnit::new("c", UnitType::Categorical { cardinality: 1 })];
        assert!(VisibleSchema::new(cat).is_err());
    }

    #[test]
    fn energy_of_zero_model_is_zero() {
        let p = MvRbmParams::zeros(binary_schema(3), 2).unwrap();
        let v = VisibleState(vec![UnitValue::Binary(false); 3]);
        assert_eq!(p.energy(&v, &[false, false]).unwrap(), 0.0);
    }

    #[test]
    fn energy_single_binary_pair() {
        let mut p = MvRbmParams::zeros(binary_schema(1), 1).unwrap();
        p.visible_bias[0] = 0.3;
        p.hidden_bias[0] = 0.2;
        *p.weight_mut(0, 0) = 0.5;
        let v = VisibleState(vec![UnitValue::Binary(true)]);
        let e = p.energy(&v, &[true]).unwrap();
        assert!((e - -1.0).abs() < 1e-15, "{e}");
    }

    #[test]
    fn energy_gaussian_quadratic_term() {
        let schema = VisibleSchema::new(vec![VisibleUnit::new("g", UnitType::Gaussian)]).unwrap();
        let p = MvRbmParams::zeros(schema, 3).unwrap();
        let v = VisibleState(vec![UnitValue::Real(2.0)]);
        assert_eq!(p.energy(&v, &[false; 3]).unwrap(), 2.0);
    }

    #[test]
    fn energy_dimension_mismatch() {
        let p = MvRbmParams::zeros(binary_schema(2), 2).unwrap();
        let v = VisibleState(vec![UnitValue::Binary(true)]);
        assert!(matches!(p.energy(&v, &[true, true]), Err(Error::Schema(_))));
        let v = VisibleState(vec![UnitValue::Binary(true); 2]);
        assert!(matches!(p.energy(&v, &[true]), Err(Error::Schema(_))));
        let v = VisibleState(vec![UnitValue::Binary(true), UnitValue::Real(1.0)]);
        assert!(p.energy(&v, &[true, true]).is_err());
    }

    #[test]
    fn zero_model_hidden_conditional_is_half() {
        let p = MvRbmParams::zeros(binary_schema(2), 4).unwrap();
        let v = VisibleState(vec![UnitValue::Binary(true), UnitValue::Binary(false)]);
        assert_eq!(p.hidden_conditional(&v).unwrap(), vec![0.5; 4]);
    }

    #[test]
    fn visible_conditional_cases() {
        let schema = VisibleSchema::new(vec![
            VisibleUnit::new("g", UnitType::Gaussian),
            VisibleUnit::new("b", UnitType::Binary),
            VisibleUnit::new("c", UnitType::Categorical { cardinality: 3 }),
        ])
        .unwrap();
        let mut p = MvRbmParams::zeros(schema, 2).unwrap();
        p.visible_bias[0] = 0.5;
        *p.weight_mut(1, 1) = 1.0;
        assert_eq!(
            p.visible_conditional(&[true, false], 0).unwrap(),
            VisibleDistribution::Gaussian { mean: 0.5, scale: 1.0 }
        );
        match p.visible_conditional(&[false, true], 1).unwrap() {
            VisibleDistribution::Bernoulli { p } => assert!((p - 0.7310585786300049).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
        match p.visible_conditional(&[true, true], 2).unwrap() {
            VisibleDistribution::Categorical { probs } => {
                for q in probs {
                    assert!((q - 1.0 / 3.0).abs() < 1e-15);
                }
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(p.visible_conditional(&[true, true], 3), Err(Error::InvalidArgument(_))));
        assert!(p.visible_conditional(&[true], 0).is_err());
    }

    #[test]
    fn encode_threshold_rule() {
        let p = MvRbmParams::zeros(binary_schema(2), 3).unwrap();
        let v = VisibleState(vec![UnitValue::Binary(true), UnitValue::Binary(true)]);
        let code = p.encode(&v).unwrap();
        assert_eq!(code.posteriors, vec![0.5; 3]);
        assert_eq!(code.states, vec![true; 3]);
        assert_eq!(p.encode(&v).unwrap(), code);

        // logistic(x) = 0.4999 sits just below the threshold
        let mut p = MvRbmParams::zeros(binary_schema(1), 1).unwrap();
        p.hidden_bias[0] = (0.4999f64 / 0.5001).ln();
        let v = VisibleState(vec![UnitValue::Binary(false)]);
        let code = p.encode(&v).unwrap();
        assert!((code.posteriors[0] - 0.4999).abs() < 1e-12);
        assert_eq!(code.states, vec![false]);
    }

    #[test]
    fn gibbs_step_is_seeded_and_in_support() {
        let schema = VisibleSchema::new(vec![
            VisibleUnit::new("b", UnitType::Binary),
            VisibleUnit::new("g", UnitType::Gaussian),
            VisibleUnit::new("c", UnitType::Categorical { cardinality: 3 }),
        ])
        .unwrap();
        let p = init_params(&schema, &TrainConfig { hidden_units: 4, seed: 7, ..Default::default() }).unwrap();
        let v = VisibleState(vec![UnitValue::Binary(true), UnitValue::Real(0.3), UnitValue::Category(2)]);
        let run = |seed| {
            let mut rng = seeded(seed);
            let mut state = v.clone();
            let mut trace = Vec::new();
            for _ in 0..50 {
                state = p.gibbs_step(&state, &mut rng).unwrap();
                schema.check(&state).unwrap();
                trace.push(state.clone());
            }
            trace
        };
        assert_eq!(run(11), run(11));
        assert_ne!(run(11), run(12));
    }

    #[test]
    fn gibbs_zero_model_binary_marginal() {
        let p = MvRbmParams::zeros(binary_schema(1), 2).unwrap();
        let mut rng = seeded(3);
        let mut state = VisibleState(vec![UnitValue::Binary(false)]);
        let mut ones = 0usize;
        let steps = 10_000;
        for _ in 0..steps {
            state = p.gibbs_step(&state, &mut rng).unwrap();
            if state.0[0] == UnitValue::Binary(true) {
                ones += 1;
            }
        }
        let mean = ones as f64 / steps as f64;
        assert!((mean - 0.5).abs() < 0.02, "{mean}");
    }

    #[test]
    fn numbers_round_trip_and_reject() {
        let schema = VisibleSchema::new(vec![
            VisibleUnit::new("b", UnitType::Binary),
            VisibleUnit::new("g", UnitType::Gaussian),
            VisibleUnit::new("c", UnitType::Categorical { cardinality: 3 }),
        ])
        .unwrap();
        let v = VisibleState::from_numbers(&schema, &[1.0, -0.25, 2.0]).unwrap();
        assert_eq!(v.to_numbers(), vec![1.0, -0.25, 2.0]);
        assert!(VisibleState::from_numbers(&schema, &[0.5, 0.0, 0.0]).is_err());
        assert!(VisibleState::from_numbers(&schema, &[1.0, 0.0, 3.0]).is_err());
        assert!(VisibleState::from_numbers(&schema, &[1.0, 0.0, 1.5]).is_err());
        assert!(VisibleState::from_numbers(&schema, &[1.0, 0.0]).is_err());
    }

    #[test]
    fn sigma_must_be_positive() {
        let schema = VisibleSchema::new(vec![VisibleUnit::new("g", UnitType::Gaussian)]).unwrap();
        let mut p = MvRbmParams::zeros(schema, 1).unwrap();
        assert!(p.set_sigma(0, 0.0).is_err());
        assert!(p.set_sigma(0, f64::NAN).is_err());
        p.set_sigma(0, 2.0).unwrap();
        p.visible_bias[0] = 0.5;
        assert_eq!(
            p.visible_conditional(&[false], 0).unwrap(),
            VisibleDistribution::Gaussian { mean: 2.0, scale: 2.0 }
        );
    }
}
