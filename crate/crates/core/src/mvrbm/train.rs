use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{MvRbmParams, UnitValue, VisibleDistribution, VisibleSchema, VisibleState};
use crate::rng::seeded;
use crate::{Error, Result};

/// Contrastive-divergence training settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub hidden_units: usize,
    pub cd_steps: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub weight_decay: f64,
    pub momentum: f64,
    /// Stop once the relative epoch-over-epoch improvement of the
    /// reconstruction error stays below 1e-3 for 5 consecutive epochs.
    pub early_stop: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hidden_units: 200,
            cd_steps: 1,
            learning_rate: 0.01,
            epochs: 100,
            batch_size: 64,
            seed: 0,
            weight_decay: 1e-4,
            momentum: 0.5,
            early_stop: false,
        }
    }
}

const EARLY_STOP_TOLERANCE: f64 = 1e-3;
const EARLY_STOP_PATIENCE: usize = 5;
const INIT_WEIGHT_SD: f64 = 0.01;

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidArgument(format!("train config: {what}")));
        if self.hidden_units == 0 {
            return bad("hidden_units must be positive");
        }
        if self.cd_steps == 0 {
            return bad("cd_steps must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad("weight_decay must be nonnegative");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum must lie in [0, 1)");
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub params: MvRbmParams,
    /// Reconstruction error over the full data after each epoch.
    pub trace: Vec<f64>,
}

/// Seeded initialisation: weights ~ N(0, 0.01²), biases zero, σ = 1.
pub fn init_params(schema: &VisibleSchema, cfg: &TrainConfig) -> Result<MvRbmParams> {
    cfg.validate()?;
    let mut params = MvRbmParams::zeros(schema.clone(), cfg.hidden_units)?;
    let mut rng = seeded(cfg.seed);
    let normal = Normal::new(0.0, INIT_WEIGHT_SD).expect("valid normal");
    for w in params.weights.iter_mut() {
        *w = normal.sample(&mut rng);
    }
    Ok(params)
}

/// Trains a fresh model from [`init_params`].
pub fn train_cd(schema: &VisibleSchema, data: &[VisibleState], cfg: &TrainConfig) -> Result<TrainOutcome> {
    let init = init_params(schema, cfg)?;
    train_cd_from(init, data, cfg)
}

/// Continues CD-k training from `params`.
///
/// `cfg.hidden_units` must match the model. The training stream uses a
/// random source derived from `cfg.seed` that is distinct from the one used
/// by [`init_params`].
pub fn train_cd_from(mut params: MvRbmParams, data: &[VisibleState], cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if cfg.hidden_units != params.hidden_units() {
        return Err(Error::InvalidArgument(format!(
            "config asks for {} hidden units, model has {}",
            cfg.hidden_units,
            params.hidden_units()
        )));
    }
    if data.is_empty() {
        return Err(Error::Ingestion("training data is empty".into()));
    }
    for (i, v) in data.iter().enumerate() {
        params
            .schema()
            .check(v)
            .map_err(|e| Error::Ingestion(format!("training record {i}: {e}")))?;
    }

    let schema = params.schema().clone();
    let slots: Vec<Vec<f64>> = data.iter().map(|v| schema.slots_of(v)).collect();
    let n_slots = schema.n_slots();
    let k = params.hidden_units();

    let mut rng = seeded(cfg.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut vel_v = vec![0.0; n_slots];
    let mut vel_h = vec![0.0; k];
    let mut vel_w = vec![0.0; n_slots * k];
    let mut grad_v = vec![0.0; n_slots];
    let mut grad_h = vec![0.0; k];
    let mut grad_w = vec![0.0; n_slots * k];
    let mut trace: Vec<f64> = Vec::with_capacity(cfg.epochs);
    let mut stalled = 0usize;

    let mut act_v = vec![0.0; n_slots];
    let mut x_neg = vec![0.0; n_slots];
    let mut h_sample = vec![0.0; k];

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            grad_v.iter_mut().for_each(|g| *g = 0.0);
            grad_h.iter_mut().for_each(|g| *g = 0.0);
            grad_w.iter_mut().for_each(|g| *g = 0.0);

            for &idx in batch {
                let x_pos = &slots[idx];
                let h_pos = params.hidden_probs_from_slots(x_pos);

                // CD-k chain; the last visible update uses expectations.
                let mut h_probs = h_pos.clone();
                for step in 0..cfg.cd_steps {
                    for (s, &p) in h_sample.iter_mut().zip(&h_probs) {
                        *s = if rng.random::<f64>() < p { 1.0 } else { 0.0 };
                    }
                    params.visible_activations(&h_sample, &mut act_v);
                    if step + 1 == cfg.cd_steps {
                        mean_field_visible(&params, &act_v, &mut x_neg);
                    } else {
                        let v = params.sample_visible(&act_v, &mut rng);
                        schema.fill_slots(&v, &mut x_neg);
                    }
                    h_probs = params.hidden_probs_from_slots(&x_neg);
                }

                for s in 0..n_slots {
                    grad_v[s] += x_pos[s] - x_neg[s];
                    let row = &mut grad_w[s * k..(s + 1) * k];
                    let (xp, xn) = (x_pos[s], x_neg[s]);
                    for j in 0..k {
                        row[j] += xp * h_pos[j] - xn * h_probs[j];
                    }
                }
                for j in 0..k {
                    grad_h[j] += h_pos[j] - h_probs[j];
                }
            }

            let scale = 1.0 / batch.len() as f64;
            let lr = cfg.learning_rate;
            for (i, w) in params.weights.iter_mut().enumerate() {
                vel_w[i] = cfg.momentum * vel_w[i] + lr * (grad_w[i] * scale - cfg.weight_decay * *w);
                *w += vel_w[i];
            }
            for (i, a) in params.visible_bias.iter_mut().enumerate() {
                vel_v[i] = cfg.momentum * vel_v[i] + lr * grad_v[i] * scale;
                *a += vel_v[i];
            }
            for (i, b) in params.hidden_bias.iter_mut().enumerate() {
                vel_h[i] = cfg.momentum * vel_h[i] + lr * grad_h[i] * scale;
                *b += vel_h[i];
            }
        }

        let err = reconstruction_error(&params, data)?;
        log::debug!("epoch {}: reconstruction error {err:.6}", epoch + 1);
        if cfg.early_stop {
            if let Some(&prev) = trace.last() {
                let rel = (prev - err) / f64::max(prev.abs(), f64::MIN_POSITIVE);
                stalled = if rel < EARLY_STOP_TOLERANCE { stalled + 1 } else { 0 };
            }
        }
        trace.push(err);
        if cfg.early_stop && stalled >= EARLY_STOP_PATIENCE {
            log::info!("early stop after epoch {}", epoch + 1);
            break;
        }
    }

    Ok(TrainOutcome { params, trace })
}

/// Expected one-hot slot values under `P(v | h)` for the given activations.
fn mean_field_visible(params: &MvRbmParams, act: &[f64], out: &mut [f64]) {
    let schema = params.schema();
    for i in 0..schema.len() {
        let off = schema.offset(i);
        match params.distribution_from_activations(i, act) {
            VisibleDistribution::Bernoulli { p } => out[off] = p,
            VisibleDistribution::Gaussian { mean, .. } => out[off] = mean,
            VisibleDistribution::Categorical { probs } => out[off..off + probs.len()].copy_from_slice(&probs),
        }
    }
}

/// Mean per-record reconstruction error of the deterministic pass
/// `v → P(h|v) → E[v|h]`: squared error on Gaussian units plus
/// cross-entropy on binary and categorical units, summed over units.
pub fn reconstruction_error(params: &MvRbmParams, data: &[VisibleState]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Ingestion("no records to reconstruct".into()));
    }
    const FLOOR: f64 = 1e-12;
    let schema = params.schema();
    let mut act = vec![0.0; schema.n_slots()];
    let mut total = 0.0;
    for v in data {
        let h = params.hidden_conditional(v)?;
        params.visible_activations(&h, &mut act);
        for (i, value) in v.0.iter().enumerate() {
            let dist = params.distribution_from_activations(i, &act);
            total += match (dist, *value) {
                (VisibleDistribution::Gaussian { mean, .. }, UnitValue::Real(x)) => (x - mean) * (x - mean),
                (VisibleDistribution::Bernoulli { p }, UnitValue::Binary(b)) => {
                    let q = if b { p } else { 1.0 - p };
                    -q.max(FLOOR).ln()
                }
                (VisibleDistribution::Categorical { probs }, UnitValue::Category(c)) => -probs[c].max(FLOOR).ln(),
                _ => unreachable!("state checked against schema"),
            };
        }
    }
    Ok(total / data.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mvrbm::{UnitType, VisibleUnit};

    fn one_binary() -> VisibleSchema {
        VisibleSchema::new(vec![VisibleUnit::new("x", UnitType::Binary)]).unwrap()
    }

    #[test]
    fn learns_all_ones() {
        let data = vec![VisibleState(vec![UnitValue::Binary(true)]); 20];
        let cfg = TrainConfig {
            hidden_units: 2,
            epochs: 200,
            batch_size: 10,
            learning_rate: 0.1,
            seed: 1,
            ..Default::default()
        };
        let out = train_cd(&one_binary(), &data, &cfg).unwrap();
        let p = &out.params;
        let h = p.hidden_conditional(&data[0]).unwrap();
        let mut act = vec![0.0; 1];
        p.visible_activations(&h, &mut act);
        match p.distribution_from_activations(0, &act) {
            VisibleDistribution::Bernoulli { p } => assert!(p > 0.9, "{p}"),
            other => panic!("{other:?}"),
        }
        assert_eq!(out.trace.len(), 200);
    }

    #[test]
    fn zero_epochs_is_identity() {
        let data = vec![VisibleState(vec![UnitValue::Binary(true)])];
        let cfg = TrainConfig {
            hidden_units: 3,
            epochs: 0,
            seed: 5,
            ..Default::default()
        };
        let out = train_cd(&one_binary(), &data, &cfg).unwrap();
        assert_eq!(out.params, init_params(&one_binary(), &cfg).unwrap());
        assert!(out.trace.is_empty());
    }

    #[test]
    fn rejects_empty_and_bad_records() {
        let cfg = TrainConfig {
            hidden_units: 2,
            ..Default::default()
        };
        assert!(matches!(train_cd(&one_binary(), &[], &cfg), Err(Error::Ingestion(_))));
        let data = vec![
            VisibleState(vec![UnitValue::Binary(true)]),
            VisibleState(vec![UnitValue::Real(0.0)]),
        ];
        match train_cd(&one_binary(), &data, &cfg) {
            Err(Error::Ingestion(msg)) => assert!(msg.contains("record 1"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn config_validation() {
        let base = TrainConfig::default();
        assert!(base.validate().is_ok());
        for cfg in [
            TrainConfig { hidden_units: 0, ..base.clone() },
            TrainConfig { cd_steps: 0, ..base.clone() },
            TrainConfig { learning_rate: 0.0, ..base.clone() },
            TrainConfig { batch_size: 0, ..base.clone() },
            TrainConfig { weight_decay: -1.0, ..base.clone() },
            TrainConfig { momentum: 1.0, ..base.clone() },
        ] {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
    }

    #[test]
    fn training_is_seeded() {
        let schema = VisibleSchema::new(vec![
            VisibleUnit::new("b", UnitType::Binary),
            VisibleUnit::new("g", UnitType::Gaussian),
            VisibleUnit::new("c", UnitType::Categorical { cardinality: 3 }),
        ])
        .unwrap();
        let data: Vec<_> = (0..30)
            .map(|i| {
                VisibleState(vec![
                    UnitValue::Binary(i % 2 == 0),
                    UnitValue::Real((i as f64 - 15.0) / 10.0),
                    UnitValue::Category(i % 3),
                ])
            })
            .collect();
        let cfg = TrainConfig {
            hidden_units: 4,
            epochs: 10,
            batch_size: 7,
            cd_steps: 2,
            seed: 9,
            ..Default::default()
        };
        let a = train_cd(&schema, &data, &cfg).unwrap();
        let b = train_cd(&schema, &data, &cfg).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(a.trace, b.trace);
    }

    #[test]
    fn early_stop_cuts_the_trace() {
        let data = vec![VisibleState(vec![UnitValue::Binary(true)]); 8];
        let cfg = TrainConfig {
            hidden_units: 2,
            epochs: 5000,
            learning_rate: 0.5,
            early_stop: true,
            seed: 2,
            ..Default::default()
        };
        let out = train_cd(&one_binary(), &data, &cfg).unwrap();
        assert!(out.trace.len() < 5000);
    }
}
