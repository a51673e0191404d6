//! Exact likelihood and gradient for small binary/categorical models.

use super::{logistic, MvRbmParams, UnitType, UnitValue, VisibleState};
use crate::{Error, Result};

/// Largest joint state space (visible configurations × 2^K) that will be enumerated.
pub const MAX_ENUMERATION: u128 = 1 << 20;

fn visible_radices(params: &MvRbmParams) -> Result<Vec<usize>> {
    params
        .schema()
        .units()
        .iter()
        .map(|u| match u.unit_type {
            UnitType::Binary => Ok(2),
            UnitType::Categorical { cardinality } => Ok(cardinality),
            UnitType::Gaussian => Err(Error::InvalidArgument(format!(
                "exact likelihood needs a discrete schema; unit `{}` is Gaussian",
                u.name
            ))),
        })
        .collect()
}

fn check_size(radices: &[usize], hidden: usize) -> Result<u128> {
    let mut visible: u128 = 1;
    for &r in radices {
        visible = visible.saturating_mul(r as u128);
    }
    let total = if hidden >= 64 {
        u128::MAX
    } else {
        visible.saturating_mul(1u128 << hidden)
    };
    if total > MAX_ENUMERATION {
        return Err(Error::InvalidArgument(format!(
            "joint state space of {total} exceeds the enumeration limit {MAX_ENUMERATION}"
        )));
    }
    Ok(visible)
}

fn visible_configs(params: &MvRbmParams, radices: &[usize]) -> Vec<VisibleState> {
    let mut out = Vec::new();
    let mut digits = vec![0usize; radices.len()];
    loop {
        let values = params
            .schema()
            .units()
            .iter()
            .zip(&digits)
            .map(|(u, &d)| match u.unit_type {
                UnitType::Binary => UnitValue::Binary(d == 1),
                _ => UnitValue::Category(d),
            })
            .collect();
        out.push(VisibleState(values));
        let mut i = 0;
        loop {
            if i == digits.len() {
                return out;
            }
            digits[i] += 1;
            if digits[i] < radices[i] {
                break;
            }
            digits[i] = 0;
            i += 1;
        }
    }
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

fn hidden_configs(k: usize) -> impl Iterator<Item = Vec<bool>> {
    (0u64..(1u64 << k)).map(move |bits| (0..k).map(|j| bits >> j & 1 == 1).collect())
}

/// Mean log-probability per record, computed by summing `exp(-E(v, h))` over
/// every joint configuration.
///
/// Only schemas without Gaussian units whose joint state space is at most
/// [`MAX_ENUMERATION`] are accepted.
pub fn exact_log_likelihood(data: &[VisibleState], params: &MvRbmParams) -> Result<f64> {
    let radices = visible_radices(params)?;
    check_size(&radices, params.hidden_units())?;
    if data.is_empty() {
        return Err(Error::Ingestion("no records to score".into()));
    }
    let hs: Vec<Vec<bool>> = hidden_configs(params.hidden_units()).collect();
    let log_unnorm = |v: &VisibleState| -> Result<f64> {
        let terms = hs
            .iter()
            .map(|h| params.energy(v, h).map(|e| -e))
            .collect::<Result<Vec<_>>>()?;
        Ok(log_sum_exp(&terms))
    };
    let per_v = visible_configs(params, &radices)
        .iter()
        .map(|v| log_unnorm(v))
        .collect::<Result<Vec<_>>>()?;
    let log_z = log_sum_exp(&per_v);
    let mut total = 0.0;
    for v in data {
        total += log_unnorm(v)? - log_z;
    }
    Ok(total / data.len() as f64)
}

/// Gradient of [`exact_log_likelihood`], laid out like [`MvRbmParams`].
#[derive(Clone, Debug, PartialEq)]
pub struct ParamGradient {
    pub visible_bias: Vec<f64>,
    pub hidden_bias: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Analytic gradient of the mean log-likelihood: data statistics minus model
/// statistics of `x_slot`, `P(h_k|v)` and `x_slot P(h_k|v)`, with the model
/// expectation taken over the exact marginal `P(v) ∝ exp(-F(v))`.
pub fn exact_log_likelihood_gradient(data: &[VisibleState], params: &MvRbmParams) -> Result<ParamGradient> {
    let radices = visible_radices(params)?;
    check_size(&radices, params.hidden_units())?;
    if data.is_empty() {
        return Err(Error::Ingestion("no records to score".into()));
    }
    let schema = params.schema();
    let n = schema.n_slots();
    let k = params.hidden_units();

    // stats(v) = (x, P(h|v), x ⊗ P(h|v)); -F(v) = a·x + Σ_k softplus(act_k)
    let stats = |v: &VisibleState| -> (Vec<f64>, Vec<f64>, f64) {
        let x = schema.slots_of(v);
        let mut act = vec![0.0; k];
        params.hidden_activations(&x, &mut act);
        let neg_free = x.iter().zip(&params.visible_bias).map(|(a, b)| a * b).sum::<f64>()
            + act.iter().map(|&a| softplus(a)).sum::<f64>();
        let probs = act.iter().map(|&a| logistic(a)).collect();
        (x, probs, neg_free)
    };

    let mut grad = ParamGradient {
        visible_bias: vec![0.0; n],
        hidden_bias: vec![0.0; k],
        weights: vec![0.0; n * k],
    };
    let accumulate = |grad: &mut ParamGradient, x: &[f64], probs: &[f64], weight: f64| {
        for s in 0..n {
            grad.visible_bias[s] += weight * x[s];
            for j in 0..k {
                grad.weights[s * k + j] += weight * x[s] * probs[j];
            }
        }
        for j in 0..k {
            grad.hidden_bias[j] += weight * probs[j];
        }
    };

    let inv = 1.0 / data.len() as f64;
    for v in data {
        schema.check(v)?;
        let (x, probs, _) = stats(v);
        accumulate(&mut grad, &x, &probs, inv);
    }

    let model: Vec<_> = visible_configs(params, &radices).iter().map(stats).collect();
    let log_z = log_sum_exp(&model.iter().map(|m| m.2).collect::<Vec<_>>());
    for (x, probs, neg_free) in &model {
        let p = (neg_free - log_z).exp();
        accumulate(&mut grad, x, probs, -p);
    }
    Ok(grad)
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mvrbm::{VisibleSchema, VisibleUnit};

    #[test]
    fn uniform_model_gives_log_half() {
        let schema = VisibleSchema::new(vec![VisibleUnit::new("x", UnitType::Binary)]).unwrap();
        let p = MvRbmParams::zeros(schema, 1).unwrap();
        let data = vec![
            VisibleState(vec![UnitValue::Binary(true)]),
            VisibleState(vec![UnitValue::Binary(false)]),
            VisibleState(vec![UnitValue::Binary(true)]),
        ];
        let ll = exact_log_likelihood(&data, &p).unwrap();
        assert!((ll - 0.5f64.ln()).abs() < 1e-14, "{ll}");
    }

    #[test]
    fn rejects_gaussian_and_large_models() {
        let schema = VisibleSchema::new(vec![VisibleUnit::new("g", UnitType::Gaussian)]).unwrap();
        let p = MvRbmParams::zeros(schema, 1).unwrap();
        let data = vec![VisibleState(vec![UnitValue::Real(0.0)])];
        assert!(exact_log_likelihood(&data, &p).is_err());
        assert!(exact_log_likelihood_gradient(&data, &p).is_err());

        let units = (0..12).map(|i| VisibleUnit::new(format!("b{i}"), UnitType::Binary)).collect();
        let p = MvRbmParams::zeros(VisibleSchema::new(units).unwrap(), 9).unwrap();
        let data = vec![VisibleState(vec![UnitValue::Binary(false); 12])];
        assert!(matches!(exact_log_likelihood(&data, &p), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn enumerates_mixed_radix() {
        let schema = VisibleSchema::new(vec![
            VisibleUnit::new("b", UnitType::Binary),
            VisibleUnit::new("c", UnitType::Categorical { cardinality: 3 }),
        ])
        .unwrap();
        let p = MvRbmParams::zeros(schema, 1).unwrap();
        let configs = visible_configs(&p, &[2, 3]);
        assert_eq!(configs.len(), 6);
        let distinct: std::collections::BTreeSet<String> = configs.iter().map(|v| format!("{v:?}")).collect();
        assert_eq!(distinct.len(), 6);
    }
}
