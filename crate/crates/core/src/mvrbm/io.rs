use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{MvRbmParams, UnitType, VisibleSchema};
use crate::{Error, Result};

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// On-disk model: schema, hidden-unit count and every parameter array in
/// schema order. Floats are written in shortest round-trip form, so a
/// save/load cycle reproduces every parameter bit for bit.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDocument {
    format_version: u32,
    schema: VisibleSchema,
    hidden_units: usize,
    /// Per unit, one bias per slot (one for binary/Gaussian, M for categorical).
    visible_bias: Vec<Vec<f64>>,
    hidden_bias: Vec<f64>,
    /// Per unit, per slot, K weights.
    weights: Vec<Vec<Vec<f64>>>,
    /// Per unit; meaningful for Gaussian units only.
    sigma: Vec<f64>,
}

fn finite(name: &str, xs: &[f64]) -> Result<()> {
    match xs.iter().find(|x| !x.is_finite()) {
        Some(x) => Err(Error::Schema(format!("non-finite value {x} in {name}"))),
        None => Ok(()),
    }
}

impl MvRbmParams {
    pub fn to_json(&self) -> String {
        let schema = &self.schema;
        let k = self.hidden;
        let mut visible_bias = Vec::with_capacity(schema.len());
        let mut weights = Vec::with_capacity(schema.len());
        for (i, unit) in schema.units().iter().enumerate() {
            let off = schema.offset(i);
            let width = unit.unit_type.slots();
            visible_bias.push(self.visible_bias[off..off + width].to_vec());
            weights.push(
                (off..off + width)
                    .map(|s| self.weights[s * k..(s + 1) * k].to_vec())
                    .collect(),
            );
        }
        let doc = ModelDocument {
            format_version: MODEL_FORMAT_VERSION,
            schema: schema.clone(),
            hidden_units: k,
            visible_bias,
            hidden_bias: self.hidden_bias.clone(),
            weights,
            sigma: self.sigma.clone(),
        };
        serde_json::to_string_pretty(&doc).expect("model serialises")
    }

    /// Parses and validates a model document.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDocument = serde_json::from_str(text).map_err(|e| Error::json("model", e))?;
        if doc.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Schema(format!(
                "unsupported model format version {} (expected {MODEL_FORMAT_VERSION})",
                doc.format_version
            )));
        }
        let k = doc.hidden_units;
        let mut params = MvRbmParams::zeros(doc.schema, k).map_err(|e| Error::Schema(e.to_string()))?;
        let schema = params.schema.clone();
        let n = schema.len();
        if doc.visible_bias.len() != n || doc.weights.len() != n || doc.sigma.len() != n {
            return Err(Error::Schema(format!("parameter arrays must have one entry per unit ({n})")));
        }
        if doc.hidden_bias.len() != k {
            return Err(Error::Schema(format!("hidden_bias must have {k} entries")));
        }
        finite("hidden_bias", &doc.hidden_bias)?;
        params.hidden_bias = doc.hidden_bias;
        for (i, unit) in schema.units().iter().enumerate() {
            let off = schema.offset(i);
            let width = unit.unit_type.slots();
            let bias = &doc.visible_bias[i];
            if bias.len() != width {
                return Err(Error::Schema(format!("unit `{}` needs {width} biases", unit.name)));
            }
            finite("visible_bias", bias)?;
            params.visible_bias[off..off + width].copy_from_slice(bias);
            if doc.weights[i].len() != width {
                return Err(Error::Schema(format!("unit `{}` needs {width} weight rows", unit.name)));
            }
            for (m, row) in doc.weights[i].iter().enumerate() {
                if row.len() != k {
                    return Err(Error::Schema(format!("unit `{}` weight rows need {k} entries", unit.name)));
                }
                finite("weights", row)?;
                params.weights[(off + m) * k..(off + m + 1) * k].copy_from_slice(row);
            }
            let s = doc.sigma[i];
            if unit.unit_type == UnitType::Gaussian {
                params.set_sigma(i, s).map_err(|e| Error::Schema(e.to_string()))?;
            } else if !s.is_finite() {
                return Err(Error::Schema(format!("sigma of `{}` is not finite", unit.name)));
            } else {
                params.sigma[i] = s;
            }
        }
        Ok(params)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mvrbm::{init_params, TrainConfig, VisibleUnit};
    use proptest::prelude::*;

    fn mixed_schema() -> VisibleSchema {
        VisibleSchema::new(vec![
            VisibleUnit::new("age", UnitType::Gaussian),
            VisibleUnit::new("male", UnitType::Binary),
            VisibleUnit::new("admission", UnitType::Categorical { cardinality: 4 }),
        ])
        .unwrap()
    }

    proptest! {
        #[test]
        fn save_load_is_bit_exact(seed in any::<u64>(), k in 1usize..6, scale in -1e6f64..1e6, sigma in 1e-3f64..1e3) {
            let cfg = TrainConfig { hidden_units: k, seed, ..Default::default() };
            let mut p = init_params(&mixed_schema(), &cfg).unwrap();
            for (i, w) in p.weights.iter_mut().enumerate() {
                *w *= scale / (i as f64 + 1.0);
            }
            p.visible_bias[2] = scale.sqrt().max(0.0) + 1.0 / 3.0;
            p.hidden_bias[0] = -scale * 1e-9;
            p.set_sigma(0, sigma).unwrap();
            let back = MvRbmParams::from_json(&p.to_json()).unwrap();
            prop_assert_eq!(back.weights.iter().map(|w| w.to_bits()).collect::<Vec<_>>(),
                            p.weights.iter().map(|w| w.to_bits()).collect::<Vec<_>>());
            prop_assert_eq!(back, p);
        }
    }

    #[test]
    fn rejects_inconsistent_documents() {
        let p = MvRbmParams::zeros(mixed_schema(), 2).unwrap();
        let text = p.to_json();
        let mut doc: serde_json::Value = serde_json::from_str(&text).unwrap();
        doc["hidden_units"] = 3.into();
        assert!(MvRbmParams::from_json(&doc.to_string()).is_err());

        let mut doc: serde_json::Value = serde_json::from_str(&text).unwrap();
        doc["sigma"][0] = 0.0.into();
        assert!(MvRbmParams::from_json(&doc.to_string()).is_err());

        let mut doc: serde_json::Value = serde_json::from_str(&text).unwrap();
        doc["format_version"] = 99.into();
        assert!(MvRbmParams::from_json(&doc.to_string()).is_err());

        let mut doc: serde_json::Value = serde_json::from_str(&text).unwrap();
        doc["weights"][2].as_array_mut().unwrap().pop();
        assert!(MvRbmParams::from_json(&doc.to_string()).is_err());

        assert!(MvRbmParams::from_json("{").is_err());
    }
}
