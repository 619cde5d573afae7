use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{NnError, Scalar, Tensor};

/// AdamW hyperparameters. The paper names the optimizer without settings;
/// these are its conventional defaults, all overridable from config.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamwConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamwConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
        }
    }
}

struct Entry<T> {
    value: Tensor<T>,
    m: Tensor<T>,
    v: Tensor<T>,
    step: u64,
}

/// Named parameters with per-tensor AdamW state. Iteration order is the
/// sorted name order, which fixes checkpoint layout and update order.
pub struct ParameterSet<T: Scalar> {
    entries: BTreeMap<String, Entry<T>>,
}

impl<T: Scalar> Default for ParameterSet<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> ParameterSet<T> {
    pub fn new() -> Self {
        Self {
            entries: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Tensor<T>) {
        let (r, c) = value.dims2();
        self.entries.insert(
            name.into(),
            Entry {
                value,
                m: Tensor::zeros(r, c),
                v: Tensor::zeros(r, c),
                step: 0,
            },
        );
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn get(&self, name: &str) -> Result<&Tensor<T>, NnError> {
        self.entries
            .get(name)
            .map(|e| &e.value)
            .ok_or_else(|| NnError::UnknownParameter {
                name: name.to_string(),
            })
    }

    pub fn set(&mut self, name: &str, value: Tensor<T>) -> Result<(), NnError> {
        let entry = self
            .entries
            .get_mut(name)
            .ok_or_else(|| NnError::UnknownParameter {
                name: name.to_string(),
            })?;
        if entry.value.shape() != value.shape() {
            return Err(NnError::ParameterShape {
                name: name.to_string(),
                expected: entry.value.shape().to_vec(),
                found: value.shape().to_vec(),
            });
        }
        entry.value = value;
        Ok(())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.entries.iter().map(|(k, e)| (k.as_str(), &e.value))
    }

    /// Total number of scalar parameters.
    pub fn value_count(&self) -> usize {
        self.entries.values().map(|e| e.value.len()).sum()
    }

    /// One decoupled-weight-decay Adam step over all parameters. Missing
    /// gradients are treated as zero (the decay still applies); non-finite
    /// gradients abort with the offending tensor's name.
    pub fn adamw_step(
        &mut self,
        grads: &BTreeMap<String, Tensor<T>>,
        lr: f64,
        cfg: &AdamwConfig,
    ) -> Result<(), NnError> {
        for name in grads.keys() {
            if !self.entries.contains_key(name) {
                return Err(NnError::UnknownParameter { name: name.clone() });
            }
        }
        let lr_t = T::from_f(lr);
        let beta1 = T::from_f(cfg.beta1);
        let beta2 = T::from_f(cfg.beta2);
        let eps = T::from_f(cfg.eps);
        let decay_factor = T::from_f(1.0 - lr * cfg.weight_decay);
        let one = T::one();

        for (name, entry) in self.entries.iter_mut() {
            let zero_grad;
            let grad = match grads.get(name) {
                Some(g) => {
                    if g.shape() != entry.value.shape() {
                        return Err(NnError::ParameterShape {
                            name: name.clone(),
                            expected: entry.value.shape().to_vec(),
                            found: g.shape().to_vec(),
                        });
                    }
                    if !g.all_finite() {
                        return Err(NnError::NonFiniteGradient { name: name.clone() });
                    }
                    g
                }
                None => {
                    zero_grad = Tensor::zeros(entry.value.dims2().0, entry.value.dims2().1);
                    &zero_grad
                }
            };
            entry.step += 1;
            let t = entry.step as i32;
            let bias1 = one - beta1.powi(t);
            let bias2 = one - beta2.powi(t);
            let values = entry.value.data_mut();
            let ms = entry.m.data_mut();
            let vs = entry.v.data_mut();
            for ((value, g), (m, v)) in values
                .iter_mut()
                .zip(grad.data())
                .zip(ms.iter_mut().zip(vs.iter_mut()))
            {
                *m = beta1 * *m + (one - beta1) * *g;
                *v = beta2 * *v + (one - beta2) * *g * *g;
                let m_hat = *m / bias1;
                let v_hat = *v / bias2;
                *value = *value * decay_factor - lr_t * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }

    /// Optimizer state for checkpointing: `(m, v, step)` per parameter.
    pub(crate) fn opt_state(&self) -> impl Iterator<Item = (&str, &Tensor<T>, &Tensor<T>, u64)> {
        self.entries
            .iter()
            .map(|(k, e)| (k.as_str(), &e.m, &e.v, e.step))
    }

    pub(crate) fn restore_opt_state(
        &mut self,
        name: &str,
        m: Tensor<T>,
        v: Tensor<T>,
        step: u64,
    ) -> Result<(), NnError> {
        let entry = self
            .entries
            .get_mut(name)
            .ok_or_else(|| NnError::UnknownParameter {
                name: name.to_string(),
            })?;
        if m.shape() != entry.value.shape() || v.shape() != entry.value.shape() {
            return Err(NnError::ParameterShape {
                name: name.to_string(),
                expected: entry.value.shape().to_vec(),
                found: m.shape().to_vec(),
            });
        }
        entry.m = m;
        entry.v = v;
        entry.step = step;
        Ok(())
    }
}

/// Scales all gradients in place so their global Euclidean norm is at most
/// `max_norm`. Returns the pre-clip norm.
pub fn clip_global_norm<T: Scalar>(grads: &mut BTreeMap<String, Tensor<T>>, max_norm: f64) -> f64 {
    let total: f64 = grads
        .values()
        .map(|g| g.data().iter().map(|&v| v.to_f() * v.to_f()).sum::<f64>())
        .sum();
    let norm = total.sqrt();
    if norm > max_norm && norm > 0.0 {
        let factor = T::from_f(max_norm / norm);
        for g in grads.values_mut() {
            g.scale_into(factor);
        }
    }
    norm
}
