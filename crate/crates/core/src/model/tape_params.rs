use std::collections::BTreeMap;

use crate::nn::{AttentionParams, Gradients, ParameterSet, Scalar, Tape, Tensor, Var};

/// Parameter tensors loaded onto a tape for one forward/backward pass, keyed
/// by name so gradients can be routed back to the [`ParameterSet`].
pub(crate) struct TapeParams {
    vars: BTreeMap<String, Var>,
}

impl TapeParams {
    pub fn load<T: Scalar>(tape: &mut Tape<T>, params: &ParameterSet<T>) -> Self {
        let mut vars = BTreeMap::new();
        for (name, tensor) in params.iter() {
            vars.insert(name.to_string(), tape.input(tensor.clone()));
        }
        Self { vars }
    }

    pub fn var(&self, name: &str) -> Var {
        *self
            .vars
            .get(name)
            .unwrap_or_else(|| panic!("parameter '{name}' not loaded"))
    }

    pub fn attention(&self, prefix: &str) -> AttentionParams {
        AttentionParams {
            wq: self.var(&format!("{prefix}.wq")),
            bq: self.var(&format!("{prefix}.bq")),
            wk: self.var(&format!("{prefix}.wk")),
            bk: self.var(&format!("{prefix}.bk")),
            wv: self.var(&format!("{prefix}.wv")),
            bv: self.var(&format!("{prefix}.bv")),
            wo: self.var(&format!("{prefix}.wo")),
            bo: self.var(&format!("{prefix}.bo")),
        }
    }

    /// Gradients of every loaded parameter that received one.
    pub fn collect_grads<T: Scalar>(&self, grads: &Gradients<T>) -> BTreeMap<String, Tensor<T>> {
        self.vars
            .iter()
            .filter_map(|(name, &var)| grads.get(var).map(|g| (name.clone(), g.clone())))
            .collect()
    }
}
