use rand::Rng;

use super::tape::{AttnMask, Tape, Var};
use super::{NnError, Scalar};

/// Projection parameters of one attention block, as tape variables.
#[derive(Debug, Clone, Copy)]
pub struct AttentionParams {
    pub wq: Var,
    pub bq: Var,
    pub wk: Var,
    pub bk: Var,
    pub wv: Var,
    pub bv: Var,
    pub wo: Var,
    pub bo: Var,
}

/// Multi-head scaled dot-product attention. `queries` is `[Lq, d]`,
/// `keys_values` is `[Lk, d]`; the mask hides key positions, which then get
/// exactly zero attention weight. Returns the `[Lq, d]` output.
pub fn multi_head_attention<T: Scalar, R: Rng>(
    tape: &mut Tape<T>,
    queries: Var,
    keys_values: Var,
    mask: AttnMask,
    heads: usize,
    params: &AttentionParams,
    weight_dropout: Option<(f64, &mut R)>,
) -> Result<Var, NnError> {
    let (out, _) = multi_head_attention_with_weights(
        tape,
        queries,
        keys_values,
        mask,
        heads,
        params,
        weight_dropout,
    )?;
    Ok(out)
}

/// Same as [`multi_head_attention`], also returning the per-head attention
/// weight matrices (before dropout) for inspection.
pub fn multi_head_attention_with_weights<T: Scalar, R: Rng>(
    tape: &mut Tape<T>,
    queries: Var,
    keys_values: Var,
    mask: AttnMask,
    heads: usize,
    params: &AttentionParams,
    mut weight_dropout: Option<(f64, &mut R)>,
) -> Result<(Var, Vec<Var>), NnError> {
    let width = tape.value(queries).dims2().1;
    if heads == 0 || width % heads != 0 {
        return Err(NnError::HeadsMismatch { width, heads });
    }
    let head_width = width / heads;
    let scale = T::one() / T::from_count(head_width).sqrt();

    let q = linear(tape, queries, params.wq, params.bq)?;
    let k = linear(tape, keys_values, params.wk, params.bk)?;
    let v = linear(tape, keys_values, params.wv, params.bv)?;

    let mut head_outputs = Vec::with_capacity(heads);
    let mut head_weights = Vec::with_capacity(heads);
    for h in 0..heads {
        let qh = tape.slice_cols(q, h * head_width, head_width)?;
        let kh = tape.slice_cols(k, h * head_width, head_width)?;
        let vh = tape.slice_cols(v, h * head_width, head_width)?;
        let kt = tape.transpose(kh);
        let scores = tape.matmul(qh, kt)?;
        let scaled = tape.scale(scores, scale);
        let probs = tape.softmax_rows(scaled, mask.clone())?;
        head_weights.push(probs);
        let attended = match weight_dropout.as_mut() {
            Some((p, rng)) => tape.dropout(probs, *p, *rng),
            None => probs,
        };
        head_outputs.push(tape.matmul(attended, vh)?);
    }
    let merged = tape.concat_cols(&head_outputs)?;
    let out = linear(tape, merged, params.wo, params.bo)?;
    Ok((out, head_weights))
}

/// `x·W + b` on the tape.
pub(crate) fn linear<T: Scalar>(
    tape: &mut Tape<T>,
    x: Var,
    w: Var,
    b: Var,
) -> Result<Var, NnError> {
    let xw = tape.matmul(x, w)?;
    tape.add_row(xw, b)
}
