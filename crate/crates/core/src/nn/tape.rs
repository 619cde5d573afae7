use rand::Rng;

use super::{NnError, Scalar, Tensor};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(pub(crate) usize);

/// Attention masking applied inside a row-wise softmax: invalid key columns
/// receive exactly zero weight and exactly zero gradient.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AttnMask {
    /// Every key is visible.
    Full,
    /// Query row `j` sees key columns `0..=j`.
    Causal,
    /// Key columns at or beyond `valid_len` are hidden from every row.
    KeyPadding { valid_len: usize },
}

impl AttnMask {
    fn visible(&self, row: usize, col: usize) -> bool {
        match self {
            AttnMask::Full => true,
            AttnMask::Causal => col <= row,
            AttnMask::KeyPadding { valid_len } => col < *valid_len,
        }
    }
}

enum Op<T: Scalar> {
    Input,
    MatMul(usize, usize),
    Add(usize, usize),
    AddRow(usize, usize),
    Mul(usize, usize),
    Scale(usize, T),
    Relu(usize),
    Transpose(usize),
    PadRows(usize),
    SumRows(usize),
    SliceCols { x: usize, start: usize },
    ConcatCols(Vec<usize>),
    Embedding { table: usize, ids: Vec<u16> },
    LayerNorm {
        x: usize,
        gain: usize,
        bias: usize,
        /// Per-row (mean, inverse std) saved at forward time.
        cache: Vec<(T, T)>,
    },
    SoftmaxRows { x: usize, mask: AttnMask },
    Dropout { x: usize, keep: Vec<bool>, inv_keep: T },
    CrossEntropy {
        logits: usize,
        /// Gradient for an upstream gradient of one, saved at forward time.
        unit_grad: Tensor<T>,
    },
    MaskedMse {
        preds: usize,
        unit_grad: Tensor<T>,
    },
    MaskedBceLogits {
        logits: usize,
        unit_grad: Tensor<T>,
    },
}

struct Node<T: Scalar> {
    value: Tensor<T>,
    op: Op<T>,
}

/// Reverse-mode tape over dense tensors. Operations append nodes; a single
/// [`Tape::backward`] pass walks them in reverse, accumulating gradients in
/// a fixed order so repeated runs are bit-identical.
pub struct Tape<T: Scalar> {
    nodes: Vec<Node<T>>,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

/// Gradients produced by [`Tape::backward`], indexed by [`Var`].
pub struct Gradients<T: Scalar> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Scalar> Gradients<T> {
    /// Gradient of the loss with respect to `v`, if `v` participated.
    pub fn get(&self, v: Var) -> Option<&Tensor<T>> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    fn shape_err(op: &'static str, detail: String) -> NnError {
        NnError::ShapeMismatch { op, detail }
    }

    pub fn input(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Input)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        let value = self.value(a).matmul(self.value(b))?;
        Ok(self.push(value, Op::MatMul(a.0, b.0)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.dims2() != vb.dims2() {
            return Err(Self::shape_err(
                "add",
                format!("{:?} + {:?}", va.shape(), vb.shape()),
            ));
        }
        let mut value = va.clone();
        value.add_into(vb);
        Ok(self.push(value, Op::Add(a.0, b.0)))
    }

    /// Adds a `[1,n]` row vector to every row of `x`.
    pub fn add_row(&mut self, x: Var, row: Var) -> Result<Var, NnError> {
        let (vx, vr) = (self.value(x), self.value(row));
        let (_, n) = vx.dims2();
        if vr.dims2() != (1, n) {
            return Err(Self::shape_err(
                "add_row",
                format!("{:?} + row {:?}", vx.shape(), vr.shape()),
            ));
        }
        let mut value = vx.clone();
        let (m, _) = value.dims2();
        for i in 0..m {
            for j in 0..n {
                let v = value.get(i, j) + vr.get(0, j);
                value.set(i, j, v);
            }
        }
        Ok(self.push(value, Op::AddRow(x.0, row.0)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.dims2() != vb.dims2() {
            return Err(Self::shape_err(
                "mul",
                format!("{:?} * {:?}", va.shape(), vb.shape()),
            ));
        }
        let data: Vec<T> = va
            .data()
            .iter()
            .zip(vb.data())
            .map(|(&x, &y)| x * y)
            .collect();
        let value = Tensor::new(va.shape().to_vec(), data)?;
        Ok(self.push(value, Op::Mul(a.0, b.0)))
    }

    pub fn scale(&mut self, x: Var, c: T) -> Var {
        let value = self.value(x).map(|v| v * c);
        self.push(value, Op::Scale(x.0, c))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let value = self.value(x).map(|v| if v > T::zero() { v } else { T::zero() });
        self.push(value, Op::Relu(x.0))
    }

    pub fn transpose(&mut self, x: Var) -> Var {
        let value = self.value(x).transposed();
        self.push(value, Op::Transpose(x.0))
    }

    /// Zero-pads `x` with extra rows up to `rows`.
    pub fn pad_rows(&mut self, x: Var, rows: usize) -> Result<Var, NnError> {
        let vx = self.value(x);
        let (m, n) = vx.dims2();
        if rows < m {
            return Err(Self::shape_err(
                "pad_rows",
                format!("cannot pad {m} rows down to {rows}"),
            ));
        }
        let mut value = Tensor::zeros(rows, n);
        value.data_mut()[..m * n].copy_from_slice(vx.data());
        Ok(self.push(value, Op::PadRows(x.0)))
    }

    /// Sums over the row axis, producing a `[1,n]` row.
    pub fn sum_rows(&mut self, x: Var) -> Var {
        let vx = self.value(x);
        let (m, n) = vx.dims2();
        let mut out = Tensor::zeros(1, n);
        for i in 0..m {
            for j in 0..n {
                let v = out.get(0, j) + vx.get(i, j);
                out.set(0, j, v);
            }
        }
        self.push(out, Op::SumRows(x.0))
    }

    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Result<Var, NnError> {
        let vx = self.value(x);
        let (m, n) = vx.dims2();
        if start + len > n {
            return Err(Self::shape_err(
                "slice_cols",
                format!("{start}..{} of {n} columns", start + len),
            ));
        }
        let mut out = Tensor::zeros(m, len);
        for i in 0..m {
            for j in 0..len {
                out.set(i, j, vx.get(i, start + j));
            }
        }
        Ok(self.push(out, Op::SliceCols { x: x.0, start }))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var, NnError> {
        if parts.is_empty() {
            return Err(Self::shape_err("concat_cols", "no parts".to_string()));
        }
        let m = self.value(parts[0]).dims2().0;
        let total: usize = parts.iter().map(|&p| self.value(p).dims2().1).sum();
        for &p in parts {
            if self.value(p).dims2().0 != m {
                return Err(Self::shape_err(
                    "concat_cols",
                    "row counts differ".to_string(),
                ));
            }
        }
        let mut out = Tensor::zeros(m, total);
        let mut offset = 0;
        for &p in parts {
            let vp = self.value(p);
            let (_, w) = vp.dims2();
            for i in 0..m {
                for j in 0..w {
                    out.set(i, offset + j, vp.get(i, j));
                }
            }
            offset += w;
        }
        Ok(self.push(out, Op::ConcatCols(parts.iter().map(|p| p.0).collect())))
    }

    /// Looks up embedding rows for `ids` in `table` (`[V,d]`).
    pub fn embedding(&mut self, table: Var, ids: &[u16]) -> Result<Var, NnError> {
        let vt = self.value(table);
        let (v, d) = vt.dims2();
        let mut out = Tensor::zeros(ids.len(), d);
        for (i, &id) in ids.iter().enumerate() {
            let id = id as usize;
            if id >= v {
                return Err(NnError::TokenOutOfVocab { id: id as u16, vocab: v });
            }
            for j in 0..d {
                out.set(i, j, vt.get(id, j));
            }
        }
        Ok(self.push(
            out,
            Op::Embedding {
                table: table.0,
                ids: ids.to_vec(),
            },
        ))
    }

    /// Row-wise layer normalization with learnable gain and bias (`[1,n]`).
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var, eps: T) -> Result<Var, NnError> {
        let vx = self.value(x);
        let (m, n) = vx.dims2();
        if self.value(gain).dims2() != (1, n) || self.value(bias).dims2() != (1, n) {
            return Err(Self::shape_err(
                "layer_norm",
                format!(
                    "x {:?}, gain {:?}, bias {:?}",
                    vx.shape(),
                    self.value(gain).shape(),
                    self.value(bias).shape()
                ),
            ));
        }
        let mut out = Tensor::zeros(m, n);
        let mut cache = Vec::with_capacity(m);
        let inv_n = T::one() / T::from_count(n);
        for i in 0..m {
            let row = vx.row_slice(i);
            let mean = row.iter().copied().sum::<T>() * inv_n;
            let var = row
                .iter()
                .map(|&v| (v - mean) * (v - mean))
                .sum::<T>()
                * inv_n;
            let inv_std = T::one() / (var + eps).sqrt();
            cache.push((mean, inv_std));
            for j in 0..n {
                let xhat = (vx.get(i, j) - mean) * inv_std;
                out.set(i, j, self.value(gain).get(0, j) * xhat + self.value(bias).get(0, j));
            }
        }
        Ok(self.push(
            out,
            Op::LayerNorm {
                x: x.0,
                gain: gain.0,
                bias: bias.0,
                cache,
            },
        ))
    }

    /// Row-wise softmax restricted to the mask's visible columns. Hidden
    /// columns get exactly zero output and gradient. A row with no visible
    /// column is an error.
    pub fn softmax_rows(&mut self, x: Var, mask: AttnMask) -> Result<Var, NnError> {
        let vx = self.value(x);
        let (m, n) = vx.dims2();
        let mut out = Tensor::zeros(m, n);
        for i in 0..m {
            let visible: Vec<usize> = (0..n).filter(|&j| mask.visible(i, j)).collect();
            if visible.is_empty() {
                return Err(NnError::FullyMaskedRow { row: i });
            }
            let max = visible
                .iter()
                .map(|&j| vx.get(i, j))
                .fold(T::neg_infinity(), T::max);
            let mut sum = T::zero();
            for &j in &visible {
                let e = (vx.get(i, j) - max).exp();
                out.set(i, j, e);
                sum += e;
            }
            for &j in &visible {
                out.set(i, j, out.get(i, j) / sum);
            }
        }
        Ok(self.push(out, Op::SoftmaxRows { x: x.0, mask }))
    }

    /// Inverted dropout: keeps each value with probability `1-p`, scaling
    /// kept values by `1/(1-p)`. `p = 0` is the identity.
    pub fn dropout<R: Rng>(&mut self, x: Var, p: f64, rng: &mut R) -> Var {
        if p <= 0.0 {
            return self.scale(x, T::one());
        }
        let keep_prob = 1.0 - p;
        let inv_keep = T::from_f(1.0 / keep_prob);
        let vx = self.value(x);
        let keep: Vec<bool> = (0..vx.len()).map(|_| rng.gen::<f64>() < keep_prob).collect();
        let data: Vec<T> = vx
            .data()
            .iter()
            .zip(&keep)
            .map(|(&v, &k)| if k { v * inv_keep } else { T::zero() })
            .collect();
        let value = Tensor::new(vx.shape().to_vec(), data).expect("same shape");
        self.push(value, Op::Dropout { x: x.0, keep, inv_keep })
    }

    /// Mean softmax cross-entropy over rows whose target is not `ignore`.
    /// Targets out of the vocabulary range are an error. When every target
    /// is ignored the loss is zero with a zero gradient.
    pub fn cross_entropy(
        &mut self,
        logits: Var,
        targets: &[u16],
        ignore: u16,
    ) -> Result<Var, NnError> {
        let (loss, unit_grad) =
            super::loss::softmax_cross_entropy(self.value(logits), targets, ignore)?;
        Ok(self.push(
            Tensor::scalar(loss),
            Op::CrossEntropy {
                logits: logits.0,
                unit_grad,
            },
        ))
    }

    /// Mean squared error over label slots that are present; `None` labels
    /// contribute neither loss nor gradient. All labels absent gives zero.
    pub fn masked_mse(&mut self, preds: Var, targets: &[Option<f64>]) -> Result<Var, NnError> {
        let vp = self.value(preds);
        if vp.len() != targets.len() {
            return Err(Self::shape_err(
                "masked_mse",
                format!("{} predictions vs {} targets", vp.len(), targets.len()),
            ));
        }
        let count = targets.iter().filter(|t| t.is_some()).count();
        let mut unit_grad = Tensor::zeros(vp.dims2().0, vp.dims2().1);
        let mut loss = T::zero();
        if count > 0 {
            let inv = T::one() / T::from_count(count);
            let two = T::from_f(2.0);
            for (i, target) in targets.iter().enumerate() {
                if let Some(y) = target {
                    let diff = vp.data()[i] - T::from_f(*y);
                    loss += diff * diff * inv;
                    unit_grad.data_mut()[i] = two * diff * inv;
                }
            }
        }
        Ok(self.push(
            Tensor::scalar(loss),
            Op::MaskedMse {
                preds: preds.0,
                unit_grad,
            },
        ))
    }

    /// Per-slot sigmoid cross-entropy with logits over present labels
    /// (`0.0`/`1.0`); `None` labels are masked out.
    pub fn masked_bce_logits(
        &mut self,
        logits: Var,
        targets: &[Option<f64>],
    ) -> Result<Var, NnError> {
        let vl = self.value(logits);
        if vl.len() != targets.len() {
            return Err(Self::shape_err(
                "masked_bce_logits",
                format!("{} logits vs {} targets", vl.len(), targets.len()),
            ));
        }
        let count = targets.iter().filter(|t| t.is_some()).count();
        let mut unit_grad = Tensor::zeros(vl.dims2().0, vl.dims2().1);
        let mut loss = T::zero();
        if count > 0 {
            let inv = T::one() / T::from_count(count);
            for (i, target) in targets.iter().enumerate() {
                if let Some(y) = target {
                    let z = vl.data()[i];
                    let y = T::from_f(*y);
                    // max(z,0) - z*y + ln(1 + exp(-|z|)) is stable for both signs.
                    let term = z.max(T::zero()) - z * y + (T::one() + (-z.abs()).exp()).ln();
                    loss += term * inv;
                    let sigmoid = T::one() / (T::one() + (-z).exp());
                    unit_grad.data_mut()[i] = (sigmoid - y) * inv;
                }
            }
        }
        Ok(self.push(
            Tensor::scalar(loss),
            Op::MaskedBceLogits {
                logits: logits.0,
                unit_grad,
            },
        ))
    }

    /// Runs the reverse pass from a scalar root.
    pub fn backward(&self, root: Var) -> Result<Gradients<T>, NnError> {
        if self.value(root).len() != 1 {
            return Err(Self::shape_err(
                "backward",
                format!("root must be scalar, got {:?}", self.value(root).shape()),
            ));
        }
        let mut grads: Vec<Option<Tensor<T>>> = vec![None; self.nodes.len()];
        grads[root.0] = Some(Tensor::scalar(T::one()));

        for idx in (0..=root.0).rev() {
            let Some(grad) = grads[idx].clone() else {
                continue;
            };
            self.backward_step(idx, &grad, &mut grads)?;
        }
        Ok(Gradients { grads })
    }

    fn accumulate(grads: &mut [Option<Tensor<T>>], target: usize, delta: Tensor<T>) {
        match &mut grads[target] {
            Some(existing) => existing.add_into(&delta),
            slot @ None => *slot = Some(delta),
        }
    }

    fn backward_step(
        &self,
        idx: usize,
        grad: &Tensor<T>,
        grads: &mut Vec<Option<Tensor<T>>>,
    ) -> Result<(), NnError> {
        match &self.nodes[idx].op {
            Op::Input => {}
            Op::MatMul(a, b) => {
                let va = &self.nodes[*a].value;
                let vb = &self.nodes[*b].value;
                let da = grad.matmul(&vb.transposed())?;
                let db = va.transposed().matmul(grad)?;
                Self::accumulate(grads, *a, da);
                Self::accumulate(grads, *b, db);
            }
            Op::Add(a, b) => {
                Self::accumulate(grads, *a, grad.clone());
                Self::accumulate(grads, *b, grad.clone());
            }
            Op::AddRow(x, row) => {
                Self::accumulate(grads, *x, grad.clone());
                let (m, n) = grad.dims2();
                let mut drow = Tensor::zeros(1, n);
                for i in 0..m {
                    for j in 0..n {
                        let v = drow.get(0, j) + grad.get(i, j);
                        drow.set(0, j, v);
                    }
                }
                Self::accumulate(grads, *row, drow);
            }
            Op::Mul(a, b) => {
                let va = &self.nodes[*a].value;
                let vb = &self.nodes[*b].value;
                let da: Vec<T> = grad
                    .data()
                    .iter()
                    .zip(vb.data())
                    .map(|(&g, &v)| g * v)
                    .collect();
                let db: Vec<T> = grad
                    .data()
                    .iter()
                    .zip(va.data())
                    .map(|(&g, &v)| g * v)
                    .collect();
                Self::accumulate(grads, *a, Tensor::new(va.shape().to_vec(), da)?);
                Self::accumulate(grads, *b, Tensor::new(vb.shape().to_vec(), db)?);
            }
            Op::Scale(x, c) => {
                Self::accumulate(grads, *x, grad.map(|g| g * *c));
            }
            Op::Relu(x) => {
                let vx = &self.nodes[*x].value;
                let data: Vec<T> = grad
                    .data()
                    .iter()
                    .zip(vx.data())
                    .map(|(&g, &v)| if v > T::zero() { g } else { T::zero() })
                    .collect();
                Self::accumulate(grads, *x, Tensor::new(vx.shape().to_vec(), data)?);
            }
            Op::Transpose(x) => {
                Self::accumulate(grads, *x, grad.transposed());
            }
            Op::PadRows(x) => {
                let vx = &self.nodes[*x].value;
                let (m, n) = vx.dims2();
                let mut dx = Tensor::zeros(m, n);
                dx.data_mut().copy_from_slice(&grad.data()[..m * n]);
                Self::accumulate(grads, *x, dx);
            }
            Op::SumRows(x) => {
                let vx = &self.nodes[*x].value;
                let (m, n) = vx.dims2();
                let mut dx = Tensor::zeros(m, n);
                for i in 0..m {
                    for j in 0..n {
                        dx.set(i, j, grad.get(0, j));
                    }
                }
                Self::accumulate(grads, *x, dx);
            }
            Op::SliceCols { x, start } => {
                let vx = &self.nodes[*x].value;
                let (m, n) = vx.dims2();
                let (_, len) = grad.dims2();
                let mut dx = Tensor::zeros(m, n);
                for i in 0..m {
                    for j in 0..len {
                        dx.set(i, start + j, grad.get(i, j));
                    }
                }
                Self::accumulate(grads, *x, dx);
            }
            Op::ConcatCols(parts) => {
                let m = grad.dims2().0;
                let mut offset = 0;
                for &p in parts {
                    let (_, w) = self.nodes[p].value.dims2();
                    let mut dp = Tensor::zeros(m, w);
                    for i in 0..m {
                        for j in 0..w {
                            dp.set(i, j, grad.get(i, offset + j));
                        }
                    }
                    offset += w;
                    Self::accumulate(grads, p, dp);
                }
            }
            Op::Embedding { table, ids } => {
                let vt = &self.nodes[*table].value;
                let (v, d) = vt.dims2();
                let mut dt = Tensor::zeros(v, d);
                for (i, &id) in ids.iter().enumerate() {
                    for j in 0..d {
                        let val = dt.get(id as usize, j) + grad.get(i, j);
                        dt.set(id as usize, j, val);
                    }
                }
                Self::accumulate(grads, *table, dt);
            }
            Op::LayerNorm { x, gain, bias, cache } => {
                let vx = &self.nodes[*x].value;
                let vg = &self.nodes[*gain].value;
                let (m, n) = vx.dims2();
                let inv_n = T::one() / T::from_count(n);
                let mut dx = Tensor::zeros(m, n);
                let mut dgain = Tensor::zeros(1, n);
                let mut dbias = Tensor::zeros(1, n);
                for i in 0..m {
                    let (mean, inv_std) = cache[i];
                    // dxhat and the two row means needed for dx.
                    let mut mean_dxhat = T::zero();
                    let mut mean_dxhat_xhat = T::zero();
                    let mut xhat_row = Vec::with_capacity(n);
                    let mut dxhat_row = Vec::with_capacity(n);
                    for j in 0..n {
                        let xhat = (vx.get(i, j) - mean) * inv_std;
                        let g = grad.get(i, j);
                        let dxhat = g * vg.get(0, j);
                        xhat_row.push(xhat);
                        dxhat_row.push(dxhat);
                        mean_dxhat += dxhat;
                        mean_dxhat_xhat += dxhat * xhat;
                        dgain.set(0, j, dgain.get(0, j) + g * xhat);
                        dbias.set(0, j, dbias.get(0, j) + g);
                    }
                    mean_dxhat *= inv_n;
                    mean_dxhat_xhat *= inv_n;
                    for j in 0..n {
                        let v = inv_std * (dxhat_row[j] - mean_dxhat - xhat_row[j] * mean_dxhat_xhat);
                        dx.set(i, j, v);
                    }
                }
                Self::accumulate(grads, *x, dx);
                Self::accumulate(grads, *gain, dgain);
                Self::accumulate(grads, *bias, dbias);
            }
            Op::SoftmaxRows { x, mask } => {
                let p = &self.nodes[idx].value;
                let (m, n) = p.dims2();
                let mut dx = Tensor::zeros(m, n);
                for i in 0..m {
                    let mut dot = T::zero();
                    for j in 0..n {
                        if mask.visible(i, j) {
                            dot += grad.get(i, j) * p.get(i, j);
                        }
                    }
                    for j in 0..n {
                        if mask.visible(i, j) {
                            dx.set(i, j, p.get(i, j) * (grad.get(i, j) - dot));
                        }
                    }
                }
                Self::accumulate(grads, *x, dx);
            }
            Op::Dropout { x, keep, inv_keep } => {
                let vx = &self.nodes[*x].value;
                let data: Vec<T> = grad
                    .data()
                    .iter()
                    .zip(keep)
                    .map(|(&g, &k)| if k { g * *inv_keep } else { T::zero() })
                    .collect();
                Self::accumulate(grads, *x, Tensor::new(vx.shape().to_vec(), data)?);
            }
            Op::CrossEntropy { logits, unit_grad } => {
                let upstream = grad.data()[0];
                Self::accumulate(grads, *logits, unit_grad.map(|g| g * upstream));
            }
            Op::MaskedMse { preds, unit_grad } => {
                let upstream = grad.data()[0];
                Self::accumulate(grads, *preds, unit_grad.map(|g| g * upstream));
            }
            Op::MaskedBceLogits { logits, unit_grad } => {
                let upstream = grad.data()[0];
                Self::accumulate(grads, *logits, unit_grad.map(|g| g * upstream));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(rows: Vec<Vec<f64>>) -> Tensor<f64> {
        Tensor::from_rows(rows).unwrap()
    }

    #[test]
    fn layer_norm_of_constant_row_is_bias() {
        let mut tape = Tape::new();
        let x = tape.input(t(vec![vec![3.0, 3.0, 3.0, 3.0]]));
        let gain = tape.input(Tensor::row(vec![2.0; 4]));
        let bias = tape.input(Tensor::row(vec![0.5; 4]));
        let y = tape.layer_norm(x, gain, bias, 1e-5).unwrap();
        for &v in tape.value(y).data() {
            assert!((v - 0.5).abs() < 1e-12, "constant row normalizes to bias");
        }
    }

    #[test]
    fn linear_identity_passthrough() {
        let mut tape = Tape::new();
        let x = tape.input(t(vec![vec![1.0, -2.0], vec![0.5, 4.0]]));
        let w = tape.input(t(vec![vec![1.0, 0.0], vec![0.0, 1.0]]));
        let b = tape.input(Tensor::row(vec![0.0, 0.0]));
        let xw = tape.matmul(x, w).unwrap();
        let y = tape.add_row(xw, b).unwrap();
        assert_eq!(tape.value(y), tape.value(x));
    }

    #[test]
    fn softmax_masks_are_exact() {
        let mut tape = Tape::new();
        let x = tape.input(t(vec![vec![5.0, 1.0, -3.0], vec![0.0, 0.0, 100.0]]));
        let p = tape
            .softmax_rows(x, AttnMask::KeyPadding { valid_len: 2 })
            .unwrap();
        let v = tape.value(p);
        assert_eq!(v.get(0, 2), 0.0);
        assert_eq!(v.get(1, 2), 0.0);
        for i in 0..2 {
            let sum = v.get(i, 0) + v.get(i, 1);
            assert!((sum - 1.0).abs() < 1e-12);
        }

        // Hidden columns also get exactly zero gradient.
        let s = tape.sum_rows(p);
        let total0 = tape.slice_cols(s, 0, 1).unwrap();
        let grads = tape.backward(total0).unwrap();
        let dx = grads.get(x).unwrap();
        assert_eq!(dx.get(0, 2), 0.0);
        assert_eq!(dx.get(1, 2), 0.0);
    }

    #[test]
    fn fully_masked_row_is_an_error() {
        let mut tape = Tape::<f64>::new();
        let x = tape.input(Tensor::zeros(2, 3));
        let err = tape
            .softmax_rows(x, AttnMask::KeyPadding { valid_len: 0 })
            .unwrap_err();
        assert!(matches!(err, NnError::FullyMaskedRow { row: 0 }));
    }

    #[test]
    fn cross_entropy_uniform_logits_is_ln_v() {
        let mut tape = Tape::new();
        let logits = tape.input(Tensor::<f64>::zeros(3, 7));
        let loss = tape.cross_entropy(logits, &[0, 3, 6], 128).unwrap();
        let expected = (7f64).ln();
        assert!((tape.value(loss).data()[0] - expected).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_all_ignored_is_zero_with_zero_grad() {
        let mut tape = Tape::new();
        let logits = tape.input(t(vec![vec![1.0, 2.0], vec![3.0, 4.0]]));
        let loss = tape.cross_entropy(logits, &[128, 128], 128).unwrap();
        assert_eq!(tape.value(loss).data()[0], 0.0);
        let grads = tape.backward(loss).unwrap();
        assert!(grads.get(logits).unwrap().data().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn cross_entropy_rejects_out_of_range_targets() {
        let mut tape = Tape::new();
        let logits = tape.input(Tensor::<f64>::zeros(1, 4));
        let err = tape.cross_entropy(logits, &[9], 128).unwrap_err();
        assert!(matches!(err, NnError::TokenOutOfVocab { id: 9, vocab: 4 }));
    }

    #[test]
    fn causal_mask_hides_the_future() {
        let mut tape = Tape::new();
        let x = tape.input(t(vec![vec![1.0, 9.0, 9.0], vec![1.0, 1.0, 9.0]]));
        let p = tape.softmax_rows(x, AttnMask::Causal).unwrap();
        let v = tape.value(p);
        assert_eq!(v.get(0, 0), 1.0);
        assert_eq!(v.get(0, 1), 0.0);
        assert_eq!(v.get(0, 2), 0.0);
        assert_eq!(v.get(1, 2), 0.0);
        assert!((v.get(1, 0) - 0.5).abs() < 1e-12);
    }
}
