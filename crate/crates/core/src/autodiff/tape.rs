use std::collections::HashMap;
use std::sync::Arc;

use super::adam::{ParamGrads, ParamId, ParamStore};
use super::{AdError, Result, Tensor};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

/// Fixed linear row map: `out[dst] += w · in[src]` for each entry.
///
/// Covers neighbourhood aggregation, segment sums and pooling. The
/// coefficients are constants; gradients flow only to the input rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMap {
    pub out_rows: usize,
    pub in_rows: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

impl SparseMap {
    pub fn new(out_rows: usize, in_rows: usize, entries: Vec<(usize, usize, f64)>) -> Result<Self> {
        if let Some(&(d, s, _)) = entries.iter().find(|&&(d, s, _)| d >= out_rows || s >= in_rows) {
            return Err(AdError::Shape(format!(
                "entry ({d}, {s}) outside a {out_rows} x {in_rows} map"
            )));
        }
        Ok(Self { out_rows, in_rows, entries })
    }

    /// `out[idx[i]] += in[i]`.
    pub fn scatter_sum(out_rows: usize, idx: &[usize]) -> Result<Self> {
        Self::new(out_rows, idx.len(), idx.iter().enumerate().map(|(i, &d)| (d, i, 1.0)).collect())
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    Param,
    MatMul(Var, Var),
    AddBias(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    OneMinus(Var),
    Scale(Var, f64),
    Relu(Var),
    Sigmoid(Var),
    Tanh(Var),
    Concat(Vec<Var>),
    Gather(Var, Arc<Vec<usize>>),
    SetRows { base: Var, update: Var, rows: Arc<Vec<usize>> },
    SpMM(Var, Arc<SparseMap>),
    SumSquares(Vec<Var>),
    MaskedMse { pred: Var, target: Vec<f64>, mask: Vec<bool>, count: usize },
}

#[derive(Debug)]
struct Entry {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

/// Recorded computation. One tape per worker; not shared across threads.
#[derive(Debug, Default)]
pub struct Tape {
    entries: Vec<Entry>,
    params: HashMap<ParamId, Var>,
}

/// `c = beta * c + op(a) * op(b)` where `op` optionally transposes.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_t: bool,
    b: &[f64],
    b_t: bool,
    beta: f64,
    c: &mut [f64],
) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        c.iter_mut().for_each(|x| *x *= beta);
        return;
    }
    let (rsa, csa) = if a_t { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_t { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: slice lengths are checked above against the stated dimensions
    // and strides, so every index dgemm touches is in bounds.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, needs_grad: bool) -> Var {
        self.entries.push(Entry { value, op, needs_grad });
        Var(self.entries.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.entries[v.0].needs_grad
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.entries[v.0].value
    }

    fn dims(&self, v: Var) -> (usize, usize) {
        self.entries[v.0].value.dims()
    }

    /// Input that receives no gradient.
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, false)
    }

    /// Input whose gradient is kept by [`Tape::backward`].
    pub fn variable(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, true)
    }

    /// Leaf for a stored parameter; repeated calls return the same leaf, so
    /// the value is read once per tape.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        if let Some(&v) = self.params.get(&id) {
            return v;
        }
        let v = self.push(store.value(id).clone(), Op::Param, true);
        self.params.insert(id, v);
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.dims(a);
        let (k2, n) = self.dims(b);
        if k != k2 {
            return Err(AdError::Shape(format!("matmul {m}x{k} by {k2}x{n}")));
        }
        let mut out = vec![0.0; m * n];
        gemm(m, k, n, self.value(a).data(), false, self.value(b).data(), false, 0.0, &mut out);
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(Tensor::matrix(m, n, out)?, Op::MatMul(a, b), needs))
    }

    /// Adds a bias row to every row of `a`.
    pub fn add_bias(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (m, n) = self.dims(a);
        if self.value(bias).len() != n {
            return Err(AdError::Shape(format!(
                "bias of length {} for {n} columns",
                self.value(bias).len()
            )));
        }
        let b = self.value(bias).data();
        let mut out = self.value(a).data().to_vec();
        for row in out.chunks_mut(n.max(1)) {
            row.iter_mut().zip(b).for_each(|(x, bb)| *x += bb);
        }
        let needs = self.needs(a) || self.needs(bias);
        Ok(self.push(Tensor::matrix(m, n, out)?, Op::AddBias(a, bias), needs))
    }

    fn zip_op(&mut self, a: Var, b: Var, f: fn(f64, f64) -> f64, op: Op) -> Result<Var> {
        if self.dims(a) != self.dims(b) {
            return Err(AdError::Shape(format!(
                "elementwise op on {:?} and {:?}",
                self.dims(a),
                self.dims(b)
            )));
        }
        let (m, n) = self.dims(a);
        let out = self.value(a).data().iter().zip(self.value(b).data()).map(|(&x, &y)| f(x, y)).collect();
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(Tensor::matrix(m, n, out)?, op, needs))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_op(a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_op(a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_op(a, b, |x, y| x * y, Op::Mul(a, b))
    }

    fn map_op(&mut self, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let (m, n) = self.dims(a);
        let out = self.value(a).data().iter().map(|&x| f(x)).collect();
        let needs = self.needs(a);
        self.push(Tensor::matrix(m, n, out).expect("same size"), op, needs)
    }

    pub fn one_minus(&mut self, a: Var) -> Var {
        self.map_op(a, |x| 1.0 - x, Op::OneMinus(a))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        self.map_op(a, |x| c * x, Op::Scale(a, c))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.map_op(a, |x| x.max(0.0), Op::Relu(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.map_op(a, sigmoid, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.map_op(a, f64::tanh, Op::Tanh(a))
    }

    /// Column-wise concatenation of matrices with equal row counts.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let Some(&first) = parts.first() else {
            return Err(AdError::Shape("concat of nothing".into()));
        };
        let m = self.dims(first).0;
        if let Some(&bad) = parts.iter().find(|&&p| self.dims(p).0 != m) {
            return Err(AdError::Shape(format!(
                "concat rows {m} vs {}",
                self.dims(bad).0
            )));
        }
        let n: usize = parts.iter().map(|&p| self.dims(p).1).sum();
        let mut out = Vec::with_capacity(m * n);
        for r in 0..m {
            for &p in parts {
                out.extend_from_slice(self.value(p).row(r));
            }
        }
        let needs = parts.iter().any(|&p| self.needs(p));
        Ok(self.push(Tensor::matrix(m, n, out)?, Op::Concat(parts.to_vec()), needs))
    }

    /// Rows of `a` at `rows`, in that order (repeats allowed).
    pub fn gather(&mut self, a: Var, rows: Arc<Vec<usize>>) -> Result<Var> {
        let (m, n) = self.dims(a);
        if let Some(&bad) = rows.iter().find(|&&r| r >= m) {
            return Err(AdError::Shape(format!("gather row {bad} of {m}")));
        }
        let src = self.value(a);
        let mut out = Vec::with_capacity(rows.len() * n);
        for &r in rows.iter() {
            out.extend_from_slice(src.row(r));
        }
        let needs = self.needs(a);
        Ok(self.push(Tensor::matrix(rows.len(), n, out)?, Op::Gather(a, rows), needs))
    }

    /// Copy of `base` with row `rows[i]` replaced by row `i` of `update`.
    /// Target rows must be distinct.
    pub fn set_rows(&mut self, base: Var, update: Var, rows: Arc<Vec<usize>>) -> Result<Var> {
        let (m, n) = self.dims(base);
        let (u, n2) = self.dims(update);
        if n != n2 || u != rows.len() || rows.iter().any(|&r| r >= m) {
            return Err(AdError::Shape(format!(
                "set_rows of {u}x{n2} into {m}x{n} at {} rows",
                rows.len()
            )));
        }
        let mut out = self.value(base).data().to_vec();
        for (i, &r) in rows.iter().enumerate() {
            out[r * n..(r + 1) * n].copy_from_slice(self.value(update).row(i));
        }
        let needs = self.needs(base) || self.needs(update);
        Ok(self.push(Tensor::matrix(m, n, out)?, Op::SetRows { base, update, rows }, needs))
    }

    pub fn spmm(&mut self, a: Var, map: Arc<SparseMap>) -> Result<Var> {
        let (m, n) = self.dims(a);
        if m != map.in_rows {
            return Err(AdError::Shape(format!("sparse map over {} rows applied to {m}", map.in_rows)));
        }
        let src = self.value(a).data();
        let mut out = vec![0.0; map.out_rows * n];
        for &(d, s, w) in &map.entries {
            let (dst, srow) = (&mut out[d * n..(d + 1) * n], &src[s * n..(s + 1) * n]);
            dst.iter_mut().zip(srow).for_each(|(o, x)| *o += w * x);
        }
        let needs = self.needs(a);
        Ok(self.push(Tensor::matrix(map.out_rows, n, out)?, Op::SpMM(a, map), needs))
    }

    /// Scalar `Σ‖x‖²` over all given tensors.
    pub fn sum_squares(&mut self, parts: &[Var]) -> Var {
        let total: f64 =
            parts.iter().map(|&p| self.value(p).data().iter().map(|x| x * x).sum::<f64>()).sum();
        let needs = parts.iter().any(|&p| self.needs(p));
        self.push(Tensor::scalar(total), Op::SumSquares(parts.to_vec()), needs)
    }

    /// Scalar mean of `(pred - target)²` over entries where `mask` is set.
    pub fn masked_mse(&mut self, pred: Var, target: &[f64], mask: &[bool]) -> Result<Var> {
        let p = self.value(pred).data();
        if p.len() != target.len() || p.len() != mask.len() {
            return Err(AdError::Shape(format!(
                "prediction of {} values, {} targets, {} mask entries",
                p.len(),
                target.len(),
                mask.len()
            )));
        }
        let count = mask.iter().filter(|&&m| m).count();
        if count == 0 {
            return Err(AdError::InvalidArgument("no valid targets".into()));
        }
        let sse: f64 = p
            .iter()
            .zip(target)
            .zip(mask)
            .filter(|(_, &m)| m)
            .map(|((&x, &t), _)| (x - t) * (x - t))
            .sum();
        let needs = self.needs(pred);
        let op = Op::MaskedMse { pred, target: target.to_vec(), mask: mask.to_vec(), count };
        Ok(self.push(Tensor::scalar(sse / count as f64), op, needs))
    }

    /// Reverse pass from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Gradients {
        assert_eq!(self.value(loss).len(), 1, "backward needs a scalar loss");
        let mut grads: Vec<Option<Vec<f64>>> = Vec::with_capacity(self.entries.len());
        grads.resize_with(self.entries.len(), || None);
        grads[loss.0] = Some(vec![1.0]);
        for i in (0..=loss.0).rev() {
            let entry = &self.entries[i];
            if !entry.needs_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.backprop(entry, &g, &mut grads);
            grads[i] = Some(g);
        }
        Gradients { grads, params: self.params.clone() }
    }

    fn accumulate(&self, grads: &mut [Option<Vec<f64>>], v: Var, f: impl FnOnce(&mut [f64])) {
        if !self.needs(v) {
            return;
        }
        let len = self.value(v).len();
        let slot = grads[v.0].get_or_insert_with(|| vec![0.0; len]);
        f(slot);
    }

    fn backprop(&self, entry: &Entry, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let out = entry.value.data();
        match &entry.op {
            Op::Leaf | Op::Param => {}
            Op::MatMul(a, b) => {
                let (m, k) = self.dims(*a);
                let n = self.dims(*b).1;
                let (av, bv) = (self.value(*a).data(), self.value(*b).data());
                // dA = dC · Bᵀ, dB = Aᵀ · dC
                self.accumulate(grads, *a, |ga| gemm(m, n, k, g, false, bv, true, 1.0, ga));
                self.accumulate(grads, *b, |gb| gemm(k, m, n, av, true, g, false, 1.0, gb));
            }
            Op::AddBias(a, bias) => {
                let n = self.dims(*a).1;
                self.accumulate(grads, *a, |ga| ga.iter_mut().zip(g).for_each(|(x, y)| *x += y));
                self.accumulate(grads, *bias, |gb| {
                    for row in g.chunks(n.max(1)) {
                        gb.iter_mut().zip(row).for_each(|(x, y)| *x += y);
                    }
                });
            }
            Op::Add(a, b) => {
                self.accumulate(grads, *a, |ga| ga.iter_mut().zip(g).for_each(|(x, y)| *x += y));
                self.accumulate(grads, *b, |gb| gb.iter_mut().zip(g).for_each(|(x, y)| *x += y));
            }
            Op::Sub(a, b) => {
                self.accumulate(grads, *a, |ga| ga.iter_mut().zip(g).for_each(|(x, y)| *x += y));
                self.accumulate(grads, *b, |gb| gb.iter_mut().zip(g).for_each(|(x, y)| *x -= y));
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a).data(), self.value(*b).data());
                self.accumulate(grads, *a, |ga| {
                    for ((x, y), w) in ga.iter_mut().zip(g).zip(bv) {
                        *x += y * w;
                    }
                });
                self.accumulate(grads, *b, |gb| {
                    for ((x, y), w) in gb.iter_mut().zip(g).zip(av) {
                        *x += y * w;
                    }
                });
            }
            Op::OneMinus(a) => {
                self.accumulate(grads, *a, |ga| ga.iter_mut().zip(g).for_each(|(x, y)| *x -= y));
            }
            Op::Scale(a, c) => {
                self.accumulate(grads, *a, |ga| ga.iter_mut().zip(g).for_each(|(x, y)| *x += c * y));
            }
            Op::Relu(a) => {
                self.accumulate(grads, *a, |ga| {
                    for ((x, y), o) in ga.iter_mut().zip(g).zip(out) {
                        if *o > 0.0 {
                            *x += y;
                        }
                    }
                });
            }
            Op::Sigmoid(a) => {
                self.accumulate(grads, *a, |ga| {
                    for ((x, y), s) in ga.iter_mut().zip(g).zip(out) {
                        *x += y * s * (1.0 - s);
                    }
                });
            }
            Op::Tanh(a) => {
                self.accumulate(grads, *a, |ga| {
                    for ((x, y), t) in ga.iter_mut().zip(g).zip(out) {
                        *x += y * (1.0 - t * t);
                    }
                });
            }
            Op::Concat(parts) => {
                let (m, n) = entry.value.dims();
                let mut offset = 0;
                for &p in parts {
                    let w = self.dims(p).1;
                    self.accumulate(grads, p, |gp| {
                        for r in 0..m {
                            let src = &g[r * n + offset..r * n + offset + w];
                            gp[r * w..(r + 1) * w].iter_mut().zip(src).for_each(|(x, y)| *x += y);
                        }
                    });
                    offset += w;
                }
            }
            Op::Gather(a, rows) => {
                let n = self.dims(*a).1;
                self.accumulate(grads, *a, |ga| {
                    for (i, &r) in rows.iter().enumerate() {
                        let src = &g[i * n..(i + 1) * n];
                        ga[r * n..(r + 1) * n].iter_mut().zip(src).for_each(|(x, y)| *x += y);
                    }
                });
            }
            Op::SetRows { base, update, rows } => {
                let n = self.dims(*base).1;
                self.accumulate(grads, *base, |gb| {
                    gb.iter_mut().zip(g).for_each(|(x, y)| *x += y);
                    for &r in rows.iter() {
                        // Overwritten rows do not reach the base; undo their share.
                        let src = &g[r * n..(r + 1) * n];
                        gb[r * n..(r + 1) * n].iter_mut().zip(src).for_each(|(x, y)| *x -= y);
                    }
                });
                self.accumulate(grads, *update, |gu| {
                    for (i, &r) in rows.iter().enumerate() {
                        let src = &g[r * n..(r + 1) * n];
                        gu[i * n..(i + 1) * n].iter_mut().zip(src).for_each(|(x, y)| *x += y);
                    }
                });
            }
            Op::SpMM(a, map) => {
                let n = self.dims(*a).1;
                self.accumulate(grads, *a, |ga| {
                    for &(d, s, w) in &map.entries {
                        let src = &g[d * n..(d + 1) * n];
                        ga[s * n..(s + 1) * n].iter_mut().zip(src).for_each(|(x, y)| *x += w * y);
                    }
                });
            }
            Op::SumSquares(parts) => {
                let scale = 2.0 * g[0];
                for &p in parts {
                    let pv = self.value(p).data();
                    self.accumulate(grads, p, |gp| {
                        gp.iter_mut().zip(pv).for_each(|(x, v)| *x += scale * v);
                    });
                }
            }
            Op::MaskedMse { pred, target, mask, count } => {
                let scale = 2.0 * g[0] / *count as f64;
                let pv = self.value(*pred).data();
                self.accumulate(grads, *pred, |gp| {
                    for (i, x) in gp.iter_mut().enumerate() {
                        if mask[i] {
                            *x += scale * (pv[i] - target[i]);
                        }
                    }
                });
            }
        }
    }
}

/// Result of a reverse pass.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
    params: HashMap<ParamId, Var>,
}

impl Gradients {
    /// Gradient with respect to `v`, if `v` took part in the loss.
    pub fn of(&self, v: Var) -> Option<&[f64]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    /// Gradients for every parameter of `store`; unused parameters get zeros.
    pub fn params(&self, store: &ParamStore) -> ParamGrads {
        let grads = store
            .ids()
            .map(|id| match self.params.get(&id).and_then(|&v| self.of(v)) {
                Some(g) => g.to_vec(),
                None => vec![0.0; store.value(id).len()],
            })
            .collect();
        ParamGrads::new(grads)
    }
}
