use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{AdError, Result, Tensor};
use crate::seed;

/// Index of a parameter inside its [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lr > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.eps >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(AdError::InvalidArgument(format!("bad Adam settings {self:?}")))
        }
    }
}

/// One gradient buffer per parameter, in store order.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrads {
    grads: Vec<Vec<f64>>,
}

impl ParamGrads {
    pub fn new(grads: Vec<Vec<f64>>) -> Self {
        Self { grads }
    }

    pub fn zeros_like(store: &ParamStore) -> Self {
        Self { grads: store.values.iter().map(|t| vec![0.0; t.len()]).collect() }
    }

    pub fn get(&self, id: ParamId) -> &[f64] {
        &self.grads[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut [f64] {
        &mut self.grads[id.0]
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }

    /// Elementwise `self += other`, used for fixed-order reductions.
    pub fn add_assign(&mut self, other: &ParamGrads) {
        for (a, b) in self.grads.iter_mut().zip(&other.grads) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }

    pub fn scale(&mut self, c: f64) {
        self.grads.iter_mut().flatten().for_each(|x| *x *= c);
    }

    pub fn max_abs(&self) -> f64 {
        self.grads.iter().flatten().fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// Named trainable tensors with Adam moment buffers.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamStore {
    pub(crate) names: Vec<String>,
    pub(crate) values: Vec<Tensor>,
    pub(crate) m: Vec<Vec<f64>>,
    pub(crate) v: Vec<Vec<f64>>,
    pub(crate) step: u64,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a tensor under a unique name.
    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> Result<ParamId> {
        let name = name.into();
        if self.names.contains(&name) {
            return Err(AdError::InvalidArgument(format!("duplicate parameter {name}")));
        }
        let n = value.len();
        self.names.push(name);
        self.values.push(value);
        self.m.push(vec![0.0; n]);
        self.v.push(vec![0.0; n]);
        Ok(ParamId(self.values.len() - 1))
    }

    /// Weight matrix drawn uniformly from ±sqrt(6 / (fan_in + fan_out)).
    pub fn add_glorot(
        &mut self,
        name: impl Into<String>,
        fan_in: usize,
        fan_out: usize,
        rng: &mut seed::Rng,
    ) -> Result<ParamId> {
        let limit = (6.0 / (fan_in + fan_out).max(1) as f64).sqrt();
        let data = (0..fan_in * fan_out).map(|_| rng.gen_range(-limit..=limit)).collect();
        self.add(name, Tensor::matrix(fan_in, fan_out, data)?)
    }

    pub fn add_zeros(&mut self, name: impl Into<String>, len: usize) -> Result<ParamId> {
        self.add(name, Tensor::vector(vec![0.0; len]))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.values[id.0]
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.values[id.0]
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    /// Total number of scalar parameters.
    pub fn num_scalars(&self) -> usize {
        self.values.iter().map(Tensor::len).sum()
    }

    /// One bias-corrected Adam update.
    pub fn adam_step(&mut self, grads: &ParamGrads, cfg: &AdamConfig) -> Result<()> {
        cfg.validate()?;
        if grads.len() != self.values.len() {
            return Err(AdError::Shape(format!(
                "{} gradient buffers for {} parameters",
                grads.len(),
                self.values.len()
            )));
        }
        for (i, g) in grads.grads.iter().enumerate() {
            if g.len() != self.values[i].len() {
                return Err(AdError::Shape(format!("gradient size for {}", self.names[i])));
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - cfg.beta1.powi(t);
        let c2 = 1.0 - cfg.beta2.powi(t);
        for (i, g) in grads.grads.iter().enumerate() {
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            let w = self.values[i].data_mut();
            for j in 0..g.len() {
                m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g[j];
                v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g[j] * g[j];
                let mh = m[j] / c1;
                let vh = v[j] / c2;
                w[j] -= cfg.lr * mh / (vh.sqrt() + cfg.eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut s = ParamStore::new();
        let id = s.add("w", Tensor::vector(vec![1.0, -2.0])).unwrap();
        s.adam_step(&ParamGrads::zeros_like(&s), &AdamConfig::default()).unwrap();
        assert_eq!(s.value(id).data(), &[1.0, -2.0]);
        assert_eq!(s.step(), 1);
    }

    #[test]
    fn first_step_closed_form() {
        let cfg = AdamConfig { lr: 0.01, eps: 1e-8, ..Default::default() };
        let mut s = ParamStore::new();
        let id = s.add("w", Tensor::vector(vec![0.0, 0.0])).unwrap();
        let g = [0.3, -2.0];
        s.adam_step(&ParamGrads::new(vec![g.to_vec()]), &cfg).unwrap();
        for (w, g) in s.value(id).data().iter().zip(g) {
            let expected = -cfg.lr * g / (g.abs() + cfg.eps);
            assert!((w - expected).abs() < 1e-15);
            assert!(w * g < 0.0);
        }
    }

    #[test]
    fn convex_quadratic_descends() {
        // f(w) = Σ a_i (w_i - c_i)²
        let a = [1.0, 4.0, 0.5];
        let c = [2.0, -1.0, 0.3];
        let loss = |w: &[f64]| w.iter().zip(a).zip(c).map(|((w, a), c)| a * (w - c) * (w - c)).sum::<f64>();
        let cfg = AdamConfig { lr: 0.01, ..Default::default() };
        let mut s = ParamStore::new();
        let id = s.add("w", Tensor::vector(vec![0.0; 3])).unwrap();
        let mut trace = Vec::new();
        for _ in 0..100 {
            let w = s.value(id).data().to_vec();
            trace.push(loss(&w));
            let g = w.iter().zip(a).zip(c).map(|((w, a), c)| 2.0 * a * (w - c)).collect();
            s.adam_step(&ParamGrads::new(vec![g]), &cfg).unwrap();
        }
        assert!(trace[5..].windows(2).all(|p| p[1] < p[0]), "{trace:?}");
    }

    #[test]
    fn glorot_bounds_and_seeding() {
        let mut r1 = seed::rng(3);
        let mut r2 = seed::rng(3);
        let mut a = ParamStore::new();
        let mut b = ParamStore::new();
        let ia = a.add_glorot("w", 10, 6, &mut r1).unwrap();
        b.add_glorot("w", 10, 6, &mut r2).unwrap();
        assert_eq!(a, b);
        let lim = (6.0f64 / 16.0).sqrt();
        assert!(a.value(ia).data().iter().all(|x| x.abs() <= lim));
        assert_eq!(a.value(ia).shape(), &[10, 6]);
    }

    #[test]
    fn rejects_bad_config_and_duplicates() {
        let mut s = ParamStore::new();
        s.add_zeros("b", 2).unwrap();
        assert!(s.add_zeros("b", 2).is_err());
        let cfg = AdamConfig { beta1: 1.0, ..Default::default() };
        assert!(s.adam_step(&ParamGrads::zeros_like(&s), &cfg).is_err());
    }
}
