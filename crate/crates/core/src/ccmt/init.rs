use crate::error::Result;
use crate::numerics::{ParamStore, Tensor};
use crate::tokenstore::Rng;

/// Parameter initializer drawing from a single seeded stream in creation order.
pub struct Initializer<'a> {
    pub rng: &'a mut Rng,
    pub store: ParamStore<f32>,
}

impl<'a> Initializer<'a> {
    pub fn new(rng: &'a mut Rng) -> Self {
        Self {
            rng,
            store: ParamStore::new(),
        }
    }

    fn normal(&mut self, name: &str, shape: &[usize], std: f64) -> Result<()> {
        let numel: usize = shape.iter().product();
        let data = (0..numel)
            .map(|_| (self.rng.normal() * std) as f32)
            .collect();
        self.store.insert(name, Tensor::new(shape.to_vec(), data)?)
    }

    /// `fan_in x fan_out` weight with variance `2 / (fan_in + fan_out)`.
    pub fn weight(&mut self, name: &str, fan_in: usize, fan_out: usize) -> Result<()> {
        let std = (2.0 / (fan_in + fan_out) as f64).sqrt();
        self.normal(name, &[fan_in, fan_out], std)
    }

    pub fn small(&mut self, name: &str, shape: &[usize]) -> Result<()> {
        self.normal(name, shape, 0.02)
    }

    pub fn zeros(&mut self, name: &str, n: usize) -> Result<()> {
        self.store.insert(name, Tensor::zeros(&[n]))
    }

    pub fn ones(&mut self, name: &str, n: usize) -> Result<()> {
        self.store.insert(name, Tensor::filled(&[n], 1.0))
    }

    pub fn finish(self) -> ParamStore<f32> {
        self.store
    }
}
