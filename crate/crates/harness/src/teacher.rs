//! Sparse one-hidden-layer teacher networks and Gaussian samples labeled by them.

use steepest_core::{Dataset, Matrix, Model, ModelSpec, Params, Rng};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TeacherSpec {
    pub d: usize,
    pub k: usize,
    pub active_per_neuron: usize,
    pub weight_scale: f64,
    pub seed: u64,
}

impl Default for TeacherSpec {
    fn default() -> Self {
        Self {
            d: 16,
            k: 4,
            active_per_neuron: 3,
            weight_scale: 1.0,
            seed: 0,
        }
    }
}

impl TeacherSpec {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.k == 0 || self.active_per_neuron == 0 {
            return Err(HarnessError::Config("teacher d, k and active_per_neuron must be positive".into()));
        }
        if self.active_per_neuron > self.d {
            return Err(HarnessError::Config(format!(
                "active_per_neuron {} exceeds d {}",
                self.active_per_neuron, self.d
            )));
        }
        if !(self.weight_scale > 0.0 && self.weight_scale.is_finite()) {
            return Err(HarnessError::Config("teacher weight_scale must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Teacher {
    pub spec: TeacherSpec,
    pub model: Model<f64>,
    /// `[W* (k x d), u* (k x 1)]`.
    pub theta: Params<f64>,
}

impl Teacher {
    pub fn output(&self, x: &[f64]) -> Result<f64> {
        Ok(self.model.forward(&self.theta, x)?)
    }
}

fn nonzero_uniform(rng: &mut Rng, scale: f64) -> f64 {
    loop {
        let v = rng.uniform_range(-scale, scale);
        if v != 0.0 {
            return v;
        }
    }
}

/// Draw a teacher: for each neuron pick `active_per_neuron` input coordinates
/// without replacement and give them nonzero weights in `[-s, s]`; then draw
/// the output weights the same way.
pub fn gen_teacher(spec: &TeacherSpec) -> Result<Teacher> {
    spec.validate()?;
    let mut rng = Rng::new(spec.seed);
    let mut w = Matrix::zeros(spec.k, spec.d);
    for j in 0..spec.k {
        for col in rng.choose_distinct(spec.d, spec.active_per_neuron) {
            w[(j, col)] = nonzero_uniform(&mut rng, spec.weight_scale);
        }
    }
    let u: Vec<f64> = (0..spec.k)
        .map(|_| nonzero_uniform(&mut rng, spec.weight_scale))
        .collect();
    let model = Model::new(ModelSpec::TwoLayerRelu {
        input_dim: spec.d,
        width: spec.k,
        freeze_second_layer: false,
    })?;
    Ok(Teacher {
        spec: *spec,
        model,
        theta: Params::new(vec![w, Matrix::column(u)]),
    })
}

/// `m` standard Gaussian inputs labeled by the sign of the teacher. Inputs
/// on which the teacher outputs exactly zero are redrawn.
pub fn sample_dataset(teacher: &Teacher, m: usize, seed: u64) -> Result<Dataset<f64>> {
    if m == 0 {
        return Err(steepest_core::Error::EmptyData.into());
    }
    let d = teacher.spec.d;
    let mut rng = Rng::new(seed);
    let mut xs = Vec::with_capacity(m * d);
    let mut ys = Vec::with_capacity(m);
    let mut x = vec![0.0; d];
    for _ in 0..m {
        let f = loop {
            x.iter_mut().for_each(|v| *v = rng.gaussian());
            let f = teacher.output(&x)?;
            if f != 0.0 {
                break f;
            }
        };
        xs.extend_from_slice(&x);
        ys.push(if f > 0.0 { 1.0 } else { -1.0 });
    }
    let s = &teacher.spec;
    let meta = format!(
        "teacher d={} k={} active={} scale={} seed={}; sample m={} seed={}",
        s.d, s.k, s.active_per_neuron, s.weight_scale, s.seed, m, seed
    );
    Ok(Dataset::new(Matrix::from_vec(m, d, xs), ys, meta)?)
}
