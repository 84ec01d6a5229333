//! Homogeneous classifiers: a linear model and a bias-free two-layer ReLU
//! network, with forward evaluation and a fixed Clarke subgradient selection.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::params::Params;
use crate::rng::Rng;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelSpec {
    /// `f(x; θ) = <θ, x>`, `θ ∈ R^d` stored as one `d x 1` block.
    Linear { input_dim: usize },
    /// `f(x; W, u) = Σ_j u_j relu(<w_j, x>)`.
    ///
    /// Blocks are `W` (`width x input_dim`) then `u` (`width x 1`). With a
    /// frozen second layer `u` lives in the [`Model`] and the parameters
    /// consist of `W` alone.
    TwoLayerRelu {
        input_dim: usize,
        width: usize,
        freeze_second_layer: bool,
    },
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ModelSpec::Linear { input_dim: 0 } => {
                Err(Error::InvalidModel("input_dim must be positive".into()))
            }
            ModelSpec::TwoLayerRelu {
                input_dim, width, ..
            } if input_dim == 0 || width == 0 => Err(Error::InvalidModel(
                "input_dim and width must be positive".into(),
            )),
            _ => Ok(()),
        }
    }

    pub fn input_dim(&self) -> usize {
        match *self {
            ModelSpec::Linear { input_dim } | ModelSpec::TwoLayerRelu { input_dim, .. } => input_dim,
        }
    }

    /// Homogeneity degree `L` in the trainable parameters.
    pub fn degree(&self) -> u32 {
        match *self {
            ModelSpec::Linear { .. } => 1,
            ModelSpec::TwoLayerRelu {
                freeze_second_layer, ..
            } => {
                if freeze_second_layer {
                    1
                } else {
                    2
                }
            }
        }
    }

    /// Shapes of the trainable blocks.
    pub fn param_shapes(&self) -> Vec<(usize, usize)> {
        match *self {
            ModelSpec::Linear { input_dim } => vec![(input_dim, 1)],
            ModelSpec::TwoLayerRelu {
                input_dim,
                width,
                freeze_second_layer,
            } => {
                if freeze_second_layer {
                    vec![(width, input_dim)]
                } else {
                    vec![(width, input_dim), (width, 1)]
                }
            }
        }
    }

    pub fn is_frozen(&self) -> bool {
        matches!(
            self,
            ModelSpec::TwoLayerRelu {
                freeze_second_layer: true,
                ..
            }
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InitScheme {
    /// `w_jl ~ U[-α/d, α/d]`, `u_j ~ U[-α/k', α/k']`.
    PaperUniform,
    /// `w_jl, u_j ~ U[-α/k', α/k']`, keeping all coordinates on one scale.
    CoordinateUniform,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitSpec {
    pub scale: f64,
    pub scheme: InitScheme,
    pub seed: u64,
}

/// A model specification plus any frozen (non-trainable) weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Model<S> {
    spec: ModelSpec,
    frozen_head: Option<Vec<S>>,
}

impl<S: Scalar> Model<S> {
    /// A model without frozen weights. Frozen-head specs need [`Model::with_head`].
    pub fn new(spec: ModelSpec) -> Result<Self> {
        spec.validate()?;
        if spec.is_frozen() {
            return Err(Error::InvalidModel(
                "frozen second layer requires output weights".into(),
            ));
        }
        Ok(Self {
            spec,
            frozen_head: None,
        })
    }

    pub fn with_head(spec: ModelSpec, head: Vec<S>) -> Result<Self> {
        spec.validate()?;
        match spec {
            ModelSpec::TwoLayerRelu {
                width,
                freeze_second_layer: true,
                ..
            } if head.len() == width => Ok(Self {
                spec,
                frozen_head: Some(head),
            }),
            _ => Err(Error::InvalidModel(
                "frozen head only applies to a frozen two-layer network of matching width".into(),
            )),
        }
    }

    #[inline]
    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn frozen_head(&self) -> Option<&[S]> {
        self.frozen_head.as_deref()
    }

    #[inline]
    pub fn degree(&self) -> u32 {
        self.spec.degree()
    }

    fn check(&self, theta: &Params<S>, x: &[S]) -> Result<()> {
        theta.check_shapes(&self.spec.param_shapes())?;
        let d = self.spec.input_dim();
        if x.len() != d {
            return Err(Error::ShapeMismatch {
                block: 0,
                expected: (d, 1),
                found: (x.len(), 1),
            });
        }
        Ok(())
    }

    fn head<'a>(&'a self, theta: &'a Params<S>) -> &'a [S] {
        match &self.frozen_head {
            Some(h) => h,
            None => theta.block(1).as_slice(),
        }
    }

    /// `f(x; θ)`.
    pub fn forward(&self, theta: &Params<S>, x: &[S]) -> Result<S> {
        self.check(theta, x)?;
        Ok(self.forward_unchecked(theta, x))
    }

    fn forward_unchecked(&self, theta: &Params<S>, x: &[S]) -> S {
        match self.spec {
            ModelSpec::Linear { .. } => dot(theta.block(0).as_slice(), x),
            ModelSpec::TwoLayerRelu { width, .. } => {
                let w = theta.block(0);
                let u = self.head(theta);
                (0..width)
                    .map(|j| u[j] * relu(dot(w.row(j), x)))
                    .fold(S::zero(), |a, b| a + b)
            }
        }
    }

    /// One element of the Clarke subdifferential `∂_θ f(x; θ)`, selecting
    /// `relu'(0) = 0`.
    pub fn subgradient(&self, theta: &Params<S>, x: &[S]) -> Result<Params<S>> {
        self.check(theta, x)?;
        let mut out = theta.zeros_like();
        self.accumulate_subgradient(theta, x, S::one(), &mut out);
        Ok(out)
    }

    /// `out += weight * h(x; θ)` for the fixed selection `h`. Shapes are
    /// assumed checked by the caller.
    pub(crate) fn accumulate_subgradient(
        &self,
        theta: &Params<S>,
        x: &[S],
        weight: S,
        out: &mut Params<S>,
    ) {
        match self.spec {
            ModelSpec::Linear { .. } => {
                for (o, &xi) in out.block_mut(0).as_mut_slice().iter_mut().zip(x) {
                    *o = *o + weight * xi;
                }
            }
            ModelSpec::TwoLayerRelu {
                width,
                freeze_second_layer,
                ..
            } => {
                let w = theta.block(0);
                let u = self.head(theta);
                for (j, &uj) in u.iter().enumerate().take(width) {
                    let z = dot(w.row(j), x);
                    if z > S::zero() {
                        let scale = weight * uj;
                        for (o, &xi) in out.block_mut(0).row_mut(j).iter_mut().zip(x) {
                            *o = *o + scale * xi;
                        }
                        if !freeze_second_layer {
                            let du = &mut out.block_mut(1).as_mut_slice()[j];
                            *du = *du + weight * z;
                        }
                    }
                }
            }
        }
    }

    /// `|<θ, h> − L f(x; θ)|` for the selected subgradient `h`.
    pub fn euler_residual(&self, theta: &Params<S>, x: &[S]) -> Result<S> {
        let f = self.forward(theta, x)?;
        let h = self.subgradient(theta, x)?;
        let l = S::from_u32(self.degree()).expect("small degree");
        Ok((theta.dot(&h)? - l * f).abs())
    }

    fn check_data(&self, theta: &Params<S>, data: &Dataset<S>) -> Result<()> {
        theta.check_shapes(&self.spec.param_shapes())?;
        if data.is_empty() {
            return Err(Error::EmptyData);
        }
        if data.dim() != self.spec.input_dim() {
            return Err(Error::ShapeMismatch {
                block: 0,
                expected: (data.len(), self.spec.input_dim()),
                found: data.x.shape(),
            });
        }
        Ok(())
    }

    /// Output margins `q_i = y_i f(x_i; θ)` in example order.
    pub fn output_margins(&self, theta: &Params<S>, data: &Dataset<S>) -> Result<Vec<S>> {
        self.check_data(theta, data)?;
        Ok((0..data.len())
            .map(|i| {
                let (x, y) = data.example(i);
                y * self.forward_unchecked(theta, x)
            })
            .collect())
    }

    /// `Σ_i c_i h(x_i; θ)` summed in example order.
    pub fn weighted_subgradient_sum(
        &self,
        theta: &Params<S>,
        data: &Dataset<S>,
        coeffs: &[S],
    ) -> Result<Params<S>> {
        self.check_data(theta, data)?;
        let mut out = theta.zeros_like();
        for (i, &c) in coeffs.iter().enumerate().take(data.len()) {
            if c != S::zero() {
                self.accumulate_subgradient(theta, data.x.row(i), c, &mut out);
            }
        }
        Ok(out)
    }
}

#[inline]
fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| x * y)
        .fold(S::zero(), |acc, v| acc + v)
}

#[inline]
fn relu<S: Scalar>(z: S) -> S {
    if z > S::zero() {
        z
    } else {
        S::zero()
    }
}

/// Deterministic initialization. Coordinates are drawn `W` row-major first,
/// then the second layer, from a stream seeded with `init.seed`.
pub fn init_params<S: Scalar>(spec: &ModelSpec, init: &InitSpec) -> Result<(Model<S>, Params<S>)> {
    spec.validate()?;
    if !(init.scale > 0.0 && init.scale.is_finite()) {
        return Err(Error::InvalidModel("initialization scale must be positive".into()));
    }
    let mut rng = Rng::new(init.seed);
    let a = init.scale;
    let mut draw = |n: usize, half_width: f64| -> Vec<S> {
        (0..n)
            .map(|_| S::lit(rng.uniform_range(-half_width, half_width)))
            .collect()
    };
    match *spec {
        ModelSpec::Linear { input_dim } => {
            let theta = Params::from_vector(draw(input_dim, a / input_dim as f64));
            Ok((Model::new(*spec)?, theta))
        }
        ModelSpec::TwoLayerRelu {
            input_dim,
            width,
            freeze_second_layer,
        } => {
            let w_range = match init.scheme {
                InitScheme::PaperUniform => a / input_dim as f64,
                InitScheme::CoordinateUniform => a / width as f64,
            };
            let w = Matrix::from_vec(width, input_dim, draw(width * input_dim, w_range));
            let u = draw(width, a / width as f64);
            if freeze_second_layer {
                Ok((Model::with_head(*spec, u)?, Params::new(vec![w])))
            } else {
                Ok((Model::new(*spec)?, Params::new(vec![w, Matrix::column(u)])))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_neuron(w: [f64; 2], u: f64) -> (Model<f64>, Params<f64>) {
        let spec = ModelSpec::TwoLayerRelu {
            input_dim: 2,
            width: 1,
            freeze_second_layer: false,
        };
        let theta = Params::new(vec![
            Matrix::from_vec(1, 2, w.to_vec()),
            Matrix::column(vec![u]),
        ]);
        (Model::new(spec).unwrap(), theta)
    }

    #[test]
    fn forward_examples() {
        let (m, th) = single_neuron([1.0, 0.0], 1.0);
        assert_eq!(m.forward(&th, &[2.0, 3.0]).unwrap(), 2.0);
        assert_eq!(m.forward(&th.scaled(2.0), &[2.0, 3.0]).unwrap(), 8.0);

        let lin = Model::new(ModelSpec::Linear { input_dim: 2 }).unwrap();
        let th = Params::from_vector(vec![1.0, -1.0]);
        assert_eq!(lin.forward(&th, &[3.0, 1.0]).unwrap(), 2.0);
    }

    #[test]
    fn subgradient_examples() {
        let (m, th) = single_neuron([1.0, 0.0], 1.0);
        let h = m.subgradient(&th, &[2.0, 3.0]).unwrap();
        assert_eq!(h.to_flat(), vec![2.0, 3.0, 2.0]);
        let (m, th) = single_neuron([-1.0, 0.0], 1.0);
        let h = m.subgradient(&th, &[2.0, 3.0]).unwrap();
        assert_eq!(h.to_flat(), vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn kink_selects_zero() {
        let (m, th) = single_neuron([0.0, 0.0], 1.0);
        let h = m.subgradient(&th, &[2.0, 3.0]).unwrap();
        assert!(h.is_zero());
    }

    #[test]
    fn euler_examples() {
        let (m, th) = single_neuron([1.0, 0.0], 1.0);
        assert_eq!(m.euler_residual(&th, &[2.0, 3.0]).unwrap(), 0.0);
        assert_eq!(m.euler_residual(&th.zeros_like(), &[2.0, 3.0]).unwrap(), 0.0);
    }

    #[test]
    fn shape_errors() {
        let (m, th) = single_neuron([1.0, 0.0], 1.0);
        assert!(matches!(m.forward(&th, &[1.0]), Err(Error::ShapeMismatch { .. })));
        let bad = Params::from_vector(vec![1.0, 2.0]);
        assert!(m.forward(&bad, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn frozen_model_needs_head() {
        let spec = ModelSpec::TwoLayerRelu {
            input_dim: 2,
            width: 3,
            freeze_second_layer: true,
        };
        assert!(Model::<f64>::new(spec).is_err());
        assert!(Model::with_head(spec, vec![1.0; 2]).is_err());
        let m = Model::with_head(spec, vec![1.0, -1.0, 0.5]).unwrap();
        assert_eq!(m.degree(), 1);
    }

    #[test]
    fn init_ranges_follow_scheme() {
        let spec = ModelSpec::TwoLayerRelu {
            input_dim: 32,
            width: 1024,
            freeze_second_layer: false,
        };
        let paper = InitSpec {
            scale: 0.01,
            scheme: InitScheme::PaperUniform,
            seed: 5,
        };
        let (_, th) = init_params::<f64>(&spec, &paper).unwrap();
        assert!(th.block(0).max_abs() <= 0.01 / 32.0);
        assert!(th.block(1).max_abs() <= 0.01 / 1024.0);

        let coord = InitSpec {
            scheme: InitScheme::CoordinateUniform,
            ..paper
        };
        let (_, th) = init_params::<f64>(&spec, &coord).unwrap();
        assert!(th.block(0).max_abs() <= 0.01 / 1024.0);
    }

    #[test]
    fn init_is_deterministic() {
        let spec = ModelSpec::TwoLayerRelu {
            input_dim: 4,
            width: 8,
            freeze_second_layer: true,
        };
        let init = InitSpec {
            scale: 0.1,
            scheme: InitScheme::PaperUniform,
            seed: 99,
        };
        let (m1, a) = init_params::<f64>(&spec, &init).unwrap();
        let (m2, b) = init_params::<f64>(&spec, &init).unwrap();
        assert_eq!(a, b);
        assert_eq!(m1, m2);
        assert_eq!(a.num_blocks(), 1);
        assert_eq!(m1.frozen_head().unwrap().len(), 8);
    }
}
