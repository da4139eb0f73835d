use ndarray::{Array1, Array2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// Shape of a fully-connected ReLU classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ArchSpec {
    pub input_dim: usize,
    pub output_dim: usize,
    pub hidden_width: usize,
    /// Number of fully-connected layers, output layer included.
    pub depth: usize,
}

impl ArchSpec {
    pub const DEFAULT_DEPTH: usize = 5;

    pub fn new(
        input_dim: usize,
        hidden_width: usize,
        output_dim: usize,
        depth: usize,
    ) -> Result<Self> {
        let arch = ArchSpec {
            input_dim,
            output_dim,
            hidden_width,
            depth,
        };
        arch.validate()?;
        Ok(arch)
    }

    pub fn validate(&self) -> Result<()> {
        if self.depth < 2 {
            return Err(Error::InvalidArch(format!(
                "depth must be at least 2, got {}",
                self.depth
            )));
        }
        for (name, v) in [
            ("input_dim", self.input_dim),
            ("output_dim", self.output_dim),
            ("hidden_width", self.hidden_width),
        ] {
            if v == 0 {
                return Err(Error::InvalidArch(format!("{name} must be positive")));
            }
        }
        Ok(())
    }

    /// `(out, in)` of the 1-based layer `l`.
    pub fn layer_shape(&self, l: usize) -> (usize, usize) {
        let fan_in = if l == 1 {
            self.input_dim
        } else {
            self.hidden_width
        };
        let fan_out = if l == self.depth {
            self.output_dim
        } else {
            self.hidden_width
        };
        (fan_out, fan_in)
    }

    pub fn parameter_count(&self) -> usize {
        (1..=self.depth)
            .map(|l| {
                let (o, i) = self.layer_shape(l);
                o * i + o
            })
            .sum()
    }
}

/// One affine layer. `weights` is `[out, in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    pub fn zeros(out: usize, inp: usize) -> Self {
        Dense {
            weights: Array2::zeros((out, inp)),
            bias: Array1::zeros(out),
        }
    }

    pub fn fan_out(&self) -> usize {
        self.weights.nrows()
    }

    pub fn fan_in(&self) -> usize {
        self.weights.ncols()
    }

    fn is_finite(&self) -> bool {
        self.weights
            .iter()
            .chain(self.bias.iter())
            .all(|v| v.is_finite())
    }
}

/// Trainable parameters of a network together with its architecture.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    arch: ArchSpec,
    layers: Vec<Dense>,
}

impl ModelState {
    /// A model with every weight and bias set to zero.
    pub fn zeros(arch: ArchSpec) -> Result<Self> {
        arch.validate()?;
        let layers = (1..=arch.depth)
            .map(|l| {
                let (o, i) = arch.layer_shape(l);
                Dense::zeros(o, i)
            })
            .collect();
        Ok(ModelState { arch, layers })
    }

    /// Builds a model from explicit layers, checking every shape against `arch`.
    pub fn from_layers(arch: ArchSpec, layers: Vec<Dense>) -> Result<Self> {
        arch.validate()?;
        check_layers(&arch, &layers)?;
        if !layers.iter().all(Dense::is_finite) {
            return Err(Error::Domain("model parameters must be finite".into()));
        }
        Ok(ModelState { arch, layers })
    }

    pub fn arch(&self) -> &ArchSpec {
        &self.arch
    }

    pub fn depth(&self) -> usize {
        self.arch.depth
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    /// The 1-based layer `l`.
    pub fn layer(&self, l: usize) -> Result<&Dense> {
        check_layer_index(l, self.depth())?;
        Ok(&self.layers[l - 1])
    }

    pub(crate) fn set_layer(&mut self, l: usize, layer: Dense) {
        self.layers[l - 1] = layer;
    }

    pub fn parameter_count(&self) -> usize {
        self.arch.parameter_count()
    }

    /// Iterates every parameter in checkpoint order (per layer: weights row-major, then bias).
    pub fn parameters(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers
            .iter()
            .flat_map(|d| d.weights.iter().chain(d.bias.iter()).copied())
    }
}

/// Frozen copy of a model's parameters taken right after initialization.
#[derive(Debug, Clone, PartialEq)]
pub struct InitSnapshot {
    arch: ArchSpec,
    layers: Vec<Dense>,
}

impl InitSnapshot {
    pub fn capture(model: &ModelState) -> Self {
        InitSnapshot {
            arch: model.arch,
            layers: model.layers.clone(),
        }
    }

    pub(crate) fn from_layers(arch: ArchSpec, layers: Vec<Dense>) -> Result<Self> {
        let model = ModelState::from_layers(arch, layers)?;
        Ok(InitSnapshot::capture(&model))
    }

    pub fn arch(&self) -> &ArchSpec {
        &self.arch
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layer(&self, l: usize) -> Result<&Dense> {
        check_layer_index(l, self.arch.depth)?;
        Ok(&self.layers[l - 1])
    }

    /// The initial model itself.
    pub fn to_model(&self) -> ModelState {
        ModelState {
            arch: self.arch,
            layers: self.layers.clone(),
        }
    }

    /// Errors unless `model` has exactly this snapshot's shape.
    pub fn check_compatible(&self, model: &ModelState) -> Result<()> {
        if self.arch != model.arch {
            return Err(Error::Shape(format!(
                "snapshot architecture {:?} does not match model {:?}",
                self.arch, model.arch
            )));
        }
        Ok(())
    }
}

pub(crate) fn check_layer_index(l: usize, depth: usize) -> Result<()> {
    if l == 0 || l > depth {
        return Err(Error::LayerOutOfRange { layer: l, depth });
    }
    Ok(())
}

fn check_layers(arch: &ArchSpec, layers: &[Dense]) -> Result<()> {
    if layers.len() != arch.depth {
        return Err(Error::Shape(format!(
            "expected {} layers, got {}",
            arch.depth,
            layers.len()
        )));
    }
    for (idx, layer) in layers.iter().enumerate() {
        let (o, i) = arch.layer_shape(idx + 1);
        if layer.weights.dim() != (o, i) || layer.bias.len() != o {
            return Err(Error::Shape(format!(
                "layer {} should be {o}x{i} with bias {o}, got {:?} with bias {}",
                idx + 1,
                layer.weights.dim(),
                layer.bias.len()
            )));
        }
    }
    Ok(())
}

/// Seeded fan-in uniform initialization: every weight of a layer with fan-in
/// `m` is drawn from `U[-sqrt(6/m), +sqrt(6/m)]`, biases start at zero.
pub fn init_model(arch: ArchSpec, seed: u64) -> Result<(ModelState, InitSnapshot)> {
    let mut model = ModelState::zeros(arch)?;
    let mut rng = seed::rng(seed);
    for layer in model.layers.iter_mut() {
        let bound = (6.0 / layer.fan_in() as f64).sqrt();
        layer
            .weights
            .iter_mut()
            .for_each(|w| *w = rng.random_range(-bound..=bound));
    }
    let snapshot = InitSnapshot::capture(&model);
    Ok((model, snapshot))
}
