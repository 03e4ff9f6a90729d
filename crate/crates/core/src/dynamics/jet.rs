use crate::error::{Error, Result};
use crate::numerics::Vector;

/// `y^{(0)}, .., y^{(k-1)}`: the closed-loop integration state.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputJet {
    values: Vec<Vector>,
}

impl OutputJet {
    pub fn new(values: Vec<Vector>) -> Result<Self> {
        let Some(first) = values.first() else {
            return Err(Error::InvalidArgument("a jet needs at least one entry".into()));
        };
        let m = first.len();
        if m == 0 {
            return Err(Error::InvalidArgument("jet entries must be nonempty".into()));
        }
        if values.iter().any(|v| v.len() != m) {
            return Err(Error::Dimension("jet entries differ in length".into()));
        }
        if values.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("jet entries must be finite".into()));
        }
        Ok(Self { values })
    }

    /// Rebuilds a jet from the flat ODE state `(y, ẏ, ..)`.
    pub fn from_state(state: &[f64], order: usize, dim: usize) -> Result<Self> {
        if order == 0 || state.len() != order * dim {
            return Err(Error::Dimension(format!(
                "state of length {} cannot hold {order} blocks of {dim}",
                state.len()
            )));
        }
        Self::new(state.chunks(dim).map(<[f64]>::to_vec).collect())
    }

    pub fn order(&self) -> usize {
        self.values.len()
    }

    pub fn dim(&self) -> usize {
        self.values[0].len()
    }

    pub fn value(&self, i: usize) -> &[f64] {
        &self.values[i]
    }

    pub fn values(&self) -> &[Vector] {
        &self.values
    }

    pub fn to_state(&self) -> Vector {
        self.values.concat()
    }

    /// The jet with `next` appended as the new highest derivative.
    pub fn extended(&self, next: Vector) -> Result<Self> {
        let mut values = self.values.clone();
        values.push(next);
        Self::new(values)
    }

    /// The first `order` entries.
    pub fn truncated(&self, order: usize) -> Self {
        Self {
            values: self.values[..order.clamp(1, self.order())].to_vec(),
        }
    }

    /// Time derivative of the flat state: `(ẏ, .., y^{(k-1)}, highest)`.
    pub fn state_derivative(&self, highest: &[f64]) -> Vector {
        let mut out: Vector = self.values[1..].concat();
        out.extend_from_slice(highest);
        out
    }
}

/// Jet of the stacked primal-dual vector `z = (y, ν)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimalDualJet {
    jet: OutputJet,
    primal_dim: usize,
}

impl PrimalDualJet {
    pub fn new(jet: OutputJet, primal_dim: usize) -> Result<Self> {
        if primal_dim == 0 || primal_dim >= jet.dim() {
            return Err(Error::Dimension(format!(
                "primal dimension {primal_dim} must lie in 1..{}",
                jet.dim()
            )));
        }
        Ok(Self { jet, primal_dim })
    }

    pub fn from_parts(primal: &OutputJet, dual: &[Vector]) -> Result<Self> {
        if dual.len() != primal.order() {
            return Err(Error::Dimension("primal and dual jets differ in order".into()));
        }
        let values = primal
            .values()
            .iter()
            .zip(dual)
            .map(|(y, nu)| [y.as_slice(), nu.as_slice()].concat())
            .collect();
        Self::new(OutputJet::new(values)?, primal.dim())
    }

    pub fn jet(&self) -> &OutputJet {
        &self.jet
    }

    pub fn order(&self) -> usize {
        self.jet.order()
    }

    pub fn primal_dim(&self) -> usize {
        self.primal_dim
    }

    pub fn dual_dim(&self) -> usize {
        self.jet.dim() - self.primal_dim
    }

    pub fn primal(&self, i: usize) -> &[f64] {
        &self.jet.value(i)[..self.primal_dim]
    }

    pub fn dual(&self, i: usize) -> &[f64] {
        &self.jet.value(i)[self.primal_dim..]
    }

    pub fn primal_jet(&self) -> OutputJet {
        let values = (0..self.order()).map(|i| self.primal(i).to_vec()).collect();
        OutputJet::new(values).expect("sub-jet of a valid jet")
    }
}
