use crate::error::{Error, Result};
use crate::problem::{ProxableTerm, SmoothTerm, Value};
use crate::tensor::Tensor;

/// Indicator of the box `[lo, hi]ⁿ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoxIndicator {
    lo: f64,
    hi: f64,
}

impl BoxIndicator {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo <= hi) {
            return Err(Error::InvalidParameter(format!("box bounds out of order: [{lo}, {hi}]")));
        }
        Ok(BoxIndicator { lo, hi })
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }
}

impl ProxableTerm for BoxIndicator {
    fn name(&self) -> &str {
        "box"
    }

    fn value(&self, x: &Tensor) -> Value {
        if x.data().iter().all(|&v| v >= self.lo && v <= self.hi) {
            Value::Finite(0.0)
        } else {
            Value::Infinite
        }
    }

    fn prox(&self, _gamma: f64, x: &Tensor) -> Result<Tensor> {
        Ok(x.clip(self.lo, self.hi))
    }
}

/// Projection onto `[lo, hi]ⁿ`; independent of the step size.
pub fn box_prox(lo: f64, hi: f64, v: &Tensor) -> Result<Tensor> {
    BoxIndicator::new(lo, hi)?.prox(1.0, v)
}

/// `w ‖x‖₁`
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct L1Norm {
    weight: f64,
}

impl L1Norm {
    pub fn new(weight: f64) -> Result<Self> {
        if !(weight >= 0.0) {
            return Err(Error::InvalidParameter(format!("l1 weight must be nonnegative, got {weight}")));
        }
        Ok(L1Norm { weight })
    }
}

impl ProxableTerm for L1Norm {
    fn name(&self) -> &str {
        "l1"
    }

    fn value(&self, x: &Tensor) -> Value {
        Value::Finite(self.weight * x.data().iter().map(|v| v.abs()).sum::<f64>())
    }

    fn prox(&self, gamma: f64, x: &Tensor) -> Result<Tensor> {
        let t = gamma * self.weight;
        Ok(x.map(|v| v.signum() * (v.abs() - t).max(0.0)))
    }
}

/// Uses a smooth term in the nonsmooth slot through its own prox.
#[derive(Clone, Debug)]
pub struct AsProx<T>(pub T);

impl<T: SmoothTerm> ProxableTerm for AsProx<T> {
    fn name(&self) -> &str {
        self.0.name()
    }

    fn value(&self, x: &Tensor) -> Value {
        Value::Finite(self.0.value(x))
    }

    fn prox(&self, gamma: f64, x: &Tensor) -> Result<Tensor> {
        self.0.prox(gamma, x)
    }
}
