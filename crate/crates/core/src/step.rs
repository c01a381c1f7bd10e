//! Right-continuous piecewise-constant functions of time.

use serde::{Deserialize, Serialize};

use crate::error::{validation, Result};

/// Value `values[k]` holds on `[breakpoints[k], breakpoints[k+1])`; the last
/// value extends flat to infinity and the first one covers times before the
/// first breakpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepFunction<V> {
    pub breakpoints: Vec<f64>,
    pub values: Vec<V>,
}

pub type ScalarStep = StepFunction<f64>;
pub type VectorStep = StepFunction<Vec<f64>>;

impl<V: Clone> StepFunction<V> {
    pub fn new(breakpoints: Vec<f64>, values: Vec<V>) -> Result<Self> {
        let f = Self { breakpoints, values };
        f.check()?;
        Ok(f)
    }

    pub fn constant(v: V) -> Self {
        Self { breakpoints: vec![0.0], values: vec![v] }
    }

    /// Annual segments `[0,1), [1,2), ...` carrying `values`.
    pub fn annual(values: Vec<V>) -> Self {
        let breakpoints = (0..values.len()).map(|k| k as f64).collect();
        Self { breakpoints, values }
    }

    pub fn check(&self) -> Result<()> {
        if self.breakpoints.is_empty() || self.breakpoints.len() != self.values.len() {
            return Err(validation("step function needs one value per breakpoint"));
        }
        if self.breakpoints.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(validation("step function breakpoints must be strictly increasing"));
        }
        Ok(())
    }

    pub fn segment(&self, t: f64) -> usize {
        // partition_point gives the count of breakpoints <= t
        self.breakpoints.partition_point(|&b| b <= t).saturating_sub(1)
    }

    pub fn at(&self, t: f64) -> &V {
        &self.values[self.segment(t)]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map<W, F: Fn(&V) -> W>(&self, f: F) -> StepFunction<W> {
        StepFunction { breakpoints: self.breakpoints.clone(), values: self.values.iter().map(f).collect() }
    }
}

impl StepFunction<Vec<f64>> {
    pub fn dim(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    pub fn check_dim(&self, n: usize, name: &str) -> Result<()> {
        self.check()?;
        if self.values.iter().any(|v| v.len() != n) {
            return Err(validation(format!("{name}: every value must have {n} components")));
        }
        Ok(())
    }

    pub fn zeros(n: usize) -> Self {
        Self::constant(vec![0.0; n])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn right_continuous_lookup() {
        let f = ScalarStep::annual(vec![1.0, 2.0, 3.0]);
        assert_eq!(*f.at(0.0), 1.0);
        assert_eq!(*f.at(0.999), 1.0);
        assert_eq!(*f.at(1.0), 2.0);
        assert_eq!(*f.at(2.5), 3.0);
        assert_eq!(*f.at(40.0), 3.0);
        assert_eq!(*f.at(-1.0), 1.0);
    }

    #[test]
    fn rejects_unsorted() {
        assert!(ScalarStep::new(vec![0.0, 2.0, 1.0], vec![1.0; 3]).is_err());
        assert!(ScalarStep::new(vec![0.0, 1.0], vec![1.0]).is_err());
    }
}
