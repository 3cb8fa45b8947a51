//! Positive-definite kernels over states and actions.
//!
//! The estimator works with a product kernel `k(x, x') l(u, u')`: a Gaussian
//! over states and either a Gaussian or the constant-one kernel over actions.
//! The constant-one kernel makes uncontrolled systems fit the same formulas.

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{PikeError, Result};
use crate::points::Points;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    /// `exp(-‖a - b‖² / 2σ²)`
    Gaussian,
    /// Identically one. Used as the action kernel of uncontrolled systems.
    ConstantOne,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub bandwidth: f64,
}

impl KernelSpec {
    pub fn gaussian(bandwidth: f64) -> Result<Self> {
        let spec = Self {
            family: KernelFamily::Gaussian,
            bandwidth,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn constant_one() -> Self {
        Self {
            family: KernelFamily::ConstantOne,
            bandwidth: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth.is_finite() && self.bandwidth > 0.0) {
            return Err(PikeError::InvalidParameter {
                name: "sigma",
                reason: format!("bandwidth must be finite and > 0, got {}", self.bandwidth),
            });
        }
        Ok(())
    }

    /// Kernel value without dimension or finiteness checks.
    #[inline]
    pub(crate) fn eval_unchecked(&self, a: &[f64], b: &[f64]) -> f64 {
        match self.family {
            KernelFamily::ConstantOne => 1.0,
            KernelFamily::Gaussian => {
                let sq: f64 = a
                    .iter()
                    .zip(b)
                    .map(|(x, y)| {
                        let d = x - y;
                        d * d
                    })
                    .sum();
                (-sq / (2.0 * self.bandwidth * self.bandwidth)).exp()
            }
        }
    }
}

fn check_pair(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(PikeError::invalid(format!(
            "kernel arguments have dimensions {} and {}",
            a.len(),
            b.len()
        )));
    }
    if !a.iter().chain(b).all(|v| v.is_finite()) {
        return Err(PikeError::invalid("kernel argument has non-finite entries"));
    }
    Ok(())
}

pub fn eval_kernel(spec: &KernelSpec, a: &[f64], b: &[f64]) -> Result<f64> {
    spec.validate()?;
    check_pair(a, b)?;
    Ok(spec.eval_unchecked(a, b))
}

pub fn product_kernel(
    spec_x: &KernelSpec,
    spec_u: &KernelSpec,
    x: &[f64],
    u: &[f64],
    x2: &[f64],
    u2: &[f64],
) -> Result<f64> {
    Ok(eval_kernel(spec_x, x, x2)? * eval_kernel(spec_u, u, u2)?)
}

/// Symmetric `M × M` matrix of product-kernel values over training inputs.
#[derive(Debug, Clone)]
pub struct GramMatrix {
    entries: Mat<f64>,
}

impl GramMatrix {
    pub fn size(&self) -> usize {
        self.entries.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries.read(i, j)
    }

    pub fn as_mat(&self) -> &Mat<f64> {
        &self.entries
    }

    pub(crate) fn into_mat(self) -> Mat<f64> {
        self.entries
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.size())
            .map(|i| (0..self.size()).map(|j| self.get(i, j)).collect())
            .collect()
    }
}

fn check_inputs(spec_x: &KernelSpec, spec_u: &KernelSpec, states: &Points, actions: &Points) -> Result<()> {
    spec_x.validate()?;
    spec_u.validate()?;
    if states.len() != actions.len() {
        return Err(PikeError::invalid(format!(
            "{} states but {} actions",
            states.len(),
            actions.len()
        )));
    }
    if !states.is_finite() || !actions.is_finite() {
        return Err(PikeError::invalid("training inputs contain non-finite entries"));
    }
    Ok(())
}

/// Assembles `G_ij = k(x_i, x_j) l(u_i, u_j)`.
///
/// Only the upper triangle is evaluated; the lower triangle is a copy, so the
/// result is exactly symmetric.
pub fn gram(spec_x: &KernelSpec, spec_u: &KernelSpec, states: &Points, actions: &Points) -> Result<GramMatrix> {
    check_inputs(spec_x, spec_u, states, actions)?;
    let m = states.len();
    if m == 0 {
        return Err(PikeError::invalid("gram matrix of an empty sample"));
    }

    let row_values = |i: usize| -> Vec<f64> {
        (i..m)
            .map(|j| {
                spec_x.eval_unchecked(states.row(i), states.row(j))
                    * spec_u.eval_unchecked(actions.row(i), actions.row(j))
            })
            .collect()
    };

    #[cfg(feature = "parallel")]
    let upper: Vec<Vec<f64>> = {
        use rayon::prelude::*;
        (0..m).into_par_iter().map(row_values).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let upper: Vec<Vec<f64>> = (0..m).map(row_values).collect();

    let mut entries = Mat::<f64>::zeros(m, m);
    for (i, row) in upper.iter().enumerate() {
        for (offset, &v) in row.iter().enumerate() {
            let j = i + offset;
            entries.write(i, j, v);
            entries.write(j, i, v);
        }
    }
    Ok(GramMatrix { entries })
}

/// `K(x, u)_i = k(x_i, x) l(u_i, u)` for every training pair.
pub fn cross_vector(
    spec_x: &KernelSpec,
    spec_u: &KernelSpec,
    states: &Points,
    actions: &Points,
    x: &[f64],
    u: &[f64],
) -> Result<Vec<f64>> {
    check_inputs(spec_x, spec_u, states, actions)?;
    check_query(states, actions, x, u)?;
    Ok(cross_vector_unchecked(spec_x, spec_u, states, actions, x, u))
}

pub(crate) fn check_query(states: &Points, actions: &Points, x: &[f64], u: &[f64]) -> Result<()> {
    if x.len() != states.dim() {
        return Err(PikeError::invalid(format!(
            "query state has dimension {}, training states have {}",
            x.len(),
            states.dim()
        )));
    }
    if u.len() != actions.dim() {
        return Err(PikeError::invalid(format!(
            "query action has dimension {}, training actions have {}",
            u.len(),
            actions.dim()
        )));
    }
    if !x.iter().chain(u).all(|v| v.is_finite()) {
        return Err(PikeError::invalid("query has non-finite entries"));
    }
    Ok(())
}

pub(crate) fn cross_vector_unchecked(
    spec_x: &KernelSpec,
    spec_u: &KernelSpec,
    states: &Points,
    actions: &Points,
    x: &[f64],
    u: &[f64],
) -> Vec<f64> {
    states
        .iter()
        .zip(actions.iter())
        .map(|(xi, ui)| spec_x.eval_unchecked(xi, x) * spec_u.eval_unchecked(ui, u))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn g(s: f64) -> KernelSpec {
        KernelSpec::gaussian(s).unwrap()
    }

    #[test]
    fn zero_distance_is_one() {
        assert_eq!(eval_kernel(&g(0.2), &[0.3, -1.0], &[0.3, -1.0]).unwrap(), 1.0);
    }

    #[test]
    fn closed_form_values() {
        // 30-digit evaluations of exp(-0.5), exp(-4.5) and their product.
        assert_relative_eq!(
            eval_kernel(&g(0.2), &[0.0, 0.0], &[0.2, 0.0]).unwrap(),
            0.606_530_659_712_633_4,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            eval_kernel(&g(1.0), &[0.0], &[3.0]).unwrap(),
            0.011_108_996_538_242_306,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            product_kernel(&g(0.2), &g(1.0), &[0.0, 0.0], &[0.0], &[0.2, 0.0], &[3.0]).unwrap(),
            0.006_737_946_999_085_467,
            max_relative = 1e-14
        );
    }

    #[test]
    fn constant_action_kernel_reduces_to_state_kernel() {
        let one = KernelSpec::constant_one();
        let a = product_kernel(&g(0.5), &one, &[0.1, 0.2], &[], &[0.4, -0.1], &[]).unwrap();
        let b = eval_kernel(&g(0.5), &[0.1, 0.2], &[0.4, -0.1]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(eval_kernel(&g(1.0), &[0.0], &[0.0, 1.0]).is_err());
        assert!(eval_kernel(&g(1.0), &[f64::NAN], &[0.0]).is_err());
        assert!(KernelSpec::gaussian(0.0).is_err());
        assert!(KernelSpec::gaussian(-1.0).is_err());
        let empty = Points::from_rows::<Vec<f64>>(&[]).unwrap();
        assert!(gram(&g(1.0), &KernelSpec::constant_one(), &empty, &empty).is_err());
    }

    #[test]
    fn small_gram_matrices() {
        let one = KernelSpec::constant_one();
        let x = Points::from_rows(&[[0.4, 0.1]]).unwrap();
        let u = Points::empty_rows(1);
        assert_eq!(gram(&g(0.2), &one, &x, &u).unwrap().to_rows(), vec![vec![1.0]]);

        let x = Points::from_rows(&[[0.4, 0.1]; 3]).unwrap();
        let u = Points::from_rows(&[[2.0]; 3]).unwrap();
        let gm = gram(&g(0.2), &g(1.0), &x, &u).unwrap();
        assert!(gm.to_rows().iter().flatten().all(|&v| v == 1.0));
    }

    #[test]
    fn cross_vector_entries() {
        let x = Points::from_rows(&[[0.0, 0.0], [0.2, 0.0]]).unwrap();
        let u = Points::from_rows(&[[0.0], [3.0]]).unwrap();
        let k = cross_vector(&g(0.2), &g(1.0), &x, &u, &[0.2, 0.0], &[3.0]).unwrap();
        assert_eq!(k[1], 1.0);
        assert_relative_eq!(k[0], 0.006_737_946_999_085_467, max_relative = 1e-14);

        let far = cross_vector(&g(0.2), &g(1.0), &x, &u, &[20.0, 0.0], &[3.0]).unwrap();
        assert!(far.iter().all(|&v| v < 1e-300));

        assert!(cross_vector(&g(0.2), &g(1.0), &x, &u, &[0.0], &[3.0]).is_err());
    }
}
