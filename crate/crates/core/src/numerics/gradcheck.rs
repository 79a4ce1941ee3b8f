use crate::error::{Error, Result};

use super::{Bound, Graph, ParamStore, Var};

/// Scalar objective evaluated on a fresh graph with the parameters bound.
pub trait Objective: Fn(&mut Graph<f64>, &Bound<'_, f64>) -> Result<Var> {}

impl<F> Objective for F where F: Fn(&mut Graph<f64>, &Bound<'_, f64>) -> Result<Var> {}

fn evaluate(f: &impl Objective, params: &ParamStore<f64>) -> Result<f64> {
    let mut g = Graph::new();
    let bound = g.bind(params)?;
    let out = f(&mut g, &bound)?;
    let v = g.value(out).item()?;
    if !v.is_finite() {
        return Err(Error::NonFinite("objective value".into()));
    }
    Ok(v)
}

/// Backward-pass gradients, one vector per parameter in store order.
pub fn analytic_gradients(f: &impl Objective, params: &mut ParamStore<f64>) -> Result<Vec<Vec<f64>>> {
    let mut g = Graph::new();
    let snapshot = params.clone();
    let out = {
        let bound = g.bind(params)?;
        f(&mut g, &bound)?
    };
    if !g.value(out).item()?.is_finite() {
        return Err(Error::NonFinite("objective value".into()));
    }
    g.backward(out, &mut [params])?;
    debug_assert!(snapshot == *params);
    Ok(params
        .iter()
        .map(|(_, t)| t.grad().expect("populated by backward").to_vec())
        .collect())
}

/// Central differences with step `eps` for every coordinate of every parameter.
pub fn numerical_gradients(f: &impl Objective, params: &mut ParamStore<f64>, eps: f64) -> Result<Vec<Vec<f64>>> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("finite-difference step {eps}")));
    }
    let mut out = Vec::with_capacity(params.len());
    for i in 0..params.len() {
        let mut grad = Vec::with_capacity(params.tensor(i).len());
        for j in 0..params.tensor(i).len() {
            let orig = params.tensor(i).data()[j];
            params.tensor_mut(i).data_mut()[j] = orig + eps;
            let plus = evaluate(f, params);
            params.tensor_mut(i).data_mut()[j] = orig - eps;
            let minus = evaluate(f, params);
            params.tensor_mut(i).data_mut()[j] = orig;
            grad.push((plus? - minus?) / (2.0 * eps));
        }
        out.push(grad);
    }
    Ok(out)
}

/// Largest `|a - b| / max(|a|, |b|, 1e-8)` over all coordinates.
pub fn max_relative_error(analytic: &[Vec<f64>], numeric: &[Vec<f64>]) -> f64 {
    analytic
        .iter()
        .flatten()
        .zip(numeric.iter().flatten())
        .map(|(&a, &b)| (a - b).abs() / a.abs().max(b.abs()).max(1e-8))
        .fold(0.0, f64::max)
}

/// Compares backward gradients of `f` with central differences and returns
/// the maximum relative error.
pub fn grad_check(f: impl Objective, params: &mut ParamStore<f64>, eps: f64) -> Result<f64> {
    let analytic = analytic_gradients(&f, params)?;
    let numeric = numerical_gradients(&f, params, eps)?;
    Ok(max_relative_error(&analytic, &numeric))
}
