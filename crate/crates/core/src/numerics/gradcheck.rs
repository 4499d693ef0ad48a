use serde::Serialize;

use super::{Bound, Graph, ParamStore, Tensor, Var};
use crate::error::{Error, Result};

/// Outcome of a finite-difference gradient check.
#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    /// `max |a - n| / max(|a|, |n|, 1e-8)` over every parameter scalar.
    pub max_rel_error: f64,
    /// One entry per parameter tensor, in store order.
    pub per_param: Vec<ParamCheck>,
    /// Parameter name and flat index of the worst scalar.
    pub worst: Option<(String, usize)>,
    pub scalars_checked: usize,
    /// Loss at the unperturbed parameters.
    pub loss: f64,
}

/// Per-tensor summary of a gradient check.
#[derive(Debug, Clone, Serialize)]
pub struct ParamCheck {
    pub name: String,
    pub max_rel_error: f64,
    /// `(analytic, numeric)` for every scalar of the tensor.
    #[serde(skip)]
    pub values: Vec<(f64, f64)>,
}

fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

fn eval<F>(model_fn: &F, params: &ParamStore<f64>) -> Result<f64>
where
    F: Fn(&mut Graph<f64>, &Bound) -> Result<Var>,
{
    let mut g = Graph::new();
    let bound = params.bind(&mut g);
    let loss = model_fn(&mut g, &bound)?;
    let v = g.value(loss);
    if v.numel() != 1 {
        return Err(Error::Contract(
            "grad_check model_fn must return a scalar".into(),
        ));
    }
    Ok(v.item())
}

/// Compare reverse-mode gradients of `model_fn` against central differences
/// `(f(θ+eps) - f(θ-eps)) / 2eps` for every scalar in `params`.
pub fn grad_check<F>(model_fn: F, params: &ParamStore<f64>, eps: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph<f64>, &Bound) -> Result<Var>,
{
    if !(1e-6..=1e-4).contains(&eps) {
        return Err(Error::Contract(format!(
            "grad_check eps {eps} outside [1e-6, 1e-4]"
        )));
    }

    let mut g = Graph::new();
    let bound = params.bind(&mut g);
    let loss = model_fn(&mut g, &bound)?;
    let f0 = g.value(loss).item();
    let second = eval(&model_fn, params)?;
    if f0.to_bits() != second.to_bits() {
        return Err(Error::NonDeterministic { first: f0, second });
    }
    let grads = g.backward(loss)?;
    let analytic: Vec<Tensor<f64>> = bound.collect_grads(&grads);
    drop(bound);

    let mut work = params.clone();
    let names: Vec<String> = params.names().map(str::to_owned).collect();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        per_param: Vec::with_capacity(names.len()),
        worst: None,
        scalars_checked: 0,
        loss: f0,
    };
    for (name, grad) in names.iter().zip(&analytic) {
        let mut entry = ParamCheck {
            name: name.clone(),
            max_rel_error: 0.0,
            values: Vec::with_capacity(grad.numel()),
        };
        for i in 0..grad.numel() {
            let original = work.get(name).expect("name from store").data()[i];
            work.get_mut(name).expect("name from store").data_mut()[i] = original + eps;
            let plus = eval(&model_fn, &work)?;
            work.get_mut(name).expect("name from store").data_mut()[i] = original - eps;
            let minus = eval(&model_fn, &work)?;
            work.get_mut(name).expect("name from store").data_mut()[i] = original;

            let numeric = (plus - minus) / (2.0 * eps);
            let err = relative_error(grad.data()[i], numeric);
            if err > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = err;
                report.worst = Some((name.clone(), i));
            }
            entry.max_rel_error = entry.max_rel_error.max(err);
            entry.values.push((grad.data()[i], numeric));
            report.scalars_checked += 1;
        }
        report.per_param.push(entry);
    }
    Ok(report)
}
