use super::graph::{Graph, NodeId, ParamId, ParamStore};
use super::{NnError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// `(parameter name, max relative error over its entries)`.
    pub per_parameter: Vec<(String, f64)>,
    pub max_relative_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Compares `backward` against central differences for every entry of
/// `params`. `build` records the loss on a fresh graph.
///
/// The relative error of a coordinate is `|a − b| / max(|a|, |b|, 1e-8)`.
pub fn grad_check<F>(store: &mut ParamStore, params: &[ParamId], h: f64, tol: f64, build: F) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph) -> Result<NodeId>,
{
    if !(1e-7..=1e-3).contains(&h) {
        return Err(NnError::InvalidStep(h));
    }
    let eval = |store: &ParamStore| -> Result<f64> {
        let mut g = Graph::new(store);
        let loss = build(&mut g)?;
        Ok(g.value(loss).item())
    };
    let analytic = {
        let mut g = Graph::new(store);
        let loss = build(&mut g)?;
        g.backward(loss)?
    };

    let mut per_parameter = Vec::with_capacity(params.len());
    let mut worst = 0.0f64;
    for &id in params {
        let len = store.get(id).len();
        let mut param_worst = 0.0f64;
        for i in 0..len {
            let orig = store.get(id).data()[i];
            store.get_mut(id).data_mut()[i] = orig + h;
            let up = eval(store)?;
            store.get_mut(id).data_mut()[i] = orig - h;
            let down = eval(store)?;
            store.get_mut(id).data_mut()[i] = orig;

            let numeric = (up - down) / (2.0 * h);
            let a = analytic.get(id).map_or(0.0, |g| g.data()[i]);
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
            param_worst = param_worst.max(rel);
        }
        worst = worst.max(param_worst);
        per_parameter.push((store.name(id).to_string(), param_worst));
    }
    Ok(GradCheckReport {
        per_parameter,
        max_relative_error: worst,
        tolerance: tol,
        passed: worst <= tol,
    })
}
