use std::collections::BTreeMap;

use super::{Example, Model};
use crate::error::{Error, Result};
use crate::nn::mse;

#[derive(Debug, Clone, PartialEq)]
pub struct GroupMetrics {
    pub group: String,
    pub n: usize,
    pub mse: f64,
    pub rmse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub n: usize,
    /// Mean over examples and over both outputs.
    pub mse: f64,
    pub rmse: f64,
    /// Per song, in lexicographic order.
    pub per_group: Vec<GroupMetrics>,
}

pub fn rmse(mse: f64) -> f64 {
    mse.sqrt()
}

/// Eval-mode (no dropout) metrics of raw, unclamped predictions.
pub fn evaluate(model: &Model, examples: &[Example]) -> Result<EvalReport> {
    if examples.is_empty() {
        return Err(Error::Empty("no examples to evaluate".into()));
    }
    let mut groups: BTreeMap<&str, (usize, f64)> = BTreeMap::new();
    let losses = crate::par::par_map(examples, |_, ex| {
        model.predict_raw(&ex.input).map(|p| mse(&p, &ex.target))
    });
    let mut total = 0.0;
    for (ex, loss) in examples.iter().zip(losses) {
        let loss = loss?;
        total += loss;
        let g = groups.entry(&ex.group).or_default();
        g.0 += 1;
        g.1 += loss;
    }
    let m = total / examples.len() as f64;
    Ok(EvalReport {
        n: examples.len(),
        mse: m,
        rmse: rmse(m),
        per_group: groups
            .into_iter()
            .map(|(g, (n, s))| GroupMetrics {
                group: g.to_string(),
                n,
                mse: s / n as f64,
                rmse: rmse(s / n as f64),
            })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;
    use crate::models::{Task, TrainConfig};
    use crate::nn::Parameters;

    #[test]
    fn constant_model_metrics() {
        let mut m = Model::from_config(&TrainConfig::task2_default(), 2).unwrap();
        for t in m.network.tensors_mut() {
            t.iter_mut().for_each(|v| *v = 0.0);
        }
        assert_eq!(m.task, Task::NextPoint);
        let ex = |g: &str, t: [f64; 2]| Example {
            input: Matrix::zeros(2, 10),
            target: t,
            group: g.into(),
        };
        let r = evaluate(&m, &[ex("b", [0.3, 0.3]), ex("a", [1.0, 0.0]), ex("a", [0.0, 0.0])]).unwrap();
        assert!((r.mse - (0.09 + 0.5) / 3.0).abs() < 1e-15);
        assert_eq!(r.rmse, r.mse.sqrt());
        assert_eq!(r.per_group[0].group, "a");
        assert_eq!(r.per_group[0].n, 2);
        assert!((r.per_group[0].mse - 0.25).abs() < 1e-15);
        assert!((r.per_group[1].rmse - 0.3).abs() < 1e-15);
        assert!(evaluate(&m, &[]).is_err());
    }
}
