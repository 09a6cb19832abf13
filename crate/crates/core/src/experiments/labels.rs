use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solvers::{Algorithm, RunLog};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionLabel {
    pub function_id: u32,
    pub winner: Algorithm,
    /// Median final precision (best value minus the instance target) per
    /// algorithm, in class order.
    pub medians: [f64; 3],
    pub runs: [usize; 3],
    pub tie: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LabelTable {
    pub functions: Vec<FunctionLabel>,
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Picks the algorithm with the lowest median; earlier class wins exact
/// ties. Returns (winner, tie flag).
pub fn pick_winner(medians: &[f64; 3]) -> (Algorithm, bool) {
    let mut best = 0;
    for k in 1..3 {
        if medians[k] < medians[best] {
            best = k;
        }
    }
    let tie = (0..3).any(|k| k != best && medians[k] == medians[best]);
    (Algorithm::ALL[best], tie)
}

/// Labels every function seen in `runs` by the best median precision over
/// its instances and runs.
pub fn label(runs: &[RunLog]) -> Result<LabelTable> {
    let mut targets: BTreeMap<(u32, u32), f64> = BTreeMap::new();
    let mut finals: BTreeMap<u32, [Vec<f64>; 3]> = BTreeMap::new();
    for log in runs {
        let key = (log.instance.function_id, log.instance.instance_id);
        let f_opt = match targets.get(&key) {
            Some(&f) => f,
            None => {
                let f = log.instance.instantiate()?.f_opt;
                targets.insert(key, f);
                f
            }
        };
        finals.entry(key.0).or_default()[log.config.algorithm.index()].push(log.final_best - f_opt);
    }
    let mut functions = Vec::with_capacity(finals.len());
    for (function_id, per_alg) in finals {
        if let Some(k) = (0..3).find(|&k| per_alg[k].is_empty()) {
            return Err(Error::IncompleteData(format!(
                "no {} runs on function {function_id}",
                Algorithm::ALL[k]
            )));
        }
        let medians = [median(&per_alg[0]), median(&per_alg[1]), median(&per_alg[2])];
        let (winner, tie) = pick_winner(&medians);
        functions.push(FunctionLabel {
            function_id,
            winner,
            medians,
            runs: [per_alg[0].len(), per_alg[1].len(), per_alg[2].len()],
            tie,
        });
    }
    Ok(LabelTable { functions })
}

impl LabelTable {
    pub fn winner(&self, function_id: u32) -> Result<Algorithm> {
        self.functions
            .iter()
            .find(|f| f.function_id == function_id)
            .map(|f| f.winner)
            .ok_or_else(|| Error::IncompleteData(format!("no label for function {function_id}")))
    }

    /// Winner counts in class order.
    pub fn class_counts(&self) -> [usize; 3] {
        let mut c = [0; 3];
        for f in &self.functions {
            c[f.winner.index()] += 1;
        }
        c
    }

    pub fn ties(&self) -> Vec<u32> {
        self.functions.iter().filter(|f| f.tie).map(|f| f.function_id).collect()
    }
}
