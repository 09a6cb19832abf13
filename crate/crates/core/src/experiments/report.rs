//! Report files: a JSON document plus CSV companions and an SVG boxplot,
//! all named after the experiment and the config hash.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Evaluation, KsComparison, LabelTable, ProjectionPoint};
use crate::error::Result;

pub const REPORT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub v: u32,
    pub experiment: String,
    pub config_hash: String,
    /// Winner counts in class order (CMAES, DE, PSO).
    pub class_counts: [usize; 3],
    pub label_ties: Vec<u32>,
    pub evaluations: Vec<Evaluation>,
    pub ks: Vec<KsComparison>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub projection: Option<Vec<ProjectionPoint>>,
}

impl ExperimentReport {
    pub fn new(experiment: &str, config_hash: &str, labels: &LabelTable) -> Self {
        Self {
            v: REPORT_VERSION,
            experiment: experiment.to_string(),
            config_hash: config_hash.to_string(),
            class_counts: labels.class_counts(),
            label_ties: labels.ties(),
            evaluations: Vec::new(),
            ks: Vec::new(),
            projection: None,
        }
    }

    pub fn evaluation(&self, input: &str) -> Option<&Evaluation> {
        self.evaluations.iter().find(|e| e.input == input)
    }

    pub fn stem(&self) -> String {
        format!("{}_{}", self.experiment, &self.config_hash[..self.config_hash.len().min(12)])
    }

    /// Writes the report and its companions into `dir`, returning the
    /// paths written.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let stem = self.stem();
        let head = format!("# config_hash={}\n", self.config_hash);
        let mut written = Vec::new();
        let mut put = |suffix: &str, body: String| -> Result<()> {
            let path = dir.join(format!("{stem}{suffix}"));
            fs::write(&path, body)?;
            written.push(path);
            Ok(())
        };

        let mut json = serde_json::to_string_pretty(self)?;
        json.push('\n');
        put(".json", json)?;

        let mut folds = head.clone() + "input,method,instance_id,accuracy,n_train,n_validation\n";
        for e in &self.evaluations {
            for f in &e.folds {
                let _ = writeln!(
                    folds,
                    "{},{},{},{:?},{},{}",
                    e.input,
                    method_name(e),
                    f.instance_id,
                    f.accuracy,
                    f.n_train,
                    f.n_validation
                );
            }
        }
        put("_folds.csv", folds)?;

        let mut preds = head.clone() + "input,function_id,instance_id,run_index,truth,predicted\n";
        for e in &self.evaluations {
            for p in &e.predictions {
                let _ = writeln!(
                    preds,
                    "{},{},{},{},{},{}",
                    e.input, p.function_id, p.instance_id, p.run_index, p.truth, p.predicted
                );
            }
        }
        put("_predictions.csv", preds)?;

        if !self.ks.is_empty() {
            let mut ks = head.clone() + "baseline,candidate,statistic,p_value\n";
            for k in &self.ks {
                let _ = writeln!(ks, "{},{},{:?},{:?}", k.baseline, k.candidate, k.statistic, k.p_value);
            }
            put("_ks.csv", ks)?;
        }
        if let Some(points) = &self.projection {
            let mut csv = head.clone() + "x,y,function_id,instance_id,run,winner\n";
            for p in points {
                let _ = writeln!(csv, "{:?},{:?},{},{},{},{}", p.x, p.y, p.function_id, p.instance_id, p.run, p.winner);
            }
            put("_projection.csv", csv)?;
        }
        if !self.evaluations.is_empty() {
            put("_boxplot.svg", boxplot_svg(&self.evaluations, &self.config_hash))?;
        }
        Ok(written)
    }

    /// Fixed-width table of per-input accuracy summaries and KS results.
    pub fn summary_table(&self) -> String {
        let width = self.evaluations.iter().map(|e| e.input.len()).max().unwrap_or(5).max(5);
        let mut s = String::new();
        let _ = writeln!(s, "{}  (config {})", self.experiment, &self.config_hash[..self.config_hash.len().min(12)]);
        let _ = writeln!(s, "winners CMAES/DE/PSO: {:?}", self.class_counts);
        let _ = writeln!(s, "{:<width$}  {:>24}  {:>7}  {:>7}  {:>7}", "input", "method", "median", "min", "max");
        for e in &self.evaluations {
            let _ = writeln!(
                s,
                "{:<width$}  {:>24}  {:>7.3}  {:>7.3}  {:>7.3}",
                e.input,
                method_name(e),
                e.summary.median,
                e.summary.min,
                e.summary.max
            );
        }
        for k in &self.ks {
            let _ = writeln!(s, "KS {} vs {}: D = {:.3}, p = {:.3}", k.candidate, k.baseline, k.statistic, k.p_value);
        }
        if let Some(p) = &self.projection {
            let _ = writeln!(s, "projection: {} points", p.len());
        }
        s
    }
}

fn method_name(e: &Evaluation) -> &'static str {
    match e.method {
        super::Method::RotationForest => "rotation_forest",
        super::Method::RandomForest => "random_forest",
        super::Method::SelectedRandomForest => "boruta_random_forest",
    }
}

fn quartiles(v: &[f64]) -> [f64; 5] {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let pos = p * (s.len() - 1) as f64;
        let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
        s[lo] + (pos - lo as f64) * (s[hi] - s[lo])
    };
    [q(0.0), q(0.25), q(0.5), q(0.75), q(1.0)]
}

/// Horizontal boxplots of fold accuracies on a fixed [0, 1] axis.
pub fn boxplot_svg(evaluations: &[Evaluation], config_hash: &str) -> String {
    let row = 28.0;
    let label_w = 260.0;
    let plot_w = 500.0;
    let top = 30.0;
    let height = top + row * evaluations.len() as f64 + 30.0;
    let width = label_w + plot_w + 20.0;
    let xs = |a: f64| label_w + a.clamp(0.0, 1.0) * plot_w;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, "<!-- config_hash={config_hash} -->");
    for t in 0..=10 {
        let x = xs(t as f64 / 10.0);
        let _ = writeln!(
            s,
            r##"<line x1="{x:.1}" y1="{top}" x2="{x:.1}" y2="{:.1}" stroke="#ddd"/><text x="{x:.1}" y="{:.1}" text-anchor="middle">{:.1}</text>"##,
            height - 25.0,
            height - 10.0,
            t as f64 / 10.0
        );
    }
    for (i, e) in evaluations.iter().enumerate() {
        let accs = e.accuracies();
        if accs.is_empty() {
            continue;
        }
        let [lo, q1, med, q3, hi] = quartiles(&accs);
        let y = top + row * i as f64 + row / 2.0;
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#, label_w - 8.0, y + 4.0, e.input);
        let _ = writeln!(
            s,
            r#"<line x1="{:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="black"/>"#,
            xs(lo),
            xs(hi)
        );
        let _ = writeln!(
            s,
            r##"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="#9ecae1" stroke="black"/>"##,
            xs(q1),
            y - row * 0.3,
            (xs(q3) - xs(q1)).max(1.0),
            row * 0.6
        );
        let _ = writeln!(
            s,
            r#"<line x1="{m:.1}" y1="{:.1}" x2="{m:.1}" y2="{:.1}" stroke="black" stroke-width="2"/>"#,
            y - row * 0.3,
            y + row * 0.3,
            m = xs(med)
        );
    }
    s.push_str("</svg>\n");
    s
}
