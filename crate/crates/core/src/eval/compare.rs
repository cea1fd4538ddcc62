use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{cohens_d, cohens_h, mcnemar, paired_t, EvalError, EvalReport, McNemar, PairedT, StatsError};

/// Paired comparison of two reports over the same tasks. `t` and `d` are
/// computed on per-task soft-score differences (`a - b`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub method_a: String,
    pub method_b: String,
    pub n: usize,
    pub strict_a: f64,
    pub strict_b: f64,
    pub delta_strict: f64,
    pub soft_a: f64,
    pub soft_b: f64,
    pub delta_soft: f64,
    pub mcnemar: McNemar,
    pub cohens_h: f64,
    pub paired_t: Option<PairedT>,
    /// `None` when the differences have zero variance.
    pub cohens_d: Option<f64>,
}

pub fn compare_reports(a: &EvalReport, b: &EvalReport) -> Result<Comparison, EvalError> {
    let by_id = |r: &EvalReport| r.records.iter().map(|x| (x.task_id.clone(), x.clone())).collect::<BTreeMap<_, _>>();
    let (ma, mb) = (by_id(a), by_id(b));
    if ma.keys().ne(mb.keys()) {
        let only_a: Vec<_> = ma.keys().filter(|k| !mb.contains_key(*k)).take(3).cloned().collect();
        let only_b: Vec<_> = mb.keys().filter(|k| !ma.contains_key(*k)).take(3).cloned().collect();
        return Err(EvalError::TaskSetMismatch(format!(
            "{} vs {} tasks; only in first: {only_a:?}; only in second: {only_b:?}",
            ma.len(),
            mb.len()
        )));
    }
    if ma.is_empty() {
        return Err(EvalError::EmptyEvaluation);
    }
    let pairs: Vec<(bool, bool)> = ma.keys().map(|k| (ma[k].strict, mb[k].strict)).collect();
    let diffs: Vec<f64> = ma.keys().map(|k| ma[k].soft - mb[k].soft).collect();
    let t = match paired_t(&diffs) {
        Ok(t) => Some(t),
        Err(StatsError::TooFewSamples { .. }) => None,
        Err(e) => return Err(e.into()),
    };
    let d = match cohens_d(&diffs) {
        Ok(d) => Some(d),
        Err(StatsError::ZeroVariance | StatsError::TooFewSamples { .. }) => None,
        Err(e) => return Err(e.into()),
    };
    Ok(Comparison {
        method_a: a.policy.to_string(),
        method_b: b.policy.to_string(),
        n: ma.len(),
        strict_a: a.pass_at_1_strict,
        strict_b: b.pass_at_1_strict,
        delta_strict: a.pass_at_1_strict - b.pass_at_1_strict,
        soft_a: a.soft_pass_at_1,
        soft_b: b.soft_pass_at_1,
        delta_soft: a.soft_pass_at_1 - b.soft_pass_at_1,
        mcnemar: mcnemar(&pairs),
        cohens_h: cohens_h(a.pass_at_1_strict, b.pass_at_1_strict)?,
        paired_t: t,
        cohens_d: d,
    })
}

impl Comparison {
    /// Aligned plain-text table.
    pub fn to_table(&self) -> String {
        let opt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4}"));
        let rows = [
            ("methods", format!("{} vs {}", self.method_a, self.method_b)),
            ("tasks", self.n.to_string()),
            ("pass@1", format!("{:.4} vs {:.4}", self.strict_a, self.strict_b)),
            ("delta pass@1", format!("{:+.4}", self.delta_strict)),
            ("softpass@1", format!("{:.4} vs {:.4}", self.soft_a, self.soft_b)),
            ("delta softpass@1", format!("{:+.4}", self.delta_soft)),
            ("mcnemar b / c", format!("{} / {}", self.mcnemar.b, self.mcnemar.c)),
            (
                "mcnemar p",
                format!(
                    "{:.4e} ({:?}; exact {:.4e}, chi2 {:.4} -> {:.4e})",
                    self.mcnemar.p_value, self.mcnemar.method, self.mcnemar.exact_p, self.mcnemar.statistic, self.mcnemar.chi2_p
                ),
            ),
            ("cohen's h", format!("{:.4}", self.cohens_h)),
            ("paired t", opt(self.paired_t.map(|t| t.t))),
            ("paired t p", opt(self.paired_t.map(|t| t.p_value))),
            ("cohen's d", opt(self.cohens_d)),
        ];
        let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        let mut out = String::new();
        for (k, v) in rows {
            let _ = writeln!(out, "{k:<width$}  {v}");
        }
        out
    }
}
