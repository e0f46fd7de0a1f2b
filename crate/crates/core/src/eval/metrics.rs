//! Precision, recall, and F1 from a confusion matrix.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    /// F1 is the harmonic mean when both inputs are non-zero, else 0.
    pub fn from_pr(precision: f64, recall: f64) -> Self {
        let f1 = if precision > 0.0 && recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Prf { precision, recall, f1 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Average {
    #[default]
    Macro,
    Micro,
}

impl FromStr for Average {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "macro" => Ok(Average::Macro),
            "micro" => Ok(Average::Micro),
            other => Err(Error::Config(format!("unknown average `{other}` (expected macro|micro)"))),
        }
    }
}

impl fmt::Display for Average {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Average::Macro => "macro",
            Average::Micro => "micro",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub per_label: BTreeMap<String, Prf>,
    #[serde(rename = "macro")]
    pub macro_avg: Prf,
    pub micro: Prf,
    pub accuracy: f64,
    pub support: BTreeMap<String, usize>,
}

impl Metrics {
    pub fn summary(&self, average: Average) -> Prf {
        match average {
            Average::Macro => self.macro_avg,
            Average::Micro => self.micro,
        }
    }

    /// Field-wise mean of several runs over the same label set. Computed as
    /// the first run plus the mean deviation from it, so identical runs
    /// average to exactly that run.
    pub fn mean(runs: &[Metrics]) -> Option<Metrics> {
        let first = runs.first()?;
        let n = runs.len() as f64;
        let avg_f = |f: &dyn Fn(&Metrics) -> f64| {
            let base = f(first);
            base + runs.iter().map(|m| f(m) - base).sum::<f64>() / n
        };
        let avg = |f: &dyn Fn(&Metrics) -> Prf| Prf {
            precision: avg_f(&|m| f(m).precision),
            recall: avg_f(&|m| f(m).recall),
            f1: avg_f(&|m| f(m).f1),
        };
        Some(Metrics {
            per_label: first
                .per_label
                .keys()
                .map(|l| (l.clone(), avg(&|m: &Metrics| m.per_label.get(l).copied().unwrap_or_default())))
                .collect(),
            macro_avg: avg(&|m: &Metrics| m.macro_avg),
            micro: avg(&|m: &Metrics| m.micro),
            accuracy: avg_f(&|m| m.accuracy),
            support: first.support.clone(),
        })
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Per-label and averaged P/R/F1 plus accuracy.
///
/// Averages run over the labels of `label_set` with non-zero gold support.
/// Predictions outside `label_set` count as errors for the gold label.
pub fn compute_metrics<G, P>(gold: &[G], predicted: &[P], label_set: &[String]) -> Result<Metrics>
where
    G: AsRef<str>,
    P: AsRef<str>,
{
    if gold.len() != predicted.len() || gold.is_empty() {
        return Err(Error::LengthMismatch {
            gold: gold.len(),
            predicted: predicted.len(),
        });
    }
    let mut tp: BTreeMap<&str, usize> = BTreeMap::new();
    let mut fp: BTreeMap<&str, usize> = BTreeMap::new();
    let mut fn_: BTreeMap<&str, usize> = BTreeMap::new();
    let mut correct = 0;
    for (g, p) in gold.iter().zip(predicted) {
        let (g, p) = (g.as_ref(), p.as_ref());
        if g == p {
            correct += 1;
            *tp.entry(g).or_default() += 1;
        } else {
            *fn_.entry(g).or_default() += 1;
            *fp.entry(p).or_default() += 1;
        }
    }

    let count = |m: &BTreeMap<&str, usize>, l: &str| m.get(l).copied().unwrap_or(0);
    let mut per_label = BTreeMap::new();
    let mut support = BTreeMap::new();
    let mut counted = Vec::new();
    let (mut tp_sum, mut fp_sum, mut fn_sum) = (0, 0, 0);
    for label in label_set {
        let (t, f_p, f_n) = (count(&tp, label), count(&fp, label), count(&fn_, label));
        let prf = Prf::from_pr(ratio(t, t + f_p), ratio(t, t + f_n));
        per_label.insert(label.clone(), prf);
        support.insert(label.clone(), t + f_n);
        if t + f_n > 0 {
            counted.push(prf);
            tp_sum += t;
            fp_sum += f_p;
            fn_sum += f_n;
        }
    }

    let k = counted.len();
    let macro_avg = if k == 0 {
        Prf::default()
    } else {
        Prf {
            precision: counted.iter().map(|p| p.precision).sum::<f64>() / k as f64,
            recall: counted.iter().map(|p| p.recall).sum::<f64>() / k as f64,
            f1: counted.iter().map(|p| p.f1).sum::<f64>() / k as f64,
        }
    };
    let micro = Prf::from_pr(ratio(tp_sum, tp_sum + fp_sum), ratio(tp_sum, tp_sum + fn_sum));

    Ok(Metrics {
        per_label,
        macro_avg,
        micro,
        accuracy: ratio(correct, gold.len()),
        support,
    })
}
