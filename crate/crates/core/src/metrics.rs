//! Classification view of a selection against the true top `k`.

use serde::{Deserialize, Serialize};

use crate::domain::{Instance, SelectionResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    pub ppv: f64,
    pub tpr: f64,
    pub fpr: f64,
    /// Set when nothing was selected; `ppv` is then reported as 1.
    pub ppv_undefined: bool,
}

pub fn confusion(instance: &Instance, selection: &SelectionResult) -> ConfusionCounts {
    let k = instance.k();
    let tp = selection
        .accepted
        .iter()
        .filter(|&&j| instance.in_top_k(j))
        .count();
    let fp = selection.size() - tp;
    ConfusionCounts {
        tp,
        fp,
        tn: instance.n() - k - fp,
        fn_: k - tp,
    }
}

pub fn rates(counts: &ConfusionCounts) -> Rates {
    let ratio = |num: usize, den: usize| {
        if den == 0 {
            0.0
        } else {
            num as f64 / den as f64
        }
    };
    let selected = counts.tp + counts.fp;
    Rates {
        ppv: if selected == 0 {
            1.0
        } else {
            ratio(counts.tp, selected)
        },
        tpr: ratio(counts.tp, counts.tp + counts.fn_),
        fpr: ratio(counts.fp, counts.tn + counts.fp),
        ppv_undefined: selected == 0,
    }
}
