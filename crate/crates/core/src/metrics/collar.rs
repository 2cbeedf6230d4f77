use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::CLASSES;

use super::events::{Event, EventList};

pub const DEFAULT_COLLAR: f64 = 0.2;
/// Offset tolerance as a fraction of the reference duration.
pub const OFFSET_FRACTION: f64 = 0.2;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ClassCounts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl ClassCounts {
    /// `2TP / (2TP + FP + FN)`; `None` when the class never occurs.
    pub fn f1(&self) -> Option<f64> {
        let denom = 2 * self.tp + self.fp + self.fn_;
        (denom > 0).then(|| 2.0 * self.tp as f64 / denom as f64)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct F1Report {
    pub per_class: Vec<ClassCounts>,
    /// Mean F1 over classes with at least one reference or estimate.
    pub macro_f1: Option<f64>,
}

pub fn collar_match(reference: &Event, estimate: &Event, collar: f64) -> bool {
    reference.class == estimate.class
        && (reference.onset - estimate.onset).abs() <= collar
        && (reference.offset - estimate.offset).abs() <= collar.max(OFFSET_FRACTION * reference.duration())
}

fn dedup(mut v: Vec<Event>) -> Vec<Event> {
    v.sort_by(|a, b| a.onset.total_cmp(&b.onset).then(a.offset.total_cmp(&b.offset)));
    v.dedup();
    v
}

/// Pairs clips by id. Estimates for clips absent from the reference set are an
/// error; reference clips without estimates score as empty predictions.
pub(crate) fn pair_clips<'a>(
    reference: &'a [EventList],
    estimated: &'a [EventList],
) -> Result<Vec<(&'a EventList, Option<&'a EventList>)>> {
    let est: BTreeMap<&str, &EventList> = estimated.iter().map(|l| (l.clip_id.as_str(), l)).collect();
    let refs: BTreeMap<&str, &EventList> = reference.iter().map(|l| (l.clip_id.as_str(), l)).collect();
    if refs.len() != reference.len() {
        return Err(Error::invalid("duplicate clip ids in the reference set"));
    }
    if let Some(extra) = est.keys().find(|k| !refs.contains_key(*k)) {
        return Err(Error::invalid(format!("estimated clip {extra:?} has no reference")));
    }
    Ok(refs.into_values().map(|r| (r, est.get(r.clip_id.as_str()).copied())).collect())
}

/// Collar-based F1 with greedy one-to-one matching in onset order.
pub fn collar_f1(reference: &[EventList], estimated: &[EventList], collar: f64) -> Result<F1Report> {
    if !(collar >= 0.0) {
        return Err(Error::invalid(format!("collar {collar}")));
    }
    let mut per_class = vec![ClassCounts::default(); CLASSES.len()];
    for (r, e) in pair_clips(reference, estimated)? {
        for (class, counts) in per_class.iter_mut().enumerate() {
            let refs = dedup(r.of_class(class).copied().collect());
            let ests = dedup(e.map(|e| e.of_class(class).copied().collect()).unwrap_or_default());
            let mut used = vec![false; refs.len()];
            for est in &ests {
                let hit = refs.iter().enumerate().find(|(i, rf)| !used[*i] && collar_match(rf, est, collar));
                match hit {
                    Some((i, _)) => {
                        used[i] = true;
                        counts.tp += 1;
                    }
                    None => counts.fp += 1,
                }
            }
            counts.fn_ += used.iter().filter(|u| !**u).count();
        }
    }
    let scores: Vec<f64> = per_class.iter().filter_map(ClassCounts::f1).collect();
    let macro_f1 = (!scores.is_empty()).then(|| scores.iter().sum::<f64>() / scores.len() as f64);
    Ok(F1Report { per_class, macro_f1 })
}
