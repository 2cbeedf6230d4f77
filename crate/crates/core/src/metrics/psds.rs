//! Intersection-based matching and the polyphonic sound detection score.
//!
//! A detection passes the detection-tolerance criterion when at least `dtc`
//! of its length overlaps same-class references. A reference is detected
//! when DTC-passing detections cover at least `gtc` of it. A detection that
//! fails DTC is a false positive; if at least `cttc` of it overlaps
//! references of another class it is also a cross-trigger on that class.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::CLASSES;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

use super::collar::pair_clips;
use super::events::{Event, EventList};
use super::postproc::decode_events;

#[derive(Clone, Debug, PartialEq)]
pub struct PsdsConfig {
    pub dtc: f64,
    pub gtc: f64,
    pub cttc: f64,
    pub alpha_ct: f64,
    pub alpha_st: f64,
    /// Upper limit of the effective false-positive rate, per hour.
    pub e_max: f64,
    pub thresholds: Vec<f64>,
}

pub const DEFAULT_GRID: usize = 50;

/// `n` evenly spaced bin centres in `(0, 1)`.
pub fn threshold_grid(n: usize) -> Vec<f64> {
    (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect()
}

impl PsdsConfig {
    pub fn scenario1(grid: usize) -> Self {
        PsdsConfig { dtc: 0.7, gtc: 0.7, cttc: 0.3, alpha_ct: 0.0, alpha_st: 1.0, e_max: 100.0, thresholds: threshold_grid(grid) }
    }

    pub fn scenario2(grid: usize) -> Self {
        PsdsConfig { dtc: 0.1, gtc: 0.1, cttc: 0.3, alpha_ct: 0.5, alpha_st: 1.0, e_max: 100.0, thresholds: threshold_grid(grid) }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("dtc", self.dtc), ("gtc", self.gtc), ("cttc", self.cttc)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::config(format!("{name} = {v} outside [0, 1]")));
            }
        }
        if !(self.alpha_ct >= 0.0 && self.alpha_st >= 0.0) {
            return Err(Error::config("alpha_ct and alpha_st must be non-negative"));
        }
        if !(self.e_max > 0.0 && self.e_max.is_finite()) {
            return Err(Error::config("e_max must be positive"));
        }
        if self.thresholds.is_empty() {
            return Err(Error::config("empty threshold grid"));
        }
        if self.thresholds.iter().any(|&t| !(t > 0.0 && t < 1.0))
            || self.thresholds.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::config("thresholds must be strictly increasing inside (0, 1)"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DetectionOutcome {
    pub clip: usize,
    pub event: Event,
    pub passes_dtc: bool,
    /// Other classes this false positive cross-triggers on.
    pub cross_triggers: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceOutcome {
    pub clip: usize,
    pub event: Event,
    pub detected: bool,
}

/// Per-event outcomes; clip indices follow sorted reference clip ids.
#[derive(Clone, Debug, PartialEq)]
pub struct IntersectionResult {
    pub detections: Vec<DetectionOutcome>,
    pub references: Vec<ReferenceOutcome>,
}

impl IntersectionResult {
    pub fn true_positives(&self, class: usize) -> usize {
        self.references.iter().filter(|r| r.event.class == class && r.detected).count()
    }

    pub fn false_positives(&self, class: usize) -> usize {
        self.detections.iter().filter(|d| d.event.class == class && !d.passes_dtc).count()
    }

    /// Cross-triggers of detections of `class` on references of `other`.
    pub fn cross_triggers(&self, class: usize, other: usize) -> usize {
        self.detections
            .iter()
            .filter(|d| d.event.class == class && d.cross_triggers.contains(&other))
            .count()
    }
}

fn overlap_with<'a>(d: &Event, refs: impl Iterator<Item = &'a Event>) -> f64 {
    refs.map(|r| d.overlap(r)).sum()
}

pub fn intersection_match(reference: &[EventList], estimated: &[EventList], cfg: &PsdsConfig) -> Result<IntersectionResult> {
    let mut out = IntersectionResult { detections: Vec::new(), references: Vec::new() };
    for (clip, (r, e)) in pair_clips(reference, estimated)?.into_iter().enumerate() {
        let dets: &[Event] = e.map_or(&[], |e| &e.events);
        let mut passing = Vec::new();
        for d in dets {
            let len = d.duration();
            let same = overlap_with(d, r.of_class(d.class));
            let passes_dtc = same / len >= cfg.dtc;
            let cross_triggers = if passes_dtc {
                Vec::new()
            } else {
                (0..CLASSES.len())
                    .filter(|&c| c != d.class && overlap_with(d, r.of_class(c)) / len >= cfg.cttc)
                    .filter(|&c| r.of_class(c).next().is_some())
                    .collect()
            };
            if passes_dtc {
                passing.push(*d);
            }
            out.detections.push(DetectionOutcome { clip, event: *d, passes_dtc, cross_triggers });
        }
        for g in &r.events {
            let covered = overlap_with(g, passing.iter().filter(|d| d.class == g.class));
            out.references.push(ReferenceOutcome { clip, event: *g, detected: covered / g.duration() >= cfg.gtc });
        }
    }
    Ok(out)
}

/// TPR and effective FPR per evaluated class at one threshold.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatingPoint {
    pub threshold: f64,
    pub tpr: Vec<f64>,
    pub efpr: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PsdsResult {
    pub score: f64,
    /// Classes with at least one reference event, in index order.
    pub classes: Vec<usize>,
    pub operating_points: Vec<OperatingPoint>,
}

struct ClassStats {
    classes: Vec<usize>,
    n_refs: Vec<usize>,
    ref_hours: Vec<f64>,
    hours: f64,
}

impl ClassStats {
    fn new(reference: &[EventList]) -> Result<Self> {
        if reference.is_empty() {
            return Err(Error::invalid("empty dataset"));
        }
        let n_refs: Vec<usize> = (0..CLASSES.len())
            .map(|c| reference.iter().map(|r| r.of_class(c).count()).sum())
            .collect();
        let ref_hours = (0..CLASSES.len())
            .map(|c| reference.iter().flat_map(|r| r.of_class(c)).map(Event::duration).sum::<f64>() / 3600.0)
            .collect();
        let classes: Vec<usize> = (0..CLASSES.len()).filter(|&c| n_refs[c] > 0).collect();
        for c in (0..CLASSES.len()).filter(|&c| n_refs[c] == 0) {
            log::warn!("class {} has no reference events; excluded from PSDS", CLASSES[c]);
        }
        if classes.is_empty() {
            return Err(Error::invalid("no class has reference events"));
        }
        let hours = reference.iter().map(|r| r.duration).sum::<f64>() / 3600.0;
        Ok(ClassStats { classes, n_refs, ref_hours, hours })
    }

    fn operating_point(
        &self,
        reference: &[EventList],
        estimated: &[EventList],
        cfg: &PsdsConfig,
        threshold: f64,
    ) -> Result<OperatingPoint> {
        let m = intersection_match(reference, estimated, cfg)?;
        let tpr = self.classes.iter().map(|&c| m.true_positives(c) as f64 / self.n_refs[c] as f64).collect();
        let efpr = self
            .classes
            .iter()
            .map(|&c| {
                let fpr = m.false_positives(c) as f64 / self.hours;
                let others: Vec<f64> = self
                    .classes
                    .iter()
                    .filter(|&&o| o != c)
                    .map(|&o| m.cross_triggers(c, o) as f64 / self.ref_hours[o])
                    .collect();
                let ctr = if others.is_empty() { 0.0 } else { others.iter().sum::<f64>() / others.len() as f64 };
                fpr + cfg.alpha_ct * ctr
            })
            .collect();
        Ok(OperatingPoint { threshold, tpr, efpr })
    }
}

/// Scores `(reference, [T, K] probabilities)` pairs. Each probability
/// matrix is thresholded at every grid point, decoded into events and matched.
pub fn psds<S: Scalar>(dataset: &[(EventList, Tensor<S>)], frame_dur: f64, cfg: &PsdsConfig) -> Result<PsdsResult> {
    cfg.validate()?;
    let reference: Vec<EventList> = dataset.iter().map(|(r, _)| r.clone()).collect();
    let stats = ClassStats::new(&reference)?;
    let operating_points = cfg
        .thresholds
        .par_iter()
        .map(|&thr| {
            let est = dataset
                .iter()
                .map(|(r, p)| decode_events(p, thr, frame_dur, &r.clip_id, r.duration))
                .collect::<Result<Vec<_>>>()?;
            stats.operating_point(&reference, &est, cfg, thr)
        })
        .collect::<Result<Vec<_>>>()?;
    let score = psds_from_operating_points(&operating_points, cfg.alpha_st, cfg.e_max)?;
    Ok(PsdsResult { score, classes: stats.classes, operating_points })
}

/// PSDS of fixed (already thresholded) detections: a single operating point.
pub fn psds_from_events(reference: &[EventList], estimated: &[EventList], cfg: &PsdsConfig) -> Result<PsdsResult> {
    cfg.validate()?;
    let stats = ClassStats::new(reference)?;
    let point = stats.operating_point(reference, estimated, cfg, f64::NAN)?;
    let score = psds_from_operating_points(std::slice::from_ref(&point), cfg.alpha_st, cfg.e_max)?;
    Ok(PsdsResult { score, classes: stats.classes, operating_points: vec![point] })
}

/// Normalized area under `mean(TPR) − α_st·std(TPR)` (clipped at 0) for
/// `eFPR ∈ [0, e_max]`, where each class's TPR at rate `e` is the best TPR
/// among operating points whose eFPR does not exceed `e`.
pub fn psds_from_operating_points(points: &[OperatingPoint], alpha_st: f64, e_max: f64) -> Result<f64> {
    let k = points.first().map_or(0, |p| p.tpr.len());
    if k == 0 || points.iter().any(|p| p.tpr.len() != k || p.efpr.len() != k) {
        return Err(Error::invalid("operating points need equal, non-zero class counts"));
    }
    let mut cuts: Vec<f64> = points.iter().flat_map(|p| p.efpr.iter().copied()).filter(|&e| e < e_max).collect();
    cuts.push(0.0);
    cuts.push(e_max);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut area = 0.0;
    for w in cuts.windows(2) {
        let e = w[0];
        let tprs: Vec<f64> = (0..k)
            .map(|c| points.iter().filter(|p| p.efpr[c] <= e).map(|p| p.tpr[c]).fold(0.0, f64::max))
            .collect();
        let mean = tprs.iter().sum::<f64>() / k as f64;
        let var = tprs.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / k as f64;
        area += (mean - alpha_st * var.sqrt()).max(0.0) * (w[1] - w[0]);
    }
    Ok(area / e_max)
}
