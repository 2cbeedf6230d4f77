use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

use super::events::{Event, EventList};

pub const DEFAULT_MEDIAN_WINDOW: usize = 7;

/// Sliding median over time for each class of `[T, K]` probabilities, with
/// the first and last frame replicated past the edges.
pub fn median_filter<S: Scalar>(probs: &Tensor<S>, windows: &[usize]) -> Result<Tensor<S>> {
    let [t, k] = probs.dims2()?;
    if windows.len() != k {
        return Err(Error::invalid(format!("{} median windows for {k} classes", windows.len())));
    }
    if let Some(w) = windows.iter().find(|&&w| w % 2 == 0) {
        return Err(Error::invalid(format!("median window {w} is not odd")));
    }
    let mut out = probs.clone();
    let mut buf = Vec::new();
    for (c, &w) in windows.iter().enumerate() {
        let half = (w / 2) as isize;
        for ti in 0..t {
            buf.clear();
            buf.extend((-half..=half).map(|d| {
                let idx = (ti as isize + d).clamp(0, t as isize - 1) as usize;
                probs.data()[idx * k + c]
            }));
            buf.sort_by(|a, b| a.partial_cmp(b).expect("finite probabilities"));
            out.data_mut()[ti * k + c] = buf[buf.len() / 2];
        }
    }
    Ok(out)
}

/// Maximal runs of frames with probability ≥ `threshold` become events
/// spanning `[start, end) × frame_dur`, clipped to the clip duration.
pub fn decode_events<S: Scalar>(
    probs: &Tensor<S>,
    threshold: f64,
    frame_dur: f64,
    clip_id: &str,
    duration: f64,
) -> Result<EventList> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::invalid(format!("threshold {threshold} outside (0, 1)")));
    }
    let [t, k] = probs.dims2()?;
    let thr = S::of(threshold);
    let mut events = Vec::new();
    for c in 0..k {
        let mut start = None;
        for ti in 0..=t {
            let on = ti < t && probs.data()[ti * k + c] >= thr;
            match (on, start) {
                (true, None) => start = Some(ti),
                (false, Some(s)) => {
                    events.push(Event {
                        class: c,
                        onset: s as f64 * frame_dur,
                        offset: (ti as f64 * frame_dur).min(duration),
                    });
                    start = None;
                }
                _ => {}
            }
        }
    }
    events.sort_by(|a, b| a.onset.total_cmp(&b.onset).then(a.class.cmp(&b.class)));
    EventList::new(clip_id, duration, events)
}
