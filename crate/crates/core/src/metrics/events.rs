use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::model::CLASSES;

pub const TSV_HEADER: &str = "filename\tonset\toffset\tevent_label";

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Event {
    pub class: usize,
    pub onset: f64,
    pub offset: f64,
}

impl Event {
    pub fn duration(&self) -> f64 {
        self.offset - self.onset
    }

    /// Length of the overlap with `[onset, offset]`.
    pub fn overlap(&self, other: &Event) -> f64 {
        (self.offset.min(other.offset) - self.onset.max(other.onset)).max(0.0)
    }
}

/// Events of one clip.
#[derive(Clone, Debug, PartialEq)]
pub struct EventList {
    pub clip_id: String,
    pub duration: f64,
    pub events: Vec<Event>,
}

impl EventList {
    pub fn new(clip_id: impl Into<String>, duration: f64, events: Vec<Event>) -> Result<Self> {
        let clip_id = clip_id.into();
        if !(duration > 0.0) || !duration.is_finite() {
            return Err(Error::invalid(format!("clip {clip_id}: duration {duration}")));
        }
        for e in &events {
            if e.class >= CLASSES.len() {
                return Err(Error::invalid(format!("clip {clip_id}: class id {}", e.class)));
            }
            if !(0.0 <= e.onset && e.onset < e.offset && e.offset <= duration) {
                return Err(Error::invalid(format!(
                    "clip {clip_id}: event [{}, {}] outside 0 ≤ onset < offset ≤ {duration}",
                    e.onset, e.offset
                )));
            }
        }
        Ok(EventList { clip_id, duration, events })
    }

    pub fn empty(clip_id: impl Into<String>, duration: f64) -> Self {
        EventList { clip_id: clip_id.into(), duration, events: Vec::new() }
    }

    pub fn of_class(&self, class: usize) -> impl Iterator<Item = &Event> {
        self.events.iter().filter(move |e| e.class == class)
    }
}

pub fn class_index(name: &str) -> Result<usize> {
    CLASSES
        .iter()
        .position(|c| *c == name)
        .ok_or_else(|| Error::format(format!("unknown class {name:?}")))
}

/// Parses DESED-style TSV. A line carrying only a filename declares a clip
/// without events. Every clip gets `duration`.
pub fn parse_tsv(text: &str, duration: f64) -> Result<Vec<EventList>> {
    let mut clips: BTreeMap<String, Vec<Event>> = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || (i == 0 && line.starts_with("filename")) {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let clip = fields[0].trim().to_string();
        if clip.is_empty() {
            return Err(Error::format(format!("line {}: missing filename", i + 1)));
        }
        let entry = clips.entry(clip).or_default();
        let rest: Vec<&str> = fields[1..].iter().map(|s| s.trim()).collect();
        if rest.iter().all(|s| s.is_empty()) {
            continue;
        }
        if rest.len() != 3 {
            return Err(Error::format(format!("line {}: expected 4 tab-separated fields", i + 1)));
        }
        let num = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| Error::format(format!("line {}: bad time {s:?}", i + 1)))
        };
        entry.push(Event { class: class_index(rest[2])?, onset: num(rest[0])?, offset: num(rest[1])? });
    }
    clips.into_iter().map(|(id, ev)| EventList::new(id, duration, ev)).collect()
}

/// Writes every clip; clips without events appear as a bare filename line.
pub fn format_tsv(lists: &[EventList]) -> String {
    let mut out = String::from(TSV_HEADER);
    out.push('\n');
    for list in lists {
        if list.events.is_empty() {
            let _ = writeln!(out, "{}\t\t\t", list.clip_id);
        }
        for e in &list.events {
            let _ = writeln!(out, "{}\t{:.3}\t{:.3}\t{}", list.clip_id, e.onset, e.offset, CLASSES[e.class]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tsv_round_trip_keeps_empty_clips() {
        let lists = vec![
            EventList::new("a.wav", 10.0, vec![Event { class: 8, onset: 0.5, offset: 1.25 }]).unwrap(),
            EventList::empty("b.wav", 10.0),
        ];
        let text = format_tsv(&lists);
        assert!(text.starts_with("filename\tonset\toffset\tevent_label\n"));
        assert_eq!(parse_tsv(&text, 10.0).unwrap(), lists);
    }

    #[test]
    fn invalid_events_are_rejected() {
        assert!(EventList::new("x", 10.0, vec![Event { class: 0, onset: 2.0, offset: 2.0 }]).is_err());
        assert!(EventList::new("x", 10.0, vec![Event { class: 10, onset: 0.0, offset: 1.0 }]).is_err());
        assert!(parse_tsv("x\t0\t1\tGoat\n", 10.0).is_err());
    }
}
