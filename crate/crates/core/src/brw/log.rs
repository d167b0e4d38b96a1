//! Event log of a run and its line-delimited text form.
//!
//! The text form is one header comment, one column header and one event per
//! line:
//!
//! ```text
//! # dim 1 start 0.0000000000000000e0 end 5.0000000000000000e0
//! time,kind,particle,site
//! 0.0000000000000000e0,start,0,0
//! 3.1250000000000000e-1,jump,0,1
//! ```
//!
//! Times carry 17 significant digits so they parse back to the same double.
//! Particle ids are dotted child-index paths; sites are colon-separated
//! coordinates. A `branch` line is followed by one `birth` line per child.
//! `disaster` is written once per killed particle. `exit` records removal by
//! truncation and carries the site the particle jumped to.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use super::engine::SnapshotFlavor;
use super::{Configuration, ParticleId};
use crate::error::{Error, Result};
use crate::lattice::Site;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EventKind {
    Start,
    Jump,
    Branch,
    Birth,
    Disaster,
    Exit,
}

impl EventKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EventKind::Start => "start",
            EventKind::Jump => "jump",
            EventKind::Branch => "branch",
            EventKind::Birth => "birth",
            EventKind::Disaster => "disaster",
            EventKind::Exit => "exit",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EventKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Ok(match s {
            "start" => EventKind::Start,
            "jump" => EventKind::Jump,
            "branch" => EventKind::Branch,
            "birth" => EventKind::Birth,
            "disaster" => EventKind::Disaster,
            "exit" => EventKind::Exit,
            _ => return Err(format!("unknown event kind `{s}`")),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
    pub particle: ParticleId,
    /// Site after the event (for `exit`, the site outside the region).
    pub site: Site,
}

/// Events of one run over `[start_time, end_time]`, in processing order.
#[derive(Clone, Debug, PartialEq)]
pub struct EventLog {
    pub dim: usize,
    pub start_time: f64,
    pub end_time: f64,
    pub events: Vec<Event>,
}

pub fn write_event_log<W: Write>(log: &EventLog, mut w: W) -> io::Result<()> {
    writeln!(
        w,
        "# dim {} start {:.16e} end {:.16e}",
        log.dim, log.start_time, log.end_time
    )?;
    writeln!(w, "time,kind,particle,site")?;
    for e in &log.events {
        writeln!(w, "{:.16e},{},{},{}", e.time, e.kind, e.particle, e.site)?;
    }
    Ok(())
}

fn parse_err(line: usize, reason: impl Into<String>) -> Error {
    Error::Parse {
        line,
        reason: reason.into(),
    }
}

pub fn parse_event_log(text: &str) -> Result<EventLog> {
    let mut header: Option<(usize, f64, f64)> = None;
    let mut events = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let n = i + 1;
        let line = raw.trim();
        if line.is_empty() || line == "time,kind,particle,site" {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let parts: Vec<&str> = rest.split_whitespace().collect();
            if let ["dim", d, "start", s, "end", e] = parts[..] {
                let d = d.parse().map_err(|_| parse_err(n, "bad dimension"))?;
                let s = s.parse().map_err(|_| parse_err(n, "bad start time"))?;
                let e = e.parse().map_err(|_| parse_err(n, "bad end time"))?;
                header = Some((d, s, e));
            }
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 4 {
            return Err(parse_err(n, format!("expected 4 fields, found {}", f.len())));
        }
        events.push(Event {
            time: f[0].parse().map_err(|_| parse_err(n, format!("bad time `{}`", f[0])))?,
            kind: f[1].parse().map_err(|e: String| parse_err(n, e))?,
            particle: f[2].parse().map_err(|e: String| parse_err(n, e))?,
            site: f[3].parse().map_err(|e: Error| parse_err(n, e.to_string()))?,
        });
    }
    let (dim, start_time, end_time) =
        header.ok_or_else(|| parse_err(1, "missing `# dim .. start .. end ..` header"))?;
    Ok(EventLog {
        dim,
        start_time,
        end_time,
        events,
    })
}

/// Site counts at `t` obtained by replaying the log.
pub fn replay_counts(log: &EventLog, t: f64, flavor: SnapshotFlavor) -> Result<Configuration> {
    let mut at: BTreeMap<&ParticleId, Site> = BTreeMap::new();
    for e in &log.events {
        let applies = match flavor {
            SnapshotFlavor::LeftLimit => e.time < t,
            SnapshotFlavor::AtTime => e.time <= t,
        };
        if !applies {
            break;
        }
        match e.kind {
            EventKind::Start | EventKind::Birth | EventKind::Jump => {
                at.insert(&e.particle, e.site);
            }
            EventKind::Branch | EventKind::Disaster | EventKind::Exit => {
                at.remove(&e.particle);
            }
        }
    }
    let mut c = Configuration::new();
    for s in at.values() {
        c.add(*s, 1);
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::brw::{simulate, site_counts, BrwParams, RecordLevel, SimOptions};
    use crate::env::DisasterField;

    fn run() -> (EventLog, Vec<crate::brw::Snapshot>, Vec<f64>) {
        let params = BrwParams::new(1.0, 1.0, vec![0.3, 0.0, 0.5, 0.2], 0.5, 2).unwrap();
        let mut env = DisasterField::new(5, 0.5, 2).unwrap().environment();
        let times = vec![0.5, 1.0, 2.0, 3.0];
        let opts = SimOptions::new(3.0)
            .snapshots(&times, SnapshotFlavor::LeftLimit, true)
            .recording(RecordLevel::Full);
        let res = simulate(&params, &Configuration::single(Site::origin(2), 3), &mut env, 17, &opts).unwrap();
        (res.log.unwrap(), res.snapshots, times)
    }

    #[test]
    fn text_roundtrip_is_exact() {
        let (log, _, _) = run();
        let mut buf = Vec::new();
        write_event_log(&log, &mut buf).unwrap();
        let back = parse_event_log(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(back, log);
    }

    #[test]
    fn replay_matches_snapshots() {
        let (log, snaps, times) = run();
        for (s, &t) in snaps.iter().zip(&times) {
            assert_eq!(
                replay_counts(&log, t, SnapshotFlavor::LeftLimit).unwrap(),
                site_counts(s)
            );
        }
    }

    #[test]
    fn parse_rejects_garbage() {
        assert!(parse_event_log("time,kind,particle,site\n1,jump,0,0\n").is_err());
        assert!(parse_event_log("# dim 1 start 0 end 1\n1,leap,0,0\n").is_err());
        assert!(parse_event_log("# dim 1 start 0 end 1\n1,jump,0\n").is_err());
    }
}
