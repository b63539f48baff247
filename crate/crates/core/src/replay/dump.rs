//! JSON-lines dump of buffer contents for postmortem inspection.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{PrioritizedBuffer, Transition};
use crate::env::Features;
use crate::error::{Error, Result};

/// One line of a buffer dump.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DumpRecord {
    pub s: Features,
    pub a: usize,
    pub r: f64,
    pub s_next: Features,
    pub discount: f64,
    pub priority: f64,
}

impl DumpRecord {
    pub fn transition(&self) -> Transition {
        Transition {
            s: self.s.clone(),
            a: self.a,
            r: self.r,
            s_next: self.s_next.clone(),
            discount: self.discount,
        }
    }
}

impl PrioritizedBuffer {
    /// Writes one record per stored transition, oldest first.
    pub fn dump_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for slot in self.slots_by_age() {
            let t = self.get(slot).expect("slot in range");
            let rec = DumpRecord {
                s: t.s.clone(),
                a: t.a,
                r: t.r,
                s_next: t.s_next.clone(),
                discount: t.discount,
                priority: self.priority(slot).expect("slot in range"),
            };
            serde_json::to_writer(&mut out, &rec)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

pub fn read_jsonl<R: BufRead>(input: R) -> Result<Vec<DumpRecord>> {
    input
        .lines()
        .enumerate()
        .filter(|(_, l)| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
        .map(|(n, line)| {
            let line = line.map_err(|e| Error::io("<dump>", e))?;
            serde_json::from_str(&line)
                .map_err(|e| Error::Replay(format!("dump line {}: {e}", n + 1)))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dump_has_exact_field_names_and_round_trips() {
        let mut b = PrioritizedBuffer::new(2);
        let t0 = Transition {
            s: Features::Index(3),
            a: 1,
            r: 0.0,
            s_next: Features::Index(4),
            discount: 0.99,
        };
        let t1 = Transition {
            s: Features::Dense(vec![0.5, -0.25]),
            a: 0,
            r: -1.0,
            s_next: Features::Dense(vec![0.75, 0.0]),
            discount: 0.0,
        };
        b.insert(t0.clone(), 0.0).unwrap();
        b.insert(t1.clone(), 2.5).unwrap();
        let mut out = Vec::new();
        b.dump_jsonl(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        let mut keys: Vec<_> = first.as_object().unwrap().keys().cloned().collect();
        keys.sort();
        assert_eq!(keys, ["a", "discount", "priority", "r", "s", "s_next"]);
        let back = read_jsonl(text.as_bytes()).unwrap();
        assert_eq!(back[0].transition(), t0);
        assert_eq!(back[0].priority, 1e-9);
        assert_eq!(back[1].transition(), t1);
        assert_eq!(back[1].priority, 2.5);
    }
}
