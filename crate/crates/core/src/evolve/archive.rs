//! Insertion-only archive of measured non-dominated genomes.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::eval::EvaluationRecord;
use crate::evolve::nsga::dominates;
use crate::genome::Genome;
use crate::metrics::hypervolume_2d;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArchiveEntry {
    pub genome: Genome,
    pub f1: f64,
    pub f2: f64,
}

impl ArchiveEntry {
    pub fn pair(&self) -> (f64, f64) {
        (self.f1, self.f2)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ParetoArchive {
    pub members: Vec<ArchiveEntry>,
    /// Fixed once set; points beyond it add no volume.
    pub reference: Option<(f64, f64)>,
    /// Hypervolume after each completed search iteration.
    pub history: Vec<f64>,
}

impl ParetoArchive {
    /// Reference point from measured records: 1.1 times the componentwise
    /// maximum over non-degenerate ones.
    pub fn reference_from(records: &[EvaluationRecord]) -> (f64, f64) {
        let live = records.iter().filter(|r| !r.degenerate);
        let (m1, m2) = live.fold((0.0f64, 0.0f64), |(a, b), r| (a.max(r.f1), b.max(r.f2)));
        let widen = |m: f64| if m > 0.0 { 1.1 * m } else { 1.0 };
        (widen(m1), widen(m2))
    }

    /// Inserts a measured record unless it is degenerate, dominated or
    /// already present. Members it dominates are dropped. Returns whether it
    /// entered.
    pub fn insert(&mut self, record: &EvaluationRecord) -> bool {
        if record.degenerate {
            return false;
        }
        let p = (record.f1, record.f2);
        let blocked = self.members.iter().any(|m| {
            dominates(m.pair(), p) || (m.pair() == p && m.genome.genes() == record.genome.genes())
        });
        if blocked {
            return false;
        }
        self.members.retain(|m| !dominates(p, m.pair()));
        self.members.push(ArchiveEntry {
            genome: record.genome.clone(),
            f1: record.f1,
            f2: record.f2,
        });
        true
    }

    /// Volume dominated by the members inside the reference box.
    pub fn hypervolume(&self) -> Result<f64> {
        let Some(r) = self.reference else {
            return Ok(0.0);
        };
        let inside: Vec<(f64, f64)> = self
            .members
            .iter()
            .map(ArchiveEntry::pair)
            .filter(|p| p.0 <= r.0 && p.1 <= r.1)
            .collect();
        hypervolume_2d(&inside, r)
    }

    pub fn record_iteration(&mut self) -> Result<f64> {
        let v = self.hypervolume()?;
        self.history.push(v);
        Ok(v)
    }

    /// Member with the lowest f1; ties go to the lowest f2, then the oldest.
    pub fn lowest_loss(&self) -> Option<&ArchiveEntry> {
        self.members.iter().reduce(|best, m| {
            if (m.f1, m.f2) < (best.f1, best.f2) {
                m
            } else {
                best
            }
        })
    }

    /// One JSON object per line, sorted by f1 then f2.
    pub fn to_jsonl(&self) -> Result<String> {
        let mut sorted: Vec<&ArchiveEntry> = self.members.iter().collect();
        sorted.sort_by(|a, b| a.f1.total_cmp(&b.f1).then(a.f2.total_cmp(&b.f2)));
        let mut out = String::new();
        for m in sorted {
            out.push_str(&serde_json::to_string(m)?);
            out.push('\n');
        }
        Ok(out)
    }
}
