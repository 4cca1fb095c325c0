//! Convergence trace records and their CSV form.

use std::io;

use serde::{Deserialize, Serialize};

pub const CSV_HEADER: &str = "wall_ms,event,ub,lb,gap,node_id,cut_round";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TraceEvent {
    NodeSolved,
    CutAdded,
    IncumbentUpdated,
    NodeFathomed,
    StoreRefresh,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub wall_ms: f64,
    pub event: TraceEvent,
    pub ub: f64,
    pub lb: f64,
    pub gap: f64,
    pub node_id: Option<usize>,
    pub cut_round: Option<usize>,
}

/// `|ub - lb| / |lb|`, infinite when undefined.
pub fn relative_gap(ub: f64, lb: f64) -> f64 {
    if !ub.is_finite() || !lb.is_finite() {
        return f64::INFINITY;
    }
    let diff = (ub - lb).abs();
    if diff == 0.0 {
        0.0
    } else if lb == 0.0 {
        f64::INFINITY
    } else {
        diff / lb.abs()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTrace {
    pub records: Vec<TraceRecord>,
}

impl ConvergenceTrace {
    pub fn push(
        &mut self,
        wall_ms: f64,
        event: TraceEvent,
        ub: f64,
        lb: f64,
        node_id: Option<usize>,
        cut_round: Option<usize>,
    ) {
        self.records.push(TraceRecord {
            wall_ms,
            event,
            ub,
            lb,
            gap: relative_gap(ub, lb),
            node_id,
            cut_round,
        });
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn write_csv<W: io::Write>(&self, writer: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(writer);
        if self.records.is_empty() {
            w.write_record(CSV_HEADER.split(','))?;
        }
        for r in &self.records {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is utf-8")
    }

    pub fn read_csv<R: io::Read>(reader: R) -> Result<Self, csv::Error> {
        let mut r = csv::Reader::from_reader(reader);
        let records = r.deserialize().collect::<Result<Vec<TraceRecord>, _>>()?;
        Ok(Self { records })
    }

    /// First failing record index for the bound invariants, if any.
    pub fn check_monotone(&self, slack: f64) -> Result<(), String> {
        let mut prev: Option<&TraceRecord> = None;
        for (i, r) in self.records.iter().enumerate() {
            if r.lb > r.ub + slack {
                return Err(format!("record {i}: lb {} above ub {}", r.lb, r.ub));
            }
            if let Some(p) = prev {
                if r.lb < p.lb - slack {
                    return Err(format!("record {i}: lb dropped {} -> {}", p.lb, r.lb));
                }
                if r.ub > p.ub + slack {
                    return Err(format!("record {i}: ub rose {} -> {}", p.ub, r.ub));
                }
                if r.wall_ms < p.wall_ms {
                    return Err(format!("record {i}: time went backwards"));
                }
            }
            prev = Some(r);
        }
        Ok(())
    }
}
