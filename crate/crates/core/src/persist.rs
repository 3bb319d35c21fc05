//! CSV / JSON encodings of the result types.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::devsim::{BitLocation, BitflipSet, RowId};
use crate::error::{Error, Result};
use crate::montecarlo::{Ensemble, FailureCurve};
use crate::profiler::{HammerGrid, RdtMatrix};
use crate::svard::{Bin, RowThreshold, ThresholdMap};

/// Written in place of a hammer count for rows that never flipped.
pub const ABOVE_GRID: &str = "above-grid";

pub fn write_json<W: Write, T: Serialize>(mut w: W, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    Ok(())
}

pub fn read_json<R: Read, T: for<'de> Deserialize<'de>>(r: R) -> Result<T> {
    Ok(serde_json::from_reader(r)?)
}

/// `bank,row,iteration,measured` with one line per (row, iteration).
pub fn write_rdt_matrix_csv<W: Write>(w: W, m: &RdtMatrix) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["bank", "row", "iteration", "measured"])?;
    for (ri, row) in m.rows.iter().enumerate() {
        for it in 0..m.iterations {
            let measured = m
                .value(ri, it)
                .map_or_else(|| ABOVE_GRID.to_string(), |v| v.to_string());
            out.write_record([row.bank.to_string(), row.row.to_string(), it.to_string(), measured])?;
        }
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlipLogCell {
    pub bank: u32,
    pub row: u32,
    pub iteration: usize,
    pub bits: Vec<u32>,
}

/// Sidecar to the matrix CSV: grid, and the flips seen at every measured point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlipLog {
    pub grid: HammerGrid,
    pub iterations: usize,
    pub cells: Vec<FlipLogCell>,
}

pub fn flip_log(m: &RdtMatrix) -> FlipLog {
    let mut cells = Vec::new();
    for (ri, row) in m.rows.iter().enumerate() {
        for it in 0..m.iterations {
            let f = m.flips(ri, it);
            if !f.is_empty() {
                cells.push(FlipLogCell {
                    bank: row.bank,
                    row: row.row,
                    iteration: it,
                    bits: f.iter().map(|b| b.bit).collect(),
                });
            }
        }
    }
    FlipLog {
        grid: m.grid,
        iterations: m.iterations,
        cells,
    }
}

#[derive(Debug, Deserialize)]
struct MatrixRecord {
    bank: u32,
    row: u32,
    iteration: usize,
    measured: String,
}

pub fn read_rdt_matrix<R: Read, S: Read>(csv_in: R, flip_log_in: S) -> Result<RdtMatrix> {
    let log: FlipLog = read_json(flip_log_in)?;
    let mut rows: Vec<RowId> = Vec::new();
    let mut cells: BTreeMap<(RowId, usize), Option<u64>> = BTreeMap::new();
    for rec in csv::Reader::from_reader(csv_in).deserialize() {
        let rec: MatrixRecord = rec?;
        let id = RowId::new(rec.bank, rec.row);
        if rows.last() != Some(&id) && !rows.contains(&id) {
            rows.push(id);
        }
        let v = if rec.measured == ABOVE_GRID {
            None
        } else {
            Some(
                rec.measured
                    .parse()
                    .map_err(|_| Error::Malformed(format!("measured value {:?}", rec.measured)))?,
            )
        };
        if rec.iteration >= log.iterations || cells.insert((id, rec.iteration), v).is_some() {
            return Err(Error::Malformed(format!("cell {id} iteration {}", rec.iteration)));
        }
    }
    let n = rows.len() * log.iterations;
    if cells.len() != n {
        return Err(Error::Malformed(format!("expected {n} cells, found {}", cells.len())));
    }
    let index: BTreeMap<RowId, usize> = rows.iter().enumerate().map(|(i, r)| (*r, i)).collect();
    let mut values = vec![None; n];
    for ((row, it), v) in cells {
        values[index[&row] * log.iterations + it] = v;
    }
    let mut flips = vec![BitflipSet::empty(); n];
    for c in log.cells {
        let id = RowId::new(c.bank, c.row);
        let ri = *index
            .get(&id)
            .ok_or_else(|| Error::Malformed(format!("flip log row {id} not in matrix")))?;
        if c.iteration >= log.iterations {
            return Err(Error::Malformed(format!("flip log iteration {}", c.iteration)));
        }
        flips[ri * log.iterations + c.iteration] = BitflipSet::from_locations(
            c.bits
                .iter()
                .map(|&bit| BitLocation {
                    bank: c.bank,
                    row: c.row,
                    bit,
                })
                .collect(),
        );
    }
    RdtMatrix::from_parts(rows, log.iterations, log.grid, values, flips)
}

#[derive(Debug, Serialize, Deserialize)]
struct ThresholdRecord {
    bank: u32,
    row: u32,
    threshold: u64,
    bin: String,
    demotions: u32,
}

pub fn write_threshold_map_csv<W: Write>(w: W, map: &ThresholdMap) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for (row, e) in map.iter() {
        out.serialize(ThresholdRecord {
            bank: row.bank,
            row: row.row,
            threshold: e.threshold,
            bin: e.bin.as_str().to_string(),
            demotions: e.demotions,
        })?;
    }
    out.flush()?;
    Ok(())
}

/// Bin thresholds are recovered from undemoted rows of each bin.
pub fn read_threshold_map_csv<R: Read>(r: R, guarded: u64, relaxed: u64) -> Result<ThresholdMap> {
    let mut entries = BTreeMap::new();
    for rec in csv::Reader::from_reader(r).deserialize() {
        let rec: ThresholdRecord = rec?;
        let bin: Bin = rec.bin.parse()?;
        entries.insert(
            RowId::new(rec.bank, rec.row),
            RowThreshold {
                threshold: rec.threshold,
                bin,
                demotions: rec.demotions,
            },
        );
    }
    ThresholdMap::from_entries(guarded, relaxed, entries)
}

/// `epoch,p_fail,label` rows for several labelled curves.
pub fn write_curves_csv<W: Write>(w: W, curves: &[(String, FailureCurve)]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["epoch", "p_fail", "label"])?;
    for (label, c) in curves {
        for (e, p) in c.epochs.iter().zip(&c.p_fail_by) {
            out.write_record([e.to_string(), p.to_string(), label.clone()])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// `trial,epoch,codeword` for every failing trial.
pub fn write_events_csv<W: Write>(w: W, ens: &Ensemble) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["trial", "epoch", "codeword"])?;
    for (trial, e) in ens.events() {
        out.write_record([trial.to_string(), e.epoch.to_string(), e.codeword.to_string()])?;
    }
    out.flush()?;
    Ok(())
}
