//! Trajectory CSV: one row per transition,
//! `instance_id, episode, t, s0.., action, reward, next0.., done`.

use std::path::Path;

use crate::error::{HipError, Result};
use crate::model::{InstanceBatch, State, TransitionTuple};

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRow {
    pub instance: usize,
    pub episode: usize,
    pub t: usize,
    pub s: State,
    pub action: usize,
    pub reward: f64,
    pub s_next: State,
    pub done: bool,
}

impl TrajectoryRow {
    pub fn tuple(&self) -> TransitionTuple {
        TransitionTuple::new(self.s.clone(), self.action, self.s_next.clone(), self.reward)
    }
}

fn csv_err(path: &Path, e: csv::Error) -> HipError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => HipError::io(path, io),
        other => HipError::invalid(format!("{}: {other:?}", path.display())),
    }
}

pub fn write_trajectories(path: &Path, rows: &[TrajectoryRow]) -> Result<()> {
    let dim = rows.first().map_or(0, |r| r.s.len());
    if rows.iter().any(|r| r.s.len() != dim || r.s_next.len() != dim) {
        return Err(HipError::invalid("trajectory rows have mixed state dimensions"));
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut header = vec!["instance_id".to_string(), "episode".into(), "t".into()];
    header.extend((0..dim).map(|d| format!("s{d}")));
    header.extend(["action".to_string(), "reward".into()]);
    header.extend((0..dim).map(|d| format!("next{d}")));
    header.push("done".into());
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for r in rows {
        let mut rec = vec![r.instance.to_string(), r.episode.to_string(), r.t.to_string()];
        rec.extend(r.s.iter().map(f64::to_string));
        rec.extend([r.action.to_string(), r.reward.to_string()]);
        rec.extend(r.s_next.iter().map(f64::to_string));
        rec.push(u8::from(r.done).to_string());
        w.write_record(&rec).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| HipError::io(path, e))
}

pub fn read_trajectories(path: &Path) -> Result<Vec<TrajectoryRow>> {
    let mut rd = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let cols = rd.headers().map_err(|e| csv_err(path, e))?.len();
    if cols < 6 || (cols - 6) % 2 != 0 {
        return Err(HipError::invalid(format!("{}: unexpected column count {cols}", path.display())));
    }
    let dim = (cols - 6) / 2;
    let bad = |line: usize, what: &str| HipError::invalid(format!("{}:{line}: bad {what}", path.display()));
    let mut out = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = i + 2;
        let int = |j: usize, what: &str| rec[j].parse::<usize>().map_err(|_| bad(line, what));
        let num = |j: usize, what: &str| rec[j].parse::<f64>().map_err(|_| bad(line, what));
        let s = (0..dim).map(|d| num(3 + d, "state")).collect::<Result<Vec<_>>>()?;
        let s_next = (0..dim).map(|d| num(5 + dim + d, "next state")).collect::<Result<Vec<_>>>()?;
        out.push(TrajectoryRow {
            instance: int(0, "instance_id")?,
            episode: int(1, "episode")?,
            t: int(2, "t")?,
            s,
            action: int(3 + dim, "action")?,
            reward: num(4 + dim, "reward")?,
            s_next,
            done: match &rec[cols - 1] {
                "0" => false,
                "1" => true,
                _ => return Err(bad(line, "done flag")),
            },
        });
    }
    Ok(out)
}

/// Group rows into one batch per instance id, in order of first appearance.
pub fn batches_from_rows(rows: &[TrajectoryRow]) -> Vec<InstanceBatch> {
    let mut out: Vec<InstanceBatch> = Vec::new();
    for r in rows {
        match out.iter_mut().find(|b| b.id == r.instance) {
            Some(b) => b.tuples.push(r.tuple()),
            None => out.push(InstanceBatch::new(r.instance, vec![r.tuple()])),
        }
    }
    out
}
