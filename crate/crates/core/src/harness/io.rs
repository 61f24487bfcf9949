//! CSV files for tasks, workers, assignments and raw trajectories.
//!
//! | file        | columns                       |
//! |-------------|-------------------------------|
//! | tasks       | `id,x,y,s,e,beta`             |
//! | workers     | `id,x,y,v,alo,ahi,p`          |
//! | assignments | `worker,task,arrival,angle`   |
//! | trajectory  | `wid,t,x,y`                   |

use std::f64::consts::TAU;
use std::io::{Read, Write};

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{minimal_arc, CandidatePair, Point, Task, TaskId, Worker, WorkerId};
use crate::objective::Assignment;

/// Narrowest cone given to a worker whose trajectory is a straight line.
pub const MIN_CONE_WIDTH: f64 = 1e-3;

#[derive(Debug, Serialize, Deserialize)]
struct TaskRow {
    id: u32,
    x: f64,
    y: f64,
    s: f64,
    e: f64,
    beta: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct WorkerRow {
    id: u32,
    x: f64,
    y: f64,
    v: f64,
    alo: f64,
    ahi: f64,
    p: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct AssignmentRow {
    worker: u32,
    task: u32,
    arrival: f64,
    angle: f64,
}

#[derive(Debug, Deserialize)]
struct TrajectoryRow {
    wid: u32,
    t: f64,
    x: f64,
    y: f64,
}

fn write_rows<W: Write, T: Serialize>(out: W, header: &[&str], rows: impl Iterator<Item = T>) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn read_rows<R: Read, T: for<'de> Deserialize<'de>>(input: R) -> Result<Vec<T>> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

pub fn write_tasks<W: Write>(out: W, tasks: &[Task]) -> Result<()> {
    write_rows(
        out,
        &["id", "x", "y", "s", "e", "beta"],
        tasks.iter().map(|t| TaskRow { id: t.id.0, x: t.location.x, y: t.location.y, s: t.start, e: t.end, beta: t.beta }),
    )
}

pub fn read_tasks<R: Read>(input: R) -> Result<Vec<Task>> {
    read_rows::<_, TaskRow>(input)?.into_iter().map(|r| Task::new(TaskId(r.id), Point::new(r.x, r.y), r.s, r.e, r.beta)).collect()
}

pub fn write_workers<W: Write>(out: W, workers: &[Worker]) -> Result<()> {
    write_rows(
        out,
        &["id", "x", "y", "v", "alo", "ahi", "p"],
        workers.iter().map(|w| WorkerRow {
            id: w.id.0,
            x: w.location.x,
            y: w.location.y,
            v: w.velocity,
            alo: w.angle_lo,
            ahi: w.angle_hi,
            p: w.confidence,
        }),
    )
}

pub fn read_workers<R: Read>(input: R) -> Result<Vec<Worker>> {
    read_rows::<_, WorkerRow>(input)?
        .into_iter()
        .map(|r| Worker::new(WorkerId(r.id), Point::new(r.x, r.y), r.v, r.alo, r.ahi, r.p))
        .collect()
}

pub fn write_assignment<W: Write>(out: W, assignment: &Assignment) -> Result<()> {
    write_rows(
        out,
        &["worker", "task", "arrival", "angle"],
        assignment.pairs().map(|p| AssignmentRow { worker: p.worker.0, task: p.task.0, arrival: p.arrival, angle: p.angle }),
    )
}

pub fn read_assignment<R: Read>(input: R) -> Result<Assignment> {
    let mut a = Assignment::new();
    for r in read_rows::<_, AssignmentRow>(input)? {
        a.insert(CandidatePair { task: TaskId(r.task), worker: WorkerId(r.worker), arrival: r.arrival, angle: r.angle })?;
    }
    Ok(a)
}

/// Workers derived from trajectories: located at their first point, moving
/// at total path length over elapsed time, with the narrowest cone (seen from
/// the first point) holding every later point. Rows must be sorted by
/// `(wid, t)`; trajectories with one point or no elapsed time are skipped.
pub fn ingest_trajectories<R: Read>(input: R, confidence: f64) -> Result<Vec<Worker>> {
    let rows: Vec<TrajectoryRow> = read_rows(input)?;
    for w in rows.windows(2) {
        if (w[1].wid, w[1].t) < (w[0].wid, w[0].t) || (w[1].wid == w[0].wid && w[1].t == w[0].t) {
            return Err(Error::Format(format!(
                "trajectory rows must be sorted by (wid, t): ({}, {}) follows ({}, {})",
                w[1].wid, w[1].t, w[0].wid, w[0].t
            )));
        }
    }
    let mut workers = Vec::new();
    for track in rows.chunk_by(|a, b| a.wid == b.wid) {
        let id = WorkerId(track[0].wid);
        if track.len() < 2 {
            warn!("skipping {id}: single-point trajectory");
            continue;
        }
        let elapsed = track[track.len() - 1].t - track[0].t;
        if elapsed <= 0.0 {
            warn!("skipping {id}: no elapsed time");
            continue;
        }
        let pts: Vec<Point> = track.iter().map(|r| Point::new(r.x, r.y)).collect();
        let length: f64 = pts.windows(2).map(|w| w[0].distance(&w[1])).sum();
        if length <= 0.0 {
            warn!("skipping {id}: worker never moves");
            continue;
        }
        let start = pts[0];
        let bearings: Vec<f64> = pts[1..].iter().filter(|p| **p != start).map(|p| start.bearing_to(p)).collect();
        let (lo, width) = if bearings.is_empty() { (0.0, TAU) } else { minimal_arc(&bearings) };
        let (lo, width) =
            if width < MIN_CONE_WIDTH { (lo + width / 2.0 - MIN_CONE_WIDTH / 2.0, MIN_CONE_WIDTH) } else { (lo, width) };
        workers.push(Worker::new(id, start, length / elapsed, lo, lo + width, confidence)?);
    }
    Ok(workers)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn task_round_trip() {
        let tasks = vec![Task::new(TaskId(3), Point::new(0.25, 0.5), 1.0, 2.5, 0.4).unwrap()];
        let mut buf = Vec::new();
        write_tasks(&mut buf, &tasks).unwrap();
        assert!(String::from_utf8(buf.clone()).unwrap().starts_with("id,x,y,s,e,beta\n"));
        assert_eq!(read_tasks(&buf[..]).unwrap(), tasks);
    }

    #[test]
    fn worker_round_trip() {
        let workers = vec![Worker::new(WorkerId(1), Point::new(0.1, 0.9), 0.25, 0.5, 1.0, 0.95).unwrap()];
        let mut buf = Vec::new();
        write_workers(&mut buf, &workers).unwrap();
        assert_eq!(read_workers(&buf[..]).unwrap(), workers);
    }

    #[test]
    fn straight_trajectory_gets_minimum_cone() {
        let csv = "wid,t,x,y\n1,0,0.1,0.1\n1,2,0.5,0.1\n";
        let ws = ingest_trajectories(csv.as_bytes(), 0.9).unwrap();
        assert_eq!(ws.len(), 1);
        assert!((ws[0].velocity - 0.2).abs() < 1e-12);
        assert!((ws[0].cone_width() - MIN_CONE_WIDTH).abs() < 1e-12);
        assert!(ws[0].accepts_direction(0.0));
    }

    #[test]
    fn l_shaped_trajectory_spans_both_legs() {
        let csv = "wid,t,x,y\n2,0,0.1,0.1\n2,1,0.5,0.1\n2,2,0.5,0.5\n";
        let ws = ingest_trajectories(csv.as_bytes(), 0.9).unwrap();
        let w = &ws[0];
        // bearings 0 (east leg) and π/4 (to the corner's far end)
        assert!(w.accepts_direction(0.0) && w.accepts_direction(FRAC_PI_2 / 2.0));
        assert!((w.cone_width() - FRAC_PI_2 / 2.0).abs() < 1e-12);
    }

    #[test]
    fn bad_trajectories() {
        let unsorted = "wid,t,x,y\n1,2,0.1,0.1\n1,1,0.5,0.1\n";
        assert!(matches!(ingest_trajectories(unsorted.as_bytes(), 0.9), Err(Error::Format(_))));
        let single = "wid,t,x,y\n1,0,0.1,0.1\n2,0,0.2,0.2\n2,1,0.3,0.2\n";
        assert_eq!(ingest_trajectories(single.as_bytes(), 0.9).unwrap().len(), 1);
    }
}
