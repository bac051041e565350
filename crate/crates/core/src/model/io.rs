use std::io::{Read, Write};
use std::path::Path;

use super::Trajectory;
use crate::error::{Error, Result};

const STEP_TOL: f64 = 1e-9;

fn column_index(name: &str, prefix: char) -> Option<usize> {
    name.strip_prefix(prefix)?.parse().ok()
}

/// Parses trajectory CSV text with header `t, q0.., [u0..], [p0..]`.
///
/// Rows must be equally spaced in `t`. Costate cells may be empty on a
/// leading block of rows (before `t1`).
pub fn trajectory_from_csv(reader: impl Read) -> Result<Trajectory> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.get(0) != Some("t") {
        return Err(Error::invalid("trajectory", "first column must be `t`"));
    }
    let mut counts = [0usize; 3];
    let mut family = 0;
    for name in header.iter().skip(1) {
        let f = match name.chars().next() {
            Some('q') => 0,
            Some('u') => 1,
            Some('p') => 2,
            _ => return Err(Error::invalid("trajectory", format!("unknown column `{name}`"))),
        };
        let prefix = ['q', 'u', 'p'][f];
        if f < family || column_index(name, prefix) != Some(counts[f]) {
            return Err(Error::invalid(
                "trajectory",
                format!("columns must be t, q0.., u0.., p0.. in order; found `{name}`"),
            ));
        }
        family = f;
        counts[f] += 1;
    }
    let [nq, nu, np] = counts;
    if nq == 0 {
        return Err(Error::invalid("trajectory", "no state columns"));
    }
    if np != 0 && np != nq {
        return Err(Error::invalid("trajectory", "costate columns must match the state dimension"));
    }
    let parse = |s: &str, row: usize| -> Result<f64> {
        s.parse::<f64>()
            .map_err(|_| Error::invalid("trajectory", format!("row {row}: `{s}` is not a number")))
    };
    let (mut times, mut q, mut u, mut p) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let mut costate_start = None;
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = row + 1;
        times.push(parse(&rec[0], row)?);
        for c in 0..nq {
            q.push(parse(&rec[1 + c], row)?);
        }
        for c in 0..nu {
            u.push(parse(&rec[1 + nq + c], row)?);
        }
        if np > 0 {
            let cells: Vec<&str> = (0..np).map(|c| &rec[1 + nq + nu + c]).collect();
            if cells.iter().all(|c| c.is_empty()) {
                if costate_start.is_some() {
                    return Err(Error::invalid("trajectory", format!("row {row}: costate gap")));
                }
            } else {
                costate_start.get_or_insert(row - 1);
                for c in cells {
                    p.push(parse(c, row)?);
                }
            }
        }
    }
    if times.len() < 2 {
        return Err(Error::invalid("trajectory", "need at least two rows"));
    }
    let h = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
    for (i, &t) in times.iter().enumerate() {
        if (t - (times[0] + i as f64 * h)).abs() > STEP_TOL * (1.0 + t.abs()) + 1e-6 * h {
            return Err(Error::invalid("trajectory", format!("row {}: grid is not uniform", i + 1)));
        }
    }
    let mut traj = Trajectory::new(times[0], h, nq, q)?;
    if nu > 0 {
        traj = traj.with_controls(nu, u)?;
    }
    if let Some(start) = costate_start {
        traj = traj.with_costates(start, p)?;
    }
    Ok(traj)
}

pub fn read_trajectory_csv(path: impl AsRef<Path>) -> Result<Trajectory> {
    trajectory_from_csv(std::fs::File::open(path)?)
}

/// Writes `t, q.., u.., p..` rows with `.` decimals and LF line endings.
/// Costate cells are empty where no costate is stored.
pub fn trajectory_to_csv(traj: &Trajectory, writer: impl Write) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    let n = traj.dim();
    let m = traj.control_dim();
    let with_p = traj.costate_start().is_some();
    let mut header = vec!["t".to_string()];
    header.extend((0..n).map(|i| format!("q{i}")));
    header.extend((0..m).map(|i| format!("u{i}")));
    if with_p {
        header.extend((0..n).map(|i| format!("p{i}")));
    }
    w.write_record(&header)?;
    for i in 0..traj.nodes() {
        let mut row = vec![format!("{}", traj.time(i))];
        row.extend(traj.node(i).iter().map(|v| format!("{v}")));
        if let Some(u) = traj.control(i) {
            row.extend(u.iter().map(|v| format!("{v}")));
        }
        if with_p {
            match traj.costate(i) {
                Some(p) => row.extend(p.iter().map(|v| format!("{v}"))),
                None => row.extend(std::iter::repeat_n(String::new(), n)),
            }
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trajectory_csv(traj: &Trajectory, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    trajectory_to_csv(traj, std::io::BufWriter::new(file))
}
