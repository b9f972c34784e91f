//! Artifact writers. Every text artifact starts with a versioned schema
//! comment line.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use syncert_core::energy::{v_potential, v_quadratic};
use syncert_core::network::{IncidencePair, PowerNetwork};
use syncert_core::simulate::{complete_norm, edge_norm, Event, Trajectory};

pub const TRAJECTORY_SCHEMA: &str = "# syncert trajectory v1";
pub const LONG_SCHEMA: &str = "# syncert trajectory-long v1";
pub const EVENTS_SCHEMA: &str = "# syncert events v1";

#[derive(Debug, thiserror::Error)]
#[error("cannot write {path}: {source}")]
pub struct WriteError {
    pub path: PathBuf,
    #[source]
    pub source: io::Error,
}

/// What the writers need to derive energies and norms for each sample.
pub struct Context<'a> {
    pub net: &'a PowerNetwork,
    pub pair: &'a IncidencePair,
    pub theta_o: &'a [f64],
}

struct Derived {
    v_quad: f64,
    v_pot: f64,
    norm_c: f64,
    norm_l: f64,
}

impl Context<'_> {
    fn derive(&self, delta: &[f64]) -> Derived {
        Derived {
            v_quad: v_quadratic(self.net, delta),
            v_pot: v_potential(self.net, self.theta_o, delta),
            norm_c: complete_norm(delta),
            norm_l: edge_norm(delta, self.pair),
        }
    }
}

fn csv_error(e: csv::Error) -> io::Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => e,
        other => io::Error::other(format!("{other:?}")),
    }
}

/// Wide CSV: `t, delta_1..n, freq_1..n, v_quad, v_pot, norm_c, norm_l`.
pub fn write_trajectory<W: Write>(mut w: W, traj: &Trajectory, ctx: &Context) -> io::Result<()> {
    writeln!(w, "{TRAJECTORY_SCHEMA}")?;
    let n = ctx.net.n();
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|i| format!("delta_{i}")));
    header.extend((1..=n).map(|i| format!("freq_{i}")));
    header.extend(["v_quad", "v_pot", "norm_c", "norm_l"].map(String::from));
    out.write_record(&header).map_err(csv_error)?;
    for ((t, delta), freq) in traj.times.iter().zip(&traj.states).zip(&traj.freq) {
        let d = ctx.derive(delta);
        let mut row = Vec::with_capacity(2 * n + 5);
        row.push(*t);
        row.extend_from_slice(delta);
        row.extend_from_slice(freq);
        row.extend([d.v_quad, d.v_pot, d.norm_c, d.norm_l]);
        out.write_record(row.iter().map(|v| v.to_string())).map_err(csv_error)?;
    }
    out.flush()
}

/// Long CSV for plotting: `t, series, bus, value`, bus empty for scalars.
pub fn write_long<W: Write>(mut w: W, traj: &Trajectory, ctx: &Context) -> io::Result<()> {
    writeln!(w, "{LONG_SCHEMA}")?;
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["t", "series", "bus", "value"]).map_err(csv_error)?;
    for ((t, delta), freq) in traj.times.iter().zip(&traj.states).zip(&traj.freq) {
        let t = t.to_string();
        for (series, values) in [("delta", delta), ("freq", freq)] {
            for (i, v) in values.iter().enumerate() {
                out.write_record([t.as_str(), series, &(i + 1).to_string(), &v.to_string()])
                    .map_err(csv_error)?;
            }
        }
        let d = ctx.derive(delta);
        for (series, v) in [("v_quad", d.v_quad), ("v_pot", d.v_pot), ("norm_c", d.norm_c), ("norm_l", d.norm_l)] {
            out.write_record([t.as_str(), series, "", &v.to_string()]).map_err(csv_error)?;
        }
    }
    out.flush()
}

/// One `time=<t> event=<kind>` line per event.
pub fn write_events<W: Write>(mut w: W, events: &[Event]) -> io::Result<()> {
    writeln!(w, "{EVENTS_SCHEMA}")?;
    for e in events {
        writeln!(w, "time={:.6} event={}", e.time, e.kind)?;
    }
    Ok(())
}

/// Writes into `dir/name`, creating `dir`.
pub fn write_file(dir: &Path, name: &str, f: impl FnOnce(&mut io::BufWriter<fs::File>) -> io::Result<()>) -> Result<PathBuf, WriteError> {
    let path = dir.join(name);
    let wrap = |source| WriteError {
        path: path.clone(),
        source,
    };
    fs::create_dir_all(dir).map_err(wrap)?;
    let file = fs::File::create(&path).map_err(wrap)?;
    let mut w = io::BufWriter::new(file);
    f(&mut w).and_then(|_| w.flush()).map_err(wrap)?;
    Ok(path)
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf, WriteError> {
    write_file(dir, name, |w| {
        serde_json::to_writer_pretty(&mut *w, value).map_err(io::Error::other)?;
        writeln!(w)
    })
}

/// All trajectory artifacts of one scenario.
pub fn write_scenario(dir: &Path, traj: &Trajectory, ctx: &Context) -> Result<Vec<PathBuf>, WriteError> {
    Ok(vec![
        write_file(dir, "trajectory.csv", |w| write_trajectory(w, traj, ctx))?,
        write_file(dir, "trajectory_long.csv", |w| write_long(w, traj, ctx))?,
        write_file(dir, "events.log", |w| write_events(w, &traj.events))?,
    ])
}
