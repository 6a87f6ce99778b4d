//! CSV artifacts. Floats are written with 17 significant digits so that
//! every value reads back bit-identically.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::sim::{FilteredData, Trajectory};

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn numbered(prefix: &str, count: usize) -> impl Iterator<Item = String> + '_ {
    (1..=count).map(move |i| format!("{prefix}_{i}"))
}

/// `t,u_1..u_m,y_1..y_p` followed by `w_*,v_*,x_*` (and `xc_*`) when the
/// hidden signals are present.
pub fn write_trajectory<W: Write>(traj: &Trajectory, out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string()];
    header.extend(numbered("u", traj.u.ncols()));
    header.extend(numbered("y", traj.y.ncols()));
    let mut blocks: Vec<&DMatrix<f64>> = vec![&traj.u, &traj.y];
    if let Some(h) = &traj.hidden {
        header.extend(numbered("w", h.w.ncols()));
        header.extend(numbered("v", h.v.ncols()));
        header.extend(numbered("x", h.x.ncols()));
        blocks.extend([&h.w, &h.v, &h.x]);
        if let Some(xc) = &h.xc {
            header.extend(numbered("xc", xc.ncols()));
            blocks.push(xc);
        }
    }
    wtr.write_record(&header)?;
    for k in 0..traj.len() {
        let mut row = vec![fmt_f64(traj.grid.time(k))];
        for b in &blocks {
            row.extend(b.row(k).iter().map(|v| fmt_f64(*v)));
        }
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

/// `t,chi_1..chi_n,zhat_1..zhat_mu`.
pub fn write_filtered<W: Write>(fd: &FilteredData, out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string()];
    header.extend(numbered("chi", fd.chi.ncols()));
    header.extend(numbered("zhat", fd.z_hat.ncols()));
    wtr.write_record(&header)?;
    for k in 0..fd.chi.nrows() {
        let mut row = vec![fmt_f64(fd.grid.time(k))];
        row.extend(fd.chi.row(k).iter().map(|v| fmt_f64(*v)));
        row.extend(fd.z_hat.row(k).iter().map(|v| fmt_f64(*v)));
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

/// `tau,w_norm` samples of the Riccati solution along backward time.
pub fn write_dre_trace<W: Write>(trace: &[(f64, f64)], out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["tau", "w_norm"])?;
    for (tau, w) in trace {
        wtr.write_record([fmt_f64(*tau), fmt_f64(*w)])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Labelled row-major blocks: one line `label,row,v_1,...` per matrix row.
pub fn write_blocks<W: Write>(blocks: &[(&str, &DMatrix<f64>)], mut out: W) -> Result<()> {
    for (label, m) in blocks {
        for i in 0..m.nrows() {
            write!(out, "{label},{i}")?;
            for j in 0..m.ncols() {
                write!(out, ",{}", fmt_f64(m[(i, j)]))?;
            }
            writeln!(out)?;
        }
    }
    Ok(())
}

pub fn read_blocks<R: BufRead>(input: R) -> Result<BTreeMap<String, DMatrix<f64>>> {
    let mut rows: BTreeMap<String, Vec<Vec<f64>>> = BTreeMap::new();
    for (lineno, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let label = fields.next().unwrap_or_default().trim().to_string();
        fields.next();
        let values = fields
            .map(|f| {
                f.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.entry(label).or_default().push(values);
    }
    rows.into_iter()
        .map(|(label, r)| {
            let ncols = r.first().map_or(0, Vec::len);
            if r.iter().any(|row| row.len() != ncols) {
                return Err(Error::Parse(format!("block {label} is ragged")));
            }
            let m = DMatrix::from_row_iterator(r.len(), ncols, r.into_iter().flatten());
            Ok((label, m))
        })
        .collect()
}

/// Reads noise samples with header `t,w_1..w_q,v_1..v_p` into `(w, v, step)`.
pub fn read_noise_samples(path: &Path, q: usize, p: usize) -> Result<(DMatrix<f64>, DMatrix<f64>, f64)> {
    let mut rdr = csv::Reader::from_path(path)?;
    let headers = rdr.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Parse(format!("{}: missing column {name}", path.display())))
    };
    let t_col = find("t")?;
    let w_cols = (1..=q).map(|i| find(&format!("w_{i}"))).collect::<Result<Vec<_>>>()?;
    let v_cols = (1..=p).map(|i| find(&format!("v_{i}"))).collect::<Result<Vec<_>>>()?;
    let mut t = Vec::new();
    let mut w = Vec::new();
    let mut v = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let get = |c: usize| -> Result<f64> {
            rec.get(c)
                .unwrap_or_default()
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
        };
        t.push(get(t_col)?);
        for &c in &w_cols {
            w.push(get(c)?);
        }
        for &c in &v_cols {
            v.push(get(c)?);
        }
    }
    if t.len() < 2 {
        return Err(Error::Parse(format!("{}: need at least two samples", path.display())));
    }
    let step = t[1] - t[0];
    let uniform = t
        .windows(2)
        .all(|p| ((p[1] - p[0]) - step).abs() <= 1e-9 * step.abs().max(1.0));
    if !(step > 0.0) || !uniform {
        return Err(Error::GridMismatch(format!("{}: samples are not uniformly spaced", path.display())));
    }
    let n = t.len();
    Ok((
        DMatrix::from_row_iterator(n, q, w),
        DMatrix::from_row_iterator(n, p, v),
        step,
    ))
}

pub fn write_file(path: &Path, f: impl FnOnce(&mut std::io::BufWriter<std::fs::File>) -> Result<()>) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    f(&mut out)?;
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blocks_round_trip() {
        let k = DMatrix::from_row_slice(2, 3, &[1.0 / 3.0, -2.5e-300, 7.0, 0.1, 0.2, f64::MAX]);
        let p = DMatrix::from_element(1, 1, std::f64::consts::E);
        let mut buf = Vec::new();
        write_blocks(&[("K", &k), ("P", &p)], &mut buf).unwrap();
        let back = read_blocks(buf.as_slice()).unwrap();
        assert_eq!(back["K"], k);
        assert_eq!(back["P"], p);
    }
}
