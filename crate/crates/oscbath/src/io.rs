//! Text and binary formats.
//!
//! * coupling tables: two numeric columns `(ω, value)`, ω strictly
//!   increasing, `#` comment lines;
//! * fields: CSV `q,p,value` or a little-endian binary grid;
//! * ensemble summaries: CSV `time,mean,stderr`;
//! * Fokker-Planck operators: JSON.
//!
//! CSV writers put metadata in leading `# key: value` lines. Floats are
//! written in shortest round-trip form, so output is bit-reproducible.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::bath::Profile;
use crate::chain::EnsembleSeries;
use crate::fpde::FPOperator;
use crate::spline::CubicSpline;
use crate::wigner::{PhaseGrid, PhaseSpaceField};
use crate::{Error, Real, Result};

const FIELD_MAGIC: &[u8; 8] = b"OSCFLD01";

fn parse_err(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Parse(format!("line {line}: {msg}"))
}

/// Numeric rows of a `#`-commented, comma or whitespace separated text.
fn numeric_rows(reader: impl BufRead, width: usize) -> Result<Vec<(usize, Vec<f64>)>> {
    let mut rows = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = t.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty()).collect();
        let parsed: std::result::Result<Vec<f64>, _> = fields.iter().map(|s| s.parse::<f64>()).collect();
        match parsed {
            Ok(v) if v.len() == width => rows.push((i + 1, v)),
            Ok(v) => return Err(parse_err(i + 1, format!("expected {width} columns, found {}", v.len()))),
            // a header row is allowed before the first data row
            Err(_) if rows.is_empty() => continue,
            Err(e) => return Err(parse_err(i + 1, e)),
        }
    }
    Ok(rows)
}

/// Coupling table as a cubic spline; ω must be strictly increasing.
pub fn read_coupling_table<T: Real>(reader: impl BufRead) -> Result<CubicSpline<T>> {
    let rows = numeric_rows(reader, 2)?;
    if rows.len() < 2 {
        return Err(Error::Parse("coupling table needs at least two rows".into()));
    }
    for w in rows.windows(2) {
        if !(w[1].1[0] > w[0].1[0]) {
            return Err(parse_err(w[1].0, "frequencies must be strictly increasing"));
        }
    }
    for (line, r) in &rows {
        if !r[0].is_finite() || !r[1].is_finite() {
            return Err(parse_err(*line, "non-finite value"));
        }
    }
    let (x, y) = rows.iter().map(|(_, r)| (T::lit(r[0]), T::lit(r[1]))).unzip();
    CubicSpline::new(x, y)
}

pub fn read_coupling_profile<T: Real>(path: impl AsRef<Path>) -> Result<Profile<T>> {
    Ok(Profile::Table(read_coupling_table(BufReader::new(File::open(path)?))?))
}

fn write_metadata(w: &mut impl Write, metadata: &[(&str, String)]) -> Result<()> {
    for (k, v) in metadata {
        writeln!(w, "# {k}: {v}")?;
    }
    Ok(())
}

/// CSV table with `#` metadata lines and a header row.
pub fn write_table_csv(mut w: impl Write, metadata: &[(&str, String)], header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    write_metadata(&mut w, metadata)?;
    writeln!(w, "{}", header.join(","))?;
    for r in rows {
        let cells: Vec<String> = r.iter().map(|v| format!("{v}")).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    Ok(())
}

/// Reads a table written by [`write_table_csv`]: header names and rows.
pub fn read_table_csv(reader: impl BufRead) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut header = None;
    let mut rows = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        if header.is_none() {
            header = Some(t.split(',').map(|s| s.trim().to_string()).collect::<Vec<_>>());
            continue;
        }
        let r: std::result::Result<Vec<f64>, _> = t.split(',').map(|s| s.trim().parse::<f64>()).collect();
        let r = r.map_err(|e| parse_err(i + 1, e))?;
        if r.len() != header.as_ref().unwrap().len() {
            return Err(parse_err(i + 1, "row width differs from header"));
        }
        rows.push(r);
    }
    Ok((header.ok_or_else(|| Error::Parse("missing header row".into()))?, rows))
}

pub fn write_field_csv<T: Real>(w: impl Write, field: &PhaseSpaceField<T>, metadata: &[(&str, String)]) -> Result<()> {
    let g = &field.grid;
    let mut meta = metadata.to_vec();
    meta.push((
        "grid",
        format!("q {} {} {} p {} {} {}", g.q_min.as_f64(), g.q_max.as_f64(), g.n_q, g.p_min.as_f64(), g.p_max.as_f64(), g.n_p),
    ));
    let mut rows = Vec::with_capacity(g.n_q * g.n_p);
    for i in 0..g.n_q {
        for j in 0..g.n_p {
            rows.push(vec![g.q(i).as_f64(), g.p(j).as_f64(), field.values[(i, j)].as_f64()]);
        }
    }
    let mut w = BufWriter::new(w);
    write_table_csv(&mut w, &meta, &["q", "p", "value"], &rows)?;
    w.flush()?;
    Ok(())
}

/// Reads a `q,p,value` CSV on a cell-centred grid (any row order).
pub fn read_field_csv<T: Real>(reader: impl BufRead) -> Result<PhaseSpaceField<T>> {
    let rows = numeric_rows(reader, 3)?;
    if rows.is_empty() {
        return Err(Error::Parse("field has no rows".into()));
    }
    let axis = |k: usize| -> Vec<f64> {
        let mut v: Vec<f64> = rows.iter().map(|(_, r)| r[k]).collect();
        v.sort_by(f64::total_cmp);
        v.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * b.abs().max(1.0));
        v
    };
    let (qs, ps) = (axis(0), axis(1));
    let (nq, np) = (qs.len(), ps.len());
    if nq < 2 || np < 2 || rows.len() != nq * np {
        return Err(Error::Parse(format!("{} rows do not form a {nq}×{np} grid", rows.len())));
    }
    let dq = (qs[nq - 1] - qs[0]) / (nq - 1) as f64;
    let dp = (ps[np - 1] - ps[0]) / (np - 1) as f64;
    let grid = PhaseGrid::new(
        T::lit(qs[0] - dq / 2.0),
        T::lit(qs[nq - 1] + dq / 2.0),
        T::lit(ps[0] - dp / 2.0),
        T::lit(ps[np - 1] + dp / 2.0),
        nq,
        np,
    )
    .map_err(|e| Error::Parse(e.to_string()))?;
    let mut values = DMatrix::from_element(nq, np, T::zero());
    let mut seen = vec![false; nq * np];
    for (line, r) in &rows {
        let i = ((r[0] - qs[0]) / dq).round();
        let j = ((r[1] - ps[0]) / dp).round();
        if i < 0.0 || j < 0.0 || i as usize >= nq || j as usize >= np {
            return Err(parse_err(*line, "point off the grid"));
        }
        let (i, j) = (i as usize, j as usize);
        if (r[0] - qs[0] - i as f64 * dq).abs() > 1e-6 * dq || (r[1] - ps[0] - j as f64 * dp).abs() > 1e-6 * dp {
            return Err(parse_err(*line, "grid is not uniform"));
        }
        if std::mem::replace(&mut seen[i + j * nq], true) {
            return Err(parse_err(*line, "duplicate grid point"));
        }
        values[(i, j)] = T::lit(r[2]);
    }
    PhaseSpaceField::new(grid, values)
}

/// Binary field: magic `OSCFLD01`, `u64` n_q and n_p, `f64` q_min, q_max,
/// p_min, p_max, then n_q·n_p `f64` values with q varying fastest; all
/// little-endian.
pub fn write_field_binary<T: Real>(w: impl Write, field: &PhaseSpaceField<T>) -> Result<()> {
    let g = &field.grid;
    let mut w = BufWriter::new(w);
    w.write_all(FIELD_MAGIC)?;
    w.write_all(&(g.n_q as u64).to_le_bytes())?;
    w.write_all(&(g.n_p as u64).to_le_bytes())?;
    for x in [g.q_min, g.q_max, g.p_min, g.p_max] {
        w.write_all(&x.as_f64().to_le_bytes())?;
    }
    for v in field.values.iter() {
        w.write_all(&v.as_f64().to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_field_binary<T: Real>(mut r: impl Read) -> Result<PhaseSpaceField<T>> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != FIELD_MAGIC {
        return Err(Error::Parse("not a field file (bad magic)".into()));
    }
    let mut b = [0u8; 8];
    let mut u64_at = |r: &mut dyn Read| -> Result<u64> {
        r.read_exact(&mut b)?;
        Ok(u64::from_le_bytes(b))
    };
    let nq = u64_at(&mut r)? as usize;
    let np = u64_at(&mut r)? as usize;
    let mut ext = [0f64; 4];
    for e in ext.iter_mut() {
        *e = f64::from_bits(u64_at(&mut r)?);
    }
    let grid = PhaseGrid::new(T::lit(ext[0]), T::lit(ext[1]), T::lit(ext[2]), T::lit(ext[3]), nq, np)
        .map_err(|e| Error::Parse(e.to_string()))?;
    let n = nq.checked_mul(np).ok_or_else(|| Error::Parse("grid too large".into()))?;
    let mut bytes = vec![0u8; n * 8];
    r.read_exact(&mut bytes)?;
    let vals: Vec<T> = bytes.chunks_exact(8).map(|c| T::lit(f64::from_le_bytes(c.try_into().unwrap()))).collect();
    PhaseSpaceField::new(grid, DMatrix::from_vec(nq, np, vals))
}

pub fn write_ensemble_csv(w: impl Write, series: &EnsembleSeries, metadata: &[(&str, String)]) -> Result<()> {
    let rows: Vec<Vec<f64>> =
        (0..series.times.len()).map(|i| vec![series.times[i], series.mean[i], series.stderr[i]]).collect();
    let mut w = BufWriter::new(w);
    write_table_csv(&mut w, metadata, &["time", "mean", "stderr"], &rows)?;
    w.flush()?;
    Ok(())
}

pub fn read_ensemble_csv(reader: impl BufRead) -> Result<EnsembleSeries> {
    let (header, rows) = read_table_csv(reader)?;
    if header != ["time", "mean", "stderr"] {
        return Err(Error::Parse(format!("unexpected ensemble columns {header:?}")));
    }
    Ok(EnsembleSeries {
        times: rows.iter().map(|r| r[0]).collect(),
        mean: rows.iter().map(|r| r[1]).collect(),
        stderr: rows.iter().map(|r| r[2]).collect(),
    })
}

pub fn write_operator_json(path: impl AsRef<Path>, op: &FPOperator<f64>) -> Result<()> {
    std::fs::write(path, op.to_json())?;
    Ok(())
}

pub fn read_operator_json(path: impl AsRef<Path>) -> Result<FPOperator<f64>> {
    FPOperator::from_json(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coupling_table_comments_and_order() {
        let text = "# omega value\n0.0 0.0\n0.5, 0.25\n\n# mid\n1.0 1.0\n2.0 4.0\n";
        let s = read_coupling_table::<f64>(text.as_bytes()).unwrap();
        assert_eq!(s.domain(), (0.0, 2.0));
        assert!((s.eval(1.0).unwrap() - 1.0).abs() < 1e-14);
        assert!(read_coupling_table::<f64>("0 1\n1 2\n1 3\n".as_bytes()).is_err());
        assert!(read_coupling_table::<f64>("0 1 2\n1 2 3\n".as_bytes()).is_err());
        assert!(read_coupling_table::<f64>("0 1\n".as_bytes()).is_err());
    }

    #[test]
    fn field_round_trips() {
        let g = PhaseGrid::new(-2.0, 3.0, -1.0, 1.0, 6, 4).unwrap();
        let f = PhaseSpaceField::from_fn(g, |q, p| q * 0.3 - p * p + 1.0 / 3.0);
        let mut buf = Vec::new();
        write_field_csv(&mut buf, &f, &[("kind", "test".into())]).unwrap();
        let back: PhaseSpaceField<f64> = read_field_csv(&buf[..]).unwrap();
        assert_eq!(back.values, f.values);
        assert!((back.grid.q_min + 2.0).abs() < 1e-12 && (back.grid.p_max - 1.0).abs() < 1e-12);

        let mut bin = Vec::new();
        write_field_binary(&mut bin, &f).unwrap();
        assert_eq!(bin.len(), 8 + 16 + 32 + 24 * 8);
        let back: PhaseSpaceField<f64> = read_field_binary(&bin[..]).unwrap();
        assert_eq!(back, f);
        bin[0] = b'X';
        assert!(read_field_binary::<f64>(&bin[..]).is_err());
    }

    #[test]
    fn ensemble_round_trip() {
        let s = EnsembleSeries { times: vec![0.0, 0.5], mean: vec![1.0, 0.1 + 0.2], stderr: vec![0.0, 1e-3] };
        let mut buf = Vec::new();
        write_ensemble_csv(&mut buf, &s, &[("seed", "3".into())]).unwrap();
        assert!(String::from_utf8(buf.clone()).unwrap().starts_with("# seed: 3\ntime,mean,stderr\n"));
        assert_eq!(read_ensemble_csv(&buf[..]).unwrap(), s);
    }
}
