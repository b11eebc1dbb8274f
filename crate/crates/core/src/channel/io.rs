//! Channel CSV format: a header `n_ch,l_isi`, a line with those two values,
//! then one line per time index with `l_isi` comma-separated taps written
//! with 17 significant digits.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use super::LptvFilter;
use crate::error::{Error, Result};

pub fn write_channel<W: Write>(f: &LptvFilter, mut out: W) -> std::io::Result<()> {
    writeln!(out, "n_ch,l_isi")?;
    writeln!(out, "{},{}", f.period(), f.memory())?;
    for row in f.rows() {
        let line: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}

pub fn save_channel(f: &LptvFilter, path: &Path) -> Result<()> {
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    let mut w = BufWriter::new(file);
    write_channel(f, &mut w).map_err(io_err)?;
    w.flush().map_err(io_err)
}

/// Parses the channel CSV; `origin` names the source in error messages.
pub fn read_channel<R: BufRead>(input: R, origin: &Path) -> Result<LptvFilter> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        message,
    };
    let mut lines = input
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !matches!(l, Ok(s) if s.trim().is_empty()));

    let (line_no, header) = match lines.next() {
        Some((n, Ok(h))) => (n, h),
        Some((_, Err(e))) => {
            return Err(Error::Io {
                path: origin.to_path_buf(),
                source: e,
            })
        }
        None => return Err(parse_err(1, "no tap rows".into())),
    };
    if header.trim() != "n_ch,l_isi" {
        return Err(parse_err(
            line_no,
            format!("expected header `n_ch,l_isi`, found `{}`", header.trim()),
        ));
    }
    let (line_no, dims) = match lines.next() {
        Some((n, Ok(d))) => (n, d),
        Some((_, Err(e))) => {
            return Err(Error::Io {
                path: origin.to_path_buf(),
                source: e,
            })
        }
        None => return Err(parse_err(line_no + 1, "no tap rows".into())),
    };
    let dims: Vec<usize> = dims
        .split(',')
        .map(|s| s.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| parse_err(line_no, format!("bad dimensions: {e}")))?;
    let [n_ch, l_isi] = dims[..] else {
        return Err(parse_err(line_no, "expected two dimensions `n_ch,l_isi`".into()));
    };
    if n_ch == 0 || l_isi == 0 {
        return Err(parse_err(line_no, "dimensions must be positive".into()));
    }

    let mut rows = Vec::with_capacity(n_ch);
    for (line_no, line) in lines {
        let line = line.map_err(|e| Error::Io {
            path: origin.to_path_buf(),
            source: e,
        })?;
        let row: Vec<f64> = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| parse_err(line_no, format!("bad tap value: {e}")))?;
        if row.len() != l_isi {
            return Err(parse_err(
                line_no,
                format!("row has {} taps, expected {l_isi}", row.len()),
            ));
        }
        if rows.len() == n_ch {
            return Err(parse_err(line_no, format!("more than {n_ch} tap rows")));
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(parse_err(line_no + 1, "no tap rows".into()));
    }
    if rows.len() != n_ch {
        return Err(parse_err(
            line_no + rows.len() + 1,
            format!("found {} tap rows, expected {n_ch}", rows.len()),
        ));
    }
    LptvFilter::from_rows(rows)
}

pub fn load_channel(path: &Path) -> Result<LptvFilter> {
    let file = File::open(path).map_err(|source| Error::Io {
        path: PathBuf::from(path),
        source,
    })?;
    read_channel(BufReader::new(file), path)
}
