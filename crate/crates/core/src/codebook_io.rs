//! Plain-text codebook files.
//!
//! ```text
//! coexist-codebook 1
//! dims <T> <L> <E> <N> <Q>
//! seed <seed>
//! z <z> kappa <kappa>
//! matrix psi <rows> <cols>
//! <re> <im> <re> <im> ...      one line per row
//! matrix v ...
//! matrix u ...
//! matrix s ...
//! subset <n> <idx>... ; <weight>...
//! end
//! ```

use crate::error::{Error, Result};
use crate::scalar::{CMat, Cx, Real};
use crate::waveform::Codebook;
use std::fmt::Write as _;
use std::path::Path;

const MAGIC: &str = "coexist-codebook 1";

pub fn to_text<R: Real>(cb: &Codebook<R>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC}");
    let _ = writeln!(out, "dims {} {} {} {} {}", cb.coherence_len(), cb.pilot_len(), cb.n_embb(), cb.n_mtds(), cb.q);
    let _ = writeln!(out, "seed {}", cb.seed);
    let _ = writeln!(out, "z {} kappa {}", cb.z, cb.kappa);
    for (name, m) in [("psi", &cb.psi), ("v", &cb.v), ("u", &cb.u), ("s", &cb.s)] {
        let _ = writeln!(out, "matrix {name} {} {}", m.nrows(), m.ncols());
        for r in 0..m.nrows() {
            let line: Vec<String> = m.row(r).iter().map(|z| format!("{} {}", z.re, z.im)).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
    }
    for (n, (idx, w)) in cb.pi.iter().zip(&cb.vartheta).enumerate() {
        let idx: Vec<String> = idx.iter().map(ToString::to_string).collect();
        let w: Vec<String> = w.iter().map(ToString::to_string).collect();
        let _ = writeln!(out, "subset {n} {} ; {}", idx.join(" "), w.join(" "));
    }
    out.push_str("end\n");
    out
}

pub fn write<R: Real>(cb: &Codebook<R>, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, to_text(cb))?;
    Ok(())
}

pub fn read<R: Real>(path: impl AsRef<Path>) -> Result<Codebook<R>> {
    from_text(&std::fs::read_to_string(path)?)
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<&'a str> {
        let (i, l) = self.inner.next().ok_or(Error::Parse { line: self.line + 1, msg: "unexpected end of file".into() })?;
        self.line = i + 1;
        Ok(l.trim())
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Parse { line: self.line, msg: msg.into() }
    }
}

fn parse_num<T: std::str::FromStr>(lines: &Lines<'_>, tok: Option<&str>) -> Result<T> {
    tok.and_then(|t| t.parse().ok()).ok_or_else(|| lines.err("expected a number"))
}

fn read_matrix<R: Real>(lines: &mut Lines<'_>, name: &str) -> Result<CMat<R>> {
    let head = lines.next()?;
    let mut it = head.split_whitespace();
    if it.next() != Some("matrix") || it.next() != Some(name) {
        return Err(lines.err(format!("expected 'matrix {name}'")));
    }
    let rows: usize = parse_num(lines, it.next())?;
    let cols: usize = parse_num(lines, it.next())?;
    let mut m = CMat::zeros(rows, cols);
    for r in 0..rows {
        let vals: Vec<R> = lines.next()?.split_whitespace().map(|t| t.parse::<R>()).collect::<std::result::Result<_, _>>().map_err(|_| lines.err("bad matrix entry"))?;
        if vals.len() != 2 * cols {
            return Err(lines.err(format!("row has {} values, expected {}", vals.len(), 2 * cols)));
        }
        for c in 0..cols {
            m[(r, c)] = Cx::new(vals[2 * c], vals[2 * c + 1]);
        }
    }
    Ok(m)
}

pub fn from_text<R: Real>(text: &str) -> Result<Codebook<R>> {
    let mut lines = Lines { inner: text.lines().enumerate(), line: 0 };
    if lines.next()? != MAGIC {
        return Err(lines.err("not a codebook file"));
    }
    let dims: Vec<usize> = {
        let l = lines.next()?;
        let mut it = l.split_whitespace();
        if it.next() != Some("dims") {
            return Err(lines.err("expected dims"));
        }
        it.map(|t| t.parse()).collect::<std::result::Result<_, _>>().map_err(|_| lines.err("bad dims"))?
    };
    if dims.len() != 5 {
        return Err(lines.err("dims needs T L E N Q"));
    }
    let (t, l, e, n, q) = (dims[0], dims[1], dims[2], dims[3], dims[4]);
    let seed_line = lines.next()?;
    let seed: u64 = parse_num(&lines, seed_line.strip_prefix("seed ").map(str::trim))?;
    let zl: Vec<&str> = lines.next()?.split_whitespace().collect();
    if zl.len() != 4 || zl[0] != "z" || zl[2] != "kappa" {
        return Err(lines.err("expected 'z <z> kappa <kappa>'"));
    }
    let z: usize = parse_num(&lines, Some(zl[1]))?;
    let kappa: usize = parse_num(&lines, Some(zl[3]))?;
    let psi = read_matrix(&mut lines, "psi")?;
    let v = read_matrix(&mut lines, "v")?;
    let u = read_matrix(&mut lines, "u")?;
    let s = read_matrix(&mut lines, "s")?;
    if psi.shape() != (l, e) || v.shape() != (l, n) || u.shape() != (t - l, n * q) || s.shape() != (t, n * q) {
        return Err(lines.err("matrix shapes disagree with dims"));
    }
    let mut pi = Vec::new();
    let mut vartheta = Vec::new();
    loop {
        let line = lines.next()?;
        if line == "end" {
            break;
        }
        let rest = line.strip_prefix("subset ").ok_or_else(|| lines.err("expected subset or end"))?;
        let (head, w) = rest.split_once(';').ok_or_else(|| lines.err("subset needs ';'"))?;
        let mut it = head.split_whitespace();
        let idx: usize = parse_num(&lines, it.next())?;
        if idx != pi.len() {
            return Err(lines.err("subsets out of order"));
        }
        pi.push(it.map(|t| t.parse()).collect::<std::result::Result<Vec<usize>, _>>().map_err(|_| lines.err("bad subset index"))?);
        vartheta.push(w.split_whitespace().map(|t| t.parse::<R>()).collect::<std::result::Result<Vec<R>, _>>().map_err(|_| lines.err("bad weight"))?);
    }
    if !pi.is_empty() && pi.len() != n {
        return Err(lines.err(format!("{} subsets for {n} devices", pi.len())));
    }
    Ok(Codebook { psi, v, u, s, q, z, kappa, pi, vartheta, seed })
}
