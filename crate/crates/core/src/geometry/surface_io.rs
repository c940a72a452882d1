//! ASCII import of immersed surfaces.
//!
//! Grammar (whitespace separated, `#` comments, blank lines ignored):
//!
//! ```text
//! dim nverts nelems
//! x y z gx gy gz      # nverts lines: position and opening vector
//! v0 v1 [v2]          # nelems lines: dim vertex indices per element
//! ```

use std::path::Path;

use super::surface::ImmersedSurface;
use crate::error::{Error, Result};

pub fn read_surface(path: &Path) -> Result<ImmersedSurface> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_surface(&text, path)
}

pub fn parse_surface(text: &str, path: &Path) -> Result<ImmersedSurface> {
    let err = |line: usize, message: String| Error::Parse { path: path.to_path_buf(), line, message };
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").split_whitespace().collect::<Vec<_>>()))
        .filter(|(_, t)| !t.is_empty());
    let mut next = |what: &str, count: usize| -> Result<(usize, Vec<&str>)> {
        let (line, tokens) =
            lines.next().ok_or_else(|| err(0, format!("unexpected end of file while reading {what}")))?;
        if tokens.len() != count {
            return Err(err(line, format!("{what}: expected {count} values, found {}", tokens.len())));
        }
        Ok((line, tokens))
    };
    fn num<T: std::str::FromStr>(tok: &str, line: usize, path: &Path) -> Result<T> {
        tok.parse().map_err(|_| Error::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("invalid number {tok:?}"),
        })
    }
    let (line, head) = next("header", 3)?;
    let dim: usize = num(head[0], line, path)?;
    let nv: usize = num(head[1], line, path)?;
    let ne: usize = num(head[2], line, path)?;
    if !(dim == 2 || dim == 3) {
        return Err(err(line, format!("dimension {dim} must be 2 or 3")));
    }
    let mut vertices = Vec::with_capacity(nv);
    let mut opening = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (line, t) = next("vertex", 6)?;
        let v: Vec<f64> = t.iter().map(|s| num(s, line, path)).collect::<Result<_>>()?;
        vertices.push([v[0], v[1], v[2]]);
        opening.push([v[3], v[4], v[5]]);
    }
    let mut elements = Vec::with_capacity(ne);
    for _ in 0..ne {
        let (line, t) = next("element", dim)?;
        let mut e = [0; 3];
        for (k, s) in t.iter().enumerate() {
            e[k] = num(s, line, path)?;
            if e[k] >= nv {
                return Err(err(line, format!("vertex index {} out of range (nverts = {nv})", e[k])));
            }
        }
        elements.push(e);
    }
    if let Some((line, _)) = lines.next() {
        return Err(err(line, "trailing data after the last element".into()));
    }
    ImmersedSurface::new(dim, vertices, elements, opening)
}
