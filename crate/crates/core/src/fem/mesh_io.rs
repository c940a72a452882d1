//! ASCII mesh import/export.
//!
//! Grammar (whitespace separated, `#` starts a comment running to the end of
//! the line, blank lines ignored):
//!
//! ```text
//! dim ncells nverts
//! x y [z]                      # nverts lines, one vertex each
//! v0 v1 ... v(2^dim - 1)       # ncells lines, vertices in tensor order
//! nfacets
//! cell face tag                # nfacets lines; face = 2*axis + side,
//!                              # tag in {inflow, outflow, wall}
//! ```
//!
//! Tensor order means the vertex at reference corner `(a, b, c)` with
//! `a, b, c` in `{0, 1}` is listed at position `a + 2b + 4c`.

use std::fmt::Write as _;
use std::path::Path;

use super::mesh::{BoundaryFacet, Mesh};
use crate::error::{Error, Result};

pub fn read_mesh(path: &Path) -> Result<Mesh> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_mesh(&text, path)
}

/// Line number and whitespace-separated tokens of a non-empty line.
type TokenLines<'a> = std::iter::Peekable<Box<dyn Iterator<Item = (usize, Vec<&'a str>)> + 'a>>;

struct Lines<'a> {
    iter: TokenLines<'a>,
    path: &'a Path,
}

impl<'a> Lines<'a> {
    fn next(&mut self, what: &str) -> Result<(usize, Vec<&'a str>)> {
        self.iter.next().ok_or_else(|| Error::Parse {
            path: self.path.to_path_buf(),
            line: 0,
            message: format!("unexpected end of file while reading {what}"),
        })
    }

    fn err(&self, line: usize, message: String) -> Error {
        Error::Parse { path: self.path.to_path_buf(), line, message }
    }
}

pub fn parse_mesh(text: &str, path: &Path) -> Result<Mesh> {
    let it: Box<dyn Iterator<Item = (usize, Vec<&str>)>> = Box::new(
        text.lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").split_whitespace().collect::<Vec<_>>()))
            .filter(|(_, t)| !t.is_empty()),
    );
    let mut lines = Lines { iter: it.peekable(), path };

    let num = |lines: &Lines, line: usize, tok: &str| -> Result<usize> {
        tok.parse::<usize>().map_err(|_| lines.err(line, format!("expected a non-negative integer, found '{tok}'")))
    };

    let (ln, header) = lines.next("header")?;
    if header.len() != 3 {
        return Err(lines.err(ln, "header must be 'dim ncells nverts'".into()));
    }
    let dim = num(&lines, ln, header[0])?;
    let ncells = num(&lines, ln, header[1])?;
    let nverts = num(&lines, ln, header[2])?;
    if !(2..=3).contains(&dim) {
        return Err(lines.err(ln, format!("dimension must be 2 or 3, found {dim}")));
    }

    let mut vertices = Vec::with_capacity(nverts);
    for _ in 0..nverts {
        let (ln, t) = lines.next("vertices")?;
        if t.len() != dim {
            return Err(lines.err(ln, format!("expected {dim} coordinates")));
        }
        let mut x = [0.0; 3];
        for a in 0..dim {
            x[a] = t[a].parse::<f64>().map_err(|_| lines.err(ln, format!("invalid coordinate '{}'", t[a])))?;
        }
        vertices.push(x);
    }

    let nv = 1 << dim;
    let mut cells = Vec::with_capacity(ncells * nv);
    for _ in 0..ncells {
        let (ln, t) = lines.next("cells")?;
        if t.len() != nv {
            return Err(lines.err(ln, format!("expected {nv} vertex indices")));
        }
        for tok in t {
            cells.push(num(&lines, ln, tok)?);
        }
    }

    let (ln, t) = lines.next("facet count")?;
    if t.len() != 1 {
        return Err(lines.err(ln, "expected the number of boundary facets".into()));
    }
    let nfacets = num(&lines, ln, t[0])?;
    let mut facets = Vec::with_capacity(nfacets);
    for _ in 0..nfacets {
        let (ln, t) = lines.next("facets")?;
        if t.len() != 3 {
            return Err(lines.err(ln, "expected 'cell face tag'".into()));
        }
        facets.push(BoundaryFacet {
            cell: num(&lines, ln, t[0])?,
            face: num(&lines, ln, t[1])?,
            tag: t[2].parse().map_err(|e: Error| lines.err(ln, e.to_string()))?,
        });
    }
    if let Some(&(ln, _)) = lines.iter.peek() {
        return Err(lines.err(ln, "trailing content after facets".into()));
    }
    Mesh::from_parts(dim, vertices, cells, facets)
}

pub fn format_mesh(mesh: &Mesh) -> String {
    let dim = mesh.dim();
    let mut s = String::new();
    let _ = writeln!(s, "{} {} {}", dim, mesh.n_cells(), mesh.n_vertices());
    for v in mesh.vertices() {
        let coords: Vec<String> = v[..dim].iter().map(|x| format!("{x:.17e}")).collect();
        let _ = writeln!(s, "{}", coords.join(" "));
    }
    for c in 0..mesh.n_cells() {
        let ids: Vec<String> = mesh.cell_vertices(c).iter().map(|v| v.to_string()).collect();
        let _ = writeln!(s, "{}", ids.join(" "));
    }
    let _ = writeln!(s, "{}", mesh.facets().len());
    for f in mesh.facets() {
        let _ = writeln!(s, "{} {} {}", f.cell, f.face, f.tag);
    }
    s
}

pub fn write_mesh(mesh: &Mesh, path: &Path) -> Result<()> {
    std::fs::write(path, format_mesh(mesh)).map_err(|e| Error::io(path, e))
}
