//! Plain-text field files.
//!
//! ```text
//! # field nx ny h x0 y0 kind
//! v(0,0) v(1,0) … v(nx−1,0)
//! …
//! ```
//!
//! One line per lattice row `j`, values in shortest round-trip decimal form,
//! `NA` at nodes outside the mask. Further `#` lines after the header are
//! comments.

use std::path::Path;
use std::sync::Arc;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::field::ScalarField;
use crate::geometry::{Grid, Point};
use crate::regions::{Region, RegionLabelField};

pub const FORMAT_VERSION: u32 = 1;
pub const NA: &str = "NA";

#[derive(Debug, Error)]
pub enum FieldIoError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("expected {expected} rows, found more")]
    Dimension { expected: usize },
    #[error("field kind `{found}` where `{expected}` was expected")]
    Kind { expected: String, found: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldHeader {
    pub nx: usize,
    pub ny: usize,
    pub h: f64,
    pub origin: Point,
    pub kind: String,
}

/// Parsed file: header and row-major values with `None` outside the mask.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldFile {
    pub header: FieldHeader,
    pub values: Vec<Option<f64>>,
}

impl FieldFile {
    fn grid(&self) -> Result<Grid, FieldIoError> {
        let hd = &self.header;
        let mask = self.values.iter().map(Option::is_some).collect();
        Grid::from_mask(hd.origin, hd.h, hd.nx, hd.ny, mask).map_err(|e| FieldIoError::Parse {
            line: 1,
            msg: e.to_string(),
        })
    }

    /// Scalar field on a lattice-box grid whose mask is the set of
    /// non-`NA` nodes.
    pub fn into_scalar(self) -> Result<ScalarField, FieldIoError> {
        let grid = Arc::new(self.grid()?);
        let values = self.values.iter().map(|v| v.unwrap_or(f64::NAN)).collect();
        Ok(ScalarField::from_values(grid, values))
    }

    pub fn into_labels(self, u_tol: f64, lambda_tol: f64, erosion: f64) -> Result<RegionLabelField, FieldIoError> {
        if self.header.kind != "labels" {
            return Err(FieldIoError::Kind {
                expected: "labels".into(),
                found: self.header.kind,
            });
        }
        let grid = Arc::new(self.grid()?);
        let mut labels = Vec::with_capacity(self.values.len());
        for (k, v) in self.values.iter().enumerate() {
            let region = match v {
                None => Region::Outside,
                Some(c) => Region::from_code(*c as u8)
                    .filter(|_| c.fract() == 0.0 && *c >= 0.0)
                    .ok_or_else(|| FieldIoError::Parse {
                        line: 2 + k / self.header.nx,
                        msg: format!("invalid region code {c}"),
                    })?,
            };
            labels.push(region);
        }
        Ok(RegionLabelField {
            grid,
            labels,
            u_tol,
            lambda_tol,
            erosion,
        })
    }
}

fn format_grid(out: &mut String, g: &Grid, kind: &str, value: impl Fn(usize) -> Option<String>) {
    use std::fmt::Write;
    let _ = writeln!(out, "# field {} {} {} {} {} {}", g.nx, g.ny, g.h, g.origin[0], g.origin[1], kind);
    let _ = writeln!(out, "# version {FORMAT_VERSION}");
    for j in 0..g.ny {
        for i in 0..g.nx {
            if i > 0 {
                out.push(' ');
            }
            match value(g.index(i, j)) {
                Some(s) => out.push_str(&s),
                None => out.push_str(NA),
            }
        }
        out.push('\n');
    }
}

pub fn format_field(f: &ScalarField, kind: &str) -> String {
    let mut out = String::new();
    let g = &f.grid;
    format_grid(&mut out, g, kind, |k| g.inside_idx(k).then(|| format!("{}", f.values[k])));
    out
}

pub fn format_labels(l: &RegionLabelField) -> String {
    let mut out = String::new();
    let g = &l.grid;
    format_grid(&mut out, g, "labels", |k| g.inside_idx(k).then(|| l.labels[k].code().to_string()));
    out
}

pub fn parse_field(text: &str) -> Result<FieldFile, FieldIoError> {
    let mut lines = text.lines().enumerate().map(|(n, l)| (n + 1, l));
    let (_, first) = lines.next().ok_or(FieldIoError::Parse {
        line: 1,
        msg: "empty file".into(),
    })?;
    let tok: Vec<&str> = first.split_whitespace().collect();
    if tok.len() != 8 || tok[0] != "#" || tok[1] != "field" {
        return Err(FieldIoError::Parse {
            line: 1,
            msg: "expected header `# field nx ny h x0 y0 kind`".into(),
        });
    }
    let bad = |what: &str| FieldIoError::Parse {
        line: 1,
        msg: format!("invalid {what}"),
    };
    let nx: usize = tok[2].parse().map_err(|_| bad("nx"))?;
    let ny: usize = tok[3].parse().map_err(|_| bad("ny"))?;
    let h: f64 = tok[4].parse().map_err(|_| bad("h"))?;
    let x0: f64 = tok[5].parse().map_err(|_| bad("x0"))?;
    let y0: f64 = tok[6].parse().map_err(|_| bad("y0"))?;
    if nx == 0 || ny == 0 || !(h > 0.0) || !x0.is_finite() || !y0.is_finite() {
        return Err(bad("grid dimensions"));
    }
    let header = FieldHeader {
        nx,
        ny,
        h,
        origin: [x0, y0],
        kind: tok[7].to_string(),
    };
    let mut values = Vec::with_capacity(nx * ny);
    let mut rows = 0;
    let mut last = 1;
    for (line, text) in lines {
        last = line;
        let t = text.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        if rows == ny {
            return Err(FieldIoError::Dimension { expected: ny });
        }
        let before = values.len();
        for s in t.split_whitespace() {
            if s == NA {
                values.push(None);
            } else {
                let v: f64 = s.parse().map_err(|_| FieldIoError::Parse {
                    line,
                    msg: format!("invalid value `{s}`"),
                })?;
                if !v.is_finite() {
                    return Err(FieldIoError::Parse {
                        line,
                        msg: format!("non-finite value `{s}`"),
                    });
                }
                values.push(Some(v));
            }
        }
        if values.len() - before != nx {
            return Err(FieldIoError::Parse {
                line,
                msg: format!("expected {nx} values, found {}", values.len() - before),
            });
        }
        rows += 1;
    }
    if rows != ny {
        return Err(FieldIoError::Parse {
            line: last + 1,
            msg: format!("unexpected end of file after {rows} of {ny} rows"),
        });
    }
    Ok(FieldFile { header, values })
}

pub fn read_field(path: &Path) -> Result<FieldFile, FieldIoError> {
    parse_field(&std::fs::read_to_string(path)?)
}

pub fn write_field(path: &Path, f: &ScalarField, kind: &str) -> Result<(), FieldIoError> {
    Ok(std::fs::write(path, format_field(f, kind))?)
}

pub fn write_labels(path: &Path, l: &RegionLabelField) -> Result<(), FieldIoError> {
    Ok(std::fs::write(path, format_labels(l))?)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Polygon;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn random_field_roundtrips_exactly() {
        let poly = Polygon::regular(5, [0.3, -0.2], 1.0).unwrap();
        let g = Arc::new(Grid::build(&poly, 0.07).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let f = ScalarField::from_fn(g.clone(), |_| rng.gen::<f64>() * 10f64.powi(rng.gen_range(-12..12)) - 0.5);
        let text = format_field(&f, "u");
        let back = parse_field(&text).unwrap();
        assert_eq!(back.header.kind, "u");
        let h = back.header.clone();
        let f2 = back.into_scalar().unwrap();
        assert_eq!((h.nx, h.ny), (g.nx, g.ny));
        assert_eq!(h.h.to_bits(), g.h.to_bits());
        assert_eq!(h.origin.map(f64::to_bits), g.origin.map(f64::to_bits));
        for k in 0..g.len() {
            assert_eq!(f2.grid.inside_idx(k), g.inside_idx(k));
            if g.inside_idx(k) {
                assert_eq!(f2.values[k].to_bits(), f.values[k].to_bits());
            }
        }
        assert_eq!(format_field(&f2, "u"), text);
    }

    #[test]
    fn truncated_file_names_the_line() {
        let g = Arc::new(Grid::build(&Polygon::square(1.0), 0.25).unwrap());
        let text = format_field(&ScalarField::from_fn(g, |p| p[0]), "u");
        let mut cut: Vec<&str> = text.lines().collect();
        cut.truncate(4);
        match parse_field(&cut.join("\n")).unwrap_err() {
            FieldIoError::Parse { line, msg } => assert!(line == 5 && msg.contains("2 of 5"), "{line}: {msg}"),
            e => panic!("{e}"),
        }
        let extra = text.clone() + "1 2 3 4 5\n";
        assert!(matches!(parse_field(&extra), Err(FieldIoError::Dimension { expected: 5 })));

        let partial = text.lines().take(3).collect::<Vec<_>>().join("\n") + "\n0.1 0.2\n";
        match parse_field(&partial).unwrap_err() {
            FieldIoError::Parse { line, .. } => assert_eq!(line, 4),
            e => panic!("{e}"),
        }
        match parse_field("# field 3 x 0.1 0 0 u\n").unwrap_err() {
            FieldIoError::Parse { line, msg } => assert!(line == 1 && msg.contains("ny")),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn labels_roundtrip() {
        let g = Arc::new(Grid::build(&Polygon::regular(6, [0.0, 0.0], 1.0).unwrap(), 0.1).unwrap());
        let u = ScalarField::from_fn(g.clone(), |p| (p[0] - 0.2).max(0.0).powi(2));
        let hess = crate::regions::hessian_field(&u);
        let l = crate::regions::segment_regions(&u, &hess, 1e-2, 0.1);
        let text = format_labels(&l);
        let back = parse_field(&text).unwrap().into_labels(1e-2, 0.1, l.erosion).unwrap();
        assert_eq!(back.labels, l.labels);
        assert!(parse_field(&format_field(&u, "u")).unwrap().into_labels(0.0, 0.0, 0.0).is_err());
    }
}
