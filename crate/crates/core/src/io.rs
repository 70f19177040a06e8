//! CSV files for lattices, datasets, coefficient tables and grids.
//!
//! Every file starts with `# layerfield <kind> v1`, then `# config_hash=<hex>`,
//! then a header row. Floats are written with 17 significant digits.

use std::collections::HashMap;
use std::io::Write;
use std::sync::Arc;

use csv::{ReaderBuilder, StringRecord, WriterBuilder};
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::forward::{FarFieldDataset, PhaselessDataset, PhaselessRow};
use crate::geom::{Dim, Index};
use crate::inversion::{CoefficientTable, Provenance};
use crate::lattice::AdmissibleSet;
use crate::retrieval::{ReferenceConfig, RetrievalFlag, RetrievalReport};
use crate::scalar::Real;
use crate::sources::GridField;

pub const FORMAT_VERSION: &str = "v1";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FileMeta {
    pub kind: String,
    pub config_hash: Option<String>,
}

fn fmt<T: Real>(v: T) -> String {
    format!("{:.16e}", v.as_f64())
}

fn index_header(dim: Dim) -> Vec<String> {
    (1..=dim.n()).map(|j| format!("l{j}")).collect()
}

fn index_cells(l: &Index) -> Vec<String> {
    l.comps().iter().map(|v| v.to_string()).collect()
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    Error::Parse {
        line,
        message: e.to_string(),
    }
}

struct Table {
    meta: FileMeta,
    header: Vec<String>,
    rows: Vec<(u64, StringRecord)>,
}

fn begin<W: Write>(w: &mut W, kind: &str, hash: &str, header: &[String]) -> Result<()> {
    writeln!(w, "# layerfield {kind} {FORMAT_VERSION}")?;
    writeln!(w, "# config_hash={hash}")?;
    writeln!(w, "{}", header.join(","))?;
    Ok(())
}

fn write_rows<W: Write>(w: &mut W, rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut wr = WriterBuilder::new().has_headers(false).from_writer(w);
    for r in rows {
        wr.write_record(&r).map_err(|e| Error::Io(e.to_string()))?;
    }
    wr.flush()?;
    Ok(())
}

fn parse_table(text: &str, kind: &str) -> Result<Table> {
    let mut lines = text.lines();
    let schema = format!("# layerfield {kind} {FORMAT_VERSION}");
    match lines.next() {
        Some(l) if l.trim_end() == schema => {}
        other => {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected '{schema}', found '{}'", other.unwrap_or("")),
            })
        }
    }
    let config_hash = text
        .lines()
        .take_while(|l| l.starts_with('#'))
        .find_map(|l| l.strip_prefix("# config_hash=").map(|h| h.trim().to_string()));
    let mut rdr = ReaderBuilder::new()
        .comment(Some(b'#'))
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = rdr.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        rows.push((line, rec));
    }
    Ok(Table {
        meta: FileMeta {
            kind: kind.to_string(),
            config_hash,
        },
        header,
        rows,
    })
}

impl Table {
    fn dim(&self) -> Result<Dim> {
        let n = self.header.iter().filter(|h| h.len() == 2 && h.starts_with('l')).count();
        Dim::new(n).map_err(|_| Error::Parse {
            line: 3,
            message: format!("header has {n} index columns"),
        })
    }

    fn col(&self, name: &str) -> Result<usize> {
        self.header.iter().position(|h| h == name).ok_or_else(|| Error::Parse {
            line: 3,
            message: format!("missing column '{name}'"),
        })
    }
}

fn cell(rec: &StringRecord, col: usize, line: u64) -> Result<&str> {
    rec.get(col).ok_or_else(|| Error::Parse {
        line,
        message: format!("missing field {}", col + 1),
    })
}

fn real<T: Real>(rec: &StringRecord, col: usize, line: u64) -> Result<T> {
    let s = cell(rec, col, line)?;
    let v: f64 = s.parse().map_err(|_| Error::Parse {
        line,
        message: format!("'{s}' is not a number"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            line,
            message: format!("non-finite value '{s}'"),
        });
    }
    Ok(T::lit(v))
}

fn index(rec: &StringRecord, dim: Dim, line: u64) -> Result<Index> {
    let mut c = Vec::with_capacity(dim.n());
    for j in 0..dim.n() {
        let s = cell(rec, j, line)?;
        c.push(s.parse::<i32>().map_err(|_| Error::Parse {
            line,
            message: format!("'{s}' is not an integer index"),
        })?);
    }
    Index::new(&c)
}

fn flag(rec: &StringRecord, col: usize, line: u64) -> Result<bool> {
    match cell(rec, col, line)? {
        "0" => Ok(false),
        "1" => Ok(true),
        s => Err(Error::Parse {
            line,
            message: format!("'{s}' is not a 0/1 flag"),
        }),
    }
}

/// Places parsed rows at the positions of `set`, failing on unknown or
/// missing indices.
fn align<T: Real, R>(set: &AdmissibleSet<T>, rows: Vec<(u64, Index, R)>) -> Result<Vec<R>> {
    let mut slots: Vec<Option<R>> = (0..set.len()).map(|_| None).collect();
    for (line, l, r) in rows {
        let pos = set.position(&l).ok_or_else(|| Error::Parse {
            line,
            message: format!("index {l} is not in the admissible set"),
        })?;
        if slots[pos].is_some() {
            return Err(Error::Parse {
                line,
                message: format!("duplicate index {l}"),
            });
        }
        slots[pos] = Some(r);
    }
    let missing: Vec<Index> = slots
        .iter()
        .zip(set.entries())
        .filter(|(s, _)| s.is_none())
        .map(|(_, e)| e.index)
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingEntries(missing));
    }
    Ok(slots.into_iter().map(|s| s.expect("checked")).collect())
}

pub fn write_lattice<T: Real, W: Write>(w: &mut W, set: &AdmissibleSet<T>, hash: &str) -> Result<()> {
    let mut header = index_header(set.dim());
    header.extend(["theta", "obs_theta", "obs_phi", "omega", "k_minus"].map(String::from));
    begin(w, "lattice", hash, &header)?;
    write_rows(
        w,
        set.entries().iter().map(|e| {
            let mut r = index_cells(&e.index);
            r.extend([
                fmt(e.theta),
                fmt(e.observation.theta()),
                fmt(e.observation.phi()),
                fmt(e.omega),
                fmt(e.k_minus),
            ]);
            r
        }),
    )
}

pub fn write_farfield<T: Real, W: Write>(w: &mut W, d: &FarFieldDataset<T>, hash: &str) -> Result<()> {
    let mut header = index_header(d.set().dim());
    header.extend(["theta", "omega", "re", "im"].map(String::from));
    begin(w, "farfield", hash, &header)?;
    write_rows(
        w,
        d.set().entries().iter().zip(d.values()).map(|(e, v)| {
            let mut r = index_cells(&e.index);
            r.extend([fmt(e.theta), fmt(e.omega), fmt(v.re), fmt(v.im)]);
            r
        }),
    )
}

pub fn read_farfield<T: Real>(text: &str, set: Arc<AdmissibleSet<T>>) -> Result<(FarFieldDataset<T>, FileMeta)> {
    let t = parse_table(text, "farfield")?;
    let dim = t.dim()?;
    let (re, im) = (t.col("re")?, t.col("im")?);
    let rows = t
        .rows
        .iter()
        .map(|(line, rec)| {
            let l = index(rec, dim, *line)?;
            Ok((*line, l, Complex::new(real(rec, re, *line)?, real(rec, im, *line)?)))
        })
        .collect::<Result<Vec<_>>>()?;
    let values = align(&set, rows)?;
    Ok((FarFieldDataset::new(set, values, Vec::new())?, t.meta))
}

pub fn write_phaseless<T: Real, W: Write>(w: &mut W, d: &PhaselessDataset<T>, hash: &str) -> Result<()> {
    let mut header = index_header(d.set().dim());
    header.extend(
        [
            "theta",
            "omega",
            "abs_u",
            "abs_v1",
            "abs_v2",
            "c1",
            "c2",
            "alpha1",
            "alpha2",
            "degenerate",
            "clamped",
        ]
        .map(String::from),
    );
    begin(w, "phaseless", hash, &header)?;
    let b = |v: bool| if v { "1" } else { "0" }.to_string();
    write_rows(
        w,
        d.set().entries().iter().zip(d.rows()).map(|(e, p)| {
            let mut r = index_cells(&e.index);
            r.extend([
                fmt(e.theta),
                fmt(e.omega),
                fmt(p.abs_u),
                fmt(p.abs_v1),
                fmt(p.abs_v2),
                fmt(p.c1),
                fmt(p.c2),
                fmt(p.alpha1),
                fmt(p.alpha2),
                b(p.degenerate),
                b(p.clamped),
            ]);
            r
        }),
    )
}

pub fn read_phaseless<T: Real>(
    text: &str,
    set: Arc<AdmissibleSet<T>>,
    refs: ReferenceConfig<T>,
) -> Result<(PhaselessDataset<T>, FileMeta)> {
    let t = parse_table(text, "phaseless")?;
    let dim = t.dim()?;
    let names = ["abs_u", "abs_v1", "abs_v2", "c1", "c2", "alpha1", "alpha2", "degenerate", "clamped"];
    let cols: HashMap<&str, usize> = names
        .iter()
        .map(|n| t.col(n).map(|c| (*n, c)))
        .collect::<Result<_>>()?;
    let rows = t
        .rows
        .iter()
        .map(|(line, rec)| {
            let line = *line;
            let l = index(rec, dim, line)?;
            let g = |n: &str| real::<T>(rec, cols[n], line);
            let row = PhaselessRow {
                abs_u: g("abs_u")?,
                abs_v1: g("abs_v1")?,
                abs_v2: g("abs_v2")?,
                c1: g("c1")?,
                c2: g("c2")?,
                alpha1: g("alpha1")?,
                alpha2: g("alpha2")?,
                degenerate: flag(rec, cols["degenerate"], line)?,
                clamped: flag(rec, cols["clamped"], line)?,
            };
            if row.abs_u < T::zero() || row.abs_v1 < T::zero() || row.abs_v2 < T::zero() {
                return Err(Error::Parse {
                    line,
                    message: "negative magnitude".into(),
                });
            }
            Ok((line, l, row))
        })
        .collect::<Result<Vec<_>>>()?;
    let rows = align(&set, rows)?;
    Ok((PhaselessDataset::new(set, rows, refs)?, t.meta))
}

pub fn write_retrieval<T: Real, W: Write>(w: &mut W, r: &RetrievalReport<T>, hash: &str) -> Result<()> {
    let mut header = index_header(r.set().dim());
    header.extend(["theta", "omega", "re", "im", "abs_det", "flag"].map(String::from));
    begin(w, "retrieval", hash, &header)?;
    write_rows(
        w,
        r.set()
            .entries()
            .iter()
            .zip(r.values())
            .zip(r.abs_det().iter().zip(r.flags()))
            .map(|((e, v), (d, f))| {
                let mut row = index_cells(&e.index);
                row.extend([
                    fmt(e.theta),
                    fmt(e.omega),
                    fmt(v.re),
                    fmt(v.im),
                    fmt(*d),
                    f.as_str().to_string(),
                ]);
                row
            }),
    )
}

pub fn read_retrieval<T: Real>(text: &str, set: Arc<AdmissibleSet<T>>) -> Result<(RetrievalReport<T>, FileMeta)> {
    let t = parse_table(text, "retrieval")?;
    let dim = t.dim()?;
    let (re, im, det, fl) = (t.col("re")?, t.col("im")?, t.col("abs_det")?, t.col("flag")?);
    let rows = t
        .rows
        .iter()
        .map(|(line, rec)| {
            let line = *line;
            let l = index(rec, dim, line)?;
            let v = Complex::new(real(rec, re, line)?, real(rec, im, line)?);
            let s = cell(rec, fl, line)?;
            let f = RetrievalFlag::parse(s).ok_or_else(|| Error::Parse {
                line,
                message: format!("unknown flag '{s}'"),
            })?;
            Ok((line, l, (v, real::<T>(rec, det, line)?, f)))
        })
        .collect::<Result<Vec<_>>>()?;
    let rows = align(&set, rows)?;
    let mut values = Vec::with_capacity(rows.len());
    let mut dets = Vec::with_capacity(rows.len());
    let mut flags = Vec::with_capacity(rows.len());
    for (v, d, f) in rows {
        values.push(v);
        dets.push(d);
        flags.push(f);
    }
    Ok((RetrievalReport::new(set, values, dets, flags)?, t.meta))
}

pub fn write_coefficients<T: Real, W: Write>(w: &mut W, c: &CoefficientTable<T>, hash: &str) -> Result<()> {
    let mut header = index_header(c.dim());
    header.extend(["re", "im", "provenance"].map(String::from));
    begin(w, "coefficients", hash, &header)?;
    write_rows(
        w,
        c.iter().map(|(l, v, p)| {
            let mut r = index_cells(l);
            r.extend([fmt(v.re), fmt(v.im), p.as_str().to_string()]);
            r
        }),
    )
}

/// Reads a coefficient table. The truncation order is the largest `|l|_inf`
/// present; a missing provenance column reads as measured.
pub fn read_coefficients<T: Real>(text: &str, period: T) -> Result<(CoefficientTable<T>, FileMeta)> {
    let t = parse_table(text, "coefficients")?;
    let dim = t.dim()?;
    let (re, im) = (t.col("re")?, t.col("im")?);
    let prov = t.col("provenance").ok();
    let mut parsed = Vec::with_capacity(t.rows.len());
    for (line, rec) in &t.rows {
        let line = *line;
        let l = index(rec, dim, line)?;
        let v = Complex::new(real(rec, re, line)?, real(rec, im, line)?);
        let p = match prov {
            Some(c) => {
                let s = cell(rec, c, line)?;
                Provenance::parse(s).ok_or_else(|| Error::Parse {
                    line,
                    message: format!("unknown provenance '{s}'"),
                })?
            }
            None => Provenance::Measured,
        };
        parsed.push((l, v, p));
    }
    let order = parsed.iter().map(|(l, _, _)| l.max_norm()).max().unwrap_or(0);
    let mut table = CoefficientTable::new(dim, order, period);
    for (l, v, p) in parsed {
        table.insert(l, v, p)?;
    }
    Ok((table, t.meta))
}

pub fn write_grid<T: Real, W: Write>(w: &mut W, g: &GridField<T>, hash: &str) -> Result<()> {
    let n = g.resolution().len();
    let mut header: Vec<String> = (1..=n).map(|j| format!("x{j}")).collect();
    header.extend(["re", "im"].map(String::from));
    begin(w, "grid", hash, &header)?;
    write_rows(
        w,
        g.points().iter().zip(g.values()).map(|(p, v)| {
            let mut r: Vec<String> = p.coords().iter().map(|&x| fmt(x)).collect();
            r.extend([fmt(v.re), fmt(v.im)]);
            r
        }),
    )
}
