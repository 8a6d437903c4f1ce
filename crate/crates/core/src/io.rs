//! Plain-text CSV, binary PGM and sorted-key JSON.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

/// Version tag embedded in every JSON report.
pub const REPORT_FORMAT: &str = "homeospline-report/1";

/// 17 significant digits, enough to round-trip an `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Reads numeric columns. A first line that does not parse as numbers is taken as a header.
pub fn read_columns<R: Read>(
    reader: R,
    ncols: usize,
) -> Result<(Option<Vec<String>>, Vec<Vec<f64>>)> {
    let mut header = None;
    let mut cols = vec![Vec::new(); ncols];
    let mut first = true;
    for (lineno, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed: std::result::Result<Vec<f64>, _> =
            fields.iter().map(|f| f.parse::<f64>()).collect();
        match parsed {
            Ok(vals) => {
                if vals.len() < ncols {
                    return Err(Error::Input(format!(
                        "line {}: expected {ncols} columns, found {}",
                        lineno + 1,
                        vals.len()
                    )));
                }
                if let Some(bad) = vals.iter().take(ncols).find(|v| !v.is_finite()) {
                    return Err(Error::Input(format!(
                        "line {}: non-finite value {bad}",
                        lineno + 1
                    )));
                }
                for (c, v) in cols.iter_mut().zip(vals) {
                    c.push(v);
                }
            }
            Err(_) if first => header = Some(fields.iter().map(|s| s.to_string()).collect()),
            Err(e) => return Err(Error::Input(format!("line {}: {e}", lineno + 1))),
        }
        first = false;
    }
    Ok((header, cols))
}

pub fn read_csv_file(path: &Path, ncols: usize) -> Result<Vec<Vec<f64>>> {
    let f = fs::File::open(path)
        .map_err(|e| Error::Input(format!("cannot open {}: {e}", path.display())))?;
    Ok(read_columns(f, ncols)?.1)
}

/// `(x, y)` pairs from a two-column CSV.
pub fn read_xy(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut cols = read_csv_file(path, 2)?;
    let y = cols.pop().unwrap_or_default();
    let x = cols.pop().unwrap_or_default();
    Ok((x, y))
}

/// Landmark pairs from a four-column CSV `x, y, x', y'`.
pub fn read_landmarks(path: &Path) -> Result<(Vec<[f64; 2]>, Vec<[f64; 2]>)> {
    let cols = read_csv_file(path, 4)?;
    let src = cols[0]
        .iter()
        .zip(&cols[1])
        .map(|(&a, &b)| [a, b])
        .collect();
    let dst = cols[2]
        .iter()
        .zip(&cols[3])
        .map(|(&a, &b)| [a, b])
        .collect();
    Ok((src, dst))
}

pub fn write_columns<W: Write>(mut w: W, header: &[&str], columns: &[&[f64]]) -> Result<()> {
    let rows = columns.first().map_or(0, |c| c.len());
    if columns.iter().any(|c| c.len() != rows) {
        return Err(Error::Input("columns have different lengths".into()));
    }
    writeln!(w, "{}", header.join(","))?;
    for i in 0..rows {
        let row: Vec<String> = columns.iter().map(|c| fmt_f64(c[i])).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn write_csv_file(path: &Path, header: &[&str], columns: &[&[f64]]) -> Result<()> {
    let mut buf = Vec::new();
    write_columns(&mut buf, header, columns)?;
    fs::write(path, buf)?;
    Ok(())
}

/// Pretty JSON with object keys in sorted order and a trailing newline.
pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    // serde_json's default map is a BTreeMap, so going through Value sorts every key
    let v = serde_json::to_value(value)?;
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, to_json_string(value)?)?;
    Ok(())
}

/// 8-bit grayscale image, row-major, top row first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            pixels: vec![0; width * height],
        }
    }

    pub fn get(&self, col: usize, row: usize) -> u8 {
        self.pixels[row * self.width + col]
    }

    pub fn set(&mut self, col: usize, row: usize, v: u8) {
        self.pixels[row * self.width + col] = v;
    }
}

pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.pixels);
    out
}

fn next_token(data: &[u8], pos: &mut usize) -> Result<String> {
    loop {
        while *pos < data.len() && data[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < data.len() && data[*pos] == b'#' {
            while *pos < data.len() && data[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < data.len() && !data[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if start == *pos {
        return Err(Error::Input("truncated PGM header".into()));
    }
    Ok(String::from_utf8_lossy(&data[start..*pos]).into_owned())
}

pub fn decode_pgm(data: &[u8]) -> Result<GrayImage> {
    let mut pos = 0;
    if next_token(data, &mut pos)? != "P5" {
        return Err(Error::Input("not a binary PGM (P5) image".into()));
    }
    let mut num = |what: &str| -> Result<usize> {
        next_token(data, &mut pos)?
            .parse()
            .map_err(|_| Error::Input(format!("bad PGM {what}")))
    };
    let width = num("width")?;
    let height = num("height")?;
    let maxval = num("maxval")?;
    if maxval != 255 {
        return Err(Error::Input(format!("unsupported PGM maxval {maxval}")));
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    let need = width * height;
    if data.len() < pos + need {
        return Err(Error::Input("truncated PGM raster".into()));
    }
    Ok(GrayImage {
        width,
        height,
        pixels: data[pos..pos + need].to_vec(),
    })
}

pub fn read_pgm(path: &Path) -> Result<GrayImage> {
    let data =
        fs::read(path).map_err(|e| Error::Input(format!("cannot read {}: {e}", path.display())))?;
    decode_pgm(&data)
}

pub fn write_pgm(path: &Path, img: &GrayImage) -> Result<()> {
    fs::write(path, encode_pgm(img))?;
    Ok(())
}
