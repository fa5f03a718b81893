//! Sample sets on disk: CSV with `#`-prefixed header lines carrying metadata.
//!
//! ```text
//! # meta: {"problem":"elliptic","seed":7,...}
//! xi1,xi2,...,xid,u
//! 0.125,-0.5,...,1.2503
//! ```

use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

const META_PREFIX: &str = "# meta: ";

#[derive(Debug, Clone, PartialEq)]
pub struct SampleFile {
    pub xi: DMatrix<f64>,
    pub u: DVector<f64>,
    pub meta: Option<serde_json::Value>,
}

pub fn write_samples<W: Write>(
    mut w: W,
    xi: &DMatrix<f64>,
    u: &DVector<f64>,
    meta: Option<&serde_json::Value>,
) -> Result<()> {
    if xi.nrows() != u.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} sample points and {} values",
            xi.nrows(),
            u.len()
        )));
    }
    let fmt = |e: std::io::Error| Error::Format(e.to_string());
    if let Some(m) = meta {
        writeln!(w, "{META_PREFIX}{}", serde_json::to_string(m)?).map_err(fmt)?;
    }
    let mut wr = csv::Writer::from_writer(w);
    let mut header: Vec<String> = (1..=xi.ncols()).map(|k| format!("xi{k}")).collect();
    header.push("u".into());
    wr.write_record(&header)?;
    for i in 0..xi.nrows() {
        let mut rec: Vec<String> = xi.row(i).iter().map(|x| format!("{x:.17e}")).collect();
        rec.push(format!("{:.17e}", u[i]));
        wr.write_record(&rec)?;
    }
    wr.flush().map_err(fmt)?;
    Ok(())
}

pub fn save_samples(
    path: &Path,
    xi: &DMatrix<f64>,
    u: &DVector<f64>,
    meta: Option<&serde_json::Value>,
) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    write_samples(BufWriter::new(f), xi, u, meta)
}

pub fn read_samples<R: BufRead>(mut r: R) -> Result<SampleFile> {
    let mut meta = None;
    let mut rest = String::new();
    let mut line = String::new();
    loop {
        line.clear();
        if r.read_line(&mut line).map_err(|e| Error::Format(e.to_string()))? == 0 {
            break;
        }
        if let Some(m) = line.strip_prefix(META_PREFIX) {
            meta = Some(serde_json::from_str(m.trim())?);
        } else if !line.starts_with('#') {
            rest.push_str(&line);
            r.read_to_string(&mut rest).map_err(|e| Error::Format(e.to_string()))?;
            break;
        }
    }
    let mut rd = csv::Reader::from_reader(rest.as_bytes());
    let headers = rd.headers()?.clone();
    let cols = headers.len();
    if cols < 2 || &headers[cols - 1] != "u" {
        return Err(Error::Format(
            "sample file needs columns xi1..xid followed by u".into(),
        ));
    }
    let mut flat = Vec::new();
    let mut u = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        for (k, field) in rec.iter().enumerate() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| Error::Format(format!("bad number '{field}'")))?;
            if k + 1 == cols {
                u.push(v);
            } else {
                flat.push(v);
            }
        }
    }
    if u.is_empty() {
        return Err(Error::Format("sample file has no rows".into()));
    }
    Ok(SampleFile {
        xi: DMatrix::from_row_slice(u.len(), cols - 1, &flat),
        u: DVector::from_vec(u),
        meta,
    })
}

pub fn load_samples(path: &Path) -> Result<SampleFile> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_samples(BufReader::new(f))
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_with_metadata() {
        let xi = DMatrix::from_row_slice(2, 2, &[0.1, -0.2, 1.0 / 3.0, 0.9]);
        let u = DVector::from_vec(vec![1.25, std::f64::consts::PI]);
        let meta = serde_json::json!({"seed": 7, "problem": "elliptic"});
        let mut buf = Vec::new();
        write_samples(&mut buf, &xi, &u, Some(&meta)).unwrap();
        let back = read_samples(buf.as_slice()).unwrap();
        assert_eq!(back.xi, xi);
        assert_eq!(back.u, u);
        assert_eq!(back.meta, Some(meta));
    }

    #[test]
    fn rejects_malformed() {
        assert!(read_samples("a,b\n1,2\n".as_bytes()).is_err());
        assert!(read_samples("xi1,u\n".as_bytes()).is_err());
        assert!(read_samples("xi1,u\n1,x\n".as_bytes()).is_err());
    }
}
