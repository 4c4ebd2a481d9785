//! Tabular output. CSV is the primary format; JSON mirrors it row for row.

use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::arithmetic::RepulsionRecord;
use crate::conjugation::reduction::ReductionStep;
use crate::conjugation::triangular::TxRecord;
use crate::error::{invalid, Error, Result};
use crate::spectral::{Gap, HolderRow, IdsRow, ThoulessRecord};
use crate::subordinacy::ProfileRow;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(invalid(format!("unknown format '{other}' (expected 'csv' or 'json')"))),
        }
    }
}

/// A flat record with a fixed column list.
pub trait CsvRecord: Serialize {
    /// Column names, equal to the serialized field names in order.
    const HEADER: &'static [&'static str];
}

impl CsvRecord for HolderRow {
    const HEADER: &'static [&'static str] = &["E", "eps", "w", "ImM"];
}

impl CsvRecord for IdsRow {
    const HEADER: &'static [&'static str] = &["E", "N"];
}

impl CsvRecord for Gap {
    const HEADER: &'static [&'static str] = &["E_left", "E_right", "N_plateau"];
}

impl CsvRecord for ThoulessRecord {
    const HEADER: &'static [&'static str] = &["E", "integral", "lyapunov", "residual"];
}

impl CsvRecord for ProfileRow {
    const HEADER: &'static [&'static str] =
        &["k", "norm_P", "det_P", "eps_k", "psi_mplus", "ratio_jl", "ratio_blabl"];
}

impl CsvRecord for RepulsionRecord {
    const HEADER: &'static [&'static str] = &["j", "n_j", "next_abs", "gap"];
}

impl CsvRecord for ReductionStep {
    const HEADER: &'static [&'static str] = &["iteration", "w_norm", "ratio", "residual"];
}

/// One resonance `n_j` with `||2 theta - n_j alpha||`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResonanceRow {
    pub j: usize,
    pub n: i64,
    pub distance: f64,
}

impl CsvRecord for ResonanceRow {
    const HEADER: &'static [&'static str] = &["j", "n", "distance"];
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovRow {
    #[serde(rename = "E")]
    pub e: f64,
    pub n: usize,
    pub lyapunov: f64,
}

impl CsvRecord for LyapunovRow {
    const HEADER: &'static [&'static str] = &["E", "n", "lyapunov"];
}

/// `sup_x ||A_s(x)||` at one horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthRow {
    #[serde(rename = "E")]
    pub e: f64,
    pub s: usize,
    pub sup_norm: f64,
}

impl CsvRecord for GrowthRow {
    const HEADER: &'static [&'static str] = &["E", "s", "sup_norm"];
}

/// `m^+`, `m^-` and `M` at `E + i eps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MFunctionRow {
    #[serde(rename = "E")]
    pub e: f64,
    pub eps: f64,
    pub mplus_re: f64,
    pub mplus_im: f64,
    pub mminus_re: f64,
    pub mminus_im: f64,
    #[serde(rename = "M_re")]
    pub big_m_re: f64,
    #[serde(rename = "M_im")]
    pub big_m_im: f64,
    pub est_error: f64,
    pub depth: usize,
}

impl CsvRecord for MFunctionRow {
    const HEADER: &'static [&'static str] = &[
        "E", "eps", "mplus_re", "mplus_im", "mminus_re", "mminus_im", "M_re", "M_im", "est_error", "depth",
    ];
}

/// Entries of `X` from one evaluation route.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TxRow {
    pub method: String,
    pub k: u64,
    pub x1_re: f64,
    pub x1_im: f64,
    pub x2: f64,
    #[serde(rename = "detX")]
    pub det_x: f64,
    #[serde(rename = "normX")]
    pub norm_x: f64,
    #[serde(rename = "invnormX")]
    pub invnorm_x: f64,
}

impl TxRow {
    pub fn new(method: &str, k: u64, r: &TxRecord) -> Self {
        TxRow {
            method: method.to_string(),
            k,
            x1_re: r.x1.re,
            x1_im: r.x1.im,
            x2: r.x2,
            det_x: r.det_x,
            norm_x: r.norm_x,
            invnorm_x: r.invnorm_x,
        }
    }
}

impl CsvRecord for TxRow {
    const HEADER: &'static [&'static str] = &["method", "k", "x1_re", "x1_im", "x2", "detX", "normX", "invnormX"];
}

/// Writes `rows` as CSV. The header row is written even for an empty table.
pub fn to_csv<R: CsvRecord, W: Write>(rows: &[R], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(R::HEADER)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `rows` as a pretty-printed JSON array.
pub fn to_json<R: Serialize, W: Write>(rows: &[R], mut out: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, rows).map_err(|e| Error::Io(e.to_string()))?;
    out.write_all(b"\n")?;
    Ok(())
}

pub fn write_rows<R: CsvRecord, W: Write>(rows: &[R], format: Format, out: W) -> Result<()> {
    match format {
        Format::Csv => to_csv(rows, out),
        Format::Json => to_json(rows, out),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn serde_header<R: CsvRecord>(row: &R) -> Vec<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.serialize(row).unwrap();
        let text = String::from_utf8(w.into_inner().unwrap()).unwrap();
        text.lines().next().unwrap().split(',').map(str::to_string).collect()
    }

    fn check<R: CsvRecord>(row: R) {
        assert_eq!(serde_header(&row), R::HEADER);
    }

    #[test]
    fn headers_match_field_names() {
        check(HolderRow { e: 0.0, eps: 0.1, w: 0.2, im_m: 1.0 });
        check(IdsRow { e: 0.0, n: 0.5 });
        check(Gap { e_left: 0.0, e_right: 1.0, n_plateau: 0.3 });
        check(ThoulessRecord { e: 0.0, integral: 1.0, lyapunov: 1.0, residual: 0.0 });
        check(ProfileRow {
            k: 1,
            norm_p: 1.0,
            det_p: 1.0,
            eps_k: 0.5,
            psi_mplus: 1.0,
            ratio_jl: 1.0,
            ratio_blabl: 1.0,
        });
        check(RepulsionRecord { j: 0, n_j: 1, next_abs: Some(3), gap: 0.1 });
        check(ReductionStep { iteration: 0, w_norm: 1e-3, ratio: None, residual: 1e-3 });
        check(ResonanceRow { j: 0, n: 0, distance: 0.1 });
        check(LyapunovRow { e: 0.0, n: 10, lyapunov: 0.1 });
        check(GrowthRow { e: 0.0, s: 1, sup_norm: 2.0 });
        check(MFunctionRow {
            e: 0.0,
            eps: 0.1,
            mplus_re: 0.0,
            mplus_im: 1.0,
            mminus_re: 0.0,
            mminus_im: 1.0,
            big_m_re: 0.0,
            big_m_im: 1.0,
            est_error: 0.0,
            depth: 64,
        });
        let rec = TxRecord {
            x1: Complex64::new(1.0, 2.0),
            x2: 3.0,
            det_x: 1.0,
            norm_x: 4.0,
            invnorm_x: 0.25,
        };
        check(TxRow::new("closed", 5, &rec));
    }

    #[test]
    fn empty_table_has_header() {
        let mut buf = Vec::new();
        to_csv::<IdsRow, _>(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "E,N\n");
    }

    #[test]
    fn csv_and_json_agree() {
        let rows = [IdsRow { e: -1.0, n: 0.25 }, IdsRow { e: 1.0, n: 0.75 }];
        let mut csv_buf = Vec::new();
        to_csv(&rows, &mut csv_buf).unwrap();
        assert_eq!(String::from_utf8(csv_buf).unwrap(), "E,N\n-1.0,0.25\n1.0,0.75\n");
        let mut json_buf = Vec::new();
        to_json(&rows, &mut json_buf).unwrap();
        let back: Vec<IdsRow> = serde_json::from_slice(&json_buf).unwrap();
        assert_eq!(back, rows);
    }

    #[test]
    fn format_parse() {
        assert_eq!("CSV".parse::<Format>().unwrap(), Format::Csv);
        assert_eq!("json".parse::<Format>().unwrap().extension(), "json");
        assert!("xml".parse::<Format>().is_err());
    }
}
