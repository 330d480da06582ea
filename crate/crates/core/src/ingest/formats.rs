use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::analysis::TransitionPoint;
use crate::nonclassicality::EventTally;
use crate::numerics::{DiffDist, PhotonDist};
use crate::{Error, Result};

/// Twelve significant digits, always with a decimal point or exponent.
pub fn format_number(x: f64) -> String {
    if x == 0.0 {
        return "0.0".into();
    }
    let rounded: f64 = format!("{x:.11e}").parse().expect("formatted float parses");
    format!("{rounded:?}")
}

fn format_err(e: impl std::fmt::Display) -> Error {
    Error::Format(e.to_string())
}

fn check_headers<R: Read>(reader: &mut csv::Reader<R>, want: &[&str]) -> Result<()> {
    let headers = reader.headers().map_err(format_err)?;
    let got: Vec<&str> = headers.iter().map(str::trim).collect();
    if got != want {
        return Err(Error::Format(format!("expected header {}, found {}", want.join(","), got.join(","))));
    }
    Ok(())
}

fn read_rows<R: Read, T: for<'de> Deserialize<'de>>(input: R, header: &[&str]) -> Result<Vec<T>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    check_headers(&mut reader, header)?;
    reader
        .deserialize()
        .map(|row| row.map_err(format_err))
        .collect()
}

fn write_lines<W: Write>(mut out: W, header: &str, rows: impl Iterator<Item = String>) -> Result<()> {
    let io = |e: std::io::Error| Error::Format(e.to_string());
    writeln!(out, "{header}").map_err(io)?;
    for row in rows {
        writeln!(out, "{row}").map_err(io)?;
    }
    out.flush().map_err(io)
}

#[derive(Deserialize)]
struct DiffRow {
    dn: i64,
    probability: f64,
}

#[derive(Deserialize)]
struct PhotonRow {
    n: u32,
    probability: f64,
}

#[derive(Deserialize)]
struct TallyRow {
    j: u32,
    k: u32,
    l: u32,
    count: f64,
}

pub fn write_diff_csv<W: Write>(out: W, dist: &DiffDist) -> Result<()> {
    write_lines(out, "dn,probability", dist.iter().map(|(k, p)| format!("{k},{}", format_number(p))))
}

pub fn read_diff_csv<R: Read>(input: R) -> Result<DiffDist> {
    let rows: Vec<DiffRow> = read_rows(input, &["dn", "probability"])?;
    DiffDist::normalize(rows.into_iter().map(|r| (r.dn, r.probability)))
}

pub fn write_photon_csv<W: Write>(out: W, dist: &PhotonDist) -> Result<()> {
    write_lines(out, "n,probability", dist.iter().map(|(k, p)| format!("{k},{}", format_number(p))))
}

pub fn read_photon_csv<R: Read>(input: R) -> Result<PhotonDist> {
    let rows: Vec<PhotonRow> = read_rows(input, &["n", "probability"])?;
    PhotonDist::normalize(rows.into_iter().map(|r| (r.n, r.probability)))
}

pub fn write_tally_csv<W: Write>(out: W, tally: &EventTally) -> Result<()> {
    write_lines(
        out,
        "j,k,l,count",
        tally.iter().map(|((j, k, l), c)| {
            let count = if c.fract() == 0.0 && c < 9.0e15 { format!("{}", c as u64) } else { format_number(c) };
            format!("{j},{k},{l},{count}")
        }),
    )
}

/// Reads a tally; `max_outcome` sets the analysis range.
pub fn read_tally_csv<R: Read>(input: R, max_outcome: u32) -> Result<EventTally> {
    let rows: Vec<TallyRow> = read_rows(input, &["j", "k", "l", "count"])?;
    let mut tally = EventTally::new(max_outcome);
    for r in rows {
        tally.add(r.j, r.k, r.l, r.count)?;
    }
    Ok(tally)
}

pub fn write_transition_csv<W: Write>(out: W, points: &[TransitionPoint]) -> Result<()> {
    write_lines(
        out,
        "alpha_sq,s_classical,nu",
        points
            .iter()
            .map(|p| format!("{},{},{}", format_number(p.alpha_sq), format_number(p.s_classical), p.nu)),
    )
}

#[derive(Serialize, Deserialize)]
struct TransitionRow {
    alpha_sq: f64,
    s_classical: f64,
    nu: usize,
}

pub fn read_transition_csv<R: Read>(input: R) -> Result<Vec<TransitionPoint>> {
    let rows: Vec<TransitionRow> = read_rows(input, &["alpha_sq", "s_classical", "nu"])?;
    Ok(rows
        .into_iter()
        .map(|r| TransitionPoint { alpha_sq: r.alpha_sq, s_classical: r.s_classical, nu: r.nu })
        .collect())
}
