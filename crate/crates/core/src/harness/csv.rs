use std::io::{BufRead, Write};
use std::path::Path;

use super::sweep::BerPoint;
use crate::{Error, Result};

pub const HEADER: &str =
    "detector,modulation,channel,nu_max,num_paths,snr_db,frames,bits,bit_errors,ber,mean_iters,mult_count,seed";

/// Fixed-point decimal with 10 significant digits. The digit count is taken
/// after rounding, so formatting a parsed value reproduces the same text.
pub fn format_float(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".into() } else { x.to_string() };
    }
    let sci = format!("{x:.9e}");
    let exp: i32 = sci.rsplit('e').next().and_then(|e| e.parse().ok()).unwrap_or(0);
    let decimals = (9 - exp).max(0) as usize;
    format!("{x:.decimals$}")
}

fn row(p: &BerPoint) -> String {
    [
        p.detector.clone(),
        p.modulation.clone(),
        p.channel.clone(),
        format_float(p.nu_max),
        p.num_paths.to_string(),
        format_float(p.snr_db),
        p.frames.to_string(),
        p.bits.to_string(),
        p.bit_errors.to_string(),
        format_float(p.ber),
        format_float(p.mean_iters),
        p.mult_count.to_string(),
        p.seed.to_string(),
    ]
    .join(",")
}

pub fn write_points<W: Write>(points: &[BerPoint], mut w: W) -> Result<()> {
    writeln!(w, "{HEADER}")?;
    for p in points {
        writeln!(w, "{}", row(p))?;
    }
    Ok(())
}

/// Writes the sweep result to `path`.
pub fn emit_csv(points: &[BerPoint], path: impl AsRef<Path>) -> Result<()> {
    let mut buf = Vec::new();
    write_points(points, &mut buf)?;
    std::fs::write(path, buf)?;
    Ok(())
}

fn field<T: std::str::FromStr>(s: &str, name: &str, line: usize) -> Result<T> {
    s.parse().map_err(|_| Error::Parse(format!("line {line}: bad {name} {s:?}")))
}

/// Parses a file written by [`write_points`]. Fields not stored in the file
/// (failed frames, wall time) come back as zero.
pub fn read_points<R: BufRead>(r: R) -> Result<Vec<BerPoint>> {
    let mut lines = r.lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    if header.trim_end() != HEADER {
        return Err(Error::Parse("missing or unexpected header".into()));
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let ln = i + 2;
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 13 {
            return Err(Error::Parse(format!("line {ln}: expected 13 fields, got {}", f.len())));
        }
        out.push(BerPoint {
            detector: f[0].to_string(),
            modulation: f[1].to_string(),
            channel: f[2].to_string(),
            nu_max: field(f[3], "nu_max", ln)?,
            num_paths: field(f[4], "num_paths", ln)?,
            snr_db: field(f[5], "snr_db", ln)?,
            frames: field(f[6], "frames", ln)?,
            bits: field(f[7], "bits", ln)?,
            bit_errors: field(f[8], "bit_errors", ln)?,
            ber: field(f[9], "ber", ln)?,
            mean_iters: field(f[10], "mean_iters", ln)?,
            mult_count: field(f[11], "mult_count", ln)?,
            seed: field(f[12], "seed", ln)?,
            failed_frames: 0,
            wall_time_s: 0.0,
        });
    }
    Ok(out)
}
