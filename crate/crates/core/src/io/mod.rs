//! Files in and out: PGM images, the orientation raster with its range
//! sidecar, the energy-trace CSV and the key = value run configuration.
//!
//! Pixel `(x, r)` (column `x`, row `r` from the top) maps to the interior
//! node `(i, j) = (x, height − 1 − r)`, so the `y` axis points up. The grid
//! spacing is `1/(max(width, height) + 1)` in both directions, i.e. the
//! domain sits inside the unit square whatever the pixel count; `κ`, `λ`,
//! … are therefore tied to the resolution.

mod config;
mod pgm;

pub use config::{AnisotropySpec, RunConfig};
pub use pgm::{encode_pgm, load_pgm, parse_pgm, quantize, save_pgm, ImageBuffer, PgmFormat};

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::grid::{GridSpec, ScalarField};
use crate::scalar::Real;
use crate::solver::Trajectory;

/// Writes `bytes` to a temporary file next to `path`, then renames it over
/// `path`, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|d| !d.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::Config(format!("not a file path: {}", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp: PathBuf = dir.join(tmp_name);
    let result = (|| {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = std::fs::remove_file(&tmp);
    }
    Ok(result?)
}

/// Field on the unit-square grid matching the image's pixels.
pub fn field_from_image<T: Real>(img: &ImageBuffer) -> Result<ScalarField<T>> {
    let grid = GridSpec::<T>::unit(img.width(), img.height())?;
    let h = img.height();
    Ok(ScalarField::from_fn(grid, |i, j| T::lit(img.at(i, h - 1 - j))))
}

/// Image of a field. With `clamp` values are clipped to `[0, 1]` (for export
/// only); without it, values outside `[0, 1]` are an error.
pub fn image_from_field<T: Real>(f: &ScalarField<T>, clamp: bool) -> Result<ImageBuffer> {
    let g = f.grid();
    let (w, h) = (g.nx, g.ny);
    let mut out = Vec::with_capacity(w * h);
    for r in 0..h {
        for x in 0..w {
            let v = f.at(x, h - 1 - r).to_f64_lossy();
            out.push(if clamp { v.clamp(0.0, 1.0) } else { v });
        }
    }
    ImageBuffer::new(w, h, out)
}

/// Affine map of a field from `[min, max]` onto `[0, 1]` (constant fields
/// map to 0); returns the image and the range.
pub fn normalized_image<T: Real>(f: &ScalarField<T>) -> Result<(ImageBuffer, (f64, f64))> {
    let (lo, hi) = (f.min().to_f64_lossy(), f.max().to_f64_lossy());
    let span = hi - lo;
    let mapped = f.map(|v| {
        if span > 0.0 {
            T::lit(((v.to_f64_lossy() - lo) / span).clamp(0.0, 1.0))
        } else {
            T::zero()
        }
    });
    Ok((image_from_field(&mapped, false)?, (lo, hi)))
}

/// Text of the range sidecar written next to an orientation raster.
pub fn range_sidecar(range: (f64, f64)) -> String {
    format!(
        "# pixel = (alpha - min) / (max - min) * maxval\nmin = {:.16e}\nmax = {:.16e}\n",
        range.0, range.1
    )
}

/// Reads back a range sidecar.
pub fn parse_range_sidecar(text: &str) -> Result<(f64, f64)> {
    let mut min = None;
    let mut max = None;
    for line in text.lines() {
        let line = line.split('#').next().unwrap_or("").trim();
        if let Some((k, v)) = line.split_once('=') {
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad number in sidecar: {line}")))?;
            match k.trim() {
                "min" => min = Some(v),
                "max" => max = Some(v),
                _ => {}
            }
        }
    }
    min.zip(max)
        .ok_or_else(|| Error::Config("sidecar needs min and max".into()))
}

/// Writes `stem.pgm` and `stem.range.txt` for an orientation field.
pub fn save_orientation<T: Real>(
    alpha: &ScalarField<T>,
    dir: &Path,
    stem: &str,
    maxval: u16,
) -> Result<(f64, f64)> {
    let (img, range) = normalized_image(alpha)?;
    save_pgm(&img, dir.join(format!("{stem}.pgm")), maxval, PgmFormat::Binary)?;
    write_atomic(
        &dir.join(format!("{stem}.range.txt")),
        range_sidecar(range).as_bytes(),
    )?;
    Ok(range)
}

/// Column header of the energy trace.
pub const TRACE_HEADER: &str =
    "step,t,E_alpha,E_p,E_aniso,E_fid,E_total,diss_l2,diss_h1,ineq_slack,res_alpha,res_u";

/// 17-significant-digit scientific notation.
pub fn fmt_real<T: Real>(v: T) -> String {
    format!("{:.16e}", v.to_f64_lossy())
}

/// One row per state `i = 0…m`.
pub fn energy_trace_csv<T: Real>(traj: &Trajectory<T>) -> String {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for (i, s) in traj.steps().iter().enumerate() {
        let r = &s.report;
        let e = &r.energy_after;
        let cols = [
            traj.time(i),
            e.dirichlet_alpha,
            e.p_term,
            e.aniso_term,
            e.fidelity,
            e.total,
            r.dissipation_l2,
            r.dissipation_h1,
            r.ineq_slack,
            r.res_alpha,
            r.res_u,
        ];
        let _ = write!(out, "{i}");
        for c in cols {
            let _ = write!(out, ",{}", fmt_real(c));
        }
        out.push('\n');
    }
    out
}

/// A parsed energy-trace row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub step: usize,
    pub t: f64,
    pub e_alpha: f64,
    pub e_p: f64,
    pub e_aniso: f64,
    pub e_fid: f64,
    pub e_total: f64,
    pub diss_l2: f64,
    pub diss_h1: f64,
    pub ineq_slack: f64,
    pub res_alpha: f64,
    pub res_u: f64,
}

/// Parses an energy trace written by [`energy_trace_csv`].
pub fn parse_energy_trace(text: &str) -> Result<Vec<TraceRow>> {
    let mut lines = text.lines();
    if lines.next() != Some(TRACE_HEADER) {
        return Err(Error::Parse {
            offset: 0,
            message: "unexpected energy-trace header".into(),
        });
    }
    let mut offset = TRACE_HEADER.len() + 1;
    let mut rows = Vec::new();
    for line in lines {
        let bad = |m: String| Error::Parse { offset, message: m };
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 12 {
            return Err(bad(format!("expected 12 columns, got {}", f.len())));
        }
        let step = f[0].parse().map_err(|_| bad(format!("bad step {}", f[0])))?;
        let mut v = [0.0; 11];
        for (k, s) in f[1..].iter().enumerate() {
            v[k] = s.parse().map_err(|_| bad(format!("bad number {s}")))?;
        }
        rows.push(TraceRow {
            step,
            t: v[0],
            e_alpha: v[1],
            e_p: v[2],
            e_aniso: v[3],
            e_fid: v[4],
            e_total: v[5],
            diss_l2: v[6],
            diss_h1: v[7],
            ineq_slack: v[8],
            res_alpha: v[9],
            res_u: v[10],
        });
        offset += line.len() + 1;
    }
    Ok(rows)
}
