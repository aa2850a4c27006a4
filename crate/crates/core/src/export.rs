//! CSV exports for fields, revival reports and moment series.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use crate::analysis::{Moments, RevivalReport};
use crate::error::{Error, Result};
use crate::field::ComplexField;

pub const FIELD_HEADER: &str = "# t_s, x_m, re, im, abs2";

/// Full double precision: 17 significant digits.
fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes a field row-major over the grid (time-major, then x).
pub fn write_field_csv<W: Write>(field: &ComplexField, mut w: W) -> io::Result<()> {
    writeln!(w, "{FIELD_HEADER}")?;
    let g = &field.grid;
    for j in 0..g.nt {
        let t = num(g.t(j));
        for i in 0..g.nx {
            let v = field.values[[j, i]];
            writeln!(w, "{t}, {}, {}, {}, {}", num(g.x(i)), num(v.re), num(v.im), num(v.norm_sqr()))?;
        }
    }
    Ok(())
}

pub fn write_revivals_csv<W: Write>(report: &RevivalReport, scenario_hash: &str, mut w: W) -> io::Result<()> {
    writeln!(w, "# threshold = {}, reference = {}, baseline = {}", num(report.threshold), num(report.reference), num(report.baseline))?;
    writeln!(w, "# scenario_sha256 = {scenario_hash}")?;
    writeln!(w, "time_s, intensity, fwhm_s")?;
    for p in &report.peaks {
        writeln!(w, "{}, {}, {}", num(p.time), num(p.intensity), num(p.width_fwhm))?;
    }
    Ok(())
}

pub fn write_moments_csv<W: Write>(series: &[(f64, Moments)], mut w: W) -> io::Result<()> {
    writeln!(w, "# t_s, centroid_m, rms_width_m, total_intensity")?;
    for (t, m) in series {
        writeln!(w, "{}, {}, {}, {}", num(*t), num(m.centroid), num(m.rms_width), num(m.total_intensity))?;
    }
    Ok(())
}

/// Writes through a temporary sibling file and renames it into place.
pub fn write_atomic<F>(path: &Path, body: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<fs::File>) -> io::Result<()>,
{
    let name = path
        .file_name()
        .ok_or_else(|| Error::invalid(format!("{} has no file name", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp", name.to_string_lossy()));
    let run = || -> io::Result<()> {
        let mut w = BufWriter::new(fs::File::create(&tmp)?);
        body(&mut w)?;
        w.into_inner().map_err(|e| e.into_error())?.sync_all()?;
        fs::rename(&tmp, path)
    };
    run().map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}
