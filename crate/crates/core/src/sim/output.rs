//! Time-series records, CSV persistence and field snapshot dumps.
//!
//! Floating-point values are written with 17 significant digits so a file
//! round-trips to the exact same f64 bits.

use std::io::Write;
use std::path::Path;

use crate::error::Result;
use crate::field::FieldGrid;

#[derive(Debug, Clone)]
pub struct Record {
    pub t: f64,
    pub z: Vec<f64>,
    pub kappa: Vec<f64>,
    pub avg_sigma: Vec<f64>,
    pub v: Vec<f64>,
    pub volume: f64,
    pub surface_energy: f64,
    pub flux_residual: f64,
}

#[derive(Debug, Clone, Default)]
pub struct TimeSeries {
    pub records: Vec<Record>,
}

impl TimeSeries {
    pub fn push(&mut self, r: Record) {
        if let Some(last) = self.records.last() {
            debug_assert!(r.t > last.t, "records must advance in time");
        }
        self.records.push(r);
    }

    pub fn csv_header(n_facets: usize) -> String {
        let mut cols = vec!["t".to_string()];
        for name in ["z", "kappa", "avg_sigma", "v"] {
            for i in 0..n_facets {
                cols.push(format!("{name}_{i}"));
            }
        }
        cols.push("volume".into());
        cols.push("surface_energy".into());
        cols.push("flux_residual".into());
        cols.join(",")
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        if let Some(first) = self.records.first() {
            out.push_str(&Self::csv_header(first.z.len()));
            out.push('\n');
        }
        for r in &self.records {
            let mut cols = vec![fmt(r.t)];
            for block in [&r.z, &r.kappa, &r.avg_sigma, &r.v] {
                cols.extend(block.iter().map(|x| fmt(*x)));
            }
            cols.push(fmt(r.volume));
            cols.push(fmt(r.surface_energy));
            cols.push(fmt(r.flux_residual));
            out.push_str(&cols.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_csv().as_bytes())?;
        Ok(())
    }
}

/// 17 significant digits: enough to reproduce any f64 exactly.
fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

/// Self-describing text dump of the grid: a fixed header, then the sigma
/// values in row-major (i, j, k) order, one per line. Interior cells are
/// written as-is; the mask line allows reconstruction.
pub fn write_snapshot(grid: &FieldGrid, t: f64, path: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "facetgrow-snapshot v1")?;
    writeln!(f, "n {}", grid.n)?;
    writeln!(f, "h {}", fmt(grid.h))?;
    writeln!(f, "r {}", fmt(grid.r))?;
    writeln!(
        f,
        "origin {} {} {}",
        fmt(grid.origin.x),
        fmt(grid.origin.y),
        fmt(grid.origin.z)
    )?;
    writeln!(f, "t {}", fmt(t))?;
    writeln!(f, "sigma_inf {}", fmt(grid.sigma_inf))?;
    for s in &grid.sigma {
        writeln!(f, "{}", fmt(*s))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_roundtrips_exact_bits() {
        let mut ts = TimeSeries::default();
        ts.push(Record {
            t: 0.1,
            z: vec![1.0 / 3.0, -2.0e-17],
            kappa: vec![-2.0, -1.5],
            avg_sigma: vec![0.0, 0.3],
            v: vec![0.1, 0.2],
            volume: std::f64::consts::PI,
            surface_energy: 12.0 * 3.0_f64.sqrt(),
            flux_residual: 1e-300,
        });
        let csv = ts.to_csv();
        let mut lines = csv.lines();
        let header = lines.next().unwrap();
        assert!(header.starts_with("t,z_0,z_1,kappa_0"));
        let row: Vec<f64> = lines
            .next()
            .unwrap()
            .split(',')
            .map(|s| s.parse().unwrap())
            .collect();
        assert_eq!(row[1], 1.0 / 3.0);
        assert_eq!(row[9], std::f64::consts::PI);
        assert_eq!(row[11], 1e-300);
    }

    #[test]
    fn snapshot_header_and_length() {
        use crate::field::{build_grid, DriftSpec};
        use crate::geometry::{BasePolygon, CrystalState};
        let state = CrystalState::initial(BasePolygon::regular(4, 0.3, 0.3).unwrap());
        let d = state.diameter();
        let grid = build_grid(&state, d, 3.0 * d, 0.4, DriftSpec::Zero, vec![0.0; 6]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("snap.txt");
        write_snapshot(&grid, 0.25, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "facetgrow-snapshot v1");
        assert!(lines.next().unwrap().starts_with("n "));
        let body = text.lines().skip(7).count();
        assert_eq!(body, grid.n * grid.n * grid.n);
    }
}
