//! CSV / JSON / PGM serialization for every artifact the pipeline produces.
//!
//! CSV files are plain comma-separated text with a header row; floats are
//! written with Rust's shortest round-trip formatting so identical runs
//! produce byte-identical files.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;

use crate::error::{CoreError, Result};
use crate::grid::Grid2;

/// Parsed ASCII PGM (P2) image: width, height, and row-major pixel values,
/// row 0 at the top.
pub struct PgmImage {
    pub width: usize,
    pub height: usize,
    pub maxval: u32,
    pub pixels: Vec<u32>,
}

/// Parse an ASCII PGM (P2) document. `#` comments are allowed anywhere.
pub fn parse_pgm(text: &str) -> Result<PgmImage> {
    let mut tokens = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(|l| l.split_whitespace().map(str::to_owned).collect::<Vec<_>>());
    let magic = tokens.next().ok_or_else(|| CoreError::Parse("empty PGM".into()))?;
    if magic != "P2" {
        return Err(CoreError::Parse(format!("expected P2 magic, got {magic}")));
    }
    let mut next_int = |name: &str| -> Result<u32> {
        tokens
            .next()
            .ok_or_else(|| CoreError::Parse(format!("missing PGM field {name}")))?
            .parse::<u32>()
            .map_err(|e| CoreError::Parse(format!("bad PGM field {name}: {e}")))
    };
    let width = next_int("width")? as usize;
    let height = next_int("height")? as usize;
    let maxval = next_int("maxval")?;
    if width == 0 || height == 0 || maxval == 0 {
        return Err(CoreError::Parse("degenerate PGM dimensions".into()));
    }
    let mut pixels = Vec::with_capacity(width * height);
    for _ in 0..width * height {
        pixels.push(next_int("pixel")?);
    }
    Ok(PgmImage { width, height, maxval, pixels })
}

/// Load a P2 mask and resample it (nearest neighbor) onto the phantom grid.
/// The image is taken to cover the full grid rectangle, row 0 at `y = y1`.
pub fn read_pgm_mask(path: impl AsRef<Path>, grid: &Grid2) -> Result<Array2<bool>> {
    let text = std::fs::read_to_string(path)?;
    let img = parse_pgm(&text)?;
    let threshold = img.maxval / 2;
    let mut mask = Array2::from_elem((grid.ny, grid.nx), false);
    for iy in 0..grid.ny {
        for ix in 0..grid.nx {
            let fx = (grid.x_center(ix) - grid.x0) / (grid.x1 - grid.x0);
            let fy = (grid.y1 - grid.y_center(iy)) / (grid.y1 - grid.y0);
            let px = ((fx * img.width as f64) as usize).min(img.width - 1);
            let py = ((fy * img.height as f64) as usize).min(img.height - 1);
            mask[[iy, ix]] = img.pixels[py * img.width + px] > threshold;
        }
    }
    Ok(mask)
}

/// Shortest round-trip decimal form of a float (deterministic across runs).
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

/// Write a CSV with the given header and rows of already formatted cells.
pub fn write_csv(path: impl AsRef<Path>, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Matrix CSV: header `y, <col names>`, one row per y sample.
pub fn write_matrix_csv(
    path: impl AsRef<Path>,
    ys: &[f64],
    col_names: &[String],
    columns: &[Vec<f64>],
) -> Result<()> {
    if columns.len() != col_names.len() {
        return Err(CoreError::Parse("column names and data disagree".into()));
    }
    let mut out = String::new();
    out.push('y');
    for name in col_names {
        let _ = write!(out, ",{name}");
    }
    out.push('\n');
    for (j, &y) in ys.iter().enumerate() {
        let _ = write!(out, "{}", fmt_f64(y));
        for col in columns {
            let _ = write!(out, ",{}", fmt_f64(col[j]));
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Read a simple numeric CSV back: header names plus one `Vec<f64>` per row.
pub fn read_csv(path: impl AsRef<Path>) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let text = std::fs::read_to_string(&path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| CoreError::Parse("empty CSV".into()))?
        .split(',')
        .map(str::to_owned)
        .collect();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: std::result::Result<Vec<f64>, _> =
            line.split(',').map(|c| c.trim().parse::<f64>()).collect();
        rows.push(row.map_err(|e| CoreError::Parse(format!("row {}: {e}", i + 2)))?);
    }
    Ok((header, rows))
}

/// Serialize any serde value as pretty JSON.
pub fn write_json<T: serde::Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

/// Append a suffix to a path (unlike `with_extension`, dots in the stem are
/// preserved).
fn with_suffix(base: &Path, suffix: &str) -> std::path::PathBuf {
    let mut os = base.as_os_str().to_owned();
    os.push(suffix);
    std::path::PathBuf::from(os)
}

/// Grid metadata sidecar for profile/field CSVs.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct FieldMeta {
    pub dy: f64,
    pub y_lo: f64,
    pub y_hi: f64,
    pub times: Vec<f64>,
}

/// Field CSV (`y` column plus one column per time) with a JSON sidecar.
pub fn write_field(base: impl AsRef<Path>, field: &crate::heat::SpaceTimeField) -> Result<()> {
    let base = base.as_ref();
    let names: Vec<String> = field.ts.iter().map(|t| format!("t={}", fmt_f64(*t))).collect();
    let columns: Vec<Vec<f64>> =
        (0..field.ts.len()).map(|i| field.values.row(i).to_vec()).collect();
    write_matrix_csv(with_suffix(base, ".csv"), &field.ys, &names, &columns)?;
    let meta = FieldMeta {
        dy: field.dy(),
        y_lo: field.ys[0],
        y_hi: field.ys[field.ys.len() - 1],
        times: field.ts.clone(),
    };
    write_json(with_suffix(base, ".json"), &meta)
}

/// Profile CSV: a single-column field at time 0.
pub fn write_profile(base: impl AsRef<Path>, profile: &crate::heat::Profile1D) -> Result<()> {
    let base = base.as_ref();
    write_matrix_csv(
        with_suffix(base, ".csv"),
        profile.ys(),
        &["u0".to_string()],
        &[profile.values().to_vec()],
    )?;
    let (slo, shi) = profile.support();
    let meta = serde_json::json!({
        "dy": profile.dy(),
        "y_lo": profile.grid_bounds().0,
        "y_hi": profile.grid_bounds().1,
        "support": [slo, shi],
    });
    write_json(with_suffix(base, ".json"), &meta)
}

/// Shape summary for manifests (the mask variant stores only its footprint).
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind")]
pub enum ShapeInfo {
    Disk { cx: f64, cy: f64, r: f64 },
    Polygon { vertices: Vec<(f64, f64)> },
    Mask { nx: usize, ny: usize, cells_inside: usize },
}

impl ShapeInfo {
    pub fn of(shape: &crate::geometry::ObjectShape) -> Self {
        use crate::geometry::ObjectShape::*;
        match shape {
            Disk { cx, cy, r } => ShapeInfo::Disk { cx: *cx, cy: *cy, r: *r },
            Polygon { vertices } => ShapeInfo::Polygon { vertices: vertices.clone() },
            Mask { grid, inside } => ShapeInfo::Mask {
                nx: grid.nx,
                ny: grid.ny,
                cells_inside: inside.iter().filter(|&&b| b).count(),
            },
        }
    }
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct PhantomManifest {
    pub grid: Grid2,
    pub object: ShapeInfo,
    pub params: crate::phantom::DatasetParams,
    pub seed: u64,
    pub s_minus: f64,
    pub s_plus: f64,
}

fn write_grid_field(
    path: impl AsRef<Path>,
    grid: &Grid2,
    field: &Array2<f64>,
) -> Result<()> {
    let names: Vec<String> = grid.xs().iter().map(|x| format!("x={}", fmt_f64(*x))).collect();
    let columns: Vec<Vec<f64>> =
        (0..grid.nx).map(|ix| (0..grid.ny).map(|iy| field[[iy, ix]]).collect()).collect();
    write_matrix_csv(path, &grid.ys(), &names, &columns)
}

/// One CSV per physical field plus `phantom.json`.
pub fn write_phantom(dir: impl AsRef<Path>, p: &crate::phantom::PhantomSet) -> Result<Vec<String>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for (name, field) in
        [("mu", &p.mu), ("lambda", &p.lambda), ("psi", &p.psi), ("a", &p.a)]
    {
        let path = dir.join(format!("{name}.csv"));
        write_grid_field(&path, &p.grid, field)?;
        written.push(format!("{name}.csv"));
    }
    let manifest = PhantomManifest {
        grid: p.grid.clone(),
        object: ShapeInfo::of(&p.object),
        params: p.params.clone(),
        seed: p.seed,
        s_minus: p.s_minus,
        s_plus: p.s_plus,
    };
    write_json(dir.join("phantom.json"), &manifest)?;
    written.push("phantom.json".to_string());
    Ok(written)
}

/// Measurement CSV: one row per illumination (side, y, then one column per
/// pixel), plus a JSON manifest.
pub fn write_measurements(
    base: impl AsRef<Path>,
    ms: &crate::forward::MeasurementSet,
) -> Result<()> {
    let base = base.as_ref();
    let mut header: Vec<String> = vec!["side".into(), "y".into()];
    header.extend(ms.s_values.iter().map(|s| format!("s={}", fmt_f64(*s))));
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let m1 = ms.illum_heights.len();
    let mut rows = Vec::with_capacity(2 * m1);
    for i in 0..2 * m1 {
        let (side, y) = if i < m1 {
            ("L", ms.illum_heights[i])
        } else {
            ("R", ms.illum_heights[i - m1])
        };
        let mut row = vec![side.to_string(), fmt_f64(y)];
        for k in 0..ms.s_values.len() {
            row.push(fmt_f64(ms.p[[k, i]]));
        }
        rows.push(row);
    }
    write_csv(with_suffix(base, ".csv"), &header_refs, &rows)?;
    let manifest = serde_json::json!({
        "s_values": ms.s_values,
        "illum_heights": ms.illum_heights,
        "c": ms.c,
        "photon_scale": ms.photon_scale,
        "m1": m1,
        "m2": ms.s_values.len(),
    });
    write_json(with_suffix(base, ".json"), &manifest)
}

/// Sigma profile CSV (`y, sigma, sigma_prime`) plus JSON with the branch
/// data.
pub fn write_sigma_profile(
    base: impl AsRef<Path>,
    prof: &crate::forward::SigmaProfile,
) -> Result<()> {
    let base = base.as_ref();
    write_matrix_csv(
        with_suffix(base, ".csv"),
        &prof.ys,
        &["sigma".to_string(), "sigma_prime".to_string()],
        &[prof.sigma.clone(), prof.sigma_prime.clone()],
    )?;
    let ((a1, b1), (a2, b2)) = prof.observation_intervals();
    let manifest = serde_json::json!({
        "s": prof.s,
        "side": prof.side,
        "y_lo": prof.y_lo,
        "y_hi": prof.y_hi,
        "xi1": prof.xi1,
        "xi2": prof.xi2,
        "t1": prof.t1,
        "t2": prof.t2,
        "t": prof.t_obs,
        "t1_eq_t2": (prof.t1 - prof.t2).abs() <= 1e-10 * prof.t1.max(prof.t2),
        "intervals": [[a1, b1], [a2, b2]],
    });
    write_json(with_suffix(base, ".json"), &manifest)
}

/// Dense block CSV plus JSON manifest.
pub fn write_block(base: impl AsRef<Path>, block: &crate::linsys::SystemBlock) -> Result<()> {
    let base = base.as_ref();
    let mut out = String::new();
    for i in 0..block.a.nrows() {
        let row: Vec<String> = block.a.row(i).iter().map(|v| fmt_f64(*v)).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    std::fs::write(with_suffix(base, ".csv"), out)?;
    let manifest = serde_json::json!({
        "s": block.s,
        "c": block.c,
        "rows": block.a.nrows(),
        "cols": block.a.ncols(),
        "illum_heights": block.illum_heights,
        "column_mask": block.column_mask,
        "row_mask": block.row_mask,
        "b": block.b.to_vec(),
    });
    write_json(with_suffix(base, ".json"), &manifest)
}

/// Reconstruction CSV: `cell, y, mu_true, mu_limited, mu_full`.
pub fn write_reconstruction(
    path: impl AsRef<Path>,
    cells: &[usize],
    ys: &[f64],
    mu_true: &[f64],
    mu_limited: &[f64],
    mu_full: &[f64],
) -> Result<()> {
    let rows: Vec<Vec<String>> = cells
        .iter()
        .enumerate()
        .map(|(k, &cell)| {
            vec![
                cell.to_string(),
                fmt_f64(ys[k]),
                fmt_f64(mu_true[k]),
                fmt_f64(mu_limited[k]),
                fmt_f64(mu_full[k]),
            ]
        })
        .collect();
    write_csv(path, &["cell", "y", "mu_true", "mu_limited", "mu_full"], &rows)
}

/// Sweep CSV: `t_prime, sup_ratio` rows.
pub fn write_sweep(path: impl AsRef<Path>, sweep: &[(f64, f64)]) -> Result<()> {
    let rows: Vec<Vec<String>> =
        sweep.iter().map(|&(a, b)| vec![fmt_f64(a), fmt_f64(b)]).collect();
    write_csv(path, &["t_prime", "sup_ratio"], &rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_round_trip_onto_grid() {
        let text = "P2\n# tiny test image\n4 2\n255\n0 255 255 0\n0 0 255 0\n";
        let img = parse_pgm(text).unwrap();
        assert_eq!((img.width, img.height, img.maxval), (4, 2, 255));
        let dir = std::env::temp_dir().join("lsfm_core_pgm_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("mask.pgm");
        std::fs::write(&path, text).unwrap();
        let grid = Grid2::new(0.0, 2.0, -1.0, 1.0, 4, 2).unwrap();
        let mask = read_pgm_mask(&path, &grid).unwrap();
        // PGM row 0 is the top row (y = +1): bright pixels at columns 1, 2
        assert!(mask[[1, 1]] && mask[[1, 2]]);
        assert!(!mask[[1, 0]] && !mask[[1, 3]]);
        // bottom row: bright pixel at column 2 only
        assert!(mask[[0, 2]]);
        assert!(!mask[[0, 0]] && !mask[[0, 1]] && !mask[[0, 3]]);
    }

    #[test]
    fn pgm_rejects_garbage() {
        assert!(parse_pgm("P5\n2 2\n255\n0 0 0 0").is_err());
        assert!(parse_pgm("P2\n2 2\n255\n0 0 0").is_err());
    }

    #[test]
    fn csv_write_read() {
        let dir = std::env::temp_dir().join("lsfm_core_csv_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("t.csv");
        write_matrix_csv(
            &path,
            &[0.0, 0.5, 1.0],
            &["a".into(), "b".into()],
            &[vec![1.0, 2.0, 3.0], vec![0.1, 0.2, 0.25]],
        )
        .unwrap();
        let (header, rows) = read_csv(&path).unwrap();
        assert_eq!(header, vec!["y", "a", "b"]);
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[2], vec![1.0, 3.0, 0.25]);
    }
}
