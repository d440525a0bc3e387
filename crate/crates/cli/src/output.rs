use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use tri_ident_core::manifold::IntersectionManifold;
use tri_ident_core::measure::{GriddedCdf, IsoLevelSet};

use crate::error::CliError;

pub const REPORT_SCHEMA: &str = "tri-ident.report.v1";
pub const MANIFEST_SCHEMA: &str = "tri-ident.manifest.v1";

/// Round-trip decimal form with 17 significant digits.
pub fn fmt17(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

/// Output directory that remembers what it wrote, for the manifest.
pub struct OutDir {
    root: PathBuf,
    files: Vec<String>,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(root)?;
        Ok(Self { root: root.to_path_buf(), files: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }

    fn record(&mut self, name: &str) -> PathBuf {
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
        self.root.join(name)
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value)
            .map_err(|e| CliError::Config(format!("cannot serialise {name}: {e}")))?;
        text.push('\n');
        std::fs::write(self.record(name), text)?;
        Ok(())
    }

    pub fn csv(&mut self, name: &str, header: &[String], rows: &[Vec<String>]) -> Result<(), CliError> {
        let path = self.record(name);
        let mut w =
            csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path).map_err(csv_err)?;
        w.write_record(header).map_err(csv_err)?;
        for r in rows {
            w.write_record(r).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn text(&mut self, name: &str, body: &str) -> Result<(), CliError> {
        std::fs::write(self.record(name), body)?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Io(std::io::Error::other(e.to_string()))
}

/// Report envelope shared by every command.
#[derive(Serialize)]
pub struct Envelope<'a, T: Serialize> {
    pub schema: &'static str,
    pub command: &'a str,
    pub verdict: &'static str,
    pub exit_code: i32,
    pub summary: serde_json::Value,
    pub report: T,
}

#[derive(Serialize)]
pub struct Manifest<'a, C: Serialize> {
    pub schema: &'static str,
    pub command: &'a str,
    pub version: &'static str,
    pub seed: Option<u64>,
    pub tolerances: serde_json::Value,
    pub config: &'a C,
    pub files: Vec<String>,
}

pub fn coordinate_header(prefix: &[&str], d: usize, suffix: &[&str]) -> Vec<String> {
    let mut h: Vec<String> = prefix.iter().map(|s| s.to_string()).collect();
    h.extend((1..=d).map(|i| format!("x{i}")));
    h.extend(suffix.iter().map(|s| s.to_string()));
    h
}

/// `component_id, node_index, x1…xd, F_z, F_zprime, classification`.
pub fn manifold_rows(
    manifolds: &[IntersectionManifold],
    fz: &GriddedCdf,
    fzp: &GriddedCdf,
) -> (Vec<String>, Vec<Vec<String>>) {
    let d = fz.dim();
    let header = coordinate_header(&["component_id", "node_index"], d, &["F_z", "F_zprime", "classification"]);
    let mut rows = Vec::new();
    for (c, m) in manifolds.iter().enumerate() {
        for (i, (p, class)) in m.points.iter().zip(&m.classification).enumerate() {
            let mut r = vec![c.to_string(), i.to_string()];
            r.extend(p.iter().map(|v| fmt17(*v)));
            r.push(fmt17(fz.at(p)));
            r.push(fmt17(fzp.at(p)));
            r.push(class.as_str().to_string());
            rows.push(r);
        }
    }
    (header, rows)
}

/// `cdf, level, path_id, node_index, x1…xd`.
pub fn contour_rows(families: &[(&str, &[IsoLevelSet])], d: usize) -> (Vec<String>, Vec<Vec<String>>) {
    let header = coordinate_header(&["cdf", "level", "path_id", "node_index"], d, &[]);
    let mut rows = Vec::new();
    for (name, sets) in families {
        for set in *sets {
            for (pid, path) in set.paths.iter().enumerate() {
                for (k, &i) in path.iter().enumerate() {
                    let mut r = vec![name.to_string(), fmt17(set.level), pid.to_string(), k.to_string()];
                    r.extend(set.points[i].iter().map(|v| fmt17(*v)));
                    rows.push(r);
                }
            }
        }
    }
    (header, rows)
}

/// `node_index, x1…xd, F_z, F_zprime`.
pub fn cdf_rows(fz: &GriddedCdf, fzp: &GriddedCdf) -> (Vec<String>, Vec<Vec<String>>) {
    let grid = fz.grid();
    let header = coordinate_header(&["node_index"], grid.dim(), &["F_z", "F_zprime"]);
    let rows = (0..grid.len())
        .map(|f| {
            let mut r = vec![f.to_string()];
            r.extend(grid.node(f).iter().map(|v| fmt17(*v)));
            r.push(fmt17(fz.value_at_node(f)));
            r.push(fmt17(fzp.value_at_node(f)));
            r
        })
        .collect();
    (header, rows)
}

pub struct Layer<'a> {
    pub stroke: &'a str,
    pub width: f64,
    pub polylines: Vec<Vec<[f64; 2]>>,
}

/// Static SVG of polylines in the box `[lo, hi]`, y axis pointing up.
/// Coordinates are printed with three decimals, so identical input gives
/// identical bytes.
pub fn render_svg(lo: [f64; 2], hi: [f64; 2], layers: &[Layer]) -> String {
    const SIZE: f64 = 600.0;
    const PAD: f64 = 20.0;
    let sx = (SIZE - 2.0 * PAD) / (hi[0] - lo[0]);
    let sy = (SIZE - 2.0 * PAD) / (hi[1] - lo[1]);
    let px = |p: &[f64; 2]| (PAD + (p[0] - lo[0]) * sx, SIZE - PAD - (p[1] - lo[1]) * sy);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(
        s,
        r#"<rect x="{PAD}" y="{PAD}" width="{w}" height="{w}" fill="none" stroke="black" stroke-width="1"/>"#,
        w = SIZE - 2.0 * PAD
    );
    for layer in layers {
        let _ = writeln!(s, r#"<g fill="none" stroke="{}" stroke-width="{}">"#, layer.stroke, layer.width);
        for line in &layer.polylines {
            if line.len() < 2 {
                continue;
            }
            let pts: Vec<String> = line
                .iter()
                .map(|p| {
                    let (x, y) = px(p);
                    format!("{x:.3},{y:.3}")
                })
                .collect();
            let _ = writeln!(s, r#"<polyline points="{}"/>"#, pts.join(" "));
        }
        let _ = writeln!(s, "</g>");
    }
    s.push_str("</svg>\n");
    s
}

pub fn level_polylines(sets: &[IsoLevelSet]) -> Vec<Vec<[f64; 2]>> {
    sets.iter()
        .flat_map(|set| {
            set.paths.iter().map(move |p| p.iter().map(|&i| [set.points[i][0], set.points[i][1]]).collect())
        })
        .collect()
}

pub fn manifold_polylines(ms: &[IntersectionManifold]) -> Vec<Vec<[f64; 2]>> {
    ms.iter()
        .flat_map(|m| m.paths.iter().map(move |p| p.iter().map(|&i| [m.points[i][0], m.points[i][1]]).collect()))
        .collect()
}

/// Figure of both contour families and the intersection components of a
/// 2-D pair; `None` in other dimensions.
pub fn contour_svg(
    fz: &GriddedCdf,
    z_sets: &[IsoLevelSet],
    zp_sets: &[IsoLevelSet],
    manifolds: &[IntersectionManifold],
) -> Option<String> {
    let grid = fz.grid();
    if grid.dim() != 2 {
        return None;
    }
    let lo = grid.lower_corner();
    let hi = grid.upper_corner();
    Some(render_svg(
        [lo[0], lo[1]],
        [hi[0], hi[1]],
        &[
            Layer { stroke: "#1f77b4", width: 1.0, polylines: level_polylines(z_sets) },
            Layer { stroke: "#d62728", width: 1.0, polylines: level_polylines(zp_sets) },
            Layer { stroke: "#000000", width: 2.5, polylines: manifold_polylines(manifolds) },
        ],
    ))
}

/// Reads a headerless or headed numeric CSV into points.
pub fn read_points(path: &Path) -> Result<Vec<Vec<f64>>, CliError> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let parsed: Result<Vec<f64>, _> = rec.iter().map(|f| f.parse::<f64>()).collect();
        match parsed {
            Ok(p) => out.push(p),
            Err(_) if line == 0 => continue,
            Err(_) => return Err(CliError::Config(format!("{}: non-numeric row {}", path.display(), line + 1))),
        }
    }
    if out.is_empty() {
        return Err(CliError::Config(format!("{}: no data rows", path.display())));
    }
    Ok(out)
}
