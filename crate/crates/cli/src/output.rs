//! File emission: atomic writes, CSV tables and the region SVG.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use wslab_core::ranges::{PlotPoint, Region, RegionAtlas};

use crate::error::{CliError, CliResult};

/// Writes `contents` to `path` through a sibling temp file and a rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> CliResult<()> {
    let wrap = |source| CliError::Write {
        path: path.to_path_buf(),
        source,
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&dir).map_err(wrap)?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    let result = (|| {
        let mut file = std::fs::File::create(&tmp)?;
        file.write_all(contents)?;
        file.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = std::fs::remove_file(&tmp);
    }
    result.map_err(wrap)
}

/// Minimal CSV builder: header row, dot decimals, no quoting needed for the
/// identifiers and numbers emitted here.
pub struct Csv {
    text: String,
    columns: usize,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Self {
            text: format!("{}\n", header.join(",")),
            columns: header.len(),
        }
    }

    pub fn row(&mut self, cells: &[String]) {
        debug_assert_eq!(cells.len(), self.columns);
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.text.into_bytes()
    }
}

pub fn region_csv(atlas: &RegionAtlas) -> Csv {
    let mut csv = Csv::new(&["inv_r", "inv_q", "region", "member", "margin"]);
    for cell in &atlas.cells {
        for m in &cell.verdict.regions {
            csv.row(&[
                cell.inv_r.to_string(),
                cell.inv_q.to_string(),
                m.region.name().to_string(),
                m.member.to_string(),
                m.margin.to_string(),
            ]);
        }
    }
    csv
}

fn style(region: Region) -> (&'static str, &'static str) {
    match region {
        Region::StrichartzWave => ("#1f77b4", "6 3"),
        Region::StrichartzSchrodinger => ("#2ca02c", "6 3"),
        Region::BiViaStrichartz => ("#9467bd", "2 4 8 4"),
        Region::BilinearOpen => ("#000000", "none"),
        Region::TransverseNecessary => ("#d62728", "2 3"),
        Region::NontransverseNecessary => ("#ff7f0e", "8 2 2 2"),
    }
}

const SIZE: f64 = 520.0;
const MARGIN: f64 = 60.0;

fn to_px(p: &PlotPoint) -> (f64, f64) {
    let span = SIZE - 2.0 * MARGIN;
    (MARGIN + p.inv_r * span, SIZE - MARGIN - p.inv_q * span)
}

/// Self-contained SVG of the unit square in `(1/r, 1/q)` with one closed
/// polyline per region and a dot at every polygon vertex.
pub fn region_svg(atlas: &RegionAtlas) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}" font-family="sans-serif" font-size="12">"##
    );
    let _ = writeln!(s, r##"<rect width="{SIZE}" height="{SIZE}" fill="#ffffff"/>"##);
    let lo = MARGIN;
    let hi = SIZE - MARGIN;
    let _ = writeln!(
        s,
        r##"<rect x="{lo}" y="{lo}" width="{}" height="{}" fill="none" stroke="#888888" stroke-width="1"/>"##,
        hi - lo,
        hi - lo
    );
    for (i, label) in ["0", "1/4", "1/2", "3/4", "1"].iter().enumerate() {
        let v = i as f64 / 4.0;
        let (x, _) = to_px(&PlotPoint { inv_r: v, inv_q: 0.0 });
        let (_, y) = to_px(&PlotPoint { inv_r: 0.0, inv_q: v });
        let _ = writeln!(s, r##"<text x="{x}" y="{}" text-anchor="middle">{label}</text>"##, hi + 18.0);
        let _ = writeln!(s, r##"<text x="{}" y="{}" text-anchor="end">{label}</text>"##, lo - 8.0, y + 4.0);
    }
    let _ = writeln!(
        s,
        r##"<text x="{}" y="{}" text-anchor="middle" font-size="14">1/r</text>"##,
        SIZE / 2.0,
        SIZE - 15.0
    );
    let _ = writeln!(
        s,
        r##"<text x="18" y="{}" text-anchor="middle" font-size="14" transform="rotate(-90 18 {})">1/q</text>"##,
        SIZE / 2.0,
        SIZE / 2.0
    );
    for (k, boundary) in atlas.boundaries.iter().enumerate() {
        let (color, dash) = style(boundary.region);
        let name = boundary.region.name();
        if !boundary.polygon.is_empty() {
            let mut points: Vec<String> = boundary
                .polygon
                .iter()
                .map(|p| {
                    let (x, y) = to_px(p);
                    format!("{x:.3},{y:.3}")
                })
                .collect();
            points.push(points[0].clone());
            let _ = writeln!(
                s,
                r##"<polyline data-region="{name}" points="{}" fill="none" stroke="{color}" stroke-width="2" stroke-dasharray="{dash}"/>"##,
                points.join(" ")
            );
            for p in &boundary.polygon {
                let (x, y) = to_px(p);
                let _ = writeln!(s, r##"<circle cx="{x:.3}" cy="{y:.3}" r="3" fill="{color}"/>"##);
            }
        }
        let ly = 16.0 + 14.0 * k as f64;
        let _ = writeln!(
            s,
            r##"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="{color}" stroke-width="2" stroke-dasharray="{dash}"/>"##,
            SIZE - 200.0,
            ly - 4.0,
            SIZE - 170.0,
            ly - 4.0
        );
        let _ = writeln!(s, r##"<text x="{}" y="{ly}">{name}</text>"##, SIZE - 165.0);
    }
    let _ = writeln!(
        s,
        r##"<text x="{lo}" y="{}" font-size="13">d = {}</text>"##,
        lo - 12.0,
        atlas.dim
    );
    s.push_str("</svg>\n");
    s
}
