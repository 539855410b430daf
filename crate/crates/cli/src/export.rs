//! File writers. Every file is written to a temporary sibling and renamed
//! into place, so readers never see a partial file.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use mscca_core::util::format_number;

use crate::archive::{PointKind, SolutionArchive};
use crate::config::ExportFormat;
use crate::error::{export_err, CliError};
use crate::run::ScoreTable;

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Export(format!("{}: {e}", dir.display())))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(export_err)?;
    tmp.write_all(bytes).map_err(export_err)?;
    tmp.as_file().sync_all().map_err(export_err)?;
    tmp.persist(path)
        .map_err(|e| CliError::Export(format!("{}: {}", path.display(), e.error)))?;
    Ok(())
}

fn csv_bytes(
    header: &[String],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(export_err)?;
    for row in rows {
        w.write_record(&row).map_err(export_err)?;
    }
    w.into_inner().map_err(export_err)
}

/// Columns point_kind, label, dim1..dimp, mass, size.
pub fn coords_csv(archive: &SolutionArchive) -> Result<Vec<u8>, CliError> {
    let mut header = vec!["point_kind".to_string(), "label".to_string()];
    header.extend((1..=archive.dims).map(|d| format!("dim{d}")));
    header.extend(["mass".to_string(), "size".to_string()]);
    let rows = archive.coordinates.iter().map(|c| {
        let mut row = vec![c.point_kind.name().to_string(), c.label.clone()];
        row.extend(c.coords.iter().map(|x| format_number(*x)));
        row.push(format_number(c.mass));
        row.push(c.size.to_string());
        row
    });
    csv_bytes(&header, rows)
}

pub fn residuals_csv(archive: &SolutionArchive) -> Result<Vec<u8>, CliError> {
    let header: Vec<String> = ["method", "row", "class", "column", "value"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let rows = archive.residuals.iter().map(|r| {
        vec![
            r.method.clone(),
            r.row.clone(),
            r.class.clone(),
            r.column.clone(),
            format_number(r.value),
        ]
    });
    csv_bytes(&header, rows)
}

/// Columns block, obs, dim1..dimp.
pub fn scores_csv(table: &ScoreTable) -> Result<Vec<u8>, CliError> {
    let dims = table.scores.first().map_or(0, |s| s.ncols());
    let mut header = vec!["block".to_string(), "obs".to_string()];
    header.extend((1..=dims).map(|d| format!("dim{d}")));
    let rows = table
        .blocks
        .iter()
        .zip(&table.scores)
        .flat_map(|(name, s)| {
            (0..s.nrows()).map(move |i| {
                let mut row = vec![name.clone(), i.to_string()];
                row.extend(s.row(i).iter().map(|x| format_number(*x)));
                row
            })
        });
    csv_bytes(&header, rows)
}

const SVG_SIZE: f64 = 640.0;
const SVG_MARGIN: f64 = 48.0;

/// Font size of a cluster label; grows with the cluster's share of its
/// class.
pub fn cluster_font_size(share: f64) -> f64 {
    9.0 + 14.0 * share.clamp(0.0, 1.0)
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Scatter of every coordinate record with axes through the origin. Needs
/// a two-dimensional archive.
pub fn render_svg(archive: &SolutionArchive) -> Result<String, CliError> {
    if archive.dims != 2 || archive.coordinates.iter().any(|c| c.coords.len() != 2) {
        return Err(CliError::Export(format!(
            "biplot needs two dimensions, archive has {}",
            archive.dims
        )));
    }
    let extent = archive
        .coordinates
        .iter()
        .flat_map(|c| c.coords.iter().map(|x| x.abs()))
        .fold(0.0_f64, f64::max);
    let extent = if extent > 0.0 { extent * 1.1 } else { 1.0 };
    let half = SVG_SIZE / 2.0;
    let scale = (half - SVG_MARGIN) / extent;
    let px = |x: f64| half + x * scale;
    let py = |y: f64| half - y * scale;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{s}" height="{s}" viewBox="0 0 {s} {s}">"#,
        s = SVG_SIZE
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<line class="axis" x1="{a}" y1="{o}" x2="{b}" y2="{o}" stroke="gray" stroke-width="1"/>"#,
        a = SVG_MARGIN / 2.0,
        b = SVG_SIZE - SVG_MARGIN / 2.0,
        o = half
    );
    let _ = writeln!(
        svg,
        r#"<line class="axis" x1="{o}" y1="{a}" x2="{o}" y2="{b}" stroke="gray" stroke-width="1"/>"#,
        a = SVG_MARGIN / 2.0,
        b = SVG_SIZE - SVG_MARGIN / 2.0,
        o = half
    );
    for c in &archive.coordinates {
        let (x, y) = (px(c.coords[0]), py(c.coords[1]));
        let (color, size, style) = match c.point_kind {
            PointKind::Cluster => (
                "#b2182b",
                cluster_font_size(c.share.unwrap_or(1.0)),
                "normal",
            ),
            PointKind::Class => ("#2166ac", 12.0, "italic"),
            PointKind::Category => ("#1b7837", 11.0, "normal"),
        };
        let _ = writeln!(
            svg,
            r#"<circle class="{k}" cx="{x:.2}" cy="{y:.2}" r="2.5" fill="{color}"/>"#,
            k = c.point_kind.name()
        );
        let _ = writeln!(
            svg,
            r#"<text class="{k}" x="{tx:.2}" y="{ty:.2}" font-size="{size:.2}" font-style="{style}" fill="{color}">{label}</text>"#,
            k = c.point_kind.name(),
            tx = x + 4.0,
            ty = y - 4.0,
            label = escape(&c.label)
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Writes the requested exports; returns the paths written.
pub fn write_outputs(
    archive: &SolutionArchive,
    scores: Option<&ScoreTable>,
    formats: &[ExportFormat],
    out: &Path,
) -> Result<Vec<PathBuf>, CliError> {
    let mut formats = formats.to_vec();
    formats.sort();
    formats.dedup();
    let mut written = Vec::new();
    let mut emit = |name: &str, bytes: &[u8]| -> Result<(), CliError> {
        let path = out.join(name);
        write_atomic(&path, bytes)?;
        written.push(path);
        Ok(())
    };
    for format in formats {
        match format {
            ExportFormat::SolutionJson => emit("solution.json", archive.to_json()?.as_bytes())?,
            ExportFormat::CoordsCsv => emit("coords.csv", &coords_csv(archive)?)?,
            ExportFormat::ResidualsCsv => emit("residuals.csv", &residuals_csv(archive)?)?,
            ExportFormat::Svg => emit("biplot.svg", render_svg(archive)?.as_bytes())?,
        }
    }
    if let Some(table) = scores {
        emit("scores.csv", &scores_csv(table)?)?;
    }
    Ok(written)
}
