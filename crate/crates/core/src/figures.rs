//! Figure assets: embedded rasters pass through byte-for-byte; clusters of
//! vector strokes outside any table become render specs for an external
//! rasterizer.

use std::io;
use std::path::Path;

use petgraph::unionfind::UnionFind;
use serde::{Deserialize, Serialize};

use crate::doc::{order_chars, render_text, Char, Page, PayloadRef, TextOptions, VectorSegment};
use crate::geometry::BBox;
use crate::tables::TableGrid;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FigureConfig {
    pub min_figure_area: f64,
    pub target_dpi: f64,
    /// Segments whose endpoints are this close belong to one drawing.
    pub adjacency: f64,
    /// Segments inside a table box grown by this much are table rules.
    pub table_margin: f64,
    /// Text within this distance of a figure is attached to it.
    pub text_margin: f64,
    pub iou_threshold: f64,
}

impl Default for FigureConfig {
    fn default() -> Self {
        Self {
            min_figure_area: 2000.0,
            target_dpi: 150.0,
            adjacency: 5.0,
            table_margin: 2.0,
            text_margin: 24.0,
            iou_threshold: 0.5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FigureKind {
    Embedded,
    RasterizedVector,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RenderSpec {
    pub bbox: BBox,
    pub target_dpi: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum FigurePayload {
    Embedded {
        format_tag: String,
        bytes: PayloadRef,
        resolution: f64,
    },
    Render(RenderSpec),
}

#[derive(Clone, Debug, PartialEq)]
pub struct FigureAsset {
    pub page_index: usize,
    pub bbox: BBox,
    pub kind: FigureKind,
    pub payload: FigurePayload,
    /// Reading-order text on or around the figure; the caption handed to
    /// text-only backends.
    pub enclosed_text: String,
}

fn connected(a: &VectorSegment, b: &VectorSegment, adjacency: f64) -> bool {
    let ends = |s: &VectorSegment| [s.p0, s.p1];
    ends(a)
        .iter()
        .any(|p| ends(b).iter().any(|q| p.distance(q) <= adjacency))
        || a.bbox().intersects(&b.bbox())
}

fn text_near(page: &Page, region: &BBox) -> String {
    let chars: Vec<&Char> = page
        .chars()
        .filter(|c| region.contains_point(c.bbox.center()))
        .collect();
    let opts = TextOptions::default();
    render_text(&order_chars(&chars, opts.row_tol), &opts)
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn extract_figures(page: &Page, tables: &[TableGrid], cfg: &FigureConfig) -> Vec<FigureAsset> {
    let mut assets = Vec::new();
    for img in &page.embedded_images {
        assets.push(FigureAsset {
            page_index: page.index,
            bbox: img.bbox,
            kind: FigureKind::Embedded,
            payload: FigurePayload::Embedded {
                format_tag: img.format_tag.clone(),
                bytes: img.payload_ref.clone(),
                resolution: img.resolution,
            },
            enclosed_text: text_near(page, &img.bbox.expand(cfg.text_margin)),
        });
    }

    let table_boxes: Vec<BBox> = tables.iter().map(TableGrid::bbox).collect();
    let free: Vec<&VectorSegment> = page
        .vector_segments
        .iter()
        .filter(|s| {
            !table_boxes
                .iter()
                .any(|t| s.bbox().within(&t.expand(cfg.table_margin), 0.0))
        })
        .collect();

    let mut uf = UnionFind::<usize>::new(free.len());
    for i in 0..free.len() {
        for j in i + 1..free.len() {
            if connected(free[i], free[j], cfg.adjacency) {
                uf.union(i, j);
            }
        }
    }
    let mut clusters: std::collections::BTreeMap<usize, BBox> = Default::default();
    for (i, s) in free.iter().enumerate() {
        clusters
            .entry(uf.find(i))
            .and_modify(|b| *b = b.union(&s.bbox()))
            .or_insert_with(|| s.bbox());
    }
    let mut drawings: Vec<BBox> = clusters
        .into_values()
        .filter(|b| b.area() >= cfg.min_figure_area)
        .filter(|b| !table_boxes.iter().any(|t| t.iou(b) >= cfg.iou_threshold))
        .collect();
    drawings.sort_by(|a, b| a.y0.total_cmp(&b.y0).then(a.x0.total_cmp(&b.x0)));
    for bbox in drawings {
        let bbox = bbox.intersection(&page.bounds()).unwrap_or(bbox);
        assets.push(FigureAsset {
            page_index: page.index,
            bbox,
            kind: FigureKind::RasterizedVector,
            payload: FigurePayload::Render(RenderSpec {
                bbox,
                target_dpi: cfg.target_dpi,
            }),
            enclosed_text: text_near(page, &bbox.expand(cfg.text_margin)),
        });
    }
    assets
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub page_index: usize,
    pub bbox: BBox,
    pub kind: FigureKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub payload_path: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub render_spec: Option<RenderSpec>,
}

fn extension(format_tag: &str) -> &str {
    match format_tag {
        "jpeg" | "jpg" => "jpg",
        "png" => "png",
        "jp2" => "jp2",
        "jbig2" => "jb2",
        "tiff" => "tif",
        _ => "bin",
    }
}

/// Writes embedded payloads under `dir/assets/` and returns manifest entries
/// whose `payload_path` is relative to `dir`.
pub fn write_assets(dir: &Path, assets: &[FigureAsset]) -> io::Result<Vec<ManifestEntry>> {
    let mut entries = Vec::with_capacity(assets.len());
    for (i, a) in assets.iter().enumerate() {
        let (payload_path, render_spec) = match &a.payload {
            FigurePayload::Embedded { format_tag, bytes, .. } => {
                let data = bytes.bytes().ok_or_else(|| {
                    io::Error::new(io::ErrorKind::InvalidData, "unresolved payload reference")
                })?;
                let rel = format!("assets/p{}_fig{:03}.{}", a.page_index, i, extension(format_tag));
                let path = dir.join(&rel);
                if let Some(parent) = path.parent() {
                    std::fs::create_dir_all(parent)?;
                }
                std::fs::write(path, data)?;
                (Some(rel), None)
            }
            FigurePayload::Render(spec) => (None, Some(*spec)),
        };
        entries.push(ManifestEntry {
            page_index: a.page_index,
            bbox: a.bbox,
            kind: a.kind,
            payload_path,
            render_spec,
        });
    }
    Ok(entries)
}
