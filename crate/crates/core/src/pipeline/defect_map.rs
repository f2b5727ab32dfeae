use std::collections::VecDeque;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::Label;
use crate::error::{Error, Result};
use crate::image::{intensity_range, partition, Anchor, GrayImage, PatchGrid, RgbImage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Classifier,
    Expanded,
    GatedOut,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapEntry {
    pub decision: Label,
    pub provenance: Provenance,
    /// SVM decision value, present for classified patches.
    pub score: Option<f64>,
}

impl MapEntry {
    pub const GATED_OUT: MapEntry = MapEntry {
        decision: Label::NoDefect,
        provenance: Provenance::GatedOut,
        score: None,
    };

    pub fn classified(score: f64) -> Self {
        Self {
            decision: if score > 0.0 { Label::Defect } else { Label::NoDefect },
            provenance: Provenance::Classifier,
            score: Some(score),
        }
    }
}

/// Per-patch decisions for one image, one entry per grid anchor in grid order.
#[derive(Debug, Clone, PartialEq)]
pub struct DefectMap {
    pub image_id: String,
    grid: PatchGrid,
    pub(crate) entries: Vec<MapEntry>,
}

impl DefectMap {
    /// A map with every patch gated out.
    pub fn new(image_id: impl Into<String>, grid: PatchGrid) -> Self {
        let entries = vec![MapEntry::GATED_OUT; grid.len()];
        Self {
            image_id: image_id.into(),
            grid,
            entries,
        }
    }

    pub fn from_entries(image_id: impl Into<String>, grid: PatchGrid, entries: Vec<MapEntry>) -> Result<Self> {
        if entries.len() != grid.len() {
            return Err(Error::Parameter(format!(
                "{} entries for a {}-patch grid",
                entries.len(),
                grid.len()
            )));
        }
        for e in &entries {
            let ok = match e.provenance {
                Provenance::Classifier => e.score.is_some(),
                Provenance::Expanded => e.decision == Label::Defect,
                Provenance::GatedOut => e.decision == Label::NoDefect && e.score.is_none(),
            };
            if !ok {
                return Err(Error::Format(format!("inconsistent map entry {e:?}")));
            }
        }
        Ok(Self {
            image_id: image_id.into(),
            grid,
            entries,
        })
    }

    pub fn grid(&self) -> &PatchGrid {
        &self.grid
    }

    pub fn entries(&self) -> &[MapEntry] {
        &self.entries
    }

    pub fn entry(&self, anchor: Anchor) -> Option<&MapEntry> {
        self.grid.index_of(anchor).map(|i| &self.entries[i])
    }

    pub fn decisions(&self) -> Vec<Label> {
        self.entries.iter().map(|e| e.decision).collect()
    }

    pub fn defect_count(&self) -> usize {
        self.entries.iter().filter(|e| e.decision.is_defect()).count()
    }

    pub fn count(&self, provenance: Provenance) -> usize {
        self.entries.iter().filter(|e| e.provenance == provenance).count()
    }

    pub fn to_json(&self) -> String {
        let wire = WireMap {
            image_id: self.image_id.clone(),
            patch_size: self.grid.patch_size(),
            width: self.grid.image_width(),
            height: self.grid.image_height(),
            entries: self
                .grid
                .anchors()
                .zip(&self.entries)
                .map(|(a, e)| WireEntry {
                    row: a.row,
                    col: a.col,
                    decision: e.decision,
                    provenance: e.provenance,
                    score: e.score,
                })
                .collect(),
        };
        serde_json::to_string_pretty(&wire).expect("defect map serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let wire: WireMap =
            serde_json::from_str(text).map_err(|e| Error::Format(format!("defect map: {e}")))?;
        let grid = partition(wire.width, wire.height, wire.patch_size)
            .map_err(|e| Error::Format(format!("defect map grid: {e}")))?;
        if wire.entries.len() != grid.len() {
            return Err(Error::Format(format!(
                "defect map has {} entries, its grid has {}",
                wire.entries.len(),
                grid.len()
            )));
        }
        let mut entries = vec![MapEntry::GATED_OUT; grid.len()];
        let mut seen = vec![false; grid.len()];
        for w in wire.entries {
            let i = grid
                .index_of(Anchor::new(w.row, w.col))
                .filter(|&i| !seen[i])
                .ok_or_else(|| Error::Format(format!("unexpected or repeated anchor ({}, {})", w.row, w.col)))?;
            seen[i] = true;
            entries[i] = MapEntry {
                decision: w.decision,
                provenance: w.provenance,
                score: w.score,
            };
        }
        Self::from_entries(wire.image_id, grid, entries)
    }
}

#[derive(Serialize, Deserialize)]
struct WireMap {
    image_id: String,
    patch_size: usize,
    width: usize,
    height: usize,
    entries: Vec<WireEntry>,
}

#[derive(Serialize, Deserialize)]
struct WireEntry {
    row: usize,
    col: usize,
    decision: Label,
    provenance: Provenance,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    score: Option<f64>,
}

pub fn write_defect_map(map: &DefectMap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, map.to_json() + "\n").map_err(|e| Error::io(path, e))
}

pub fn read_defect_map(path: impl AsRef<Path>) -> Result<DefectMap> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    DefectMap::from_json(&text)
}

/// Flood-fills defect decisions into 8-adjacent patches whose intensity
/// ranges differ from the current patch's by at most `iv_threshold`.
///
/// Seeds are the classifier-decided defects. Every patch is marked at most
/// once, and a marked patch keeps spreading.
pub fn postprocess_expand(map: &DefectMap, gray: &GrayImage, iv_threshold: f64) -> Result<DefectMap> {
    let grid = &map.grid;
    if gray.width() != grid.image_width() || gray.height() != grid.image_height() {
        return Err(Error::Parameter(format!(
            "image is {}x{} but the map covers {}x{}",
            gray.width(),
            gray.height(),
            grid.image_width(),
            grid.image_height()
        )));
    }
    let mut out = map.clone();
    let mut queue: VecDeque<usize> = out
        .entries
        .iter()
        .enumerate()
        .filter(|(_, e)| e.provenance == Provenance::Classifier && e.decision.is_defect())
        .map(|(i, _)| i)
        .collect();
    if queue.is_empty() {
        return Ok(out);
    }
    let mut ranges: Vec<Option<f64>> = vec![None; grid.len()];
    let mut range = |i: usize| -> Result<f64> {
        if let Some(r) = ranges[i] {
            return Ok(r);
        }
        let (lo, hi) = intensity_range(gray, grid.rect(i))?;
        ranges[i] = Some(hi - lo);
        Ok(hi - lo)
    };
    while let Some(i) = queue.pop_front() {
        let ri = range(i)?;
        let neighbors: Vec<usize> = grid.neighbors(i).collect();
        for j in neighbors {
            if out.entries[j].decision.is_defect() {
                continue;
            }
            if (ri - range(j)?).abs() <= iv_threshold {
                out.entries[j] = MapEntry {
                    decision: Label::Defect,
                    provenance: Provenance::Expanded,
                    score: out.entries[j].score,
                };
                queue.push_back(j);
            }
        }
    }
    Ok(out)
}

const CLASSIFIER_COLOR: [u8; 3] = [230, 30, 30];
const EXPANDED_COLOR: [u8; 3] = [255, 200, 0];
const OUTLINE: usize = 2;

/// The image with each defect patch outlined, red for classifier decisions
/// and amber for expansions.
pub fn draw_overlay(image: &RgbImage, map: &DefectMap) -> Result<RgbImage> {
    let grid = &map.grid;
    if image.width() != grid.image_width() || image.height() != grid.image_height() {
        return Err(Error::Parameter("overlay image does not match the map grid".into()));
    }
    let mut out = image.clone();
    for (i, e) in map.entries.iter().enumerate() {
        if !e.decision.is_defect() {
            continue;
        }
        let color = match e.provenance {
            Provenance::Expanded => EXPANDED_COLOR,
            _ => CLASSIFIER_COLOR,
        };
        let r = grid.rect(i);
        for y in r.y..r.y + r.h {
            for x in r.x..r.x + r.w {
                let edge = x < r.x + OUTLINE || x >= r.x + r.w - OUTLINE || y < r.y + OUTLINE || y >= r.y + r.h - OUTLINE;
                if edge {
                    out.put_pixel(x, y, color);
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seeded(grid: PatchGrid, seeds: &[usize]) -> DefectMap {
        let mut m = DefectMap::new("t", grid);
        for &s in seeds {
            m.entries[s] = MapEntry::classified(1.0);
        }
        m
    }

    #[test]
    fn empty_seed_set_is_unchanged() {
        let grid = partition(60, 60, 20).unwrap();
        let gray = GrayImage::filled(60, 60, 10.0).unwrap();
        let m = DefectMap::new("t", grid);
        assert_eq!(postprocess_expand(&m, &gray, 100.0).unwrap(), m);
    }

    #[test]
    fn uniform_image_floods_grid() {
        let grid = partition(100, 80, 20).unwrap();
        let gray = GrayImage::filled(100, 80, 90.0).unwrap();
        let out = postprocess_expand(&seeded(grid, &[7]), &gray, 0.0).unwrap();
        assert_eq!(out.defect_count(), 20);
        assert_eq!(out.count(Provenance::Expanded), 19);
    }

    #[test]
    fn iv_threshold_boundary() {
        // left patch range 150, right patch range 140
        let grid = partition(40, 20, 20).unwrap();
        let gray = GrayImage::from_fn(40, 20, |x, y| match (x < 20, y == 0 && x % 20 == 0) {
            (true, true) => 200.0,
            (false, true) => 190.0,
            _ => 50.0,
        })
        .unwrap();
        for (t, expect) in [(9.999, 1), (10.0, 2), (25.0, 2)] {
            let out = postprocess_expand(&seeded(grid.clone(), &[0]), &gray, t).unwrap();
            assert_eq!(out.defect_count(), expect, "T_iv {t}");
        }
    }

    #[test]
    fn json_round_trip() {
        let grid = partition(50, 30, 20).unwrap();
        let mut m = seeded(grid, &[1]);
        m.entries[2] = MapEntry::classified(-0.25);
        m.entries[3] = MapEntry {
            decision: Label::Defect,
            provenance: Provenance::Expanded,
            score: None,
        };
        let text = m.to_json();
        assert!(text.contains("\"provenance\": \"gated_out\""));
        assert!(text.contains("\"decision\": \"no_defect\""));
        assert_eq!(DefectMap::from_json(&text).unwrap(), m);
        assert!(DefectMap::from_json("{}").is_err());
    }

    #[test]
    fn overlay_marks_only_defects() {
        let grid = partition(40, 20, 20).unwrap();
        let img = RgbImage::filled(40, 20, [0, 0, 0]).unwrap();
        let out = draw_overlay(&img, &seeded(grid, &[1])).unwrap();
        assert_eq!(out.pixel(20, 0), CLASSIFIER_COLOR);
        assert_eq!(out.pixel(30, 10), [0, 0, 0]);
        assert_eq!(out.pixel(0, 0), [0, 0, 0]);
    }
}
