//! Tab-separated dataset manifests.
//!
//! One record per line: `id<TAB>image_path<TAB>mask_path[<TAB>fold]`. Lines
//! starting with `#` are comments. Paths are stored relative to the
//! manifest's directory.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::dataset::Sample;
use crate::error::{Error, Result};
use crate::image::{BinaryMask, RgbImage};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestRecord {
    pub id: String,
    /// Absolute, or relative to the current directory once loaded.
    pub image_path: PathBuf,
    pub mask_path: PathBuf,
    pub fold: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Manifest {
    pub records: Vec<ManifestRecord>,
}

impl Manifest {
    pub fn ids(&self) -> Vec<String> {
        self.records.iter().map(|r| r.id.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Decodes every image/mask pair.
    pub fn load_samples(&self) -> Result<Vec<Sample>> {
        self.records.iter().map(load_sample).collect()
    }
}

pub fn load_sample(record: &ManifestRecord) -> Result<Sample> {
    let image = RgbImage::load_png(&record.image_path)?;
    let mask = BinaryMask::load_png(&record.mask_path)?;
    Sample::new(record.id.clone(), image, mask)
}

fn relative_to(path: &Path, base: &Path) -> PathBuf {
    path.strip_prefix(base).map(Path::to_path_buf).unwrap_or_else(|_| path.to_path_buf())
}

fn field_ok(s: &str) -> bool {
    !s.is_empty() && !s.contains(['\t', '\n', '\r'])
}

pub fn write_manifest(manifest: &Manifest, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let base = path.parent().unwrap_or_else(|| Path::new(""));
    let mut out = String::from("# id\timage\tmask\tfold\n");
    for r in &manifest.records {
        let image = relative_to(&r.image_path, base);
        let mask = relative_to(&r.mask_path, base);
        let (image, mask) = (image.to_string_lossy(), mask.to_string_lossy());
        if !field_ok(&r.id) || !field_ok(&image) || !field_ok(&mask) || r.id.starts_with('#') {
            return Err(Error::Format(format!("record `{}` cannot be written as a manifest line", r.id)));
        }
        let _ = write!(out, "{}\t{}\t{}", r.id, image, mask);
        if let Some(f) = r.fold {
            let _ = write!(out, "\t{f}");
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Parses a manifest and checks that every referenced file exists.
pub fn read_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new(""));
    let mut records = Vec::new();
    let mut ids = std::collections::BTreeSet::new();
    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |what: &str| Error::Format(format!("{}:{lineno}: {what}: `{line}`", path.display()));
        let fields: Vec<&str> = line.split('\t').collect();
        if !(3..=4).contains(&fields.len()) || fields.iter().any(|f| f.is_empty()) {
            return Err(bad("expected id, image, mask and optional fold separated by tabs"));
        }
        let fold = match fields.get(3) {
            Some(f) => Some(f.trim().parse::<usize>().map_err(|_| bad("fold is not a non-negative integer"))?),
            None => None,
        };
        if !ids.insert(fields[0].to_string()) {
            return Err(bad("duplicate id"));
        }
        let image_path = base.join(fields[1]);
        let mask_path = base.join(fields[2]);
        for p in [&image_path, &mask_path] {
            if !p.is_file() {
                return Err(Error::io(
                    p,
                    std::io::Error::new(
                        std::io::ErrorKind::NotFound,
                        format!("referenced from {}:{lineno} but not found", path.display()),
                    ),
                ));
            }
        }
        records.push(ManifestRecord {
            id: fields[0].to_string(),
            image_path,
            mask_path,
            fold,
        });
    }
    Ok(Manifest { records })
}

/// Writes samples as `images/<id>.png` and `masks/<id>.png` under `dir`
/// together with `dir/manifest.tsv`, returning the manifest path.
pub fn save_dataset(samples: &[Sample], dir: impl AsRef<Path>, folds: Option<&[usize]>) -> Result<PathBuf> {
    let dir = dir.as_ref();
    for sub in ["images", "masks"] {
        fs::create_dir_all(dir.join(sub)).map_err(|e| Error::io(dir.join(sub), e))?;
    }
    let mut manifest = Manifest::default();
    for (i, s) in samples.iter().enumerate() {
        let image_path = dir.join("images").join(format!("{}.png", s.id));
        let mask_path = dir.join("masks").join(format!("{}.png", s.id));
        s.image.save_png(&image_path)?;
        s.mask.save_png(&mask_path)?;
        manifest.records.push(ManifestRecord {
            id: s.id.clone(),
            image_path,
            mask_path,
            fold: folds.map(|f| f[i]),
        });
    }
    let path = dir.join("manifest.tsv");
    write_manifest(&manifest, &path)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn touch(p: &Path) {
        fs::create_dir_all(p.parent().unwrap()).unwrap();
        fs::write(p, b"x").unwrap();
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = Manifest::default();
        for (i, fold) in [(0, Some(1)), (1, None)] {
            let image_path = dir.path().join(format!("images/a{i}.png"));
            let mask_path = dir.path().join(format!("masks/a{i}.png"));
            touch(&image_path);
            touch(&mask_path);
            m.records.push(ManifestRecord {
                id: format!("a{i}"),
                image_path,
                mask_path,
                fold,
            });
        }
        let path = dir.path().join("manifest.tsv");
        write_manifest(&m, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.contains("a0\timages/a0.png\tmasks/a0.png\t1\n"));
        assert_eq!(read_manifest(&path).unwrap(), m);
    }

    #[test]
    fn empty_and_comments() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.tsv");
        fs::write(&path, "# nothing here\n\n").unwrap();
        assert!(read_manifest(&path).unwrap().is_empty());
    }

    #[test]
    fn missing_mask_names_the_path() {
        let dir = tempfile::tempdir().unwrap();
        touch(&dir.path().join("img.png"));
        let path = dir.path().join("m.tsv");
        fs::write(&path, "a\timg.png\tmissing_mask.png\n").unwrap();
        let err = read_manifest(&path).unwrap_err();
        assert!(err.to_string().contains("missing_mask.png"), "{err}");
    }

    #[test]
    fn malformed_lines_report_line_number() {
        let dir = tempfile::tempdir().unwrap();
        touch(&dir.path().join("i.png"));
        let path = dir.path().join("m.tsv");
        fs::write(&path, "# header\na\ti.png\n").unwrap();
        let err = read_manifest(&path).unwrap_err().to_string();
        assert!(err.contains(":2:"), "{err}");
        fs::write(&path, "a\ti.png\ti.png\tx\n").unwrap();
        assert!(read_manifest(&path).unwrap_err().to_string().contains("fold"));
        fs::write(&path, "a\ti.png\ti.png\na\ti.png\ti.png\n").unwrap();
        assert!(read_manifest(&path).unwrap_err().to_string().contains("duplicate"));
    }
}
