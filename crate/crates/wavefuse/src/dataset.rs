//! Image directories: training sets and `name_a` / `name_b` source pairs.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use wavefuse_core::image::{resize_bilinear, GrayImage};

use crate::error::{Error, Result};
use crate::imageio::{is_image_path, load_grayscale};

/// Image files directly inside `dir`, sorted by path.
pub fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut out = Vec::new();
    for e in entries {
        let path = e.map_err(|e| Error::io(dir, e))?.path();
        if path.is_file() && is_image_path(&path) {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

/// Loads every image in `dir` resized to `size x size`.
pub fn load_training_set(dir: &Path, size: usize) -> Result<Vec<GrayImage>> {
    list_images(dir)?
        .iter()
        .map(|p| Ok(resize_bilinear(&load_grayscale(p)?, size, size)?))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct PairPaths {
    pub name: String,
    pub a: PathBuf,
    pub b: PathBuf,
}

/// Matches `<name>_a.<ext>` with `<name>_b.<ext>`; unmatched files are ignored.
pub fn find_pairs(dir: &Path) -> Result<Vec<PairPaths>> {
    let mut halves: BTreeMap<String, (Option<PathBuf>, Option<PathBuf>)> = BTreeMap::new();
    for path in list_images(dir)? {
        let Some(stem) = path.file_stem().and_then(|s| s.to_str()) else {
            continue;
        };
        if let Some(name) = stem.strip_suffix("_a") {
            halves
                .entry(name.to_string())
                .or_default()
                .0
                .get_or_insert(path.clone());
        } else if let Some(name) = stem.strip_suffix("_b") {
            halves
                .entry(name.to_string())
                .or_default()
                .1
                .get_or_insert(path.clone());
        }
    }
    Ok(halves
        .into_iter()
        .filter_map(|(name, (a, b))| Some(PairPaths { name, a: a?, b: b? }))
        .collect())
}

/// Resizes both images to the smaller common size when they differ.
/// Returns whether a resize happened.
pub fn harmonize(a: GrayImage, b: GrayImage) -> Result<(GrayImage, GrayImage, bool)> {
    if (a.width(), a.height()) == (b.width(), b.height()) {
        return Ok((a, b, false));
    }
    let w = a.width().min(b.width());
    let h = a.height().min(b.height());
    Ok((resize_bilinear(&a, w, h)?, resize_bilinear(&b, w, h)?, true))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imageio::save_grayscale;

    #[test]
    fn pairs_are_matched_by_suffix() {
        let dir = tempfile::tempdir().unwrap();
        let img = GrayImage::filled(4, 4, 0.5).unwrap();
        for n in [
            "x_a.pgm",
            "x_b.png",
            "y_a.pgm",
            "notes.txt",
            "z_b.pgm",
            "w_a.pgm",
            "w_b.pgm",
        ] {
            if n.ends_with(".txt") {
                fs::write(dir.path().join(n), "hi").unwrap();
            } else {
                save_grayscale(&img, dir.path().join(n)).unwrap();
            }
        }
        let pairs = find_pairs(dir.path()).unwrap();
        let names: Vec<_> = pairs.iter().map(|p| p.name.as_str()).collect();
        assert_eq!(names, ["w", "x"]);
        assert_eq!(list_images(dir.path()).unwrap().len(), 6);
    }

    #[test]
    fn harmonize_takes_smaller_dims() {
        let a = GrayImage::filled(10, 6, 0.2).unwrap();
        let b = GrayImage::filled(8, 9, 0.2).unwrap();
        let (a, b, changed) = harmonize(a, b).unwrap();
        assert!(changed);
        assert_eq!((a.width(), a.height()), (8, 6));
        assert_eq!((b.width(), b.height()), (8, 6));
    }
}
