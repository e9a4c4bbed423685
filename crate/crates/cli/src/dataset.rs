//! On-disk scene layout: a directory per scene holding `pan.hsif`,
//! `lrms.hsif` and, for reduced-resolution data, `gt.hsif`.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use hetssnet::imaging::{read_hsif, write_hsif, ScenePair};

pub struct NamedScene {
    pub name: String,
    pub dir: PathBuf,
    pub scene: ScenePair,
}

pub fn write_scene(dir: &Path, scene: &ScenePair) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    write_hsif(dir.join("pan.hsif"), &scene.pan)?;
    write_hsif(dir.join("lrms.hsif"), &scene.lrms)?;
    if let Some(gt) = &scene.gt {
        write_hsif(dir.join("gt.hsif"), gt)?;
    }
    Ok(())
}

pub fn read_scene(dir: &Path) -> Result<ScenePair> {
    let read = |name: &str| {
        let p = dir.join(name);
        read_hsif(&p).with_context(|| format!("reading {}", p.display()))
    };
    let pan = read("pan.hsif")?;
    let lrms = read("lrms.hsif")?;
    let gt = if dir.join("gt.hsif").exists() {
        Some(read("gt.hsif")?)
    } else {
        None
    };
    if lrms.height() == 0 || pan.height() % lrms.height() != 0 {
        bail!("{}: PAN height is not a multiple of the LR-MS height", dir.display());
    }
    let scale = pan.height() / lrms.height();
    ScenePair::new(pan, lrms, gt, scale).with_context(|| format!("scene {}", dir.display()))
}

/// A scene directory itself, or every subdirectory holding `pan.hsif`, in
/// name order.
pub fn read_dataset(root: &Path) -> Result<Vec<NamedScene>> {
    let name_of = |p: &Path| p.file_name().map_or_else(|| p.display().to_string(), |n| n.to_string_lossy().into_owned());
    if root.join("pan.hsif").exists() {
        return Ok(vec![NamedScene {
            name: name_of(root),
            dir: root.to_path_buf(),
            scene: read_scene(root)?,
        }]);
    }
    let mut dirs: Vec<PathBuf> = fs::read_dir(root)
        .with_context(|| format!("listing {}", root.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join("pan.hsif").exists())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        bail!("no scenes found under {}", root.display());
    }
    dirs.into_iter()
        .map(|dir| {
            Ok(NamedScene {
                name: name_of(&dir),
                scene: read_scene(&dir)?,
                dir,
            })
        })
        .collect()
}
