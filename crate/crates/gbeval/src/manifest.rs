//! Dataset preparation: quartering image pairs and writing the fold manifest.

use std::path::{Path, PathBuf};

use gbeval_core::dataprep::{quarter, Augmentation, DatasetManifest, ImagePair};
use rayon::prelude::*;

use crate::inputs::pair_paths;
use crate::pngio::{read_gray, read_mask, write_gray, write_mask, GrayImage};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct PrepOptions {
    pub images: PathBuf,
    pub annotations: PathBuf,
    pub k: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub augmentation: Augmentation,
    pub lenient: bool,
}

/// Directory that holds the manifest; relative pair paths resolve against it.
pub fn manifest_dir(manifest: &Path) -> PathBuf {
    match manifest.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

fn rel(p: &Path) -> String {
    p.components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}

/// Quarters every pair, writes the tiles next to the manifest and emits it.
pub fn prep(opts: &PrepOptions) -> Result<DatasetManifest> {
    let pairs = pair_paths(&opts.images, &opts.annotations)?;
    let root = manifest_dir(&opts.out);
    let img_dir = Path::new("quarters").join("images");
    let ann_dir = Path::new("quarters").join("annotations");

    let per_pair: Vec<Vec<ImagePair>> = pairs
        .par_iter()
        .map(|pair| {
            let img = read_gray(&pair.left)?;
            let ann = read_mask(&pair.right, opts.lenient)?;
            if !img.samples.same_shape(&ann) {
                return Err(Error::Data(format!(
                    "{}: image is {}x{} but annotation is {}x{}",
                    pair.id,
                    img.samples.width(),
                    img.samples.height(),
                    ann.width(),
                    ann.height()
                )));
            }
            let img_q = quarter(&img.samples).map_err(Error::core(&pair.id))?;
            let ann_q = quarter(&ann).map_err(Error::core(&pair.id))?;
            let mut out = Vec::with_capacity(4);
            for (q, (iq, aq)) in img_q.into_iter().zip(ann_q.iter()).enumerate() {
                let name = format!("{}_q{q}.png", pair.id);
                let (ip, ap) = (img_dir.join(&name), ann_dir.join(&name));
                write_gray(
                    &root.join(&ip),
                    &GrayImage {
                        samples: iq,
                        depth: img.depth,
                    },
                )?;
                write_mask(&root.join(&ap), aq)?;
                out.push(ImagePair {
                    image: rel(&ip),
                    annotation: rel(&ap),
                    origin_id: pair.id.clone(),
                    quadrant: Some(q as u8),
                });
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;

    let manifest = DatasetManifest::new(
        per_pair.into_iter().flatten().collect(),
        opts.k,
        opts.seed,
        opts.augmentation,
    )
    .map_err(Error::core("manifest"))?;
    save_manifest(&opts.out, &manifest)?;
    Ok(manifest)
}

pub fn save_manifest(path: &Path, m: &DatasetManifest) -> Result<()> {
    let mut text = serde_json::to_string_pretty(m).expect("manifest serializes");
    text.push('\n');
    crate::report::write_text(path, &text)
}

/// Parses, validates and checks that every referenced file exists.
pub fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
    let mut m: DatasetManifest =
        serde_json::from_str(&text).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    m.validate().map_err(Error::core(path.display()))?;
    let root = manifest_dir(path);
    let missing: Vec<String> = m
        .pairs
        .iter()
        .flat_map(|p| [&p.image, &p.annotation])
        .filter(|f| !root.join(f).is_file())
        .cloned()
        .collect();
    if !missing.is_empty() {
        return Err(Error::Input(format!(
            "{} references missing files:\n  {}",
            path.display(),
            missing.join("\n  ")
        )));
    }
    Ok(m)
}
