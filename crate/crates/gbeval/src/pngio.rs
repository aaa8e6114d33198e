//! Grayscale and RGB PNG reading and writing.

use std::path::Path;

use gbeval_core::raster::{
    mask_from_samples, mask_to_samples, probability_from_samples, probability_to_samples,
    SampleDepth,
};
use gbeval_core::{BinaryMask, Grid, ProbabilityMap, RgbImage};
use image::{DynamicImage, ImageBuffer, ImageFormat, Luma, Rgb};

use crate::{Error, Result};

/// Raw single-channel samples with their bit depth.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub samples: Grid<u16>,
    pub depth: SampleDepth,
}

fn decode(path: &Path) -> Result<DynamicImage> {
    let reader = image::ImageReader::open(path).map_err(Error::io(path))?;
    reader
        .with_guessed_format()
        .map_err(Error::io(path))?
        .decode()
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

pub fn read_gray(path: &Path) -> Result<GrayImage> {
    let img = decode(path)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let (data, depth) = match img {
        DynamicImage::ImageLuma8(buf) => (
            buf.into_raw().into_iter().map(u16::from).collect(),
            SampleDepth::Eight,
        ),
        DynamicImage::ImageLuma16(buf) => (buf.into_raw(), SampleDepth::Sixteen),
        other => {
            return Err(Error::Data(format!(
                "{}: expected a single-channel grayscale PNG, found {:?}",
                path.display(),
                other.color()
            )))
        }
    };
    let samples = Grid::from_vec(w, h, data).map_err(Error::core(path.display()))?;
    Ok(GrayImage { samples, depth })
}

pub fn read_probability(path: &Path) -> Result<ProbabilityMap> {
    let g = read_gray(path)?;
    probability_from_samples(
        g.samples.width(),
        g.samples.height(),
        g.samples.as_slice(),
        g.depth,
    )
    .map_err(Error::core(path.display()))
}

/// Reads an 8- or 16-bit mask. 16-bit samples are reduced to their high byte.
pub fn read_mask(path: &Path, lenient: bool) -> Result<BinaryMask> {
    let g = read_gray(path)?;
    let bytes: Vec<u8> = match g.depth {
        SampleDepth::Eight => g.samples.as_slice().iter().map(|&s| s as u8).collect(),
        SampleDepth::Sixteen => g
            .samples
            .as_slice()
            .iter()
            .map(|&s| match s {
                0 => 0,
                u16::MAX => 255,
                // Keeps strict decoding strict for in-between values.
                s if lenient => (s >> 8) as u8,
                _ => 1,
            })
            .collect(),
    };
    mask_from_samples(g.samples.width(), g.samples.height(), &bytes, lenient)
        .map_err(Error::core(path.display()))
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(Error::io(dir))?;
    }
    Ok(())
}

fn save(path: &Path, img: DynamicImage) -> Result<()> {
    ensure_parent(path)?;
    img.save_with_format(path, ImageFormat::Png)
        .map_err(|e| match e {
            image::ImageError::IoError(source) => Error::Io {
                path: path.to_path_buf(),
                source,
            },
            other => Error::Data(format!("{}: {other}", path.display())),
        })
}

fn dims(w: usize, h: usize) -> (u32, u32) {
    (w as u32, h as u32)
}

pub fn write_gray(path: &Path, img: &GrayImage) -> Result<()> {
    let (w, h) = dims(img.samples.width(), img.samples.height());
    let dynamic = match img.depth {
        SampleDepth::Eight => {
            let raw = img.samples.as_slice().iter().map(|&s| s as u8).collect();
            DynamicImage::ImageLuma8(
                ImageBuffer::<Luma<u8>, _>::from_raw(w, h, raw).expect("sized"),
            )
        }
        SampleDepth::Sixteen => DynamicImage::ImageLuma16(
            ImageBuffer::<Luma<u16>, _>::from_raw(w, h, img.samples.as_slice().to_vec())
                .expect("sized"),
        ),
    };
    save(path, dynamic)
}

pub fn write_probability(path: &Path, map: &ProbabilityMap, depth: SampleDepth) -> Result<()> {
    let samples = Grid::from_vec(
        map.width(),
        map.height(),
        probability_to_samples(map, depth),
    )
    .expect("same size as map");
    write_gray(path, &GrayImage { samples, depth })
}

pub fn write_mask(path: &Path, mask: &BinaryMask) -> Result<()> {
    let (w, h) = dims(mask.width(), mask.height());
    let buf = ImageBuffer::<Luma<u8>, _>::from_raw(w, h, mask_to_samples(mask)).expect("sized");
    save(path, DynamicImage::ImageLuma8(buf))
}

pub fn write_rgb(path: &Path, img: &RgbImage) -> Result<()> {
    let (w, h) = dims(img.width(), img.height());
    let raw = img.as_slice().iter().flatten().copied().collect();
    let buf = ImageBuffer::<Rgb<u8>, _>::from_raw(w, h, raw).expect("sized");
    save(path, DynamicImage::ImageRgb8(buf))
}

pub fn read_rgb(path: &Path) -> Result<RgbImage> {
    let img = decode(path)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let DynamicImage::ImageRgb8(buf) = img else {
        return Err(Error::Data(format!(
            "{}: expected an 8-bit RGB PNG",
            path.display()
        )));
    };
    let data = buf
        .into_raw()
        .chunks_exact(3)
        .map(|p| [p[0], p[1], p[2]])
        .collect();
    Grid::from_vec(w, h, data).map_err(Error::core(path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sixteen_bit_probability_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("p.png");
        let map = ProbabilityMap::new(3, 2, vec![0.0, 0.1, 0.15, 0.5, 0.85, 1.0]).unwrap();
        write_probability(&p, &map, SampleDepth::Sixteen).unwrap();
        let back = read_probability(&p).unwrap();
        for (a, b) in map.values().iter().zip(back.values()) {
            assert!((a - b).abs() <= SampleDepth::Sixteen.max_roundtrip_error());
        }
        assert_eq!(read_gray(&p).unwrap().depth, SampleDepth::Sixteen);
    }

    #[test]
    fn mask_round_trip_and_strictness() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.png");
        let mask = Grid::from_fn(5, 4, |r, c| (r + c) % 2 == 0);
        write_mask(&p, &mask).unwrap();
        assert_eq!(read_mask(&p, false).unwrap(), mask);

        let gray = GrayImage {
            samples: Grid::from_vec(2, 1, vec![0, 200]).unwrap(),
            depth: SampleDepth::Eight,
        };
        write_gray(&p, &gray).unwrap();
        assert!(matches!(read_mask(&p, false), Err(Error::Data(_))));
        assert_eq!(read_mask(&p, true).unwrap().as_slice(), &[false, true]);
    }

    #[test]
    fn rgb_is_not_grayscale() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.png");
        let img = Grid::filled(2, 2, [1u8, 2, 3]);
        write_rgb(&p, &img).unwrap();
        assert_eq!(read_rgb(&p).unwrap(), img);
        assert!(matches!(read_gray(&p), Err(Error::Data(_))));
    }

    #[test]
    fn missing_file_is_an_input_error() {
        let e = read_gray(Path::new("/definitely/not/here.png")).unwrap_err();
        assert_eq!(e.exit_code(), crate::error::EXIT_INPUT);
    }
}
