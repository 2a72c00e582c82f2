//! PNG reading and writing for frames, binary masks and instance-id label images.

use std::io::BufWriter;
use std::path::Path;

use image::{ImageBuffer, ImageReader, Luma};
use masktrack_core::geom::BinaryMask;
use masktrack_core::image::RgbImage;

use crate::error::{Error, Result};

fn save<P, C>(path: &Path, img: &ImageBuffer<P, C>) -> Result<()>
where
    P: image::PixelWithColorType,
    [P::Subpixel]: image::EncodableLayout,
    C: std::ops::Deref<Target = [P::Subpixel]>,
{
    let file = std::fs::File::create(path).map_err(Error::io(path))?;
    let enc = image::codecs::png::PngEncoder::new(BufWriter::new(file));
    img.write_with_encoder(enc).map_err(|e| Error::format(path, e))
}

fn open(path: &Path) -> Result<image::DynamicImage> {
    let reader = ImageReader::open(path).map_err(Error::io(path))?;
    let reader = reader.with_guessed_format().map_err(Error::io(path))?;
    reader.decode().map_err(|e| Error::format(path, e))
}

/// Width and height from the file header.
pub fn dimensions(path: &Path) -> Result<(usize, usize)> {
    let reader = ImageReader::open(path).map_err(Error::io(path))?;
    let reader = reader.with_guessed_format().map_err(Error::io(path))?;
    let (w, h) = reader.into_dimensions().map_err(|e| Error::format(path, e))?;
    Ok((w as usize, h as usize))
}

pub fn write_rgb(path: &Path, img: &RgbImage) -> Result<()> {
    save(path, &crate::dataset::to_image(img))
}

pub fn read_rgb(path: &Path) -> Result<RgbImage> {
    let img = open(path)?.into_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    Ok(RgbImage::from_raw(w, h, img.into_raw())?)
}

/// Instance ids as 8-bit grey when they fit, 16-bit otherwise.
pub fn write_labels(path: &Path, width: usize, height: usize, ids: &[u32]) -> Result<()> {
    let (w, h) = (width as u32, height as u32);
    if ids.iter().all(|&v| v <= u8::MAX as u32) {
        let img: ImageBuffer<Luma<u8>, _> =
            ImageBuffer::from_raw(w, h, ids.iter().map(|&v| v as u8).collect::<Vec<_>>()).expect("matching buffer");
        save(path, &img)
    } else if ids.iter().all(|&v| v <= u16::MAX as u32) {
        let img: ImageBuffer<Luma<u16>, _> =
            ImageBuffer::from_raw(w, h, ids.iter().map(|&v| v as u16).collect::<Vec<_>>()).expect("matching buffer");
        save(path, &img)
    } else {
        Err(Error::format(path, "instance ids above 65535"))
    }
}

pub fn read_labels(path: &Path) -> Result<Vec<u16>> {
    match open(path)? {
        image::DynamicImage::ImageLuma8(img) => Ok(img.into_raw().into_iter().map(u16::from).collect()),
        image::DynamicImage::ImageLuma16(img) => Ok(img.into_raw()),
        other => Err(Error::format(
            path,
            format!("instance ids must be 8/16-bit grey, found {:?}", other.color()),
        )),
    }
}

/// Binary masks are stored as 0/255 grey images.
pub fn write_mask(path: &Path, mask: &BinaryMask) -> Result<()> {
    let bytes: Vec<u8> = mask.bits().iter().map(|&b| if b { 255 } else { 0 }).collect();
    let img: ImageBuffer<Luma<u8>, _> =
        ImageBuffer::from_raw(mask.width() as u32, mask.height() as u32, bytes).expect("matching buffer");
    save(path, &img)
}

pub fn read_mask(path: &Path) -> Result<BinaryMask> {
    let img = open(path)?.into_luma8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    Ok(BinaryMask::from_bits(
        h,
        w,
        img.into_raw().into_iter().map(|v| v > 127).collect(),
    )?)
}
