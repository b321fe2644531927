//! Frame to PNG, one pixel per cell.

use std::path::Path;

use image::{ImageBuffer, Rgb};
use phreact_core::scene::Frame;

/// Pixels of a frame as sRGB bytes, plus the number clipped to the gamut.
pub fn frame_rgb(frame: &Frame) -> (Vec<u8>, usize) {
    let mut clipped = 0;
    let mut buf = Vec::with_capacity(frame.color_grid.len() * 3);
    for lab in &frame.color_grid {
        let (rgb, clip) = lab.to_srgb8();
        clipped += usize::from(clip);
        buf.extend_from_slice(&rgb);
    }
    (buf, clipped)
}

/// Write `frame` as a PNG and return the clipped pixel count.
pub fn write_png(frame: &Frame, path: &Path) -> anyhow::Result<usize> {
    let (buf, clipped) = frame_rgb(frame);
    let img: ImageBuffer<Rgb<u8>, _> = ImageBuffer::from_raw(frame.width as u32, frame.height as u32, buf)
        .ok_or_else(|| anyhow::anyhow!("frame buffer does not match {}x{}", frame.width, frame.height))?;
    img.save_with_format(path, image::ImageFormat::Png)?;
    Ok(clipped)
}
