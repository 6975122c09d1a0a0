use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use image::{DynamicImage, ImageBuffer, ImageFormat, ImageReader, Luma, Rgb};

use super::{srgb_decode, srgb_encode, GrayImage, LinearImage, SrgbImage};
use crate::error::{Error, Result};

enum Decoded {
    Eight(SrgbImage),
    Sixteen(LinearImage),
}

fn read_png(path: &Path) -> Result<Decoded> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let img = ImageReader::with_format(BufReader::new(file), ImageFormat::Png)
        .decode()
        .map_err(|e| Error::io(path, e))?;
    let color = img.color();
    if color.channel_count() != 3 {
        return Err(Error::UnsupportedChannels {
            path: path.to_path_buf(),
            channels: color.channel_count(),
        });
    }
    let (w, h) = (img.width() as usize, img.height() as usize);
    match img {
        DynamicImage::ImageRgb8(buf) => Ok(Decoded::Eight(SrgbImage::new(w, h, buf.into_raw())?)),
        DynamicImage::ImageRgb16(buf) => {
            let data = buf.into_raw().into_iter().map(|v| f32::from(v) / 65535.0).collect();
            Ok(Decoded::Sixteen(LinearImage::new(w, h, data)?))
        }
        other => Err(Error::UnsupportedBitDepth {
            path: path.to_path_buf(),
            bits: other.color().bits_per_pixel() / 3,
        }),
    }
}

/// Reads an RGB PNG into linear light. 8-bit files are sRGB-decoded;
/// 16-bit files are taken as linear after division by 65535.
pub fn load_image(path: impl AsRef<Path>) -> Result<LinearImage> {
    match read_png(path.as_ref())? {
        Decoded::Eight(img) => Ok(srgb_decode(&img)),
        Decoded::Sixteen(img) => Ok(img),
    }
}

/// Reads an RGB PNG as display-referred codes. 16-bit inputs are treated
/// as linear and encoded.
pub fn load_srgb(path: impl AsRef<Path>) -> Result<SrgbImage> {
    match read_png(path.as_ref())? {
        Decoded::Eight(img) => Ok(img),
        Decoded::Sixteen(img) => Ok(srgb_encode(&img)),
    }
}

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
        }
        _ => Ok(()),
    }
}

/// Writes a linear image as 16-bit RGB PNG (values clipped to [0, 1]).
pub fn save_image(path: impl AsRef<Path>, img: &LinearImage) -> Result<()> {
    let path = path.as_ref();
    ensure_parent(path)?;
    let data: Vec<u16> = img
        .data()
        .iter()
        .map(|&v| (f64::from(v).clamp(0.0, 1.0) * 65535.0).round() as u16)
        .collect();
    let buf: ImageBuffer<Rgb<u16>, Vec<u16>> =
        ImageBuffer::from_raw(img.width() as u32, img.height() as u32, data)
            .expect("buffer length checked by LinearImage");
    buf.save_with_format(path, ImageFormat::Png)
        .map_err(|e| Error::io(path, e))
}

/// Writes an sRGB image as 8-bit RGB PNG.
pub fn save_srgb(path: impl AsRef<Path>, img: &SrgbImage) -> Result<()> {
    let path = path.as_ref();
    ensure_parent(path)?;
    let buf: ImageBuffer<Rgb<u8>, Vec<u8>> =
        ImageBuffer::from_raw(img.width() as u32, img.height() as u32, img.data().to_vec())
            .expect("buffer length checked by SrgbImage");
    buf.save_with_format(path, ImageFormat::Png)
        .map_err(|e| Error::io(path, e))
}

/// Writes a plane as 8-bit grayscale, `round(clamp(v, 0, 1) * 255)`.
pub fn save_gray(path: impl AsRef<Path>, img: &GrayImage) -> Result<()> {
    let path = path.as_ref();
    ensure_parent(path)?;
    let data: Vec<u8> = img
        .data()
        .iter()
        .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    let buf: ImageBuffer<Luma<u8>, Vec<u8>> =
        ImageBuffer::from_raw(img.width() as u32, img.height() as u32, data)
            .expect("buffer length checked by GrayImage");
    buf.save_with_format(path, ImageFormat::Png)
        .map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imgcore::decode_code;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sixteen_bit_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("hdr.png");
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let data: Vec<f32> = (0..13 * 9 * 3)
            .map(|_| f32::from(rng.random::<u16>()) / 65535.0)
            .collect();
        let img = LinearImage::new(13, 9, data).unwrap();
        save_image(&path, &img).unwrap();
        assert_eq!(load_image(&path).unwrap(), img);
    }

    #[test]
    fn eight_bit_gradient_decodes_monotone() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ramp.png");
        let ramp = SrgbImage::from_fn(256, 2, |x, _| [x as u8; 3]);
        save_srgb(&path, &ramp).unwrap();
        let lin = load_image(&path).unwrap();
        let mut prev = -1.0;
        for x in 0..256 {
            let v = lin.pixel(x, 0)[0];
            assert_eq!(v, decode_code(x as u8));
            assert!(v > prev);
            prev = v;
        }
        assert_eq!(load_srgb(&path).unwrap(), ramp);
    }

    #[test]
    fn grayscale_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gray.png");
        save_gray(&path, &GrayImage::filled(4, 4, 0.5)).unwrap();
        let err = load_image(&path).unwrap_err();
        assert!(matches!(err, Error::UnsupportedChannels { channels: 1, .. }));
        assert!(err.to_string().contains("unsupported channel count"));
        assert!(err.to_string().contains("gray.png"));
    }

    #[test]
    fn missing_file_names_path() {
        let err = load_image("/nonexistent/nope.png").unwrap_err();
        assert!(err.to_string().contains("/nonexistent/nope.png"));
    }
}
