use std::fs;
use std::path::Path;

use image::{ExtendedColorType, ImageBuffer, Luma};

use crate::error::{Error, Result};
use crate::geometry::ColorRGB;

/// Row-major grid of normalized colors.
#[derive(Debug, Clone, PartialEq)]
pub struct ColorImage {
    width: u32,
    height: u32,
    pixels: Vec<ColorRGB>,
}

impl ColorImage {
    pub fn new(width: u32, height: u32, fill: ColorRGB) -> Self {
        ColorImage {
            width,
            height,
            pixels: vec![fill; width as usize * height as usize],
        }
    }

    pub fn from_pixels(width: u32, height: u32, pixels: Vec<ColorRGB>) -> Result<Self> {
        if pixels.len() != width as usize * height as usize {
            return Err(Error::DimensionMismatch(format!(
                "{} pixels for a {width}x{height} image",
                pixels.len()
            )));
        }
        Ok(ColorImage { width, height, pixels })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[ColorRGB] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [ColorRGB] {
        &mut self.pixels
    }

    pub fn get(&self, x: u32, y: u32) -> ColorRGB {
        self.pixels[y as usize * self.width as usize + x as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, c: ColorRGB) {
        self.pixels[y as usize * self.width as usize + x as usize] = c;
    }

    fn to_rgb8(&self) -> Vec<u8> {
        self.pixels.iter().flat_map(|c| c.to_u8()).collect()
    }
}

fn is_ppm(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("ppm"))
}

fn image_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Image {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

/// Loads an 8-bit PNG or binary PPM, mapping channels to `[0, 1]`.
pub fn load_image(path: &Path) -> Result<ColorImage> {
    if is_ppm(path) {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        return decode_ppm(&bytes).map_err(|m| image_err(path, m));
    }
    let img = image::ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?
        .decode()
        .map_err(|e| image_err(path, e.to_string()))?;
    use image::DynamicImage as D;
    let rgb = match img {
        D::ImageRgb8(_) | D::ImageRgba8(_) | D::ImageLuma8(_) | D::ImageLumaA8(_) => img.to_rgb8(),
        other => {
            return Err(Error::Unsupported(format!(
                "{}: bit depth of {:?} is not 8",
                path.display(),
                other.color()
            )))
        }
    };
    let (w, h) = rgb.dimensions();
    let pixels = rgb.pixels().map(|p| ColorRGB::from_u8(p.0)).collect();
    ColorImage::from_pixels(w, h, pixels)
}

fn decode_ppm(bytes: &[u8]) -> std::result::Result<ColorImage, String> {
    let mut pos = 0;
    let mut fields = Vec::with_capacity(4);
    while fields.len() < 4 {
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err("truncated PPM header".into());
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    if fields[0] != "P6" {
        return Err(format!("unsupported PPM magic {}", fields[0]));
    }
    let parse = |s: &str| s.parse::<u32>().map_err(|_| format!("bad PPM header value '{s}'"));
    let (w, h, maxval) = (parse(&fields[1])?, parse(&fields[2])?, parse(&fields[3])?);
    if maxval != 255 {
        return Err(format!("unsupported bit depth: maxval {maxval}"));
    }
    pos += 1;
    let n = w as usize * h as usize * 3;
    let data = bytes
        .get(pos..pos + n)
        .ok_or_else(|| "truncated PPM payload".to_string())?;
    let pixels = data
        .chunks_exact(3)
        .map(|c| ColorRGB::from_u8([c[0], c[1], c[2]]))
        .collect();
    ColorImage::from_pixels(w, h, pixels).map_err(|e| e.to_string())
}

fn encode_ppm(img: &ColorImage) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend(img.to_rgb8());
    out
}

/// Saves as binary PPM when the extension is `.ppm`, PNG otherwise. Channels
/// are quantized with round-half-up.
pub fn save_image(img: &ColorImage, path: &Path) -> Result<()> {
    if is_ppm(path) {
        return fs::write(path, encode_ppm(img)).map_err(|e| Error::io(path, e));
    }
    image::save_buffer(path, &img.to_rgb8(), img.width, img.height, ExtendedColorType::Rgb8)
        .map_err(|e| image_err(path, e.to_string()))
}

/// 16-bit PNG of depth in millimeters, clamped to `[0, 65535]`; empty pixels are 0.
pub fn save_depth_png(depth: &[f64], width: u32, height: u32, path: &Path) -> Result<()> {
    let mm: Vec<u16> = depth
        .iter()
        .map(|&d| {
            if d.is_finite() {
                (d * 1000.0).round().clamp(0.0, 65535.0) as u16
            } else {
                0
            }
        })
        .collect();
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(width, height, mm).ok_or_else(|| Error::DimensionMismatch("depth buffer size".into()))?;
    buf.save(path).map_err(|e| image_err(path, e.to_string()))
}

/// 8-bit grayscale PNG with covered pixels at 255.
pub fn save_mask_png(mask: &[bool], width: u32, height: u32, path: &Path) -> Result<()> {
    let data: Vec<u8> = mask.iter().map(|&m| if m { 255 } else { 0 }).collect();
    image::save_buffer(path, &data, width, height, ExtendedColorType::L8).map_err(|e| image_err(path, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ppm_white_pixel() {
        let img = decode_ppm(b"P6\n1 1\n255\n\xff\xff\xff").unwrap();
        assert_eq!(img.get(0, 0), ColorRGB::new(1.0, 1.0, 1.0));
    }

    #[test]
    fn ppm_rejects_16_bit() {
        let e = decode_ppm(b"P6 1 1 65535\n\0\0\0\0\0\0").unwrap_err();
        assert!(e.contains("bit depth"));
    }

    #[test]
    fn ppm_round_trip_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.ppm");
        let mut bytes = b"P6\n3 2\n255\n".to_vec();
        bytes.extend((0u8..18).map(|i| i.wrapping_mul(37)));
        fs::write(&path, &bytes).unwrap();
        let img = load_image(&path).unwrap();
        let out = dir.path().join("b.ppm");
        save_image(&img, &out).unwrap();
        assert_eq!(fs::read(out).unwrap(), bytes);
    }

    #[test]
    fn png_round_trip_and_bit_depth() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.png");
        let img = ColorImage::from_pixels(
            2,
            1,
            vec![ColorRGB::from_u8([128, 0, 7]), ColorRGB::from_u8([1, 2, 255])],
        )
        .unwrap();
        save_image(&img, &path).unwrap();
        let back = load_image(&path).unwrap();
        assert_eq!(back, img);
        assert!((back.get(0, 0).r - 0.50196).abs() < 1e-5);

        let depth_path = dir.path().join("d.png");
        save_depth_png(&[1.0, f64::INFINITY], 2, 1, &depth_path).unwrap();
        let e = load_image(&depth_path).unwrap_err();
        assert!(matches!(e, Error::Unsupported(_)), "{e}");
    }
}
