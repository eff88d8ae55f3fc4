//! Foreground mask of a clipart as seen from its input view.

use crate::error::{Error, Result};
use crate::geom::{Bounds2, Vec2};
use crate::model::{geometry_paths, Clipart};

pub const DEFAULT_MASK_RESOLUTION: usize = 256;
pub const MIN_MASK_RESOLUTION: usize = 16;

/// Binary raster over the unit square. Row 0 is the top (y = 1).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskImage {
    pub width: usize,
    pub height: usize,
    pub bits: Vec<bool>,
}

impl MaskImage {
    pub fn new(width: usize, height: usize) -> Self {
        MaskImage {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn get(&self, col: usize, row: usize) -> bool {
        self.bits[row * self.width + col]
    }

    pub fn set(&mut self, col: usize, row: usize, value: bool) {
        self.bits[row * self.width + col] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Center of a pixel in normalized scene coordinates.
    pub fn pixel_center(&self, col: usize, row: usize) -> Vec2 {
        Vec2::new(
            (col as f64 + 0.5) / self.width as f64,
            1.0 - (row as f64 + 0.5) / self.height as f64,
        )
    }

    /// Pixel containing a normalized point; points exactly on the far edge
    /// belong to the last row/column.
    pub fn pixel_of(&self, p: &Vec2) -> Option<(usize, usize)> {
        if !(0.0..=1.0).contains(&p.x) || !(0.0..=1.0).contains(&p.y) {
            return None;
        }
        let col = ((p.x * self.width as f64) as usize).min(self.width - 1);
        let row = (((1.0 - p.y) * self.height as f64) as usize).min(self.height - 1);
        Some((col, row))
    }

    pub fn is_foreground_at(&self, p: &Vec2) -> bool {
        self.pixel_of(p).is_some_and(|(c, r)| self.get(c, r))
    }

    /// 1-bit grayscale PNG, foreground white.
    pub fn to_png(&self) -> Result<Vec<u8>> {
        let stride = self.width.div_ceil(8);
        let mut packed = vec![0u8; stride * self.height];
        for row in 0..self.height {
            for col in 0..self.width {
                if self.get(col, row) {
                    packed[row * stride + col / 8] |= 0x80 >> (col % 8);
                }
            }
        }
        let mut out = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut out, self.width as u32, self.height as u32);
            enc.set_color(png::ColorType::Grayscale);
            enc.set_depth(png::BitDepth::One);
            let mut writer = enc.write_header().map_err(|e| Error::Io(e.to_string()))?;
            writer.write_image_data(&packed).map_err(|e| Error::Io(e.to_string()))?;
        }
        Ok(out)
    }
}

/// Marks every pixel whose center falls inside any geometry path.
pub fn rasterize_mask(clipart: &Clipart, resolution: usize) -> Result<MaskImage> {
    if resolution < MIN_MASK_RESOLUTION {
        return Err(Error::Config(format!(
            "mask resolution must be at least {MIN_MASK_RESOLUTION}, got {resolution}"
        )));
    }
    let mut mask = MaskImage::new(resolution, resolution);
    let r = resolution as f64;
    for path in geometry_paths(clipart) {
        let b: Bounds2 = path.bounds();
        let col0 = ((b.min.x * r - 0.5).floor().max(0.0)) as usize;
        let col1 = ((b.max.x * r - 0.5).ceil().min(r - 1.0)).max(0.0) as usize;
        let row0 = (((1.0 - b.max.y) * r - 0.5).floor().max(0.0)) as usize;
        let row1 = (((1.0 - b.min.y) * r - 0.5).ceil().min(r - 1.0)).max(0.0) as usize;
        for row in row0..=row1 {
            for col in col0..=col1 {
                if !mask.get(col, row) && path.contains(&mask.pixel_center(col, row)) {
                    mask.set(col, row, true);
                }
            }
        }
    }
    Ok(mask)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::point_in_polygon;
    use crate::model::tests::{clipart_of, rect_path};
    use crate::model::PathKind;

    #[test]
    fn full_square_covers_everything() {
        let c = clipart_of(vec![rect_path(0, 0.0, 0.0, 1.0, 1.0)]);
        assert_eq!(rasterize_mask(&c, 64).unwrap().count(), 4096);
    }

    #[test]
    fn left_half_covers_half() {
        let c = clipart_of(vec![rect_path(0, 0.0, 0.0, 0.5, 1.0)]);
        let n = rasterize_mask(&c, 64).unwrap().count();
        assert!((2048 - 64..=2048 + 64).contains(&n), "{n}");
    }

    #[test]
    fn concave_l_matches_pixel_oracle() {
        let mut p = rect_path(0, 0.0, 0.0, 1.0, 1.0);
        p.polygon = vec![
            Vec2::new(0.1, 0.1),
            Vec2::new(0.9, 0.1),
            Vec2::new(0.9, 0.4),
            Vec2::new(0.37, 0.4),
            Vec2::new(0.37, 0.93),
            Vec2::new(0.1, 0.93),
        ];
        let c = clipart_of(vec![p.clone()]);
        let mask = rasterize_mask(&c, 64).unwrap();
        for row in 0..64 {
            for col in 0..64 {
                let center = Vec2::new((col as f64 + 0.5) / 64.0, 1.0 - (row as f64 + 0.5) / 64.0);
                assert_eq!(mask.get(col, row), point_in_polygon(&center, &p.polygon));
            }
        }
    }

    #[test]
    fn shading_paths_are_excluded() {
        let mut shade = rect_path(1, 0.5, 0.0, 1.0, 1.0);
        shade.kind = PathKind::Shading;
        let c = clipart_of(vec![rect_path(0, 0.0, 0.0, 0.5, 1.0), shade]);
        assert_eq!(rasterize_mask(&c, 32).unwrap().count(), 512);
    }

    #[test]
    fn area_converges_with_resolution() {
        let mut p = rect_path(0, 0.0, 0.0, 1.0, 1.0);
        p.polygon = (0..40)
            .map(|k| {
                let t = std::f64::consts::TAU * k as f64 / 40.0;
                Vec2::new(0.5 + 0.4 * t.cos(), 0.5 + 0.3 * t.sin())
            })
            .collect();
        let area = p.area();
        let c = clipart_of(vec![p]);
        let errs: Vec<f64> = [64, 128, 256]
            .iter()
            .map(|&r| {
                let m = rasterize_mask(&c, r).unwrap();
                (m.count() as f64 / (r * r) as f64 - area).abs()
            })
            .collect();
        assert!(errs[2] < errs[0], "{errs:?}");
        assert!(errs[2] < 2e-3);
    }

    #[test]
    fn tiny_resolution_rejected_and_png_encodes() {
        let c = clipart_of(vec![rect_path(0, 0.0, 0.0, 0.5, 1.0)]);
        assert!(rasterize_mask(&c, 8).is_err());
        let png = rasterize_mask(&c, 20).unwrap().to_png().unwrap();
        assert_eq!(&png[1..4], b"PNG");
    }

    #[test]
    fn pixel_lookup() {
        let m = MaskImage::new(4, 4);
        assert_eq!(m.pixel_of(&Vec2::new(0.0, 1.0)), Some((0, 0)));
        assert_eq!(m.pixel_of(&Vec2::new(1.0, 0.0)), Some((3, 3)));
        assert_eq!(m.pixel_of(&Vec2::new(1.1, 0.5)), None);
    }
}
