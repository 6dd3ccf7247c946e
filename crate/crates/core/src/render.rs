//! Costmap heat maps as binary PPM images.
//!
//! One pixel per cell: image row = grid row, image column = grid column.
//! Ground costs run from purple (free) toward red; aerial-only cells are red.
//! A path overlay draws driven edges in light purple and flown edges in green.

use std::io::Write;
use std::path::Path;

use crate::energy::edge_mode;
use crate::error::Result;
use crate::grid::GridMeta;
use crate::planner::{ModalWaypoint, Mode};
use crate::postprocess::supercover;

pub const LOW: [u8; 3] = [96, 0, 160];
pub const HIGH: [u8; 3] = [255, 0, 0];
pub const GROUND_PATH: [u8; 3] = [210, 150, 255];
pub const FLIGHT_PATH: [u8; 3] = [0, 220, 0];
pub const UNKNOWN: [u8; 3] = [0, 0, 0];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<[u8; 3]>,
}

impl Image {
    pub fn new(width: usize, height: usize, fill: [u8; 3]) -> Self {
        Image {
            width,
            height,
            pixels: vec![fill; width * height],
        }
    }

    pub fn get(&self, row: usize, col: usize) -> [u8; 3] {
        self.pixels[row * self.width + col]
    }

    pub fn put(&mut self, row: usize, col: usize, px: [u8; 3]) {
        self.pixels[row * self.width + col] = px;
    }

    /// P6 encoding.
    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.reserve(self.pixels.len() * 3);
        for px in &self.pixels {
            out.extend_from_slice(px);
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.to_ppm())?;
        Ok(())
    }
}

fn lerp(a: [u8; 3], b: [u8; 3], t: f64) -> [u8; 3] {
    let t = t.clamp(0.0, 1.0);
    let mix = |x: u8, y: u8| (x as f64 + (y as f64 - x as f64) * t).round() as u8;
    [mix(a[0], b[0]), mix(a[1], b[1]), mix(a[2], b[2])]
}

/// Color for one cost value. Ground costs (at most 1) fill the first two
/// thirds of the ramp; anything at or above `energy_ratio` is fully red.
pub fn cost_color(cost: f64, energy_ratio: f64) -> [u8; 3] {
    if !cost.is_finite() {
        UNKNOWN
    } else if cost >= energy_ratio {
        HIGH
    } else {
        lerp(LOW, HIGH, cost.clamp(0.0, 1.0) * 2.0 / 3.0)
    }
}

pub fn render_costmap(
    meta: &GridMeta,
    costs: &[f64],
    energy_ratio: f64,
    path: Option<&[ModalWaypoint]>,
) -> Image {
    let mut img = Image::new(meta.cols, meta.rows, UNKNOWN);
    for (i, &c) in costs.iter().enumerate().take(meta.len()) {
        img.pixels[i] = cost_color(c, energy_ratio);
    }
    if let Some(wps) = path {
        for w in wps.windows(2) {
            let color = match edge_mode(&w[0], &w[1]) {
                Mode::Ground => GROUND_PATH,
                Mode::Aerial => FLIGHT_PATH,
            };
            for (r, c) in supercover(meta, [w[0].x, w[0].y], [w[1].x, w[1].y]) {
                if r >= 0 && c >= 0 && (r as usize) < meta.rows && (c as usize) < meta.cols {
                    img.put(r as usize, c as usize, color);
                }
            }
        }
    }
    img
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ramp_ends() {
        assert_eq!(cost_color(0.0, 60.0), LOW);
        assert_eq!(cost_color(60.0, 60.0), HIGH);
        assert_eq!(cost_color(75.0, 60.0), HIGH);
        assert_eq!(cost_color(f64::NAN, 60.0), UNKNOWN);
        let mid = cost_color(0.5, 60.0);
        assert!(mid[0] > LOW[0] && mid[0] < HIGH[0]);
    }

    #[test]
    fn ppm_header_and_size() {
        let meta = GridMeta::new(2, 3, 1.0, [0.0, 0.0]).unwrap();
        let img = render_costmap(&meta, &[0.0; 6], 60.0, None);
        let bytes = img.to_ppm();
        assert!(bytes.starts_with(b"P6\n3 2\n255\n"));
        assert_eq!(bytes.len(), b"P6\n3 2\n255\n".len() + 18);
    }

    #[test]
    fn overlay_colors_by_edge_mode() {
        let meta = GridMeta::new(3, 3, 1.0, [0.0, 0.0]).unwrap();
        let wp = |x, y, mode| ModalWaypoint { x, y, z: 0.0, mode };
        let path = [
            wp(-1.0, -1.0, Mode::Ground),
            wp(0.0, -1.0, Mode::Ground),
            wp(1.0, -1.0, Mode::Aerial),
        ];
        let img = render_costmap(&meta, &[0.0; 9], 60.0, Some(&path));
        assert_eq!(img.get(0, 0), GROUND_PATH);
        assert_eq!(img.get(2, 0), FLIGHT_PATH);
        assert_eq!(img.get(0, 2), LOW);
    }
}
