//! Grayscale and color raster output for configurations on planar windows.

use std::io::Write;

use crate::color::{Color, ColorSpace, Configuration};
use crate::error::{Error, Result};
use crate::geometry::{SiteId, SiteSpace, WindowDescriptor};

/// How color indices map to pixels.
#[derive(Clone, Debug, PartialEq)]
pub enum Palette {
    /// Maximal color black, minimal color white, linear in between.
    Gray,
    /// One RGB triple per color index.
    Rgb(Vec<[u8; 3]>),
}

impl Palette {
    /// Gray for two colors, an evenly spread RGB ramp otherwise.
    pub fn default_for(colors: &ColorSpace) -> Palette {
        if colors.len() <= 2 {
            return Palette::Gray;
        }
        let n = colors.len() - 1;
        Palette::Rgb(
            (0..=n)
                .map(|i| {
                    let t = i as f64 / n as f64;
                    let r = (255.0 * t) as u8;
                    let g = (255.0 * (1.0 - (2.0 * t - 1.0).abs())) as u8;
                    let b = (255.0 * (1.0 - t)) as u8;
                    [r, g, b]
                })
                .collect(),
        )
    }
}

/// A raster image: one pixel per site, rows top to bottom.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    /// 1 (gray) or 3 (RGB) bytes per pixel.
    pub channels: usize,
    pub data: Vec<u8>,
}

impl Image {
    /// Binary PGM (P5) or PPM (P6).
    pub fn write_pnm(&self, mut w: impl Write) -> Result<()> {
        let magic = if self.channels == 1 { "P5" } else { "P6" };
        write!(w, "{magic}\n{} {}\n255\n", self.width, self.height)?;
        w.write_all(&self.data)?;
        Ok(())
    }

    pub fn to_pnm_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.data.len() + 32);
        self.write_pnm(&mut out).expect("writing to memory");
        out
    }
}

/// Renders the bounding rectangle of `sites`. Columns follow the first
/// coordinate and rows the second (the vertical axis points down; for PCA
/// windows rows are time layers). Undefined sites are drawn as the minimal
/// color.
pub fn render_texture(
    space: &SiteSpace,
    sites: &[SiteId],
    config: &Configuration,
    colors: &ColorSpace,
    palette: &Palette,
) -> Result<Image> {
    match space.descriptor() {
        WindowDescriptor::Z2Rect { .. }
        | WindowDescriptor::Z2Region { .. }
        | WindowDescriptor::Pca { .. } => {}
        other => {
            return Err(Error::Unsupported(format!(
                "textures need a planar window, got {other:?}"
            )))
        }
    }
    if sites.is_empty() {
        return Err(Error::Domain("nothing to render".into()));
    }
    let keys: Vec<(i64, i64)> = sites.iter().map(|&s| space.key(s)).collect();
    let x0 = keys.iter().map(|k| k.0).min().unwrap();
    let x1 = keys.iter().map(|k| k.0).max().unwrap();
    let y0 = keys.iter().map(|k| k.1).min().unwrap();
    let y1 = keys.iter().map(|k| k.1).max().unwrap();
    let width = (x1 - x0 + 1) as usize;
    let height = (y1 - y0 + 1) as usize;
    let n = colors.len();
    let channels = match palette {
        Palette::Gray => 1,
        Palette::Rgb(p) => {
            if p.len() < n {
                return Err(Error::Domain(format!(
                    "palette has {} entries for {n} colors",
                    p.len()
                )));
            }
            3
        }
    };
    let pixel = |c: Color| -> Vec<u8> {
        match palette {
            Palette::Gray => {
                let level = if n <= 1 {
                    255
                } else {
                    255 - (255 * c.index() / (n - 1))
                };
                vec![level as u8]
            }
            Palette::Rgb(p) => p[c.index()].to_vec(),
        }
    };
    let white = pixel(colors.min());
    let mut data = Vec::with_capacity(width * height * channels);
    for _ in 0..width * height {
        data.extend_from_slice(&white);
    }
    for (&s, &(x, y)) in sites.iter().zip(&keys) {
        let c = config.get(s).unwrap_or(colors.min());
        let at = ((y - y0) as usize * width + (x - x0) as usize) * channels;
        data[at..at + channels].copy_from_slice(&pixel(c));
    }
    Ok(Image {
        width,
        height,
        channels,
        data,
    })
}
