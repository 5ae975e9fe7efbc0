//! Plain SVG output: field heatmaps with contour and curve overlays.
//!
//! The first chart axis runs left to right, the second bottom to top.

use std::fmt::Write;

use crate::levelset::Segment;
use crate::real::Real;
use crate::surface::{ScalarField, SurfaceGrid};

/// Heatmaps are averaged down to at most this many blocks per axis.
const MAX_BLOCKS: usize = 128;

pub struct SvgCanvas {
    size: f64,
    x0: f64,
    y0: f64,
    sx: f64,
    sy: f64,
    body: String,
}

impl SvgCanvas {
    /// Canvas spanning the chart of `grid`, `size` pixels on its longer side.
    pub fn for_grid<T: Real>(grid: &SurfaceGrid<T>, size: f64) -> Self {
        let (hx, _) = grid.spacing();
        let x0 = grid.x_origin().f64() - 0.5 * hx.f64();
        let wx = grid.nx() as f64 * hx.f64();
        let wy = grid.period_y().f64();
        let scale = size / wx.max(wy);
        Self { size, x0, y0: 0.0, sx: scale, sy: scale, body: String::new() }
    }

    fn width(&self) -> f64 {
        self.size
    }

    fn px(&self, p: [f64; 2]) -> (f64, f64) {
        ((p[0] - self.x0) * self.sx, self.size - (p[1] - self.y0) * self.sy)
    }

    /// Block-averaged heatmap; diverging around zero when the field changes sign.
    pub fn heatmap<T: Real>(&mut self, f: &ScalarField<T>) -> &mut Self {
        let grid = f.grid();
        let (bx, by) = (grid.nx().div_ceil(MAX_BLOCKS), grid.ny().div_ceil(MAX_BLOCKS));
        let (nbx, nby) = (grid.nx().div_ceil(bx), grid.ny().div_ceil(by));
        let mut blocks = vec![0.0; nbx * nby];
        let mut counts = vec![0usize; nbx * nby];
        for (k, v) in f.values().iter().enumerate() {
            let (i, j) = grid.ij(k);
            let b = (i / bx) * nby + j / by;
            blocks[b] += v.f64();
            counts[b] += 1;
        }
        for (b, c) in blocks.iter_mut().zip(&counts) {
            *b /= *c as f64;
        }
        let lo = blocks.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = blocks.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let signed = lo < 0.0 && hi > 0.0;
        let (hx, hy) = grid.spacing();
        let (cw, ch) = (bx as f64 * hx.f64() * self.sx, by as f64 * hy.f64() * self.sy);
        for a in 0..nbx {
            for b in 0..nby {
                let v = blocks[a * nby + b];
                let color = if signed {
                    let m = lo.abs().max(hi);
                    diverging(v / m)
                } else {
                    sequential(if hi > lo { (v - lo) / (hi - lo) } else { 0.5 })
                };
                let left = a as f64 * cw;
                let top = self.size - (b + 1) as f64 * ch;
                let _ = write!(
                    self.body,
                    r#"<rect x="{left:.2}" y="{top:.2}" width="{:.2}" height="{:.2}" fill="{color}"/>"#,
                    cw + 0.05,
                    ch + 0.05
                );
            }
        }
        self.body.push('\n');
        self
    }

    /// Line segments drawn as one path.
    pub fn segments<T: Real>(&mut self, segs: &[Segment<T>], color: &str, width: f64) -> &mut Self {
        if segs.is_empty() {
            return self;
        }
        let mut d = String::new();
        for s in segs {
            let (a, b) = s.to_f64();
            let (ax, ay) = self.px(a);
            let (bx, by) = self.px(b);
            let _ = write!(d, "M{ax:.2} {ay:.2}L{bx:.2} {by:.2}");
        }
        let _ = writeln!(self.body, r#"<path d="{d}" stroke="{color}" stroke-width="{width}" fill="none"/>"#);
        self
    }

    pub fn finish(&self) -> String {
        let w = self.width();
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{w}\" viewBox=\"0 0 {w} {w}\">\n<rect width=\"{w}\" height=\"{w}\" fill=\"white\"/>\n{}</svg>\n",
            self.body
        )
    }
}

fn hex(r: f64, g: f64, b: f64) -> String {
    let c = |x: f64| (x.clamp(0.0, 1.0) * 255.0).round() as u8;
    format!("#{:02x}{:02x}{:02x}", c(r), c(g), c(b))
}

/// Blue for -1, white for 0, red for +1.
fn diverging(t: f64) -> String {
    let t = t.clamp(-1.0, 1.0);
    if t < 0.0 {
        hex(1.0 + t, 1.0 + t, 1.0)
    } else {
        hex(1.0, 1.0 - t, 1.0 - t)
    }
}

/// Dark blue through teal to yellow.
fn sequential(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    hex(0.27 + 0.72 * t * t, 0.0 + 0.9 * t, 0.33 + 0.3 * t - 0.5 * t * t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levelset::extract_level;

    #[test]
    fn renders_heatmap_and_contour() {
        let g = SurfaceGrid::<f64>::torus(32, 32, 1.0, 1.0).unwrap();
        let f = ScalarField::from_fn(&g, |x, y| (6.0 * x).sin() * (6.0 * y).cos());
        let c = extract_level(&f, 0.2).unwrap();
        let svg = SvgCanvas::for_grid(&g, 256.0).heatmap(&f).segments(&c.segments, "black", 1.0).finish();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<rect").count(), 32 * 32 + 1);
        assert!(svg.contains("<path"));
    }
}
