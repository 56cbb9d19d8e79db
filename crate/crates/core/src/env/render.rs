//! Side-view rasterizer. The camera follows the body horizontally, so
//! forward motion shows up only as scrolling ground ticks.

use alloc::vec;
use alloc::vec::Vec;

use super::walker::WalkerState;
use crate::math;

/// Distance between ground ticks in meters.
pub const TICK_SPACING: f64 = 0.5;

const GROUND: u8 = 96;
const TICK: u8 = 160;
const BODY: u8 = 200;
const LEG: u8 = 255;

/// One grayscale observation, row-major, `res × res`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Frame {
    res: usize,
    pixels: Vec<u8>,
}

impl Frame {
    pub fn new(res: usize, pixels: Vec<u8>) -> Option<Frame> {
        (pixels.len() == res * res).then_some(Frame { res, pixels })
    }

    pub fn resolution(&self) -> usize {
        self.res
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.pixels[row * self.res + col]
    }
}

/// Pixel geometry for one resolution.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Camera {
    pub res: usize,
    /// Pixels per meter.
    pub scale: f64,
    /// Row of the ground line.
    pub ground_row: usize,
}

impl Camera {
    pub fn new(res: usize) -> Camera {
        Camera {
            res,
            scale: res as f64 / 2.0,
            ground_row: res - 1 - res / 8,
        }
    }

    /// Continuous pixel coordinates `(col, row)` of a world point.
    pub fn project(&self, body_x: f64, wx: f64, wy: f64) -> (f64, f64) {
        (
            self.res as f64 / 2.0 + (wx - body_x) * self.scale,
            self.ground_row as f64 - wy * self.scale,
        )
    }

    /// Columns of the ground ticks for a body at `body_x`.
    pub fn tick_columns(&self, body_x: f64) -> Vec<usize> {
        let half = self.res as f64 / (2.0 * self.scale);
        let first = math::floor((body_x - half) / TICK_SPACING) as i64;
        let last = math::floor((body_x + half) / TICK_SPACING) as i64 + 1;
        (first..=last)
            .filter_map(|i| {
                let (c, _) = self.project(body_x, i as f64 * TICK_SPACING, 0.0);
                let c = math::floor(c + 0.5);
                (c >= 0.0 && c < self.res as f64).then_some(c as usize)
            })
            .collect()
    }
}

struct Canvas {
    res: usize,
    px: Vec<u8>,
}

impl Canvas {
    fn plot(&mut self, col: i64, row: i64, v: u8) {
        if (0..self.res as i64).contains(&col) && (0..self.res as i64).contains(&row) {
            let p = &mut self.px[row as usize * self.res + col as usize];
            *p = (*p).max(v);
        }
    }

    /// Square brush of side `width` whose top-left pixel covers `(c, r)`.
    fn brush(&mut self, c: f64, r: f64, width: i64, v: u8) {
        let c0 = math::floor(c + 0.5) as i64 - (width - 1) / 2;
        let r0 = math::floor(r + 0.5) as i64 - (width - 1) / 2;
        for dr in 0..width {
            for dc in 0..width {
                self.plot(c0 + dc, r0 + dr, v);
            }
        }
    }

    fn stroke(&mut self, a: (f64, f64), b: (f64, f64), width: i64, v: u8) {
        let len = libm::fmax(libm::fabs(b.0 - a.0), libm::fabs(b.1 - a.1));
        let n = (math::floor(len * 4.0) as usize).max(1);
        for i in 0..=n {
            let t = i as f64 / n as f64;
            self.brush(a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1), width, v);
        }
    }
}

/// Rasterize the state: ground line, scrolling ticks below it, the body as
/// a filled square and the leg as two strokes.
pub fn render(state: &WalkerState, res: usize) -> Frame {
    let cam = Camera::new(res);
    let mut cv = Canvas {
        res,
        px: vec![0; res * res],
    };
    for c in 0..res as i64 {
        cv.plot(c, cam.ground_row as i64, GROUND);
    }
    for c in cam.tick_columns(state.x) {
        for r in cam.ground_row + 1..res {
            cv.plot(c as i64, r as i64, TICK);
        }
    }
    let width = (res as i64 / 16).max(1);
    let hip = cam.project(state.x, state.x, state.y);
    let [knee, foot] = state.leg_points();
    let knee = cam.project(state.x, knee.0, knee.1);
    let foot = cam.project(state.x, foot.0, foot.1);
    cv.stroke(hip, knee, width, LEG);
    cv.stroke(knee, foot, width, LEG);
    cv.brush(hip.0, hip.1, (res as i64 / 8).max(1), BODY);
    Frame {
        res,
        pixels: cv.px,
    }
}
