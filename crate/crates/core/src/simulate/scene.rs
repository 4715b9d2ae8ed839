use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::blur::Plane;
use crate::error::{Error, Result};
use crate::types::{Point, LANDMARK_COUNT};

pub const MIN_SCENE_SIDE: usize = 256;
const SUPERSAMPLE: usize = 4;

/// Scene-level knobs. `lighting` scales every gray level, `contrast`
/// stretches levels about mid-gray (a stand-in for zoom), `face_scale`
/// shrinks or grows the face (a stand-in for distance).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneConfig {
    pub width: usize,
    pub height: usize,
    pub face_scale: f64,
    pub lighting: f64,
    pub contrast: f64,
    /// Face-swap mask margin around the face ellipse, as a fraction of width.
    pub swap_margin: f64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            width: 256,
            height: 256,
            face_scale: 1.0,
            lighting: 1.0,
            contrast: 1.0,
            swap_margin: 0.12,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        if self.width < MIN_SCENE_SIDE || self.height < MIN_SCENE_SIDE {
            return Err(Error::invalid(
                "scene size",
                format!("{}x{} is below {MIN_SCENE_SIDE}x{MIN_SCENE_SIDE}", self.width, self.height),
            ));
        }
        for (what, v) in [("face_scale", self.face_scale), ("lighting", self.lighting), ("contrast", self.contrast)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid("scene", format!("{what} = {v} must be > 0")));
            }
        }
        if !(self.face_scale <= 1.3) {
            return Err(Error::invalid("scene", format!("face_scale = {} leaves the frame", self.face_scale)));
        }
        if !(self.swap_margin >= 0.0) {
            return Err(Error::invalid("scene", "swap_margin must be ≥ 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ellipse {
    pub cx: f64,
    pub cy: f64,
    pub rx: f64,
    pub ry: f64,
}

impl Ellipse {
    #[inline]
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let dx = (x - self.cx) / self.rx;
        let dy = (y - self.cy) / self.ry;
        dx * dx + dy * dy <= 1.0
    }

    fn bbox(&self) -> (f64, f64, f64, f64) {
        (self.cx - self.rx, self.cy - self.ry, self.cx + self.rx, self.cy + self.ry)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Shape {
    Ellipse { ellipse: Ellipse, level: f64 },
    Polygon { points: Vec<[f64; 2]>, level: f64 },
}

impl Shape {
    fn level(&self) -> f64 {
        match self {
            Shape::Ellipse { level, .. } | Shape::Polygon { level, .. } => *level,
        }
    }

    fn contains(&self, x: f64, y: f64) -> bool {
        match self {
            Shape::Ellipse { ellipse, .. } => ellipse.contains(x, y),
            Shape::Polygon { points, .. } => {
                // Even-odd ray casting.
                let mut inside = false;
                let n = points.len();
                for i in 0..n {
                    let [xi, yi] = points[i];
                    let [xj, yj] = points[(i + n - 1) % n];
                    if (yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi {
                        inside = !inside;
                    }
                }
                inside
            }
        }
    }

    fn bbox(&self) -> (f64, f64, f64, f64) {
        match self {
            Shape::Ellipse { ellipse, .. } => ellipse.bbox(),
            Shape::Polygon { points, .. } => points.iter().fold(
                (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
                |(a, b, c, d), [x, y]| (a.min(*x), b.min(*y), c.max(*x), d.max(*y)),
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub seed: u64,
    pub width: usize,
    pub height: usize,
    pub face: Ellipse,
    /// Area replaced by a face swap; the face ellipse plus a margin.
    pub swap_mask: Ellipse,
    pub background: f64,
    pub brightness_offset: f64,
    /// Painted in order over the background.
    pub elements: Vec<Shape>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub spec: SceneSpec,
    pub base: Plane,
    pub landmarks: [Point; LANDMARK_COUNT],
}

fn paint(plane: &mut Plane, shape: &Shape) {
    let (x0, y0, x1, y1) = shape.bbox();
    let xa = x0.floor().max(0.0) as usize;
    let ya = y0.floor().max(0.0) as usize;
    let xb = (x1.ceil().max(0.0) as usize).min(plane.width);
    let yb = (y1.ceil().max(0.0) as usize).min(plane.height);
    let level = shape.level();
    let step = 1.0 / SUPERSAMPLE as f64;
    let total = (SUPERSAMPLE * SUPERSAMPLE) as f64;
    for y in ya..yb {
        for x in xa..xb {
            let mut hits = 0usize;
            for sj in 0..SUPERSAMPLE {
                for si in 0..SUPERSAMPLE {
                    let px = x as f64 + (si as f64 + 0.5) * step;
                    let py = y as f64 + (sj as f64 + 0.5) * step;
                    hits += shape.contains(px, py) as usize;
                }
            }
            if hits > 0 {
                let cover = hits as f64 / total;
                let v = &mut plane.data[y * plane.width + x];
                *v = *v * (1.0 - cover) + level * cover;
            }
        }
    }
}

/// Standard 68-point layout on a face ellipse (1-based numbering in the
/// comments, 0-based storage).
fn face_landmarks(face: &Ellipse, eyes: [(f64, f64); 2], eye_r: (f64, f64), mouth: Ellipse) -> [Point; LANDMARK_COUNT] {
    let Ellipse { cx, cy, rx, ry } = *face;
    let mut pts = [Point::new(0.0, 0.0); LANDMARK_COUNT];
    // 1–17 jaw, left ear level through the chin to the right.
    for i in 0..17 {
        let phi = PI - PI * i as f64 / 16.0;
        pts[i] = Point::new(cx + rx * phi.cos(), cy + ry * phi.sin());
    }
    // 18–22 and 23–27 brows, outer→inner then inner→outer.
    let (erx, ery) = eye_r;
    for (b, &(ex, ey)) in eyes.iter().enumerate() {
        for j in 0..5 {
            let t = j as f64 / 4.0;
            let u = if b == 0 { t } else { 1.0 - t };
            let x = ex - 1.2 * erx + 2.2 * erx * u;
            let arch = (PI * u).sin();
            pts[17 + 5 * b + j] = Point::new(x, ey - 2.2 * ery - 0.8 * ery * arch);
        }
    }
    // 28–31 bridge, 32–36 nostril base.
    for j in 0..4 {
        pts[27 + j] = Point::new(cx, eyes[0].1 + j as f64 * 0.11 * ry);
    }
    for j in 0..5 {
        pts[31 + j] = Point::new(cx + (j as f64 - 2.0) * 0.08 * rx, cy + 0.2 * ry);
    }
    // 37–42 and 43–48 eyes, corner, two upper, corner, two lower.
    for (e, &(ex, ey)) in eyes.iter().enumerate() {
        let ring = [(-1.0, 0.0), (-1.0 / 3.0, -1.0), (1.0 / 3.0, -1.0), (1.0, 0.0), (1.0 / 3.0, 1.0), (-1.0 / 3.0, 1.0)];
        for (j, (dx, dy)) in ring.iter().enumerate() {
            pts[36 + 6 * e + j] = Point::new(ex + dx * erx, ey + dy * ery);
        }
    }
    // 49–60 outer lip, 61–68 inner lip, both from the left corner over the top.
    for j in 0..12 {
        let th = PI + 2.0 * PI * j as f64 / 12.0;
        pts[48 + j] = Point::new(mouth.cx + mouth.rx * th.cos(), mouth.cy + mouth.ry * th.sin());
    }
    for j in 0..8 {
        let th = PI + 2.0 * PI * j as f64 / 8.0;
        pts[60 + j] = Point::new(mouth.cx + 0.7 * mouth.rx * th.cos(), mouth.cy + 0.4 * mouth.ry * th.sin());
    }
    pts
}

/// Layered gray-shape face. Deterministic in `seed`.
pub fn make_scene(seed: u64, config: &SceneConfig) -> Result<Scene> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (config.width as f64, config.height as f64);
    let side = w.min(h);

    let background = rng.random_range(55.0..95.0);
    let skin = rng.random_range(150.0..190.0);
    let face = Ellipse {
        cx: w / 2.0 + rng.random_range(-0.03..0.03) * w,
        cy: 0.47 * h + rng.random_range(-0.02..0.02) * h,
        rx: 0.23 * side * config.face_scale * rng.random_range(0.95..1.05),
        ry: 0.31 * side * config.face_scale * rng.random_range(0.95..1.05),
    };
    let Ellipse { cx, cy, rx, ry } = face;
    let eye_y = cy - 0.18 * ry;
    let eye_dx = 0.38 * rx * rng.random_range(0.95..1.05);
    let eyes = [(cx - eye_dx, eye_y), (cx + eye_dx, eye_y)];
    let eye_r = (0.2 * rx, 0.08 * ry);
    let mouth = Ellipse {
        cx,
        cy: cy + 0.5 * ry,
        rx: 0.35 * rx * rng.random_range(0.9..1.1),
        ry: 0.1 * ry,
    };

    let mut elements = Vec::new();
    // Neck and collar sit behind the face.
    elements.push(Shape::Polygon {
        points: vec![[cx - 0.55 * rx, cy + 0.5 * ry], [cx + 0.55 * rx, cy + 0.5 * ry], [cx + 0.6 * rx, h], [cx - 0.6 * rx, h]],
        level: skin - rng.random_range(12.0..22.0),
    });
    let collar_y = cy + ry + 0.06 * h;
    elements.push(Shape::Polygon {
        points: vec![[0.08 * w, h], [cx - 0.5 * rx, collar_y], [cx, collar_y + 0.08 * h], [cx + 0.5 * rx, collar_y], [0.92 * w, h]],
        level: rng.random_range(25.0..50.0),
    });
    elements.push(Shape::Ellipse { ellipse: face, level: skin });
    for _ in 0..rng.random_range(3..7) {
        let a = rng.random_range(0.0..2.0 * PI);
        let r = rng.random_range(0.2..0.75f64).sqrt();
        elements.push(Shape::Ellipse {
            ellipse: Ellipse {
                cx: cx + r * rx * a.cos(),
                cy: cy + r * ry * a.sin(),
                rx: rng.random_range(0.03..0.07) * rx,
                ry: rng.random_range(0.03..0.07) * rx,
            },
            level: skin + rng.random_range(-25.0..-10.0),
        });
    }
    let brow_level = rng.random_range(40.0..80.0);
    for &(ex, ey) in &eyes {
        elements.push(Shape::Ellipse {
            ellipse: Ellipse { cx: ex, cy: ey - 2.6 * eye_r.1, rx: 1.15 * eye_r.0, ry: 0.45 * eye_r.1 },
            level: brow_level,
        });
    }
    let iris = rng.random_range(30.0..70.0);
    for &(ex, ey) in &eyes {
        elements.push(Shape::Ellipse {
            ellipse: Ellipse { cx: ex, cy: ey, rx: eye_r.0, ry: eye_r.1 },
            level: 215.0,
        });
        elements.push(Shape::Ellipse {
            ellipse: Ellipse { cx: ex, cy: ey, rx: 0.45 * eye_r.0, ry: 0.95 * eye_r.1 },
            level: iris,
        });
    }
    elements.push(Shape::Polygon {
        points: vec![[cx, eye_y], [cx - 0.11 * rx, cy + 0.2 * ry], [cx + 0.11 * rx, cy + 0.2 * ry]],
        level: skin - rng.random_range(22.0..38.0),
    });
    for s in [-1.0, 1.0] {
        elements.push(Shape::Ellipse {
            ellipse: Ellipse { cx: cx + s * 0.06 * rx, cy: cy + 0.2 * ry, rx: 0.035 * rx, ry: 0.025 * ry },
            level: 60.0,
        });
    }
    elements.push(Shape::Ellipse { ellipse: mouth, level: rng.random_range(100.0..135.0) });
    elements.push(Shape::Ellipse {
        ellipse: Ellipse { cx: mouth.cx, cy: mouth.cy, rx: 0.8 * mouth.rx, ry: 0.25 * mouth.ry },
        level: 55.0,
    });

    // Lighting and contrast act on levels, not geometry.
    let brightness_offset = (config.lighting - 1.0) * 128.0;
    let adjust = |v: f64| 128.0 + (v * config.lighting - 128.0) * config.contrast;
    let background = adjust(background);
    for e in &mut elements {
        match e {
            Shape::Ellipse { level, .. } | Shape::Polygon { level, .. } => *level = adjust(*level),
        }
    }

    let mut base = Plane::new(config.width, config.height, background);
    for e in &elements {
        paint(&mut base, e);
    }
    let margin = config.swap_margin * w;
    let spec = SceneSpec {
        seed,
        width: config.width,
        height: config.height,
        face,
        swap_mask: Ellipse { cx, cy, rx: rx + margin, ry: ry + margin },
        background,
        brightness_offset,
        elements,
    };
    Ok(Scene {
        landmarks: face_landmarks(&face, eyes, eye_r, mouth),
        spec,
        base,
    })
}
