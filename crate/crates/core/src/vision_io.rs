//! Frames, frame sequences, loaders and synthetic scenarios.
//!
//! Pixels are RGB, row-major, origin top-left, channels interleaved, with
//! values in `[0, 1]`.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{config_err, PvmError, Result};

/// An RGB image with `f64` channels.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Frame {
    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Self { width, height, data: vec![value; width * height * 3] }
    }

    pub fn from_u8(width: usize, height: usize, bytes: &[u8]) -> Self {
        assert_eq!(bytes.len(), width * height * 3);
        Self {
            width,
            height,
            data: bytes.iter().map(|&b| b as f64 / 255.0).collect(),
        }
    }

    /// Quantizes to 8 bits with `round(v·255)`.
    pub fn to_u8(&self) -> Vec<u8> {
        self.data.iter().map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8).collect()
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, c: usize) -> usize {
        (y * self.width + x) * 3 + c
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[self.index(x, y, c)]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: f64) {
        let i = self.index(x, y, c);
        self.data[i] = v;
    }

    pub fn set_rgb(&mut self, x: usize, y: usize, rgb: [f64; 3]) {
        let i = self.index(x, y, 0);
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    /// Copies the `w × h` rectangle at `(x, y)`.
    ///
    /// Panics if the rectangle leaves the frame; clamping is the caller's job.
    pub fn crop(&self, x: usize, y: usize, w: usize, h: usize) -> Frame {
        assert!(
            x + w <= self.width && y + h <= self.height,
            "crop {w}x{h} at ({x},{y}) outside {}x{} frame",
            self.width,
            self.height
        );
        let mut data = Vec::with_capacity(w * h * 3);
        for row in y..y + h {
            let start = self.index(x, row, 0);
            data.extend_from_slice(&self.data[start..start + w * 3]);
        }
        Frame { width: w, height: h, data }
    }

    /// Writes the tile's pixels into `out`, row-major with interleaved
    /// channels.
    pub fn read_rect(&self, x: usize, y: usize, w: usize, h: usize, out: &mut Vec<f64>) {
        out.clear();
        for row in y..y + h {
            let start = self.index(x, row, 0);
            out.extend_from_slice(&self.data[start..start + w * 3]);
        }
    }

    /// Draws a one-pixel rectangle outline.
    pub fn draw_rect_outline(&mut self, x: usize, y: usize, w: usize, h: usize, rgb: [f64; 3]) {
        if w == 0 || h == 0 {
            return;
        }
        let x1 = (x + w - 1).min(self.width - 1);
        let y1 = (y + h - 1).min(self.height - 1);
        for px in x..=x1 {
            self.set_rgb(px, y, rgb);
            self.set_rgb(px, y1, rgb);
        }
        for py in y..=y1 {
            self.set_rgb(x, py, rgb);
            self.set_rgb(x1, py, rgb);
        }
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        let img = image::RgbImage::from_raw(self.width as u32, self.height as u32, self.to_u8())
            .expect("buffer length matches dimensions");
        img.save_with_format(path, image::ImageFormat::Png)
            .map_err(|e| PvmError::Input(format!("{}: {e}", path.display())))
    }
}

/// An ordered list of equally sized frames.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    pub frames: Vec<Frame>,
    /// Informational only.
    pub fps: f64,
}

impl FrameSequence {
    pub fn new(frames: Vec<Frame>) -> Result<Self> {
        if let Some(first) = frames.first() {
            if let Some((i, f)) = frames
                .iter()
                .enumerate()
                .find(|(_, f)| f.width != first.width || f.height != first.height)
            {
                return Err(PvmError::Input(format!(
                    "frame {i} is {}x{}, expected {}x{}",
                    f.width, f.height, first.width, first.height
                )));
            }
        }
        Ok(Self { frames, fps: 30.0 })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn dims(&self) -> Option<(usize, usize)> {
        self.frames.first().map(|f| (f.width, f.height))
    }
}

const RGB8_MAGIC: &[u8; 4] = b"RGB8";

/// Writes the raw container: `"RGB8"`, then little-endian `u32` width,
/// height and frame count, then the quantized pixels.
pub fn write_rgb8(seq: &FrameSequence, path: &Path) -> Result<()> {
    let (w, h) = seq.dims().unwrap_or((0, 0));
    let mut out = Vec::with_capacity(16 + seq.len() * w * h * 3);
    out.extend_from_slice(RGB8_MAGIC);
    for v in [w, h, seq.len()] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    for f in &seq.frames {
        out.extend_from_slice(&f.to_u8());
    }
    fs::File::create(path)?.write_all(&out)?;
    Ok(())
}

pub fn read_rgb8(path: &Path) -> Result<FrameSequence> {
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| PvmError::Input(format!("{}: {e}", path.display())))?;
    let bad = |msg: &str| PvmError::Input(format!("{}: {msg}", path.display()));
    if bytes.len() < 16 || &bytes[..4] != RGB8_MAGIC {
        return Err(bad("not an RGB8 container"));
    }
    let field = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize;
    let (w, h, n) = (field(0), field(1), field(2));
    let frame_len = w * h * 3;
    if bytes.len() != 16 + n * frame_len {
        return Err(bad(&format!(
            "expected {} bytes for {n} frames of {w}x{h}, found {}",
            16 + n * frame_len,
            bytes.len()
        )));
    }
    let frames = bytes[16..]
        .chunks_exact(frame_len.max(1))
        .take(n)
        .map(|chunk| Frame::from_u8(w, h, chunk))
        .collect();
    FrameSequence::new(frames)
}

fn load_image(path: &Path) -> Result<Frame> {
    let img = image::open(path).map_err(|e| PvmError::Input(format!("{}: {e}", path.display())))?;
    let rgb = img.to_rgb8();
    Ok(Frame::from_u8(rgb.width() as usize, rgb.height() as usize, rgb.as_raw()))
}

/// Loads a directory of PNG/PPM frames in lexicographic filename order, or a
/// single RGB8 container.
pub fn load_sequence(path: &Path) -> Result<FrameSequence> {
    if path.is_file() {
        return read_rgb8(path);
    }
    let entries = fs::read_dir(path).map_err(|e| PvmError::Input(format!("{}: {e}", path.display())))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .map(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "ppm"))
                .unwrap_or(false)
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(PvmError::Input(format!("{}: no PNG or PPM frames", path.display())));
    }
    let mut frames = Vec::with_capacity(files.len());
    for file in &files {
        let frame = load_image(file)?;
        if let Some(first) = frames.first() {
            let first: &Frame = first;
            if (frame.width, frame.height) != (first.width, first.height) {
                return Err(PvmError::Input(format!(
                    "{}: {}x{} differs from {}x{}",
                    file.display(),
                    frame.width,
                    frame.height,
                    first.width,
                    first.height
                )));
            }
        }
        frames.push(frame);
    }
    FrameSequence::new(frames)
}

/// Synthetic scenarios.
#[derive(Debug, Clone, PartialEq)]
pub enum Scenario {
    /// Constant 0.5 everywhere.
    UniformGray { width: usize, height: usize, n_frames: usize },
    /// A square patch on a gray background switching between black and
    /// white every half period. With `checker` the patch is a one-pixel
    /// checkerboard whose phase flips instead.
    FlickerPatch {
        width: usize,
        height: usize,
        n_frames: usize,
        x: usize,
        y: usize,
        size: usize,
        period: usize,
        checker: bool,
    },
    /// A randomly colored rectangle moving over a flat background along a
    /// closed polyline of waypoints (object top-left corners).
    MovingTexture {
        width: usize,
        height: usize,
        n_frames: usize,
        object_w: usize,
        object_h: usize,
        waypoints: Vec<(f64, f64)>,
        texture_seed: u64,
    },
    /// Two random frames shown alternately.
    TwoFrameAlternator { width: usize, height: usize, n_frames: usize },
}

impl Scenario {
    pub fn dims(&self) -> (usize, usize) {
        match *self {
            Scenario::UniformGray { width, height, .. }
            | Scenario::FlickerPatch { width, height, .. }
            | Scenario::MovingTexture { width, height, .. }
            | Scenario::TwoFrameAlternator { width, height, .. } => (width, height),
        }
    }

    /// A 88×50 moving-object scene, half the linear size of a 176×99 clip.
    pub fn desk_moving_texture(n_frames: usize) -> Self {
        Scenario::MovingTexture {
            width: 88,
            height: 50,
            n_frames,
            object_w: 12,
            object_h: 10,
            waypoints: vec![(6.0, 8.0), (66.0, 6.0), (70.0, 34.0), (30.0, 36.0), (10.0, 30.0)],
            texture_seed: 7,
        }
    }
}

const BACKGROUND: [f64; 3] = [0.55, 0.5, 0.45];

/// Point at fraction `t ∈ [0, 1)` along the closed polyline.
fn along_path(points: &[(f64, f64)], t: f64) -> (f64, f64) {
    if points.len() == 1 {
        return points[0];
    }
    let seg_len = |i: usize| {
        let (a, b) = (points[i], points[(i + 1) % points.len()]);
        ((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)).sqrt()
    };
    let total: f64 = (0..points.len()).map(seg_len).sum();
    if total == 0.0 {
        return points[0];
    }
    let mut d = t * total;
    for i in 0..points.len() {
        let l = seg_len(i);
        if d <= l || i + 1 == points.len() {
            let f = if l > 0.0 { (d / l).min(1.0) } else { 0.0 };
            let (a, b) = (points[i], points[(i + 1) % points.len()]);
            return (a.0 + f * (b.0 - a.0), a.1 + f * (b.1 - a.1));
        }
        d -= l;
    }
    unreachable!()
}

/// Renders a scenario; identical `(scenario, seed)` pairs give identical
/// sequences.
pub fn synth_video(scenario: &Scenario, seed: u64) -> Result<FrameSequence> {
    let frames = match scenario {
        &Scenario::UniformGray { width, height, n_frames } => {
            vec![Frame::filled(width, height, 0.5); n_frames]
        }
        &Scenario::FlickerPatch { width, height, n_frames, x, y, size, period, checker } => {
            if size == 0 || x + size > width || y + size > height {
                return config_err(format!(
                    "flicker patch {size}x{size} at ({x},{y}) outside {width}x{height} frame"
                ));
            }
            if period < 2 {
                return config_err("flicker period must be at least 2");
            }
            (0..n_frames)
                .map(|t| {
                    let phase = (t % period) >= period / 2;
                    let mut f = Frame::filled(width, height, 0.5);
                    for py in y..y + size {
                        for px in x..x + size {
                            let on = if checker { ((px + py) % 2 == 1) ^ phase } else { phase };
                            let v = if on { 1.0 } else { 0.0 };
                            f.set_rgb(px, py, [v, v, v]);
                        }
                    }
                    f
                })
                .collect()
        }
        Scenario::MovingTexture { width, height, n_frames, object_w, object_h, waypoints, texture_seed } => {
            let (width, height, n_frames) = (*width, *height, *n_frames);
            let (ow, oh) = (*object_w, *object_h);
            if waypoints.is_empty() {
                return config_err("moving_texture needs at least one waypoint");
            }
            if ow == 0 || oh == 0 || ow > width || oh > height {
                return config_err("moving_texture object does not fit the frame");
            }
            for &(wx, wy) in waypoints {
                if wx < 0.0 || wy < 0.0 || wx + ow as f64 > width as f64 || wy + oh as f64 > height as f64 {
                    return config_err(format!("waypoint ({wx},{wy}) puts the object outside the frame"));
                }
            }
            let mut rng = ChaCha8Rng::seed_from_u64(*texture_seed);
            rng.set_stream(seed);
            let texture: Vec<[f64; 3]> = (0..ow * oh)
                .map(|_| [rng.gen::<u8>(), rng.gen::<u8>(), rng.gen::<u8>()].map(|b| b as f64 / 255.0))
                .collect();
            (0..n_frames)
                .map(|t| {
                    let (ox, oy) = along_path(waypoints, t as f64 / n_frames.max(1) as f64);
                    let (ox, oy) = (ox.round() as usize, oy.round() as usize);
                    let mut f = Frame::filled(width, height, 0.0);
                    for py in 0..height {
                        for px in 0..width {
                            f.set_rgb(px, py, BACKGROUND);
                        }
                    }
                    for dy in 0..oh {
                        for dx in 0..ow {
                            f.set_rgb(ox + dx, oy + dy, texture[dy * ow + dx]);
                        }
                    }
                    f
                })
                .collect()
        }
        &Scenario::TwoFrameAlternator { width, height, n_frames } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pair: Vec<Frame> = (0..2)
                .map(|_| {
                    let bytes: Vec<u8> = (0..width * height * 3).map(|_| rng.gen()).collect();
                    Frame::from_u8(width, height, &bytes)
                })
                .collect();
            (0..n_frames).map(|t| pair[t % 2].clone()).collect()
        }
    };
    FrameSequence::new(frames)
}
