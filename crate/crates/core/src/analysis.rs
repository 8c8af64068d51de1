//! Local image entropy and the base / foveated / UHR comparison.
//!
//! The entropy of a pixel is the Shannon entropy (bits) of the 8-bit
//! intensity histogram over a disk around it, computed per channel and summed
//! over the three channels. Disks are clipped at the frame border and the
//! histogram is normalized over the pixels actually present.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use crate::engine::{Mode, ModelState};
use crate::error::{config_err, Result};
use crate::par;
use crate::saccade::{run_saccade_loop, SaccadeConfig};
use crate::vision_io::{Frame, FrameSequence};

pub const BINS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EntropyConfig {
    pub disk_radius: usize,
}

impl Default for EntropyConfig {
    fn default() -> Self {
        Self { disk_radius: 5 }
    }
}

/// Per-pixel entropy summed over channels, in bits.
#[derive(Debug, Clone, PartialEq)]
pub struct EntropyMap {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl EntropyMap {
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }
}

/// Half-widths of the disk rows: `dx² + dy² ≤ r²` for `|dx| ≤ half[dy + r]`.
fn disk_half_widths(r: usize) -> Vec<usize> {
    let r = r as i64;
    (-r..=r)
        .map(|dy| {
            let mut dx = 0;
            while (dx + 1) * (dx + 1) + dy * dy <= r * r {
                dx += 1;
            }
            dx as usize
        })
        .collect()
}

/// Shannon entropy of a histogram, summing bins in ascending order.
pub fn histogram_entropy(hist: &[u32], n: u32) -> f64 {
    let n = n as f64;
    let mut s = 0.0;
    for &c in hist {
        if c > 0 {
            let p = c as f64 / n;
            s -= p * p.log2();
        }
    }
    s
}

/// Entropy of one quantized channel, sliding the disk histogram along each
/// row so only the disk's left and right edges are updated per step.
fn channel_entropy(q: &[u8], w: usize, h: usize, radius: usize) -> Vec<f64> {
    let half = disk_half_widths(radius);
    let r = radius as i64;
    let mut out = vec![0.0; w * h];
    let mut hist = [0u32; BINS];
    for y in 0..h {
        hist.fill(0);
        let mut n = 0u32;
        let rows: Vec<(usize, i64)> = (-r..=r)
            .filter_map(|dy| {
                let yy = y as i64 + dy;
                (0..h as i64).contains(&yy).then(|| (yy as usize, half[(dy + r) as usize] as i64))
            })
            .collect();
        for &(yy, hw) in &rows {
            for xx in 0..=hw.min(w as i64 - 1) {
                hist[q[yy * w + xx as usize] as usize] += 1;
                n += 1;
            }
        }
        out[y * w] = histogram_entropy(&hist, n);
        for x in 1..w as i64 {
            for &(yy, hw) in &rows {
                let leaving = x - 1 - hw;
                if leaving >= 0 {
                    hist[q[yy * w + leaving as usize] as usize] -= 1;
                    n -= 1;
                }
                let entering = x + hw;
                if entering < w as i64 {
                    hist[q[yy * w + entering as usize] as usize] += 1;
                    n += 1;
                }
            }
            out[y * w + x as usize] = histogram_entropy(&hist, n);
        }
    }
    out
}

/// Local entropy of every pixel, summed over the three channels.
pub fn local_entropy_map(frame: &Frame, config: &EntropyConfig) -> EntropyMap {
    let (w, h) = (frame.width, frame.height);
    let q = frame.to_u8();
    let channels: Vec<Vec<f64>> = (0..3)
        .map(|c| {
            let plane: Vec<u8> = q.iter().skip(c).step_by(3).copied().collect();
            channel_entropy(&plane, w, h, config.disk_radius)
        })
        .collect();
    let data = (0..w * h).map(|i| channels[0][i] + channels[1][i] + channels[2][i]).collect();
    EntropyMap { width: w, height: h, data }
}

/// Entropy maps for every frame, computed concurrently.
pub fn entropy_maps(frames: &[Frame], config: &EntropyConfig) -> Vec<EntropyMap> {
    par::map_range(frames.len(), |i| local_entropy_map(&frames[i], config))
}

/// Mean of the entropy map over the view rectangle.
///
/// Panics if the view leaves the map.
pub fn view_entropy(map: &EntropyMap, x: usize, y: usize, w: usize, h: usize) -> f64 {
    assert!(
        x + w <= map.width && y + h <= map.height && w > 0 && h > 0,
        "view {w}x{h} at ({x},{y}) outside {}x{} map",
        map.width,
        map.height
    );
    let mut sum = 0.0;
    for row in y..y + h {
        sum += map.data[row * map.width + x..row * map.width + x + w].iter().sum::<f64>();
    }
    sum / (w * h) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelTag {
    Base,
    Foveated,
    Uhr,
}

impl ModelTag {
    pub const ALL: [ModelTag; 3] = [ModelTag::Base, ModelTag::Foveated, ModelTag::Uhr];

    pub fn as_str(&self) -> &'static str {
        match self {
            ModelTag::Base => "base",
            ModelTag::Foveated => "foveated",
            ModelTag::Uhr => "uhr",
        }
    }
}

impl fmt::Display for ModelTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelTag {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "base" => Ok(ModelTag::Base),
            "foveated" => Ok(ModelTag::Foveated),
            "uhr" => Ok(ModelTag::Uhr),
            other => Err(format!("unknown model '{other}', expected base, foveated or uhr")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialSummary {
    pub model_tag: ModelTag,
    pub trial_seed: u64,
    /// Time average of the view entropy, in bits.
    pub mean_view_entropy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelStats {
    pub model_tag: ModelTag,
    pub mean: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityBin {
    pub model_tag: ModelTag,
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ComparisonReport {
    pub trials: Vec<TrialSummary>,
    pub stats: Vec<ModelStats>,
    pub density: Vec<DensityBin>,
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub const DENSITY_BINS: usize = 20;

impl ComparisonReport {
    fn from_trials(trials: Vec<TrialSummary>, order: &[ModelTag]) -> Self {
        if trials.is_empty() {
            return Self::default();
        }
        let values = |tag: ModelTag| -> Vec<f64> {
            let mut v: Vec<f64> = trials
                .iter()
                .filter(|t| t.model_tag == tag)
                .map(|t| t.mean_view_entropy)
                .collect();
            v.sort_by(f64::total_cmp);
            v
        };
        let stats = order
            .iter()
            .map(|&tag| {
                let v = values(tag);
                ModelStats {
                    model_tag: tag,
                    mean: v.iter().sum::<f64>() / v.len() as f64,
                    median: quantile(&v, 0.5),
                    q1: quantile(&v, 0.25),
                    q3: quantile(&v, 0.75),
                    n: v.len(),
                }
            })
            .collect();

        let lo = trials.iter().map(|t| t.mean_view_entropy).fold(f64::INFINITY, f64::min);
        let hi = trials.iter().map(|t| t.mean_view_entropy).fold(f64::NEG_INFINITY, f64::max);
        let n_bins = if hi > lo { DENSITY_BINS } else { 1 };
        let width = (hi - lo) / n_bins as f64;
        let mut density = Vec::with_capacity(order.len() * n_bins);
        for &tag in order {
            let mut counts = vec![0usize; n_bins];
            for v in values(tag) {
                let b = if hi > lo { (((v - lo) / (hi - lo)) * n_bins as f64) as usize } else { 0 };
                counts[b.min(n_bins - 1)] += 1;
            }
            for (b, count) in counts.into_iter().enumerate() {
                let bin_lo = lo + width * b as f64;
                let bin_hi = if b + 1 == n_bins { hi } else { lo + width * (b + 1) as f64 };
                density.push(DensityBin { model_tag: tag, lo: bin_lo, hi: bin_hi, count });
            }
        }
        Self { trials, stats, density }
    }

    pub fn stats_for(&self, tag: ModelTag) -> Option<&ModelStats> {
        self.stats.iter().find(|s| s.model_tag == tag)
    }

    /// `model,seed,mean_view_entropy`
    pub fn trials_csv(&self) -> String {
        let mut s = String::from("model,seed,mean_view_entropy\n");
        for t in &self.trials {
            let _ = writeln!(s, "{},{},{}", t.model_tag, t.trial_seed, t.mean_view_entropy);
        }
        s
    }

    /// `model,bin_lo,bin_hi,count`
    pub fn density_csv(&self) -> String {
        let mut s = String::from("model,bin_lo,bin_hi,count\n");
        for d in &self.density {
            let _ = writeln!(s, "{},{},{},{}", d.model_tag, d.lo, d.hi, d.count);
        }
        s
    }

    /// `model,mean,median,q1,q3,n`
    pub fn summary_csv(&self) -> String {
        let mut s = String::from("model,mean,median,q1,q3,n\n");
        for m in &self.stats {
            let _ = writeln!(s, "{},{},{},{},{},{}", m.model_tag, m.mean, m.median, m.q1, m.q3, m.n);
        }
        s
    }
}

/// Runs one frozen saccade trial per seed for every model and averages the
/// view entropy over each trial's frames.
pub fn run_comparison(
    models: &[(ModelTag, &ModelState)],
    frames: &FrameSequence,
    seeds: &[u64],
    saccade: &SaccadeConfig,
    entropy: &EntropyConfig,
) -> Result<ComparisonReport> {
    for (tag, m) in models {
        if m.view_size() != (saccade.view_w, saccade.view_h) {
            return config_err(format!(
                "{tag} model view {:?} differs from the configured {}x{} view",
                m.view_size(),
                saccade.view_w,
                saccade.view_h
            ));
        }
    }
    if seeds.is_empty() || frames.is_empty() {
        return Ok(ComparisonReport::default());
    }
    let maps = entropy_maps(&frames.frames, entropy);
    let mut trials = Vec::with_capacity(models.len() * seeds.len());
    for &(tag, model) in models {
        let results = par::map_range(seeds.len(), |i| -> Result<TrialSummary> {
            let mut m = model.clone();
            m.mode = Mode::Frozen;
            let cfg = SaccadeConfig { seed: seeds[i], ..saccade.clone() };
            let record = run_saccade_loop(&mut m, &frames.frames, &cfg)?;
            let total: f64 = record
                .rows
                .iter()
                .map(|r| view_entropy(&maps[r.frame], r.x as usize, r.y as usize, cfg.view_w, cfg.view_h))
                .sum();
            Ok(TrialSummary {
                model_tag: tag,
                trial_seed: seeds[i],
                mean_view_entropy: total / record.len() as f64,
            })
        });
        for r in results {
            trials.push(r?);
        }
    }
    let order: Vec<ModelTag> = models.iter().map(|(t, _)| *t).collect();
    Ok(ComparisonReport::from_trials(trials, &order))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disk_shape() {
        assert_eq!(disk_half_widths(1), vec![0, 1, 0]);
        assert_eq!(disk_half_widths(2), vec![0, 1, 2, 1, 0]);
        let area: usize = disk_half_widths(5).iter().map(|h| 2 * h + 1).sum();
        assert_eq!(area, 81);
    }

    #[test]
    fn uniform_frame_has_zero_entropy() {
        let f = Frame::filled(20, 12, 0.37);
        let m = local_entropy_map(&f, &EntropyConfig::default());
        assert!(m.data.iter().all(|&e| e == 0.0));
        assert_eq!(view_entropy(&m, 3, 2, 10, 10), 0.0);
    }

    #[test]
    fn two_values_give_one_bit() {
        // Radius 1 disk at the centre of a 3x3 frame holds 5 pixels; use a
        // 1x2 frame instead: each pixel sees both, one of each value.
        let mut f = Frame::filled(2, 1, 0.0);
        f.set(1, 0, 0, 1.0);
        let m = local_entropy_map(&f, &EntropyConfig { disk_radius: 1 });
        assert_eq!(m.data, vec![1.0, 1.0]);
    }

    #[test]
    fn whole_frame_view_is_map_mean() {
        let mut f = Frame::filled(6, 5, 0.0);
        for (i, v) in f.data.iter_mut().enumerate() {
            *v = ((i * 37) % 11) as f64 / 10.0;
        }
        let m = local_entropy_map(&f, &EntropyConfig { disk_radius: 2 });
        assert!((view_entropy(&m, 0, 0, 6, 5) - m.mean()).abs() < 1e-12);
    }

    #[test]
    fn quantiles() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&v, 0.5), 2.5);
        assert_eq!(quantile(&v, 0.25), 1.75);
        assert_eq!(quantile(&v, 0.75), 3.25);
        assert_eq!(quantile(&[7.0], 0.25), 7.0);
    }

    #[test]
    fn density_conserves_counts() {
        let trials: Vec<TrialSummary> = (0..30)
            .map(|i| TrialSummary {
                model_tag: ModelTag::ALL[i % 3],
                trial_seed: i as u64,
                mean_view_entropy: (i * 7 % 13) as f64,
            })
            .collect();
        let r = ComparisonReport::from_trials(trials, &ModelTag::ALL);
        for tag in ModelTag::ALL {
            let total: usize = r.density.iter().filter(|d| d.model_tag == tag).map(|d| d.count).sum();
            assert_eq!(total, 10);
        }
        assert_eq!(r.summary_csv().lines().count(), 4);
    }

    #[test]
    fn tag_parsing() {
        for t in ModelTag::ALL {
            assert_eq!(t.as_str().parse::<ModelTag>().unwrap(), t);
        }
        assert!("fovea".parse::<ModelTag>().is_err());
    }
}
