//! Sensing and the priority stage: noisy 256×256 observations of the world,
//! smoothed and normalised priority maps, and connected priority zones.
//!
//! The stage stands in for a learned feature extractor with a fixed
//! pipeline: channel mixing, Gaussian smoothing, min-max scaling, threshold
//! and 8-connected component labelling.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::Rng;
use rand_distr::{Binomial, Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dynamics::WorldState;
use crate::error::{Error, Result};
use crate::grid::{Cell, NEIGHBORS8};

/// Observation raster side in pixels.
pub const OBS_SIDE: usize = 256;
const OBS_PIXELS: usize = OBS_SIDE * OBS_SIDE;

/// Side of the square grid of regional sensor readings.
pub const SENSOR_REGIONS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SensorParams {
    pub hazard_noise_sigma: f64,
    pub survivor_recall: f64,
    /// Per-pixel probability of a phantom survivor detection.
    pub false_positive_rate: f64,
}

impl Default for SensorParams {
    fn default() -> Self {
        SensorParams {
            hazard_noise_sigma: 0.05,
            survivor_recall: 0.9,
            false_positive_rate: 2e-5,
        }
    }
}

impl SensorParams {
    /// Noise-free sensing with every group detected.
    pub fn perfect() -> Self {
        SensorParams {
            hazard_noise_sigma: 0.0,
            survivor_recall: 1.0,
            false_positive_rate: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.hazard_noise_sigma.is_finite() && self.hazard_noise_sigma >= 0.0) {
            return Err(Error::config("sensor.hazard_noise_sigma", "must be non-negative"));
        }
        if !(0.0..=1.0).contains(&self.survivor_recall) {
            return Err(Error::config("sensor.survivor_recall", "must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.false_positive_rate) {
            return Err(Error::config("sensor.false_positive_rate", "must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// A reported survivor sighting, located on the world grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub cell: Cell,
    pub count: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub tick: u32,
    /// Row-major `OBS_SIDE²` channels.
    pub hazard: Vec<f64>,
    pub survivors: Vec<f64>,
    pub infrastructure: Vec<f64>,
    pub detections: Vec<Detection>,
    /// Mean hazard level per sensor region, row-major.
    pub sensor_readings: Vec<f64>,
}

impl Observation {
    pub fn zeros(tick: u32) -> Self {
        Observation {
            tick,
            hazard: vec![0.0; OBS_PIXELS],
            survivors: vec![0.0; OBS_PIXELS],
            infrastructure: vec![0.0; OBS_PIXELS],
            detections: Vec::new(),
            sensor_readings: vec![0.0; SENSOR_REGIONS * SENSOR_REGIONS],
        }
    }
}

/// Pixel containing the centre of a world cell.
#[inline]
pub fn pixel_of_cell(cell: Cell, world_side: usize) -> usize {
    let scale = OBS_SIDE as f64 / world_side as f64;
    let px = (((cell.x as f64 + 0.5) * scale) as usize).min(OBS_SIDE - 1);
    let py = (((cell.y as f64 + 0.5) * scale) as usize).min(OBS_SIDE - 1);
    py * OBS_SIDE + px
}

/// World cell under the centre of a pixel.
#[inline]
pub fn cell_of_pixel(pixel: usize, world_side: usize) -> Cell {
    let scale = world_side as f64 / OBS_SIDE as f64;
    let px = pixel % OBS_SIDE;
    let py = pixel / OBS_SIDE;
    let x = (((px as f64 + 0.5) * scale) as usize).min(world_side - 1);
    let y = (((py as f64 + 0.5) * scale) as usize).min(world_side - 1);
    Cell::new(x as u32, y as u32)
}

/// Per-axis source index pairs and blend weights for bilinear resampling.
fn bilinear_axis(world_side: usize) -> Vec<(usize, usize, f64)> {
    let scale = world_side as f64 / OBS_SIDE as f64;
    (0..OBS_SIDE)
        .map(|p| {
            let u = ((p as f64 + 0.5) * scale - 0.5).clamp(0.0, (world_side - 1) as f64);
            let i0 = u.floor() as usize;
            let i1 = (i0 + 1).min(world_side - 1);
            (i0, i1, u - i0 as f64)
        })
        .collect()
}

/// Bilinear resampling of a world-grid field onto the observation raster.
pub fn resample_bilinear(field: &[f64], world_side: usize) -> Vec<f64> {
    debug_assert_eq!(field.len(), world_side * world_side);
    let axis = bilinear_axis(world_side);
    let mut out = Vec::with_capacity(OBS_PIXELS);
    for &(y0, y1, fy) in &axis {
        for &(x0, x1, fx) in &axis {
            let a = field[y0 * world_side + x0];
            let b = field[y0 * world_side + x1];
            let c = field[y1 * world_side + x0];
            let d = field[y1 * world_side + x1];
            let top = a + (b - a) * fx;
            let bottom = c + (d - c) * fx;
            out.push(top + (bottom - top) * fy);
        }
    }
    out
}

/// Max-pooling of a boolean world mask over each pixel's footprint.
pub fn resample_max(mask: &[bool], world_side: usize) -> Vec<f64> {
    let scale = world_side as f64 / OBS_SIDE as f64;
    let span: Vec<(usize, usize)> = (0..OBS_SIDE)
        .map(|p| {
            let lo = (p as f64 * scale).floor() as usize;
            let hi = (((p + 1) as f64 * scale).ceil() as usize).clamp(lo + 1, world_side);
            (lo.min(world_side - 1), hi)
        })
        .collect();
    let mut out = Vec::with_capacity(OBS_PIXELS);
    for &(y0, y1) in &span {
        for &(x0, x1) in &span {
            let hit = (y0..y1).any(|y| (x0..x1).any(|x| mask[y * world_side + x]));
            out.push(if hit { 1.0 } else { 0.0 });
        }
    }
    out
}

/// Samples a noisy observation of the current world.
pub fn observe<R: Rng + ?Sized>(world: &WorldState, params: &SensorParams, rng: &mut R) -> Observation {
    let side = world.side();
    let intensity = world.hazard_intensity();
    let mut hazard = resample_bilinear(&intensity, side);
    if params.hazard_noise_sigma > 0.0 {
        let noise = Normal::new(0.0, params.hazard_noise_sigma).expect("finite sigma");
        for v in hazard.iter_mut() {
            *v += noise.sample(rng);
        }
    }

    let mut counts = vec![0.0; side * side];
    let mut detections = Vec::new();
    for g in world.survivors.iter().filter(|g| g.is_waiting()) {
        let seen = match params.survivor_recall {
            r if r >= 1.0 => true,
            r if r <= 0.0 => false,
            r => rng.random_bool(r),
        };
        if seen {
            counts[g.cell.index(side)] += g.size as f64;
            detections.push(Detection {
                cell: g.cell,
                count: g.size,
            });
        }
    }
    if params.false_positive_rate > 0.0 {
        let phantoms = Binomial::new(OBS_PIXELS as u64, params.false_positive_rate)
            .expect("rate in [0, 1]")
            .sample(rng);
        for _ in 0..phantoms {
            let pixel = rng.random_range(0..OBS_PIXELS);
            let cell = cell_of_pixel(pixel, side);
            let count = rng.random_range(1..=4);
            counts[cell.index(side)] += count as f64;
            detections.push(Detection { cell, count });
        }
    }
    let survivors = resample_bilinear(&counts, side);
    let infrastructure = resample_max(&world.terrain.road, side);

    let mut sensor_readings = vec![0.0; SENSOR_REGIONS * SENSOR_REGIONS];
    let mut members = vec![0usize; SENSOR_REGIONS * SENSOR_REGIONS];
    for (i, v) in intensity.iter().enumerate() {
        let c = Cell::from_index(i, side);
        let r = (c.y as usize * SENSOR_REGIONS / side) * SENSOR_REGIONS
            + c.x as usize * SENSOR_REGIONS / side;
        sensor_readings[r] += v;
        members[r] += 1;
    }
    for (s, m) in sensor_readings.iter_mut().zip(&members) {
        *s /= (*m).max(1) as f64;
    }

    Observation {
        tick: world.tick,
        hazard,
        survivors,
        infrastructure,
        detections,
        sensor_readings,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PriorityParams {
    /// Smoothing kernel width in pixels.
    pub kernel_width: usize,
    pub hazard_weight: f64,
    pub survivor_weight: f64,
    pub infrastructure_weight: f64,
    /// Detected survivors per pixel at which the survivor channel saturates.
    pub survivor_saturation: f64,
}

impl Default for PriorityParams {
    fn default() -> Self {
        PriorityParams {
            kernel_width: 5,
            hazard_weight: 0.5,
            survivor_weight: 0.4,
            infrastructure_weight: 0.1,
            survivor_saturation: 1.0,
        }
    }
}

impl PriorityParams {
    pub fn validate(&self) -> Result<()> {
        if self.kernel_width == 0 {
            return Err(Error::config("priority.kernel_width", "must be at least 1"));
        }
        for (f, w) in [
            ("priority.hazard_weight", self.hazard_weight),
            ("priority.survivor_weight", self.survivor_weight),
            ("priority.infrastructure_weight", self.infrastructure_weight),
        ] {
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::config(f, "must be non-negative"));
            }
        }
        if !(self.survivor_saturation.is_finite() && self.survivor_saturation > 0.0) {
            return Err(Error::config("priority.survivor_saturation", "must be positive"));
        }
        Ok(())
    }
}

/// Normalised 256×256 priority field.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorityMap {
    pub values: Vec<f64>,
}

impl PriorityMap {
    /// Min-max scales `values`; constant input maps to all zeros.
    pub fn from_raw(mut values: Vec<f64>) -> Self {
        let (lo, hi) = values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        let range = hi - lo;
        if range > 1e-12 && range.is_finite() {
            for v in values.iter_mut() {
                *v = ((*v - lo) / range).clamp(0.0, 1.0);
            }
        } else {
            values.iter_mut().for_each(|v| *v = 0.0);
        }
        PriorityMap { values }
    }

    pub fn renormalized(&self) -> Self {
        PriorityMap::from_raw(self.values.clone())
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Normalised 1-D Gaussian taps for a kernel of the given width.
pub fn gaussian_kernel(width: usize) -> Vec<f64> {
    let radius = (width / 2) as i64;
    if radius == 0 {
        return vec![1.0];
    }
    let sigma = width as f64 / 4.0;
    let taps: Vec<f64> = (-radius..=radius)
        .map(|k| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.into_iter().map(|t| t / sum).collect()
}

/// Separable convolution with edge clamping, so constants are preserved.
pub fn convolve(field: &[f64], side: usize, taps: &[f64]) -> Vec<f64> {
    let r = (taps.len() / 2) as i64;
    let last = side as i64 - 1;
    let mut tmp = vec![0.0; field.len()];
    for y in 0..side {
        let row = &field[y * side..(y + 1) * side];
        for x in 0..side {
            let mut acc = 0.0;
            for (k, t) in taps.iter().enumerate() {
                let xx = (x as i64 + k as i64 - r).clamp(0, last) as usize;
                acc += t * row[xx];
            }
            tmp[y * side + x] = acc;
        }
    }
    let mut out = vec![0.0; field.len()];
    for y in 0..side {
        for (k, t) in taps.iter().enumerate() {
            let yy = (y as i64 + k as i64 - r).clamp(0, last) as usize;
            let src = &tmp[yy * side..(yy + 1) * side];
            let dst = &mut out[y * side..(y + 1) * side];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += t * s;
            }
        }
    }
    out
}

/// Weighted channel mix before smoothing.
pub fn mix_channels(obs: &Observation, params: &PriorityParams) -> Vec<f64> {
    obs.hazard
        .iter()
        .zip(&obs.survivors)
        .zip(&obs.infrastructure)
        .map(|((&h, &s), &i)| {
            params.hazard_weight * h.clamp(0.0, 1.0)
                + params.survivor_weight * (s.max(0.0) / params.survivor_saturation).min(1.0)
                + params.infrastructure_weight * i.clamp(0.0, 1.0)
        })
        .collect()
}

pub fn extract_priority_map(obs: &Observation, params: &PriorityParams) -> PriorityMap {
    let mixed = mix_channels(obs, params);
    let smoothed = convolve(&mixed, OBS_SIDE, &gaussian_kernel(params.kernel_width));
    PriorityMap::from_raw(smoothed)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ZoneParams {
    pub threshold: f64,
    pub max_zones: usize,
}

impl Default for ZoneParams {
    fn default() -> Self {
        ZoneParams {
            threshold: 0.3,
            max_zones: 32,
        }
    }
}

impl ZoneParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::config("zones.threshold", "must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// A connected region of above-threshold priority.
#[derive(Debug, Clone, PartialEq)]
pub struct Zone {
    pub id: usize,
    /// Sorted pixel indices.
    pub member_pixels: Vec<u32>,
    pub centroid: Cell,
    /// Sum of member priorities.
    pub severity: f64,
    pub estimated_survivors: u32,
    /// Detections falling inside the zone.
    pub targets: Vec<Detection>,
}

/// 8-connected components above `threshold`, strongest `max_zones` kept,
/// ordered by descending severity.
pub fn segment_zones(map: &PriorityMap, threshold: f64, max_zones: usize, world_side: usize) -> Vec<Zone> {
    let n = map.values.len();
    debug_assert_eq!(n, OBS_PIXELS);
    let mut seen = vec![false; n];
    let mut queue = VecDeque::new();
    let mut zones = Vec::new();
    for start in 0..n {
        if seen[start] || map.values[start] <= threshold {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let mut members = Vec::new();
        let mut severity = 0.0;
        let (mut sx, mut sy) = (0.0, 0.0);
        while let Some(p) = queue.pop_front() {
            members.push(p as u32);
            severity += map.values[p];
            let here = Cell::from_index(p, OBS_SIDE);
            sx += here.x as f64;
            sy += here.y as f64;
            for &(dx, dy) in &NEIGHBORS8 {
                if let Some(nb) = here.offset(dx, dy, OBS_SIDE) {
                    let q = nb.index(OBS_SIDE);
                    if !seen[q] && map.values[q] > threshold {
                        seen[q] = true;
                        queue.push_back(q);
                    }
                }
            }
        }
        members.sort_unstable();
        let m = members.len() as f64;
        let cx = (sx / m).round() as usize;
        let cy = (sy / m).round() as usize;
        zones.push(Zone {
            id: 0,
            centroid: cell_of_pixel(cy * OBS_SIDE + cx, world_side),
            member_pixels: members,
            severity,
            estimated_survivors: 0,
            targets: Vec::new(),
        });
    }
    zones.sort_by(|a, b| {
        b.severity
            .total_cmp(&a.severity)
            .then(a.member_pixels[0].cmp(&b.member_pixels[0]))
    });
    zones.truncate(max_zones);
    for (i, z) in zones.iter_mut().enumerate() {
        z.id = i;
    }
    zones
}

/// Assigns each detection to the zone containing its pixel.
pub fn attach_detections(zones: &mut [Zone], obs: &Observation, world_side: usize) {
    let mut label = vec![u32::MAX; OBS_PIXELS];
    for (zi, z) in zones.iter().enumerate() {
        for &p in &z.member_pixels {
            label[p as usize] = zi as u32;
        }
    }
    for z in zones.iter_mut() {
        z.targets.clear();
        z.estimated_survivors = 0;
    }
    for d in &obs.detections {
        let l = label[pixel_of_cell(d.cell, world_side)];
        if l != u32::MAX {
            let z = &mut zones[l as usize];
            z.targets.push(*d);
            z.estimated_survivors += d.count;
        }
    }
}

/// Writes a raster as comma-separated rows, one per line.
pub fn write_grid_csv(values: &[f64], side: usize, path: &Path) -> Result<()> {
    let mut out = String::with_capacity(values.len() * 9);
    for row in values.chunks(side) {
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            let _ = write!(out, "{v:.6}");
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// Binary 8-bit portable graymap of a [0, 1] raster.
pub fn write_pgm(values: &[f64], side: usize, path: &Path) -> Result<()> {
    let mut bytes = format!("P5\n{side} {side}\n255\n").into_bytes();
    bytes.extend(
        values
            .iter()
            .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8),
    );
    fs::write(path, bytes).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}
