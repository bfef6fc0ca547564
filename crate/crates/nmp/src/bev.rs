//! Bird's-eye-view rasterization: binary occupancy over T' past sweeps
//! stacked along the channel axis, plus M = 4 map channels (drivable road,
//! lane centerlines, solid boundaries, active stop lines).
//!
//! Grid convention: the SDV sits at the frame origin with forward = +rows
//! and left = +columns. A world point quantizes to
//! row = floor((x + length_back) / cell), col = floor((y + width_half) / cell).
//! Continuous grid coordinates place integer indices at cell centers.

use crate::geom2d::point_segment_distance;
use crate::geometry::Pose2;
use crate::scalar::Real;
use crate::scenario::{Scenario, SweepPoint};
use serde::{Deserialize, Serialize};
use std::io::{Read as _, Write as _};
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum BevError {
    #[error("roi invalid: {0}")]
    BadRoi(&'static str),
    #[error("non-finite point coordinates at index {0}")]
    NonFinitePoint(usize),
    #[error("sweep index {got} out of range [0, {t_prime})")]
    SweepOutOfRange { got: usize, t_prime: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("bad tensor file: {0}")]
    BadFile(&'static str),
}

/// Region of interest and voxel geometry of the input raster.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct RoiSpec {
    pub length_fwd: f64,
    pub length_back: f64,
    pub width_half: f64,
    pub z_min: f64,
    pub z_max: f64,
    pub cell: f64,
    pub z_cell: f64,
    pub t_prime: usize,
}

impl Default for RoiSpec {
    fn default() -> Self {
        RoiSpec::desk()
    }
}

impl RoiSpec {
    /// Desk-scale grid: 144 x 80 cells at 0.4 m, 3 height slices, 10 sweeps.
    pub fn desk() -> Self {
        RoiSpec {
            length_fwd: 43.2,
            length_back: 14.4,
            width_half: 16.0,
            z_min: -1.0,
            z_max: 2.0,
            cell: 0.4,
            z_cell: 1.0,
            t_prime: 10,
        }
    }

    /// Full-scale preset: 704 x 400 cells at 0.2 m.
    pub fn full() -> Self {
        RoiSpec {
            length_fwd: 70.4,
            length_back: 70.4,
            width_half: 40.0,
            z_min: -1.0,
            z_max: 2.0,
            cell: 0.2,
            z_cell: 1.0,
            t_prime: 10,
        }
    }

    pub fn h(&self) -> usize {
        ((self.length_fwd + self.length_back) / self.cell).round() as usize
    }

    pub fn w(&self) -> usize {
        (2.0 * self.width_half / self.cell).round() as usize
    }

    pub fn z_slices(&self) -> usize {
        ((self.z_max - self.z_min) / self.z_cell).round() as usize
    }

    pub fn validate(&self) -> Result<(), BevError> {
        if !(self.length_fwd > 0.0
            && self.length_back > 0.0
            && self.width_half > 0.0
            && self.cell > 0.0
            && self.z_cell > 0.0
            && self.z_max > self.z_min
            && self.t_prime > 0)
        {
            return Err(BevError::BadRoi("extents and cells must be positive"));
        }
        let integral = |extent: f64, cell: f64, name: &'static str| {
            let n = extent / cell;
            if (n - n.round()).abs() > 1e-6 {
                Err(BevError::BadRoi(name))
            } else {
                Ok(())
            }
        };
        integral(
            self.length_fwd + self.length_back,
            self.cell,
            "H not integral",
        )?;
        integral(2.0 * self.width_half, self.cell, "W not integral")?;
        integral(self.z_max - self.z_min, self.z_cell, "Z not integral")?;
        Ok(())
    }

    /// Floor-quantized grid cell of an SDV-frame position, or None outside
    /// the ROI.
    pub fn grid_of_xy(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let u = (x + self.length_back) / self.cell;
        let v = (y + self.width_half) / self.cell;
        if u < 0.0 || v < 0.0 {
            return None;
        }
        let (row, col) = (u.floor() as usize, v.floor() as usize);
        if row < self.h() && col < self.w() {
            Some((row, col))
        } else {
            None
        }
    }

    /// Continuous grid coordinates with integer indices at cell centers
    /// (used by bilinear sampling). Not bounds-checked.
    pub fn grid_continuous(&self, x: f64, y: f64) -> (f64, f64) {
        (
            (x + self.length_back) / self.cell - 0.5,
            (y + self.width_half) / self.cell - 0.5,
        )
    }

    /// SDV-frame center of a grid cell.
    pub fn cell_center(&self, row: usize, col: usize) -> (f64, f64) {
        (
            (row as f64 + 0.5) * self.cell - self.length_back,
            (col as f64 + 0.5) * self.cell - self.width_half,
        )
    }

    pub fn z_slice_of(&self, z: f64) -> Option<usize> {
        let s = (z - self.z_min) / self.z_cell;
        if s < 0.0 {
            return None;
        }
        let s = s.floor() as usize;
        if s < self.z_slices() {
            Some(s)
        } else {
            None
        }
    }
}

/// Floor-quantized cell of a world pose, or None outside the ROI.
pub fn world_to_grid(p: &Pose2<f64>, roi: &RoiSpec) -> Option<(usize, usize)> {
    roi.grid_of_xy(p.x, p.y)
}

/// Channel-major raster: `data[c * h * w + row * w + col]`. The layout
/// matches NCHW with a unit batch, so the network ingests it without
/// copying.
#[derive(Debug, Clone, PartialEq)]
pub struct BevTensor<S> {
    pub h: usize,
    pub w: usize,
    pub c: usize,
    pub data: Vec<S>,
    pub channel_map: Vec<String>,
}

impl<S: Real> BevTensor<S> {
    pub fn zeros(h: usize, w: usize, channel_map: Vec<String>) -> Self {
        let c = channel_map.len();
        BevTensor {
            h,
            w,
            c,
            data: vec![S::zero(); c * h * w],
            channel_map,
        }
    }

    #[inline]
    pub fn at(&self, c: usize, row: usize, col: usize) -> S {
        self.data[(c * self.h + row) * self.w + col]
    }

    #[inline]
    pub fn set(&mut self, c: usize, row: usize, col: usize, v: S) {
        self.data[(c * self.h + row) * self.w + col] = v;
    }

    /// Concatenate along channels; shapes must agree.
    pub fn stack(mut self, other: BevTensor<S>) -> BevTensor<S> {
        assert_eq!((self.h, self.w), (other.h, other.w), "stack shape mismatch");
        self.data.extend_from_slice(&other.data);
        self.channel_map.extend(other.channel_map);
        self.c += other.c;
        self
    }
}

/// Binary occupancy raster of ego-compensated sweep points. A voxel is 1
/// iff at least one point lands in it; channel = sweep * Z + z_slice.
pub fn rasterize_sweeps<S: Real>(
    points: &[SweepPoint],
    roi: &RoiSpec,
) -> Result<BevTensor<S>, BevError> {
    roi.validate()?;
    let z = roi.z_slices();
    let names = (0..roi.t_prime)
        .flat_map(|s| (0..z).map(move |k| format!("sweep{s}_z{k}")))
        .collect();
    let mut out = BevTensor::zeros(roi.h(), roi.w(), names);
    for (i, p) in points.iter().enumerate() {
        if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
            return Err(BevError::NonFinitePoint(i));
        }
        if p.sweep >= roi.t_prime {
            return Err(BevError::SweepOutOfRange {
                got: p.sweep,
                t_prime: roi.t_prime,
            });
        }
        let (Some((row, col)), Some(slice)) = (roi.grid_of_xy(p.x, p.y), roi.z_slice_of(p.z))
        else {
            continue;
        };
        out.set(p.sweep * z + slice, row, col, S::one());
    }
    Ok(out)
}

pub const MAP_CHANNELS: usize = 4;
pub const MAP_ROAD: usize = 0;
pub const MAP_CENTERLINE: usize = 1;
pub const MAP_SOLID_BOUNDARY: usize = 2;
pub const MAP_STOP_LINE: usize = 3;

/// Rasterize map geometry into the 4 desk-scale channels, in the present
/// SDV frame. Road is a filled corridor (distance to centerline <= width/2);
/// centerlines, solid boundaries, and presently active stop lines are
/// 1-cell strokes. Dashed boundaries are crossable and not rasterized.
pub fn rasterize_map<S: Real>(scenario: &Scenario, roi: &RoiSpec) -> Result<BevTensor<S>, BevError> {
    roi.validate()?;
    let names = ["map_road", "map_centerline", "map_solid_boundary", "map_stop_line"]
        .map(String::from)
        .to_vec();
    let mut out = BevTensor::zeros(roi.h(), roi.w(), names);
    let origin = scenario.sdv.pose;
    let to_sdv = |p: [f64; 2]| origin.parent_to_local(p[0], p[1]);

    for lane in &scenario.lanes {
        let line: Vec<(f64, f64)> = lane.centerline.iter().map(|&p| to_sdv(p)).collect();
        fill_corridor(&mut out, roi, &line, lane.width / 2.0);
        stroke_polyline(&mut out, MAP_CENTERLINE, roi, &line);
    }
    for boundary in &scenario.boundaries {
        if boundary.style == crate::scenario::BoundaryStyle::Solid {
            let line: Vec<(f64, f64)> = boundary.polyline.iter().map(|&p| to_sdv(p)).collect();
            stroke_polyline(&mut out, MAP_SOLID_BOUNDARY, roi, &line);
        }
    }
    for stop in &scenario.stop_lines {
        if stop.active_at_step(0) {
            let line = [to_sdv(stop.segment[0]), to_sdv(stop.segment[1])];
            stroke_polyline(&mut out, MAP_STOP_LINE, roi, &line);
        }
    }
    Ok(out)
}

fn fill_corridor<S: Real>(
    out: &mut BevTensor<S>,
    roi: &RoiSpec,
    line: &[(f64, f64)],
    half_width: f64,
) {
    if line.len() < 2 {
        return;
    }
    // Bounding box in grid cells, padded by the half width.
    let pad = half_width + roi.cell;
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, y) in line {
        x0 = x0.min(x - pad);
        x1 = x1.max(x + pad);
        y0 = y0.min(y - pad);
        y1 = y1.max(y + pad);
    }
    let r0 = (((x0 + roi.length_back) / roi.cell).floor().max(0.0)) as usize;
    let c0 = (((y0 + roi.width_half) / roi.cell).floor().max(0.0)) as usize;
    let r1 = ((((x1 + roi.length_back) / roi.cell).ceil()) as isize).clamp(0, roi.h() as isize)
        as usize;
    let c1 = ((((y1 + roi.width_half) / roi.cell).ceil()) as isize).clamp(0, roi.w() as isize)
        as usize;
    for row in r0..r1 {
        for col in c0..c1 {
            let (cx, cy) = roi.cell_center(row, col);
            let near = line
                .windows(2)
                .any(|s| point_segment_distance((cx, cy), s[0], s[1]) <= half_width);
            if near {
                out.set(MAP_ROAD, row, col, S::one());
            }
        }
    }
}

/// Mark every cell a polyline passes through (Amanatides-Woo traversal).
fn stroke_polyline<S: Real>(
    out: &mut BevTensor<S>,
    channel: usize,
    roi: &RoiSpec,
    line: &[(f64, f64)],
) {
    for seg in line.windows(2) {
        stroke_segment(out, channel, roi, seg[0], seg[1]);
    }
    if line.len() == 1 {
        if let Some((row, col)) = roi.grid_of_xy(line[0].0, line[0].1) {
            out.set(channel, row, col, S::one());
        }
    }
}

fn stroke_segment<S: Real>(
    out: &mut BevTensor<S>,
    channel: usize,
    roi: &RoiSpec,
    a: (f64, f64),
    b: (f64, f64),
) {
    // Work in grid units where cell (i, j) spans [i, i+1) x [j, j+1).
    let u0 = (a.0 + roi.length_back) / roi.cell;
    let v0 = (a.1 + roi.width_half) / roi.cell;
    let u1 = (b.0 + roi.length_back) / roi.cell;
    let v1 = (b.1 + roi.width_half) / roi.cell;
    let du = u1 - u0;
    let dv = v1 - v0;
    let (h, w) = (roi.h() as isize, roi.w() as isize);

    let mut row = u0.floor() as isize;
    let mut col = v0.floor() as isize;
    let row_end = u1.floor() as isize;
    let col_end = v1.floor() as isize;
    let step_r: isize = if du > 0.0 { 1 } else { -1 };
    let step_c: isize = if dv > 0.0 { 1 } else { -1 };
    // Parameter t in [0, 1] at which the ray crosses the next cell edge.
    let mut t_max_r = if du != 0.0 {
        let next = if du > 0.0 { row as f64 + 1.0 } else { row as f64 };
        (next - u0) / du
    } else {
        f64::INFINITY
    };
    let mut t_max_c = if dv != 0.0 {
        let next = if dv > 0.0 { col as f64 + 1.0 } else { col as f64 };
        (next - v0) / dv
    } else {
        f64::INFINITY
    };
    let t_delta_r = if du != 0.0 { (1.0 / du).abs() } else { f64::INFINITY };
    let t_delta_c = if dv != 0.0 { (1.0 / dv).abs() } else { f64::INFINITY };

    let mut guard = (h + w + 4) as usize * 2;
    loop {
        if (0..h).contains(&row) && (0..w).contains(&col) {
            out.set(channel, row as usize, col as usize, S::one());
        }
        if (row == row_end && col == col_end) || guard == 0 {
            break;
        }
        guard -= 1;
        if t_max_r <= t_max_c {
            t_max_r += t_delta_r;
            row += step_r;
        } else {
            t_max_c += t_delta_c;
            col += step_c;
        }
        // Both endpoints may sit outside the grid; stop once past the end.
        if t_max_r.min(t_max_c) > 1.0 + 1e-12 && (row == row_end && col == col_end) {
            if (0..h).contains(&row) && (0..w).contains(&col) {
                out.set(channel, row as usize, col as usize, S::one());
            }
            break;
        }
    }
}

/// Rasterize the full network input for a scenario: T' sweep occupancy
/// blocks followed by the 4 map channels.
pub fn rasterize_input<S: Real>(
    scenario: &Scenario,
    roi: &RoiSpec,
    cloud: &crate::scenario::PointCloudConfig,
) -> Result<BevTensor<S>, BevError> {
    let mut points = Vec::new();
    for sweep in 0..roi.t_prime {
        points.extend(crate::scenario::synthesize_points(
            scenario, sweep, roi.t_prime, cloud,
        ));
    }
    let sweeps = rasterize_sweeps(&points, roi)?;
    let map = rasterize_map(scenario, roi)?;
    Ok(sweeps.stack(map))
}

const BEVT_MAGIC: &[u8; 4] = b"BEVT";

/// Dump as little-endian f32 with a 16-byte header (magic, H, W, C).
pub fn dump_bevt<S: Real>(tensor: &BevTensor<S>, path: &Path) -> Result<(), BevError> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(BEVT_MAGIC)?;
    for dim in [tensor.h, tensor.w, tensor.c] {
        f.write_all(&(dim as u32).to_le_bytes())?;
    }
    for &v in &tensor.data {
        f.write_all(&(v.as_f64() as f32).to_le_bytes())?;
    }
    f.flush()?;
    Ok(())
}

pub fn load_bevt(path: &Path) -> Result<BevTensor<f32>, BevError> {
    let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut header = [0u8; 16];
    f.read_exact(&mut header)
        .map_err(|_| BevError::BadFile("short header"))?;
    if &header[0..4] != BEVT_MAGIC {
        return Err(BevError::BadFile("bad magic"));
    }
    let dim = |i: usize| u32::from_le_bytes(header[i..i + 4].try_into().unwrap()) as usize;
    let (h, w, c) = (dim(4), dim(8), dim(12));
    let mut raw = Vec::new();
    f.read_to_end(&mut raw)?;
    if raw.len() != c * h * w * 4 {
        return Err(BevError::BadFile("payload size mismatch"));
    }
    let data = raw
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    Ok(BevTensor {
        h,
        w,
        c,
        data,
        channel_map: (0..c).map(|i| format!("c{i}")).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{Boundary, BoundaryStyle, Lane, SweepPoint};
    use std::collections::HashSet;

    fn p(x: f64, y: f64, z: f64, sweep: usize) -> SweepPoint {
        SweepPoint { x, y, z, sweep }
    }

    #[test]
    fn desk_grid_dimensions() {
        let roi = RoiSpec::desk();
        roi.validate().unwrap();
        assert_eq!((roi.h(), roi.w(), roi.z_slices()), (144, 80, 3));
        assert_eq!(RoiSpec::full().h(), 704);
        assert_eq!(RoiSpec::full().w(), 400);
    }

    #[test]
    fn world_to_grid_quantization() {
        // 144 x 80 grid at 0.2 m with 14.08 m behind and 8 m to each side.
        let roi = RoiSpec {
            length_fwd: 14.72,
            length_back: 14.08,
            width_half: 8.0,
            cell: 0.2,
            ..RoiSpec::desk()
        };
        roi.validate().unwrap();
        assert_eq!((roi.h(), roi.w()), (144, 80));
        assert_eq!(world_to_grid(&Pose2::origin(), &roi), Some((70, 40)));
        // 1 mm inside the far corner -> last valid index.
        assert_eq!(roi.grid_of_xy(14.72 - 1e-3, 8.0 - 1e-3), Some((143, 79)));
        assert_eq!(roi.grid_of_xy(14.72, 0.0), None);
        assert_eq!(roi.grid_of_xy(0.0, 8.0), None);
        assert_eq!(roi.grid_of_xy(-14.081, 0.0), None);
    }

    #[test]
    fn empty_point_list_rasterizes_to_zero() {
        let roi = RoiSpec::desk();
        let t = rasterize_sweeps::<f32>(&[], &roi).unwrap();
        assert_eq!(t.c, 30);
        assert!(t.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_point_lands_at_derived_index() {
        let roi = RoiSpec::desk();
        let t = rasterize_sweeps::<f64>(&[p(10.1, -3.0, 0.5, 7)], &roi).unwrap();
        // x=10.1 -> row floor(24.5/0.4)=61; y=-3 -> col floor(13/0.4)=32;
        // z=0.5 -> slice 1; channel = 7*3+1 = 22.
        let nonzero: Vec<usize> = t
            .data
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(|(i, _)| i)
            .collect();
        assert_eq!(nonzero, vec![(22 * 144 + 61) * 80 + 32]);
    }

    #[test]
    fn occupancy_is_idempotent_and_order_invariant() {
        let roi = RoiSpec::desk();
        let a = [p(5.0, 1.0, 0.2, 0), p(5.05, 1.1, 0.3, 0), p(-2.0, 4.0, 1.5, 3)];
        let b = [a[2], a[0], a[1], a[0]];
        let ta = rasterize_sweeps::<f32>(&a, &roi).unwrap();
        let tb = rasterize_sweeps::<f32>(&b, &roi).unwrap();
        assert_eq!(ta, tb);
        assert_eq!(ta.data.iter().filter(|&&v| v != 0.0).count(), 2);
    }

    #[test]
    fn nonzero_voxels_map_back_to_points() {
        let roi = RoiSpec::desk();
        let mut rng_points = Vec::new();
        for i in 0..200 {
            let f = i as f64;
            rng_points.push(p(
                -20.0 + 0.4 * f,
                -18.0 + 0.21 * f,
                -1.5 + 0.02 * f,
                (i % 10) as usize,
            ));
        }
        let t = rasterize_sweeps::<f64>(&rng_points, &roi).unwrap();
        let quantized: HashSet<(usize, usize, usize)> = rng_points
            .iter()
            .filter_map(|q| {
                let cell = roi.grid_of_xy(q.x, q.y)?;
                let slice = roi.z_slice_of(q.z)?;
                Some((q.sweep * 3 + slice, cell.0, cell.1))
            })
            .collect();
        let mut nonzero = HashSet::new();
        for c in 0..t.c {
            for r in 0..t.h {
                for col in 0..t.w {
                    if t.at(c, r, col) != 0.0 {
                        nonzero.insert((c, r, col));
                    }
                }
            }
        }
        assert_eq!(nonzero, quantized);
        assert!(!nonzero.is_empty());
    }

    #[test]
    fn non_finite_points_are_rejected() {
        let roi = RoiSpec::desk();
        let bad = [p(f64::NAN, 0.0, 0.0, 0)];
        assert!(matches!(
            rasterize_sweeps::<f32>(&bad, &roi),
            Err(BevError::NonFinitePoint(0))
        ));
        let oos = [p(0.0, 0.0, 0.0, 10)];
        assert!(matches!(
            rasterize_sweeps::<f32>(&oos, &roi),
            Err(BevError::SweepOutOfRange { .. })
        ));
    }

    fn map_scenario() -> Scenario {
        crate::scenario::tests::tiny_scenario()
    }

    #[test]
    fn empty_map_rasterizes_to_zero() {
        let mut s = map_scenario();
        s.lanes.clear();
        s.boundaries.clear();
        s.stop_lines.clear();
        let t = rasterize_map::<f32>(&s, &RoiSpec::desk()).unwrap();
        assert!(t.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn road_mask_area_matches_lane_area() {
        let roi = RoiSpec::desk();
        let mut s = map_scenario();
        s.boundaries.clear();
        s.stop_lines.clear();
        s.lanes = vec![Lane {
            centerline: vec![[-14.4, 0.0], [43.2, 0.0]],
            width: 3.6,
        }];
        let t = rasterize_map::<f64>(&s, &roi).unwrap();
        let road_cells = (0..t.h)
            .flat_map(|r| (0..t.w).map(move |c| (r, c)))
            .filter(|&(r, c)| t.at(MAP_ROAD, r, c) != 0.0)
            .count();
        // Corridor spans the whole grid length: 57.6 m x 3.6 m of road at
        // 0.16 m^2 per cell = 1296 cells, within a perimeter of slack.
        let expect = (57.6 * 3.6 / (0.4 * 0.4)) as isize;
        let perimeter = (2.0 * (57.6 + 3.6) / 0.4) as isize;
        assert!(
            ((road_cells as isize) - expect).abs() <= perimeter,
            "road cells {road_cells} vs expected {expect}"
        );
    }

    #[test]
    fn boundary_stroke_traces_the_segment() {
        let roi = RoiSpec::desk();
        let mut s = map_scenario();
        s.lanes.clear();
        s.stop_lines.clear();
        // Slope chosen off the lattice so no cell corner is hit exactly.
        let (a, b) = ((1.3, -9.7), (19.1, 7.3));
        s.boundaries = vec![Boundary {
            polyline: vec![[a.0, a.1], [b.0, b.1]],
            style: BoundaryStyle::Solid,
        }];
        let t = rasterize_map::<f64>(&s, &roi).unwrap();
        // Oracle: a cell is marked iff the segment passes within it. Check
        // by sampling the segment densely and quantizing.
        let mut expect = HashSet::new();
        for k in 0..=200_000 {
            let u = k as f64 / 200_000.0;
            if let Some(cell) = roi.grid_of_xy(a.0 + (b.0 - a.0) * u, a.1 + (b.1 - a.1) * u) {
                expect.insert(cell);
            }
        }
        let mut got = HashSet::new();
        for r in 0..t.h {
            for c in 0..t.w {
                if t.at(MAP_SOLID_BOUNDARY, r, c) != 0.0 {
                    got.insert((r, c));
                }
            }
        }
        assert_eq!(got, expect);
        // Dashed boundaries stay out of the solid channel.
        s.boundaries[0].style = BoundaryStyle::Dashed;
        let t2 = rasterize_map::<f64>(&s, &roi).unwrap();
        assert!(t2.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn inactive_stop_lines_are_invisible() {
        let roi = RoiSpec::desk();
        let mut s = map_scenario();
        s.lanes.clear();
        s.boundaries.clear();
        let t = rasterize_map::<f64>(&s, &roi).unwrap();
        let active_cells = t.data.iter().filter(|&&v| v != 0.0).count();
        assert!(active_cells > 0);
        for line in &mut s.stop_lines {
            line.active = vec![false; 6];
        }
        let t2 = rasterize_map::<f64>(&s, &roi).unwrap();
        assert!(t2.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn input_raster_stacks_sweeps_then_map() {
        let roi = RoiSpec::desk();
        let s = map_scenario();
        let cloud = crate::scenario::PointCloudConfig::default();
        let t = rasterize_input::<f32>(&s, &roi, &cloud).unwrap();
        assert_eq!(t.c, 10 * 3 + 4);
        assert_eq!(t.channel_map[0], "sweep0_z0");
        assert_eq!(t.channel_map[30], "map_road");
        assert_eq!(t.channel_map[33], "map_stop_line");
        // All channels respect the binary-occupancy / [0,1] invariants.
        assert!(t.data.iter().all(|&v| v == 0.0 || v == 1.0));
    }

    #[test]
    fn bevt_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.bevt");
        let roi = RoiSpec::desk();
        let t = rasterize_sweeps::<f32>(&[p(3.0, 2.0, 0.0, 1), p(-1.0, -2.0, 1.2, 4)], &roi)
            .unwrap();
        dump_bevt(&t, &path).unwrap();
        let back = load_bevt(&path).unwrap();
        assert_eq!((back.h, back.w, back.c), (t.h, t.w, t.c));
        assert_eq!(back.data, t.data);
        // Corrupt magic.
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[0] = b'X';
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(load_bevt(&path), Err(BevError::BadFile(_))));
    }
}
