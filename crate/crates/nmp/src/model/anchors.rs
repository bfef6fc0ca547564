//! Anchor field, ground-truth association, and box encoding.
//!
//! 12 anchors per feature-map location: 2 sizes x aspect flip x 3
//! orientations (0, +45, -45 degrees). `w` is the extent along the anchor
//! heading, `h` across it.

use crate::bev::RoiSpec;
use crate::geom2d::OrientedBox;
use crate::geometry::normalize_angle;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct AnchorConfig {
    /// (length, width) pairs in meters.
    pub sizes: Vec<(f64, f64)>,
    /// Anchor headings in radians.
    pub orientations: Vec<f64>,
    /// Also emit each size with length/width swapped.
    pub aspect_flip: bool,
    /// Association IoU threshold.
    pub iou_threshold: f64,
}

impl Default for AnchorConfig {
    fn default() -> Self {
        AnchorConfig {
            sizes: vec![(4.8, 2.0), (9.0, 2.6)],
            orientations: vec![0.0, std::f64::consts::FRAC_PI_4, -std::f64::consts::FRAC_PI_4],
            aspect_flip: true,
            iou_threshold: 0.4,
        }
    }
}

impl AnchorConfig {
    /// Anchors per location: sizes x (1 + flip) x orientations.
    pub fn per_location(&self) -> usize {
        self.sizes.len() * if self.aspect_flip { 2 } else { 1 } * self.orientations.len()
    }

    /// The (w, h, theta) templates in a fixed order: size-major, then
    /// flip, then orientation.
    pub fn templates(&self) -> Vec<(f64, f64, f64)> {
        let mut out = Vec::with_capacity(self.per_location());
        for &(l, w) in &self.sizes {
            for &(aw, ah) in &[(l, w), (w, l)][..if self.aspect_flip { 2 } else { 1 }] {
                for &theta in &self.orientations {
                    out.push((aw, ah, theta));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Anchor {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
    pub theta: f64,
}

impl Anchor {
    pub fn as_box(&self) -> OrientedBox {
        OrientedBox::new(self.cx, self.cy, self.w, self.h, self.theta)
    }
}

/// Anchors for every feature-map cell, in SDV-frame coordinates. Flat
/// order matches a (1, A, Hf, Wf) tensor: index = (k * Hf + r) * Wf + c.
pub fn anchor_field(roi: &RoiSpec, config: &AnchorConfig, downsample: usize) -> Vec<Anchor> {
    let templates = config.templates();
    let hf = roi.h() / downsample;
    let wf = roi.w() / downsample;
    let stride = roi.cell * downsample as f64;
    let mut out = Vec::with_capacity(templates.len() * hf * wf);
    for (w, h, theta) in templates {
        for r in 0..hf {
            for c in 0..wf {
                let cx = (r as f64 + 0.5) * stride - roi.length_back;
                let cy = (c as f64 + 0.5) * stride - roi.width_half;
                out.push(Anchor { cx, cy, w, h, theta });
            }
        }
    }
    out
}

/// Per-anchor assignment: the index of the associated ground-truth box.
pub fn associate(anchors: &[Anchor], gts: &[OrientedBox], iou_threshold: f64) -> Vec<Option<usize>> {
    let mut assignment: Vec<Option<usize>> = vec![None; anchors.len()];
    if gts.is_empty() {
        return assignment;
    }
    let mut claimed = vec![false; gts.len()];
    for (ai, anchor) in anchors.iter().enumerate() {
        let abox = anchor.as_box();
        let mut best = None;
        let mut best_iou = iou_threshold;
        for (gi, gt) in gts.iter().enumerate() {
            let iou = abox.iou(gt);
            if iou > best_iou {
                best_iou = iou;
                best = Some(gi);
            }
        }
        if let Some(gi) = best {
            assignment[ai] = Some(gi);
            claimed[gi] = true;
        }
    }
    // Orphan ground truths claim their nearest free anchor so no earlier
    // assignment is displaced.
    for (gi, gt) in gts.iter().enumerate() {
        if claimed[gi] {
            continue;
        }
        let mut best_ai = None;
        let mut best_d = f64::INFINITY;
        for (ai, anchor) in anchors.iter().enumerate() {
            if assignment[ai].is_some() {
                continue;
            }
            let d = (anchor.cx - gt.cx).powi(2) + (anchor.cy - gt.cy).powi(2);
            if d < best_d {
                best_d = d;
                best_ai = Some(ai);
            }
        }
        if let Some(ai) = best_ai {
            assignment[ai] = Some(gi);
        }
    }
    assignment
}

/// Eq. 7 encoding of a ground-truth box against an anchor:
/// offsets normalized by anchor extent, log size ratios, heading residual
/// as (sin, cos).
pub fn encode(anchor: &Anchor, gt: &OrientedBox) -> [f64; 6] {
    let d = normalize_angle(anchor.theta - gt.heading);
    [
        (anchor.cx - gt.cx) / anchor.w,
        (anchor.cy - gt.cy) / anchor.h,
        (2.0 * gt.half_len / anchor.w).ln(),
        (2.0 * gt.half_wid / anchor.h).ln(),
        d.sin(),
        d.cos(),
    ]
}

pub fn decode(anchor: &Anchor, t: &[f64; 6]) -> OrientedBox {
    OrientedBox::new(
        anchor.cx - t[0] * anchor.w,
        anchor.cy - t[1] * anchor.h,
        anchor.w * t[2].exp(),
        anchor.h * t[3].exp(),
        normalize_angle(anchor.theta - t[4].atan2(t[5])),
    )
}
