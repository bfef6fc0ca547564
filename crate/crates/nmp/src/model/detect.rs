//! Detection decoding: anchor scores to oriented boxes with per-frame
//! motion forecasts, greedy NMS on the present frame, and average
//! precision for evaluation.

use super::anchors::{decode, Anchor};
use super::ModelConfig;
use crate::geom2d::OrientedBox;
use crate::net::Tensor4;
use crate::scalar::Real;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct DetectConfig {
    pub score_threshold: f64,
    pub nms_iou: f64,
    pub max_detections: usize,
}

impl Default for DetectConfig {
    fn default() -> Self {
        DetectConfig {
            score_threshold: 0.3,
            nms_iou: 0.5,
            max_detections: 64,
        }
    }
}

/// One detected actor: classifier score plus a box per regression frame,
/// frame 0 being the present.
#[derive(Debug, Clone)]
pub struct Detection {
    pub score: f64,
    pub boxes: Vec<OrientedBox>,
}

impl Detection {
    /// Forecast box for planner step `step` (time (step+1)*dt). The
    /// regression frames start at the present, so the final planner step
    /// reuses the last frame.
    pub fn box_at_step(&self, step: usize) -> &OrientedBox {
        &self.boxes[(step + 1).min(self.boxes.len() - 1)]
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Decode scored detections from the classification and regression
/// heads. Output is score-sorted descending and NMS-pruned.
pub fn decode_detections<S: Real>(
    cls_logits: &Tensor4<S>,
    reg: &Tensor4<S>,
    field: &[Anchor],
    mc: &ModelConfig,
    dc: &DetectConfig,
) -> Vec<Detection> {
    let (_, a, fh, fw) = cls_logits.shape();
    assert_eq!(field.len(), a * fh * fw, "anchor field/logits mismatch");
    assert_eq!(reg.shape(), (1, a * 6 * mc.t_steps, fh, fw));
    let mut candidates: Vec<(f64, usize)> = cls_logits
        .data
        .iter()
        .enumerate()
        .filter_map(|(i, z)| {
            let s = sigmoid(z.as_f64());
            (s >= dc.score_threshold).then_some((s, i))
        })
        .collect();
    candidates.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));

    let mut kept: Vec<Detection> = Vec::new();
    for (score, idx) in candidates {
        if kept.len() >= dc.max_detections {
            break;
        }
        let k = idx / (fh * fw);
        let r = idx / fw % fh;
        let c = idx % fw;
        let anchor = &field[idx];
        let boxes: Vec<OrientedBox> = (0..mc.t_steps)
            .map(|t| {
                let mut enc = [0.0; 6];
                for (comp, e) in enc.iter_mut().enumerate() {
                    let ch = mc.reg_channel(k, t, comp);
                    *e = reg.at(0, ch, r, c).as_f64();
                }
                decode(anchor, &enc)
            })
            .collect();
        if kept
            .iter()
            .all(|d| d.boxes[0].iou(&boxes[0]) <= dc.nms_iou)
        {
            kept.push(Detection { score, boxes });
        }
    }
    kept
}

/// Greedily match score-sorted detections to ground truth by present-frame
/// IoU; each truth box is claimed at most once. Returns (score, is_tp).
pub fn match_detections(
    detections: &[Detection],
    gts: &[OrientedBox],
    iou_threshold: f64,
) -> Vec<(f64, bool)> {
    let mut claimed = vec![false; gts.len()];
    detections
        .iter()
        .map(|d| {
            let mut best = None;
            let mut best_iou = 0.0;
            for (gi, gt) in gts.iter().enumerate() {
                if claimed[gi] {
                    continue;
                }
                let v = d.boxes[0].iou(gt);
                if v > best_iou {
                    best_iou = v;
                    best = Some(gi);
                }
            }
            match best {
                Some(gi) if best_iou >= iou_threshold => {
                    claimed[gi] = true;
                    (d.score, true)
                }
                _ => (d.score, false),
            }
        })
        .collect()
}

/// All-point interpolated average precision over pooled (score, is_tp)
/// samples. Zero when there is no ground truth to recall.
pub fn average_precision(mut samples: Vec<(f64, bool)>, n_gt: usize) -> f64 {
    if n_gt == 0 {
        return 0.0;
    }
    samples.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut tp = 0usize;
    let mut recalls = Vec::with_capacity(samples.len());
    let mut precisions = Vec::with_capacity(samples.len());
    for (rank, (_, hit)) in samples.iter().enumerate() {
        if *hit {
            tp += 1;
        }
        recalls.push(tp as f64 / n_gt as f64);
        precisions.push(tp as f64 / (rank + 1) as f64);
    }
    // Interpolate: precision at recall r is the max precision at any
    // recall >= r.
    for i in (0..precisions.len().saturating_sub(1)).rev() {
        precisions[i] = precisions[i].max(precisions[i + 1]);
    }
    let mut ap = 0.0;
    let mut prev_r = 0.0;
    for (r, p) in recalls.iter().zip(&precisions) {
        if *r > prev_r {
            ap += (r - prev_r) * p;
            prev_r = *r;
        }
    }
    ap
}
