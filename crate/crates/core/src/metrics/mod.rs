//! Shape and mask agreement: Monte-Carlo volumetric IoU, Chamfer-L1 and
//! Dice/IoU/F1 on binary masks.

use crate::geometry::{Aabb, Point3};
use crate::mesh::{sample_surface_points, InsideTester, MeshError, NormalizationRecord, TriangleMesh};
use crate::microscope::Mask;
use crate::seed;
use kiddo::immutable::float::kdtree::ImmutableKdTree;
use kiddo::SquaredEuclidean;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_IOU_SAMPLES: usize = 100_000;
pub const DEFAULT_CHAMFER_POINTS: usize = 100_000;
/// The joint bounding box grows by this fraction of its extent in total,
/// split evenly between both sides of each axis.
pub const IOU_BOX_INFLATION: f64 = 0.05;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("no sample fell inside either mesh; IoU is undefined")]
    EmptyUnion,
    #[error("sample count must be >= 1")]
    InvalidSampleCount,
    #[error("mask shapes differ: {0:?} vs {1:?}")]
    ShapeMismatch((usize, usize), (usize, usize)),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

/// Fraction of `n` uniform points in the inflated joint bounding box that lie
/// in both meshes, over the fraction in either. Surface points count as
/// inside.
pub fn volumetric_iou(a: &TriangleMesh, b: &TriangleMesh, n: usize, seed_value: u64) -> Result<f64, MetricsError> {
    if n == 0 {
        return Err(MetricsError::InvalidSampleCount);
    }
    let (ta, tb) = (InsideTester::new(a)?, InsideTester::new(b)?);
    let bb = ta.bounding_box().union(&tb.bounding_box()).inflated(IOU_BOX_INFLATION / 2.0);
    let mut rng = seed::rng(seed_value);
    let (mut inter, mut union) = (0u64, 0u64);
    for _ in 0..n {
        let p = Point3::new(
            uniform(&mut rng, bb.min.x, bb.max.x),
            uniform(&mut rng, bb.min.y, bb.max.y),
            uniform(&mut rng, bb.min.z, bb.max.z),
        );
        let (ia, ib) = (ta.contains(&p), tb.contains(&p));
        inter += (ia && ib) as u64;
        union += (ia || ib) as u64;
    }
    if union == 0 {
        return Err(MetricsError::EmptyUnion);
    }
    Ok(inter as f64 / union as f64)
}

fn uniform(rng: &mut seed::Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

/// Mean distance from each point of `from` to its nearest neighbour in `to`,
/// via an exact kd-tree query.
pub fn mean_nearest_distance(from: &[Point3], to: &[Point3]) -> f64 {
    let pts: Vec<[f64; 3]> = to.iter().map(|p| [p.x, p.y, p.z]).collect();
    let tree: ImmutableKdTree<f64, u64, 3, 32> = ImmutableKdTree::new_from_slice(&pts);
    let total: f64 = from
        .iter()
        .map(|p| tree.nearest_one::<SquaredEuclidean>(&[p.x, p.y, p.z]).distance.sqrt())
        .sum();
    total / from.len() as f64
}

/// Chamfer-L1 between two point sets: half the mean nearest distance in each
/// direction.
pub fn chamfer_points(a: &[Point3], b: &[Point3]) -> Result<f64, MetricsError> {
    if a.is_empty() || b.is_empty() {
        return Err(MetricsError::InvalidSampleCount);
    }
    Ok(0.5 * mean_nearest_distance(a, b) + 0.5 * mean_nearest_distance(b, a))
}

/// Surface samples used by [`chamfer_l1`]. Every mesh is sampled from the
/// same stream for a given seed, so a mesh compared with itself shares its
/// sample set.
pub fn chamfer_samples(mesh: &TriangleMesh, n: usize, seed_value: u64) -> Result<Vec<Point3>, MetricsError> {
    if n == 0 {
        return Err(MetricsError::InvalidSampleCount);
    }
    let mut rng = seed::rng(seed::derive_seed(seed_value, seed::stream::METRICS, 0));
    Ok(sample_surface_points(mesh, n, &mut rng)?)
}

/// Chamfer-L1 in the meshes' own units from `n` surface samples per mesh.
pub fn chamfer_l1(a: &TriangleMesh, b: &TriangleMesh, n: usize, seed_value: u64) -> Result<f64, MetricsError> {
    chamfer_points(&chamfer_samples(a, n, seed_value)?, &chamfer_samples(b, n, seed_value)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshComparison {
    pub iou: f64,
    /// In the units of the compared meshes (normalized unit-cube units for
    /// normalized meshes).
    pub chamfer_l1: f64,
    /// Chamfer-L1 mapped back to nanometers, when a normalization was given.
    pub chamfer_l1_nm: Option<f64>,
    pub iou_samples: usize,
    pub chamfer_points: usize,
    pub seed: u64,
}

pub fn compare_meshes(
    a: &TriangleMesh,
    b: &TriangleMesh,
    iou_samples: usize,
    chamfer_points: usize,
    seed_value: u64,
    normalization: Option<&NormalizationRecord>,
) -> Result<MeshComparison, MetricsError> {
    let iou = volumetric_iou(a, b, iou_samples, seed_value)?;
    let chamfer = chamfer_l1(a, b, chamfer_points, seed_value)?;
    Ok(MeshComparison {
        iou,
        chamfer_l1: chamfer,
        chamfer_l1_nm: normalization.map(|r| r.to_physical_length(chamfer)),
        iou_samples,
        chamfer_points,
        seed: seed_value,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaskScores {
    pub dice: f64,
    pub iou: f64,
    pub f1: f64,
    pub true_positives: u64,
    pub false_positives: u64,
    pub false_negatives: u64,
    pub true_negatives: u64,
    pub foreground_only: bool,
}

/// Dice, IoU and F1 of one class from its counts; both-empty scores 1.
pub fn class_scores(tp: u64, fp: u64, fn_: u64) -> (f64, f64, f64) {
    if tp + fp + fn_ == 0 {
        return (1.0, 1.0, 1.0);
    }
    let (tp, fp, fn_) = (tp as f64, fp as f64, fn_ as f64);
    let dice = 2.0 * tp / (2.0 * tp + fp + fn_);
    let iou = tp / (tp + fp + fn_);
    // F1 = 2PR/(P+R) reduces to Dice exactly.
    let f1 = dice;
    (dice, iou, f1)
}

/// With `foreground_only`, scores the foreground class alone, so pixels that
/// are background in both masks never enter. Otherwise the scores are the
/// mean of the foreground-class and background-class scores.
pub fn mask_scores(pred: &Mask, gt: &Mask, foreground_only: bool) -> Result<MaskScores, MetricsError> {
    if (pred.width, pred.height) != (gt.width, gt.height) {
        return Err(MetricsError::ShapeMismatch((pred.width, pred.height), (gt.width, gt.height)));
    }
    let (mut tp, mut fp, mut fn_, mut tn) = (0u64, 0u64, 0u64, 0u64);
    for (&p, &g) in pred.data.iter().zip(&gt.data) {
        match (p != 0, g != 0) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    let (mut dice, mut iou, mut f1) = class_scores(tp, fp, fn_);
    if !foreground_only {
        let (bd, bi, bf) = class_scores(tn, fn_, fp);
        dice = (dice + bd) / 2.0;
        iou = (iou + bi) / 2.0;
        f1 = (f1 + bf) / 2.0;
    }
    Ok(MaskScores {
        dice,
        iou,
        f1,
        true_positives: tp,
        false_positives: fp,
        false_negatives: fn_,
        true_negatives: tn,
        foreground_only,
    })
}

/// Bounding box of the meshes' referenced vertices, for callers that need
/// the IoU sampling domain.
pub fn iou_domain(a: &TriangleMesh, b: &TriangleMesh) -> Option<Aabb> {
    Some(a.bounding_box()?.union(&b.bounding_box()?).inflated(IOU_BOX_INFLATION / 2.0))
}
