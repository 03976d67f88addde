use super::{DatasetError, GenerationManifest};
use crate::seed;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

pub const SPLIT_NAMES: [&str; 3] = ["train", "val", "test"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSpec {
    /// Train, validation and test fractions.
    pub fractions: [f64; 3],
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            fractions: [0.7, 0.1, 0.2],
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<(), DatasetError> {
        if self.fractions.iter().any(|f| !(f.is_finite() && *f > 0.0)) {
            return Err(DatasetError::InvalidSplit("fractions must be positive".into()));
        }
        let s: f64 = self.fractions.iter().sum();
        if (s - 1.0).abs() > 1e-9 {
            return Err(DatasetError::InvalidSplit(format!("fractions sum to {s}, not 1")));
        }
        Ok(())
    }
}

/// Unit ids in each split, sorted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitAssignment {
    /// What the ids refer to: `"shape"` or `"item"`.
    pub unit: String,
    pub seed: u64,
    pub train: Vec<u32>,
    pub val: Vec<u32>,
    pub test: Vec<u32>,
}

/// Largest-remainder sizes: each within 1 of `fraction * n`, summing to `n`.
pub fn split_counts(n: usize, fractions: &[f64; 3]) -> [usize; 3] {
    let exact: Vec<f64> = fractions.iter().map(|f| f * n as f64).collect();
    let mut counts = [0usize; 3];
    for (c, e) in counts.iter_mut().zip(&exact) {
        // guard against 7.000000000000001 style products
        *c = (e + 1e-9).floor() as usize;
    }
    let mut rest = n.saturating_sub(counts.iter().sum());
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (exact[a] - counts[a] as f64, exact[b] - counts[b] as f64);
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if rest == 0 {
            break;
        }
        counts[i] += 1;
        rest -= 1;
    }
    counts
}

/// Partitions the manifest's units by a seeded shuffle and labels every
/// item. Units are shapes for stack-to-shape and m2m datasets, so all views
/// of a shape share a split; segmentation montages mix shapes, so there each
/// item is its own unit.
pub fn split(manifest: &GenerationManifest, spec: &SplitSpec) -> Result<GenerationManifest, DatasetError> {
    spec.validate()?;
    let by_shape = manifest.kind != super::DatasetKind::Segmentation;
    let mut units: Vec<u32> = if by_shape {
        manifest.shapes.iter().map(|s| s.id).collect()
    } else {
        manifest.items.iter().map(|i| i.index as u32).collect()
    };
    units.sort_unstable();
    units.dedup();
    if units.len() < SPLIT_NAMES.len() {
        return Err(DatasetError::InvalidSplit(format!(
            "{} units cannot fill {} splits",
            units.len(),
            SPLIT_NAMES.len()
        )));
    }
    let counts = split_counts(units.len(), &spec.fractions);
    let mut rng = seed::rng(seed::derive_seed(spec.seed, seed::stream::SPLIT, 0));
    units.shuffle(&mut rng);
    let mut parts: [Vec<u32>; 3] = Default::default();
    let mut at = 0;
    for (k, &c) in counts.iter().enumerate() {
        parts[k] = units[at..at + c].to_vec();
        parts[k].sort_unstable();
        at += c;
    }
    let label = |id: u32| SPLIT_NAMES[(0..3).find(|&k| parts[k].binary_search(&id).is_ok()).unwrap()].to_string();
    let mut out = manifest.clone();
    for item in &mut out.items {
        let unit = if by_shape { item.shape_ids[0] } else { item.index as u32 };
        item.split = Some(label(unit));
    }
    let [train, val, test] = parts;
    out.split = Some(SplitAssignment {
        unit: if by_shape { "shape" } else { "item" }.into(),
        seed: spec.seed,
        train,
        val,
        test,
    });
    Ok(out)
}
