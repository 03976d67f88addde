use super::{logistic, FitConfig, FitError, MlpOccupancy};
use crate::occupancy::OccupancySampleSet;
use crate::seed;
use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;

/// Probabilities are clipped to `[PROB_CLIP, 1 - PROB_CLIP]` inside the loss.
pub const PROB_CLIP: f64 = 1e-7;

fn design(set: &OccupancySampleSet, idx: &[usize]) -> (Array2<f64>, Vec<f64>) {
    let x = Array2::from_shape_fn((idx.len(), 3), |(i, a)| set.points[idx[i]][a] as f64);
    let y = idx.iter().map(|&i| set.labels[i] as f64).collect();
    (x, y)
}

/// Mean clipped BCE and its derivative with respect to each logit.
fn bce(z: &Array1<f64>, y: &[f64]) -> (f64, Array1<f64>) {
    let n = y.len() as f64;
    let mut total = 0.0;
    let dz = Array1::from_shape_fn(y.len(), |i| {
        let p = logistic(z[i]);
        let pc = p.clamp(PROB_CLIP, 1.0 - PROB_CLIP);
        total -= y[i] * pc.ln() + (1.0 - y[i]) * (1.0 - pc).ln();
        // the clamp has zero slope outside its range
        if p == pc {
            (p - y[i]) / n
        } else {
            0.0
        }
    });
    (total / n, dz)
}

fn check_batch(set: &OccupancySampleSet) -> Result<(), FitError> {
    if set.is_empty() {
        return Err(FitError::EmptyBatch);
    }
    match set.points.iter().position(|p| p.iter().any(|c| !c.is_finite())) {
        Some(i) => Err(FitError::NonFiniteSample(i)),
        None => Ok(()),
    }
}

fn loss_grad_on(model: &MlpOccupancy, set: &OccupancySampleSet, idx: &[usize]) -> (f64, Vec<f64>) {
    let (x, y) = design(set, idx);
    let cache = model.forward_cached(x);
    let (l, dz) = bce(&cache.z, &y);
    (l, model.backward(&cache, &dz))
}

pub fn loss(model: &MlpOccupancy, batch: &OccupancySampleSet) -> Result<f64, FitError> {
    check_batch(batch)?;
    let idx: Vec<usize> = (0..batch.len()).collect();
    let (x, y) = design(batch, &idx);
    Ok(bce(&model.forward_cached(x).z, &y).0)
}

pub fn loss_and_gradient(model: &MlpOccupancy, batch: &OccupancySampleSet) -> Result<(f64, Vec<f64>), FitError> {
    check_batch(batch)?;
    let idx: Vec<usize> = (0..batch.len()).collect();
    Ok(loss_grad_on(model, batch, &idx))
}

/// Exact reverse-mode gradient of [`loss`].
pub fn gradient(model: &MlpOccupancy, batch: &OccupancySampleSet) -> Result<Vec<f64>, FitError> {
    Ok(loss_and_gradient(model, batch)?.1)
}

/// Denominator floor for [`relative_error`]. A central difference with step
/// 1e-6 on a loss of order 1 carries about 1e-10 of rounding noise, so
/// gradient entries below 1e-5 cannot be resolved to 1e-5 relative error.
pub const RELATIVE_ERROR_FLOOR: f64 = 1e-5;

/// `|a - n| / max(|a|, |n|, RELATIVE_ERROR_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_ERROR_FLOOR)
}

pub fn fit(samples: &OccupancySampleSet, config: &FitConfig) -> Result<MlpOccupancy, FitError> {
    Ok(train(samples, config, false)?.0)
}

/// Like [`fit`], also returning the loss on the full sample set after each
/// epoch.
pub fn fit_with_history(
    samples: &OccupancySampleSet,
    config: &FitConfig,
) -> Result<(MlpOccupancy, Vec<f64>), FitError> {
    train(samples, config, true)
}

/// Adam over shuffled mini-batches.
fn train(
    samples: &OccupancySampleSet,
    config: &FitConfig,
    track: bool,
) -> Result<(MlpOccupancy, Vec<f64>), FitError> {
    config.validate()?;
    check_batch(samples)?;
    let mut model = MlpOccupancy::from_config(config);
    let np = model.parameter_count();
    let (mut m, mut v) = (vec![0.0; np], vec![0.0; np]);
    let mut shuffle = seed::rng(seed::derive_seed(config.seed, seed::stream::FIT_SHUFFLE, 0));
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    let (b1, b2) = (config.beta1, config.beta2);
    let mut step = 0i32;
    for epoch in 0..config.epochs {
        order.shuffle(&mut shuffle);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            let (l, g) = loss_grad_on(&model, samples, batch);
            if !l.is_finite() || g.iter().any(|x| !x.is_finite()) {
                return Err(FitError::Diverged { epoch });
            }
            epoch_loss += l * batch.len() as f64;
            step += 1;
            let c1 = 1.0 - b1.powi(step);
            let c2 = 1.0 - b2.powi(step);
            for i in 0..np {
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                model.params[i] -= config.learning_rate * (m[i] / c1) / ((v[i] / c2).sqrt() + config.epsilon);
            }
        }
        if epoch % 100 == 0 || epoch + 1 == config.epochs {
            log::debug!("fit epoch {epoch} running loss {:.6}", epoch_loss / samples.len() as f64);
        }
        if track {
            history.push(loss(&model, samples)?);
        }
    }
    if model.params.iter().any(|p| !p.is_finite()) {
        return Err(FitError::Diverged { epoch: config.epochs });
    }
    Ok((model, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point3;
    use crate::implicit::{extract_mesh, Activation};
    use crate::mesh::primitives::icosphere;
    use crate::mesh::InsideTester;
    use crate::occupancy::sample_occupancy;
    use rand::Rng;

    fn tiny_set(n: usize, seed_value: u64) -> OccupancySampleSet {
        let mut rng = seed::rng(seed_value);
        let points: Vec<[f32; 3]> = (0..n).map(|_| [0, 1, 2].map(|_| rng.random_range(-0.5f32..0.5))).collect();
        let labels = points.iter().map(|p| (p[0] * p[0] + p[1] * p[1] + p[2] * p[2] < 0.09) as u8).collect();
        OccupancySampleSet { points, labels, source: String::new(), seed: seed_value }
    }

    #[test]
    fn uniform_half_gives_ln2() {
        let mut m = MlpOccupancy::init(8, 1, Activation::Softplus, 2);
        let n = m.params.len();
        m.params[n - 9..].fill(0.0);
        let l = loss(&m, &tiny_set(50, 1)).unwrap();
        assert!((l - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn perfect_prediction_is_clip_scale() {
        let y = [1.0, 0.0, 1.0];
        let z = Array1::from(vec![50.0, -50.0, 80.0]);
        let (l, dz) = bce(&z, &y);
        assert!(l < 1e-5 && l > 0.0);
        assert!(dz.iter().all(|d| d.is_finite()));
    }

    #[test]
    fn empty_and_nonfinite_batches_rejected() {
        let m = MlpOccupancy::init(4, 1, Activation::Softplus, 0);
        let mut s = tiny_set(0, 0);
        assert!(matches!(loss(&m, &s), Err(FitError::EmptyBatch)));
        s.points.push([f32::NAN, 0.0, 0.0]);
        s.labels.push(0);
        assert!(matches!(gradient(&m, &s), Err(FitError::NonFiniteSample(0))));
    }

    fn max_fd_error(activation: Activation, width: usize, blocks: usize, seed_value: u64) -> f64 {
        let set = tiny_set(64, seed_value);
        let model = MlpOccupancy::init(width, blocks, activation, seed_value);
        let analytic = gradient(&model, &set).unwrap();
        let mut rng = seed::rng(seed_value ^ 0xFD);
        let h = 1e-6;
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            let i = rng.random_range(0..model.params.len());
            let mut plus = model.clone();
            plus.params[i] += h;
            let mut minus = model.clone();
            minus.params[i] -= h;
            let numeric = (loss(&plus, &set).unwrap() - loss(&minus, &set).unwrap()) / (2.0 * h);
            worst = worst.max(super::super::train::relative_error(analytic[i], numeric));
        }
        worst
    }

    #[test]
    fn gradient_matches_central_differences() {
        for seed_value in 1..=5 {
            for act in [Activation::Relu, Activation::Softplus] {
                let e = max_fd_error(act, 64, 5, seed_value);
                assert!(e <= 1e-5, "{act:?} seed {seed_value}: {e}");
            }
        }
        assert!(max_fd_error(Activation::Softplus, 7, 0, 4) <= 1e-5);
    }

    #[test]
    fn dead_output_path_has_zero_hidden_gradient() {
        let mut m = MlpOccupancy::init(8, 2, Activation::Softplus, 5);
        let l = m.layout();
        m.params[l.wout()..l.bout()].fill(0.0);
        let g = gradient(&m, &tiny_set(30, 5)).unwrap();
        assert!(g[..l.wout()].iter().all(|&x| x == 0.0));
        assert!(g[l.bout()] != 0.0);
    }

    #[test]
    fn all_ones_converges_to_one() {
        let mut s = tiny_set(256, 6);
        s.labels.fill(1);
        let cfg = FitConfig { epochs: 60, batch_size: 64, learning_rate: 1e-2, width: 16, blocks: 1, seed: 6, ..Default::default() };
        let m = fit(&s, &cfg).unwrap();
        assert!(loss(&m, &s).unwrap() < 0.01);
    }

    #[test]
    fn identical_seed_gives_bitwise_identical_weights() {
        let s = tiny_set(300, 7);
        let cfg = FitConfig { epochs: 5, batch_size: 64, width: 16, blocks: 2, seed: 11, ..Default::default() };
        let a = fit(&s, &cfg).unwrap();
        let b = fit(&s, &cfg).unwrap();
        let bits = |m: &MlpOccupancy| m.params.iter().map(|p| p.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
        let c = fit(&s, &FitConfig { seed: 12, ..cfg }).unwrap();
        assert_ne!(bits(&a), bits(&c));
    }

    #[test]
    fn huge_step_diverges() {
        let s = tiny_set(100, 8);
        let cfg = FitConfig { epochs: 20, batch_size: 50, learning_rate: 1e300, width: 8, blocks: 2, ..Default::default() };
        assert!(matches!(fit(&s, &cfg), Err(FitError::Diverged { .. })));
    }

    fn sphere_samples() -> (crate::mesh::TriangleMesh, OccupancySampleSet) {
        let sphere = icosphere(Point3::origin(), 0.35, 4);
        let s = sample_occupancy(&sphere, 10_000, 21, "sphere r=0.35").unwrap();
        (sphere, s)
    }

    #[test]
    fn early_training_loss_decreases() {
        let (_, s) = sphere_samples();
        let cfg = FitConfig { epochs: 10, seed: 0, ..Default::default() };
        let (_, hist) = fit_with_history(&s, &cfg).unwrap();
        for w in hist.windows(2) {
            assert!(w[1] < w[0], "{hist:?}");
        }
        for seed_value in 1..4 {
            let (_, h) = fit_with_history(&s, &FitConfig { seed: seed_value, ..cfg.clone() }).unwrap();
            assert!(h[9] < h[0] / 5.0, "seed {seed_value}: {h:?}");
        }
    }

    #[test]
    fn fitted_sphere_spot_checks_and_nesting() {
        let (_, s) = sphere_samples();
        let cfg = FitConfig { epochs: 60, seed: 3, ..Default::default() };
        let m = fit(&s, &cfg).unwrap();
        assert!(m.forward(&Point3::origin()) > 0.9);
        assert!(m.forward(&Point3::new(0.7, 0.0, 0.0)) < 0.1);
        let outer = extract_mesh(&m, 48, 0.5).unwrap();
        let tester = InsideTester::new(&outer).unwrap();
        let inner = match extract_mesh(&m, 48, 0.999) {
            Ok(mesh) => mesh,
            Err(FitError::Mesh(crate::mesh::MeshError::EmptyLevelSet(_))) => return,
            Err(e) => panic!("{e}"),
        };
        let inner_tester = InsideTester::new(&inner).unwrap();
        let mut rng = seed::rng(99);
        let (mut inside_inner, mut contained) = (0, 0);
        for _ in 0..20_000 {
            let p = Point3::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5));
            if inner_tester.contains(&p) {
                inside_inner += 1;
                contained += tester.contains(&p) as usize;
            }
        }
        assert!(inside_inner > 0);
        assert!(contained as f64 >= 0.99 * inside_inner as f64, "{contained}/{inside_inner}");
    }
}
