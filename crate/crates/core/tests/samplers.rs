use pixbound::priors::HuberParams;
use pixbound::samplers::*;
use pixbound::{GaussianLikelihood, ImageGrid, PosteriorModel, Prior};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn scalar_target() -> PosteriorModel {
    PosteriorModel::likelihood_only(GaussianLikelihood::new(1.0, ImageGrid::zeros(1, 1)).unwrap())
}

#[test]
fn ula_stationary_variance_follows_step_bias() {
    // tau = 0.05 keeps the run short; the AR(1) law is 1 / (1 - tau / 2)
    let tau = 0.05;
    let stats = ula_run(&scalar_target(), &UlaConfig::new(tau, ChainSettings::new(400_000, 21))).unwrap();
    let expected = 1.0 / (1.0 - tau / 2.0);
    let v = stats.variance().as_slice()[0];
    assert!((v / expected - 1.0).abs() < 0.02, "{v} vs {expected}");
    assert!(stats.mean().as_slice()[0].abs() < 0.05);
}

#[test]
fn pula_stationary_variance_follows_contraction() {
    let tau = 0.05;
    let stats = pula_run(&scalar_target(), &UlaConfig::new(tau, ChainSettings::new(400_000, 22))).unwrap();
    let a = 1.0 / (1.0 + tau);
    let expected = 2.0 * tau / (1.0 - a * a);
    let v = stats.variance().as_slice()[0];
    assert!((v / expected - 1.0).abs() < 0.02, "{v} vs {expected}");
}

/// Batch-means standard errors of the mean and of the centred second moment
/// of one coordinate.
fn batch_errors(values: &[f64], batches: usize) -> (f64, f64) {
    let n = values.len() / batches;
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let per_batch = |f: &dyn Fn(f64) -> f64| -> f64 {
        let means: Vec<f64> = values
            .chunks_exact(n)
            .map(|c| c.iter().map(|&v| f(v)).sum::<f64>() / n as f64)
            .collect();
        let m = means.iter().sum::<f64>() / means.len() as f64;
        let var = means.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (means.len() - 1) as f64;
        (var / means.len() as f64).sqrt()
    };
    (per_batch(&|v| v), per_batch(&|v| (v - mean).powi(2)))
}

#[test]
fn thinning_leaves_moment_estimates_unchanged() {
    let z = ImageGrid::new(1, 2, vec![0.2, 0.6]).unwrap();
    let model = PosteriorModel::new(
        GaussianLikelihood::new(0.2, z).unwrap(),
        Prior::HuberTv(HuberParams::new(0.05).unwrap()),
        0.5,
    )
    .unwrap();
    let mut results = Vec::new();
    for h in [1usize, 5, 10] {
        let settings = ChainSettings::new(300_000, 5).with_stream(h as u64).with_thinning(h);
        let mut kept = Vec::new();
        let mut obs = |ev: ChainEvent<'_>| -> pixbound::Result<()> {
            if ev.recorded {
                kept.push(ev.state[0]);
            }
            Ok(())
        };
        let stats = Sampler::Ula(UlaConfig::new(5e-3, settings))
            .run(&model, Some(&mut obs))
            .unwrap();
        assert_eq!(kept.len() as u64, stats.count());
        let (se_mean, se_var) = batch_errors(&kept, 50);
        results.push((stats.mean().as_slice()[0], stats.variance().as_slice()[0], se_mean, se_var));
    }
    let (m1, v1, sm1, sv1) = results[0];
    for &(m, v, sm, sv) in &results[1..] {
        assert!((m - m1).abs() < 3.0 * (sm * sm + sm1 * sm1).sqrt(), "mean {m} vs {m1}");
        assert!((v - v1).abs() < 3.0 * (sv * sv + sv1 * sv1).sqrt(), "variance {v} vs {v1}");
    }
}

/// Forward differences with a zero last row / column, written out directly.
fn tv(x: &[f64], h: usize, w: usize) -> f64 {
    let mut acc = 0.0;
    for i in 0..h {
        for j in 0..w {
            if i + 1 < h {
                acc += (x[(i + 1) * w + j] - x[i * w + j]).abs();
            }
            if j + 1 < w {
                acc += (x[i * w + j + 1] - x[i * w + j]).abs();
            }
        }
    }
    acc
}

fn tv_l2_energy(x: &[f64], z: &[f64], sigma: f64, weight: f64, h: usize, w: usize) -> f64 {
    let data: f64 = x.iter().zip(z).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / (2.0 * sigma * sigma);
    data + weight * tv(x, h, w)
}

/// Primal-dual reference minimizer with dual variables per edge.
fn reference_map(z: &[f64], sigma: f64, weight: f64, h: usize, w: usize, iterations: usize) -> Vec<f64> {
    let tau = 0.1;
    let s = 1.0 / (8.0 * tau);
    let r = tau / (sigma * sigma);
    let mut x = z.to_vec();
    let mut x_bar = x.clone();
    let mut pv = vec![0.0; h * w];
    let mut ph = vec![0.0; h * w];
    for _ in 0..iterations {
        for i in 0..h {
            for j in 0..w {
                let k = i * w + j;
                if i + 1 < h {
                    pv[k] = (pv[k] + s * (x_bar[k + w] - x_bar[k])).clamp(-weight, weight);
                }
                if j + 1 < w {
                    ph[k] = (ph[k] + s * (x_bar[k + 1] - x_bar[k])).clamp(-weight, weight);
                }
            }
        }
        let prev = x.clone();
        for i in 0..h {
            for j in 0..w {
                let k = i * w + j;
                // adjoint of the forward difference
                let mut div = 0.0;
                if i + 1 < h {
                    div -= pv[k];
                }
                if i > 0 {
                    div += pv[k - w];
                }
                if j + 1 < w {
                    div -= ph[k];
                }
                if j > 0 {
                    div += ph[k - 1];
                }
                x[k] = (prev[k] - tau * div + r * z[k]) / (1.0 + r);
            }
        }
        for k in 0..x.len() {
            x_bar[k] = 2.0 * x[k] - prev[k];
        }
    }
    x
}

#[test]
fn noiseless_primal_dual_chain_reaches_the_map() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (h, w, sigma, lambda) = (8, 8, 0.1, 0.5);
    for _ in 0..3 {
        let z: Vec<f64> = (0..h * w).map(|_| rng.random::<f64>()).collect();
        let model = PosteriorModel::new(
            GaussianLikelihood::new(sigma, ImageGrid::new(h, w, z.clone()).unwrap()).unwrap(),
            Prior::Tv,
            lambda,
        )
        .unwrap();
        let chain = ChainSettings::new(20_000, 0).with_noise_scale(0.0);
        let cfg = UlpdaConfig::with_max_dual_step(2e-3, 1.0, 8.0, chain);
        let mut last = Vec::new();
        let mut energies = Vec::new();
        let mut obs = |ev: ChainEvent<'_>| -> pixbound::Result<()> {
            if ev.iteration.is_multiple_of(1000) {
                energies.push(tv_l2_energy(ev.state, &z, sigma, 1.0 / lambda, h, w));
            }
            last = ev.state.to_vec();
            Ok(())
        };
        Sampler::PrimalDual(cfg).run(&model, Some(&mut obs)).unwrap();

        let reference = reference_map(&z, sigma, 1.0 / lambda, h, w, 200_000);
        let e_ref = tv_l2_energy(&reference, &z, sigma, 1.0 / lambda, h, w);
        let e = tv_l2_energy(&last, &z, sigma, 1.0 / lambda, h, w);
        assert!((e - e_ref).abs() < 1e-6, "{e} vs {e_ref}");
        let model_e = model.energy(&ImageGrid::new(h, w, last.clone()).unwrap()).unwrap();
        assert!((model_e - e).abs() < 1e-9 * e);
        assert!(energies.last().unwrap() - e_ref < 1e-6);
    }
}
