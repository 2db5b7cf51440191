//! Scratch calibration runs for the desk-scale regression scenes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use wlrtr_core::*;

fn orthonormal_cols(rng: &mut ChaCha12Rng, n: usize, k: usize) -> Matrix {
    let mut cols: Vec<Vec<f64>> = Vec::new();
    for _ in 0..k {
        let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for c in &cols {
            let d: f64 = v.iter().zip(c.iter()).map(|(a, b)| a * b).sum();
            for (vi, ci) in v.iter_mut().zip(c.iter()) {
                *vi -= d * ci;
            }
        }
        let nrm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        for vi in v.iter_mut() {
            *vi /= nrm;
        }
        cols.push(v);
    }
    let mut m = Matrix::zeros(n, k);
    for (j, c) in cols.iter().enumerate() {
        for (i, &v) in c.iter().enumerate() {
            m.set(i, j, v);
        }
    }
    m
}

/// Rank-(2,2,2) synthetic scene rescaled to the 8-bit range.
///
/// Smooth periodic factors give the scene genuine non-local self-similarity
/// (patches repeat every period), which is what the grouping exploits.
fn synthetic_scene(rows: usize, cols: usize, bands: usize, seed: u64) -> Tensor3 {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let core = Tensor3::from_vec(2, 2, 2, (0..8).map(|_| rng.gen_range(0.5..1.5)).collect()).unwrap();
    let wave = |n: usize, cycles: f64, phase: f64| -> Vec<f64> {
        (0..n)
            .map(|i| (2.0 * std::f64::consts::PI * cycles * i as f64 / n as f64 + phase).sin())
            .collect()
    };
    let factor = |n: usize, c1: f64, c2: f64, rng: &mut ChaCha12Rng| -> Matrix {
        let p1 = rng.gen_range(0.0..6.28);
        let p2 = rng.gen_range(0.0..6.28);
        let mut m = Matrix::zeros(n, 2);
        for (i, (&a, &b)) in wave(n, c1, p1).iter().zip(wave(n, c2, p2).iter()).enumerate() {
            m.set(i, 0, a);
            m.set(i, 1, b);
        }
        m
    };
    // Periods 8 and 4 pixels: exact patch repeats at lag 8 fall well inside
    // the search window.
    let u1 = factor(rows, rows as f64 / 8.0, rows as f64 / 4.0, &mut rng);
    let u2 = factor(cols, cols as f64 / 8.0, cols as f64 / 4.0, &mut rng);
    let u3 = factor(bands, 1.0, 2.0, &mut rng);
    let raw = core
        .nmode_product(&u1, Mode::One)
        .unwrap()
        .nmode_product(&u2, Mode::Two)
        .unwrap()
        .nmode_product(&u3, Mode::Three)
        .unwrap();
    let lo = raw.data().iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = raw.data().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    raw.map(|v| 30.0 + (v - lo) / (hi - lo) * 195.0)
}

fn main() {
    let which = std::env::args().nth(1).unwrap_or_else(|| "denoise".into());
    let truth = synthetic_scene(64, 64, 8, 42);

    match which.as_str() {
        "denoise" => {
            let sigma = 10.0;
            let noisy = add_gaussian_noise(&truth, sigma, 7);
            let (noisy_psnr, _) = psnr(&noisy, &truth).unwrap();
            println!("noisy psnr {:.2}", noisy_psnr);
            for c in [4.0, 8.0, 12.0] {
                for eta in [0.1, 0.3, 1.0] {
                    for k in [12usize, 25] {
                        for iters in [2usize, 4] {
                            let cfg = DenoiseConfig {
                                grouping: GroupingConfig { patch: 7, k, window: 15, stride: 5 },
                                shrink: ShrinkParams { c, sigma, ..Default::default() },
                                outer_iters: iters,
                                eta,
                                ..Default::default()
                            };
                            let t0 = std::time::Instant::now();
                            let x = denoise(&noisy, &cfg).unwrap();
                            let (p, _) = psnr(&x, &truth).unwrap();
                            println!("c={:<4} eta={:<4} k={:<3} iters={} psnr {:.2}  ({:.2?})", c, eta, k, iters, p, t0.elapsed());
                        }
                    }
                }
            }
        }
        "weighted" => {
            let sigma = 30.0;
            let noisy = add_gaussian_noise(&truth, sigma, 11);
            let (noisy_psnr, _) = psnr(&noisy, &truth).unwrap();
            println!("noisy psnr {:.2}", noisy_psnr);
            for c in [4.0, 8.0, 12.0] {
                for decay in [0.9, 0.5, 0.3] {
                    for mode in [WeightMode::Adaptive, WeightMode::Uniform] {
                        let cfg = DenoiseConfig {
                            grouping: GroupingConfig { patch: 7, k: 25, window: 15, stride: 5 },
                            shrink: ShrinkParams { c, sigma, ..Default::default() },
                            outer_iters: 4,
                            eta: 1.0,
                            sigma_decay: decay,
                            weight_mode: mode,
                        };
                        let (x, log) = denoise_with_log(&noisy, &cfg).unwrap();
                        let (p, _) = psnr(&x, &truth).unwrap();
                        let objs: Vec<String> =
                            log.iterations.iter().map(|s| format!("{:.3e}", s.objective)).collect();
                        println!("c={:<4} decay={:<4} {:?} psnr {:.2}  obj {}", c, decay, mode, p, objs.join(" "));
                    }
                }
            }
        }
        "decay" => {
            let sigma = 10.0;
            let noisy = add_gaussian_noise(&truth, sigma, 7);
            for decay in [0.9, 0.7, 0.5, 0.3] {
                for iters in [1usize, 2, 4, 8] {
                    let cfg = DenoiseConfig {
                        grouping: GroupingConfig { patch: 7, k: 25, window: 15, stride: 5 },
                        shrink: ShrinkParams { c: 4.0, sigma, ..Default::default() },
                        outer_iters: iters,
                        eta: 1.0,
                        sigma_decay: decay,
                        ..Default::default()
                    };
                    let x = denoise(&noisy, &cfg).unwrap();
                    let (p, _) = psnr(&x, &truth).unwrap();
                    print!(" N={}:{:.2}", iters, p);
                }
                println!("   <- decay {}", decay);
            }
        }
        "matrix" => {
            // Mode-2-only / mode-3-only matrix shrinkage baselines.
            let sigma = 10.0;
            let noisy = add_gaussian_noise(&truth, sigma, 7);
            let g = GroupingConfig { patch: 7, k: 25, window: 15, stride: 5 };
            for mode in [Mode::Two, Mode::Three] {
                for mult in [0.5, 0.75, 1.0, 1.5, 2.0] {
                    let mean = band_mean_image(&noisy);
                    let keys = key_positions(64, 64, g.patch, g.stride);
                    let mut pairs = Vec::new();
                    for key in keys {
                        let pos = match_similar(&mean, key, &g);
                        let grp = build_group(&noisy, &pos, g.patch).unwrap();
                        let unf = grp.group.unfold(mode);
                        let lam = mult * sigma
                            * ((unf.rows() as f64).sqrt() + (unf.cols() as f64).sqrt());
                        let shrunk = matrix_wnn_shrink(&unf, lam).unwrap();
                        let approx = Tensor3::fold(&shrunk, mode, grp.group.dims()).unwrap();
                        pairs.push((grp, approx));
                    }
                    let x = aggregate(&pairs, &noisy, 1.0);
                    let (p, _) = psnr(&x, &truth).unwrap();
                    println!("{:?} mult={:<5} psnr {:.2}", mode, mult, p);
                }
            }
        }
        "destripe" => {
            let sigma = 5.0;
            let spec = DegradationSpec {
                sigma,
                stripe_fraction: 0.3,
                stripe_amp: 50.0,
                seed: 3,
                ..Default::default()
            };
            let degraded = add_gaussian_noise(&add_stripes(&truth, &spec), sigma, 4);
            let bias_energy = |x: &Tensor3| -> f64 {
                column_mean_bias(x, &truth).unwrap().fro_norm().powi(2)
            };
            println!("input bias energy {:.1}", bias_energy(&degraded));
            // Mixed-noise level: random noise plus the stripe contribution.
            let sigma_mixed = (sigma * sigma + 0.3 * 50.0 * 50.0 / 3.0).sqrt();
            println!("sigma_mixed {:.1}", sigma_mixed);
            // Structural floor: smoothing bias of a plain denoise run on the
            // stripe-free noisy scene, same solver sigma.
            for solver_sigma in [30.0f64, 50.0] {
                let noisy_only = add_gaussian_noise(&truth, sigma, 4);
                let cfg = DenoiseConfig {
                    grouping: GroupingConfig { patch: 7, k: 25, window: 15, stride: 5 },
                    shrink: ShrinkParams { c: 8.0, sigma: solver_sigma, ..Default::default() },
                    eta: 1.0,
                    sigma_decay: 0.5,
                    outer_iters: 4,
                    ..Default::default()
                };
                let x = denoise(&noisy_only, &cfg).unwrap();
                println!(
                    "floor: sigma={} denoise-only bias/input_bias = {:.4}",
                    solver_sigma,
                    bias_energy(&x) / bias_energy(&degraded)
                );
            }
            for (solver_sigma, rho, k, stride) in [
                (30.0, 100.0, 25usize, 5usize),
                (30.0, 140.0, 25, 5),
                (35.0, 140.0, 25, 5),
            ] {
                for iters in [30usize, 40] {
                    let cfg = DestripeConfig {
                        denoise: DenoiseConfig {
                            grouping: GroupingConfig { patch: 7, k, window: 15, stride },
                            shrink: ShrinkParams { c: 8.0, sigma: solver_sigma, ..Default::default() },
                            eta: 1.0,
                            sigma_decay: 0.5,
                            ..Default::default()
                        },
                        rho,
                        outer_iters: iters,
                    };
                    let t0 = std::time::Instant::now();
                    let (x, e) = destripe(&degraded, &cfg).unwrap();
                    let reduction = 1.0 - bias_energy(&x) / bias_energy(&degraded);
                    let e1 = e.unfold(Mode::One);
                    let zero_cols = (0..e1.cols()).filter(|&c| e1.col_norm(c) == 0.0).count();
                    let (p, _) = psnr(&x, &truth).unwrap();
                    println!(
                        "sig={:<5.1} rho={:<6} iters={} bias_reduction {:.3} zero_cols {:.2} psnr {:.2} ({:.1?})",
                        solver_sigma,
                        rho,
                        iters,
                        reduction,
                        zero_cols as f64 / e1.cols() as f64,
                        p,
                        t0.elapsed()
                    );
                }
            }
        }
        "deblur" => {
            let k = make_kernel(&KernelSpec::Gaussian { size: 8, std: 3.0 }).unwrap();
            let blurred = convolve(&truth, &k).unwrap();
            let (bp, _) = psnr(&blurred, &truth).unwrap();
            println!("blurred psnr {:.2}", bp);
            for eta in [1e-8, 1e-6] {
                for iters in [8usize, 12] {
                    let cfg = DeblurConfig {
                        eta,
                        outer_iters: iters,
                        grouping: GroupingConfig { patch: 7, k: 25, window: 15, stride: 5 },
                        shrink: ShrinkParams { c: 12.0, ..Default::default() },
                        ..Default::default()
                    };
                    let t0 = std::time::Instant::now();
                    let x = deblur(&blurred, &k, 0.0, &cfg).unwrap();
                    let (p, _) = psnr(&x, &truth).unwrap();
                    println!("eta={:<8} iters={:<3} psnr {:.2} ({:.1?})", eta, iters, p, t0.elapsed());
                }
            }
        }
        "superres" => {
            let k = make_kernel(&KernelSpec::Gaussian { size: 8, std: 3.0 }).unwrap();
            let s = 8;
            let y = downsample_spatial(&truth, &k, s).unwrap();
            let sr = SpectralResponse::band_average(8, 3).unwrap();
            let z = downsample_spectral(&truth, &sr).unwrap();
            let baseline = bilinear_upsample(&y, s);
            let (bp, _) = psnr(&baseline, &truth).unwrap();
            println!("bilinear psnr {:.2}", bp);
            for iters in [10usize, 15] {
                let cfg = SuperresConfig {
                    scale: s,
                    outer_iters: iters,
                    grouping: GroupingConfig { patch: 7, k: 25, window: 15, stride: 5 },
                    shrink: ShrinkParams { c: 12.0, sigma: 1.0, ..Default::default() },
                    ..Default::default()
                };
                let t0 = std::time::Instant::now();
                let x = superres(&y, &z, &k, &sr, &cfg).unwrap();
                let (p, _) = psnr(&x, &truth).unwrap();
                let zres = downsample_spectral(&x, &sr).unwrap().sub_norm(&z);
                println!("iters={:<3} psnr {:.2} spec_resid {:.4} ({:.1?})", iters, p, zres, t0.elapsed());
            }
        }
        "phi" => {
            // How much stripe bias does a single denoise pass reject from X?
            let sigma = 5.0;
            let spec = DegradationSpec {
                sigma,
                stripe_fraction: 0.3,
                stripe_amp: 50.0,
                seed: 3,
                ..Default::default()
            };
            let degraded = add_gaussian_noise(&add_stripes(&truth, &spec), sigma, 4);
            let bias_energy = |x: &Tensor3| -> f64 {
                column_mean_bias(x, &truth).unwrap().fro_norm().powi(2)
            };
            let input_bias = bias_energy(&degraded);
            println!("input bias {:.0}", input_bias);
            for solver_sigma in [10.0, 20.0, 30.0, 40.0, 60.0, 90.0] {
                for eta in [0.1, 1.0] {
                    let cfg = DenoiseConfig {
                        grouping: GroupingConfig { patch: 7, k: 25, window: 15, stride: 5 },
                        shrink: ShrinkParams { c: 8.0, sigma: solver_sigma, ..Default::default() },
                        eta,
                        outer_iters: 1,
                        sigma_decay: 0.5,
                        ..Default::default()
                    };
                    let x = denoise(&degraded, &cfg).unwrap();
                    let phi = 1.0 - bias_energy(&x) / input_bias;
                    let (p, _) = psnr(&x, &truth).unwrap();
                    println!("sigma={:<5} eta={:<4} phi {:.3} psnr {:.2}", solver_sigma, eta, phi, p);
                }
            }
        }
        other => eprintln!("unknown mode {}", other),
    }
}

trait SubNorm {
    fn sub_norm(&self, other: &Tensor3) -> f64;
}
impl SubNorm for Tensor3 {
    fn sub_norm(&self, other: &Tensor3) -> f64 {
        let mut acc = 0.0;
        for (a, b) in self.data().iter().zip(other.data().iter()) {
            acc += (a - b) * (a - b);
        }
        acc.sqrt() / other.fro_norm()
    }
}
