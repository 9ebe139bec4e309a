//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Exits 0 after printing the report so the remaining test targets still run;
//! set `ACCEPTANCE_STRICT=1` to exit 1 when any criterion fails.

use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rydberg_jc::analysis::{fourier_spectrum, SpectrumResult, TimeSeries};
use rydberg_jc::detection::{detected_timeseries, detection_transform, DetectionModel};
use rydberg_jc::dynamics::{
    blockade_radius, build_hamiltonian, distance, evolve_with, ExcitationHistogram, PhysicalParams,
    PropagationOptions, SpatialConfiguration,
};
use rydberg_jc::ensemble::{run_scenario, AveragedResult};
use rydberg_jc::io::config::RunConfig;
use rydberg_jc::io::presets::{expand_series, preset_config};
use rydberg_jc::io::{pair_spec, scenario_spec};
use rydberg_jc::jc_reference::{collective_p1, AtomNumberDist, DriveParams, PoissonDist};
use rydberg_jc::open_system::{averaged_master_scenario, AveragedMaster};
use rydberg_jc::parallel::Execution;
use rydberg_jc::statespace::enumerate_basis;
use rydberg_jc::superatom::{two_ensemble_scenario, TwoEnsembleResult};
use rydberg_jc::units::{mhz_to_angular, uniform_grid};

struct Report {
    passed: usize,
    failed: usize,
}

impl Report {
    fn check(&mut self, id: &str, what: &str, ok: bool, detail: String) {
        if ok {
            self.passed += 1;
        } else {
            self.failed += 1;
        }
        println!("{} {id:<4} {what}: {detail}", if ok { "PASS" } else { "FAIL" });
    }
}

fn exec() -> Execution {
    Execution::default()
}

fn ensemble(cfg: &RunConfig) -> AveragedResult {
    run_scenario(&scenario_spec(cfg).unwrap(), exec()).unwrap()
}

fn contrast(cfg: &RunConfig, mean: f64, grid: &[f64], values: &[f64]) -> f64 {
    cfg.windows(mean)
        .contrast(&TimeSeries::new(grid.to_vec(), values.to_vec()).unwrap())
        .unwrap()
}

fn series(name: &str) -> Vec<RunConfig> {
    expand_series(&preset_config(name).unwrap()).unwrap().into_iter().map(|s| s.1).collect()
}

fn master(cfg: &RunConfig) -> AveragedMaster {
    averaged_master_scenario(
        &AtomNumberDist::Poisson(cfg.poisson().unwrap()),
        cfg.physical_params().unwrap().rabi,
        &cfg.decay_params().unwrap(),
        &cfg.time_grid(),
        exec(),
    )
    .unwrap()
}

fn pair(cfg: &RunConfig) -> TwoEnsembleResult {
    two_ensemble_scenario(&pair_spec(cfg).unwrap(), exec()).unwrap()
}

fn spectrum(grid: &[f64], values: &[f64]) -> SpectrumResult {
    fourier_spectrum(&TimeSeries::new(grid.to_vec(), values.to_vec()).unwrap())
}

fn max_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn max_abs_diff(a: &ExcitationHistogram, b: &ExcitationHistogram) -> f64 {
    a.q.iter()
        .zip(&b.q)
        .flat_map(|(x, y)| x.iter().zip(y).map(|(u, v)| (u - v).abs()))
        .fold(0.0, f64::max)
}

fn criteria_1_to_6(r: &mut Report) {
    let cfg = preset_config("fig2a").unwrap();
    let grid = cfg.time_grid();
    let started = Instant::now();
    let a = ensemble(&cfg);
    let secs = started.elapsed().as_secs_f64();
    let c1 = contrast(&cfg, 7.0, &grid, &a.histogram.q[1]);
    r.check("1a", "fig2a q_Ry(1) revival contrast > 0.15", c1 > 0.15, format!("{c1:.4}"));
    let q2 = max_of(&a.histogram.q[2]);
    r.check("1b", "fig2a max_t q_Ry(2) < 0.05", q2 < 0.05, format!("{q2:.4}"));
    r.check("1c", "fig2a runtime < 10 min", secs < 600.0, format!("{secs:.1} s at {} samples", cfg.samples));

    // 2: structural perfect blockade
    let mut m1 = cfg.clone();
    m1.max_excitations = 1;
    m1.samples = 10_000;
    let spec = scenario_spec(&m1).unwrap();
    let b = run_scenario(&spec, exec()).unwrap();
    let drive = DriveParams::from_rabi(spec.params.rabi).unwrap();
    let (mut worst, mut worst_z) = (0.0f64, 0.0f64);
    let mut within_se = true;
    for (j, &t) in grid.iter().enumerate() {
        let exact = collective_p1(&drive, &spec.atom_dist, t).unwrap();
        let d = (b.histogram.q[1][j] - exact).abs();
        let se = b.std_error[1][j];
        // the m = 1 estimator has zero variance; 1e-9 absorbs rounding only
        within_se &= d <= 3.0 * se + 1e-9;
        worst = worst.max(d);
        if se > 0.0 {
            worst_z = worst_z.max(d / se);
        }
    }
    r.check(
        "2",
        "m=1 matches collective_p1 within 3 SE and 1e-3 (10000 samples)",
        within_se && worst <= 1e-3,
        format!("max |diff| {worst:.2e}, max |diff|/SE {worst_z:.2}"),
    );

    // 3: blockade breakdown
    let mut contrasts = vec![c1];
    for name in ["fig2b", "fig2c", "fig2d"] {
        let c = preset_config(name).unwrap();
        let res = ensemble(&c);
        contrasts.push(contrast(&c, 7.0, &grid, &res.histogram.q[1]));
    }
    let monotone = contrasts.windows(2).all(|w| w[1] < w[0]);
    let text = format!("r=2,3,4,5 um: {:.4} {:.4} {:.4} {:.4}", contrasts[0], contrasts[1], contrasts[2], contrasts[3]);
    r.check("3a", "q_Ry(1) contrast decreases monotonically with r", monotone, text.clone());
    r.check("3b", "contrast < 0.05 at r = 4 and 5 um", contrasts[2] < 0.05 && contrasts[3] < 0.05, text);

    // 4
    let rb = blockade_radius(&cfg.physical_params().unwrap(), 7).unwrap();
    r.check("4", "blockade radius (N=7) in [10.0, 10.6] um", (10.0..=10.6).contains(&rb), format!("{rb:.4} um"));

    // 5
    let tail = PoissonDist::new(7.0, 20).unwrap().tail_mass();
    r.check("5a", "Poisson tail P(N>20 | 7) <= 3.1e-4", tail <= 3.1e-4, format!("{tail:.4e}"));
    r.check("5b", "Poisson tail P(N>20 | 7) > 2e-4", tail > 2e-4, format!("{tail:.4e}"));

    // 6: detection on the fig2a output
    let s = detected_timeseries(&a.histogram, &DetectionModel::new(0.1).unwrap()).unwrap();
    let cs = contrast(&cfg, 7.0, &grid, &s.q[1]);
    r.check(
        "6a",
        "T=0.1 contrast of s_Ry(1) > 0.1 x undetected contrast",
        cs > 0.1 * c1,
        format!("{cs:.5} vs {:.5}", 0.1 * c1),
    );
    let identity = detected_timeseries(&a.histogram, &DetectionModel::new(1.0).unwrap()).unwrap();
    let id_err = max_abs_diff(&identity, &a.histogram);
    r.check("6b", "T=1 is the identity to 1e-12", id_err <= 1e-12, format!("{id_err:.1e}"));
    let mean = |h: &ExcitationHistogram, j: usize| h.q.iter().enumerate().map(|(k, row)| k as f64 * row[j]).sum::<f64>();
    let thin = (0..grid.len()).map(|j| (mean(&s, j) - 0.1 * mean(&a.histogram, j)).abs()).fold(0.0, f64::max);
    r.check("6c", "mean thinning <s> = T <q> to 1e-12", thin <= 1e-12, format!("{thin:.1e}"));
}

fn criterion_7(r: &mut Report) {
    let c = series("fig3c");
    let (open, closed) = (master(&c[0]), master(&c[1]));
    let grid = c[0].time_grid();
    let co = contrast(&c[0], 7.0, &grid, &open.p_ry);
    let cc = contrast(&c[1], 7.0, &grid, &closed.p_ry);
    r.check(
        "7a",
        "gamma2=0.8 kHz revival amplitude within 5% of closed system",
        (co / cc - 1.0).abs() <= 0.05,
        format!("{co:.4} vs {cc:.4} (ratio {:.4})", co / cc),
    );
    let d = series("fig3d");
    let strong = master(&d[1]);
    let cg = contrast(&d[1], 7.0, &grid, &strong.p_ry);
    r.check("7b", "gamma=100 kHz revival contrast < 0.05", cg < 0.05, format!("{cg:.4}"));
    let peak = max_of(&strong.p_ry);
    r.check("7c", "gamma=100 kHz max_t P_Ry in [0.75, 0.85]", (0.75..=0.85).contains(&peak), format!("{peak:.4}"));
    let weak = master(&d[0]);
    let trace = [&open, &closed, &strong, &weak].iter().map(|m| m.worst_trace_error).fold(0.0, f64::max);
    r.check("7d", "master-equation trace preserved to 1e-8", trace <= 1e-8, format!("{trace:.1e}"));
}

fn criterion_8(r: &mut Report) {
    let nine = preset_config("fig4a").unwrap();
    let a = ensemble(&nine);
    let mean9 = scenario_spec(&nine).unwrap().atom_dist.mean();
    let c9 = contrast(&nine, mean9, &nine.time_grid(), &a.histogram.q[1]);
    r.check("8a", "9-site lattice d=3 um contrast > 0.1", c9 > 0.1, format!("{c9:.4}"));
    let four = preset_config("fig4b").unwrap();
    let b = ensemble(&four);
    let mean4 = scenario_spec(&four).unwrap().atom_dist.mean();
    let c4 = contrast(&four, mean4, &four.time_grid(), &b.histogram.q[1]);
    r.check("8b", "4-site lattice d=4 um contrast < 0.05", c4 < 0.05, format!("{c4:.4}"));
}

fn criterion_9(r: &mut Report) {
    let far_cfg = preset_config("fig5a").unwrap();
    let grid = far_cfg.time_grid();
    let far = pair(&far_cfg);
    let drive = DriveParams::from_rabi(far_cfg.physical_params().unwrap().rabi).unwrap();
    let single = AtomNumberDist::Poisson(far_cfg.poisson().unwrap());
    let (mut outside, mut worst_z) = (0usize, 0.0f64);
    for (j, &t) in grid.iter().enumerate() {
        let d = (far.n_ry[j] - 2.0 * collective_p1(&drive, &single, t).unwrap()).abs();
        if d > 3.0 * far.std_error[j] {
            outside += 1;
        }
        if far.std_error[j] > 0.0 {
            worst_z = worst_z.max(d / far.std_error[j]);
        }
    }
    r.check(
        "9a",
        "d=20 um N_Ry equals 2x single-ensemble curve within 3 SE",
        outside == 0,
        format!("{outside}/{} points outside, max |diff|/SE {worst_z:.2}", grid.len()),
    );
    let near = pair(&preset_config("fig5b").unwrap());
    let (sn, sf) = (spectrum(&grid, &near.n_ry), spectrum(&grid, &far.n_ry));
    let target_near = 20f64.sqrt();
    let target_far = 10f64.sqrt();
    r.check(
        "9b",
        "d=4 um Fourier peak at sqrt(20) MHz within one bin",
        (sn.peak_frequency - target_near).abs() <= sn.resolution(),
        format!("{:.3} MHz vs {target_near:.3} (bin {:.3})", sn.peak_frequency, sn.resolution()),
    );
    r.check(
        "9c",
        "d=20 um Fourier peak at sqrt(10) MHz within one bin",
        (sf.peak_frequency - target_far).abs() <= sf.resolution(),
        format!("{:.3} MHz vs {target_far:.3} (bin {:.3})", sf.peak_frequency, sf.resolution()),
    );
    r.check(
        "9d",
        "Fourier peak rises from d=20 um to d=4 um",
        sn.peak_frequency > sf.peak_frequency,
        format!("{:.3} -> {:.3} MHz", sf.peak_frequency, sn.peak_frequency),
    );
    let mut mid_cfg = preset_config("fig5b").unwrap();
    mid_cfg.pair_distance_um = 9.0;
    let mid = pair(&mid_cfg);
    let cm = contrast(&mid_cfg, 10.0, &grid, &mid.n_ry);
    r.check("9e", "d=9 um N_Ry revival contrast < 0.05", cm < 0.05, format!("{cm:.4}"));
}

fn random_positions(rng: &mut ChaCha8Rng, n: usize, side: f64) -> Vec<[f64; 3]> {
    (0..n)
        .map(|_| [rng.random_range(0.0..side), rng.random_range(0.0..side), rng.random_range(0.0..side)])
        .collect()
}

fn brute_force(positions: &[[f64; 3]], p: &PhysicalParams, times: &[f64]) -> Vec<Vec<f64>> {
    let n = positions.len();
    let dim = 1usize << n;
    let mut h = DMatrix::<f64>::zeros(dim, dim);
    for s in 0..dim {
        for i in 0..n {
            h[(s ^ (1 << i), s)] += p.rabi / 2.0;
            for j in i + 1..n {
                if s & (1 << i) != 0 && s & (1 << j) != 0 {
                    h[(s, s)] += p.c6 / distance(&positions[i], &positions[j]).powi(6);
                }
            }
        }
    }
    let eig = h.symmetric_eigen();
    times
        .iter()
        .map(|&t| {
            let mut q = vec![0.0; n + 1];
            for s in 0..dim {
                let amp: Complex64 = (0..dim)
                    .map(|k| {
                        Complex64::from_polar(eig.eigenvectors[(s, k)] * eig.eigenvectors[(0, k)], -eig.eigenvalues[k] * t)
                    })
                    .sum();
                q[(s as u32).count_ones() as usize] += amp.norm_sqr();
            }
            q
        })
        .collect()
}

fn criterion_10(r: &mut Report) {
    let p = PhysicalParams::new(mhz_to_angular(1.0), mhz_to_angular(3.2e6)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let grid = uniform_grid(10.0, 101);
    let exact = PropagationOptions {
        energy_cutoff_factor: f64::INFINITY,
        ..PropagationOptions::default()
    };

    let mut norm = 0.0f64;
    for _ in 0..40 {
        let n = rng.random_range(1..=9);
        let m = rng.random_range(1..=3usize).min(n);
        let space = enumerate_basis(n, m).unwrap();
        let cfg = SpatialConfiguration::new(random_positions(&mut rng, n, 8.0)).unwrap();
        let (hist, _) = evolve_with(&build_hamiltonian(&p, &cfg, &space).unwrap(), &space, &grid, &PropagationOptions::default()).unwrap();
        norm = norm.max((0..grid.len()).map(|j| (hist.column_sum(j) - 1.0).abs()).fold(0.0, f64::max));
    }
    r.check("10a", "many-body norm conserved to 1e-8", norm <= 1e-8, format!("{norm:.1e} over 40 configurations"));

    let mut bf = 0.0f64;
    let times = uniform_grid(4.0, 41);
    for n in 1..=4 {
        for _ in 0..4 {
            let pos = random_positions(&mut rng, n, 14.0);
            let space = enumerate_basis(n, n).unwrap();
            let cfg = SpatialConfiguration::new(pos.clone()).unwrap();
            let (hist, _) = evolve_with(&build_hamiltonian(&p, &cfg, &space).unwrap(), &space, &times, &exact).unwrap();
            for (j, col) in brute_force(&pos, &p, &times).iter().enumerate() {
                for (k, v) in col.iter().enumerate() {
                    bf = bf.max((hist.q[k][j] - v).abs());
                }
            }
        }
    }
    r.check("10b", "full-Hilbert brute force, N <= 4, to 1e-7", bf <= 1e-7, format!("{bf:.1e}"));

    let (mut cons, mut comp) = (0.0f64, 0.0f64);
    for _ in 0..200 {
        let len = rng.random_range(1..15);
        let raw: Vec<f64> = (0..len).map(|_| rng.random::<f64>()).collect();
        let total: f64 = raw.iter().sum();
        let q: Vec<f64> = raw.iter().map(|x| x / total).collect();
        let (t1, t2) = (rng.random::<f64>(), rng.random::<f64>());
        let a = detection_transform(&q, &DetectionModel::new(t1).unwrap()).unwrap();
        let b = detection_transform(&a, &DetectionModel::new(t2).unwrap()).unwrap();
        let c = detection_transform(&q, &DetectionModel::new(t1 * t2).unwrap()).unwrap();
        cons = cons.max((a.iter().sum::<f64>() - q.iter().sum::<f64>()).abs());
        comp = comp.max(b.iter().zip(&c).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max));
    }
    r.check("10c", "detection conserves probability to 1e-12", cons <= 1e-12, format!("{cons:.1e}"));
    r.check("10d", "detection composition T1 then T2 = T1 T2 to 1e-12", comp <= 1e-12, format!("{comp:.1e}"));

    let mut small = preset_config("fig2b").unwrap();
    small.samples = 150;
    small.n_time_points = 101;
    small.nbar = 4.0;
    small.nmax = 10;
    let spec = scenario_spec(&small).unwrap();
    let reference = run_scenario(&spec, Execution::Sequential).unwrap();
    let same = [0, 2, 3]
        .iter()
        .all(|&w| run_scenario(&spec, Execution::Parallel { workers: w }).unwrap() == reference);
    let mut pcfg = preset_config("fig5c").unwrap();
    pcfg.samples = 60;
    pcfg.pair_distance_um = 9.0;
    let pspec = pair_spec(&pcfg).unwrap();
    let pref = two_ensemble_scenario(&pspec, Execution::Sequential).unwrap();
    let psame = two_ensemble_scenario(&pspec, Execution::Parallel { workers: 3 }).unwrap() == pref;
    r.check(
        "10e",
        "bit-identical results for 1, 2, 3 and default workers",
        same && psame,
        format!("ensemble {same}, superatom {psame}"),
    );

    // truncation m -> m+1 on q[0..m-1]
    let conv = |rng: &mut ChaCha8Rng, inside: bool| -> f64 {
        let mut worst = 0.0f64;
        for n in [4usize, 6, 8] {
            let rb = blockade_radius(&p, n).unwrap();
            let side = if inside { 4.0 } else { 20.0 };
            let pos = loop {
                let pos = random_positions(rng, n, side);
                let ok = (0..n).all(|i| {
                    (i + 1..n).all(|j| {
                        let d = distance(&pos[i], &pos[j]);
                        if inside { d < rb / 2.0 } else { d > rb / 2.0 }
                    })
                });
                if ok {
                    break pos;
                }
            };
            let cfg = SpatialConfiguration::new(pos).unwrap();
            for m in [2usize, 3] {
                let lo = enumerate_basis(n, m).unwrap();
                let hi = enumerate_basis(n, m + 1).unwrap();
                let a = evolve_with(&build_hamiltonian(&p, &cfg, &lo).unwrap(), &lo, &grid, &exact).unwrap().0;
                let b = evolve_with(&build_hamiltonian(&p, &cfg, &hi).unwrap(), &hi, &grid, &exact).unwrap().0;
                for k in 0..m {
                    worst = worst.max(a.q[k].iter().zip(&b.q[k]).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max));
                }
            }
        }
        worst
    };
    let inside = conv(&mut rng, true);
    r.check(
        "10f",
        "truncation m -> m+1 converged to 1e-4, all pairs within R_b/2",
        inside <= 1e-4,
        format!("{inside:.1e} (N = 4, 6, 8; m = 2, 3)"),
    );
    let outside = conv(&mut rng, false);
    r.check(
        "10g",
        "truncation m -> m+1 converged to 1e-4, all pairs beyond R_b/2",
        outside <= 1e-4,
        format!("{outside:.1e} (N = 4, 6, 8; m = 2, 3)"),
    );
}

fn main() {
    let started = Instant::now();
    let mut r = Report { passed: 0, failed: 0 };
    criteria_1_to_6(&mut r);
    criterion_7(&mut r);
    criterion_8(&mut r);
    criterion_9(&mut r);
    criterion_10(&mut r);
    println!(
        "acceptance: {} passed, {} failed ({:.0} s)",
        r.passed,
        r.failed,
        started.elapsed().as_secs_f64()
    );
    if r.failed > 0 && std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
