//! Scratch probe: how descriptor quantization depth shapes matching
//! precision and calibration error. Not part of the deliverable.

use camsim_cli::config::RunConfig;
use camsim_cli::sweep::{run_sweep, Axis, Family, SweepSpec};
use camsim_core::calib::{
    calibrate, match_precision, pose_errors, quantize_descriptor, select_reference,
    CalibrationSettings, FrameObservations,
};
use camsim_core::scenario::{generate, observe_frames};
use camsim_core::seeding::{derive_seed, tags};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

const BITS_PER_KB: f64 = 8192.0;

fn parse_rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines()
        .skip(1)
        .map(|l| l.split(',').map(|s| s.to_string()).collect())
        .collect()
}

/// (axis value, rep) -> (rot_deg, trans_m, status)
fn calib_map(csv: &str) -> BTreeMap<(String, u64), (f64, f64, String)> {
    let mut m = BTreeMap::new();
    for r in parse_rows(csv) {
        let rot = r[3].parse().unwrap_or(f64::NAN);
        let trans = r[4].parse().unwrap_or(f64::NAN);
        m.insert((r[0].clone(), r[1].parse().unwrap()), (rot, trans, r[2].clone()));
    }
    m
}

fn main() {
    let cfg = RunConfig::default();
    let fleet = cfg.fleet_model().unwrap();
    let arena = cfg.arena_model().unwrap();
    let world = cfg.world_model();
    let obs = cfg.observation_model();
    let steps = cfg.calibration_steps();

    // Part 1: matching precision vs bits (reference side quantized, like the
    // pipeline), top_n = 5, three scene seeds.
    println!("== precision vs bits (top_n=5) ==");
    for seed in [11u64, 12, 13] {
        let trace = generate(
            &world,
            &arena,
            cfg.scenario.duration_s,
            cfg.scenario.time_step_s,
            derive_seed(seed, &[tags::SCENARIO]),
        )
        .unwrap();
        let mut rng_a = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[tags::OBSERVATION, 1]));
        let mut rng_b = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[tags::OBSERVATION, 0]));
        let fa = observe_frames(&trace, &fleet[1], &steps, &obs, &mut rng_a);
        let fb = observe_frames(&trace, &fleet[0], &steps, &obs, &mut rng_b);
        let kp: usize = fb.iter().map(|f| f.keypoints.len()).sum();
        let q = |kb: f64| ((kb * 8192.0) / (128.0 * kp as f64)).floor();
        print!(
            "seed {seed} (ref kp {kp}, q@10/18/30KB={}/{}/{}):",
            q(10.0),
            q(18.0),
            q(30.0)
        );
        for bits in 1..=8u32 {
            let fbq: Vec<_> = fb
                .iter()
                .map(|f| {
                    let mut f = f.clone();
                    for k in &mut f.keypoints {
                        k.descriptor = quantize_descriptor(&k.descriptor, bits, obs.quant_range);
                    }
                    f
                })
                .collect();
            match match_precision(&fa, &fbq, 5) {
                Ok(p) => print!(" b{bits}={p:.2}"),
                Err(e) => print!(" b{bits}=err({e})"),
            }
        }
        match match_precision(&fa, &fb, 5) {
            Ok(p) => println!(" raw={p:.2}"),
            Err(e) => println!(" raw=err({e})"),
        }
    }

    // Part 2: budget 10 vs 30 KB, 20 reps, per-rep comparison.
    println!("\n== budget 10 vs 30 KB (20 reps) ==");
    let spec = SweepSpec {
        axis: Axis::Budget,
        values: vec![10.0, 30.0],
        repetitions: 20,
    };
    let csv = run_sweep(&cfg, Family::Calibration, &spec).unwrap();
    let m = calib_map(&csv);
    let mut viol = 0;
    let mut failed = 0;
    for rep in 0..20u64 {
        let lo = &m[&("10".to_string(), rep)];
        let hi = &m[&("30".to_string(), rep)];
        if lo.2 != "ok" || hi.2 != "ok" {
            failed += 1;
            println!("rep {rep}: status {} / {}", lo.2, hi.2);
            continue;
        }
        let ok = hi.0 <= lo.0 && hi.1 <= lo.1;
        if !ok {
            viol += 1;
        }
        println!(
            "rep {rep}: rot {:.3} -> {:.3}  trans {:.4} -> {:.4}  {}",
            lo.0,
            hi.0,
            lo.1,
            hi.1,
            if ok { "ok" } else { "VIOLATION" }
        );
    }
    println!("violations: {viol}/20, failed rows: {failed}");

    // Part 3: budget response curve, 8 reps.
    println!("\n== budget curve (means of 8 reps) ==");
    let spec = SweepSpec {
        axis: Axis::Budget,
        values: vec![6.0, 10.0, 14.0, 18.0, 22.0, 26.0, 30.0],
        repetitions: 8,
    };
    let csv = run_sweep(&cfg, Family::Calibration, &spec).unwrap();
    let m = calib_map(&csv);
    for v in ["6", "10", "14", "18", "22", "26", "30"] {
        let vals: Vec<_> = (0..8u64)
            .filter_map(|r| m.get(&(v.to_string(), r)))
            .filter(|t| t.2 == "ok")
            .collect();
        let n = vals.len() as f64;
        let rot = vals.iter().map(|t| t.0).sum::<f64>() / n;
        let trans = vals.iter().map(|t| t.1).sum::<f64>() / n;
        println!("budget {v:>2} KB: rot {rot:8.3}  trans {trans:8.4}  (n={})", vals.len());
    }

    // Part 4: top-N U-shape at candidate default budgets, 5 reps.
    for budget in [14.0, 18.0, 22.0, 26.0] {
        println!("\n== top_n curve at {budget} KB (means of 5 reps) ==");
        let mut c = cfg.clone();
        c.calibration.budget_kb = Some(budget);
        let spec = SweepSpec {
            axis: Axis::TopN,
            values: vec![1.0, 3.0, 5.0, 7.0, 10.0],
            repetitions: 5,
        };
        let csv = run_sweep(&c, Family::Calibration, &spec).unwrap();
        let m = calib_map(&csv);
        for v in ["1", "3", "5", "7", "10"] {
            let vals: Vec<_> = (0..5u64)
                .filter_map(|r| m.get(&(v.to_string(), r)))
                .filter(|t| t.2 == "ok")
                .collect();
            let n = vals.len() as f64;
            let rot = vals.iter().map(|t| t.0).sum::<f64>() / n;
            let trans = vals.iter().map(|t| t.1).sum::<f64>() / n;
            println!("top_n {v:>2}: rot {rot:8.3}  trans {trans:8.4}  (n={})", vals.len());
        }
        // rep-0 detail for the acceptance-style check
        let r0: Vec<_> = ["3", "5", "10"]
            .iter()
            .map(|v| m[&(v.to_string(), 0)].clone())
            .collect();
        println!(
            "rep0: rot 3/5/10 = {:.3}/{:.3}/{:.3}  trans = {:.4}/{:.4}/{:.4}",
            r0[0].0, r0[1].0, r0[2].0, r0[0].1, r0[1].1, r0[2].1
        );
    }

    // Part 4b: calibration-interval study at the pinned 30 KB budget,
    // per-rep monotonicity of both error columns.
    println!("\n== interval study at 30 KB (per-rep monotone check) ==");
    let mut c30 = cfg.clone();
    c30.calibration.budget_kb = Some(30.0);
    let spec = SweepSpec {
        axis: Axis::CalibrationInterval,
        values: vec![5.0, 10.0, 20.0, 40.0, 60.0],
        repetitions: 5,
    };
    let csv = run_sweep(&c30, Family::Calibration, &spec).unwrap();
    let m = calib_map(&csv);
    for rep in 0..5u64 {
        let series: Vec<_> = ["5", "10", "20", "40", "60"]
            .iter()
            .map(|v| m[&(v.to_string(), rep)].clone())
            .collect();
        let mono = series.windows(2).all(|w| {
            w[0].2 == "ok" && w[1].2 == "ok" && w[1].0 >= w[0].0 && w[1].1 >= w[0].1
        });
        print!("rep {rep}: {}", if mono { "monotone" } else { "BROKEN" });
        for s in &series {
            print!("  {:.2}/{:.3}", s.0, s.1);
        }
        println!();
    }

    // Part 5: the default-style scene for several master seeds,
    // calibrate across budget × top_n exactly like the calibrate command.
    for master in [7u64, 17, 23, 42] {
        println!("\n== master {master} scene: budget × top_n (e_pct, rot/trans in parens) ==");
        let trace = generate(
            &world,
            &arena,
            cfg.scenario.duration_s,
            cfg.scenario.time_step_s,
            derive_seed(master, &[tags::SCENARIO]),
        )
        .unwrap();
        let frames: Vec<Vec<FrameObservations>> = fleet
            .iter()
            .enumerate()
            .map(|(k, cam)| {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
                    master,
                    &[tags::OBSERVATION, k as u64],
                ));
                observe_frames(&trace, cam, &steps, &obs, &mut rng)
            })
            .collect();
        let recal = cfg.calibration.recal_camera;
        let others: Vec<usize> = (0..fleet.len()).filter(|&k| k != recal).collect();
        let candidates: Vec<&[FrameObservations]> =
            others.iter().map(|&k| frames[k].as_slice()).collect();
        let reference = others[select_reference(
            &frames[recal],
            &candidates,
            cfg.calibration.select_distance_threshold,
        )
        .expect("reference selected")];
        let ref_kp: usize = frames[reference].iter().map(|f| f.keypoints.len()).sum();
        println!("recal {recal}, reference {reference}, ref kp {ref_kp}");
        for budget in [18.0, 22.0, 26.0, 30.0] {
            let q = ((budget * BITS_PER_KB) / (128.0 * ref_kp as f64)).floor();
            print!("b{budget:>2} (q{q}):");
            for tn in [1usize, 3, 5, 7, 10] {
                let settings = CalibrationSettings {
                    top_n: tn,
                    budget_bits: Some((budget * BITS_PER_KB) as u64),
                    quant_range: obs.quant_range,
                };
                match calibrate(
                    &fleet[recal].intrinsics,
                    &fleet[reference],
                    &frames[reference],
                    &frames[recal],
                    &settings,
                ) {
                    Ok(out) => {
                        let e = pose_errors(&out.extrinsics, &fleet[recal].extrinsics);
                        let pct = camsim_core::calib::extrinsic_error(
                            &out.extrinsics,
                            &fleet[recal].extrinsics,
                        );
                        print!(" n{tn}={pct:.4}%({:.2}/{:.3})", e.rotation_deg, e.translation_m);
                    }
                    Err(err) => print!(" n{tn}=ERR({err})"),
                }
            }
            println!();
        }
    }
}
