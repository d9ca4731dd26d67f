//! Scratch probe for fusion tuning (not shipped).

use camsim_core::calib::camera::{ring_fleet, Intrinsics};
use camsim_core::channel::BITS_PER_KB;
use camsim_core::fusion::*;
use camsim_core::scenario::{generate, Arena, WorldModel};
use camsim_core::sched::{AccuracyProxy, ProxyKind};
use nalgebra::Point2;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let n_cams: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(8);
    let fx: f64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(320.0);
    let height: f64 = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(5.5);
    let frac: f64 = args.get(4).map(|s| s.parse().unwrap()).unwrap_or(0.35);
    let bump: f64 = args.get(5).map(|s| s.parse().unwrap()).unwrap_or(0.3);
    let thr: f64 = args.get(6).map(|s| s.parse().unwrap()).unwrap_or(0.5);
    let setback: f64 = args.get(7).map(|s| s.parse().unwrap()).unwrap_or(1.0);
    let scene_seed: u64 = args.get(8).map(|s| s.parse().unwrap()).unwrap_or(17);
    let feat_seed: u64 = args.get(9).map(|s| s.parse().unwrap()).unwrap_or(99);

    let arena = Arena::new(12.0, 36.0, 0.1).unwrap();
    let cams = ring_fleet(
        n_cams,
        12.0,
        36.0,
        setback,
        height,
        frac,
        Intrinsics {
            fx,
            fy: fx,
            cx: 320.0,
            cy: 240.0,
        },
        640,
        480,
    )
    .unwrap();

    let proxy = AccuracyProxy {
        kind: ProxyKind::Streaming,
        gamma_max: 85.0,
        rate_scale_bits: 7.0 * BITS_PER_KB,
        floor: 10.0,
    };
    let cfg = FeatureConfig {
        bump_sigma_m: bump,
        ..FeatureConfig::default()
    };
    let warp = WarpTable::build(&cams, &arena, cfg.height, cfg.width, cfg.max_cell_span_m);

    // Resolve-coverage histogram (cameras that can actually contribute).
    let mut cover = vec![0usize; 10];
    for iy in (0..arena.grid_h).step_by(3) {
        for ix in (0..arena.grid_w).step_by(3) {
            let c = warp.contributor_count(iy * arena.grid_w + ix);
            cover[c.min(9)] += 1;
        }
    }
    println!("resolve-coverage histogram (0..9+): {cover:?}");
    if std::env::var("PROBE_MAP").is_ok() {
        // Coarse ASCII map: rows = y bands, cols = x bands.
        for band_y in 0..36 {
            let mut row = String::new();
            for band_x in 0..24 {
                let ix = band_x * arena.grid_w / 24 + arena.grid_w / 48;
                let iy = band_y * arena.grid_h / 36 + arena.grid_h / 72;
                let c = warp.contributor_count(iy * arena.grid_w + ix);
                row.push(char::from_digit(c.min(9) as u32, 10).unwrap());
            }
            println!("{row}");
        }
    }
    let trace = generate(&WorldModel::default(), &arena, 40.0, 0.5, scene_seed).unwrap();

    for rate_kb in [30.0, 10.0] {
        let mut tot = ModaReport {
            true_positives: 0,
            misses: 0,
            false_positives: 0,
            ground_truth_count: 0,
            moda_percent: 0.0,
        };
        let mut best_single = 0.0;
        let mut n_steps = 0;
        for step in (16..76).step_by(6) {
            let features: Vec<FeatureMap> = cams
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    extract_features(
                        c,
                        i,
                        &trace,
                        step,
                        Some(rate_kb * BITS_PER_KB),
                        &proxy,
                        &cfg,
                        feat_seed,
                    )
                })
                .collect();
            let gt = trace.positions_at(step);
            let score = |masks: &[bool]| -> ModaReport {
                let out = fuse(&features, masks, &warp).unwrap();
                let dets = detect_peaks(&out.map, thr, 0.3 / arena.cell_m()).unwrap();
                let pts: Vec<Point2<f64>> = dets.iter().map(|d| d.position).collect();
                moda(&pts, &gt, 0.5).unwrap()
            };
            let fused = score(&vec![true; n_cams]);
            if std::env::var("PROBE_MISSES").is_ok() && rate_kb == 30.0 {
                let out = fuse(&features, &vec![true; n_cams], &warp).unwrap();
                let dets = detect_peaks(&out.map, thr, 0.3 / arena.cell_m()).unwrap();
                for g in &gt {
                    let matched = dets.iter().any(|d| (d.position - g).norm() <= 0.5);
                    if !matched {
                        let n_see = cams.iter().filter(|c| c.sees_ground_point(g)).count();
                        let nearest = gt
                            .iter()
                            .filter(|o| (*o - g).norm() > 1e-9)
                            .map(|o| (o - g).norm())
                            .fold(f64::INFINITY, f64::min);
                        let ix = (((g.x + 6.0) / arena.cell_m()) as usize).min(arena.grid_w - 1);
                        let iy = (((g.y + 18.0) / arena.cell_m()) as usize).min(arena.grid_h - 1);
                        println!(
                            "  miss step={step} at ({:.2},{:.2}) cams_seeing={n_see} nearest_gt={:.2} fused_val={:.3}",
                            g.x, g.y, nearest, out.map.at(ix, iy)
                        );
                    }
                }
            }
            tot.true_positives += fused.true_positives;
            tot.misses += fused.misses;
            tot.false_positives += fused.false_positives;
            tot.ground_truth_count += fused.ground_truth_count;
            let bs = (0..n_cams)
                .map(|i| {
                    let mut m = vec![false; n_cams];
                    m[i] = true;
                    score(&m).moda_percent
                })
                .fold(f64::NEG_INFINITY, f64::max);
            best_single += bs;
            n_steps += 1;
        }
        let moda_pct = (1.0
            - (tot.misses + tot.false_positives) as f64 / tot.ground_truth_count.max(1) as f64)
            * 100.0;
        println!(
            "rate {rate_kb:>4} KB: fused TP={} miss={} FP={} GT={} MODA={moda_pct:.1}%  best-single(avg)={:.1}%",
            tot.true_positives,
            tot.misses,
            tot.false_positives,
            tot.ground_truth_count,
            best_single / n_steps as f64
        );
    }
}
