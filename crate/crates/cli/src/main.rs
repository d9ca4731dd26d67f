//! `camsim` — experiment driver for the collaborative-perception
//! simulator.
//!
//! Subcommands drive each library layer end-to-end:
//!
//! * `simulate` — generate the seeded scene; write the trace and a
//!   per-step freshness timeseries.
//! * `calibrate` — re-calibrate cameras against a reference view; write
//!   the pose-error report and the pixel↔ground correspondences.
//! * `optimize` — run the per-phase and joint schedulers; write the
//!   chosen operating points and objective surfaces.
//! * `fuse` — fuse all camera views at one trace step; write the
//!   occupancy map (PGM) and the detection list.
//! * `sweep` — run a named preset or a single-axis sweep to CSV.
//! * `report` — aggregate sweep CSVs into summary tables.
//!
//! Exit codes: 0 on success; 1 with a JSON error record on stderr for
//! runtime failures; 2 with a JSON error record for bad command lines.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

use camsim_core::age::{aopt_cycle, AgentAgeInputs};
use camsim_core::calib::{calibrate, pose_errors, select_reference, FrameObservations};
use camsim_core::channel::{capacity, BITS_PER_KB};
use camsim_core::fusion::{detect_peaks, extract_features, fuse, moda, FeatureMap, WarpTable};
use camsim_core::scenario::{generate, observe_frames, visible_count, write_trace, ScenarioTrace};
use camsim_core::sched::{solve_p1_joint, solve_p2, solve_p3, GridSpec, ProxyKind, Solution};
use camsim_core::seeding::{derive_seed, tags};

use camsim_cli::config::{load_config, RunConfig};
use camsim_cli::error::{arg_error, CliError};
use camsim_cli::report::write_summaries;
use camsim_cli::sweep::{preset, presets, run_preset, run_sweep, Axis, SweepSpec};

#[derive(Parser)]
#[command(
    name = "camsim",
    version,
    about = "Deterministic simulator for multi-camera collaborative perception over constrained links"
)]
struct Cli {
    /// TOML run configuration; omitted → documented defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured output directory.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Overrides the configured master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the worker count (0 = one worker per core).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the seeded scene; write the trace and freshness timeseries.
    Simulate,
    /// Re-calibrate cameras against a reference view; write the error report.
    Calibrate,
    /// Run the per-phase and joint schedulers; write solutions and surfaces.
    Optimize,
    /// Fuse all views at one trace step; write occupancy map and detections.
    Fuse {
        /// Trace step to fuse (default: middle of the evaluation window).
        #[arg(long)]
        step: Option<usize>,
        /// Streaming rate in KB (default: the largest configured rate).
        #[arg(long)]
        rate_kb: Option<f64>,
    },
    /// Run a named preset or a single-axis sweep to CSV.
    Sweep {
        /// Preset name (see --list).
        #[arg(long, conflicts_with_all = ["axis", "values", "reps"])]
        preset: Option<String>,
        /// Axis: capacity | sampling_interval | calibration_interval |
        /// budget | loss_rate | top_n | fov_subset.
        #[arg(long)]
        axis: Option<String>,
        /// Comma-separated grid values (default: the axis's preset grid).
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
        /// Repetitions per grid value.
        #[arg(long, default_value_t = 3)]
        reps: usize,
        /// List the available presets and exit.
        #[arg(long)]
        list: bool,
    },
    /// Aggregate sweep CSVs into summary tables.
    Report {
        /// Directory to scan (default: the configured output directory).
        #[arg(long)]
        dir: Option<PathBuf>,
    },
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                std::process::exit(0);
            }
            eprintln!("{}", arg_error(e.to_string()).to_json());
            std::process::exit(2);
        }
    };
    if let Err(e) = run(cli) {
        eprintln!("{}", e.to_json());
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(path) => load_config(path)?,
        None => RunConfig::default(),
    };
    if let Some(dir) = &cli.output {
        cfg.output_dir = dir.display().to_string();
    }
    if let Some(seed) = cli.seed {
        cfg.master_seed = seed;
    }
    if let Some(workers) = cli.workers {
        cfg.workers = workers;
    }
    cfg.validate()?;

    match cli.command {
        Command::Simulate => cmd_simulate(&cfg),
        Command::Calibrate => cmd_calibrate(&cfg),
        Command::Optimize => cmd_optimize(&cfg),
        Command::Fuse { step, rate_kb } => cmd_fuse(&cfg, step, rate_kb),
        Command::Sweep {
            preset,
            axis,
            values,
            reps,
            list,
        } => cmd_sweep(&cfg, preset, axis, values, reps, list),
        Command::Report { dir } => cmd_report(&cfg, dir),
    }
}

fn out_dir(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let dir = PathBuf::from(&cfg.output_dir);
    std::fs::create_dir_all(&dir).map_err(|source| CliError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    Ok(dir)
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn make_trace(cfg: &RunConfig) -> Result<ScenarioTrace, CliError> {
    Ok(generate(
        &cfg.world_model(),
        &cfg.arena_model()?,
        cfg.scenario.duration_s,
        cfg.scenario.time_step_s,
        derive_seed(cfg.master_seed, &[tags::SCENARIO]),
    )?)
}

fn cmd_simulate(cfg: &RunConfig) -> Result<(), CliError> {
    let dir = out_dir(cfg)?;
    let trace = make_trace(cfg)?;
    let fleet = cfg.fleet_model()?;
    let cycle = cfg.cycle_model();

    let trace_path = dir.join("trace.txt");
    write_file(&trace_path, &write_trace(&trace))?;

    // Per-camera delays over the deterministic mean-gain links are
    // time-invariant; only the perceived-target counts vary per step.
    let delays: Vec<f64> = fleet
        .iter()
        .map(|cam| {
            let d = cam.extrinsics.camera_center().coords.norm();
            camsim_core::channel::total_delay(
                cycle.phase_costs.streaming_bits,
                &cfg.mean_link_at(d),
            )
        })
        .collect::<Result<_, _>>()?;

    let mut csv = String::from("t,aopt_st,aopt_ca,aopt_cy,k_hat,g_khat\n");
    let mut sum_cycle = 0.0;
    let n = trace.n_steps();
    for step in 0..n {
        let t = step as f64 * trace.time_step_s;
        let agents: Vec<AgentAgeInputs> = fleet
            .iter()
            .zip(&delays)
            .map(|(cam, &delay)| AgentAgeInputs {
                sampling_interval_s: cfg.cycle.sampling_interval_s,
                total_delay_s: delay,
                target_count: visible_count(&trace, cam, t) as u64,
            })
            .collect();
        let report = aopt_cycle(&agents, &cycle)?;
        sum_cycle += report.aopt_cycle;
        csv.push_str(&format!(
            "{t},{},{},{},{},{}\n",
            report.aopt_streaming,
            report.aopt_calibration,
            report.aopt_cycle,
            report
                .bottleneck_agent
                .map_or_else(|| "-1".to_string(), |k| k.to_string()),
            report.bottleneck_count,
        ));
    }
    let ts_path = dir.join("aopt_timeseries.csv");
    write_file(&ts_path, &csv)?;

    println!(
        "wrote {} ({} steps, {} targets, {} cameras)",
        trace_path.display(),
        n,
        trace.tracks.len(),
        fleet.len()
    );
    println!("wrote {}", ts_path.display());
    println!(
        "mean cycle AoPT over the horizon: {:.3} target-seconds",
        sum_cycle / n.max(1) as f64
    );
    Ok(())
}

fn cmd_calibrate(cfg: &RunConfig) -> Result<(), CliError> {
    let dir = out_dir(cfg)?;
    let trace = make_trace(cfg)?;
    let fleet = cfg.fleet_model()?;
    let steps = cfg.calibration_steps();
    let model = cfg.observation_model();
    let frames: Vec<Vec<FrameObservations>> = fleet
        .iter()
        .enumerate()
        .map(|(k, cam)| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
                cfg.master_seed,
                &[tags::OBSERVATION, k as u64],
            ));
            observe_frames(&trace, cam, &steps, &model, &mut rng)
        })
        .collect();
    let settings = cfg.calibration_settings();

    let pick_reference = |recal: usize| -> Result<usize, CliError> {
        match cfg.calibration.reference_camera {
            Some(r) => Ok(r),
            None => {
                let others: Vec<usize> = (0..fleet.len()).filter(|&k| k != recal).collect();
                let candidates: Vec<&[FrameObservations]> =
                    others.iter().map(|&k| frames[k].as_slice()).collect();
                let local = select_reference(
                    &frames[recal],
                    &candidates,
                    cfg.calibration.select_distance_threshold,
                )
                .ok_or(CliError::NoReference {
                    recal_camera: recal,
                })?;
                Ok(others[local])
            }
        }
    };

    let mut csv = String::from(
        "camera,reference,status,rotation_error_deg,translation_error_m,extrinsic_error_pct,\
         n_correspondences,frames_with_shortfall,mean_match_distance,error\n",
    );
    let mut correspondences_text: Option<String> = None;
    for k in 0..fleet.len() {
        if cfg.calibration.reference_camera == Some(k) {
            continue;
        }
        let row = pick_reference(k).and_then(|r| {
            let outcome = calibrate(
                &fleet[k].intrinsics,
                &fleet[r],
                &frames[r],
                &frames[k],
                &settings,
            )?;
            Ok((r, outcome))
        });
        match row {
            Ok((r, outcome)) => {
                let e = pose_errors(&outcome.extrinsics, &fleet[k].extrinsics);
                csv.push_str(&format!(
                    "{k},{r},ok,{},{},{},{},{},{},\n",
                    e.rotation_deg,
                    e.translation_m,
                    e.extrinsic_percent,
                    outcome.n_correspondences,
                    outcome.frames_with_shortfall,
                    outcome.mean_match_distance,
                ));
                println!(
                    "camera {k} vs reference {r}: rotation {:.4} deg, translation {:.4} m",
                    e.rotation_deg, e.translation_m
                );
                if k == cfg.calibration.recal_camera {
                    let mut text = String::from(
                        "# pixel-ground correspondences fed to the homography estimator\n\
                         # columns: camera recal_u_px recal_v_px world_x_m world_y_m match_distance\n",
                    );
                    for c in &outcome.correspondences {
                        text.push_str(&format!(
                            "{k} {} {} {} {} {}\n",
                            c.image_point.x,
                            c.image_point.y,
                            c.world_point.x,
                            c.world_point.y,
                            c.match_distance,
                        ));
                    }
                    correspondences_text = Some(text);
                }
            }
            Err(e) => {
                let msg = e.to_string().replace(['\n', '\r', ','], ";");
                csv.push_str(&format!("{k},,failed,,,,,,,{msg}\n"));
                println!("camera {k}: failed ({msg})");
            }
        }
    }
    let report_path = dir.join("calibration_report.csv");
    write_file(&report_path, &csv)?;
    println!("wrote {}", report_path.display());
    if let Some(text) = correspondences_text {
        let path = dir.join("correspondences.txt");
        write_file(&path, &text)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn solution_row(problem: &str, grid: &str, s: &Solution) -> String {
    format!(
        "{problem},{grid},ok,{},{},{},{},{},{},\n",
        s.bandwidth_hz,
        s.payload_bits / BITS_PER_KB,
        s.interval_s,
        s.objective,
        s.accuracy,
        s.feasible,
    )
}

fn cmd_optimize(cfg: &RunConfig) -> Result<(), CliError> {
    let dir = out_dir(cfg)?;
    let fleet = cfg.fleet_model()?;
    let d_mean = fleet
        .iter()
        .map(|c| c.extrinsics.camera_center().coords.norm())
        .sum::<f64>()
        / fleet.len().max(1) as f64;
    let link = cfg.mean_link_at(d_mean);
    let bounds = cfg.bounds_model()?;
    let grid = cfg.grid_model();
    let proxy_ca = cfg.proxy_model(ProxyKind::Calibration);
    let proxy_st = cfg.proxy_model(ProxyKind::Streaming);
    let weights = cfg.weights_model();
    let p_1 = cfg.cycle.calibration_prob;

    let grid_label = format!(
        "{}x{}x{}",
        grid.bandwidth_points, grid.payload_points, grid.interval_points
    );
    let mut csv = String::from(
        "problem,grid,status,bandwidth_hz,payload_kb,interval_s,objective,accuracy,feasible,error\n",
    );

    let p2 = solve_p2(&link, &bounds, &grid, &proxy_ca, &weights, p_1)?;
    csv.push_str(&solution_row("calibration", &grid_label, &p2));
    let p3 = solve_p3(&link, &bounds, &grid, &proxy_st, &weights, p_1)?;
    csv.push_str(&solution_row("streaming", &grid_label, &p3));

    // Worst-case perceived-target count over the fleet at mid-horizon
    // weights the joint objective.
    let trace = make_trace(cfg)?;
    let t_mid = 0.5 * cfg.scenario.duration_s;
    let bottleneck_count = fleet
        .iter()
        .map(|cam| visible_count(&trace, cam, t_mid) as u64)
        .max()
        .unwrap_or(0);

    // The joint oracle multiplies both candidate lists; fall back to a
    // coarse grid when the configured one exceeds its refusal limit.
    let (joint_grid, joint_label) = {
        let per_list = grid.bandwidth_points as u128
            * grid.payload_points as u128
            * (grid.interval_points as u128 + 1);
        if per_list * per_list > camsim_core::sched::JOINT_GRID_LIMIT {
            (GridSpec::coarse(), "8x8x8 (coarse fallback)".to_string())
        } else {
            (grid, grid_label.clone())
        }
    };
    match solve_p1_joint(
        &link,
        &bounds,
        &joint_grid,
        &proxy_ca,
        &proxy_st,
        &weights,
        p_1,
        bottleneck_count,
    ) {
        Ok(joint) => {
            csv.push_str(&solution_row(
                "joint_calibration",
                &joint_label,
                &joint.calibration,
            ));
            csv.push_str(&solution_row("joint_streaming", &joint_label, &joint.streaming));
            csv.push_str(&format!(
                "joint,{joint_label},ok,,,,{},,{},\n",
                joint.objective, joint.feasible
            ));
            println!(
                "joint objective {:.6} at g_khat = {bottleneck_count} ({joint_label} grid)",
                joint.objective
            );
        }
        Err(e) => {
            let msg = e.to_string().replace(['\n', '\r', ','], ";");
            csv.push_str(&format!("joint,{joint_label},failed,,,,,,,{msg}\n"));
            println!("joint solver failed: {msg}");
        }
    }
    let sol_path = dir.join("solutions.csv");
    write_file(&sol_path, &csv)?;

    // Objective surfaces for external plotting. Calibration group over
    // (payload, interval) at the most generous bandwidth; streaming
    // group over (bandwidth, payload) at the envelope-optimal sampling
    // interval, since its objective increases with the interval.
    let gamma0_ca = proxy_ca.default_threshold();
    let gamma0_st = proxy_st.default_threshold();
    let surface_n = 24;
    let log_axis = |(lo, hi): (f64, f64)| -> Vec<f64> {
        (0..surface_n)
            .map(|i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (surface_n - 1) as f64).exp())
            .collect()
    };
    let lin_axis = |(lo, hi): (f64, f64)| -> Vec<f64> {
        (0..surface_n)
            .map(|i| lo + (hi - lo) * i as f64 / (surface_n - 1) as f64)
            .collect()
    };

    let mut p2_surface = String::from("payload_kb,interval_s,objective,feasible\n");
    let cap_hi = capacity(&link.with_bandwidth(bounds.bandwidth_hz.1))?;
    for &d in &log_axis(bounds.payload_bits) {
        for &i in &lin_axis(bounds.calibration_interval_s) {
            let feasible = i >= d / cap_hi;
            let objective = p_1 * i - weights.lambda_ca * (proxy_ca.value(d) - gamma0_ca);
            p2_surface.push_str(&format!(
                "{},{i},{objective},{feasible}\n",
                d / BITS_PER_KB
            ));
        }
    }
    let p2_path = dir.join("p2_surface.csv");
    write_file(&p2_path, &p2_surface)?;

    let mut p3_surface = String::from("bandwidth_hz,payload_kb,interval_s,objective,feasible\n");
    for &b in &log_axis(bounds.bandwidth_hz) {
        let cap = capacity(&link.with_bandwidth(b))?;
        for &d in &log_axis(bounds.payload_bits) {
            let envelope = (d / cap).max(bounds.sampling_interval_s.0);
            let feasible = envelope <= bounds.sampling_interval_s.1;
            let d_total = d / cap + link.inference_delay_s;
            let objective = (p_1 / 2.0 + 1.0) * d_total + (1.0 - p_1) / 2.0 * envelope
                - weights.lambda_k * (proxy_st.value(d) - gamma0_st);
            p3_surface.push_str(&format!(
                "{b},{},{envelope},{objective},{feasible}\n",
                d / BITS_PER_KB
            ));
        }
    }
    let p3_path = dir.join("p3_surface.csv");
    write_file(&p3_path, &p3_surface)?;

    println!("wrote {}", sol_path.display());
    println!("wrote {}", p2_path.display());
    println!("wrote {}", p3_path.display());
    Ok(())
}

fn cmd_fuse(cfg: &RunConfig, step: Option<usize>, rate_kb: Option<f64>) -> Result<(), CliError> {
    let dir = out_dir(cfg)?;
    let trace = make_trace(cfg)?;
    let fleet = cfg.fleet_model()?;
    let arena = cfg.arena_model()?;
    let feature_cfg = cfg.feature_model();

    let eval = cfg.eval_steps();
    let step = step.unwrap_or(eval[eval.len() / 2]);
    if step >= trace.n_steps() {
        return Err(arg_error(format!(
            "step {step} outside the trace (0..{})",
            trace.n_steps()
        )));
    }
    let rate_kb = rate_kb.unwrap_or_else(|| {
        cfg.fusion
            .rates_kb
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max)
    });
    if !(rate_kb > 0.0) {
        return Err(arg_error("rate_kb must be positive"));
    }

    let warp = WarpTable::build(
        &fleet,
        &arena,
        feature_cfg.height,
        feature_cfg.width,
        feature_cfg.max_cell_span_m,
    );
    let proxy = cfg.proxy_model(ProxyKind::Streaming);
    let feature_seed = derive_seed(cfg.master_seed, &[tags::FEATURE]);
    let features: Vec<FeatureMap> = fleet
        .iter()
        .enumerate()
        .map(|(k, cam)| {
            extract_features(
                cam,
                k,
                &trace,
                step,
                Some(rate_kb * BITS_PER_KB),
                &proxy,
                &feature_cfg,
                feature_seed,
            )
        })
        .collect();
    let masks = vec![true; fleet.len()];
    let out = fuse(&features, &masks, &warp)?;
    let dets = detect_peaks(
        &out.map,
        cfg.fusion.threshold,
        cfg.fusion.min_separation_m / arena.cell_m(),
    )?;
    let gt = trace.positions_at(step);
    let points: Vec<nalgebra::Point2<f64>> = dets.iter().map(|d| d.position).collect();
    let m = moda(&points, &gt, cfg.fusion.match_radius_m)?;

    // 8-bit ASCII PGM of the fused occupancy, row 0 = iy 0.
    let mut pgm = format!("P2\n{} {}\n255\n", arena.grid_w, arena.grid_h);
    for iy in 0..arena.grid_h {
        let row: Vec<String> = (0..arena.grid_w)
            .map(|ix| {
                let v = (out.map.at(ix, iy).clamp(0.0, 1.0) * 255.0).round() as u8;
                v.to_string()
            })
            .collect();
        pgm.push_str(&row.join(" "));
        pgm.push('\n');
    }
    let pgm_path = dir.join("occupancy.pgm");
    write_file(&pgm_path, &pgm)?;

    let mut csv = String::from("ix,iy,x_m,y_m,score\n");
    for d in &dets {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            d.ix, d.iy, d.position.x, d.position.y, d.score
        ));
    }
    let det_path = dir.join("detections.csv");
    write_file(&det_path, &csv)?;

    println!("wrote {}", pgm_path.display());
    println!("wrote {}", det_path.display());
    println!(
        "step {step} at {rate_kb} KB: {} detections vs {} targets, MODA {:.2}%",
        dets.len(),
        gt.len(),
        m.moda_percent
    );
    Ok(())
}

fn cmd_sweep(
    cfg: &RunConfig,
    preset_name: Option<String>,
    axis: Option<String>,
    values: Option<Vec<f64>>,
    reps: usize,
    list: bool,
) -> Result<(), CliError> {
    if list {
        for p in presets() {
            println!("{:24} {}", p.name, p.title);
        }
        return Ok(());
    }
    let dir = out_dir(cfg)?;
    match (preset_name, axis) {
        (Some(name), None) => {
            let p = preset(&name)?;
            for path in run_preset(cfg, &p, &dir)? {
                println!("wrote {}", path.display());
            }
            Ok(())
        }
        (None, Some(axis)) => {
            let axis = Axis::parse(&axis)?;
            let spec = SweepSpec {
                axis,
                values: values.unwrap_or_else(|| axis.default_values()),
                repetitions: reps,
            };
            let csv = run_sweep(cfg, axis.default_family(), &spec)?;
            let path = dir.join(format!("sweep_{}.csv", axis.name()));
            write_file(&path, &csv)?;
            println!("wrote {}", path.display());
            Ok(())
        }
        (None, None) => Err(arg_error(
            "nothing to run: pass --preset NAME, --axis NAME, or --list",
        )),
        (Some(_), Some(_)) => unreachable!("clap rejects --preset with --axis"),
    }
}

fn cmd_report(cfg: &RunConfig, dir: Option<PathBuf>) -> Result<(), CliError> {
    let dir = dir.unwrap_or_else(|| PathBuf::from(&cfg.output_dir));
    let written = write_summaries(&dir)?;
    if written.is_empty() {
        println!("no CSV files found in {}", dir.display());
    }
    for path in &written {
        println!("wrote {}", path.display());
    }
    Ok(())
}
