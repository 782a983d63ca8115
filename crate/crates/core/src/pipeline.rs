//! End-to-end orchestration: simulate days, sense, aggregate features,
//! build the lagged dataset, fit the four models, and score them, with
//! plain-CSV artifacts between stages and a reproducibility manifest.

use std::collections::HashMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::arx::{
    build_design, split_by_month, write_columns_manifest, write_design_csv, DesignMatrix,
};
use crate::config::{seed_for, ScenarioConfig};
use crate::demand::{generate_arrivals, DemandProfile};
use crate::error::{Error, Result};
use crate::eval::{
    evaluate_models, write_hist_csv, write_predictions_csv, write_report_csv, write_stars_csv,
    EvaluationReport,
};
use crate::features::{
    detect_queue, fill_missing, flows, segment_travel_times, work_zone_travel_time,
    wz_end_acceleration, ExitPassageSet, FeatureBuilder, FeatureWindow, FillContext, QueueObs,
    RawWindow, Window, WINDOWS_PER_DAY, WZ_END_BAND_MI,
};
use crate::learners::{
    fit_elastic_net, fit_mars, fit_ols, fit_stepwise, save_models, FittedModel,
};
use crate::sensing::{PassageRecord, SensingField, TrajectoryPoint, VehicleTrace};
use crate::sim::{ExitRecord, World};

/// Hard cap on the post-demand drain phase (simulated seconds).
const DRAIN_CAP_S: f64 = 7200.0;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DayDiagnostics {
    pub month: u32,
    pub replication: u32,
    pub entered: u64,
    pub exited: u64,
    pub present_at_end: usize,
    pub conservation_ok: bool,
    pub point_conservation_ok: bool,
    pub max_q_length_mi: f64,
    pub rsu1_passages: usize,
}

#[derive(Debug)]
pub struct DayResult {
    pub filled: Vec<FeatureWindow>,
    pub diag: DayDiagnostics,
}

/// Which per-day CSVs `run_day` writes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DumpLevel {
    None,
    /// Passages, window snapshots, exits (small files).
    Light,
    /// Light plus full 1 Hz trajectories and received uploads (large).
    Full,
}

fn dump_name(kind: &str, month: u32, replication: u32) -> String {
    format!("{kind}_m{month:02}_r{replication:02}.csv")
}

/// Simulate one (month, replication) day and aggregate its 288 windows.
pub fn run_day(
    cfg: &ScenarioConfig,
    profile: &DemandProfile,
    replication: u32,
    dump_dir: Option<&Path>,
    dump_level: DumpLevel,
) -> Result<DayResult> {
    let month = profile.month;
    let world_seed = seed_for(cfg.seed, month, replication, 0);
    let demand_seed = seed_for(cfg.seed, month, replication, 1);
    let sensing_seed = seed_for(cfg.seed, month, replication, 2);

    let mut world = World::new(cfg.geometry.clone(), cfg.driver.clone(), cfg.sim.dt_s, world_seed);
    let mut sensing = SensingField::new(cfg.rsus(), cfg.sensing.penetration, sensing_seed);
    let mut builder = FeatureBuilder::new(
        month,
        replication,
        cfg.mode,
        &cfg.geometry,
        cfg.sensing.coverage_radius_mi,
    );

    use rand::SeedableRng;
    let mut demand_rng = rand_chacha::ChaCha8Rng::seed_from_u64(demand_seed);
    let duration_s = cfg.sim.duration_h * 3600.0;
    for hour in 0..(cfg.sim.duration_h.ceil() as usize).min(24) {
        for a in generate_arrivals(profile, hour, cfg.geometry.lanes_upstream, &mut demand_rng) {
            if a.time_s < duration_s {
                world.schedule_arrival(a.lane, a.time_s);
            }
        }
    }

    let mut traj_writer = match (dump_dir, dump_level) {
        (Some(dir), DumpLevel::Full) => {
            let mut w = csv::Writer::from_path(dir.join(dump_name("trajectories", month, replication)))?;
            w.write_record(["vehicle_id", "time_s", "lane", "position_mi", "speed_mph", "accel_mphps"])?;
            Some(w)
        }
        _ => None,
    };
    let mut snap_rows: Vec<(u32, u64, f64, f64)> = Vec::new();
    let mut exits_all: Vec<ExitRecord> = Vec::new();
    let mut received_rows: Vec<(u64, f64, f64, f64, f64, u8)> = Vec::new();

    let day_windows_end = (cfg.sim.duration_h * 12.0).round().min(f64::from(WINDOWS_PER_DAY)) as u32;
    let mut cur_window = 0u32;
    let snapshot = builder.open_window(&world, &sensing);
    if dump_level != DumpLevel::None {
        if let Some(s) = &snapshot {
            snap_rows.extend(s.iter().map(|(id, p, v)| (0u32, *id, *p, *v)));
        }
    }

    let log_world = |world: &World,
                     sensing: &mut SensingField,
                     traj_writer: &mut Option<csv::Writer<std::fs::File>>|
     -> Result<()> {
        for rec in world.traj_records() {
            sensing.ingest_log(&rec);
            if let Some(w) = traj_writer {
                w.write_record([
                    rec.vehicle_id.to_string(),
                    rec.time_s.to_string(),
                    rec.lane.to_string(),
                    rec.position_mi.to_string(),
                    rec.speed_mph.to_string(),
                    rec.accel_mphps.to_string(),
                ])?;
            }
        }
        Ok(())
    };
    log_world(&world, &mut sensing, &mut traj_writer)?;
    let mut last_log = 0.0;

    let mut max_q = 0.0f64;
    loop {
        let t = world.time_s();
        if t >= duration_s && world.present() == 0 && world.pending_count() == 0 {
            break;
        }
        if t >= duration_s + DRAIN_CAP_S {
            log::warn!(
                "month {month} rep {replication}: drain cap hit with {} vehicles on network",
                world.present()
            );
            break;
        }
        world.advance()?;
        sensing.detect_and_transmit(&world);
        for e in world.step_exits() {
            sensing.on_exit(e.vehicle_id);
            exits_all.push(*e);
        }
        if world.time_s() - last_log >= 1.0 - 1e-9 {
            log_world(&world, &mut sensing, &mut traj_writer)?;
            last_log = world.time_s();
        }
        let w_new = (world.time_s() / 300.0).floor() as u32;
        if w_new > cur_window && cur_window < day_windows_end {
            let exited_ids = builder.close_window(cur_window, &mut sensing);
            if let Some(row) = builder.rows().last() {
                max_q = max_q.max(row.q_length.unwrap_or(0.0));
            }
            for id in exited_ids {
                if dump_level == DumpLevel::Full {
                    if let Some(trace) = sensing.trace(id) {
                        for seg in &trace.segments {
                            for p in &seg.points {
                                received_rows
                                    .push((id, p.time_s, p.position_mi, p.speed_mph, p.accel_mphps, seg.rsu_id));
                            }
                        }
                    }
                }
                sensing.prune_vehicle(id);
            }
            if w_new < day_windows_end {
                let snapshot = builder.open_window(&world, &sensing);
                if dump_level != DumpLevel::None {
                    if let Some(s) = &snapshot {
                        snap_rows.extend(s.iter().map(|(id, p, v)| (w_new, *id, *p, *v)));
                    }
                }
            }
            cur_window = w_new.min(day_windows_end);
        }
    }

    let raw = builder.finish();
    if raw.len() != day_windows_end as usize {
        return Err(Error::Stage {
            stage: "simulate".into(),
            message: format!(
                "month {month} rep {replication}: {} windows built, expected {day_windows_end}",
                raw.len()
            ),
        });
    }
    let rsu_positions: Vec<(u8, f64)> =
        cfg.rsus().iter().map(|r| (r.rsu_id, r.position_mi)).collect();
    let ctx = FillContext::new(&cfg.geometry, &rsu_positions);
    let filled = fill_missing(&raw, &ctx);

    let diag = DayDiagnostics {
        month,
        replication,
        entered: world.entered(),
        exited: world.exited(),
        present_at_end: world.present(),
        conservation_ok: world.conservation_holds(),
        point_conservation_ok: sensing.point_conservation_holds(),
        max_q_length_mi: max_q,
        rsu1_passages: sensing.passages_at(1).len(),
    };

    if let Some(dir) = dump_dir {
        if dump_level != DumpLevel::None {
            sensing.sort_passages();
            let mut w = csv::Writer::from_path(dir.join(dump_name("passages", month, replication)))?;
            w.write_record(["rsu_id", "vehicle_id", "timestamp_s"])?;
            for rsu in sensing.rsus().to_vec() {
                for p in sensing.passages_at(rsu.rsu_id) {
                    w.write_record([
                        p.rsu_id.to_string(),
                        p.vehicle_id.to_string(),
                        p.timestamp_s.to_string(),
                    ])?;
                }
            }
            w.flush()?;

            let mut w = csv::Writer::from_path(dir.join(dump_name("snapshots", month, replication)))?;
            w.write_record(["t", "vehicle_id", "position_mi", "speed_mph"])?;
            for (t, id, pos, speed) in &snap_rows {
                w.write_record([t.to_string(), id.to_string(), pos.to_string(), speed.to_string()])?;
            }
            w.flush()?;

            let mut w = csv::Writer::from_path(dir.join(dump_name("exits", month, replication)))?;
            w.write_record(["vehicle_id", "entered_s", "exited_s"])?;
            for e in &exits_all {
                w.write_record([
                    e.vehicle_id.to_string(),
                    e.entered_s.to_string(),
                    e.exited_s.to_string(),
                ])?;
            }
            w.flush()?;
        }
        if dump_level == DumpLevel::Full {
            // Vehicles still on the network kept their traces; flush them too.
            let mut rest: Vec<u64> = sensing.traces().keys().copied().collect();
            rest.sort_unstable();
            for id in rest {
                if let Some(trace) = sensing.trace(id) {
                    for seg in &trace.segments {
                        for p in &seg.points {
                            received_rows
                                .push((id, p.time_s, p.position_mi, p.speed_mph, p.accel_mphps, seg.rsu_id));
                        }
                    }
                }
            }
            let mut w = csv::Writer::from_path(dir.join(dump_name("received", month, replication)))?;
            w.write_record(["vehicle_id", "time_s", "position_mi", "speed_mph", "accel_mphps", "receiving_rsu"])?;
            for (id, t, pos, speed, acc, rsu) in &received_rows {
                w.write_record([
                    id.to_string(),
                    t.to_string(),
                    pos.to_string(),
                    speed.to_string(),
                    acc.to_string(),
                    rsu.to_string(),
                ])?;
            }
            w.flush()?;
        }
        if let Some(mut w) = traj_writer {
            w.flush()?;
        }
    }

    Ok(DayResult { filled, diag })
}

/// Simulate every configured (month, replication) day, in parallel, merged
/// deterministically by (month, replication).
pub fn simulate_features(
    cfg: &ScenarioConfig,
    dump_dir: Option<&Path>,
    dump_level: DumpLevel,
) -> Result<(Vec<FeatureWindow>, Vec<DayDiagnostics>)> {
    let profiles = cfg.profiles()?;
    let mut jobs: Vec<(&DemandProfile, u32)> = Vec::new();
    for p in &profiles {
        for r in 0..cfg.replications {
            jobs.push((p, r));
        }
    }
    jobs.sort_by_key(|(p, r)| (p.month, *r));
    let results: Vec<Result<DayResult>> = jobs
        .par_iter()
        .map(|(p, r)| run_day(cfg, p, *r, dump_dir, dump_level))
        .collect();
    let mut features = Vec::new();
    let mut diags = Vec::new();
    for res in results {
        let day = res?;
        if !day.diag.conservation_ok || !day.diag.point_conservation_ok {
            return Err(Error::Stage {
                stage: "simulate".into(),
                message: format!(
                    "month {} rep {}: conservation violated (vehicles {}, points {})",
                    day.diag.month,
                    day.diag.replication,
                    day.diag.conservation_ok,
                    day.diag.point_conservation_ok
                ),
            });
        }
        features.extend(day.filled);
        diags.push(day.diag);
    }
    Ok((features, diags))
}

// ---------------------------------------------------------------------------
// Offline feature rebuild from simulate dumps.

/// Rebuild one day's feature rows from `simulate` dumps (passages, received,
/// snapshots), without rerunning the simulator. Requires `DumpLevel::Full`
/// dumps for the trajectory-based variables.
pub fn rebuild_day_features(
    cfg: &ScenarioConfig,
    dump_dir: &Path,
    month: u32,
    replication: u32,
) -> Result<Vec<FeatureWindow>> {
    let read = |kind: &str| -> PathBuf { dump_dir.join(dump_name(kind, month, replication)) };

    // Passages, grouped per RSU (sorted) and per vehicle.
    let mut per_rsu: HashMap<u8, Vec<PassageRecord>> = HashMap::new();
    let mut per_vehicle: HashMap<u64, Vec<(u8, f64)>> = HashMap::new();
    {
        let mut rdr = csv::Reader::from_path(read("passages"))?;
        for rec in rdr.deserialize() {
            let p: PassageRecord = rec?;
            per_vehicle.entry(p.vehicle_id).or_default().push((p.rsu_id, p.timestamp_s));
            per_rsu.entry(p.rsu_id).or_default().push(p);
        }
        for v in per_rsu.values_mut() {
            v.sort_by(|a, b| a.timestamp_s.total_cmp(&b.timestamp_s));
        }
        for v in per_vehicle.values_mut() {
            v.sort_by(|a, b| a.1.total_cmp(&b.1));
        }
    }

    // Received uploads: full per-vehicle traces plus the RSU-1 slice.
    #[derive(Deserialize)]
    struct ReceivedRow {
        vehicle_id: u64,
        time_s: f64,
        position_mi: f64,
        speed_mph: f64,
        accel_mphps: f64,
        receiving_rsu: u8,
    }
    let mut traces: HashMap<u64, VehicleTrace> = HashMap::new();
    let mut rsu1_points: HashMap<u64, Vec<TrajectoryPoint>> = HashMap::new();
    {
        let path = read("received");
        if !path.exists() {
            return Err(Error::Stage {
                stage: "features".into(),
                message: format!(
                    "{} not found; rerun `simulate` with full dumps",
                    path.display()
                ),
            });
        }
        let mut rdr = csv::Reader::from_path(path)?;
        for rec in rdr.deserialize() {
            let r: ReceivedRow = rec?;
            let point = TrajectoryPoint {
                time_s: r.time_s,
                position_mi: r.position_mi,
                speed_mph: r.speed_mph,
                accel_mphps: r.accel_mphps,
            };
            let trace = traces.entry(r.vehicle_id).or_default();
            if trace.segments.is_empty() {
                trace.segments.push(crate::sensing::ReceivedSegment {
                    rsu_id: 0,
                    received_at_s: 0.0,
                    points: Vec::new(),
                });
            }
            trace.segments[0].points.push(point);
            if r.receiving_rsu == 1 {
                rsu1_points.entry(r.vehicle_id).or_default().push(point);
            }
        }
        for t in traces.values_mut() {
            t.segments[0]
                .points
                .sort_by(|a, b| a.time_s.total_cmp(&b.time_s));
        }
    }

    // Window-start snapshots.
    let mut snapshots: HashMap<u32, Vec<(u64, f64, f64)>> = HashMap::new();
    {
        let mut rdr = csv::Reader::from_path(read("snapshots"))?;
        for rec in rdr.records() {
            let rec = rec?;
            let w: u32 = rec[0].parse().map_err(|_| Error::Shape("bad snapshot row".into()))?;
            let id: u64 = rec[1].parse().map_err(|_| Error::Shape("bad snapshot row".into()))?;
            let pos: f64 = rec[2].parse().map_err(|_| Error::Shape("bad snapshot row".into()))?;
            let speed: f64 = rec[3].parse().map_err(|_| Error::Shape("bad snapshot row".into()))?;
            snapshots.entry(w).or_default().push((id, pos, speed));
        }
        for s in snapshots.values_mut() {
            s.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        }
    }

    let wz_start = cfg.geometry.wz_start();
    let wz_end = cfg.geometry.wz_end();
    let empty: Vec<PassageRecord> = Vec::new();
    let rsu12 = per_rsu.get(&12).unwrap_or(&empty);
    let rsu1 = per_rsu.get(&1).unwrap_or(&empty);
    let day_windows_end = (cfg.sim.duration_h * 12.0).round().min(f64::from(WINDOWS_PER_DAY)) as u32;

    let mut raw_rows = Vec::with_capacity(day_windows_end as usize);
    for index in 0..day_windows_end {
        let w = Window::at(index);
        let (up, down) = flows(rsu12, rsu1, &w);
        let lo = rsu1.partition_point(|p| p.timestamp_s < w.start_s);
        let hi = rsu1.partition_point(|p| p.timestamp_s < w.end_s);
        let exits: Vec<ExitPassageSet> = rsu1[lo..hi]
            .iter()
            .filter_map(|p| {
                per_vehicle
                    .get(&p.vehicle_id)
                    .and_then(|ps| ExitPassageSet::from_passages(p.vehicle_id, ps))
            })
            .collect();
        let tt_seg = segment_travel_times(&exits);

        let segs: Vec<crate::sensing::ReceivedSegment> = rsu1[lo..hi]
            .iter()
            .filter_map(|p| {
                rsu1_points.get(&p.vehicle_id).map(|pts| crate::sensing::ReceivedSegment {
                    rsu_id: 1,
                    received_at_s: p.timestamp_s,
                    points: pts.clone(),
                })
            })
            .collect();
        let seg_refs: Vec<&crate::sensing::ReceivedSegment> = segs.iter().collect();
        let wz_end_acc = wz_end_acceleration(&seg_refs, wz_end - WZ_END_BAND_MI, wz_end);

        let queue_obs = match snapshots.get(&index) {
            None => QueueObs::Unavailable,
            Some(snap) => match detect_queue(snap) {
                None => QueueObs::NoQueue,
                Some(det) => QueueObs::Queue(det),
            },
        };
        let (q_length, start_queue, q_vehicles, tail) = match &queue_obs {
            QueueObs::Unavailable => (None, None, 0, None),
            QueueObs::NoQueue => (Some(0.0), None, 0, None),
            QueueObs::Queue(det) => (
                Some(det.q_length_mi),
                Some(det.start_queue_mi(wz_start)),
                det.member_ids.len() as u32,
                Some(det.tail_pos_mi),
            ),
        };
        let tt_wz =
            work_zone_travel_time(tail, &exits, &traces, cfg.sensing.coverage_radius_mi);

        raw_rows.push(RawWindow {
            month,
            replication,
            window: index,
            tt_seg,
            upstream_flow: up,
            downstream_flow: down,
            wz_end_acc,
            q_length,
            start_queue,
            q_vehicles,
            tt_wz,
        });
    }

    let rsu_positions: Vec<(u8, f64)> =
        cfg.rsus().iter().map(|r| (r.rsu_id, r.position_mi)).collect();
    Ok(fill_missing(&raw_rows, &FillContext::new(&cfg.geometry, &rsu_positions)))
}

// ---------------------------------------------------------------------------
// Full pipeline with manifest.

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageStatus {
    pub name: String,
    pub status: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub crate_version: String,
    pub config_sha256: String,
    pub config_toml: String,
    pub base_seed: u64,
    pub seed_scheme: String,
    pub months: Vec<u32>,
    pub replications: u32,
    pub mode: String,
    pub feature_rows: usize,
    pub design_rows: usize,
    pub train_rows: usize,
    pub test_rows: usize,
    pub stages: Vec<StageStatus>,
    pub day_diagnostics: Vec<DayDiagnostics>,
}

#[derive(Debug)]
pub struct PipelineSummary {
    pub out_dir: PathBuf,
    pub feature_rows: usize,
    pub design_rows: usize,
    pub train_rows: usize,
    pub test_rows: usize,
    pub report: Option<EvaluationReport>,
    pub evaluation_skipped: bool,
}

pub fn config_sha256(cfg: &ScenarioConfig) -> Result<String> {
    let text = cfg.to_toml()?;
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    let digest = hasher.finalize();
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

fn write_manifest(path: &Path, manifest: &RunManifest) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    let text = serde_json::to_string_pretty(manifest)?;
    f.write_all(text.as_bytes())?;
    f.write_all(b"\n")?;
    Ok(())
}

/// Run simulate -> features -> design -> fit -> evaluate, writing every
/// artifact under `out`. Identical configs produce byte-identical outputs.
pub fn run_pipeline(cfg: &ScenarioConfig, out: &Path) -> Result<PipelineSummary> {
    cfg.validate()?;
    std::fs::create_dir_all(out)?;
    let mut stages: Vec<StageStatus> = Vec::new();
    let mut manifest = RunManifest {
        crate_version: env!("CARGO_PKG_VERSION").to_string(),
        config_sha256: config_sha256(cfg)?,
        config_toml: cfg.to_toml()?,
        base_seed: cfg.seed,
        seed_scheme: "splitmix64(base ^ month<<40 ^ replication<<16 ^ stream)".to_string(),
        months: cfg.months.clone(),
        replications: cfg.replications,
        mode: match cfg.mode {
            crate::features::QueueMode::Oracle => "oracle".to_string(),
            crate::features::QueueMode::V2i => "v2i".to_string(),
        },
        feature_rows: 0,
        design_rows: 0,
        train_rows: 0,
        test_rows: 0,
        stages: Vec::new(),
        day_diagnostics: Vec::new(),
    };

    macro_rules! stage {
        ($name:expr, $body:expr) => {{
            match $body {
                Ok(v) => {
                    stages.push(StageStatus { name: $name.to_string(), status: "ok".to_string() });
                    v
                }
                Err(e) => {
                    stages.push(StageStatus { name: $name.to_string(), status: format!("failed: {e}") });
                    manifest.stages = stages.clone();
                    let _ = write_manifest(&out.join("run_manifest.json"), &manifest);
                    return Err(Error::Stage { stage: $name.to_string(), message: e.to_string() });
                }
            }
        }};
    }

    let (features, diags) = stage!("simulate", simulate_features(cfg, None, DumpLevel::None));
    manifest.day_diagnostics = diags;
    manifest.feature_rows = features.len();
    stage!("features", {
        crate::features::write_features_csv(&out.join("features.csv"), &features)
            .and_then(|_| crate::features::write_queue_aux_csv(&out.join("queue_aux.csv"), &features))
    });

    let arx_cfg = cfg.arx.to_arx_config();
    let design = stage!("design", build_design(&features, &arx_cfg));
    manifest.design_rows = design.n_rows();
    stage!("design_csv", {
        write_design_csv(&out.join("design.csv"), &design)
            .and_then(|_| write_columns_manifest(&out.join("design_columns.csv"), &design.labels))
    });

    let (train, test) = split_by_month(&design);
    manifest.train_rows = train.n_rows();
    manifest.test_rows = test.n_rows();

    let mut report = None;
    let mut skipped = false;
    if test.n_rows() == 0 || train.n_rows() <= design.n_cols() + 1 {
        log::warn!(
            "evaluation skipped: train rows {}, test rows {}",
            train.n_rows(),
            test.n_rows()
        );
        stages.push(StageStatus { name: "fit".into(), status: "skipped".into() });
        stages.push(StageStatus { name: "evaluate".into(), status: "skipped".into() });
        skipped = true;
    } else {
        let models = stage!("fit", fit_all(&train, cfg));
        stage!("models_csv", save_models(&out.join("models.json"), &models));
        let rep = stage!(
            "evaluate",
            evaluate_models(&models, &test, cfg.output.hist_bin_width_s)
        );
        stage!("evaluate_csv", {
            write_report_csv(&out.join("report.csv"), &rep)
                .and_then(|_| write_stars_csv(&out.join("stars.csv"), &rep))
                .and_then(|_| write_hist_csv(&out.join("hist.csv"), &rep))
                .and_then(|_| write_predictions_csv(&out.join("predictions.csv"), &rep))
        });
        report = Some(rep);
    }

    manifest.stages = stages;
    write_manifest(&out.join("run_manifest.json"), &manifest)?;

    Ok(PipelineSummary {
        out_dir: out.to_path_buf(),
        feature_rows: features.len(),
        design_rows: design.n_rows(),
        train_rows: train.n_rows(),
        test_rows: test.n_rows(),
        report,
        evaluation_skipped: skipped,
    })
}

/// Fit the four models concurrently (each fit is single-threaded).
pub fn fit_all(train: &DesignMatrix, cfg: &ScenarioConfig) -> Result<Vec<FittedModel>> {
    let ((ols, stepwise), (enet, mars)) = rayon::join(
        || rayon::join(|| fit_ols(train), || fit_stepwise(train)),
        || {
            rayon::join(
                || fit_elastic_net(train, &cfg.learners.elastic_net),
                || fit_mars(train, &cfg.learners.mars),
            )
        },
    );
    Ok(vec![ols?.0, stepwise?.0, enet?.0, mars?.0])
}
