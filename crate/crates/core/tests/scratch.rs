use wz_core::sim::{DriverParams, RoadGeometry, World};

#[test]
fn probe_taper_throughput() {
    let g = RoadGeometry::default();
    let mut w = World::new(g.clone(), DriverParams::default(), 0.5, 3);
    let mut t = 0.0;
    let mut k = 0u64;
    while t < 10800.0 {
        w.schedule_arrival((k % 2) as usize, t);
        k += 1;
        t += 3600.0 / 1500.0;
    }
    let mut exits_this_bin = 0u64;
    let wz_start = g.wz_start();
    for step in 0..(12600.0_f64 / 0.5) as usize {
        w.advance().unwrap();
        exits_this_bin += w.step_exits().len() as u64;
        if (step + 1) % 600 == 0 {
            let min5 = (step + 1) / 600;
            if min5 % 6 == 0 {
                let lane1: Vec<_> = w.lanes()[1].iter().filter(|v| v.position_mi < wz_start).collect();
                let l1f = w.lanes()[1].first().map(|v| (wz_start - v.position_mi, v.speed_mph));
                println!("t={:>5.0}s exits/5min={:>3} (={:>4.0}/h) present={:>4} lane1_up={:>4} l1_front={:?}",
                    w.time_s(), exits_this_bin, exits_this_bin as f64 * 12.0, w.present(), lane1.len(),
                    l1f.map(|(d, s)| format!("{d:.3}mi @ {s:.1}mph")));
            }
            exits_this_bin = 0;
        }
    }
}
