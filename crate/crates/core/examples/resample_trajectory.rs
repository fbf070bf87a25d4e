//! Irregular GPS fixes, split at gaps and put on the 10 Hz grid.

use aekmc::ingest::{resample_on_ticks, resample_uniform, split_on_gaps, Trajectory, TrajectoryPoint};

fn main() -> aekmc::Result<()> {
    let times = [0.0, 0.13, 0.31, 0.42, 0.58, 0.71, 2.9, 3.05, 3.33];
    let points = times
        .iter()
        .enumerate()
        .map(|(i, &t)| TrajectoryPoint {
            t,
            lat: 42.28 + i as f64 * 1e-5,
            lon: -83.74,
            speed: 5.0 + i as f64 * 0.1,
            heading: if i < 6 { 350.0 } else { 10.0 },
        })
        .collect();
    let traj = Trajectory::new("trip-1", "veh-1", points);

    let first = resample_uniform(&traj, 10.0)?;
    println!("uniform from t0: {} samples, last at {:.2} s", first.len(), first.points.last().unwrap().t);

    for seg in split_on_gaps(&traj, 1.0) {
        let r = resample_on_ticks(&seg, 10.0)?;
        println!("segment {:.2}..{:.2} s -> {} ticks", seg.points[0].t, seg.points.last().unwrap().t, r.len());
        for p in &r.points {
            println!("  t={:.1} lat={:.6} speed={:.3} heading={:.2}", p.t, p.lat, p.speed, p.heading);
        }
    }
    Ok(())
}
