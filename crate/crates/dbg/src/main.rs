use koopnav::dynamics::*;
use koopnav::mpc::*;
use koopnav::qp::{self, QpConfig, QpStatus};
use nalgebra::Vector3;
use std::time::Instant;

fn main() {
    let model = discretize(Vector3::new(1.8, 1.8, 1.8), 0.2).unwrap();
    let x0 = UavState::at_rest(Vector3::new(0.0, 0.0, 1.5));
    let cfg = MpcConfig::default();
    let goal = Vector3::new(10.0, 0.0, 1.5);
    let track = TrackPrediction { id: 0, radius_estimate: 0.3, predictions: vec![Vector3::new(3.0, 0.0, 1.5); cfg.horizon] };
    let blocking = build_qp(&model, &x0, &goal, &[track.clone()], &Polytope::dodecahedron(), &cfg).unwrap();
    let ground_cfg = MpcConfig { ground_min_z: Some(0.5), ..MpcConfig::default() };
    let ground = build_qp(&model, &x0, &Vector3::new(1.0, 0.0, 0.0), &[], &Polytope::dodecahedron(), &ground_cfg).unwrap();
    let tracks3: Vec<TrackPrediction> = (0..3).map(|i| TrackPrediction {
        id: i, radius_estimate: 0.4,
        predictions: (0..20).map(|mu| Vector3::new(3.0 + i as f64 * 2.0, -1.0 + 0.1 * mu as f64, 1.5)).collect(),
    }).collect();
    let three = build_qp(&model, &x0, &goal, &tracks3, &Polytope::dodecahedron(), &cfg).unwrap();

    for (name, enc) in [("blocking", &blocking), ("ground", &ground), ("three", &three)] {
        let t0 = Instant::now();
        let sol = qp::solve(&enc.problem, &QpConfig::default(), None).unwrap();
        let dt = t0.elapsed();
        let tag = if sol.status == QpStatus::Optimal { "OK " } else { "MAX" };
        println!("{name:9} -> {tag} iters {:5} pr {:.1e} dr {:.1e}  {:?}", sol.iterations, sol.primal_residual, sol.dual_residual, dt);
        // warm-started re-solve
        let warm = qp::WarmStart { z: sol.z.clone(), duals: sol.duals.clone() };
        let t0 = Instant::now();
        let sol2 = qp::solve(&enc.problem, &QpConfig::default(), Some(&warm)).unwrap();
        println!("  warm    -> {:?} iters {:5}  {:?}", sol2.status, sol2.iterations, t0.elapsed());
    }
}
