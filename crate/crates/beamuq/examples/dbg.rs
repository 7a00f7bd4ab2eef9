use beamuq::config::BeamConfig;
use beamuq::fem::{assemble_system, DamageVector};
use beamuq::modal::forward_map;
use beamuq::noise::NoiseModel;
use beamuq::regularize::*;
use nalgebra::{DMatrix, DVector};

fn main() {
    let system = assemble_system(BeamConfig::with_uniform_sensors(1.4, 133.0, 2.3, 50, 0.15, 2e-5, 7)).unwrap();
    let truth = DamageVector::single(50, 9, 0.2).unwrap();
    let m = forward_map(&system, &truth, 3).unwrap();
    let dim = m.len();
    // Diagonal noise: 0.1% of each component's magnitude (floored).
    let sigma = DVector::from_fn(dim, |i, _| {
        let s: f64 = 1e-3 * m.entries()[i].abs().max(0.1);
        s * s
    });
    let noise = NoiseModel::new(DVector::zeros(dim), DMatrix::from_diagonal(&sigma)).unwrap();
    for lambda in [1e3, 10.0, 1.0] {
        let mut problem = MapProblem::new(&system, &m, &noise, lambda).unwrap();
        problem.max_iterations = 3000;
        let (est, diag) = solve_map(&problem).unwrap();
        let v = est.as_vector();
        let argmax = v.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        println!("lambda {lambda:8.1e}: obj {:.3e} iters {} conv {} argmax {} peak {:.4} maxerr {:.4}",
            diag.objective, diag.iterations, diag.converged, argmax, v[argmax], (v - truth.as_vector()).amax());
    }
}
