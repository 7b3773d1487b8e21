//! Prints the statistics the acceptance thresholds are frozen from.

use minpair_core::predictions::sim::{run_simulation, separability_grid, SimulationConfig};
use minpair_core::world::ProbLaw;

fn main() {
    let out = run_simulation(&SimulationConfig::default()).expect("simulation");
    println!("nodes {} tail {:e}", out.n_nodes, out.tail_bound);
    println!("pred1 r {:?} n {} analytic {:?}", out.pred1.overall_r, out.pred1.n_pairs, out.pred1.analytic);
    println!("pred1 bins {:?}", out.pred1.per_bin.iter().map(|b| (b.mean_distance, b.r)).collect::<Vec<_>>());
    println!("graded r {:?} n {}", out.pred1_graded.overall_r, out.pred1_graded.n_pairs);
    for b in &out.pred1_graded.per_bin {
        println!("  bin {} dist {:.2} r {:.4} n {}", b.bin, b.mean_distance, b.r, b.n);
    }
    println!("graded trend {:?}", out.pred1_graded.analytic);
    for l in &out.pred2 {
        println!(
            "pred2 noise {} matched r {:?} (n {}) unmatched r {:?} (n {})",
            l.noise_sd, l.matched.overall_r, l.matched.n_pairs, l.unmatched.overall_r, l.unmatched.n_pairs
        );
    }
    println!("pred3 auc {:?}", out.pred3.auc_by_metric);
    println!("pred3 acc {:?}", out.pred3.accuracy_by_metric);
    println!(
        "ineq agreement {:?} ref {:?} pred {:?}; within ref {:?}",
        out.inequality.agreement,
        out.inequality.reference_win_rate,
        out.inequality.predicted_win_rate,
        out.inequality_within.reference_win_rate
    );
    let laws = [
        ProbLaw::Uniform,
        ProbLaw::Zipf { a: 1.3 },
        ProbLaw::LogNormal { sigma: 1.0 },
        ProbLaw::LogNormal { sigma: 2.0 },
    ];
    for c in separability_grid(&laws, 7).expect("grid") {
        println!(
            "K {} eps {:e} {:?}: auc {:.5} var {:.3} agree {:?} far {:?} n {}/{}",
            c.k_branch, c.epsilon, c.law, c.auc, c.log_msg_var, c.agreement, c.agreement_far, c.n_gram, c.n_ungram
        );
    }
}
