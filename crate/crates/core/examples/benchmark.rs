//! A small T-sweep with every method, printed as the summary table.

use recourse::bench::{run_experiment, ExperimentConfig, Method};

fn main() {
    let cfg = ExperimentConfig {
        t_values: vec![0, 2, 5],
        num_truth_matrices: 3,
        num_subjects: 5,
        methods: vec![Method::Rank, Method::Grad, Method::Wachter, Method::Graph, Method::Face],
        ..ExperimentConfig::default()
    };
    let (report, rows) = run_experiment(&cfg).unwrap();
    println!("{} trials, mean rank over the top {}", rows.len(), report.mean_rank_k);
    report.write_csv(std::io::stdout()).unwrap();
    for c in &report.comparisons {
        println!("T={} {} vs {} on {}: p {:?}", c.t, c.method, c.baseline, c.metric, c.p_value);
    }
}
