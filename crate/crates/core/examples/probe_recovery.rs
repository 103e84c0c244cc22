use gtc_core::data::{build_synthetic_dataset, sample_mask, GraphSource};
use gtc_core::solvers::{imputation_solve, project, ImputationConfig, Keep};

fn main() {
    let cfg = ImputationConfig::default();
    for rate in [0.1, 0.2, 0.5, 0.8] {
        let mut iters = vec![];
        let mut worst_rel: f64 = 0.0;
        let mut worst_time: f64 = 0.0;
        for trial in 0..5u64 {
            let ds = build_synthetic_dataset(&GraphSource::ErdosRenyi { p: 0.2 }, 16, 16, 30, 2, 1, 0, trial).unwrap();
            let truth = &ds.tensors[0];
            let mask = sample_mask(30, rate, 500 + trial).unwrap();
            let g_obs = project(truth, &mask, Keep::Observed).unwrap();
            let t0 = std::time::Instant::now();
            let (out, report) = imputation_solve(&g_obs, &mask, &ds.transform, &cfg, Some(truth)).unwrap();
            worst_time = worst_time.max(t0.elapsed().as_secs_f64());
            let mut num = 0.0; let mut den = 0.0;
            for k in mask.missing() {
                for (a, b) in out.slice(k).iter().zip(truth.slice(k)) { num += (a-b)*(a-b); }
                for b in truth.slice(k) { den += b*b; }
            }
            worst_rel = worst_rel.max(num / den.max(1e-30));
            iters.push(report.iterations);
        }
        iters.sort();
        println!("rate {rate}: median {} all {:?} worst relMSE {:.2e} worst time {:.2}s", iters[2], iters, worst_rel, worst_time);
    }
}
