// Temporary tuning harness; deleted before finalizing.
use dbnwp_core::dataset::{build_samples, synthesize};
use dbnwp_core::dbn::{DbnArchitecture, FineTuneConfig};
use dbnwp_core::evaluation::stability_runs;
use dbnwp_core::rbm::CdConfig;

#[test]
#[ignore]
fn explore_stability() {
    let records = synthesize(5000, 42).unwrap();
    let samples = build_samples(&records).unwrap();
    let arch = DbnArchitecture::dbn2(samples.width());

    // (label, cd_lr, cd_epochs, ft_lr, ft_momentum, ft_epochs, ft_batch)
    let configs = [
        ("A-slow", 0.05, 60, 0.1, 0.5, 800, 25),
        ("B-mid", 0.05, 60, 0.15, 0.4, 600, 50),
        ("C-batch50", 0.05, 30, 0.3, 0.4, 500, 50),
    ];
    for (label, cd_lr, cd_epochs, ft_lr, ft_m, ft_epochs, ft_batch) in configs {
        let cd = CdConfig {
            learning_rate: cd_lr,
            epochs: cd_epochs,
            ..CdConfig::default()
        };
        let ft = FineTuneConfig {
            learning_rate: ft_lr,
            momentum: ft_m,
            epochs: ft_epochs,
            batch_size: ft_batch,
        };
        let start = std::time::Instant::now();
        let report = stability_runs(&samples, &arch, &cd, &ft, 8, 100, 0.7).unwrap();
        eprintln!(
            "{label}: mean_rmse={:.4} cv_rmse={:.3} ({:.0}s) sorted={:?}",
            report.runs.mean.rmse,
            report.cv_rmse,
            start.elapsed().as_secs_f64(),
            report
                .sorted_rmse
                .iter()
                .map(|x| (x * 1e4).round() / 1e4)
                .collect::<Vec<_>>()
        );
    }
}
