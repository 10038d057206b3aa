//! Median final fitness of each variant on surrogate benchmark functions.

use xgwo_svm::optimizer::{self, OptimizerConfig, SearchBounds, Variant};

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn main() -> xgwo_svm::Result<()> {
    let sphere = |p: &[f64; 2]| p[0] * p[0] + p[1] * p[1];
    let rastrigin = |p: &[f64; 2]| {
        20.0 + p.iter().map(|x| x * x - 10.0 * (2.0 * std::f64::consts::PI * x).cos()).sum::<f64>()
    };
    let bounds = SearchBounds::square(-10.0, 10.0)?;
    for (name, f) in [("sphere", &sphere as &(dyn Fn(&[f64; 2]) -> f64 + Sync)), ("rastrigin", &rastrigin)] {
        println!("{name}");
        for variant in Variant::ALL {
            let finals = (0..20)
                .map(|seed| {
                    let cfg = OptimizerConfig {
                        n_agents: 20,
                        max_iter: 100,
                        bounds,
                        variant,
                        seed,
                        ..OptimizerConfig::default()
                    };
                    optimizer::run(&cfg, &|p: &[f64; 2]| f(p)).map(|t| t.best_fitness)
                })
                .collect::<xgwo_svm::Result<Vec<f64>>>()?;
            println!("  {variant:>6}: median best {:.3e}", median(finals));
        }
    }
    Ok(())
}
