//! Prints learner accuracies on the bundled cohort presets.

use bronchial_dx::cohort::{encode_records, generate, split, CohortConfig};
use bronchial_dx::encoder::Encoder;
use bronchial_dx::evaluate::{evaluate, Algo, EvalConfig};

fn run(name: &str, mut cfg: CohortConfig, frac: f64, algos: &[Algo]) -> bronchial_dx::Result<()> {
    let enc = Encoder::default();
    if name == "default-833" {
        cfg.size = 833;
    }
    let recs = generate(&cfg, &enc)?;
    let (tr, te) = split(&recs, frac, cfg.seed)?;
    let (tr, te) = (encode_records(&tr, &enc)?, encode_records(&te, &enc)?);
    for &a in algos {
        let r = evaluate(a, &enc, &tr, &te, &EvalConfig::default())?;
        println!(
            "{name:12} {a:10} train {:4} test {:4} acc {} inc {} phi {:?} {:.0}ms",
            r.train_size, r.test_size, r.metrics.accuracy, r.metrics.inconclusive_rate, r.phi, r.runtime_ms
        );
    }
    Ok(())
}

fn main() -> bronchial_dx::Result<()> {
    let all = [Algo::Cdamm, Algo::Mlp, Algo::Pso, Algo::C45bn, Algo::Threshold];
    run("default-833", CohortConfig::default_preset(), 0.6, &[Algo::Cdamm, Algo::Threshold])?;
    run("default", CohortConfig::default_preset(), 0.5, &[Algo::Threshold])?;
    run("full", CohortConfig::full_input(), 0.5, &[Algo::Cdamm])?;
    run("separable", CohortConfig::separable(), 0.5, &all)?;
    Ok(())
}
