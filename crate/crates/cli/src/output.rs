//! CSV writers. Floats use the shortest round-trip representation; missing
//! values are empty fields.

use std::path::Path;

use anyhow::Context;

use dasloc::experiment::{AfSample, ComplexityRow, SweepResult};

fn writer(path: &Path) -> anyhow::Result<csv::Writer<std::fs::File>> {
    let file = std::fs::File::create(path).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(file))
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub fn write_sweep(path: &Path, result: &SweepResult) -> anyhow::Result<()> {
    let mut w = writer(path)?;
    w.write_record(["estimator", "snr_db", "rmse_m", "rmse_lambda", "ser", "mae", "n_trials", "tx_scalars_per_node"])?;
    for r in &result.rows {
        w.write_record([
            r.estimator.name().to_string(),
            r.snr_db.to_string(),
            r.rmse_m.to_string(),
            r.rmse_lambda.to_string(),
            opt(r.ser),
            opt(r.mae),
            r.n_trials.to_string(),
            r.tx_scalars_per_node.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_af(path: &Path, cut: &[AfSample], n: usize, q: usize) -> anyhow::Result<()> {
    let mut w = writer(path)?;
    w.write_record(["x_m", "af_coh_norm", "af_noncoh_norm"])?;
    for s in cut {
        let (coh, noncoh) = s.normalized(n, q);
        w.write_record([s.coord.to_string(), coh.to_string(), noncoh.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_complexity(path: &Path, rows: &[ComplexityRow]) -> anyhow::Result<()> {
    let mut w = writer(path)?;
    w.write_record(["estimator", "step", "measured_ops", "asymptotic_formula", "instantiated_value"])?;
    for r in rows {
        w.write_record([
            r.estimator.name().to_string(),
            r.step.name().to_string(),
            r.measured_ops.to_string(),
            r.asymptotic_formula.clone(),
            r.instantiated_value.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
