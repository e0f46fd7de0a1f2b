//! Macro and micro P/R/F1 on a small hand-made prediction set.

use kgprompt::eval::{compute_metrics, Average};

fn main() -> anyhow::Result<()> {
    let gold = ["A", "A", "B", "B", "C"];
    let pred = ["A", "B", "B", "B", "A"];
    let labels: Vec<String> = ["A", "B", "C"].map(String::from).to_vec();
    let m = compute_metrics(&gold, &pred, &labels)?;
    for (label, prf) in &m.per_label {
        println!("{label}: P {:.3} R {:.3} F1 {:.3}", prf.precision, prf.recall, prf.f1);
    }
    for avg in [Average::Macro, Average::Micro] {
        let s = m.summary(avg);
        println!("{avg}: P {:.3} R {:.3} F1 {:.3}", s.precision, s.recall, s.f1);
    }
    println!("accuracy {:.3}", m.accuracy);
    Ok(())
}
