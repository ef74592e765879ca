//! Confusion-matrix metrics and the side-by-side comparison table.

use ndarray::array;
use robustdense::harness::ComparisonTable;
use robustdense::metrics::{f1_per_class, mean_f1, overall_accuracy, ConfusionMatrix};

fn main() -> robustdense::Result<()> {
    let label = array![[0u8, 1, 2], [2, 2, 255], [1, 0, 0]];
    let pred = array![[0u8, 1, 1], [2, 0, 2], [1, 0, 2]];
    let mut cm = ConfusionMatrix::new(3);
    cm.accumulate(pred.view(), label.view(), 255)?;
    println!("confusion {:?}", cm.counts());
    println!("OA {:.4}", overall_accuracy(&cm)?);
    for (k, f) in f1_per_class(&cm).iter().enumerate() {
        println!("class {k}: F1 {:.4}", f.f1);
    }

    let table: ComparisonTable =
        serde_json::from_str(include_str!("../tests/fixtures/reference_table.json"))?;
    print!("{}", table.render()?);
    for m in &table.methods {
        for d in &m.degrees {
            let recomputed = mean_f1(&d.class_f1, &[true; 5])?;
            println!("{} {}: mean F1 {:.1} (recomputed {recomputed:.2})", m.method, d.degree, d.mean_f1);
        }
    }
    Ok(())
}
