//! Confusion matrices, per-class F1, overall accuracy and mean F1.

use ndarray::{Array2, ArrayView2, Zip};
use serde::{Deserialize, Serialize};

use crate::data::{CLASS_NAMES, CLUTTER, NUM_CLASSES};
use crate::error::{shape_err, validation_err, Result};

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(num_classes: usize) -> Self {
        ConfusionMatrix {
            counts: vec![vec![0; num_classes]; num_classes],
        }
    }

    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self> {
        let k = counts.len();
        if k == 0 || counts.iter().any(|r| r.len() != k) {
            return Err(shape_err!("confusion counts must be a non-empty square matrix"));
        }
        Ok(ConfusionMatrix { counts })
    }

    pub fn num_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth][pred]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.num_classes()).map(|k| self.counts[k][k]).sum()
    }

    pub fn row_sum(&self, k: usize) -> u64 {
        self.counts[k].iter().sum()
    }

    pub fn col_sum(&self, k: usize) -> u64 {
        self.counts.iter().map(|r| r[k]).sum()
    }

    /// Adds one pixel per position whose label is not `ignore_index`.
    /// On error the matrix is left unchanged.
    pub fn accumulate(&mut self, pred: ArrayView2<u8>, label: ArrayView2<u8>, ignore_index: u8) -> Result<()> {
        if pred.dim() != label.dim() {
            return Err(shape_err!(
                "prediction {:?} and label {:?} shapes differ",
                pred.dim(),
                label.dim()
            ));
        }
        let k = self.num_classes();
        if let Some(&p) = pred.iter().find(|&&p| p as usize >= k) {
            return Err(validation_err!("predicted class {p} out of range for {k} classes"));
        }
        if let Some(&l) = label.iter().find(|&&l| l != ignore_index && l as usize >= k) {
            return Err(validation_err!("label {l} out of range for {k} classes"));
        }
        Zip::from(&pred).and(&label).for_each(|&p, &l| {
            if l != ignore_index {
                self.counts[l as usize][p as usize] += 1;
            }
        });
        Ok(())
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if other.num_classes() != self.num_classes() {
            return Err(shape_err!(
                "cannot merge {}-class and {}-class matrices",
                self.num_classes(),
                other.num_classes()
            ));
        }
        for (a, b) in self.counts.iter_mut().flatten().zip(other.counts.iter().flatten()) {
            *a += b;
        }
        Ok(())
    }

    pub fn to_array(&self) -> Array2<u64> {
        let k = self.num_classes();
        Array2::from_shape_fn((k, k), |(i, j)| self.counts[i][j])
    }
}

/// F1 of one class plus whether it was undefined (class absent from truth and prediction).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassF1 {
    pub f1: f64,
    pub undefined: bool,
}

pub fn f1_per_class(cm: &ConfusionMatrix) -> Vec<ClassF1> {
    (0..cm.num_classes())
        .map(|k| {
            let tp = cm.get(k, k) as f64;
            let (row, col) = (cm.row_sum(k) as f64, cm.col_sum(k) as f64);
            if row + col == 0.0 {
                return ClassF1 { f1: 0.0, undefined: true };
            }
            // 2PR/(P+R) with P = tp/col, R = tp/row, simplified.
            ClassF1 {
                f1: 2.0 * tp / (row + col),
                undefined: false,
            }
        })
        .collect()
}

pub fn overall_accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    let total = cm.total();
    if total == 0 {
        return Err(validation_err!("overall accuracy of an empty confusion matrix"));
    }
    Ok(cm.trace() as f64 / total as f64)
}

pub fn mean_f1(f1: &[f64], class_mask: &[bool]) -> Result<f64> {
    if f1.len() != class_mask.len() {
        return Err(shape_err!("{} F1 values but {} mask entries", f1.len(), class_mask.len()));
    }
    let picked: Vec<f64> = f1
        .iter()
        .zip(class_mask)
        .filter(|(_, &m)| m)
        .map(|(&v, _)| v)
        .collect();
    if picked.is_empty() {
        return Err(validation_err!("mean F1 over an empty class mask"));
    }
    Ok(picked.iter().sum::<f64>() / picked.len() as f64)
}

/// Mask of the five scored classes: everything but clutter.
pub fn foreground_mask() -> Vec<bool> {
    (0..NUM_CLASSES).map(|k| k != CLUTTER).collect()
}

/// Evaluation summary at one damage fraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub damage_fraction: f64,
    pub oa: f64,
    pub mean_f1: f64,
    pub per_class_f1: Vec<f64>,
    /// Classes absent from both truth and prediction; their F1 is reported as 0.
    pub undefined_classes: Vec<String>,
    pub confusion: Vec<Vec<u64>>,
}

impl MetricsReport {
    /// Builds a report over the six ISPRS classes; mean F1 skips clutter.
    pub fn from_confusion(cm: &ConfusionMatrix, damage_fraction: f64) -> Result<Self> {
        if cm.num_classes() != NUM_CLASSES {
            return Err(shape_err!(
                "expected a {NUM_CLASSES}-class matrix, got {}",
                cm.num_classes()
            ));
        }
        let f1 = f1_per_class(cm);
        let values: Vec<f64> = f1.iter().map(|c| c.f1).collect();
        Ok(MetricsReport {
            damage_fraction,
            oa: overall_accuracy(cm)?,
            mean_f1: mean_f1(&values, &foreground_mask())?,
            undefined_classes: f1
                .iter()
                .zip(CLASS_NAMES)
                .filter(|(c, _)| c.undefined)
                .map(|(_, n)| n.to_string())
                .collect(),
            per_class_f1: values,
            confusion: cm.counts().to_vec(),
        })
    }

    /// Checks that `mean_f1` recomputes from `per_class_f1` and every value is in [0, 1].
    pub fn check_consistency(&self, tol: f64) -> Result<()> {
        let recomputed = mean_f1(&self.per_class_f1, &foreground_mask())?;
        if (recomputed - self.mean_f1).abs() > tol {
            return Err(validation_err!(
                "mean F1 {} does not match per-class values ({recomputed})",
                self.mean_f1
            ));
        }
        let all = [self.oa, self.mean_f1].into_iter().chain(self.per_class_f1.iter().copied());
        for v in all {
            if !(0.0..=1.0).contains(&v) {
                return Err(validation_err!("metric {v} outside [0, 1]"));
            }
        }
        Ok(())
    }
}

pub const CSV_HEADER: &str = "fraction,oa,mean_f1,f1_impsuf,f1_building,f1_lowveg,f1_tree,f1_car,f1_clutter";

/// One CSV row; floats use Rust's shortest round-trip formatting.
pub fn csv_row(r: &MetricsReport) -> String {
    let mut fields = vec![r.damage_fraction.to_string(), r.oa.to_string(), r.mean_f1.to_string()];
    fields.extend(r.per_class_f1.iter().map(f64::to_string));
    fields.join(",")
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn toy_raster_hand_count() {
        let label = array![[0u8, 1, 2], [2, 2, 255], [1, 0, 0]];
        let pred = array![[0u8, 1, 1], [2, 0, 2], [1, 0, 2]];
        let mut cm = ConfusionMatrix::new(3);
        cm.accumulate(pred.view(), label.view(), 255).unwrap();
        assert_eq!(
            cm.counts(),
            &[vec![2, 0, 1], vec![0, 2, 0], vec![1, 1, 1]][..]
        );
        assert_eq!(cm.total(), 8);
        assert_eq!(overall_accuracy(&cm).unwrap(), 5.0 / 8.0);
    }

    #[test]
    fn two_class_f1() {
        let cm = ConfusionMatrix::from_counts(vec![vec![2, 1], vec![1, 2]]).unwrap();
        let f1 = f1_per_class(&cm);
        for c in f1 {
            assert!((c.f1 - 2.0 / 3.0).abs() < 1e-15);
            assert!(!c.undefined);
        }
    }

    #[test]
    fn ignored_pixels_leave_matrix_unchanged() {
        let mut cm = ConfusionMatrix::new(2);
        let l = Array2::from_elem((3, 3), 255u8);
        cm.accumulate(Array2::zeros((3, 3)).view(), l.view(), 255).unwrap();
        assert_eq!(cm.total(), 0);
        assert!(overall_accuracy(&cm).is_err());
    }

    #[test]
    fn out_of_range_prediction_is_rejected() {
        let mut cm = ConfusionMatrix::new(2);
        let p = Array2::from_elem((2, 2), 2u8);
        assert!(cm.accumulate(p.view(), Array2::zeros((2, 2)).view(), 255).is_err());
        assert_eq!(cm.total(), 0);
    }

    #[test]
    fn absent_class_is_flagged() {
        let mut counts = vec![vec![0; 6]; 6];
        counts[0][0] = 4;
        counts[1][1] = 2;
        let cm = ConfusionMatrix::from_counts(counts).unwrap();
        let r = MetricsReport::from_confusion(&cm, 0.0).unwrap();
        assert_eq!(r.undefined_classes, vec!["Low-veg", "Tree", "Car", "Clutter"]);
        assert_eq!(r.per_class_f1[2], 0.0);
        assert_eq!(r.oa, 1.0);
        assert!((r.mean_f1 - 0.4).abs() < 1e-15);
        r.check_consistency(1e-9).unwrap();
    }

    #[test]
    fn mask_errors() {
        assert!(mean_f1(&[0.5, 0.7], &[false, false]).is_err());
        assert_eq!(mean_f1(&[0.5, 0.7], &[false, true]).unwrap(), 0.7);
    }

    #[test]
    fn csv_row_matches_header_width() {
        let cm = ConfusionMatrix::from_counts(
            (0..6).map(|i| (0..6).map(|j| u64::from(i == j) * 3 + 1).collect()).collect(),
        )
        .unwrap();
        let r = MetricsReport::from_confusion(&cm, 0.2).unwrap();
        let row = csv_row(&r);
        assert_eq!(row.split(',').count(), CSV_HEADER.split(',').count());
        assert!(row.starts_with("0.2,"));
    }
}
