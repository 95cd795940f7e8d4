//! Confusion matrix and its text/CSV renderings.

use std::fmt::Write as _;

use super::model::{ClassifierModel, Example};
use super::scalar::Scalar;
use super::train::predict_all;
use crate::scene::{label_name, NUM_CLASSES};
use crate::{Error, Result};

/// Counts indexed `[actual][predicted]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn from_predictions(classes: usize, actual: &[usize], predicted: &[usize]) -> Result<Self> {
        if actual.len() != predicted.len() {
            return Err(Error::invalid("actual and predicted lengths differ"));
        }
        if actual.is_empty() {
            return Err(Error::invalid("no predictions to tabulate"));
        }
        let mut counts = vec![vec![0; classes]; classes];
        for (&a, &p) in actual.iter().zip(predicted) {
            if a >= classes || p >= classes {
                return Err(Error::invalid(format!("label pair ({a}, {p}) outside 0..{classes}")));
            }
            counts[a][p] += 1;
        }
        Ok(Self { counts })
    }

    pub fn classes(&self) -> usize {
        self.counts.len()
    }

    pub fn count(&self, actual: usize, predicted: usize) -> usize {
        self.counts[actual][predicted]
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    /// Fraction of samples on the diagonal.
    pub fn accuracy(&self) -> f64 {
        let correct: usize = (0..self.classes()).map(|i| self.counts[i][i]).sum();
        correct as f64 / self.total() as f64
    }

    /// Row-normalized percentages; a class with no test samples gives a
    /// row of zeros.
    pub fn row_percentages(&self) -> Vec<Vec<f64>> {
        self.counts
            .iter()
            .map(|row| {
                let n: usize = row.iter().sum();
                row.iter()
                    .map(|&c| if n == 0 { 0.0 } else { 100.0 * c as f64 / n as f64 })
                    .collect()
            })
            .collect()
    }

    fn class_title(&self, i: usize) -> String {
        if self.classes() == NUM_CLASSES {
            format!("Class-{} ({})", i + 1, label_name(i))
        } else {
            format!("Class-{}", i + 1)
        }
    }

    /// Fixed-width table: actual classes down, predictions across, cells
    /// like `66.7%` (zero cells as `0%`), then the overall accuracy.
    pub fn render_table(&self) -> String {
        let pct = self.row_percentages();
        let titles: Vec<String> = (0..self.classes()).map(|i| self.class_title(i)).collect();
        let corner = "Predicted v. Actual";
        let first = titles.iter().map(String::len).max().unwrap_or(0).max(corner.len());
        let mut out = String::new();
        let _ = write!(out, "{corner:<first$}");
        for t in &titles {
            let _ = write!(out, " | {t:>w$}", w = t.len().max(6));
        }
        out.push('\n');
        for (i, row) in pct.iter().enumerate() {
            let _ = write!(out, "{:<first$}", titles[i]);
            for (t, &p) in titles.iter().zip(row) {
                let _ = write!(out, " | {:>w$}", format_percent(p), w = t.len().max(6));
            }
            out.push('\n');
        }
        let _ = writeln!(
            out,
            "Overall accuracy: {:.2}% ({} test samples)",
            100.0 * self.accuracy(),
            self.total()
        );
        out
    }

    /// `actual,<predicted names...>` header, then one row of percentages
    /// (two decimals) per actual class.
    pub fn to_csv(&self) -> String {
        let names: Vec<String> = (0..self.classes())
            .map(|i| if self.classes() == NUM_CLASSES { label_name(i) } else { (i + 1).to_string() })
            .collect();
        let mut out = String::from("actual");
        for n in &names {
            let _ = write!(out, ",{n}");
        }
        out.push('\n');
        for (name, row) in names.iter().zip(self.row_percentages()) {
            out.push_str(name);
            for p in row {
                let _ = write!(out, ",{p:.2}");
            }
            out.push('\n');
        }
        out
    }
}

/// `0%` for exact zeros, otherwise one decimal.
pub fn format_percent(p: f64) -> String {
    if p == 0.0 {
        "0%".to_string()
    } else {
        format!("{p:.1}%")
    }
}

/// Predicts every example with dropout off and tabulates the results.
pub fn confusion_matrix<T: Scalar>(model: &ClassifierModel<T>, test: &[Example]) -> Result<ConfusionMatrix> {
    if test.is_empty() {
        return Err(Error::invalid("test set is empty"));
    }
    let predicted = predict_all(model, test)?;
    let actual: Vec<usize> = test.iter().map(|e| e.label).collect();
    ConfusionMatrix::from_predictions(model.topology().classes, &actual, &predicted)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictor_is_identity() {
        let labels: Vec<usize> = (0..9).flat_map(|c| [c, c]).collect();
        let cm = ConfusionMatrix::from_predictions(9, &labels, &labels).unwrap();
        assert_eq!(cm.accuracy(), 1.0);
        let pct = cm.row_percentages();
        for i in 0..9 {
            for j in 0..9 {
                assert_eq!(pct[i][j], if i == j { 100.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn constant_predictor_fills_first_column() {
        let actual = [0, 0, 1, 2, 3, 4, 5, 6, 7, 8];
        let cm = ConfusionMatrix::from_predictions(9, &actual, &[0; 10]).unwrap();
        assert!((cm.accuracy() - 0.2).abs() < 1e-15);
        for row in cm.row_percentages() {
            assert_eq!(row[0], 100.0);
            assert!((row.iter().sum::<f64>() - 100.0).abs() < 0.1);
        }
    }

    #[test]
    fn class_seven_row_renders_like_table() {
        // three D-B samples: two correct, one taken for C-B
        let actual = [6, 6, 6];
        let predicted = [6, 6, 3];
        let cm = ConfusionMatrix::from_predictions(9, &actual, &predicted).unwrap();
        let table = cm.render_table();
        let row = table.lines().find(|l| l.starts_with("Class-7 (D-B)")).unwrap();
        let cells: Vec<&str> = row.split('|').skip(1).map(str::trim).collect();
        assert_eq!(cells, ["0%", "0%", "0%", "33.3%", "0%", "0%", "66.7%", "0%", "0%"]);
        assert!(table.lines().next().unwrap().contains("Class-4 (C-B)"));
        let csv = cm.to_csv();
        assert!(csv.lines().any(|l| l == "D-B,0.00,0.00,0.00,33.33,0.00,0.00,66.67,0.00,0.00"));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(ConfusionMatrix::from_predictions(9, &[], &[]).is_err());
        assert!(ConfusionMatrix::from_predictions(9, &[9], &[0]).is_err());
        assert!(ConfusionMatrix::from_predictions(9, &[1, 2], &[0]).is_err());
    }
}
