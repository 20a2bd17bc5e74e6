use std::io::{BufWriter, Write};
use std::path::Path;

use ndarray::Array2;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

pub const DEFAULT_ALPHA: f64 = 0.05;

/// Cell `(i, j)` is the fraction of rounds in which method `i` beat method
/// `j` with two-tailed significance `alpha`.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyMatrix {
    methods: Vec<String>,
    wins: Array2<usize>,
    alpha: f64,
    rounds: usize,
}

impl PenaltyMatrix {
    pub fn methods(&self) -> &[String] {
        &self.methods
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    /// Rounds in which `i` significantly beat `j`.
    pub fn wins(&self, i: usize, j: usize) -> usize {
        self.wins[[i, j]]
    }

    pub fn cell(&self, i: usize, j: usize) -> f64 {
        self.wins[[i, j]] as f64 / self.rounds as f64
    }

    pub fn cells(&self) -> Array2<f64> {
        self.wins.mapv(|w| w as f64 / self.rounds as f64)
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        (0..self.methods.len()).map(|j| self.cell(i, j)).sum()
    }

    pub fn column_sum(&self, j: usize) -> f64 {
        (0..self.methods.len()).map(|i| self.cell(i, j)).sum()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, ",{}", self.methods.join(","))?;
        for (i, name) in self.methods.iter().enumerate() {
            let row: Vec<String> = (0..self.methods.len()).map(|j| self.cell(i, j).to_string()).collect();
            writeln!(f, "{name},{}", row.join(","))?;
        }
        f.flush()?;
        Ok(())
    }
}

/// Paired t statistic of `a - b` across seeds. A zero standard error gives
/// 0 for a zero mean and an infinity of the mean's sign otherwise.
pub fn paired_t(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    let se = (var / n).sqrt();
    if se == 0.0 {
        if mean == 0.0 {
            0.0
        } else {
            mean.signum() * f64::INFINITY
        }
    } else {
        mean / se
    }
}

/// Builds the matrix from `traces[method][seed][round]`. Seeds are paired
/// by position and rounds aligned by index.
pub fn penalty_matrix(methods: &[String], traces: &[Vec<Vec<f64>>], alpha: f64) -> Result<PenaltyMatrix> {
    if methods.len() != traces.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} method names for {} traces",
            methods.len(),
            traces.len()
        )));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::config(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let seeds = traces.first().map_or(0, Vec::len);
    if seeds < 2 {
        return Err(Error::config("the penalty matrix needs at least two seeds per method"));
    }
    let rounds = traces[0][0].len();
    if rounds == 0 {
        return Err(Error::config("traces have no rounds"));
    }
    for (m, t) in traces.iter().enumerate() {
        if t.len() != seeds || t.iter().any(|s| s.len() != rounds) {
            return Err(Error::DimensionMismatch(format!(
                "method {} does not have {seeds} seeds of {rounds} rounds",
                methods[m]
            )));
        }
    }
    let dist = StudentsT::new(0.0, 1.0, (seeds - 1) as f64)
        .map_err(|e| Error::config(format!("t distribution: {e}")))?;
    let critical = dist.inverse_cdf(1.0 - alpha / 2.0);
    let k = methods.len();
    let mut wins = Array2::<usize>::zeros((k, k));
    for r in 0..rounds {
        for i in 0..k {
            for j in i + 1..k {
                let a: Vec<f64> = traces[i].iter().map(|s| s[r]).collect();
                let b: Vec<f64> = traces[j].iter().map(|s| s[r]).collect();
                let t = paired_t(&a, &b);
                if t > critical {
                    wins[[i, j]] += 1;
                } else if t < -critical {
                    wins[[j, i]] += 1;
                }
            }
        }
    }
    Ok(PenaltyMatrix {
        methods: methods.to_vec(),
        wins,
        alpha,
        rounds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(k: usize) -> Vec<String> {
        (0..k).map(|i| format!("m{i}")).collect()
    }

    #[test]
    fn dominant_method_wins_every_round() {
        let good = vec![vec![0.9, 0.91, 0.92], vec![0.901, 0.912, 0.919], vec![0.899, 0.909, 0.921]];
        let bad: Vec<Vec<f64>> = good.iter().map(|s| s.iter().map(|v| v - 0.2).collect()).collect();
        let p = penalty_matrix(&names(2), &[good, bad], DEFAULT_ALPHA).unwrap();
        assert_eq!(p.cell(0, 1), 1.0);
        assert_eq!(p.cell(1, 0), 0.0);
        assert_eq!(p.cell(0, 0), 0.0);
    }

    #[test]
    fn identical_traces_give_zeros() {
        let t = vec![vec![0.5, 0.6], vec![0.55, 0.58]];
        let p = penalty_matrix(&names(3), &[t.clone(), t.clone(), t], DEFAULT_ALPHA).unwrap();
        assert!(p.cells().iter().all(|&c| c == 0.0));
    }

    #[test]
    fn rejects_bad_shapes() {
        let one = vec![vec![vec![0.5, 0.6]], vec![vec![0.4, 0.7]]];
        assert!(penalty_matrix(&names(2), &one, DEFAULT_ALPHA).is_err());
        let ragged = vec![vec![vec![0.5], vec![0.6]], vec![vec![0.4, 0.1], vec![0.7, 0.2]]];
        assert!(penalty_matrix(&names(2), &ragged, DEFAULT_ALPHA).is_err());
        assert!(penalty_matrix(&names(1), &ragged, DEFAULT_ALPHA).is_err());
    }

    #[test]
    fn critical_value_matches_tables() {
        let d = StudentsT::new(0.0, 1.0, 2.0).unwrap();
        assert!((d.inverse_cdf(0.975) - 4.302652729911275).abs() < 1e-9);
    }

    #[test]
    fn csv_has_method_headers() {
        let t = vec![vec![0.5, 0.6], vec![0.55, 0.58]];
        let p = penalty_matrix(&names(2), &[t.clone(), t], DEFAULT_ALPHA).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        p.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(path).unwrap();
        assert_eq!(text, ",m0,m1\nm0,0,0\nm1,0,0\n");
    }
}
