//! Time series of density matrices, rates and ensemble counts, with a CSV
//! form and an elementwise comparison.
//!
//! CSV columns: `t`, then `rho_<i><j>_re`, `rho_<i><j>_im` for every element
//! row-major, then `delta_<label>` per channel, then `n_<id>` per registry
//! entry. Floats use the shortest representation that round-trips.

use std::io::{Read, Write};

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::engine::Snapshot;
use crate::error::{Error, Result};
use crate::linalg::{DensityMatrix, Matrix};

const LEVELS: [char; 8] = ['a', 'b', 'c', 'd', 'e', 'f', 'g', 'h'];

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrajectorySeries {
    pub dim: usize,
    pub channel_labels: Vec<usize>,
    pub times: Vec<f64>,
    pub rho: Vec<DensityMatrix>,
    /// `Δ_j(t)` per row, one value per channel.
    pub rates: Vec<Vec<f64>>,
    /// `N_α(t)` per row, one value per registry entry; empty for oracles.
    pub counts: Vec<Vec<u64>>,
}

impl TrajectorySeries {
    pub fn new(dim: usize, channel_labels: Vec<usize>) -> Self {
        Self { dim, channel_labels, ..Default::default() }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn push(&mut self, t: f64, rho: DensityMatrix, rates: Vec<f64>, counts: Vec<u64>) {
        self.times.push(t);
        self.rho.push(rho);
        self.rates.push(rates);
        self.counts.push(counts);
    }

    pub fn from_snapshots(dim: usize, channel_labels: Vec<usize>, snaps: &[Snapshot]) -> Self {
        let width = snaps.iter().map(|s| s.counts.len()).max().unwrap_or(0);
        let mut s = Self::new(dim, channel_labels);
        for snap in snaps {
            let mut counts = snap.counts.clone();
            counts.resize(width, 0);
            s.push(snap.time, snap.rho.clone(), snap.decay.clone(), counts);
        }
        s
    }

    fn entry_columns(&self) -> usize {
        self.counts.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn population(&self, row: usize, k: usize) -> f64 {
        self.rho[row].population(k)
    }

    pub fn header(&self) -> Vec<String> {
        let mut h = vec!["t".to_string()];
        for i in 0..self.dim {
            for j in 0..self.dim {
                h.push(format!("rho_{}{}_re", LEVELS[i], LEVELS[j]));
                h.push(format!("rho_{}{}_im", LEVELS[i], LEVELS[j]));
            }
        }
        h.extend(self.channel_labels.iter().map(|l| format!("delta_{l}")));
        h.extend((0..self.entry_columns()).map(|k| format!("n_{k}")));
        h
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.header())?;
        let width = self.entry_columns();
        for row in 0..self.len() {
            let mut rec = vec![self.times[row].to_string()];
            for z in self.rho[row].matrix().entries() {
                rec.push(z.re.to_string());
                rec.push(z.im.to_string());
            }
            rec.extend(self.rates[row].iter().map(f64::to_string));
            let counts = &self.counts[row];
            rec.extend((0..width).map(|k| counts.get(k).copied().unwrap_or(0).to_string()));
            w.write_record(rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        if header.first().map(String::as_str) != Some("t") {
            return Err(Error::Parse("first column must be `t`".into()));
        }
        let rho_cols = header.iter().filter(|h| h.starts_with("rho_")).count();
        let dim = (rho_cols as f64 / 2.0).sqrt().round() as usize;
        if dim == 0 || 2 * dim * dim != rho_cols || dim > LEVELS.len() {
            return Err(Error::Parse(format!("{rho_cols} density-matrix columns do not form a square matrix")));
        }
        let labels = header
            .iter()
            .filter_map(|h| h.strip_prefix("delta_"))
            .map(|l| l.parse::<usize>().map_err(|_| Error::Parse(format!("bad channel column delta_{l}"))))
            .collect::<Result<Vec<_>>>()?;
        let n_counts = header.iter().filter(|h| h.starts_with("n_")).count();
        let mut s = Self::new(dim, labels.clone());
        if header.len() != 1 + rho_cols + labels.len() + n_counts || header != s.header_with_counts(n_counts) {
            return Err(Error::Parse("unexpected column layout".into()));
        }
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            let num = |k: usize| -> Result<f64> {
                rec[k].parse::<f64>().map_err(|_| {
                    Error::Parse(format!("row {}: column {} is not a number: {:?}", line + 2, header[k], &rec[k]))
                })
            };
            let t = num(0)?;
            let mut data = Vec::with_capacity(dim * dim);
            for k in 0..dim * dim {
                data.push(C64::new(num(1 + 2 * k)?, num(2 + 2 * k)?));
            }
            let rho = DensityMatrix(Matrix::from_fn(dim, |i, j| data[i * dim + j]));
            let base = 1 + rho_cols;
            let rates = (0..labels.len()).map(|k| num(base + k)).collect::<Result<Vec<_>>>()?;
            let base = base + labels.len();
            let counts = (0..n_counts)
                .map(|k| {
                    rec[base + k]
                        .parse::<u64>()
                        .map_err(|_| Error::Parse(format!("row {}: bad count {:?}", line + 2, &rec[base + k])))
                })
                .collect::<Result<Vec<_>>>()?;
            s.push(t, rho, rates, counts);
        }
        s.check_grid()?;
        Ok(s)
    }

    fn header_with_counts(&self, n: usize) -> Vec<String> {
        let mut h = self.header();
        h.extend((0..n).map(|k| format!("n_{k}")));
        h
    }

    fn check_grid(&self) -> Result<()> {
        if self.times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Parse("time grid is not strictly increasing".into()));
        }
        Ok(())
    }

    /// Compared quantities: populations, then coherence magnitudes (i < j).
    pub fn observables(&self, row: usize) -> Vec<(String, f64)> {
        let rho = &self.rho[row];
        let mut out = Vec::new();
        for i in 0..self.dim {
            out.push((format!("rho_{}{}", LEVELS[i], LEVELS[i]), rho.population(i)));
        }
        for i in 0..self.dim {
            for j in i + 1..self.dim {
                out.push((format!("|rho_{}{}|", LEVELS[i], LEVELS[j]), rho.get(i, j).norm()));
            }
        }
        out
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ElementDeviation {
    pub element: String,
    pub max_deviation: f64,
    pub at_time: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ComparisonReport {
    pub tolerance: f64,
    pub elements: Vec<ElementDeviation>,
    pub max_deviation: f64,
    pub pass: bool,
}

/// Max absolute deviation per observable (populations and coherence
/// magnitudes) over a shared time grid.
pub fn compare_series(a: &TrajectorySeries, b: &TrajectorySeries, tol: f64) -> Result<ComparisonReport> {
    if a.dim != b.dim {
        return Err(Error::GridMismatch(format!("dimensions {} and {}", a.dim, b.dim)));
    }
    if a.len() != b.len() {
        return Err(Error::GridMismatch(format!("{} and {} rows", a.len(), b.len())));
    }
    for (k, (x, y)) in a.times.iter().zip(&b.times).enumerate() {
        if (x - y).abs() > 1e-9 * x.abs().max(1.0) {
            return Err(Error::GridMismatch(format!("row {k}: t = {x} vs {y}")));
        }
    }
    let mut elements: Vec<ElementDeviation> = Vec::new();
    for row in 0..a.len() {
        let (oa, ob) = (a.observables(row), b.observables(row));
        for (k, ((name, x), (_, y))) in oa.into_iter().zip(ob).enumerate() {
            let dev = (x - y).abs();
            if k == elements.len() {
                elements.push(ElementDeviation { element: name, max_deviation: dev, at_time: a.times[row] });
            } else if dev > elements[k].max_deviation || dev.is_nan() {
                elements[k].max_deviation = dev;
                elements[k].at_time = a.times[row];
            }
        }
    }
    let max_deviation = elements.iter().map(|e| e.max_deviation).fold(0.0, f64::max);
    let pass = elements.iter().all(|e| e.max_deviation < tol);
    Ok(ComparisonReport { tolerance: tol, elements, max_deviation, pass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::StateVector;
    use proptest::prelude::*;

    fn sample(values: &[(f64, f64, f64)]) -> TrajectorySeries {
        let mut s = TrajectorySeries::new(2, vec![1]);
        for (k, &(t, x, phase)) in values.iter().enumerate() {
            let v = StateVector::new(vec![C64::new(x.sqrt(), 0.0), C64::from_polar((1.0 - x).sqrt(), phase)]);
            s.push(t, v.outer(), vec![0.1 * k as f64 - 0.3], vec![k as u64, 100 - k as u64]);
        }
        s
    }

    #[test]
    fn self_comparison_is_exact() {
        let s = sample(&[(0.0, 0.5, 0.0), (0.1, 0.4, 1.0), (0.2, 0.3, 2.0)]);
        let r = compare_series(&s, &s, 1e-12).unwrap();
        assert_eq!(r.max_deviation, 0.0);
        assert!(r.pass);
        assert_eq!(r.elements.len(), 3);
    }

    #[test]
    fn coherences_compare_by_magnitude() {
        let a = sample(&[(0.0, 0.5, 0.0), (0.1, 0.4, 0.0)]);
        let b = sample(&[(0.0, 0.5, 2.0), (0.1, 0.4, -1.0)]);
        assert!(compare_series(&a, &b, 1e-12).unwrap().pass);
        let c = sample(&[(0.0, 0.5, 0.0), (0.1, 0.41, 0.0)]);
        let r = compare_series(&a, &c, 1e-3).unwrap();
        assert!(!r.pass);
        assert!((r.elements[0].max_deviation - 0.01).abs() < 1e-12);
        assert_eq!(r.elements[0].at_time, 0.1);
    }

    #[test]
    fn grid_mismatch_is_reported() {
        let a = sample(&[(0.0, 0.5, 0.0), (0.1, 0.4, 0.0)]);
        let b = sample(&[(0.0, 0.5, 0.0), (0.2, 0.4, 0.0)]);
        assert!(matches!(compare_series(&a, &b, 1.0), Err(Error::GridMismatch(_))));
        let c = sample(&[(0.0, 0.5, 0.0)]);
        assert!(matches!(compare_series(&a, &c, 1.0), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn header_layout() {
        let s = sample(&[(0.0, 0.5, 0.0)]);
        assert_eq!(
            s.header(),
            vec![
                "t", "rho_aa_re", "rho_aa_im", "rho_ab_re", "rho_ab_im", "rho_ba_re", "rho_ba_im", "rho_bb_re",
                "rho_bb_im", "delta_1", "n_0", "n_1"
            ]
        );
    }

    #[test]
    fn malformed_csv_is_rejected() {
        assert!(TrajectorySeries::read_csv("x,y\n1,2\n".as_bytes()).is_err());
        let s = sample(&[(0.0, 0.5, 0.0)]).to_csv_string().unwrap();
        let broken = s.replace("0.5", "zero point five");
        assert!(matches!(TrajectorySeries::read_csv(broken.as_bytes()), Err(Error::Parse(_))));
        let two = sample(&[(0.1, 0.5, 0.0), (0.0, 0.5, 0.0)]).to_csv_string().unwrap();
        assert!(TrajectorySeries::read_csv(two.as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn csv_round_trip_is_exact(
            rows in proptest::collection::vec((0.0f64..1.0, -3.0f64..3.0), 1..20),
        ) {
            let values: Vec<_> = rows.iter().enumerate().map(|(k, &(x, p))| (k as f64 * 0.1, x, p)).collect();
            let s = sample(&values);
            let text = s.to_csv_string().unwrap();
            let back = TrajectorySeries::read_csv(text.as_bytes()).unwrap();
            prop_assert_eq!(&back, &s);
            prop_assert_eq!(back.to_csv_string().unwrap(), text);
        }
    }
}
