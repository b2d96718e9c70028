//! Plug-in mutual information between categorical feature values and binned
//! utilities.

use serde::{Deserialize, Serialize};

use crate::env::OptionStimulus;

/// How continuous utilities are mapped onto discrete bins.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Binning {
    pub num_bins: usize,
    pub lo: f64,
    pub hi: f64,
}

impl Default for Binning {
    fn default() -> Self {
        Self {
            num_bins: 2,
            lo: 0.0,
            hi: 1.0,
        }
    }
}

impl Binning {
    pub fn validate(&self) -> Result<(), String> {
        if self.num_bins < 2 {
            return Err("num_bins must be at least 2".into());
        }
        // written negated so that NaN bounds are rejected too
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(self.lo < self.hi) {
            return Err("bin range needs lo < hi".into());
        }
        Ok(())
    }

    pub fn bin(&self, u: f64) -> usize {
        bin_utility(u, self.num_bins, self.lo, self.hi)
    }
}

/// Clamps `u` into `[lo, hi]` and assigns it to one of `num_bins` equal-width
/// bins; the top bin is closed on the right.
pub fn bin_utility(u: f64, num_bins: usize, lo: f64, hi: f64) -> usize {
    debug_assert!(num_bins >= 2);
    let width = (hi - lo) / num_bins as f64;
    let x = u.clamp(lo, hi);
    (((x - lo) / width).floor() as usize).min(num_bins - 1)
}

/// Joint counts of (feature value, utility bin).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ContingencyTable {
    rows: usize,
    cols: usize,
    counts: Vec<u64>,
    total: u64,
}

impl ContingencyTable {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            counts: vec![0; rows * cols],
            total: 0,
        }
    }

    /// Builds a table from row-major nested counts.
    pub fn from_rows(rows: &[Vec<u64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let mut t = Self::new(rows.len(), cols);
        for (r, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), cols, "ragged contingency rows");
            for (c, &n) in row.iter().enumerate() {
                t.add_count(r, c, n);
            }
        }
        t
    }

    pub fn add(&mut self, row: usize, col: usize) {
        self.add_count(row, col, 1);
    }

    pub fn add_count(&mut self, row: usize, col: usize, n: u64) {
        self.counts[row * self.cols + col] += n;
        self.total += n;
    }

    pub fn get(&self, row: usize, col: usize) -> u64 {
        self.counts[row * self.cols + col]
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn row_sums(&self) -> Vec<u64> {
        self.counts.chunks(self.cols.max(1)).map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<u64> {
        (0..self.cols)
            .map(|c| (0..self.rows).map(|r| self.get(r, c)).sum())
            .collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::new(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.add_count(c, r, self.get(r, c));
            }
        }
        t
    }

    /// Plug-in mutual information in nats; 0 for an empty table.
    pub fn mutual_information(&self) -> f64 {
        mutual_information(self)
    }
}

/// `I = Σ p(x,y) ln(p(x,y) / (p(x) p(y)))` over the empirical frequencies,
/// skipping empty cells.
pub fn mutual_information(table: &ContingencyTable) -> f64 {
    if table.total == 0 {
        return 0.0;
    }
    let n = table.total as f64;
    let rows = table.row_sums();
    let cols = table.col_sums();
    let mut mi = 0.0;
    for (r, &nr) in rows.iter().enumerate() {
        for (c, &nc) in cols.iter().enumerate() {
            let nrc = table.get(r, c);
            if nrc == 0 {
                continue;
            }
            let nrc = nrc as f64;
            mi += nrc / n * (nrc * n / (nr as f64 * nc as f64)).ln();
        }
    }
    // rounding can leave a tiny negative value on independent tables
    mi.max(0.0)
}

/// One MI value per dimension, from all `(features, utility)` occurrences.
pub fn mi_per_dimension<'a, I>(occurrences: I, num_dimensions: usize, binning: &Binning) -> Vec<f64>
where
    I: IntoIterator<Item = (&'a OptionStimulus, f64)>,
{
    let data: Vec<(&OptionStimulus, usize)> = occurrences.into_iter().map(|(o, u)| (o, binning.bin(u))).collect();
    (0..num_dimensions)
        .map(|d| {
            let rows = data.iter().map(|(o, _)| o.values[d] + 1).max().unwrap_or(0);
            let mut table = ContingencyTable::new(rows, binning.num_bins);
            for (o, b) in &data {
                table.add(o.values[d], *b);
            }
            table.mutual_information()
        })
        .collect()
}
