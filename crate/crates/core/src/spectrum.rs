//! Data ingestion and the sorted sample spectrum.

use std::io::Read;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mp::SpectralFn;
use crate::stats::pairwise_sum;

/// Observations in rows, variables in columns.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: DMatrix<f64>,
    column_names: Option<Vec<String>>,
    dropped_rows: usize,
}

/// Header handling for CSV input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Header {
    /// Treat the first record as a header when any of its cells is non-numeric.
    #[default]
    Auto,
    Present,
    Absent,
}

const MISSING: [&str; 6] = ["", "na", "nan", "n/a", "null", "?"];

fn is_missing(cell: &str) -> bool {
    let t = cell.trim();
    MISSING.iter().any(|m| t.eq_ignore_ascii_case(m))
}

fn parse_cell(cell: &str) -> Option<f64> {
    cell.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

impl DataMatrix {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        Self::with_names(values, None)
    }

    pub fn with_names(values: DMatrix<f64>, column_names: Option<Vec<String>>) -> Result<Self> {
        if values.nrows() < 2 || values.ncols() < 2 {
            return Err(Error::Shape(format!(
                "need at least 2 observations and 2 variables, got {}x{}",
                values.nrows(),
                values.ncols()
            )));
        }
        if let Some(names) = &column_names {
            if names.len() != values.ncols() {
                return Err(Error::Shape(format!(
                    "{} column names for {} columns",
                    names.len(),
                    values.ncols()
                )));
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("data contains non-finite values"));
        }
        Ok(Self { values, column_names, dropped_rows: 0 })
    }

    /// Number of observations.
    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    /// Number of variables.
    pub fn p(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn column_names(&self) -> Option<&[String]> {
        self.column_names.as_deref()
    }

    /// Rows discarded during ingestion because of missing cells.
    pub fn dropped_rows(&self) -> usize {
        self.dropped_rows
    }

    /// Centre every column and scale it to unit sample standard deviation
    /// (divisor `n - 1`).
    pub fn standardize(&self) -> Result<Self> {
        let n = self.n() as f64;
        let mut out = self.values.clone();
        for (j, mut col) in out.column_iter_mut().enumerate() {
            let mean = pairwise_sum(col.as_slice()) / n;
            col.add_scalar_mut(-mean);
            let ss: f64 = col.iter().map(|v| v * v).sum();
            let sd = (ss / (n - 1.0)).sqrt();
            let scale = mean.abs().max(sd);
            if sd == 0.0 || sd <= 1e-13 * scale {
                return Err(Error::DegenerateColumn { column: j + 1 });
            }
            col /= sd;
        }
        Ok(Self {
            values: out,
            column_names: self.column_names.clone(),
            dropped_rows: self.dropped_rows,
        })
    }
}

/// Read a numeric CSV file. Rows with missing cells are dropped and counted.
pub fn ingest_csv(path: impl AsRef<Path>, header: Header, standardize: bool) -> Result<DataMatrix> {
    let file = std::fs::File::open(path)?;
    parse_csv(file, header, standardize)
}

/// Parse CSV text from any reader. Errors carry 1-based row and column.
pub fn parse_csv<R: Read>(reader: R, header: Header, standardize: bool) -> Result<DataMatrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);

    let mut names: Option<Vec<String>> = None;
    let mut width: Option<usize> = None;
    let mut cells: Vec<f64> = Vec::new();
    let mut rows = 0usize;
    let mut dropped = 0usize;
    let mut first = true;

    for (idx, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Csv {
            row: e.position().map_or(idx + 1, |p| p.line() as usize),
            column: 0,
            message: e.to_string(),
        })?;
        let row = rec.position().map_or(idx + 1, |p| p.line() as usize);
        if rec.iter().all(|c| c.is_empty()) {
            continue;
        }
        if first {
            first = false;
            let looks_like_header = rec.iter().any(|c| !is_missing(c) && parse_cell(c).is_none());
            let take = match header {
                Header::Present => true,
                Header::Absent => false,
                Header::Auto => looks_like_header,
            };
            if take {
                width = Some(rec.len());
                names = Some(rec.iter().map(str::to_owned).collect());
                continue;
            }
        }
        let w = *width.get_or_insert(rec.len());
        if rec.len() != w {
            return Err(Error::Csv {
                row,
                column: rec.len().min(w) + 1,
                message: format!("expected {w} fields, found {}", rec.len()),
            });
        }
        let start = cells.len();
        let mut missing = false;
        for (j, c) in rec.iter().enumerate() {
            if is_missing(c) {
                missing = true;
                continue;
            }
            match parse_cell(c) {
                Some(v) => cells.push(v),
                None => {
                    return Err(Error::Csv {
                        row,
                        column: j + 1,
                        message: format!("cannot parse {c:?} as a finite number"),
                    })
                }
            }
        }
        if missing {
            cells.truncate(start);
            dropped += 1;
        } else {
            rows += 1;
        }
    }

    let p = width.unwrap_or(0);
    if rows < 2 || p < 2 {
        return Err(Error::Shape(format!(
            "need at least 2 complete rows and 2 columns, got {rows} rows and {p} columns"
        )));
    }
    let values = DMatrix::from_row_slice(rows, p, &cells);
    let mut data = DataMatrix::with_names(values, names)?;
    data.dropped_rows = dropped;
    if standardize {
        data = data.standardize()?;
    }
    Ok(data)
}

/// Sample covariance of the columns.
///
/// `center == false` gives `X^T X / n`, the population-mean-zero convention.
/// `center == true` subtracts column means and divides by `n - 1`.
pub fn sample_covariance(data: &DataMatrix, center: bool) -> DMatrix<f64> {
    let (x, divisor) = prepared(data, center);
    let mut s = x.tr_mul(&x);
    s /= divisor;
    symmetrize(&mut s);
    s
}

fn prepared(data: &DataMatrix, center: bool) -> (DMatrix<f64>, f64) {
    let n = data.n() as f64;
    if center {
        let mut x = data.values.clone();
        for mut col in x.column_iter_mut() {
            let mean = pairwise_sum(col.as_slice()) / n;
            col.add_scalar_mut(-mean);
        }
        (x, n - 1.0)
    } else {
        (data.values.clone(), n)
    }
}

fn symmetrize(s: &mut DMatrix<f64>) {
    let k = s.nrows();
    for i in 0..k {
        for j in (i + 1)..k {
            let v = 0.5 * (s[(i, j)] + s[(j, i)]);
            s[(i, j)] = v;
            s[(j, i)] = v;
        }
    }
}

/// Eigenvalues in descending order together with the sample size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenSpectrum {
    eigenvalues: Vec<f64>,
    n: usize,
}

impl EigenSpectrum {
    /// Build from eigenvalues in any order. They are sorted descending.
    pub fn from_eigenvalues(mut eigenvalues: Vec<f64>, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("sample size must be positive"));
        }
        if eigenvalues.len() < 2 {
            return Err(Error::Shape("spectrum needs at least 2 eigenvalues".into()));
        }
        if eigenvalues.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid("eigenvalues must be finite and non-negative"));
        }
        eigenvalues.sort_by(|a, b| b.total_cmp(a));
        Ok(Self { eigenvalues, n })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn p(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Dimension-to-sample ratio `p / n`.
    pub fn c_n(&self) -> f64 {
        self.p() as f64 / self.n as f64
    }

    /// Eigenvalue at 1-based rank (rank 1 is the largest).
    pub fn rank(&self, r: usize) -> f64 {
        self.eigenvalues[r - 1]
    }

    pub fn trace(&self) -> f64 {
        pairwise_sum(&self.eigenvalues)
    }

    /// Divide every eigenvalue by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        Self { eigenvalues: self.eigenvalues.iter().map(|v| v / s).collect(), n: self.n }
    }

    /// Eigenvalues not flagged by `ranks`, largest first.
    pub fn nonspiked(&self, ranks: SpikeRankSet) -> &[f64] {
        &self.eigenvalues[ranks.large..self.p() - ranks.small]
    }
}

fn clip_negative(values: &mut [f64]) -> Result<()> {
    let max = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = 1e-10 * max;
    for v in values.iter_mut() {
        if *v < 0.0 {
            if *v < -tol {
                return Err(Error::NegativeEigenvalue { value: *v });
            }
            *v = 0.0;
        }
    }
    Ok(())
}

fn check_symmetric(s: &DMatrix<f64>) -> Result<()> {
    if !s.is_square() {
        return Err(Error::Shape(format!("matrix is {}x{}, not square", s.nrows(), s.ncols())));
    }
    if s.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("matrix contains non-finite entries"));
    }
    let scale = s.amax();
    let asym = (s - s.transpose()).amax();
    if asym > 1e-12 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::NotSymmetric { asymmetry: asym });
    }
    Ok(())
}

/// Eigenvalues of a symmetric positive semi-definite matrix, sorted descending.
///
/// Negative eigenvalues within `1e-10 * max|lambda|` are clipped to zero;
/// anything more negative is an error.
pub fn eigen_spectrum(s: &DMatrix<f64>, n: usize) -> Result<EigenSpectrum> {
    check_symmetric(s)?;
    let mut vals: Vec<f64> = s.clone().symmetric_eigenvalues().iter().copied().collect();
    clip_negative(&mut vals)?;
    EigenSpectrum::from_eigenvalues(vals, n)
}

/// Full decomposition: spectrum plus eigenvectors as columns in the same
/// order. The reconstruction `V diag(l) V^T` is checked against `s`.
pub fn eigen_decomposition(s: &DMatrix<f64>, n: usize) -> Result<(EigenSpectrum, DMatrix<f64>)> {
    check_symmetric(s)?;
    let eig = SymmetricEigen::new(s.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut vals: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(s.nrows(), s.ncols(), |r, c| eig.eigenvectors[(r, order[c])]);

    let recon = &vecs * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vals.clone())) * vecs.transpose();
    let norm = s.norm().max(f64::MIN_POSITIVE);
    let err = (recon - s).norm() / norm;
    if err > 1e-9 {
        return Err(Error::Reconstruction { error: err });
    }
    clip_negative(&mut vals)?;
    Ok((EigenSpectrum { eigenvalues: vals, n }, vecs))
}

/// Sample spectrum straight from data. When `p > n` the smaller Gram matrix
/// is decomposed and the spectrum padded with zeros.
///
/// With centring the effective sample size recorded in the spectrum is
/// `n - 1`.
pub fn spectrum_from_data(data: &DataMatrix, center: bool) -> Result<EigenSpectrum> {
    let (x, divisor) = prepared(data, center);
    let n_eff = if center { data.n() - 1 } else { data.n() };
    gram_spectrum(&x, divisor, n_eff)
}

/// Spectrum of `X^T X / divisor` for an `n x p` matrix `X`, decomposing
/// whichever of `X^T X` and `X X^T` is smaller.
pub fn gram_spectrum(x: &DMatrix<f64>, divisor: f64, n_eff: usize) -> Result<EigenSpectrum> {
    let (n, p) = x.shape();
    let mut g = if p <= n { x.tr_mul(x) } else { x * x.transpose() };
    g /= divisor;
    symmetrize(&mut g);
    let mut vals: Vec<f64> = g.symmetric_eigenvalues().iter().copied().collect();
    clip_negative(&mut vals)?;
    vals.resize(p, 0.0);
    EigenSpectrum::from_eigenvalues(vals, n_eff)
}

/// Ranks flagged as spikes: the top `large` and the bottom `small`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SpikeRankSet {
    pub large: usize,
    pub small: usize,
}

impl SpikeRankSet {
    pub fn new(large: usize, small: usize) -> Self {
        Self { large, small }
    }

    pub fn total(&self) -> usize {
        self.large + self.small
    }

    /// At least one eigenvalue must stay unflagged.
    pub fn validate(&self, p: usize) -> Result<()> {
        if self.total() >= p {
            return Err(Error::invalid(format!(
                "{} flagged ranks leave no nonspiked eigenvalues out of {p}",
                self.total()
            )));
        }
        Ok(())
    }

    /// Whether 1-based `rank` is flagged.
    pub fn contains(&self, rank: usize, p: usize) -> bool {
        rank <= self.large || rank > p - self.small
    }

    /// 1-based flagged ranks in increasing order.
    pub fn ranks(&self, p: usize) -> Vec<usize> {
        (1..=self.large).chain(p - self.small + 1..=p).collect()
    }
}

/// Sums of `f` over flagged and unflagged eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSums {
    pub spiked: f64,
    pub nonspiked: f64,
}

pub fn split_spectrum(spec: &EigenSpectrum, ranks: SpikeRankSet, f: SpectralFn) -> Result<SplitSums> {
    let p = spec.p();
    ranks.validate(p)?;
    let mut spiked = Vec::with_capacity(ranks.total());
    let mut rest = Vec::with_capacity(p - ranks.total());
    for (i, &l) in spec.eigenvalues().iter().enumerate() {
        let rank = i + 1;
        let flagged = ranks.contains(rank, p);
        let v = match f {
            SpectralFn::Identity => l,
            SpectralFn::Log if l > 0.0 => l.ln(),
            // a zero among the flagged ranks only affects the spiked sum
            SpectralFn::Log if flagged => f64::NEG_INFINITY,
            SpectralFn::Log => return Err(Error::LogNonPositive { rank, value: l }),
        };
        if flagged {
            spiked.push(v);
        } else {
            rest.push(v);
        }
    }
    Ok(SplitSums { spiked: pairwise_sum(&spiked), nonspiked: pairwise_sum(&rest) })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn csv(s: &str) -> Result<DataMatrix> {
        parse_csv(s.as_bytes(), Header::Auto, false)
    }

    #[test]
    fn missing_cell_row_is_dropped() {
        let d = csv("a,b\n1,2\n3,\n5,6\n").unwrap();
        assert_eq!(d.n(), 2);
        assert_eq!(d.dropped_rows(), 1);
        assert_eq!(d.column_names().unwrap(), ["a", "b"]);
        assert_eq!(d.values()[(1, 0)], 5.0);
    }

    #[test]
    fn parse_error_has_position() {
        match csv("1,2\n3,x\n5,6\n") {
            Err(Error::Csv { row, column, .. }) => {
                assert_eq!((row, column), (2, 2));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn ragged_row_rejected() {
        assert!(matches!(csv("1,2\n3,4,5\n6,7\n"), Err(Error::Csv { row: 2, .. })));
    }

    #[test]
    fn explicit_header_absent_rejects_text() {
        let r = parse_csv("a,b\n1,2\n3,4\n".as_bytes(), Header::Absent, false);
        assert!(matches!(r, Err(Error::Csv { row: 1, column: 1, .. })));
    }

    #[test]
    fn constant_column_is_degenerate() {
        let r = parse_csv("1,2\n1,3\n1,5\n".as_bytes(), Header::Absent, true);
        assert!(matches!(r, Err(Error::DegenerateColumn { column: 1 })));
    }

    #[test]
    fn standardized_columns_have_unit_variance() {
        let d = parse_csv("1,2\n2,9\n4,3\n8,1\n".as_bytes(), Header::Absent, true).unwrap();
        let s = sample_covariance(&d, true);
        assert!((s[(0, 0)] - 1.0).abs() < 1e-12);
        assert!((s[(1, 1)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn covariance_conventions() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 2.0, 2.0]);
        let d = DataMatrix::new(x).unwrap();
        let s = sample_covariance(&d, false);
        assert!((s[(0, 0)] - 5.0 / 3.0).abs() < 1e-15);
        assert!((s[(0, 1)] - 4.0 / 3.0).abs() < 1e-15);
        let s = sample_covariance(&d, true);
        // means are 1, 1; centred rows (0,-1), (-1,0), (1,1)
        assert!((s[(0, 0)] - 1.0).abs() < 1e-15);
        assert!((s[(0, 1)] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn eigen_sorted_and_clipped() {
        let s = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let spec = eigen_spectrum(&s, 10).unwrap();
        assert!((spec.rank(1) - 3.0).abs() < 1e-14);
        assert!((spec.rank(2) - 1.0).abs() < 1e-14);
        let tiny = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0 - 1e-13]);
        let spec = eigen_spectrum(&tiny, 10).unwrap();
        assert!(spec.rank(2) >= 0.0);
        let neg = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -0.5]);
        assert!(matches!(eigen_spectrum(&neg, 10), Err(Error::NegativeEigenvalue { .. })));
    }

    #[test]
    fn asymmetric_rejected() {
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        assert!(matches!(eigen_spectrum(&s, 10), Err(Error::NotSymmetric { .. })));
    }

    #[test]
    fn decomposition_vectors_follow_order() {
        let s = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.0, 1.0, 3.0, 0.0, 0.0, 0.0, 1.0]);
        let (spec, v) = eigen_decomposition(&s, 5).unwrap();
        for k in 0..3 {
            let col = v.column(k);
            let res = (&s * col - col * spec.eigenvalues()[k]).norm();
            assert!(res < 1e-12);
        }
    }

    #[test]
    fn gram_trick_pads_zeros() {
        let x = DMatrix::from_fn(3, 5, |i, j| ((i * 7 + j * 3) % 5) as f64 - 1.5);
        let d = DataMatrix::new(x).unwrap();
        let direct = eigen_spectrum(&sample_covariance(&d, false), 3).unwrap();
        let gram = spectrum_from_data(&d, false).unwrap();
        for (a, b) in direct.eigenvalues().iter().zip(gram.eigenvalues()) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
        assert_eq!(gram.eigenvalues()[3..], [0.0, 0.0]);
    }

    #[test]
    fn split_sums_and_log_error() {
        let spec = EigenSpectrum::from_eigenvalues(vec![1.0, 5.0, 2.0, 0.0], 10).unwrap();
        let s = split_spectrum(&spec, SpikeRankSet::new(1, 1), SpectralFn::Identity).unwrap();
        assert_eq!(s.spiked, 5.0);
        assert_eq!(s.nonspiked, 3.0);
        let e = split_spectrum(&spec, SpikeRankSet::new(1, 0), SpectralFn::Log);
        assert!(matches!(e, Err(Error::LogNonPositive { rank: 4, .. })));
        let s = split_spectrum(&spec, SpikeRankSet::new(1, 1), SpectralFn::Log).unwrap();
        assert_eq!(s.nonspiked, 2f64.ln());
    }

    #[test]
    fn rank_set_membership() {
        let r = SpikeRankSet::new(2, 1);
        assert_eq!(r.ranks(6), vec![1, 2, 6]);
        assert!(r.validate(3).is_err());
        assert!(r.validate(4).is_ok());
    }
}
