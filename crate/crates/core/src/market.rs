//! Daily price-relative market data: loading, validation and windowing.
//!
//! A price relative is the gross per-period return of an asset,
//! `price_t / price_{t-1}`. Datasets are stored as a `T x m` matrix of
//! strictly positive relatives, one row per trading day.

use std::fmt;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MarketError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("empty dataset")]
    Empty,
    #[error("malformed row {row}: {detail}")]
    MalformedRow { row: usize, detail: String },
    #[error("non-positive price relative {value} at row {row}, column {col}")]
    NonPositiveRelative { row: usize, col: usize, value: f64 },
    #[error("non-positive price {value} at row {row}, column {col}")]
    NonPositivePrice { row: usize, col: usize, value: f64 },
    #[error("need at least 2 price rows to form relatives, got {0}")]
    TooFewPriceRows(usize),
    #[error("window [{start}, {start}+{length}) out of range for {total} rows")]
    WindowOutOfRange {
        start: usize,
        length: usize,
        total: usize,
    },
}

/// A `T x m` matrix of gross per-period asset returns.
///
/// Immutable after construction; safe to share across backtest workers.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceRelativeSeries {
    relatives: Vec<Vec<f64>>,
    asset_names: Vec<String>,
}

/// Shape summary of a loaded dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSummary {
    pub name: String,
    pub num_assets: usize,
    pub num_days: usize,
    pub time_frame: String,
}

impl fmt::Display for DatasetSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: {} assets x {} days{}",
            self.name,
            self.num_assets,
            self.num_days,
            if self.time_frame.is_empty() {
                String::new()
            } else {
                format!(" ({})", self.time_frame)
            }
        )
    }
}

impl PriceRelativeSeries {
    /// Builds a validated series from raw rows of gross returns.
    pub fn new(
        relatives: Vec<Vec<f64>>,
        asset_names: Option<Vec<String>>,
    ) -> Result<Self, MarketError> {
        if relatives.is_empty() {
            return Err(MarketError::Empty);
        }
        let m = relatives[0].len();
        if m == 0 {
            return Err(MarketError::Empty);
        }
        for (r, row) in relatives.iter().enumerate() {
            if row.len() != m {
                return Err(MarketError::MalformedRow {
                    row: r,
                    detail: format!("expected {} columns, found {}", m, row.len()),
                });
            }
            for (c, &v) in row.iter().enumerate() {
                if !v.is_finite() || v <= 0.0 {
                    return Err(MarketError::NonPositiveRelative {
                        row: r,
                        col: c,
                        value: v,
                    });
                }
            }
        }
        let asset_names = match asset_names {
            Some(names) if names.len() == m => names,
            Some(names) => {
                return Err(MarketError::MalformedRow {
                    row: 0,
                    detail: format!("{} header names for {} columns", names.len(), m),
                })
            }
            None => (0..m).map(|i| format!("asset{i}")).collect(),
        };
        Ok(Self {
            relatives,
            asset_names,
        })
    }

    /// Converts a table of strictly positive prices into relatives
    /// (`T` price rows become `T-1` relative rows).
    pub fn from_prices(prices: &[Vec<f64>]) -> Result<Self, MarketError> {
        if prices.len() < 2 {
            return Err(MarketError::TooFewPriceRows(prices.len()));
        }
        let m = prices[0].len();
        for (r, row) in prices.iter().enumerate() {
            if row.len() != m {
                return Err(MarketError::MalformedRow {
                    row: r,
                    detail: format!("expected {} columns, found {}", m, row.len()),
                });
            }
            for (c, &v) in row.iter().enumerate() {
                if !v.is_finite() || v <= 0.0 {
                    return Err(MarketError::NonPositivePrice {
                        row: r,
                        col: c,
                        value: v,
                    });
                }
            }
        }
        let relatives = (1..prices.len())
            .map(|t| (0..m).map(|i| prices[t][i] / prices[t - 1][i]).collect())
            .collect();
        Self::new(relatives, None)
    }

    /// Loads a CSV of price relatives: one row per day, one column per
    /// asset, comma separated, with an optional first header row of asset
    /// names. Any non-positive or non-numeric entry is rejected.
    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self, MarketError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| MarketError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());

        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut header: Option<Vec<String>> = None;
        for (r, record) in reader.records().enumerate() {
            let record = record.map_err(|e| MarketError::MalformedRow {
                row: r,
                detail: e.to_string(),
            })?;
            if record.iter().all(|f| f.is_empty()) {
                continue;
            }
            let parsed: Result<Vec<f64>, _> =
                record.iter().map(|f| f.parse::<f64>()).collect();
            match parsed {
                Ok(values) => rows.push(values),
                Err(e) => {
                    // Only the first row may be non-numeric (asset names).
                    if r == 0 && header.is_none() {
                        header = Some(record.iter().map(|s| s.to_string()).collect());
                    } else {
                        return Err(MarketError::MalformedRow {
                            row: r,
                            detail: e.to_string(),
                        });
                    }
                }
            }
        }
        Self::new(rows, header)
    }

    pub fn summary(&self, name: &str, time_frame: &str) -> DatasetSummary {
        DatasetSummary {
            name: name.to_string(),
            num_assets: self.num_assets(),
            num_days: self.num_days(),
            time_frame: time_frame.to_string(),
        }
    }

    /// Contiguous sub-series of `length` rows starting at `start`.
    pub fn window(&self, start: usize, length: usize) -> Result<Self, MarketError> {
        let total = self.num_days();
        if start.checked_add(length).is_none_or(|end| end > total) {
            return Err(MarketError::WindowOutOfRange {
                start,
                length,
                total,
            });
        }
        Ok(Self {
            relatives: self.relatives[start..start + length].to_vec(),
            asset_names: self.asset_names.clone(),
        })
    }

    pub fn num_days(&self) -> usize {
        self.relatives.len()
    }

    pub fn num_assets(&self) -> usize {
        self.relatives[0].len()
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.relatives[t]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.relatives.iter().map(|r| r.as_slice())
    }

    pub fn asset_names(&self) -> &[String] {
        &self.asset_names
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::io::Write;

    #[test]
    fn identity_market_loads() {
        let s = PriceRelativeSeries::new(vec![vec![1.0, 1.0], vec![1.0, 1.0]], None).unwrap();
        assert_eq!(s.num_days(), 2);
        assert_eq!(s.num_assets(), 2);
        assert!(s.rows().all(|r| r.iter().all(|&v| v == 1.0)));
    }

    #[test]
    fn zero_entry_rejected() {
        let err = PriceRelativeSeries::new(vec![vec![1.0, 0.0]], None).unwrap_err();
        assert!(matches!(err, MarketError::NonPositiveRelative { .. }));
    }

    #[test]
    fn ragged_row_rejected() {
        let err = PriceRelativeSeries::new(vec![vec![1.0, 1.0], vec![1.0]], None).unwrap_err();
        assert!(matches!(err, MarketError::MalformedRow { .. }));
    }

    #[test]
    fn from_prices_direct_ratio() {
        let s = PriceRelativeSeries::from_prices(&[vec![100.0], vec![110.0]]).unwrap();
        assert_eq!(s.num_days(), 1);
        assert_relative_eq!(s.row(0)[0], 1.1, max_relative = 1e-15);

        let s = PriceRelativeSeries::from_prices(&[vec![10.0, 20.0], vec![5.0, 40.0]]).unwrap();
        assert_eq!(s.row(0), &[0.5, 2.0]);
    }

    #[test]
    fn from_prices_constant_is_ones() {
        let s =
            PriceRelativeSeries::from_prices(&[vec![3.0, 7.0], vec![3.0, 7.0], vec![3.0, 7.0]])
                .unwrap();
        assert!(s.rows().all(|r| r.iter().all(|&v| v == 1.0)));
    }

    #[test]
    fn from_prices_needs_two_rows() {
        let err = PriceRelativeSeries::from_prices(&[vec![1.0]]).unwrap_err();
        assert!(matches!(err, MarketError::TooFewPriceRows(1)));
    }

    #[test]
    fn prices_roundtrip_through_relatives() {
        // Cumulative product of relatives recovers prices up to the first row.
        let prices = vec![
            vec![100.0, 50.0],
            vec![101.5, 49.0],
            vec![99.25, 51.75],
            vec![103.0, 52.5],
        ];
        let s = PriceRelativeSeries::from_prices(&prices).unwrap();
        let mut cur = prices[0].clone();
        for (t, row) in s.rows().enumerate() {
            for i in 0..cur.len() {
                cur[i] *= row[i];
                assert_relative_eq!(cur[i], prices[t + 1][i], max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn window_identity_and_bounds() {
        let s = PriceRelativeSeries::new(
            vec![vec![1.0], vec![1.1], vec![0.9]],
            Some(vec!["a".into()]),
        )
        .unwrap();
        assert_eq!(s.window(0, 3).unwrap(), s);
        let w = s.window(1, 2).unwrap();
        assert_eq!(w.num_days(), 2);
        assert_eq!(w.row(0), &[1.1]);
        assert!(matches!(
            s.window(2, 2).unwrap_err(),
            MarketError::WindowOutOfRange { .. }
        ));
    }

    #[test]
    fn csv_with_header_and_without() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "AAA,BBB").unwrap();
        writeln!(f, "1.01,0.99").unwrap();
        writeln!(f, "0.98,1.02").unwrap();
        f.flush().unwrap();
        let s = PriceRelativeSeries::load_csv(f.path()).unwrap();
        assert_eq!(s.asset_names(), &["AAA".to_string(), "BBB".to_string()]);
        assert_eq!(s.num_days(), 2);

        let mut g = tempfile::NamedTempFile::new().unwrap();
        writeln!(g, "1.01,0.99").unwrap();
        g.flush().unwrap();
        let s = PriceRelativeSeries::load_csv(g.path()).unwrap();
        assert_eq!(s.num_days(), 1);
        assert_eq!(s.asset_names(), &["asset0".to_string(), "asset1".to_string()]);
    }

    #[test]
    fn csv_rejects_bad_data() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "1.0,1.0").unwrap();
        writeln!(f, "1.0,0.0").unwrap();
        f.flush().unwrap();
        assert!(matches!(
            PriceRelativeSeries::load_csv(f.path()).unwrap_err(),
            MarketError::NonPositiveRelative { row: 1, col: 1, .. }
        ));

        let empty = tempfile::NamedTempFile::new().unwrap();
        assert!(matches!(
            PriceRelativeSeries::load_csv(empty.path()).unwrap_err(),
            MarketError::Empty
        ));

        let mut h = tempfile::NamedTempFile::new().unwrap();
        writeln!(h, "1.0,1.0").unwrap();
        writeln!(h, "1.0,oops").unwrap();
        f.flush().unwrap();
        assert!(matches!(
            PriceRelativeSeries::load_csv(h.path()).unwrap_err(),
            MarketError::MalformedRow { row: 1, .. }
        ));
    }
}
