//! Externally supplied fidelities of an optimal collective scheme.
//!
//! File format: CSV with header `N,alpha,F_opt` or `N,alpha,f_opt` and an
//! optional `# source: ...` comment line recording provenance.

use std::io::Read;

use crate::error::{Error, Result};

/// Two alphas closer than this are the same prior.
const ALPHA_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BaselineValue {
    /// Optimal average fidelity `F_opt`.
    Fidelity(f64),
    /// Optimal average error `f_opt = 1 - F_opt`.
    Error(f64),
}

impl BaselineValue {
    pub fn fidelity(&self) -> f64 {
        match *self {
            BaselineValue::Fidelity(f) => f,
            BaselineValue::Error(e) => 1.0 - e,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineEntry {
    pub n: usize,
    pub alpha: f64,
    pub value: BaselineValue,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineTable {
    entries: Vec<BaselineEntry>,
    source: String,
}

impl BaselineTable {
    /// Validates `F_opt in (0, 1]` and unique `(N, alpha)` keys.
    pub fn new(entries: Vec<BaselineEntry>, source: String) -> Result<Self> {
        for (i, e) in entries.iter().enumerate() {
            let f = e.value.fidelity();
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::InvalidBaseline(format!(
                    "optimal fidelity {f} at N={} outside (0, 1]",
                    e.n
                )));
            }
            if !e.alpha.is_finite() || e.alpha < 0.0 {
                return Err(Error::InvalidBaseline(format!("alpha {}", e.alpha)));
            }
            if entries[..i]
                .iter()
                .any(|p| p.n == e.n && (p.alpha - e.alpha).abs() < ALPHA_TOL)
            {
                return Err(Error::InvalidBaseline(format!(
                    "duplicate key N={}, alpha={}",
                    e.n, e.alpha
                )));
            }
        }
        Ok(Self { entries, source })
    }

    /// Parses the CSV format described in the module docs.
    pub fn from_csv<R: Read>(mut reader: R) -> Result<Self> {
        let mut text = String::new();
        reader
            .read_to_string(&mut text)
            .map_err(|e| Error::InvalidBaseline(e.to_string()))?;
        let source = text
            .lines()
            .filter_map(|l| l.trim_start().strip_prefix('#'))
            .find_map(|l| l.trim_start().strip_prefix("source:"))
            .map(|s| s.trim().to_string())
            .unwrap_or_default();

        let mut csv = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers = csv
            .headers()
            .map_err(|e| Error::InvalidBaseline(e.to_string()))?
            .clone();
        let as_error = match headers.iter().collect::<Vec<_>>().as_slice() {
            ["N", "alpha", "F_opt"] => false,
            ["N", "alpha", "f_opt"] => true,
            other => {
                return Err(Error::InvalidBaseline(format!(
                    "expected header N,alpha,F_opt or N,alpha,f_opt, got {}",
                    other.join(",")
                )))
            }
        };

        let mut entries = Vec::new();
        for (line, record) in csv.records().enumerate() {
            let record = record.map_err(|e| Error::InvalidBaseline(e.to_string()))?;
            let field = |i: usize| {
                record.get(i).ok_or_else(|| {
                    Error::InvalidBaseline(format!("row {}: missing column {i}", line + 1))
                })
            };
            let bad =
                |what: &str| Error::InvalidBaseline(format!("row {}: invalid {what}", line + 1));
            let n: usize = field(0)?.parse().map_err(|_| bad("N"))?;
            let alpha: f64 = field(1)?.parse().map_err(|_| bad("alpha"))?;
            let v: f64 = field(2)?.parse().map_err(|_| bad("value"))?;
            let value = if as_error {
                BaselineValue::Error(v)
            } else {
                BaselineValue::Fidelity(v)
            };
            entries.push(BaselineEntry { n, alpha, value });
        }
        Self::new(entries, source)
    }

    pub fn entries(&self) -> &[BaselineEntry] {
        &self.entries
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// True when the table stores errors `f_opt` rather than fidelities.
    pub fn stores_errors(&self) -> bool {
        matches!(
            self.entries.first().map(|e| e.value),
            Some(BaselineValue::Error(_))
        )
    }

    pub fn has_alpha(&self, alpha: f64) -> bool {
        self.entries
            .iter()
            .any(|e| (e.alpha - alpha).abs() < ALPHA_TOL)
    }

    pub fn optimal_fidelity(&self, n: usize, alpha: f64) -> Option<f64> {
        self.entries
            .iter()
            .find(|e| e.n == n && (e.alpha - alpha).abs() < ALPHA_TOL)
            .map(|e| e.value.fidelity())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_fidelity_table_with_source() {
        let text = "# source: test fixture\nN,alpha,F_opt\n1,2,0.75\n2,2,0.8\n";
        let table = BaselineTable::from_csv(text.as_bytes()).unwrap();
        assert_eq!(table.source(), "test fixture");
        assert_eq!(table.entries().len(), 2);
        assert!(!table.stores_errors());
        assert_eq!(table.optimal_fidelity(2, 2.0), Some(0.8));
        assert_eq!(table.optimal_fidelity(3, 2.0), None);
        assert_eq!(table.optimal_fidelity(2, 5.0), None);
    }

    #[test]
    fn parses_error_table() {
        let table = BaselineTable::from_csv("N,alpha,f_opt\n10,0,0.125\n".as_bytes()).unwrap();
        assert!(table.stores_errors());
        assert_eq!(table.optimal_fidelity(10, 0.0), Some(0.875));
        assert_eq!(table.source(), "");
    }

    #[test]
    fn rejects_bad_tables() {
        for text in [
            "N,alpha,fidelity\n1,2,0.5\n",
            "N,alpha,F_opt\n1,2,1.5\n",
            "N,alpha,F_opt\n1,2,0\n",
            "N,alpha,F_opt\n1,2,0.5\n1,2,0.6\n",
            "N,alpha,F_opt\nx,2,0.5\n",
            "N,alpha,F_opt\n1,2\n",
        ] {
            assert!(BaselineTable::from_csv(text.as_bytes()).is_err(), "{text}");
        }
    }
}
