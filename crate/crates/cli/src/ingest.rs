//! CSV ingestion and preprocessing.

use std::path::Path;

use nalgebra::DMatrix;
use netgm::npn::{apply_npn, fit_npn};
use netgm::{residualize, CovariateMatrix, DataMatrix, NetworkStack};

use crate::config::RunConfig;
use crate::error::CliError;

/// Header and numeric body of a CSV file.
pub fn read_numeric_csv(path: &Path) -> Result<(Vec<String>, DMatrix<f64>), CliError> {
    let show = path.display();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Data(format!("{show}: {e}")))?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::Data(format!("{show}: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut values = Vec::new();
    let mut rows = 0;
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::Data(format!("{show}: {e}")))?;
        if record.len() != header.len() {
            return Err(CliError::Data(format!(
                "{show}: dimension mismatch at row {}: {} fields, header has {}",
                r + 1,
                record.len(),
                header.len()
            )));
        }
        for (c, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| {
                CliError::Data(format!("{show}: non-numeric value '{cell}' at row {}, column {}", r + 1, header[c]))
            })?;
            if !v.is_finite() {
                return Err(CliError::Data(format!(
                    "{show}: missing or non-finite value at row {}, column {}",
                    r + 1,
                    header[c]
                )));
            }
            values.push(v);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(CliError::Data(format!("{show}: no data rows")));
    }
    Ok((header.clone(), DMatrix::from_row_slice(rows, header.len(), &values)))
}

/// Reads a `p x p` network whose header must list the data columns in order.
pub fn read_network(path: &Path, names: &[String]) -> Result<DMatrix<f64>, CliError> {
    let show = path.display();
    let (header, a) = read_numeric_csv(path)?;
    if header != names {
        let mut h = header.clone();
        let mut d = names.to_vec();
        h.sort();
        d.sort();
        return Err(CliError::Data(if h == d {
            format!("{show}: column order mismatch with the data header")
        } else {
            format!("{show}: dimension mismatch; header does not list the data columns")
        }));
    }
    let p = names.len();
    if a.nrows() != p {
        return Err(CliError::Data(format!("{show}: dimension mismatch; {} rows for {p} columns", a.nrows())));
    }
    for j in 0..p {
        for k in (j + 1)..p {
            if (a[(j, k)] - a[(k, j)]).abs() > 1e-8 {
                return Err(CliError::Data(format!(
                    "{show}: not symmetric at row {}, column {}",
                    names[j], names[k]
                )));
            }
        }
    }
    Ok(a)
}

fn network_name(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "network".into())
}

#[derive(Debug)]
pub struct Inputs {
    pub data: DataMatrix,
    pub networks: NetworkStack,
}

/// Reads data and networks, residualizes on covariates (or centers), applies
/// the nonparanormal transform when asked and scales to unit variance.
pub fn ingest(cfg: &RunConfig) -> Result<Inputs, CliError> {
    let path = cfg.data.as_ref().ok_or_else(|| CliError::Config("--data is required".into()))?;
    let (names, y) = read_numeric_csv(path)?;
    let mut seen = names.clone();
    seen.sort();
    seen.dedup();
    if seen.len() != names.len() {
        return Err(CliError::Data(format!("{}: duplicate column names", path.display())));
    }
    let data = DataMatrix::new(y, names.clone())?;
    let x = match &cfg.covariates {
        Some(c) => {
            let (_, v) = read_numeric_csv(c)?;
            if v.nrows() != data.n() {
                return Err(CliError::Data(format!(
                    "{}: dimension mismatch; {} rows, data has {}",
                    c.display(),
                    v.nrows(),
                    data.n()
                )));
            }
            CovariateMatrix::new(v, true)?
        }
        None => CovariateMatrix::intercept_only(data.n()),
    };
    let mut data = residualize(&data, &x)?;
    if cfg.nonparanormal {
        data = apply_npn(&fit_npn(&data)?, &data)?;
    }
    let data = data.scaled_to_unit_variance()?;

    let networks = if cfg.networks.is_empty() {
        NetworkStack::empty(data.p())
    } else {
        let mut raw = Vec::new();
        let mut labels = Vec::new();
        for a in &cfg.networks {
            raw.push(read_network(a, &names)?);
            let mut label = network_name(a);
            while labels.contains(&label) {
                label.push('_');
            }
            labels.push(label);
        }
        NetworkStack::new(raw, labels)?
    };
    Ok(Inputs { data, networks })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn reads_and_rejects() {
        let dir = tempfile::tempdir().unwrap();
        let d = write(dir.path(), "d.csv", "a,b\n1,2\n3,5\n4,4\n");
        let (h, m) = read_numeric_csv(&d).unwrap();
        assert_eq!(h, vec!["a", "b"]);
        assert_eq!(m.shape(), (3, 2));
        let names: Vec<String> = h.clone();
        let ok = write(dir.path(), "n.csv", "a,b\n0,1\n1,0\n");
        assert!(read_network(&ok, &names).is_ok());
        let swapped = write(dir.path(), "s.csv", "b,a\n0,1\n1,0\n");
        let e = read_network(&swapped, &names).unwrap_err().to_string();
        assert!(e.contains("column order mismatch"), "{e}");
        let asym = write(dir.path(), "x.csv", "a,b\n0,1.001\n1,0\n");
        assert!(read_network(&asym, &names).unwrap_err().to_string().contains("not symmetric"));
        let nan = write(dir.path(), "nan.csv", "a,b\n1,NaN\n2,3\n");
        let e = read_numeric_csv(&nan).unwrap_err().to_string();
        assert!(e.contains("row 1, column b"), "{e}");
        let text = write(dir.path(), "t.csv", "a,b\n1,x\n");
        assert_eq!(read_numeric_csv(&text).unwrap_err().exit_code(), 3);
    }
}
