//! Template files: raw little-endian `f64` rows of length `n`, or one comma-separated row per
//! line when the extension is `.csv`. Rows are normalized on load.

use std::fs;
use std::io::Write;
use std::path::Path;

use ironmask_core::{Error, Result, Template};

fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

pub fn load_embeddings(path: &Path, n: usize) -> Result<Vec<Template>> {
    if n == 0 {
        return Err(Error::InvalidConfig("dimension must be positive".into()));
    }
    let rows = if is_csv(path) {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| Error::Format(e.to_string()))?;
        let mut rows = Vec::new();
        for (line, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| Error::Format(e.to_string()))?;
            let row = rec
                .iter()
                .map(|f| f.parse::<f64>())
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map_err(|e| Error::Format(format!("line {}: {e}", line + 1)))?;
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    actual: row.len(),
                });
            }
            rows.push(row);
        }
        rows
    } else {
        let bytes = fs::read(path)?;
        if bytes.len() % (8 * n) != 0 {
            return Err(Error::Format(format!(
                "{} bytes is not a whole number of {n}-dimensional f64 rows",
                bytes.len()
            )));
        }
        bytes
            .chunks_exact(8 * n)
            .map(|row| {
                row.chunks_exact(8)
                    .map(|b| f64::from_le_bytes(b.try_into().expect("8-byte chunk")))
                    .collect()
            })
            .collect()
    };
    if rows.is_empty() {
        return Err(Error::Format(format!("{} holds no rows", path.display())));
    }
    rows.into_iter().map(Template::normalized).collect()
}

pub fn save_embeddings(path: &Path, rows: &[Template]) -> Result<()> {
    let mut file = fs::File::create(path)?;
    if is_csv(path) {
        for row in rows {
            let line: Vec<String> = row.iter().map(|x| format!("{x:?}")).collect();
            writeln!(file, "{}", line.join(","))?;
        }
    } else {
        for row in rows {
            for x in row.iter() {
                file.write_all(&x.to_le_bytes())?;
            }
        }
    }
    Ok(())
}
