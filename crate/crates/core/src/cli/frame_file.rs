//! Frame CSV ingestion.
//!
//! Header row required. Columns: `unit_id`, then `x` (ratio, royall), `pi`
//! (ht) or `a,sigma2` (custom), then `y`. An empty `y` cell or a literal
//! `NA` marks an unsampled unit. Extra columns are ignored.

use std::collections::HashSet;
use std::io::Read;

use crate::model::{Auxiliary, ModelSpec, RawUnit};

use super::CliError;

fn column(headers: &csv::StringRecord, name: &str) -> Result<usize, CliError> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| CliError::parse(format!("missing column `{name}` in header")))
}

fn number(record: &csv::StringRecord, idx: usize, name: &str, line: u64) -> Result<f64, CliError> {
    let cell = record.get(idx).unwrap_or("").trim();
    cell.parse::<f64>().map_err(|_| {
        CliError::parse(format!("row {line}, column `{name}`: cannot parse `{cell}` as a number"))
    })
}

pub fn read_frame<R: Read>(reader: R, spec: &ModelSpec) -> Result<Vec<RawUnit>, CliError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| CliError::parse(format!("cannot read header: {e}")))?
        .clone();

    let id_col = column(&headers, "unit_id")?;
    let y_col = column(&headers, "y")?;
    let aux_cols: Vec<(usize, &str)> = match spec {
        ModelSpec::Ratio { .. } | ModelSpec::Royall => vec![(column(&headers, "x")?, "x")],
        ModelSpec::HorvitzThompson => vec![(column(&headers, "pi")?, "pi")],
        ModelSpec::Custom => vec![
            (column(&headers, "a")?, "a"),
            (column(&headers, "sigma2")?, "sigma2"),
        ],
    };

    let mut seen = HashSet::new();
    let mut units = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            CliError::parse(format!("row {line}: malformed CSV record: {e}"))
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let id = record.get(id_col).unwrap_or("").to_string();
        if id.is_empty() {
            return Err(CliError::parse(format!("row {line}, column `unit_id`: empty id")));
        }
        if !seen.insert(id.clone()) {
            return Err(CliError::parse(format!(
                "row {line}, column `unit_id`: duplicate id `{id}`"
            )));
        }
        let aux = match spec {
            ModelSpec::Ratio { .. } | ModelSpec::Royall => {
                Auxiliary::Size(number(&record, aux_cols[0].0, aux_cols[0].1, line)?)
            }
            ModelSpec::HorvitzThompson => {
                Auxiliary::Inclusion(number(&record, aux_cols[0].0, aux_cols[0].1, line)?)
            }
            ModelSpec::Custom => Auxiliary::Direct {
                a: number(&record, aux_cols[0].0, aux_cols[0].1, line)?,
                sigma2: number(&record, aux_cols[1].0, aux_cols[1].1, line)?,
            },
        };
        let y_cell = record.get(y_col).unwrap_or("");
        let y = if y_cell.is_empty() || y_cell == "NA" {
            None
        } else {
            Some(number(&record, y_col, "y", line)?)
        };
        units.push(RawUnit {
            unit_id: id,
            aux,
            y,
        });
    }
    Ok(units)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_sampled_and_unsampled() {
        let csv = "unit_id,x,y\nA,1,2\nB,3,NA\nC,2,\n";
        let units = read_frame(csv.as_bytes(), &ModelSpec::Royall).unwrap();
        assert_eq!(units.len(), 3);
        assert_eq!(units[0].y, Some(2.0));
        assert_eq!(units[1].y, None);
        assert_eq!(units[2].y, None);
        assert_eq!(units[1].aux, Auxiliary::Size(3.0));
    }

    #[test]
    fn names_row_and_column() {
        let csv = "unit_id,pi,y\nA,0.5,1\nB,zz,\n";
        let err = read_frame(csv.as_bytes(), &ModelSpec::HorvitzThompson).unwrap_err();
        assert_eq!(err.code, 2);
        assert!(err.message.contains("row 3"), "{}", err.message);
        assert!(err.message.contains("`pi`"), "{}", err.message);
    }

    #[test]
    fn rejects_missing_column_and_duplicates() {
        let err = read_frame("unit_id,x,y\nA,1,2\n".as_bytes(), &ModelSpec::Custom).unwrap_err();
        assert!(err.message.contains("`a`"));
        let err = read_frame("unit_id,x,y\nA,1,2\nA,2,\n".as_bytes(), &ModelSpec::Royall).unwrap_err();
        assert!(err.message.contains("duplicate"));
    }
}
