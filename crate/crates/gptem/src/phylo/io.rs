//! Trait CSV input and output.
//!
//! Format: header row `taxon,<trait names...>`, one row per taxon, first
//! column the taxon label, remaining columns numeric trait values. No
//! missing cells.

use super::TraitMatrix;
use crate::error::{Error, Result};
use nalgebra::DMatrix;
use std::io::{Read, Write};

pub fn read_trait_csv<R: Read>(reader: R) -> Result<TraitMatrix> {
    let mut csv_reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = csv_reader.headers()?.clone();
    if headers.len() < 2 {
        return Err(Error::InvalidInput(
            "trait CSV needs a taxon column and at least one trait column".into(),
        ));
    }
    let trait_labels: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    let mut taxon_labels = Vec::new();
    let mut rows: Vec<f64> = Vec::new();
    for record in csv_reader.records() {
        let record = record?;
        if record.len() != headers.len() {
            return Err(Error::InvalidInput(format!(
                "row {} has {} fields, expected {}",
                taxon_labels.len() + 2,
                record.len(),
                headers.len()
            )));
        }
        taxon_labels.push(record[0].to_string());
        for field in record.iter().skip(1) {
            if field.is_empty() {
                return Err(Error::InvalidInput(format!(
                    "missing trait value for taxon '{}'",
                    record[0].to_string()
                )));
            }
            rows.push(field.parse::<f64>().map_err(|_| {
                Error::InvalidInput(format!(
                    "non-numeric trait value '{}' for taxon '{}'",
                    field,
                    record[0].to_string()
                ))
            })?);
        }
    }
    if taxon_labels.is_empty() {
        return Err(Error::InvalidInput("trait CSV has no data rows".into()));
    }
    let p = trait_labels.len();
    let n = taxon_labels.len();
    let values = DMatrix::from_row_iterator(n, p, rows.into_iter());
    TraitMatrix::new(values, taxon_labels, trait_labels)
}

pub fn write_trait_csv<W: Write>(writer: W, traits: &TraitMatrix) -> Result<()> {
    let mut csv_writer = csv::Writer::from_writer(writer);
    let mut header = vec!["taxon".to_string()];
    header.extend(traits.trait_labels.iter().cloned());
    csv_writer.write_record(&header)?;
    for (i, taxon) in traits.taxon_labels.iter().enumerate() {
        let mut row = vec![taxon.clone()];
        for j in 0..traits.n_traits() {
            row.push(format!("{:.17e}", traits.values[(i, j)]));
        }
        csv_writer.write_record(&row)?;
    }
    csv_writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phylo::parse_newick;

    #[test]
    fn reads_well_formed_csv() {
        let data = "taxon,len,width\nA,1.5,2.0\nB,0.5,-1.0\n";
        let traits = read_trait_csv(data.as_bytes()).unwrap();
        assert_eq!(traits.n_taxa(), 2);
        assert_eq!(traits.trait_labels, vec!["len", "width"]);
        assert_eq!(traits.values[(1, 1)], -1.0);
    }

    #[test]
    fn rejects_missing_cell() {
        let data = "taxon,len,width\nA,1.5,\nB,0.5,-1.0\n";
        assert!(read_trait_csv(data.as_bytes()).is_err());
    }

    #[test]
    fn rejects_non_numeric() {
        let data = "taxon,len\nA,abc\n";
        assert!(read_trait_csv(data.as_bytes()).is_err());
    }

    #[test]
    fn align_reorders_rows_and_is_case_sensitive() {
        let tree = parse_newick("((A:1,B:1):1,C:2);").unwrap();
        let data = "taxon,x\nC,3.0\nA,1.0\nB,2.0\n";
        let traits = read_trait_csv(data.as_bytes()).unwrap();
        let aligned = traits.align_to(&tree).unwrap();
        assert_eq!(aligned.values[(0, 0)], 1.0);
        assert_eq!(aligned.values[(2, 0)], 3.0);

        let bad = "taxon,x\nc,3.0\nA,1.0\nB,2.0\n";
        let traits = read_trait_csv(bad.as_bytes()).unwrap();
        assert!(traits.align_to(&tree).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let data = "taxon,len,width\nA,1.5,2.0\nB,0.5,-1.0\n";
        let traits = read_trait_csv(data.as_bytes()).unwrap();
        let mut buf = Vec::new();
        write_trait_csv(&mut buf, &traits).unwrap();
        let back = read_trait_csv(buf.as_slice()).unwrap();
        assert_eq!(traits, back);
    }
}
