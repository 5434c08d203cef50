//! Feature CSV: `source_id,label,fuzzyen_m1..fuzzyen_m10,psd_mean,psd_std`.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::features::{feature_names, FeatureMatrix, FeatureVector, FEATURE_NAMES, N_FEATURES};
use crate::signal::ClassLabel;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub source_id: String,
    pub label: Option<ClassLabel>,
    pub features: FeatureVector,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeatureTable {
    pub rows: Vec<FeatureRow>,
}

impl FeatureTable {
    pub fn sort(&mut self) {
        self.rows.sort_by(|a, b| a.source_id.cmp(&b.source_id));
    }

    pub fn matrix(&self) -> FeatureMatrix {
        let vs: Vec<FeatureVector> = self.rows.iter().map(|r| r.features).collect();
        FeatureMatrix::from_vectors(&vs)
    }

    /// Matrix plus labels; every row must be labeled.
    pub fn labeled(&self) -> Result<(FeatureMatrix, Vec<ClassLabel>)> {
        let labels = self
            .rows
            .iter()
            .map(|r| {
                r.label.ok_or_else(|| {
                    Error::InvalidParameter(format!("row `{}` has no label", r.source_id))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((self.matrix(), labels))
    }

    pub fn write_to<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["source_id".to_string(), "label".to_string()];
        header.extend(feature_names());
        out.write_record(&header).map_err(csv_io)?;
        for row in &self.rows {
            let mut rec = vec![
                row.source_id.clone(),
                row.label.map(|l| l.as_str().to_string()).unwrap_or_default(),
            ];
            rec.extend(row.features.values.iter().map(|v| v.to_string()));
            out.write_record(&rec).map_err(csv_io)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        self.write_to(std::fs::File::create(path)?)
    }

    pub fn read_from<R: Read>(r: R, path: &Path) -> Result<Self> {
        let parse_err = |line: usize, msg: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            msg,
        };
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
        let header = rdr.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
        let expected: Vec<&str> = ["source_id", "label"]
            .into_iter()
            .chain(FEATURE_NAMES)
            .collect();
        if header.iter().collect::<Vec<_>>() != expected {
            return Err(parse_err(1, format!("expected header `{}`", expected.join(","))));
        }
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let line = i + 2;
            let rec = rec.map_err(|e| parse_err(line, e.to_string()))?;
            let label = match &rec[1] {
                "" => None,
                s => Some(s.parse::<ClassLabel>().map_err(|e| parse_err(line, e.to_string()))?),
            };
            let mut values = [0.0; N_FEATURES];
            for (k, v) in values.iter_mut().enumerate() {
                *v = rec[k + 2]
                    .parse()
                    .map_err(|_| parse_err(line, format!("bad number `{}`", &rec[k + 2])))?;
            }
            rows.push(FeatureRow {
                source_id: rec[0].to_string(),
                label,
                features: FeatureVector { values },
            });
        }
        Ok(FeatureTable { rows })
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        Self::read_from(std::fs::File::open(path)?, path)
    }
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}
