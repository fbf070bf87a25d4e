//! Encounter, feature-matrix, normalization and generated-label files.

use std::collections::HashMap;
use std::io::{Read, Write};

use crate::category::Category;
use crate::error::{Error, Result};
use crate::ingest::{Trajectory, TrajectoryPoint};

use super::{Encounter, NormalizationParams};

pub const ENCOUNTER_HEADER: [&str; 6] = ["encounter_id", "label", "vehicle", "t", "lat", "lon"];

fn label_field(label: Option<Category>) -> &'static str {
    label.map(Category::name).unwrap_or("")
}

fn parse_label(s: &str) -> Result<Option<Category>> {
    if s.trim().is_empty() {
        Ok(None)
    } else {
        s.parse().map(Some)
    }
}

fn parse_f64(s: &str, what: &str, line: u64) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::Format(format!("line {line}: {what} is not a finite number: {s:?}")))
}

fn flush<W: Write>(mut w: csv::Writer<W>) -> Result<()> {
    w.flush().map_err(|e| Error::Format(e.to_string()))
}

/// Writes encounters as `encounter_id,label,vehicle,t,lat,lon` rows.
pub fn write_encounters<W: Write>(output: W, encounters: &[Encounter]) -> Result<()> {
    let mut w = csv::Writer::from_writer(output);
    w.write_record(ENCOUNTER_HEADER)?;
    for e in encounters {
        for (tag, traj) in [("a", &e.a), ("b", &e.b)] {
            for p in &traj.points {
                w.write_record([
                    e.id.as_str(),
                    label_field(e.label),
                    tag,
                    &p.t.to_string(),
                    &p.lat.to_string(),
                    &p.lon.to_string(),
                ])?;
            }
        }
    }
    flush(w)
}

/// Reads an encounter file. Speed and heading are not stored and come back as zero.
pub fn read_encounters<R: Read>(input: R) -> Result<Vec<Encounter>> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ENCOUNTER_HEADER {
        return Err(Error::Format(format!("expected encounter header {:?}", ENCOUNTER_HEADER.join(","))));
    }
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut out: Vec<Encounter> = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let id = &rec[0];
        let label = parse_label(&rec[1]).map_err(|e| Error::Format(format!("line {line}: {e}")))?;
        let slot = *index.entry(id.to_string()).or_insert_with(|| {
            out.push(Encounter {
                id: id.to_string(),
                a: Trajectory::new(format!("{id}/a"), format!("{id}/a"), Vec::new()),
                b: Trajectory::new(format!("{id}/b"), format!("{id}/b"), Vec::new()),
                label,
            });
            out.len() - 1
        });
        let point = TrajectoryPoint {
            t: parse_f64(&rec[3], "t", line)?,
            lat: parse_f64(&rec[4], "lat", line)?,
            lon: parse_f64(&rec[5], "lon", line)?,
            speed: 0.0,
            heading: 0.0,
        };
        match &rec[2] {
            "a" => out[slot].a.points.push(point),
            "b" => out[slot].b.points.push(point),
            other => return Err(Error::Format(format!("line {line}: vehicle must be a or b, got {other:?}"))),
        }
    }
    for e in &out {
        if e.a.len() != e.b.len() {
            return Err(Error::Format(format!("encounter {} has unequal vehicle segments", e.id)));
        }
    }
    Ok(out)
}

/// One row of a feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub values: Vec<f64>,
    pub label: Option<Category>,
}

/// Writes one row per vector. A trailing label column is written when any row has a label.
pub fn write_features<W: Write>(output: W, rows: &[FeatureRow]) -> Result<()> {
    let labeled = rows.iter().any(|r| r.label.is_some());
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(output);
    for row in rows {
        let mut fields: Vec<String> = row.values.iter().map(|v| v.to_string()).collect();
        if labeled {
            fields.push(label_field(row.label).to_string());
        }
        w.write_record(&fields)?;
    }
    flush(w)
}

/// Reads a feature matrix. A non-numeric last column is taken as the label column.
pub fn read_features<R: Read>(input: R) -> Result<Vec<FeatureRow>> {
    let mut r = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(input);
    let mut out = Vec::new();
    let mut width: Option<usize> = None;
    let mut labeled: Option<bool> = None;
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.is_empty() {
            continue;
        }
        let last = rec.get(rec.len() - 1).unwrap_or("");
        let has_label = *labeled.get_or_insert_with(|| last.trim().is_empty() || last.trim().parse::<f64>().is_err());
        let n_values = rec.len() - has_label as usize;
        if let Some(w) = width {
            if w != n_values {
                return Err(Error::Format(format!("line {line}: expected {w} values, found {n_values}")));
            }
        }
        width = Some(n_values);
        let values = (0..n_values)
            .map(|i| parse_f64(&rec[i], "feature value", line))
            .collect::<Result<Vec<_>>>()?;
        let label = if has_label {
            parse_label(last).map_err(|e| Error::Format(format!("line {line}: {e}")))?
        } else {
            None
        };
        out.push(FeatureRow { values, label });
    }
    Ok(out)
}

/// Writes `min,..` and `max,..` rows.
pub fn write_normalization<W: Write>(output: W, p: &NormalizationParams) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(output);
    for (tag, row) in [("min", &p.min), ("max", &p.max)] {
        let mut fields = vec![tag.to_string()];
        fields.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&fields)?;
    }
    flush(w)
}

pub fn read_normalization<R: Read>(input: R) -> Result<NormalizationParams> {
    let mut r = csv::ReaderBuilder::new().has_headers(false).from_reader(input);
    let mut min = None;
    let mut max = None;
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let values = rec
            .iter()
            .skip(1)
            .map(|s| parse_f64(s, "normalization bound", line))
            .collect::<Result<Vec<_>>>()?;
        match &rec[0] {
            "min" => min = Some(values),
            "max" => max = Some(values),
            other => return Err(Error::Format(format!("line {line}: unknown row tag {other:?}"))),
        }
    }
    let p = NormalizationParams {
        min: min.ok_or_else(|| Error::Format("normalization file lacks a min row".into()))?,
        max: max.ok_or_else(|| Error::Format("normalization file lacks a max row".into()))?,
    };
    p.validate()?;
    Ok(p)
}

/// Ground truth written alongside a generated trip log.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedLabel {
    pub encounter_id: String,
    pub trip_a: String,
    pub trip_b: String,
    pub label: Category,
}

pub const LABELS_HEADER: [&str; 4] = ["encounter_id", "trip_a", "trip_b", "label"];

pub fn write_labels<W: Write>(output: W, labels: &[GeneratedLabel]) -> Result<()> {
    let mut w = csv::Writer::from_writer(output);
    w.write_record(LABELS_HEADER)?;
    for l in labels {
        w.write_record([l.encounter_id.as_str(), &l.trip_a, &l.trip_b, l.label.name()])?;
    }
    flush(w)
}

pub fn read_labels<R: Read>(input: R) -> Result<Vec<GeneratedLabel>> {
    let mut r = csv::Reader::from_reader(input);
    if r.headers()?.iter().collect::<Vec<_>>() != LABELS_HEADER {
        return Err(Error::Format(format!("expected labels header {:?}", LABELS_HEADER.join(","))));
    }
    r.records()
        .map(|rec| {
            let rec = rec?;
            let line = rec.position().map(|p| p.line()).unwrap_or(0);
            Ok(GeneratedLabel {
                encounter_id: rec[0].to_string(),
                trip_a: rec[1].to_string(),
                trip_b: rec[2].to_string(),
                label: rec[3].parse().map_err(|e| Error::Format(format!("line {line}: {e}")))?,
            })
        })
        .collect()
}
