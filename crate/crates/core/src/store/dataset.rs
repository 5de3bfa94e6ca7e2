//! On-disk dataset layout: `manifest.json`, `series/*.csv`, `events/*.csv`,
//! `incidents.csv`, `records.csv` and `ground_truth.json`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use super::{
    EventInterval, EventSequenceData, GroundTruth, IncidentLog, Manifest, Record, RecordTable,
    TelemetryStore, TimeSeriesData,
};
use crate::error::{Error, Result};
use crate::json::{from_slice_with_path, to_canonical_bytes};

pub(crate) fn series_file(key: &str) -> String {
    format!("series/{}.csv", key.replace('/', "__"))
}

pub(crate) fn events_file(key: &str) -> String {
    format!("events/{}.csv", key.replace('/', "__"))
}

fn dataset_err(file: &str, line: Option<u64>, message: impl Into<String>) -> Error {
    Error::Dataset {
        file: file.to_string(),
        line,
        message: message.into(),
    }
}

fn csv_err(file: &str, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line());
    dataset_err(file, line, e.to_string())
}

fn read_bytes(dir: &Path, file: &str, what: &str) -> Result<Vec<u8>> {
    fs::read(dir.join(file)).map_err(|e| dataset_err(file, None, format!("cannot read {what}: {e}")))
}

fn reader(bytes: &[u8]) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(bytes)
}

fn read_series(dir: &Path, key: &str, file: &str) -> Result<TimeSeriesData> {
    let bytes = fs::read(dir.join(file))
        .map_err(|_| dataset_err(file, None, format!("missing series file for key `{key}`")))?;
    let mut timestamps = Vec::new();
    let mut values = Vec::new();
    for row in reader(&bytes).deserialize::<(i64, f64)>() {
        let (t, v) = row.map_err(|e| csv_err(file, e))?;
        timestamps.push(t);
        values.push(v);
    }
    TimeSeriesData::new(timestamps, values).map_err(|e| dataset_err(file, None, e.to_string()))
}

fn read_events(dir: &Path, key: &str, file: &str) -> Result<EventSequenceData> {
    let bytes = fs::read(dir.join(file))
        .map_err(|_| dataset_err(file, None, format!("missing events file for key `{key}`")))?;
    let mut intervals = Vec::new();
    for row in reader(&bytes).deserialize::<EventInterval>() {
        intervals.push(row.map_err(|e| csv_err(file, e))?);
    }
    EventSequenceData::new(intervals).map_err(|e| dataset_err(file, None, e.to_string()))
}

fn read_records(dir: &Path, manifest: &Manifest) -> Result<RecordTable> {
    let spec = &manifest.records;
    let file = spec.file.as_str();
    let bytes = read_bytes(dir, file, "records")?;
    let mut rdr = reader(&bytes);
    let headers = rdr.headers().map_err(|e| csv_err(file, e))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| dataset_err(file, Some(1), format!("missing column `{name}`")))
    };
    let ts = col("timestamp")?;
    let value = col("value")?;
    let scope: Vec<usize> = spec.scope_fields.iter().map(|f| col(f)).collect::<Result<_>>()?;
    let filters: Vec<usize> = spec.filter_fields.iter().map(|f| col(f)).collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(file, e))?;
        let line = rec.position().map(|p| p.line());
        let field = |i: usize| rec.get(i).unwrap_or_default().to_string();
        let timestamp = rec
            .get(ts)
            .unwrap_or_default()
            .parse::<i64>()
            .map_err(|e| dataset_err(file, line, format!("bad timestamp: {e}")))?;
        let v = rec
            .get(value)
            .unwrap_or_default()
            .parse::<f64>()
            .map_err(|e| dataset_err(file, line, format!("bad value: {e}")))?;
        rows.push(Record {
            timestamp,
            scope: scope.iter().map(|i| field(*i)).collect(),
            filters: filters.iter().map(|i| field(*i)).collect(),
            value: v,
        });
    }
    rows.sort_by_key(|r| r.timestamp);
    Ok(RecordTable {
        scope_fields: spec.scope_fields.clone(),
        filter_fields: spec.filter_fields.clone(),
        rows,
    })
}

impl TelemetryStore {
    /// Loads a dataset directory.
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let manifest_bytes = fs::read(dir.join("manifest.json"))
            .map_err(|_| dataset_err("manifest.json", None, "missing manifest"))?;
        let manifest: Manifest = from_slice_with_path(&manifest_bytes).map_err(|e| match e {
            Error::Schema { path, message } => {
                dataset_err("manifest.json", None, format!("{path}: {message}"))
            }
            other => other,
        })?;
        if manifest.step <= 0 || manifest.window.is_empty() {
            return Err(dataset_err("manifest.json", None, "window and step must be positive"));
        }

        let mut series = BTreeMap::new();
        for (key, file) in &manifest.series {
            series.insert(key.clone(), read_series(dir, key, file)?);
        }
        let mut events = BTreeMap::new();
        for (key, file) in &manifest.events {
            events.insert(key.clone(), read_events(dir, key, file)?);
        }

        let file = manifest.incidents.as_str();
        let bytes = read_bytes(dir, file, "incidents")?;
        let mut incidents = Vec::new();
        for row in reader(&bytes).deserialize::<IncidentLog>() {
            incidents.push(row.map_err(|e| csv_err(file, e))?);
        }
        incidents.sort_by_key(|i| i.timestamp);

        let records = read_records(dir, &manifest)?;

        let ground_truth = match &manifest.ground_truth {
            Some(file) => {
                let bytes = read_bytes(dir, file, "ground truth")?;
                Some(from_slice_with_path::<GroundTruth>(&bytes).map_err(|e| dataset_err(file, None, e.to_string()))?)
            }
            None => None,
        };

        Ok(Self {
            manifest,
            series,
            events,
            incidents,
            records,
            ground_truth,
        })
    }

    /// Writes the dataset into `dir`, creating it if needed.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir.join("series"))?;
        fs::create_dir_all(dir.join("events"))?;
        fs::write(dir.join("manifest.json"), to_canonical_bytes(&self.manifest)?)?;

        for (key, data) in &self.series {
            let file = &self.manifest.series[key];
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["timestamp", "value"]).map_err(|e| csv_err(file, e))?;
            for (t, v) in data.timestamps.iter().zip(&data.values) {
                w.write_record([t.to_string(), v.to_string()]).map_err(|e| csv_err(file, e))?;
            }
            write_csv(dir, file, w)?;
        }
        for (key, data) in &self.events {
            let file = &self.manifest.events[key];
            let mut w = csv::Writer::from_writer(Vec::new());
            if data.intervals.is_empty() {
                w.write_record(["start", "end", "label"]).map_err(|e| csv_err(file, e))?;
            }
            for iv in &data.intervals {
                w.serialize(iv).map_err(|e| csv_err(file, e))?;
            }
            write_csv(dir, file, w)?;
        }

        let file = &self.manifest.incidents;
        let mut w = csv::Writer::from_writer(Vec::new());
        for i in &self.incidents {
            w.serialize(i).map_err(|e| csv_err(file, e))?;
        }
        write_csv(dir, file, w)?;

        let file = &self.manifest.records.file;
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["timestamp".to_string()];
        header.extend(self.records.scope_fields.iter().cloned());
        header.extend(self.records.filter_fields.iter().cloned());
        header.push("value".into());
        w.write_record(&header).map_err(|e| csv_err(file, e))?;
        for r in &self.records.rows {
            let mut row = vec![r.timestamp.to_string()];
            row.extend(r.scope.iter().cloned());
            row.extend(r.filters.iter().cloned());
            row.push(r.value.to_string());
            w.write_record(&row).map_err(|e| csv_err(file, e))?;
        }
        write_csv(dir, file, w)?;

        if let (Some(file), Some(gt)) = (&self.manifest.ground_truth, &self.ground_truth) {
            fs::write(dir.join(file), to_canonical_bytes(gt)?)?;
        }
        Ok(())
    }
}

fn write_csv(dir: &Path, file: &str, w: csv::Writer<Vec<u8>>) -> Result<()> {
    let bytes = w
        .into_inner()
        .map_err(|e| dataset_err(file, None, e.to_string()))?;
    if let Some(parent) = dir.join(file).parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(dir.join(file), bytes)?;
    Ok(())
}
