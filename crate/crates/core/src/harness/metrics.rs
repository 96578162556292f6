use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const METRICS_HEADER: &str =
    "step,episodes,avg_return,epsilon,lambda,loss_dqn,loss_consolid,probe_action,buffer_bytes";

/// One logged record. Column order is fixed by the field order here.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub step: u64,
    #[serde(rename = "episodes")]
    pub episodes_completed: u64,
    /// Mean return of the last 20 completed episodes, or the running return of the first
    /// episode while none has finished.
    #[serde(rename = "avg_return")]
    pub avg_return_last_20: f64,
    pub epsilon: f64,
    pub lambda: f64,
    pub loss_dqn: f64,
    pub loss_consolid: f64,
    pub probe_action: Option<usize>,
    pub buffer_bytes: u64,
}

impl MetricsRow {
    pub fn is_finite(&self) -> bool {
        [
            self.avg_return_last_20,
            self.epsilon,
            self.lambda,
            self.loss_dqn,
            self.loss_consolid,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

pub fn metrics_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    w.write_record(METRICS_HEADER.split(','))?;
    Ok(w)
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Config(format!("{}: {other:?}", path.display())),
    })?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    if header.join(",") != METRICS_HEADER {
        return Err(Error::Config(format!(
            "{}: unexpected metrics header '{}'",
            path.display(),
            header.join(",")
        )));
    }
    reader
        .deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_with_empty_probe() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let rows = vec![
            MetricsRow {
                step: 100,
                episodes_completed: 0,
                avg_return_last_20: -100.0,
                epsilon: 0.901,
                lambda: 0.0,
                loss_dqn: 0.0,
                loss_consolid: 0.0,
                probe_action: None,
                buffer_bytes: 1600,
            },
            MetricsRow {
                step: 200,
                episodes_completed: 1,
                avg_return_last_20: -200.0,
                epsilon: 0.802,
                lambda: 0.25,
                loss_dqn: 1.5,
                loss_consolid: 0.125,
                probe_action: Some(2),
                buffer_bytes: 1600,
            },
        ];
        let mut w = metrics_writer(&path).unwrap();
        for r in &rows {
            w.serialize(r).unwrap();
        }
        w.flush().unwrap();
        drop(w);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with(METRICS_HEADER));
        assert!(text.lines().nth(1).unwrap().contains(",,1600"));
        assert_eq!(read_metrics(&path).unwrap(), rows);
    }
}
