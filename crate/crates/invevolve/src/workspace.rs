//! Self-contained problem instances on disk.
//!
//! A workspace directory holds everything needed to search for a policy:
//!
//! ```text
//! <workspace>/
//!   problem_description.md
//!   config.json                     cost parameters, lead time, spans
//!   data/historical_sequence.json   fit window (demand, features, notes)
//!   data/evaluation_sequence.json   holdout window
//!   baseline_policies/<family>.json tuned policy specs
//!   logs/                           engine output
//! ```
//!
//! The holdout is strictly out of bounds during search:
//! [`Workspace::load_for_epoch`] never opens the evaluation file, so no
//! code path running inside an epoch can read the future.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::{FeatureMap, PolicySpec};
use crate::sim::SystemConfig;
use crate::tuner::DemandStats;

pub const WORKSPACE_SCHEMA_VERSION: u32 = 1;

/// One observed day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayRecord {
    /// ISO-8601 calendar date.
    pub date: chrono::NaiveDate,
    pub demand: f64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub features: FeatureMap,
    /// Sparse textual annotation; present only on event-onset days.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Workspace-level configuration stored in `config.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkspaceConfig {
    pub schema_version: u32,
    pub seed_id: u32,
    pub archetype: String,
    /// Index of the first history day within the source seed series.
    pub slice_start: usize,
    pub lead_time: usize,
    pub holding_cost: f64,
    pub penalty_cost: f64,
    pub history_days: usize,
    pub evaluation_days: usize,
}

/// An in-memory workspace. `evaluation` is only populated by
/// [`Workspace::load_full`].
#[derive(Debug, Clone, PartialEq)]
pub struct Workspace {
    pub config: WorkspaceConfig,
    pub history: Vec<DayRecord>,
    pub evaluation: Option<Vec<DayRecord>>,
    pub baselines: Vec<(String, PolicySpec)>,
    pub root: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SequenceFile {
    schema_version: u32,
    days: Vec<DayRecord>,
}

impl Workspace {
    /// Loads a workspace for an epoch run. The evaluation sequence is
    /// deliberately not read.
    pub fn load_for_epoch(root: impl AsRef<Path>) -> Result<Self> {
        Self::load(root.as_ref(), false)
    }

    /// Loads a workspace including the holdout window, for final
    /// evaluation only.
    pub fn load_full(root: impl AsRef<Path>) -> Result<Self> {
        Self::load(root.as_ref(), true)
    }

    fn load(root: &Path, with_evaluation: bool) -> Result<Self> {
        let config: WorkspaceConfig = read_json(&root.join("config.json"))?;
        if config.schema_version != WORKSPACE_SCHEMA_VERSION {
            return Err(Error::Workspace(format!(
                "unsupported schema version {} in {}",
                config.schema_version,
                root.display()
            )));
        }
        let history: SequenceFile = read_json(&root.join("data/historical_sequence.json"))?;
        if history.days.len() != config.history_days {
            return Err(Error::Workspace(format!(
                "history has {} days, config says {}",
                history.days.len(),
                config.history_days
            )));
        }
        let evaluation = if with_evaluation {
            let eval: SequenceFile = read_json(&root.join("data/evaluation_sequence.json"))?;
            if eval.days.len() != config.evaluation_days {
                return Err(Error::Workspace(format!(
                    "evaluation has {} days, config says {}",
                    eval.days.len(),
                    config.evaluation_days
                )));
            }
            Some(eval.days)
        } else {
            None
        };

        let mut baselines = Vec::new();
        let baseline_dir = root.join("baseline_policies");
        if baseline_dir.is_dir() {
            let mut entries: Vec<PathBuf> = fs::read_dir(&baseline_dir)
                .map_err(|e| Error::io(&baseline_dir, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "json"))
                .collect();
            entries.sort();
            for path in entries {
                let spec: PolicySpec = read_json(&path)?;
                let name = path.file_stem().unwrap_or_default().to_string_lossy().into_owned();
                baselines.push((name, spec));
            }
        }

        Ok(Self { config, history: history.days, evaluation, baselines, root: root.to_path_buf() })
    }

    pub fn system_config(&self, horizon: usize) -> Result<SystemConfig> {
        SystemConfig::new(self.config.lead_time, self.config.holding_cost, self.config.penalty_cost, horizon)
    }

    pub fn history_demands(&self) -> Vec<f64> {
        self.history.iter().map(|d| d.demand).collect()
    }

    pub fn demand_stats(&self) -> DemandStats {
        DemandStats::from_series(&self.history_demands())
    }
}

/// Writes a workspace directory. Baselines may be empty (e.g. before
/// tuning); files are written atomically.
pub fn write_workspace(
    root: &Path,
    config: &WorkspaceConfig,
    description: &str,
    history: &[DayRecord],
    evaluation: &[DayRecord],
    baselines: &[(String, PolicySpec)],
) -> Result<()> {
    fs::create_dir_all(root.join("data")).map_err(|e| Error::io(root, e))?;
    fs::create_dir_all(root.join("baseline_policies")).map_err(|e| Error::io(root, e))?;
    write_atomic(&root.join("problem_description.md"), description.as_bytes())?;
    write_json(&root.join("config.json"), config)?;
    write_json(
        &root.join("data/historical_sequence.json"),
        &SequenceFile { schema_version: WORKSPACE_SCHEMA_VERSION, days: history.to_vec() },
    )?;
    write_json(
        &root.join("data/evaluation_sequence.json"),
        &SequenceFile { schema_version: WORKSPACE_SCHEMA_VERSION, days: evaluation.to_vec() },
    )?;
    for (name, spec) in baselines {
        write_json(&root.join("baseline_policies").join(format!("{name}.json")), spec)?;
    }
    Ok(())
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| Error::json(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| Error::json(path, e))?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

/// Temp-and-rename write so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Converts a demand CSV into a workspace. Expected columns: `date`,
/// `demand`, optional `note`, remaining numeric columns become features.
/// The last `evaluation_days` rows form the holdout.
pub fn workspace_from_csv(
    csv_path: &Path,
    out_root: &Path,
    lead_time: usize,
    holding_cost: f64,
    penalty_cost: f64,
    evaluation_days: usize,
) -> Result<()> {
    let mut reader = csv::Reader::from_path(csv_path)
        .map_err(|e| Error::Workspace(format!("{}: {e}", csv_path.display())))?;
    let headers: Vec<String> =
        reader.headers().map_err(|e| Error::Workspace(e.to_string()))?.iter().map(String::from).collect();
    let date_idx = headers
        .iter()
        .position(|h| h == "date")
        .ok_or_else(|| Error::Workspace("csv must have a `date` column".into()))?;
    let demand_idx = headers
        .iter()
        .position(|h| h == "demand")
        .ok_or_else(|| Error::Workspace("csv must have a `demand` column".into()))?;
    let note_idx = headers.iter().position(|h| h == "note");

    let mut days = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Workspace(e.to_string()))?;
        let date: chrono::NaiveDate = record[date_idx]
            .parse()
            .map_err(|e| Error::Workspace(format!("bad date {:?}: {e}", &record[date_idx])))?;
        let demand: f64 = record[demand_idx]
            .parse()
            .map_err(|e| Error::Workspace(format!("bad demand {:?}: {e}", &record[demand_idx])))?;
        let mut features = FeatureMap::new();
        for (i, field) in record.iter().enumerate() {
            if i == date_idx || i == demand_idx || Some(i) == note_idx {
                continue;
            }
            let value: f64 = field
                .parse()
                .map_err(|e| Error::Workspace(format!("bad feature {:?} in {}: {e}", field, headers[i])))?;
            features.insert(headers[i].clone(), value);
        }
        let note = note_idx.and_then(|i| {
            let s = record[i].trim();
            (!s.is_empty()).then(|| s.to_string())
        });
        days.push(DayRecord { date, demand, features, note });
    }

    if days.len() <= evaluation_days {
        return Err(Error::Workspace(format!(
            "{} rows cannot cover {} evaluation days plus history",
            days.len(),
            evaluation_days
        )));
    }
    let split = days.len() - evaluation_days;
    let config = WorkspaceConfig {
        schema_version: WORKSPACE_SCHEMA_VERSION,
        seed_id: 0,
        archetype: "csv_import".into(),
        slice_start: 0,
        lead_time,
        holding_cost,
        penalty_cost,
        history_days: split,
        evaluation_days,
    };
    let description = format!(
        "# Imported demand series\n\nSource: `{}`.\n\nUnit holding cost h = {holding_cost}, \
         unit penalty cost p = {penalty_cost}, replenishment lead time L = {lead_time} days.\n\
         The historical window covers {split} days; the final {evaluation_days} days are held \
         out for evaluation.\n",
        csv_path.display()
    );
    write_workspace(out_root, &config, &description, &days[..split], &days[split..], &[])
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn day(d: u32, demand: f64, note: Option<&str>) -> DayRecord {
        DayRecord {
            date: NaiveDate::from_ymd_opt(2024, 1, d).unwrap(),
            demand,
            features: FeatureMap::from([("temp_c".to_string(), 11.5)]),
            note: note.map(String::from),
        }
    }

    fn sample_config(history_days: usize, evaluation_days: usize) -> WorkspaceConfig {
        WorkspaceConfig {
            schema_version: WORKSPACE_SCHEMA_VERSION,
            seed_id: 3,
            archetype: "consumer_grocery".into(),
            slice_start: 40,
            lead_time: 5,
            holding_cost: 1.0,
            penalty_cost: 10.0,
            history_days,
            evaluation_days,
        }
    }

    #[test]
    fn round_trip_preserves_the_workspace() {
        let dir = tempfile::tempdir().unwrap();
        let history: Vec<DayRecord> = (1..=5).map(|i| day(i, i as f64, None)).collect();
        let eval: Vec<DayRecord> =
            (6..=8).map(|i| day(i, 2.0, (i == 6).then_some("strike began"))).collect();
        let baselines = vec![("base_stock".to_string(), PolicySpec::base_stock(12.0).unwrap())];
        write_workspace(dir.path(), &sample_config(5, 3), "# Test SKU\n", &history, &eval, &baselines)
            .unwrap();

        let ws = Workspace::load_full(dir.path()).unwrap();
        assert_eq!(ws.history, history);
        assert_eq!(ws.evaluation.as_deref(), Some(&eval[..]));
        assert_eq!(ws.baselines, baselines);

        // Notes serialize as absent fields, never empty strings.
        let raw = fs::read_to_string(dir.path().join("data/historical_sequence.json")).unwrap();
        assert!(!raw.contains("\"note\""));
        let raw_eval = fs::read_to_string(dir.path().join("data/evaluation_sequence.json")).unwrap();
        assert_eq!(raw_eval.matches("\"note\"").count(), 1);
    }

    #[test]
    fn epoch_loader_never_touches_the_holdout() {
        let dir = tempfile::tempdir().unwrap();
        let history: Vec<DayRecord> = (1..=5).map(|i| day(i, 1.0, None)).collect();
        let eval: Vec<DayRecord> = (6..=7).map(|i| day(i, 1.0, None)).collect();
        write_workspace(dir.path(), &sample_config(5, 2), "d", &history, &eval, &[]).unwrap();

        // Corrupt the holdout; the epoch loader must not notice.
        fs::write(dir.path().join("data/evaluation_sequence.json"), b"not json at all").unwrap();
        let ws = Workspace::load_for_epoch(dir.path()).unwrap();
        assert!(ws.evaluation.is_none());
        assert!(Workspace::load_full(dir.path()).is_err());
    }

    #[test]
    fn csv_import_splits_history_and_holdout() {
        let dir = tempfile::tempdir().unwrap();
        let csv_path = dir.path().join("demand.csv");
        let mut rows = String::from("date,demand,promo,note\n");
        for i in 1..=10 {
            let note = if i == 4 { "recall announced" } else { "" };
            rows.push_str(&format!("2024-02-{i:02},{},0.{i},{note}\n", i * 2));
        }
        fs::write(&csv_path, rows).unwrap();

        let out = dir.path().join("ws");
        workspace_from_csv(&csv_path, &out, 2, 1.0, 9.0, 3).unwrap();
        let ws = Workspace::load_full(&out).unwrap();
        assert_eq!(ws.history.len(), 7);
        assert_eq!(ws.evaluation.as_ref().unwrap().len(), 3);
        assert_eq!(ws.history[3].note.as_deref(), Some("recall announced"));
        assert_eq!(ws.history[1].features["promo"], 0.2);
        assert_eq!(ws.config.lead_time, 2);
    }
}
