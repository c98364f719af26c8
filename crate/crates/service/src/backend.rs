//! Relational persistence for chunks, inferences, alerts, notifications and
//! the retraining queue, plus the alert review state machine.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::{Arc, Mutex, MutexGuard};

use rusqlite::types::ToSql;
use rusqlite::{params, Connection, OptionalExtension, Row, Transaction, TransactionBehavior};
use serde::{Deserialize, Serialize};
use vigil_core::classify::{now_ms, InferenceRecord};
use vigil_core::eval::{write_annotation_file, DatasetManifest, ManifestEntry};
use vigil_core::ingest::VideoChunk;
use vigil_core::{ClassLabel, ScoreVector};

/// Source of `created_ts`/`reviewed_ts` values, in milliseconds.
pub type Clock = Arc<dyn Fn() -> i64 + Send + Sync>;

pub const DEFAULT_PAGE_SIZE: u32 = 50;
pub const MAX_PAGE_SIZE: u32 = 500;

const SCHEMA: &str = "
CREATE TABLE IF NOT EXISTS chunks (
    chunk_id     TEXT PRIMARY KEY,
    stream_id    TEXT NOT NULL,
    start_ts     INTEGER NOT NULL,
    start_frame  INTEGER NOT NULL,
    duration_s   REAL NOT NULL,
    frame_count  INTEGER NOT NULL,
    storage_key  TEXT NOT NULL UNIQUE,
    partial      INTEGER NOT NULL
);
CREATE TABLE IF NOT EXISTS inferences (
    inference_id INTEGER PRIMARY KEY,
    chunk_id     TEXT NOT NULL REFERENCES chunks(chunk_id),
    label        INTEGER NOT NULL,
    scores       TEXT NOT NULL,
    model_id     TEXT NOT NULL,
    latency_ms   REAL NOT NULL,
    created_ts   INTEGER NOT NULL,
    UNIQUE (chunk_id, model_id)
);
CREATE TABLE IF NOT EXISTS alerts (
    alert_id     INTEGER PRIMARY KEY,
    inference_id INTEGER NOT NULL UNIQUE REFERENCES inferences(inference_id),
    chunk_id     TEXT NOT NULL,
    stream_id    TEXT NOT NULL,
    label        INTEGER NOT NULL CHECK (label IN (0, 1, 2)),
    scores       TEXT NOT NULL,
    state        TEXT NOT NULL CHECK (state IN ('pending', 'confirmed', 'dismissed')),
    created_ts   INTEGER NOT NULL,
    reviewed_ts  INTEGER,
    reviewer     TEXT,
    CHECK ((state = 'pending') = (reviewed_ts IS NULL))
);
CREATE INDEX IF NOT EXISTS alerts_by_time ON alerts (created_ts DESC, alert_id DESC);
CREATE TABLE IF NOT EXISTS notifications (
    notification_id INTEGER PRIMARY KEY,
    alert_id        INTEGER NOT NULL UNIQUE REFERENCES alerts(alert_id),
    stream_id       TEXT NOT NULL,
    label           INTEGER NOT NULL,
    created_ts      INTEGER NOT NULL,
    delivery_state  TEXT NOT NULL CHECK (delivery_state IN ('queued', 'sent', 'failed')),
    attempts        INTEGER NOT NULL DEFAULT 0,
    last_error      TEXT
);
CREATE TABLE IF NOT EXISTS retraining_items (
    item_id      INTEGER PRIMARY KEY,
    chunk_id     TEXT NOT NULL REFERENCES chunks(chunk_id),
    predicted    INTEGER NOT NULL,
    corrected    INTEGER,
    source       TEXT NOT NULL CHECK (source IN ('dismissed_alert', 'report')),
    alert_id     INTEGER UNIQUE REFERENCES alerts(alert_id),
    created_ts   INTEGER NOT NULL,
    CHECK (corrected IS NULL OR corrected != predicted)
);
";

#[derive(Debug, thiserror::Error)]
pub enum BackendError {
    #[error("unknown chunk: {0}")]
    UnknownChunk(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("conflict: {0}")]
    Conflict(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("persistence failure: {0}")]
    Persistence(String),
}

impl From<rusqlite::Error> for BackendError {
    fn from(e: rusqlite::Error) -> Self {
        BackendError::Persistence(e.to_string())
    }
}

type Result<T, E = BackendError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlertState {
    Pending,
    Confirmed,
    Dismissed,
}

impl AlertState {
    pub const ALL: [AlertState; 3] = [AlertState::Pending, AlertState::Confirmed, AlertState::Dismissed];

    pub fn as_str(self) -> &'static str {
        match self {
            AlertState::Pending => "pending",
            AlertState::Confirmed => "confirmed",
            AlertState::Dismissed => "dismissed",
        }
    }
}

impl fmt::Display for AlertState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AlertState {
    type Err = BackendError;

    fn from_str(s: &str) -> Result<Self> {
        AlertState::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| BackendError::Validation(format!("unknown alert state {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Confirmed,
    Dismissed,
}

impl From<Decision> for AlertState {
    fn from(d: Decision) -> Self {
        match d {
            Decision::Confirmed => AlertState::Confirmed,
            Decision::Dismissed => AlertState::Dismissed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlertRecord {
    pub alert_id: i64,
    pub chunk_id: String,
    pub stream_id: String,
    pub label: ClassLabel,
    pub scores: ScoreVector,
    pub state: AlertState,
    pub created_ts: i64,
    pub reviewed_ts: Option<i64>,
    pub reviewer: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RetrainingSource {
    DismissedAlert,
    Report,
}

impl RetrainingSource {
    fn as_str(self) -> &'static str {
        match self {
            RetrainingSource::DismissedAlert => "dismissed_alert",
            RetrainingSource::Report => "report",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetrainingItem {
    pub item_id: i64,
    pub chunk_id: String,
    pub storage_key: String,
    pub predicted: ClassLabel,
    pub corrected: Option<ClassLabel>,
    pub source: RetrainingSource,
    pub alert_id: Option<i64>,
    pub created_ts: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeliveryState {
    Queued,
    Sent,
    Failed,
}

impl DeliveryState {
    pub fn as_str(self) -> &'static str {
        match self {
            DeliveryState::Queued => "queued",
            DeliveryState::Sent => "sent",
            DeliveryState::Failed => "failed",
        }
    }

    fn parse(s: &str) -> rusqlite::Result<Self> {
        match s {
            "queued" => Ok(DeliveryState::Queued),
            "sent" => Ok(DeliveryState::Sent),
            "failed" => Ok(DeliveryState::Failed),
            other => Err(rusqlite::Error::InvalidColumnType(0, other.to_string(), rusqlite::types::Type::Text)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NotificationMessage {
    pub notification_id: i64,
    pub alert_id: i64,
    pub stream_id: String,
    pub label: ClassLabel,
    pub created_ts: i64,
    pub delivery_state: DeliveryState,
    pub attempts: u32,
    pub last_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordOutcome {
    pub inference_id: i64,
    /// The (chunk_id, model_id) pair was already stored; nothing changed.
    pub duplicate: bool,
    pub alert: Option<AlertRecord>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AlertFilter {
    pub state: Option<AlertState>,
    pub stream_id: Option<String>,
    pub since_ts: Option<i64>,
    /// 1-based.
    pub page: u32,
    pub page_size: u32,
}

impl AlertFilter {
    pub fn all() -> Self {
        AlertFilter { page: 1, page_size: DEFAULT_PAGE_SIZE, ..Default::default() }
    }

    pub fn state(state: AlertState) -> Self {
        AlertFilter { state: Some(state), ..Self::all() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.page == 0 {
            return Err(BackendError::Validation("page is 1-based".into()));
        }
        if self.page_size == 0 || self.page_size > MAX_PAGE_SIZE {
            return Err(BackendError::Validation(format!("page_size must be in 1..={MAX_PAGE_SIZE}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Page<T> {
    pub items: Vec<T>,
    pub page: u32,
    pub page_size: u32,
    pub total: u64,
    pub has_more: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricsSummary {
    /// Stored inferences per predicted class name.
    pub inferences: BTreeMap<String, u64>,
    pub total_inferences: u64,
    pub alerts: BTreeMap<String, u64>,
    pub notifications: BTreeMap<String, u64>,
    pub retraining_queue: u64,
    pub dead_letters: u64,
}

/// SQLite-backed store; every mutation is one transaction.
pub struct Backend {
    conn: Mutex<Connection>,
    clock: Clock,
    dead_letters: Mutex<Vec<InferenceRecord>>,
    pub(crate) dispatch_lock: Mutex<()>,
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|p| p.into_inner())
}

fn label_from(code: i64) -> rusqlite::Result<ClassLabel> {
    u8::try_from(code)
        .ok()
        .and_then(ClassLabel::from_code)
        .ok_or(rusqlite::Error::IntegralValueOutOfRange(0, code))
}

fn scores_from(text: &str) -> rusqlite::Result<ScoreVector> {
    serde_json::from_str(text)
        .map_err(|e| rusqlite::Error::FromSqlConversionFailure(0, rusqlite::types::Type::Text, Box::new(e)))
}

fn scores_text(scores: &ScoreVector) -> String {
    serde_json::to_string(scores).expect("plain floats")
}

const ALERT_COLUMNS: &str =
    "alert_id, chunk_id, stream_id, label, scores, state, created_ts, reviewed_ts, reviewer";

fn alert_from_row(row: &Row<'_>) -> rusqlite::Result<AlertRecord> {
    let state: String = row.get(5)?;
    Ok(AlertRecord {
        alert_id: row.get(0)?,
        chunk_id: row.get(1)?,
        stream_id: row.get(2)?,
        label: label_from(row.get(3)?)?,
        scores: scores_from(&row.get::<_, String>(4)?)?,
        state: state
            .parse()
            .map_err(|_| rusqlite::Error::InvalidColumnType(5, state.clone(), rusqlite::types::Type::Text))?,
        created_ts: row.get(6)?,
        reviewed_ts: row.get(7)?,
        reviewer: row.get(8)?,
    })
}

const CHUNK_COLUMNS: &str = "chunk_id, stream_id, start_ts, start_frame, duration_s, frame_count, storage_key, partial";

fn chunk_from_row(row: &Row<'_>) -> rusqlite::Result<VideoChunk> {
    Ok(VideoChunk {
        chunk_id: row.get(0)?,
        stream_id: row.get(1)?,
        start_ts: row.get::<_, i64>(2)? as u64,
        start_frame: row.get::<_, i64>(3)? as u64,
        duration_s: row.get(4)?,
        frame_count: row.get(5)?,
        storage_key: row.get(6)?,
        partial: row.get(7)?,
    })
}

fn load_alert(tx: &Connection, alert_id: i64) -> Result<AlertRecord> {
    tx.query_row(&format!("SELECT {ALERT_COLUMNS} FROM alerts WHERE alert_id = ?1"), [alert_id], alert_from_row)
        .optional()?
        .ok_or_else(|| BackendError::NotFound(format!("alert {alert_id}")))
}

fn insert_retraining(
    tx: &Transaction<'_>,
    chunk_id: &str,
    predicted: ClassLabel,
    corrected: Option<ClassLabel>,
    source: RetrainingSource,
    alert_id: Option<i64>,
    now: i64,
) -> Result<i64> {
    tx.execute(
        "INSERT INTO retraining_items (chunk_id, predicted, corrected, source, alert_id, created_ts)
         VALUES (?1, ?2, ?3, ?4, ?5, ?6)",
        params![chunk_id, predicted.code(), corrected.map(ClassLabel::code), source.as_str(), alert_id, now],
    )?;
    Ok(tx.last_insert_rowid())
}

impl Backend {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let conn = Connection::open(path)?;
        conn.pragma_update(None, "journal_mode", "WAL")?;
        Self::init(conn)
    }

    pub fn open_in_memory() -> Result<Self> {
        Self::init(Connection::open_in_memory()?)
    }

    fn init(conn: Connection) -> Result<Self> {
        conn.pragma_update(None, "foreign_keys", true)?;
        conn.execute_batch(SCHEMA)?;
        Ok(Backend {
            conn: Mutex::new(conn),
            clock: Arc::new(now_ms),
            dead_letters: Mutex::new(Vec::new()),
            dispatch_lock: Mutex::new(()),
        })
    }

    pub fn with_clock(mut self, clock: Clock) -> Self {
        self.clock = clock;
        self
    }

    pub fn now(&self) -> i64 {
        (self.clock)()
    }

    fn write<T>(&self, f: impl FnOnce(&Transaction<'_>) -> Result<T>) -> Result<T> {
        let mut conn = lock(&self.conn);
        let tx = conn.transaction_with_behavior(TransactionBehavior::Immediate)?;
        let out = f(&tx)?;
        tx.commit()?;
        Ok(out)
    }

    fn read<T>(&self, f: impl FnOnce(&Connection) -> Result<T>) -> Result<T> {
        f(&lock(&self.conn))
    }

    /// Makes a stored chunk known to the backend. Re-registering the same
    /// chunk is a no-op.
    pub fn register_chunk(&self, chunk: &VideoChunk) -> Result<()> {
        self.write(|tx| {
            tx.execute(
                &format!("INSERT OR IGNORE INTO chunks ({CHUNK_COLUMNS}) VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8)"),
                params![
                    chunk.chunk_id,
                    chunk.stream_id,
                    chunk.start_ts as i64,
                    chunk.start_frame as i64,
                    chunk.duration_s,
                    chunk.frame_count,
                    chunk.storage_key,
                    chunk.partial
                ],
            )?;
            Ok(())
        })
    }

    pub fn chunk(&self, chunk_id: &str) -> Result<VideoChunk> {
        self.read(|c| {
            c.query_row(&format!("SELECT {CHUNK_COLUMNS} FROM chunks WHERE chunk_id = ?1"), [chunk_id], chunk_from_row)
                .optional()?
                .ok_or_else(|| BackendError::NotFound(format!("chunk {chunk_id}")))
        })
    }

    pub fn inferences_for_chunk(&self, chunk_id: &str) -> Result<Vec<InferenceRecord>> {
        self.read(|c| {
            let mut stmt = c.prepare(
                "SELECT chunk_id, label, scores, model_id, latency_ms, created_ts FROM inferences
                 WHERE chunk_id = ?1 ORDER BY inference_id",
            )?;
            let rows = stmt.query_map([chunk_id], |row| {
                Ok(InferenceRecord {
                    chunk_id: row.get(0)?,
                    label: label_from(row.get(1)?)?,
                    scores: scores_from(&row.get::<_, String>(2)?)?,
                    model_id: row.get(3)?,
                    latency_ms: row.get(4)?,
                    created_ts: row.get(5)?,
                })
            })?;
            Ok(rows.collect::<rusqlite::Result<Vec<_>>>()?)
        })
    }

    /// Stores an inference. A critical label creates a pending alert and
    /// its queued notification in the same transaction. Resubmitting a
    /// (chunk_id, model_id) pair is a no-op.
    ///
    /// Records that fail on a persistence error are kept in the dead-letter
    /// queue.
    pub fn record_inference(&self, rec: &InferenceRecord) -> Result<RecordOutcome> {
        rec.validate().map_err(|e| BackendError::Validation(e.to_string()))?;
        let now = self.now();
        let result = self.write(|tx| {
            let stream_id: String = tx
                .query_row("SELECT stream_id FROM chunks WHERE chunk_id = ?1", [&rec.chunk_id], |r| r.get(0))
                .optional()?
                .ok_or_else(|| BackendError::UnknownChunk(rec.chunk_id.clone()))?;
            let inserted = tx.execute(
                "INSERT OR IGNORE INTO inferences (chunk_id, label, scores, model_id, latency_ms, created_ts)
                 VALUES (?1, ?2, ?3, ?4, ?5, ?6)",
                params![
                    rec.chunk_id,
                    rec.label.code(),
                    scores_text(&rec.scores),
                    rec.model_id,
                    rec.latency_ms,
                    rec.created_ts
                ],
            )?;
            if inserted == 0 {
                let inference_id = tx.query_row(
                    "SELECT inference_id FROM inferences WHERE chunk_id = ?1 AND model_id = ?2",
                    params![rec.chunk_id, rec.model_id],
                    |r| r.get(0),
                )?;
                return Ok(RecordOutcome { inference_id, duplicate: true, alert: None });
            }
            let inference_id = tx.last_insert_rowid();
            if !rec.label.is_critical() {
                return Ok(RecordOutcome { inference_id, duplicate: false, alert: None });
            }
            tx.execute(
                "INSERT INTO alerts (inference_id, chunk_id, stream_id, label, scores, state, created_ts)
                 VALUES (?1, ?2, ?3, ?4, ?5, 'pending', ?6)",
                params![inference_id, rec.chunk_id, stream_id, rec.label.code(), scores_text(&rec.scores), now],
            )?;
            let alert_id = tx.last_insert_rowid();
            tx.execute(
                "INSERT INTO notifications (alert_id, stream_id, label, created_ts, delivery_state)
                 VALUES (?1, ?2, ?3, ?4, 'queued')",
                params![alert_id, stream_id, rec.label.code(), now],
            )?;
            Ok(RecordOutcome { inference_id, duplicate: false, alert: Some(load_alert(tx, alert_id)?) })
        });
        if let Err(BackendError::Persistence(e)) = &result {
            log::warn!("inference for {} dead-lettered: {e}", rec.chunk_id);
            lock(&self.dead_letters).push(rec.clone());
        }
        result
    }

    pub fn dead_letters(&self) -> Vec<InferenceRecord> {
        lock(&self.dead_letters).clone()
    }

    /// Re-submits dead-lettered records; returns how many were stored.
    pub fn retry_dead_letters(&self) -> usize {
        let pending = std::mem::take(&mut *lock(&self.dead_letters));
        // failures push themselves back
        pending.iter().filter(|rec| self.record_inference(rec).is_ok()).count()
    }

    pub fn alert(&self, alert_id: i64) -> Result<AlertRecord> {
        self.read(|c| load_alert(c, alert_id))
    }

    /// Moves a pending alert to its final state. Dismissals feed the
    /// retraining queue.
    pub fn review_alert(
        &self,
        alert_id: i64,
        decision: Decision,
        reviewer: &str,
        corrected_label: Option<ClassLabel>,
    ) -> Result<AlertRecord> {
        let reviewer = reviewer.trim();
        if reviewer.is_empty() {
            return Err(BackendError::Validation("reviewer must not be empty".into()));
        }
        if decision == Decision::Confirmed && corrected_label.is_some() {
            return Err(BackendError::Validation("corrected_label only applies to dismissals".into()));
        }
        let now = self.now();
        self.write(|tx| {
            let alert = load_alert(tx, alert_id)?;
            if alert.state != AlertState::Pending {
                return Err(BackendError::Conflict(format!("alert {alert_id} is already {}", alert.state)));
            }
            if corrected_label == Some(alert.label) {
                return Err(BackendError::Validation(format!(
                    "corrected_label equals the predicted label {}",
                    alert.label
                )));
            }
            let state = AlertState::from(decision);
            let changed = tx.execute(
                "UPDATE alerts SET state = ?1, reviewed_ts = ?2, reviewer = ?3
                 WHERE alert_id = ?4 AND state = 'pending'",
                params![state.as_str(), now, reviewer, alert_id],
            )?;
            if changed != 1 {
                return Err(BackendError::Conflict(format!("alert {alert_id} changed concurrently")));
            }
            if decision == Decision::Dismissed {
                insert_retraining(
                    tx,
                    &alert.chunk_id,
                    alert.label,
                    corrected_label,
                    RetrainingSource::DismissedAlert,
                    Some(alert_id),
                    now,
                )?;
            }
            load_alert(tx, alert_id)
        })
    }

    /// Newest first; ties broken by descending id so pages are stable.
    pub fn list_alerts(&self, filter: &AlertFilter) -> Result<Page<AlertRecord>> {
        filter.validate()?;
        let mut clauses = Vec::new();
        let mut args: Vec<Box<dyn ToSql>> = Vec::new();
        if let Some(state) = filter.state {
            args.push(Box::new(state.as_str()));
            clauses.push(format!("state = ?{}", args.len()));
        }
        if let Some(stream) = &filter.stream_id {
            args.push(Box::new(stream.clone()));
            clauses.push(format!("stream_id = ?{}", args.len()));
        }
        if let Some(since) = filter.since_ts {
            args.push(Box::new(since));
            clauses.push(format!("created_ts >= ?{}", args.len()));
        }
        let filter_sql = if clauses.is_empty() { String::new() } else { format!("WHERE {}", clauses.join(" AND ")) };
        let arg_refs: Vec<&dyn ToSql> = args.iter().map(|a| a.as_ref()).collect();
        self.read(|c| {
            let total: i64 =
                c.query_row(&format!("SELECT COUNT(*) FROM alerts {filter_sql}"), arg_refs.as_slice(), |r| r.get(0))?;
            let offset = (filter.page as i64 - 1) * filter.page_size as i64;
            let mut stmt = c.prepare(&format!(
                "SELECT {ALERT_COLUMNS} FROM alerts {filter_sql}
                 ORDER BY created_ts DESC, alert_id DESC LIMIT {} OFFSET {offset}",
                filter.page_size
            ))?;
            let items = stmt.query_map(arg_refs.as_slice(), alert_from_row)?.collect::<rusqlite::Result<Vec<_>>>()?;
            Ok(Page {
                has_more: offset + (items.len() as i64) < total,
                items,
                page: filter.page,
                page_size: filter.page_size,
                total: total as u64,
            })
        })
    }

    /// Queues a chunk whose prediction was found to be wrong outside the
    /// alert workflow.
    pub fn report_false_classification(
        &self,
        chunk_id: &str,
        predicted: ClassLabel,
        corrected: Option<ClassLabel>,
    ) -> Result<RetrainingItem> {
        if corrected == Some(predicted) {
            return Err(BackendError::Validation("corrected label equals the predicted label".into()));
        }
        let now = self.now();
        let item_id = self.write(|tx| {
            let known: Option<i64> =
                tx.query_row("SELECT 1 FROM chunks WHERE chunk_id = ?1", [chunk_id], |r| r.get(0)).optional()?;
            if known.is_none() {
                return Err(BackendError::UnknownChunk(chunk_id.to_string()));
            }
            insert_retraining(tx, chunk_id, predicted, corrected, RetrainingSource::Report, None, now)
        })?;
        self.retraining_items()?
            .into_iter()
            .find(|i| i.item_id == item_id)
            .ok_or_else(|| BackendError::Persistence(format!("retraining item {item_id} vanished")))
    }

    /// Queue contents in insertion order.
    pub fn retraining_items(&self) -> Result<Vec<RetrainingItem>> {
        self.read(|c| {
            let mut stmt = c.prepare(
                "SELECT r.item_id, r.chunk_id, c.storage_key, r.predicted, r.corrected, r.source, r.alert_id, r.created_ts
                 FROM retraining_items r JOIN chunks c ON c.chunk_id = r.chunk_id ORDER BY r.item_id",
            )?;
            let rows = stmt.query_map([], |row| {
                let source: String = row.get(5)?;
                Ok(RetrainingItem {
                    item_id: row.get(0)?,
                    chunk_id: row.get(1)?,
                    storage_key: row.get(2)?,
                    predicted: label_from(row.get(3)?)?,
                    corrected: row.get::<_, Option<i64>>(4)?.map(label_from).transpose()?,
                    source: if source == "report" { RetrainingSource::Report } else { RetrainingSource::DismissedAlert },
                    alert_id: row.get(6)?,
                    created_ts: row.get(7)?,
                })
            })?;
            Ok(rows.collect::<rusqlite::Result<Vec<_>>>()?)
        })
    }

    /// Annotation file listing `<storage_key> <corrected label>` for every
    /// queued chunk with a corrected label. A chunk corrected more than once
    /// keeps its latest correction.
    pub fn retraining_export(&self) -> Result<Vec<u8>> {
        let mut latest: BTreeMap<String, (i64, ClassLabel)> = BTreeMap::new();
        for item in self.retraining_items()? {
            if let Some(label) = item.corrected {
                latest.insert(item.storage_key, (item.item_id, label));
            }
        }
        let mut rows: Vec<(i64, String, ClassLabel)> = latest.into_iter().map(|(k, (id, l))| (id, k, l)).collect();
        rows.sort();
        let manifest = DatasetManifest::new(
            rows.into_iter()
                .map(|(_, relative_path, label)| ManifestEntry { relative_path, label, normal_subtype: None })
                .collect(),
        )
        .map_err(|e| BackendError::Persistence(e.to_string()))?;
        write_annotation_file(&manifest).map_err(|e| BackendError::Persistence(e.to_string()))
    }

    pub fn notifications(&self) -> Result<Vec<NotificationMessage>> {
        self.query_notifications(None)
    }

    pub(crate) fn queued_notifications(&self) -> Result<Vec<NotificationMessage>> {
        self.query_notifications(Some(DeliveryState::Queued))
    }

    fn query_notifications(&self, state: Option<DeliveryState>) -> Result<Vec<NotificationMessage>> {
        self.read(|c| {
            let mut stmt = c.prepare(
                "SELECT notification_id, alert_id, stream_id, label, created_ts, delivery_state, attempts, last_error
                 FROM notifications WHERE ?1 IS NULL OR delivery_state = ?1 ORDER BY notification_id",
            )?;
            let rows = stmt.query_map([state.map(DeliveryState::as_str)], |row| {
                Ok(NotificationMessage {
                    notification_id: row.get(0)?,
                    alert_id: row.get(1)?,
                    stream_id: row.get(2)?,
                    label: label_from(row.get(3)?)?,
                    created_ts: row.get(4)?,
                    delivery_state: DeliveryState::parse(&row.get::<_, String>(5)?)?,
                    attempts: row.get(6)?,
                    last_error: row.get(7)?,
                })
            })?;
            Ok(rows.collect::<rusqlite::Result<Vec<_>>>()?)
        })
    }

    pub(crate) fn finish_notification(
        &self,
        notification_id: i64,
        state: DeliveryState,
        attempts: u32,
        last_error: Option<&str>,
    ) -> Result<()> {
        self.write(|tx| {
            tx.execute(
                "UPDATE notifications SET delivery_state = ?1, attempts = ?2, last_error = ?3 WHERE notification_id = ?4",
                params![state.as_str(), attempts, last_error, notification_id],
            )?;
            Ok(())
        })
    }

    pub fn metrics_summary(&self) -> Result<MetricsSummary> {
        let dead_letters = lock(&self.dead_letters).len() as u64;
        self.read(|c| {
            let grouped = |sql: &str| -> Result<Vec<(i64, u64)>> {
                let mut stmt = c.prepare(sql)?;
                let rows = stmt.query_map([], |r| Ok((r.get(0)?, r.get::<_, i64>(1)? as u64)))?;
                Ok(rows.collect::<rusqlite::Result<Vec<_>>>()?)
            };
            let mut inferences: BTreeMap<String, u64> = ClassLabel::ALL.iter().map(|l| (l.name().to_string(), 0)).collect();
            for (code, n) in grouped("SELECT label, COUNT(*) FROM inferences GROUP BY label")? {
                inferences.insert(label_from(code)?.name().to_string(), n);
            }
            let by_text = |sql: &str, keys: &[&str]| -> Result<BTreeMap<String, u64>> {
                let mut out: BTreeMap<String, u64> = keys.iter().map(|k| (k.to_string(), 0)).collect();
                let mut stmt = c.prepare(sql)?;
                for row in stmt.query_map([], |r| Ok((r.get::<_, String>(0)?, r.get::<_, i64>(1)? as u64)))? {
                    let (k, n) = row?;
                    out.insert(k, n);
                }
                Ok(out)
            };
            let alerts = by_text(
                "SELECT state, COUNT(*) FROM alerts GROUP BY state",
                &AlertState::ALL.map(AlertState::as_str),
            )?;
            let notifications = by_text(
                "SELECT delivery_state, COUNT(*) FROM notifications GROUP BY delivery_state",
                &["queued", "sent", "failed"],
            )?;
            let retraining_queue =
                c.query_row("SELECT COUNT(*) FROM retraining_items", [], |r| r.get::<_, i64>(0))? as u64;
            Ok(MetricsSummary {
                total_inferences: inferences.values().sum(),
                inferences,
                alerts,
                notifications,
                retraining_queue,
                dead_letters,
            })
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicI64, Ordering};

    fn chunk(stream: &str, start_ts: u64) -> VideoChunk {
        VideoChunk {
            chunk_id: VideoChunk::chunk_id_for(stream, start_ts),
            stream_id: stream.into(),
            start_ts,
            start_frame: start_ts * 30 / 1000,
            duration_s: 10.0,
            frame_count: 300,
            storage_key: VideoChunk::storage_key_for(stream, start_ts),
            partial: false,
        }
    }

    fn record(chunk_id: &str, label: ClassLabel) -> InferenceRecord {
        InferenceRecord {
            chunk_id: chunk_id.into(),
            label,
            scores: ScoreVector::smoothed_one_hot(label, 0.01),
            model_id: "m".into(),
            latency_ms: 1.0,
            created_ts: 0,
        }
    }

    fn ticking() -> Backend {
        let t = Arc::new(AtomicI64::new(1_000));
        Backend::open_in_memory().unwrap().with_clock(Arc::new(move || t.fetch_add(1, Ordering::SeqCst)))
    }

    #[test]
    fn persistence_failure_is_dead_lettered() {
        let b = ticking();
        b.register_chunk(&chunk("a", 0)).unwrap();
        lock(&b.conn).execute_batch("DROP TABLE notifications").unwrap();
        let rec = record(&chunk("a", 0).chunk_id, ClassLabel::Falling);
        assert!(matches!(b.record_inference(&rec), Err(BackendError::Persistence(_))));
        assert_eq!(b.dead_letters(), vec![rec.clone()]);
        // rolled back: no orphan inference or alert
        assert!(b.inferences_for_chunk(&rec.chunk_id).unwrap().is_empty());
        assert_eq!(b.retry_dead_letters(), 0);
        assert_eq!(b.dead_letters().len(), 1);
        lock(&b.conn).execute_batch(SCHEMA).unwrap();
        assert_eq!(b.retry_dead_letters(), 1);
        assert!(b.dead_letters().is_empty());
        assert_eq!(b.list_alerts(&AlertFilter::all()).unwrap().total, 1);
    }

    #[test]
    fn check_constraint_backs_the_state_machine() {
        let b = ticking();
        b.register_chunk(&chunk("a", 0)).unwrap();
        let alert = b.record_inference(&record("a-0000000000", ClassLabel::Staggering)).unwrap().alert.unwrap();
        let direct = lock(&b.conn).execute(
            "UPDATE alerts SET state = 'confirmed' WHERE alert_id = ?1",
            [alert.alert_id],
        );
        assert!(direct.is_err(), "reviewed state without reviewed_ts must be rejected");
    }
}
