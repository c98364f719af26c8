//! Runtime side of the monitoring system: persistence, alerting, the
//! review workflow, notification delivery, the REST API and a stream
//! simulator that drives everything end to end.

pub mod api;
pub mod backend;
pub mod model_server;
pub mod notify;
pub mod remote;
pub mod server;
pub mod simulate;
mod thumbs;

pub use backend::{AlertRecord, AlertState, Backend, BackendError, Decision, RetrainingItem};
