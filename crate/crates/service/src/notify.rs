//! Delivery of alert notifications with bounded retries.

use std::io::Write;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use serde::Serialize;

use crate::backend::{Backend, BackendError, DeliveryState, NotificationMessage};

pub trait NotificationSink: Send + Sync {
    fn deliver(&self, msg: &NotificationMessage) -> Result<(), String>;
}

/// Writes one line per notification.
pub struct LogSink {
    out: Mutex<Box<dyn Write + Send>>,
}

impl LogSink {
    pub fn stderr() -> Self {
        Self::to_writer(Box::new(std::io::stderr()))
    }

    pub fn to_writer(out: Box<dyn Write + Send>) -> Self {
        LogSink { out: Mutex::new(out) }
    }
}

impl NotificationSink for LogSink {
    fn deliver(&self, msg: &NotificationMessage) -> Result<(), String> {
        let mut out = self.out.lock().unwrap_or_else(|p| p.into_inner());
        writeln!(
            out,
            "ALERT alert_id={} stream_id={} label={} created_ts={}",
            msg.alert_id, msg.stream_id, msg.label, msg.created_ts
        )
        .and_then(|_| out.flush())
        .map_err(|e| e.to_string())
    }
}

/// JSON body POSTed by [`WebhookSink`].
#[derive(Debug, Serialize)]
struct WebhookBody<'a> {
    alert_id: i64,
    stream_id: &'a str,
    label: u8,
    label_name: &'a str,
    created_ts: i64,
}

/// POSTs each notification as JSON; any non-2xx status is a failure.
pub struct WebhookSink {
    url: String,
    client: reqwest::blocking::Client,
}

impl WebhookSink {
    pub fn new(url: impl Into<String>, timeout: Duration) -> Result<Self, String> {
        let client = reqwest::blocking::Client::builder().timeout(timeout).build().map_err(|e| e.to_string())?;
        Ok(WebhookSink { url: url.into(), client })
    }
}

impl NotificationSink for WebhookSink {
    fn deliver(&self, msg: &NotificationMessage) -> Result<(), String> {
        let body = WebhookBody {
            alert_id: msg.alert_id,
            stream_id: &msg.stream_id,
            label: msg.label.code(),
            label_name: msg.label.name(),
            created_ts: msg.created_ts,
        };
        let resp = self.client.post(&self.url).json(&body).send().map_err(|e| e.to_string())?;
        if resp.status().is_success() {
            Ok(())
        } else {
            Err(format!("webhook returned {}", resp.status()))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    /// Total delivery attempts, the first one included.
    pub max_attempts: u32,
    /// Wait before the second attempt; doubles afterwards.
    pub initial_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { max_attempts: 3, initial_backoff: Duration::from_secs(1) }
    }
}

impl RetryPolicy {
    pub fn immediate(max_attempts: u32) -> Self {
        RetryPolicy { max_attempts, initial_backoff: Duration::ZERO }
    }

    /// Wait before attempt `attempt` (1-based).
    pub fn backoff(&self, attempt: u32) -> Duration {
        if attempt <= 1 {
            Duration::ZERO
        } else {
            self.initial_backoff.saturating_mul(1u32 << (attempt - 2).min(16))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Delivery {
    pub state: DeliveryState,
    pub attempts: u32,
    pub last_error: Option<String>,
}

/// Delivers one message, retrying per `policy`.
pub fn notify(msg: &NotificationMessage, sink: &dyn NotificationSink, policy: &RetryPolicy) -> Delivery {
    let mut last_error = None;
    for attempt in 1..=policy.max_attempts.max(1) {
        std::thread::sleep(policy.backoff(attempt));
        match sink.deliver(msg) {
            Ok(()) => return Delivery { state: DeliveryState::Sent, attempts: attempt, last_error: None },
            Err(e) => {
                log::debug!("notification {} attempt {attempt} failed: {e}", msg.notification_id);
                last_error = Some(e);
            }
        }
    }
    Delivery { state: DeliveryState::Failed, attempts: policy.max_attempts.max(1), last_error }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct DispatchSummary {
    pub sent: usize,
    pub failed: usize,
}

/// Delivers every queued notification once, oldest first.
pub fn dispatch_pending(
    backend: &Backend,
    sink: &dyn NotificationSink,
    policy: &RetryPolicy,
) -> Result<DispatchSummary, BackendError> {
    let _one_dispatcher = backend.dispatch_lock.lock().unwrap_or_else(|p| p.into_inner());
    let mut summary = DispatchSummary::default();
    for msg in backend.queued_notifications()? {
        let d = notify(&msg, sink, policy);
        backend.finish_notification(msg.notification_id, d.state, d.attempts, d.last_error.as_deref())?;
        match d.state {
            DeliveryState::Sent => summary.sent += 1,
            _ => summary.failed += 1,
        }
    }
    Ok(summary)
}

/// Background worker draining the notification queue.
pub struct Dispatcher {
    stop: Arc<AtomicBool>,
    wake: Arc<(Mutex<bool>, Condvar)>,
    thread: Option<JoinHandle<()>>,
}

impl Dispatcher {
    pub fn spawn(
        backend: Arc<Backend>,
        sink: Arc<dyn NotificationSink>,
        policy: RetryPolicy,
        poll: Duration,
    ) -> Dispatcher {
        let stop = Arc::new(AtomicBool::new(false));
        let wake = Arc::new((Mutex::new(false), Condvar::new()));
        let thread = {
            let (stop, wake) = (stop.clone(), wake.clone());
            std::thread::spawn(move || loop {
                if let Err(e) = dispatch_pending(&backend, sink.as_ref(), &policy) {
                    log::error!("notification dispatch: {e}");
                }
                let (flag, cv) = &*wake;
                let mut woken = flag.lock().unwrap_or_else(|p| p.into_inner());
                if !*woken && !stop.load(Ordering::SeqCst) {
                    woken = cv.wait_timeout(woken, poll).unwrap_or_else(|p| p.into_inner()).0;
                }
                *woken = false;
                drop(woken);
                if stop.load(Ordering::SeqCst) {
                    break;
                }
            })
        };
        Dispatcher { stop, wake, thread: Some(thread) }
    }

    /// Asks the worker to run now instead of at the next poll.
    pub fn wake(&self) {
        let (flag, cv) = &*self.wake;
        *flag.lock().unwrap_or_else(|p| p.into_inner()) = true;
        cv.notify_one();
    }

    /// Stops after the current pass.
    pub fn stop(mut self) {
        self.shutdown();
    }

    fn shutdown(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        self.wake();
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for Dispatcher {
    fn drop(&mut self) {
        self.shutdown();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backoff_doubles_from_the_initial_wait() {
        let p = RetryPolicy::default();
        let waits: Vec<u64> = (1..=4).map(|a| p.backoff(a).as_secs()).collect();
        assert_eq!(waits, [0, 1, 2, 4]);
        assert_eq!(RetryPolicy::immediate(3).backoff(3), Duration::ZERO);
    }
}
