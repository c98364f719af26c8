mod common;

use std::sync::Arc;

use common::{backend, chunk, record};
use vigil_core::ClassLabel::{self, *};
use vigil_service::backend::{AlertFilter, DeliveryState};
use vigil_service::{AlertState, BackendError, Decision};

#[test]
fn normal_inference_creates_no_alert() {
    let b = backend();
    let c = chunk("cam", 0);
    b.register_chunk(&c).unwrap();
    let out = b.record_inference(&record(&c, Normal, "m")).unwrap();
    assert!(out.alert.is_none() && !out.duplicate);
    assert_eq!(b.list_alerts(&AlertFilter::all()).unwrap().total, 0);
    assert!(b.notifications().unwrap().is_empty());
    assert_eq!(b.metrics_summary().unwrap().inferences["Normal"], 1);
}

#[test]
fn critical_inference_creates_pending_alert_and_one_notification() {
    let b = backend();
    let c = chunk("cam", 1);
    b.register_chunk(&c).unwrap();
    let alert = b.record_inference(&record(&c, Falling, "m")).unwrap().alert.unwrap();
    assert_eq!((alert.label, alert.state, alert.reviewed_ts), (Falling, AlertState::Pending, None));
    assert_eq!(alert.stream_id, "cam");
    let n = b.notifications().unwrap();
    assert_eq!(n.len(), 1);
    assert_eq!((n[0].alert_id, n[0].delivery_state), (alert.alert_id, DeliveryState::Queued));
}

#[test]
fn duplicate_submission_is_idempotent() {
    let b = backend();
    let c = chunk("cam", 0);
    b.register_chunk(&c).unwrap();
    let first = b.record_inference(&record(&c, Staggering, "m")).unwrap();
    let again = b.record_inference(&record(&c, Staggering, "m")).unwrap();
    assert!(again.duplicate && again.alert.is_none());
    assert_eq!(again.inference_id, first.inference_id);
    assert_eq!(b.list_alerts(&AlertFilter::all()).unwrap().total, 1);
    assert_eq!(b.notifications().unwrap().len(), 1);
    // another model on the same chunk is a separate inference
    assert!(b.record_inference(&record(&c, Staggering, "other")).unwrap().alert.is_some());
}

#[test]
fn unknown_chunk_and_bad_records_are_rejected() {
    let b = backend();
    let err = b.record_inference(&record(&chunk("cam", 0), Falling, "m")).unwrap_err();
    assert!(matches!(err, BackendError::UnknownChunk(_)), "{err}");
    b.register_chunk(&chunk("cam", 0)).unwrap();
    let mut bad = record(&chunk("cam", 0), Falling, "m");
    bad.label = Normal;
    assert!(matches!(b.record_inference(&bad), Err(BackendError::Validation(_))));
    assert!(b.dead_letters().is_empty());
}

#[test]
fn review_transitions_once() {
    let b = backend();
    let c = chunk("cam", 0);
    b.register_chunk(&c).unwrap();
    let id = b.record_inference(&record(&c, ChestPain, "m")).unwrap().alert.unwrap().alert_id;

    let confirmed = b.review_alert(id, Decision::Confirmed, "nurse", None).unwrap();
    assert_eq!(confirmed.state, AlertState::Confirmed);
    assert!(confirmed.reviewed_ts.is_some());
    assert_eq!(confirmed.reviewer.as_deref(), Some("nurse"));
    assert!(b.retraining_items().unwrap().is_empty());

    for d in [Decision::Confirmed, Decision::Dismissed] {
        assert!(matches!(b.review_alert(id, d, "other", None), Err(BackendError::Conflict(_))));
    }
    assert_eq!(b.alert(id).unwrap().state, AlertState::Confirmed);
    assert!(matches!(b.review_alert(999, Decision::Confirmed, "x", None), Err(BackendError::NotFound(_))));
}

#[test]
fn dismissal_feeds_the_retraining_queue() {
    let b = backend();
    let c = chunk("cam", 2);
    b.register_chunk(&c).unwrap();
    let id = b.record_inference(&record(&c, Falling, "m")).unwrap().alert.unwrap().alert_id;

    assert!(matches!(b.review_alert(id, Decision::Dismissed, "n", Some(Falling)), Err(BackendError::Validation(_))));
    assert!(matches!(b.review_alert(id, Decision::Confirmed, "n", Some(Normal)), Err(BackendError::Validation(_))));
    assert!(matches!(b.review_alert(id, Decision::Dismissed, "  ", None), Err(BackendError::Validation(_))));
    assert_eq!(b.alert(id).unwrap().state, AlertState::Pending);

    b.review_alert(id, Decision::Dismissed, "n", Some(Normal)).unwrap();
    let items = b.retraining_items().unwrap();
    assert_eq!(items.len(), 1);
    assert_eq!((items[0].predicted, items[0].corrected, items[0].alert_id), (Falling, Some(Normal), Some(id)));
    assert_eq!(items[0].storage_key, c.storage_key);
    assert_eq!(b.metrics_summary().unwrap().retraining_queue, 1);
}

#[test]
fn retraining_export_format_and_determinism() {
    let b = backend();
    assert!(b.retraining_export().unwrap().is_empty());

    let c = chunk("cam", 0);
    b.register_chunk(&c).unwrap();
    let id = b.record_inference(&record(&c, Falling, "m")).unwrap().alert.unwrap().alert_id;
    b.review_alert(id, Decision::Dismissed, "n", Some(Normal)).unwrap();
    let first = b.retraining_export().unwrap();
    assert_eq!(String::from_utf8(first.clone()).unwrap(), format!("{} 3\n", c.storage_key));
    assert_eq!(b.retraining_export().unwrap(), first);

    // uncorrected items stay queued but have no label to export
    let c2 = chunk("cam", 1);
    b.register_chunk(&c2).unwrap();
    b.report_false_classification(&c2.chunk_id, Normal, None).unwrap();
    assert_eq!(b.retraining_items().unwrap().len(), 2);
    assert_eq!(b.retraining_export().unwrap(), first);

    // a later correction of the same chunk replaces the earlier one
    b.report_false_classification(&c.chunk_id, Falling, Some(Staggering)).unwrap();
    assert_eq!(String::from_utf8(b.retraining_export().unwrap()).unwrap(), format!("{} 1\n", c.storage_key));
}

#[test]
fn list_alerts_filters_and_orders() {
    let b = backend();
    let labels = [Falling, Normal, Staggering, ChestPain];
    for (i, &l) in labels.iter().enumerate() {
        let stream = if i % 2 == 0 { "a" } else { "b" };
        let c = chunk(stream, i as u64);
        b.register_chunk(&c).unwrap();
        b.record_inference(&record(&c, l, "m")).unwrap();
    }
    let pending = b.list_alerts(&AlertFilter::state(AlertState::Pending)).unwrap();
    assert_eq!(pending.total, 3);
    let ts: Vec<i64> = pending.items.iter().map(|a| a.created_ts).collect();
    assert!(ts.windows(2).all(|w| w[0] > w[1]), "newest first: {ts:?}");
    assert_eq!(pending.items[0].label, ChestPain);

    let only_a = b.list_alerts(&AlertFilter { stream_id: Some("a".into()), ..AlertFilter::all() }).unwrap();
    assert_eq!(only_a.items.iter().map(|a| a.label).collect::<Vec<_>>(), [Staggering, Falling]);

    let future = b.list_alerts(&AlertFilter { since_ts: Some(i64::MAX), ..AlertFilter::all() }).unwrap();
    assert!(future.items.is_empty() && future.total == 0);

    assert!(matches!("snoozed".parse::<AlertState>(), Err(BackendError::Validation(_))));
    assert!(b.list_alerts(&AlertFilter { page: 0, ..AlertFilter::all() }).is_err());
}

#[test]
fn pagination_is_stable_under_equal_timestamps() {
    let b = vigil_service::Backend::open_in_memory().unwrap().with_clock(Arc::new(|| 42));
    for i in 0..7 {
        let c = chunk("cam", i);
        b.register_chunk(&c).unwrap();
        b.record_inference(&record(&c, Falling, "m")).unwrap();
    }
    let mut seen = Vec::new();
    for page in 1..=3 {
        let p = b.list_alerts(&AlertFilter { page, page_size: 3, ..AlertFilter::all() }).unwrap();
        assert_eq!(p.has_more, page < 3);
        seen.extend(p.items.into_iter().map(|a| a.alert_id));
    }
    assert_eq!(seen, [7, 6, 5, 4, 3, 2, 1]);
}

#[test]
fn concurrent_submissions_never_double_alert() {
    let b = Arc::new(backend());
    let chunks: Vec<_> = (0..20).map(|i| chunk("cam", i)).collect();
    for c in &chunks {
        b.register_chunk(c).unwrap();
    }
    let label = |i: usize| if i.is_multiple_of(3) { Normal } else { ClassLabel::ALL[i % 3 - 1] };
    std::thread::scope(|s| {
        for _ in 0..8 {
            let (b, chunks) = (b.clone(), &chunks);
            s.spawn(move || {
                for (i, c) in chunks.iter().enumerate() {
                    b.record_inference(&record(c, label(i), "m")).unwrap();
                }
            });
        }
    });
    let critical = (0..20).filter(|&i| label(i).is_critical()).count() as u64;
    assert_eq!(b.list_alerts(&AlertFilter::all()).unwrap().total, critical);
    assert_eq!(b.notifications().unwrap().len() as u64, critical);
    assert_eq!(b.metrics_summary().unwrap().total_inferences, 20);
}

#[test]
fn concurrent_reviews_have_one_winner() {
    let b = Arc::new(backend());
    let c = chunk("cam", 0);
    b.register_chunk(&c).unwrap();
    let id = b.record_inference(&record(&c, Falling, "m")).unwrap().alert.unwrap().alert_id;
    let results: Vec<_> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..8)
            .map(|i| {
                let b = b.clone();
                let d = if i % 2 == 0 { Decision::Confirmed } else { Decision::Dismissed };
                s.spawn(move || b.review_alert(id, d, &format!("r{i}"), None))
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    assert_eq!(results.iter().filter(|r| r.is_ok()).count(), 1);
    assert!(results.iter().filter_map(|r| r.as_ref().err()).all(|e| matches!(e, BackendError::Conflict(_))));
    let final_state = b.alert(id).unwrap().state;
    let queue = b.retraining_items().unwrap().len();
    assert_eq!(queue, usize::from(final_state == AlertState::Dismissed));
}

#[test]
fn file_database_survives_reopen() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("vigil.db");
    {
        let b = vigil_service::Backend::open(&path).unwrap();
        let c = chunk("cam", 0);
        b.register_chunk(&c).unwrap();
        b.record_inference(&record(&c, Falling, "m")).unwrap();
    }
    let b = vigil_service::Backend::open(&path).unwrap();
    assert_eq!(b.list_alerts(&AlertFilter::state(AlertState::Pending)).unwrap().total, 1);
}
