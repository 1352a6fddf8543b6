use std::collections::BTreeSet;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use chrono::{DateTime, Utc};

use super::{AcquisitionError, AnonymizedRecord, PrivateMapEntry, RawVideoMeta};
use crate::corpus::LocalId;

/// Allocates local-id counters and strips identifying fields.
///
/// Counters are unique per corpus; the allocator is safe to share between
/// threads running independent searches.
#[derive(Debug)]
pub struct Anonymizer {
    next: AtomicU64,
    used: Mutex<BTreeSet<u64>>,
}

impl Default for Anonymizer {
    fn default() -> Self {
        Self::new()
    }
}

impl Anonymizer {
    pub fn new() -> Self {
        Self {
            next: AtomicU64::new(1),
            used: Mutex::new(BTreeSet::new()),
        }
    }

    /// Continues numbering after counters already present in a corpus.
    pub fn resuming(used: impl IntoIterator<Item = u64>) -> Self {
        let used: BTreeSet<u64> = used.into_iter().collect();
        let next = used.last().map_or(1, |m| m + 1);
        Self {
            next: AtomicU64::new(next),
            used: Mutex::new(used),
        }
    }

    pub fn allocate(&self) -> u64 {
        self.next.fetch_add(1, Ordering::Relaxed)
    }

    pub fn anonymize(
        &self,
        meta: &RawVideoMeta,
        counter: u64,
        query: &str,
        now: DateTime<Utc>,
    ) -> Result<(AnonymizedRecord, PrivateMapEntry), AcquisitionError> {
        if counter == 0 {
            return Err(AcquisitionError::ZeroCounter);
        }
        if !self.used.lock().expect("counter set poisoned").insert(counter) {
            return Err(AcquisitionError::DuplicateCounter(counter));
        }
        let local_id = LocalId::from_counter(counter);
        let record = AnonymizedRecord {
            local_id: local_id.clone(),
            duration_s: meta.duration_s.max(0.0),
            retrieved_at: now,
            query: query.to_owned(),
        };
        let entry = PrivateMapEntry {
            local_id,
            platform_video_id: meta.platform_video_id.clone(),
        };
        Ok((record, entry))
    }
}
