//! Host time sources.
//!
//! Everything that stamps or waits on host time goes through [`Clock`], so the
//! whole metering path can run against a manually driven clock in tests.

use std::sync::atomic::{AtomicI64, Ordering};
use std::sync::Arc;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

/// A source of host unix milliseconds.
#[derive(Clone, Debug, Default)]
pub enum Clock {
    /// Wall clock; waits use tokio timers.
    #[default]
    System,
    /// Virtual clock shared by every holder of the handle. Waiting on it
    /// jumps the time forward instead of sleeping.
    Manual(ManualClock),
}

#[derive(Clone, Debug)]
pub struct ManualClock(Arc<AtomicI64>);

impl ManualClock {
    pub fn new(start_ms: i64) -> Self {
        Self(Arc::new(AtomicI64::new(start_ms)))
    }

    pub fn now_ms(&self) -> i64 {
        self.0.load(Ordering::SeqCst)
    }

    pub fn set(&self, ms: i64) {
        self.0.store(ms, Ordering::SeqCst);
    }

    pub fn advance(&self, ms: i64) {
        self.0.fetch_add(ms, Ordering::SeqCst);
    }
}

impl Clock {
    pub fn manual(start_ms: i64) -> (Self, ManualClock) {
        let m = ManualClock::new(start_ms);
        (Clock::Manual(m.clone()), m)
    }

    pub fn now_ms(&self) -> i64 {
        match self {
            Clock::System => SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_millis() as i64)
                .unwrap_or(0),
            Clock::Manual(m) => m.now_ms(),
        }
    }

    /// Waits until the clock reads at least `deadline_ms`.
    pub async fn sleep_until(&self, deadline_ms: i64) {
        match self {
            Clock::System => {
                let now = self.now_ms();
                if deadline_ms > now {
                    tokio::time::sleep(Duration::from_millis((deadline_ms - now) as u64)).await;
                }
            }
            Clock::Manual(m) => {
                m.0.fetch_max(deadline_ms, Ordering::SeqCst);
                tokio::task::yield_now().await;
            }
        }
    }
}
