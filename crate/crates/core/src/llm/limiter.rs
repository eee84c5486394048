//! Sliding-window rate limiter shared by all request workers.

use std::collections::VecDeque;
use std::sync::Mutex;

use super::clock::Clock;

pub const WINDOW_MS: u64 = 60_000;

/// Grants one permit per HTTP attempt. A permit is granted only when fewer
/// than `max_in_window` permits were granted in the trailing window, so no
/// 60 s interval ever contains more grants than the limit.
pub struct RateLimiter {
    max_in_window: u32,
    window_ms: u64,
    stamps: Mutex<VecDeque<u64>>,
    history: Mutex<Vec<u64>>,
}

impl RateLimiter {
    pub fn new(max_in_window: u32) -> Self {
        RateLimiter {
            max_in_window,
            window_ms: WINDOW_MS,
            stamps: Mutex::new(VecDeque::new()),
            history: Mutex::new(Vec::new()),
        }
    }

    /// Blocks (via the clock) until a permit is available, then records the
    /// grant. Returns the grant timestamp.
    pub fn acquire(&self, clock: &dyn Clock) -> u64 {
        loop {
            let wait_ms = {
                let mut stamps = self.stamps.lock().unwrap();
                let now = clock.now_ms();
                while stamps
                    .front()
                    .is_some_and(|&t| now.saturating_sub(t) >= self.window_ms)
                {
                    stamps.pop_front();
                }
                if (stamps.len() as u32) < self.max_in_window {
                    stamps.push_back(now);
                    self.history.lock().unwrap().push(now);
                    return now;
                }
                let oldest = *stamps.front().expect("window is full");
                (oldest + self.window_ms).saturating_sub(now)
            };
            clock.sleep_ms(wait_ms.max(1));
        }
    }

    /// Every grant timestamp, in grant order.
    pub fn grant_history(&self) -> Vec<u64> {
        self.history.lock().unwrap().clone()
    }

    /// Largest number of grants inside any half-open `window_ms` interval.
    pub fn max_grants_in_any_window(&self) -> usize {
        let history = self.grant_history();
        let mut best = 0;
        for (i, &start) in history.iter().enumerate() {
            let count = history[i..]
                .iter()
                .take_while(|&&t| t < start + self.window_ms)
                .count();
            best = best.max(count);
        }
        best
    }
}
