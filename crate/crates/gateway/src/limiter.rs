use std::collections::VecDeque;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use thiserror::Error;

pub const WINDOW: Duration = Duration::from_secs(60);

/// Time source for the limiter. `now` is measured from an arbitrary epoch.
pub trait Clock: Send + Sync {
    fn now(&self) -> Duration;
    fn sleep(&self, d: Duration);
}

pub struct SystemClock {
    epoch: Instant,
}

impl Default for SystemClock {
    fn default() -> Self {
        Self { epoch: Instant::now() }
    }
}

impl Clock for SystemClock {
    fn now(&self) -> Duration {
        self.epoch.elapsed()
    }

    fn sleep(&self, d: Duration) {
        std::thread::sleep(d);
    }
}

/// A clock that only moves when told to. `sleep` advances it.
#[derive(Default)]
pub struct SimulatedClock {
    now: Mutex<Duration>,
}

impl SimulatedClock {
    pub fn advance(&self, d: Duration) {
        *self.now.lock().unwrap() += d;
    }

    pub fn set(&self, t: Duration) {
        let mut now = self.now.lock().unwrap();
        if t > *now {
            *now = t;
        }
    }
}

impl Clock for SimulatedClock {
    fn now(&self) -> Duration {
        *self.now.lock().unwrap()
    }

    fn sleep(&self, d: Duration) {
        self.advance(d);
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LimitError {
    #[error("request exceeds TPM ceiling: {tokens} tokens > {limit}")]
    ExceedsCeiling { tokens: u64, limit: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Grant {
    pub at: Duration,
    pub tokens: u64,
}

struct State {
    /// Grants still inside the trailing window, oldest first.
    live: VecDeque<Grant>,
    spent: u64,
    log: Vec<Grant>,
}

/// Sliding 60-second token budget shared by all requests of a run.
pub struct TpmLimiter {
    limit: u64,
    clock: Arc<dyn Clock>,
    state: Mutex<State>,
}

impl TpmLimiter {
    pub fn new(limit: u64, clock: Arc<dyn Clock>) -> Self {
        Self {
            limit,
            clock,
            state: Mutex::new(State {
                live: VecDeque::new(),
                spent: 0,
                log: Vec::new(),
            }),
        }
    }

    pub fn limit(&self) -> u64 {
        self.limit
    }

    /// Blocks until `tokens` fit in the trailing window, then records them.
    pub fn acquire(&self, tokens: u64) -> Result<Grant, LimitError> {
        if tokens > self.limit {
            return Err(LimitError::ExceedsCeiling { tokens, limit: self.limit });
        }
        loop {
            let wait = {
                let mut st = self.state.lock().unwrap();
                let now = self.clock.now();
                while st.live.front().is_some_and(|g| g.at + WINDOW <= now) {
                    let g = st.live.pop_front().expect("checked");
                    st.spent -= g.tokens;
                }
                if st.spent + tokens <= self.limit {
                    let grant = Grant { at: now, tokens };
                    st.live.push_back(grant);
                    st.spent += tokens;
                    st.log.push(grant);
                    return Ok(grant);
                }
                // Earliest moment enough old grants have left the window.
                let mut freed = 0;
                let mut until = now;
                for g in &st.live {
                    freed += g.tokens;
                    until = g.at + WINDOW;
                    if st.spent - freed + tokens <= self.limit {
                        break;
                    }
                }
                until.saturating_sub(now).max(Duration::from_millis(1))
            };
            self.clock.sleep(wait);
        }
    }

    /// Every grant so far, in grant order.
    pub fn grant_log(&self) -> Vec<Grant> {
        self.state.lock().unwrap().log.clone()
    }
}

/// Largest token total over any half-open 60-second window `(t - 60s, t]`
/// of a grant log.
pub fn max_window_spend(log: &[Grant]) -> u64 {
    let mut sorted = log.to_vec();
    sorted.sort_by_key(|g| g.at);
    let mut best = 0;
    let mut lo = 0;
    let mut sum = 0;
    for g in &sorted {
        sum += g.tokens;
        while sorted[lo].at + WINDOW <= g.at {
            sum -= sorted[lo].tokens;
            lo += 1;
        }
        best = best.max(sum);
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sim(limit: u64) -> (Arc<SimulatedClock>, TpmLimiter) {
        let clock = Arc::new(SimulatedClock::default());
        let l = TpmLimiter::new(limit, clock.clone());
        (clock, l)
    }

    #[test]
    fn single_request_is_immediate() {
        let (clock, l) = sim(30_000);
        let g = l.acquire(3000).unwrap();
        assert_eq!(g.at, Duration::ZERO);
        assert_eq!(clock.now(), Duration::ZERO);
    }

    #[test]
    fn eleventh_request_waits_for_the_window() {
        let (clock, l) = sim(30_000);
        for _ in 0..10 {
            assert_eq!(l.acquire(3000).unwrap().at, Duration::ZERO);
        }
        let g = l.acquire(3000).unwrap();
        assert_eq!(g.at, WINDOW);
        assert_eq!(clock.now(), WINDOW);
        assert_eq!(max_window_spend(&l.grant_log()), 30_000);
    }

    #[test]
    fn oversize_request_is_refused() {
        let (_, l) = sim(100);
        assert_eq!(
            l.acquire(101),
            Err(LimitError::ExceedsCeiling { tokens: 101, limit: 100 })
        );
        assert!(l.acquire(100).is_ok());
    }
}
