use std::collections::VecDeque;

pub const DEFAULT_WINDOW_MS: u64 = 1000;
pub const DEFAULT_THRESHOLD_PER_S: f64 = 100.0;

/// Sliding-window tracker of unsatisfied (expired) Interests.
///
/// Trips when the windowed unsatisfied rate exceeds the threshold and
/// resets once it falls below half the threshold. An infinite threshold
/// never trips, leaving only the counters.
#[derive(Clone, Debug)]
pub struct RateMonitor {
    window_us: u64,
    threshold_per_s: f64,
    unsatisfied: VecDeque<u64>,
    incoming: VecDeque<u64>,
    tripped: bool,
    trips: u64,
    first_trip_us: Option<u64>,
}

impl RateMonitor {
    pub fn new(window_ms: u64, threshold_per_s: f64) -> Self {
        Self {
            window_us: window_ms.max(1) * 1000,
            threshold_per_s,
            unsatisfied: VecDeque::new(),
            incoming: VecDeque::new(),
            tripped: false,
            trips: 0,
            first_trip_us: None,
        }
    }

    /// Events allowed in one window before tripping.
    fn threshold_count(&self) -> f64 {
        self.threshold_per_s * self.window_us as f64 / 1e6
    }

    fn prune(&mut self, now_us: u64) {
        let cutoff = now_us.saturating_sub(self.window_us);
        for q in [&mut self.unsatisfied, &mut self.incoming] {
            // An event at exactly `now - window` has left the window.
            while q.front().is_some_and(|&t| t <= cutoff && now_us >= self.window_us) {
                q.pop_front();
            }
        }
    }

    /// Re-evaluates the trip state at `now_us`.
    pub fn refresh(&mut self, now_us: u64) {
        self.prune(now_us);
        let count = self.unsatisfied.len() as f64;
        let limit = self.threshold_count();
        if !self.tripped && count > limit {
            self.tripped = true;
            self.trips += 1;
            self.first_trip_us.get_or_insert(now_us);
        } else if self.tripped && count < limit / 2.0 {
            self.tripped = false;
        }
    }

    pub fn record_unsatisfied(&mut self, now_us: u64) {
        self.unsatisfied.push_back(now_us);
        self.refresh(now_us);
    }

    pub fn record_incoming(&mut self, now_us: u64) {
        self.incoming.push_back(now_us);
        self.refresh(now_us);
    }

    pub fn is_tripped(&self) -> bool {
        self.tripped
    }

    pub fn trips(&self) -> u64 {
        self.trips
    }

    pub fn first_trip_us(&self) -> Option<u64> {
        self.first_trip_us
    }

    /// Unsatisfied Interests per second over the current window.
    pub fn unsatisfied_rate(&self) -> f64 {
        self.unsatisfied.len() as f64 * 1e6 / self.window_us as f64
    }

    pub fn incoming_rate(&self) -> f64 {
        self.incoming.len() as f64 * 1e6 / self.window_us as f64
    }
}
