use super::{CanFrame, TraceRecord};

/// An ECU that replays a captured trace, rebased so the first record fires
/// at virtual time zero.
#[derive(Clone, Debug)]
pub struct ReplayNode {
    frames: Vec<CanFrame>,
    cursor: usize,
}

impl ReplayNode {
    /// `limit` caps how many records are replayed.
    pub fn new(records: &[TraceRecord], limit: Option<usize>) -> Self {
        let base = records.first().map_or(0, |r| r.ts_us);
        let take = limit.unwrap_or(usize::MAX).min(records.len());
        let frames = records[..take]
            .iter()
            .map(|r| r.frame.clone().with_ts(r.ts_us.saturating_sub(base)))
            .collect();
        Self { frames, cursor: 0 }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn remaining(&self) -> usize {
        self.frames.len() - self.cursor
    }

    /// Rebased time of the next frame to send, if any.
    pub fn next_due(&self) -> Option<u64> {
        self.frames.get(self.cursor).map(|f| f.ts_us)
    }

    /// Returns every not-yet-sent frame due at or before `now_us`, in trace
    /// order. Each frame is returned exactly once.
    pub fn step(&mut self, now_us: u64) -> Vec<CanFrame> {
        let start = self.cursor;
        while self.cursor < self.frames.len() && self.frames[self.cursor].ts_us <= now_us {
            self.cursor += 1;
        }
        self.frames[start..self.cursor].to_vec()
    }
}
