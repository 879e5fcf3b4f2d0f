use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

struct Slot<E> {
    at_us: u64,
    seq: u64,
    event: E,
}

impl<E> PartialEq for Slot<E> {
    fn eq(&self, other: &Self) -> bool {
        (self.at_us, self.seq) == (other.at_us, other.seq)
    }
}
impl<E> Eq for Slot<E> {}
impl<E> PartialOrd for Slot<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<E> Ord for Slot<E> {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.at_us, self.seq).cmp(&(other.at_us, other.seq))
    }
}

/// Min-heap of events keyed by (virtual time, insertion counter).
pub struct EventQueue<E> {
    heap: BinaryHeap<Reverse<Slot<E>>>,
    next_seq: u64,
    now_us: u64,
}

impl<E> Default for EventQueue<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E> EventQueue<E> {
    pub fn new() -> Self {
        Self {
            heap: BinaryHeap::new(),
            next_seq: 0,
            now_us: 0,
        }
    }

    /// Time of the most recently popped event.
    pub fn now(&self) -> u64 {
        self.now_us
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    /// Schedules `event`. Returns `false` (and drops it) if `at_us` is in
    /// the past.
    pub fn push(&mut self, at_us: u64, event: E) -> bool {
        if at_us < self.now_us {
            return false;
        }
        self.heap.push(Reverse(Slot {
            at_us,
            seq: self.next_seq,
            event,
        }));
        self.next_seq += 1;
        true
    }

    pub fn peek_time(&self) -> Option<u64> {
        self.heap.peek().map(|Reverse(s)| s.at_us)
    }

    pub fn pop(&mut self) -> Option<(u64, E)> {
        let Reverse(slot) = self.heap.pop()?;
        self.now_us = slot.at_us;
        Some((slot.at_us, slot.event))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ties_pop_in_insertion_order() {
        let mut q = EventQueue::new();
        q.push(5, 'a');
        q.push(3, 'b');
        q.push(5, 'c');
        q.push(3, 'd');
        let order: Vec<_> = std::iter::from_fn(|| q.pop()).collect();
        assert_eq!(order, vec![(3, 'b'), (3, 'd'), (5, 'a'), (5, 'c')]);
    }

    #[test]
    fn refuses_the_past() {
        let mut q = EventQueue::new();
        q.push(10, ());
        q.pop();
        assert!(!q.push(9, ()));
        assert!(q.push(10, ()));
    }

    proptest! {
        #[test]
        fn pops_sorted_and_stable(times in prop::collection::vec(0u64..50, 0..200)) {
            let mut q = EventQueue::new();
            for (i, t) in times.iter().enumerate() {
                q.push(*t, i);
            }
            let mut last = (0u64, None::<usize>);
            while let Some((t, i)) = q.pop() {
                prop_assert!(t >= last.0);
                if t == last.0 {
                    if let Some(prev) = last.1 {
                        prop_assert!(i > prev);
                    }
                }
                prop_assert_eq!(times[i], t);
                last = (t, Some(i));
            }
        }
    }
}
