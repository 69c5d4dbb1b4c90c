use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QueueError {
    #[error("event queue is empty")]
    EmptyQueue,
    #[error("cannot schedule at {at} h, clock is already at {now} h")]
    InPast { at: f64, now: f64 },
}

#[derive(Debug)]
struct Entry<T> {
    time: f64,
    seq: u64,
    item: T,
}

impl<T> PartialEq for Entry<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<T> Eq for Entry<T> {}

impl<T> PartialOrd for Entry<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T> Ord for Entry<T> {
    // Reversed so the max-heap pops the smallest (time, seq).
    fn cmp(&self, other: &Self) -> Ordering {
        other.time.total_cmp(&self.time).then(other.seq.cmp(&self.seq))
    }
}

/// Pending events ordered by (virtual time in hours, insertion seq).
#[derive(Debug)]
pub struct EventQueue<T> {
    heap: BinaryHeap<Entry<T>>,
    next_seq: u64,
    now: f64,
}

impl<T> Default for EventQueue<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T> EventQueue<T> {
    pub fn new() -> Self {
        EventQueue {
            heap: BinaryHeap::new(),
            next_seq: 0,
            now: 0.0,
        }
    }

    /// Time of the last popped event.
    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    /// Schedule `item` at absolute time `at`; returns its insertion seq.
    pub fn push(&mut self, at: f64, item: T) -> Result<u64, QueueError> {
        if !at.is_finite() || at < self.now {
            return Err(QueueError::InPast { at, now: self.now });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Entry { time: at, seq, item });
        Ok(seq)
    }

    /// Schedule `item` `delay` hours after the current time.
    pub fn push_after(&mut self, delay: f64, item: T) -> Result<u64, QueueError> {
        self.push(self.now + delay.max(0.0), item)
    }

    /// Pop the event with minimal (time, seq) and move the clock to it.
    pub fn advance(&mut self) -> Result<(T, f64), QueueError> {
        let e = self.heap.pop().ok_or(QueueError::EmptyQueue)?;
        self.now = e.time;
        Ok((e.item, e.time))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn earlier_first() {
        let mut q = EventQueue::new();
        q.push(2.0, "b").unwrap();
        q.push(1.0, "a").unwrap();
        assert_eq!(q.advance().unwrap(), ("a", 1.0));
        assert_eq!(q.advance().unwrap(), ("b", 2.0));
        assert_eq!(q.advance(), Err(QueueError::EmptyQueue));
    }

    #[test]
    fn ties_by_insertion() {
        let mut q = EventQueue::new();
        for name in ["x", "y", "z"] {
            q.push(1.0, name).unwrap();
        }
        let order: Vec<_> = (0..3).map(|_| q.advance().unwrap().0).collect();
        assert_eq!(order, ["x", "y", "z"]);
    }

    #[test]
    fn refuses_the_past() {
        let mut q = EventQueue::new();
        q.push(5.0, 1).unwrap();
        q.advance().unwrap();
        assert!(matches!(q.push(4.0, 2), Err(QueueError::InPast { .. })));
        assert!(q.push(f64::NAN, 2).is_err());
        q.push_after(0.0, 3).unwrap();
        assert_eq!(q.advance().unwrap(), (3, 5.0));
    }
}
