use std::collections::VecDeque;

use crate::platform::{DeviceSpec, TxnClass};

/// A device transaction: one read or write on behalf of a ToR entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Txn {
    pub req: usize,
    pub class: TxnClass,
}

/// Device with `parallelism` service slots, a bounded queue, and an
/// unbounded overflow of ToR entries waiting for queue space.
#[derive(Debug, Clone)]
pub(crate) struct Device {
    pub spec: DeviceSpec,
    pub busy: u32,
    pub queue: VecDeque<Txn>,
    /// Entries that found the queue full; they stay dispatch-pending in the ToR.
    pub pending: VecDeque<Txn>,
    pub busy_integral: u64,
}

pub(crate) enum Accept {
    Started,
    Queued,
    Pending,
}

impl Device {
    pub fn new(spec: DeviceSpec) -> Self {
        Device {
            spec,
            busy: 0,
            queue: VecDeque::new(),
            pending: VecDeque::new(),
            busy_integral: 0,
        }
    }

    pub fn offer(&mut self, txn: Txn) -> Accept {
        if self.busy < self.spec.parallelism {
            self.busy += 1;
            Accept::Started
        } else if self.queue.len() < self.spec.device_queue_capacity as usize {
            self.queue.push_back(txn);
            Accept::Queued
        } else {
            self.pending.push_back(txn);
            Accept::Pending
        }
    }

    /// A slot frees. Returns the queued transaction that takes it, if any,
    /// and the pending transaction promoted into the queue, if any.
    pub fn release(&mut self) -> (Option<Txn>, Option<Txn>) {
        self.busy -= 1;
        let started = self.queue.pop_front();
        if started.is_some() {
            self.busy += 1;
        }
        let promoted = if self.queue.len() < self.spec.device_queue_capacity as usize {
            self.pending.pop_front().inspect(|&t| self.queue.push_back(t))
        } else {
            None
        };
        (started, promoted)
    }

    /// No slot idles while work waits.
    pub fn work_conserving(&self) -> bool {
        self.busy == self.spec.parallelism || (self.queue.is_empty() && self.pending.is_empty())
    }

    pub fn in_flight(&self) -> usize {
        self.busy as usize + self.queue.len() + self.pending.len()
    }
}
