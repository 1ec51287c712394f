use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::sim::SimTime;

/// Columns of one event-trace line besides time and sequence number.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TraceFields {
    pub kind: &'static str,
    pub entity: Option<u64>,
    pub station: Option<&'static str>,
    pub facility: Option<usize>,
}

pub trait TraceEvent {
    fn trace_fields(&self) -> TraceFields;
}

/// An event on the calendar.
#[derive(Clone, Debug)]
pub struct Scheduled<E> {
    pub time: SimTime,
    pub seq: u64,
    pub event: E,
}

impl<E> PartialEq for Scheduled<E> {
    fn eq(&self, other: &Self) -> bool {
        self.time == other.time && self.seq == other.seq
    }
}

impl<E> Eq for Scheduled<E> {}

impl<E> PartialOrd for Scheduled<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<E> Ord for Scheduled<E> {
    // Reversed so that `BinaryHeap` pops the earliest (time, seq) first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .cmp(&self.time)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Clock plus future-event calendar.
#[derive(Clone, Debug)]
pub struct Kernel<E> {
    clock: SimTime,
    next_seq: u64,
    calendar: BinaryHeap<Scheduled<E>>,
}

impl<E> Default for Kernel<E> {
    fn default() -> Self {
        Kernel::new(SimTime::ZERO)
    }
}

impl<E> Kernel<E> {
    pub fn new(start: SimTime) -> Self {
        Kernel {
            clock: start,
            next_seq: 0,
            calendar: BinaryHeap::new(),
        }
    }

    /// Kernel starting at `clock` whose sequence numbers continue from `next_seq`.
    pub fn resume(clock: SimTime, next_seq: u64) -> Self {
        Kernel {
            clock,
            next_seq,
            calendar: BinaryHeap::new(),
        }
    }

    pub fn now(&self) -> SimTime {
        self.clock
    }

    pub fn next_seq(&self) -> u64 {
        self.next_seq
    }

    pub fn len(&self) -> usize {
        self.calendar.len()
    }

    pub fn is_empty(&self) -> bool {
        self.calendar.is_empty()
    }

    pub fn schedule(&mut self, at: SimTime, event: E) -> Result<u64> {
        if at < self.clock {
            return Err(Error::ScheduleInPast {
                now: self.clock.minutes(),
                at: at.minutes(),
            });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.calendar.push(Scheduled {
            time: at,
            seq,
            event,
        });
        Ok(seq)
    }

    /// Re-inserts an event keeping its original sequence number.
    pub fn insert_scheduled(&mut self, item: Scheduled<E>) -> Result<()> {
        if item.time < self.clock {
            return Err(Error::ScheduleInPast {
                now: self.clock.minutes(),
                at: item.time.minutes(),
            });
        }
        self.next_seq = self.next_seq.max(item.seq + 1);
        self.calendar.push(item);
        Ok(())
    }

    pub fn peek_time(&self) -> Option<SimTime> {
        self.calendar.peek().map(|s| s.time)
    }

    /// Pops the next event if it is due at or before `limit`, advancing the clock.
    pub fn pop_until(&mut self, limit: SimTime) -> Option<Scheduled<E>> {
        if self.calendar.peek()?.time > limit {
            return None;
        }
        let item = self.calendar.pop()?;
        self.clock = item.time;
        Some(item)
    }

    pub fn advance_to(&mut self, t: SimTime) {
        if t > self.clock {
            self.clock = t;
        }
    }

    /// Pending events in arbitrary order.
    pub fn pending(&self) -> impl Iterator<Item = &Scheduled<E>> {
        self.calendar.iter()
    }
}

/// Event-handling state machine driven by a [`Kernel`].
pub trait Model {
    type Event: Clone + TraceEvent;

    fn handle(&mut self, kernel: &mut Kernel<Self::Event>, item: Scheduled<Self::Event>) -> Result<()>;
}

/// A kernel together with the model it drives.
#[derive(Clone, Debug)]
pub struct Simulation<M: Model> {
    pub kernel: Kernel<M::Event>,
    pub model: M,
    trace: Option<String>,
}

/// Full copy of clock, calendar and model state (including random streams).
#[derive(Clone, Debug)]
pub struct Snapshot<M: Model> {
    kernel: Kernel<M::Event>,
    model: M,
}

impl<M: Model + Clone> Simulation<M> {
    pub fn new(model: M) -> Self {
        Simulation {
            kernel: Kernel::default(),
            model,
            trace: None,
        }
    }

    pub fn with_kernel(kernel: Kernel<M::Event>, model: M) -> Self {
        Simulation {
            kernel,
            model,
            trace: None,
        }
    }

    /// Turns on the tab-separated event trace.
    pub fn enable_trace(&mut self) {
        self.trace.get_or_insert_with(String::new);
    }

    pub fn trace(&self) -> Option<&str> {
        self.trace.as_deref()
    }

    pub fn take_trace(&mut self) -> Option<String> {
        self.trace.as_mut().map(std::mem::take)
    }

    pub fn schedule(&mut self, at: SimTime, event: M::Event) -> Result<u64> {
        self.kernel.schedule(at, event)
    }

    pub fn now(&self) -> SimTime {
        self.kernel.now()
    }

    /// Dispatches one event due at or before `limit`; returns false if none is due.
    pub fn step(&mut self, limit: SimTime) -> Result<bool> {
        let Some(item) = self.kernel.pop_until(limit) else {
            return Ok(false);
        };
        if let Some(buf) = self.trace.as_mut() {
            write_trace_line(buf, &item);
        }
        self.model.handle(&mut self.kernel, item)?;
        Ok(true)
    }

    /// Dispatches every event due at or before `t`, then sets the clock to `t`.
    pub fn run_until(&mut self, t: SimTime) -> Result<usize> {
        let mut count = 0;
        while self.step(t)? {
            count += 1;
        }
        self.kernel.advance_to(t);
        Ok(count)
    }

    pub fn snapshot(&self) -> Snapshot<M> {
        Snapshot {
            kernel: self.kernel.clone(),
            model: self.model.clone(),
        }
    }

    pub fn restore(&mut self, snapshot: Snapshot<M>) {
        self.kernel = snapshot.kernel;
        self.model = snapshot.model;
    }
}

fn write_trace_line<E: TraceEvent>(buf: &mut String, item: &Scheduled<E>) {
    let f = item.event.trace_fields();
    let _ = write!(buf, "{}\t{}\t{}\t", item.time, item.seq, f.kind);
    match f.entity {
        Some(e) => {
            let _ = write!(buf, "{e}");
        }
        None => buf.push('-'),
    }
    buf.push('\t');
    buf.push_str(f.station.unwrap_or("-"));
    buf.push('\t');
    match f.facility {
        Some(j) => {
            let _ = write!(buf, "{j}");
        }
        None => buf.push('-'),
    }
    buf.push('\n');
}
