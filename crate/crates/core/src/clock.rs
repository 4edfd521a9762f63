//! Time keeping for budgets.
//!
//! A [`Clock`] either reads the wall clock or counts abstract work units that
//! the solvers report as they run. The work clock makes every budget decision
//! a function of the computation alone, which is what the deterministic mode
//! relies on for reproducible runs.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Instant;

/// Work units that count as one second on a work clock.
pub const WORK_UNITS_PER_SECOND: f64 = 4.0e6;

#[derive(Clone, Debug)]
pub enum Clock {
    Wall(Instant),
    Work(Arc<AtomicU64>),
}

impl Clock {
    pub fn wall() -> Self {
        Clock::Wall(Instant::now())
    }

    pub fn work() -> Self {
        Clock::Work(Arc::new(AtomicU64::new(0)))
    }

    pub fn is_deterministic(&self) -> bool {
        matches!(self, Clock::Work(_))
    }

    /// Seconds since the clock was created.
    pub fn elapsed(&self) -> f64 {
        match self {
            Clock::Wall(start) => start.elapsed().as_secs_f64(),
            Clock::Work(units) => units.load(Ordering::Relaxed) as f64 / WORK_UNITS_PER_SECOND,
        }
    }

    /// Reports work done. Ignored by wall clocks.
    #[inline]
    pub fn tick(&self, units: u64) {
        if let Clock::Work(counter) = self {
            counter.fetch_add(units, Ordering::Relaxed);
        }
    }
}

impl Default for Clock {
    fn default() -> Self {
        Clock::wall()
    }
}

/// A point in time on a particular clock.
#[derive(Clone, Debug)]
pub struct Deadline {
    clock: Clock,
    at: f64,
}

impl Deadline {
    pub fn after(clock: &Clock, seconds: f64) -> Self {
        Deadline {
            clock: clock.clone(),
            at: clock.elapsed() + seconds.max(0.0),
        }
    }

    pub fn never(clock: &Clock) -> Self {
        Deadline {
            clock: clock.clone(),
            at: f64::INFINITY,
        }
    }

    pub fn clock(&self) -> &Clock {
        &self.clock
    }

    pub fn expired(&self) -> bool {
        self.clock.elapsed() >= self.at
    }

    pub fn remaining(&self) -> f64 {
        (self.at - self.clock.elapsed()).max(0.0)
    }

    /// The earlier of this deadline and `seconds` from now.
    pub fn within(&self, seconds: f64) -> Deadline {
        let now = self.clock.elapsed();
        Deadline {
            clock: self.clock.clone(),
            at: self.at.min(now + seconds.max(0.0)),
        }
    }

    #[inline]
    pub fn tick(&self, units: u64) {
        self.clock.tick(units);
    }
}
