use std::cell::Cell;
use std::rc::Rc;
use std::time::{Duration, Instant};

/// Time source for the rate limiter.
pub trait Clock {
    /// Time elapsed since an arbitrary fixed origin.
    fn now(&self) -> Duration;
    fn sleep(&self, d: Duration);
}

#[derive(Debug, Clone)]
pub struct SystemClock {
    origin: Instant,
}

impl Default for SystemClock {
    fn default() -> Self {
        Self { origin: Instant::now() }
    }
}

impl Clock for SystemClock {
    fn now(&self) -> Duration {
        self.origin.elapsed()
    }

    fn sleep(&self, d: Duration) {
        std::thread::sleep(d);
    }
}

/// Simulated clock; `sleep` advances time instantly. Clones share the same time.
#[derive(Debug, Clone, Default)]
pub struct SimClock {
    now: Rc<Cell<Duration>>,
}

impl SimClock {
    pub fn advance(&self, d: Duration) {
        self.now.set(self.now.get() + d);
    }
}

impl Clock for SimClock {
    fn now(&self) -> Duration {
        self.now.get()
    }

    fn sleep(&self, d: Duration) {
        self.advance(d);
    }
}

/// Token bucket: `rate` tokens per second, holding at most `burst`. Starts full.
#[derive(Debug)]
pub struct RateLimiter<C> {
    rate: f64,
    burst: f64,
    tokens: f64,
    last: Duration,
    clock: C,
}

impl<C: Clock> RateLimiter<C> {
    /// # Panics
    /// If `rate` is not a positive finite number or `burst < 1`.
    pub fn new(rate: f64, burst: u32, clock: C) -> Self {
        assert!(rate.is_finite() && rate > 0.0, "rate must be positive, got {rate}");
        assert!(burst >= 1, "burst must be at least 1");
        let last = clock.now();
        Self {
            rate,
            burst: burst as f64,
            tokens: burst as f64,
            last,
            clock,
        }
    }

    pub fn clock(&self) -> &C {
        &self.clock
    }

    /// Blocks until a token is available, then consumes it.
    pub fn acquire(&mut self) {
        let now = self.clock.now();
        let elapsed = now.saturating_sub(self.last).as_secs_f64();
        self.tokens = (self.tokens + elapsed * self.rate).min(self.burst);
        self.last = now;
        if self.tokens >= 1.0 {
            self.tokens -= 1.0;
            return;
        }
        let wait = Duration::from_secs_f64((1.0 - self.tokens) / self.rate);
        self.clock.sleep(wait);
        self.last = self.clock.now();
        self.tokens = 0.0;
    }
}
