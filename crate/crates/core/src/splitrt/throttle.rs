//! Sender-side token bucket emulating a fixed link bandwidth.

use std::io::{self, Write};
use std::thread;
use std::time::{Duration, Instant};

/// Bucket depth in seconds of traffic at the configured rate.
pub const BURST_SECONDS: f64 = 0.05;
const MAX_CHUNK: usize = 64 * 1024;

/// Continuous-refill token bucket counting bytes. Starts empty.
#[derive(Debug)]
pub struct TokenBucket {
    rate: f64,
    capacity: f64,
    tokens: f64,
    last: Instant,
}

impl TokenBucket {
    /// `bits_per_second` must be positive.
    pub fn new(bits_per_second: f64) -> Self {
        assert!(bits_per_second > 0.0, "bandwidth must be positive");
        let rate = bits_per_second / 8.0;
        Self {
            rate,
            capacity: (rate * BURST_SECONDS).max(1.0),
            tokens: 0.0,
            last: Instant::now(),
        }
    }

    /// Bytes per second.
    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// Largest single grant.
    pub fn capacity(&self) -> usize {
        self.capacity as usize
    }

    fn refill(&mut self) {
        let now = Instant::now();
        let dt = now.duration_since(self.last).as_secs_f64();
        self.last = now;
        self.tokens = (self.tokens + dt * self.rate).min(self.capacity);
    }

    /// Blocks until `n` bytes (at most the capacity) may be sent.
    pub fn acquire(&mut self, n: usize) {
        let n = (n as f64).min(self.capacity);
        loop {
            self.refill();
            if self.tokens >= n {
                self.tokens -= n;
                return;
            }
            let wait = (n - self.tokens) / self.rate;
            thread::sleep(Duration::from_secs_f64(wait));
        }
    }
}

/// Writer that paces bytes through a [`TokenBucket`].
#[derive(Debug)]
pub struct Throttled<W> {
    inner: W,
    bucket: TokenBucket,
}

impl<W: Write> Throttled<W> {
    pub fn new(inner: W, bits_per_second: f64) -> Self {
        Self {
            inner,
            bucket: TokenBucket::new(bits_per_second),
        }
    }

    pub fn get_ref(&self) -> &W {
        &self.inner
    }

    pub fn into_inner(self) -> W {
        self.inner
    }
}

impl<W: Write> Write for Throttled<W> {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        if buf.is_empty() {
            return Ok(0);
        }
        let n = buf.len().min(self.bucket.capacity().max(1)).min(MAX_CHUNK);
        self.bucket.acquire(n);
        self.inner.write_all(&buf[..n])?;
        Ok(n)
    }

    fn flush(&mut self) -> io::Result<()> {
        self.inner.flush()
    }
}
