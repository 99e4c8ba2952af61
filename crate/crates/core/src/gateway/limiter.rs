use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

/// Token bucket refilled continuously at `rate` tokens per second.
#[derive(Debug)]
pub struct TokenBucket {
    rate: f64,
    capacity: f64,
    state: Mutex<(f64, Instant)>,
}

impl TokenBucket {
    pub fn new(rate_per_sec: f64, capacity: f64) -> Self {
        let capacity = capacity.max(1.0);
        TokenBucket { rate: rate_per_sec.max(1e-9), capacity, state: Mutex::new((capacity, Instant::now())) }
    }

    /// Bucket for `rpm` requests per minute with a one-second burst.
    pub fn per_minute(rpm: f64) -> Self {
        let rate = rpm / 60.0;
        Self::new(rate, rate.ceil())
    }

    /// Blocks until a token is available, then takes it.
    pub fn acquire(&self) {
        loop {
            let wait = {
                let mut st = self.state.lock().expect("bucket poisoned");
                let now = Instant::now();
                let refill = now.duration_since(st.1).as_secs_f64() * self.rate;
                st.0 = (st.0 + refill).min(self.capacity);
                st.1 = now;
                if st.0 >= 1.0 {
                    st.0 -= 1.0;
                    return;
                }
                (1.0 - st.0) / self.rate
            };
            std::thread::sleep(Duration::from_secs_f64(wait));
        }
    }
}

/// Counting semaphore bounding concurrent requests.
#[derive(Debug)]
pub struct InFlight {
    limit: usize,
    count: Mutex<usize>,
    cv: Condvar,
}

pub struct InFlightSlot<'a>(&'a InFlight);

impl InFlight {
    pub fn new(limit: usize) -> Self {
        InFlight { limit: limit.max(1), count: Mutex::new(0), cv: Condvar::new() }
    }

    pub fn enter(&self) -> InFlightSlot<'_> {
        let mut n = self.count.lock().expect("semaphore poisoned");
        while *n >= self.limit {
            n = self.cv.wait(n).expect("semaphore poisoned");
        }
        *n += 1;
        InFlightSlot(self)
    }

    pub fn current(&self) -> usize {
        *self.count.lock().expect("semaphore poisoned")
    }
}

impl Drop for InFlightSlot<'_> {
    fn drop(&mut self) {
        let mut n = self.0.count.lock().expect("semaphore poisoned");
        *n -= 1;
        self.0.cv.notify_one();
    }
}
