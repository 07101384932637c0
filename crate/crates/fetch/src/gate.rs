use std::collections::HashMap;
use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

#[derive(Debug, Default)]
struct HostState {
    active: usize,
    last_start: Option<Instant>,
}

#[derive(Debug, Default)]
struct Inner {
    hosts: Mutex<HashMap<String, HostState>>,
    freed: Condvar,
}

/// Per-host politeness: caps concurrent requests and spaces request starts.
#[derive(Debug, Clone)]
pub struct HostGate {
    inner: Arc<Inner>,
    limit: usize,
    delay: Duration,
}

/// Held for the duration of one request.
pub struct Permit {
    gate: HostGate,
    key: String,
}

impl HostGate {
    pub fn new(limit: usize, delay: Duration) -> Self {
        HostGate { inner: Arc::default(), limit: limit.max(1), delay }
    }

    /// Blocks until a request to `key` may start.
    pub fn acquire(&self, key: &str) -> Permit {
        let mut hosts = self.inner.hosts.lock().expect("gate poisoned");
        loop {
            let state = hosts.entry(key.to_string()).or_default();
            if state.active < self.limit {
                let now = Instant::now();
                let ready = state.last_start.map_or(now, |t| t + self.delay);
                if ready <= now {
                    state.active += 1;
                    state.last_start = Some(now);
                    return Permit { gate: self.clone(), key: key.to_string() };
                }
                let (guard, _) = self.inner.freed.wait_timeout(hosts, ready - now).expect("gate poisoned");
                hosts = guard;
            } else {
                hosts = self.inner.freed.wait(hosts).expect("gate poisoned");
            }
        }
    }
}

impl Drop for Permit {
    fn drop(&mut self) {
        let mut hosts = self.gate.inner.hosts.lock().expect("gate poisoned");
        if let Some(s) = hosts.get_mut(&self.key) {
            s.active -= 1;
        }
        drop(hosts);
        self.gate.inner.freed.notify_all();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    #[test]
    fn caps_concurrency_per_host() {
        let gate = HostGate::new(2, Duration::ZERO);
        let active = AtomicUsize::new(0);
        let peak = AtomicUsize::new(0);
        std::thread::scope(|s| {
            for _ in 0..8 {
                s.spawn(|| {
                    let _p = gate.acquire("a:443");
                    let now = active.fetch_add(1, Ordering::SeqCst) + 1;
                    peak.fetch_max(now, Ordering::SeqCst);
                    std::thread::sleep(Duration::from_millis(20));
                    active.fetch_sub(1, Ordering::SeqCst);
                });
            }
        });
        assert_eq!(peak.load(Ordering::SeqCst), 2);
    }

    #[test]
    fn spaces_request_starts() {
        let gate = HostGate::new(4, Duration::from_millis(30));
        let t = Instant::now();
        for _ in 0..3 {
            drop(gate.acquire("a:443"));
        }
        assert!(t.elapsed() >= Duration::from_millis(60));
        // Other hosts are not delayed.
        let t = Instant::now();
        drop(gate.acquire("b:443"));
        assert!(t.elapsed() < Duration::from_millis(30));
    }
}
