//! Fixed-capacity ring buffer of transitions with uniform mini-batch
//! sampling (with replacement).

use rand::Rng;

/// One `(s, a, r, s')` replay tuple.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub obs: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_obs: Vec<f64>,
}

/// Ring buffer; once full, the oldest entry is overwritten first.
#[derive(Debug)]
pub struct ReplayBuffer {
    storage: Vec<Transition>,
    capacity: usize,
    write: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self { storage: Vec::with_capacity(capacity.min(1 << 20)), capacity, write: 0 }
    }

    pub fn len(&self) -> usize {
        self.storage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.storage.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn push(&mut self, t: Transition) {
        if self.storage.len() < self.capacity {
            self.storage.push(t);
        } else {
            self.storage[self.write] = t;
        }
        self.write = (self.write + 1) % self.capacity;
    }

    pub fn get(&self, idx: usize) -> &Transition {
        &self.storage[idx]
    }

    /// `batch_size` independent uniform index draws with replacement.
    pub fn sample_indices<R: Rng + ?Sized>(&self, batch_size: usize, rng: &mut R) -> Vec<usize> {
        assert!(!self.is_empty(), "cannot sample from an empty replay buffer");
        assert!(batch_size >= 1);
        (0..batch_size).map(|_| rng.random_range(0..self.storage.len())).collect()
    }

    /// Convenience over [`ReplayBuffer::sample_indices`], returning
    /// references in draw order.
    pub fn sample<R: Rng + ?Sized>(&self, batch_size: usize, rng: &mut R) -> Vec<&Transition> {
        self.sample_indices(batch_size, rng)
            .into_iter()
            .map(|i| &self.storage[i])
            .collect()
    }

    /// Insertion-ordered iteration (oldest first), mainly for tests.
    pub fn iter_in_order(&self) -> impl Iterator<Item = &Transition> {
        let split = if self.storage.len() == self.capacity { self.write } else { 0 };
        self.storage[split..].iter().chain(self.storage[..split].iter())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn t(tag: f64) -> Transition {
        Transition { obs: vec![tag], action: vec![0.0], reward: 0.5, next_obs: vec![tag + 0.5] }
    }

    #[test]
    fn ring_overwrites_oldest() {
        let mut buf = ReplayBuffer::new(2);
        buf.push(t(1.0));
        buf.push(t(2.0));
        buf.push(t(3.0));
        let tags: Vec<f64> = buf.iter_in_order().map(|x| x.obs[0]).collect();
        assert_eq!(tags, vec![2.0, 3.0]);
        assert_eq!(buf.len(), 2);
    }

    #[test]
    fn push_grows_until_capacity() {
        let mut buf = ReplayBuffer::new(4);
        buf.push(t(0.0));
        assert_eq!(buf.len(), 1);
        for i in 1..10 {
            buf.push(t(i as f64));
        }
        assert_eq!(buf.len(), 4);
    }

    #[test]
    fn insertion_order_preserved_when_exactly_full() {
        let mut buf = ReplayBuffer::new(5);
        for i in 0..5 {
            buf.push(t(i as f64));
        }
        let tags: Vec<f64> = buf.iter_in_order().map(|x| x.obs[0]).collect();
        assert_eq!(tags, vec![0.0, 1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn singleton_buffer_repeats_its_entry() {
        let mut buf = ReplayBuffer::new(8);
        buf.push(t(7.0));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let batch = buf.sample(16, &mut rng);
        assert!(batch.iter().all(|x| x.obs[0] == 7.0));
        assert_eq!(batch.len(), 16);
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let mut buf = ReplayBuffer::new(32);
        for i in 0..32 {
            buf.push(t(i as f64));
        }
        let i1 = buf.sample_indices(10, &mut ChaCha8Rng::seed_from_u64(3));
        let i2 = buf.sample_indices(10, &mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(i1, i2);
    }

    #[test]
    fn sampling_is_close_to_uniform() {
        // 10^5 draws over 10 items: each frequency within 3 sigma of 0.1,
        // sigma = sqrt(p (1 - p) / n).
        let mut buf = ReplayBuffer::new(10);
        for i in 0..10 {
            buf.push(t(i as f64));
        }
        let n = 100_000;
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let mut counts = [0usize; 10];
        for idx in buf.sample_indices(n, &mut rng) {
            counts[idx] += 1;
        }
        let p = 0.1;
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        for (i, &c) in counts.iter().enumerate() {
            let f = c as f64 / n as f64;
            assert!((f - p).abs() < 3.0 * sigma, "item {i}: freq {f}");
        }
        // Chi-square goodness of fit at significance 0.001 (9 dof -> 27.88).
        let expected = n as f64 / 10.0;
        let chi2: f64 = counts.iter().map(|&c| {
            let d = c as f64 - expected;
            d * d / expected
        }).sum();
        assert!(chi2 < 27.88, "chi-square {chi2}");
    }

    #[test]
    fn memory_never_exceeds_capacity() {
        let mut buf = ReplayBuffer::new(3);
        for i in 0..1000 {
            buf.push(t(i as f64));
            assert!(buf.len() <= 3);
        }
    }
}
