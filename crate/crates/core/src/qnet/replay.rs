use rand::Rng;

/// Fixed-capacity ring buffer; once full, the oldest entry is overwritten.
#[derive(Clone, Debug)]
pub struct ReplayBuffer<T> {
    capacity: usize,
    items: Vec<T>,
    next: usize,
}

impl<T> ReplayBuffer<T> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        ReplayBuffer {
            capacity,
            items: Vec::with_capacity(capacity.min(1 << 16)),
            next: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn push(&mut self, item: T) {
        if self.items.len() < self.capacity {
            self.items.push(item);
        } else {
            self.items[self.next] = item;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    /// Uniform sample with replacement.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<&T> {
        if self.items.is_empty() {
            return Vec::new();
        }
        (0..n)
            .map(|_| &self.items[rng.gen_range(0..self.items.len())])
            .collect()
    }

    /// Entries from oldest to newest.
    pub fn iter(&self) -> impl Iterator<Item = &T> {
        let (newer, older) = if self.items.len() < self.capacity {
            self.items.split_at(self.items.len())
        } else {
            self.items.split_at(self.next)
        };
        older.iter().chain(newer.iter())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use proptest::prelude::*;

    #[test]
    fn evicts_oldest_first() {
        let mut buf = ReplayBuffer::new(3);
        for i in 0..5 {
            buf.push(i);
        }
        assert_eq!(buf.len(), 3);
        assert_eq!(buf.iter().copied().collect::<Vec<_>>(), vec![2, 3, 4]);
    }

    #[test]
    fn seeded_sampling_is_reproducible() {
        let mut buf = ReplayBuffer::new(100);
        for i in 0..100 {
            buf.push(i);
        }
        let a: Vec<i32> = buf.sample(20, &mut seed::rng(5)).into_iter().copied().collect();
        let b: Vec<i32> = buf.sample(20, &mut seed::rng(5)).into_iter().copied().collect();
        assert_eq!(a, b);
    }

    proptest! {
        #[test]
        fn never_exceeds_capacity(cap in 1usize..20, pushes in 0usize..100) {
            let mut buf = ReplayBuffer::new(cap);
            for i in 0..pushes {
                buf.push(i);
                prop_assert!(buf.len() <= cap);
            }
            let kept: Vec<usize> = buf.iter().copied().collect();
            let expected: Vec<usize> = (pushes.saturating_sub(cap)..pushes).collect();
            prop_assert_eq!(kept, expected);
        }
    }
}
