//! Addressable binary max-heap with a decrease-key operation.

const NOT_IN_HEAP: usize = usize::MAX;

/// Max-heap over the indices `0..n`, keyed by `f64`.
///
/// Larger keys come first; equal keys are broken in favour of the smaller
/// index. `slot[i]` tracks where index `i` sits so keys can be lowered in
/// `O(log n)`.
#[derive(Debug, Clone)]
pub struct MutableMaxHeap {
    keys: Vec<f64>,
    heap: Vec<usize>,
    slot: Vec<usize>,
}

impl MutableMaxHeap {
    /// Heapifies all indices `0..keys.len()` with the given initial keys.
    /// Keys must not be NaN.
    pub fn new(keys: Vec<f64>) -> Self {
        debug_assert!(keys.iter().all(|k| !k.is_nan()));
        let n = keys.len();
        let mut h = MutableMaxHeap { keys, heap: (0..n).collect(), slot: (0..n).collect() };
        for pos in (0..n / 2).rev() {
            h.sift_down(pos);
        }
        h
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.slot[i] != NOT_IN_HEAP
    }

    /// Current key of `i` (its last key if already popped).
    pub fn key(&self, i: usize) -> f64 {
        self.keys[i]
    }

    pub fn peek(&self) -> Option<(usize, f64)> {
        self.heap.first().map(|&i| (i, self.keys[i]))
    }

    /// Removes and returns the root.
    pub fn pop(&mut self) -> Option<(usize, f64)> {
        let top = *self.heap.first()?;
        let last = self.heap.pop().unwrap();
        self.slot[top] = NOT_IN_HEAP;
        if last != top {
            self.heap[0] = last;
            self.slot[last] = 0;
            self.sift_down(0);
        }
        Some((top, self.keys[top]))
    }

    /// Sets the key of `i` to `min(key(i), value)`. Returns whether the key
    /// changed. Indices no longer in the heap are ignored.
    pub fn decrease(&mut self, i: usize, value: f64) -> bool {
        let pos = self.slot[i];
        if pos == NOT_IN_HEAP || !(value < self.keys[i]) {
            return false;
        }
        self.keys[i] = value;
        self.sift_down(pos);
        true
    }

    #[inline]
    fn before(&self, a: usize, b: usize) -> bool {
        let (ka, kb) = (self.keys[a], self.keys[b]);
        ka > kb || (ka == kb && a < b)
    }

    fn sift_down(&mut self, mut pos: usize) {
        let n = self.heap.len();
        loop {
            let left = 2 * pos + 1;
            if left >= n {
                break;
            }
            let right = left + 1;
            let mut best = left;
            if right < n && self.before(self.heap[right], self.heap[left]) {
                best = right;
            }
            if self.before(self.heap[best], self.heap[pos]) {
                self.heap.swap(pos, best);
                self.slot[self.heap[pos]] = pos;
                self.slot[self.heap[best]] = best;
                pos = best;
            } else {
                break;
            }
        }
    }
}
