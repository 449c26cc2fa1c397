//! Minimal scoped worker helpers.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

/// Runs `f(worker_index)` on `workers` threads and collects the results in
/// worker order. A single worker runs on the calling thread.
pub(crate) fn scoped_map<T, F>(workers: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    if workers <= 1 {
        return vec![f(0)];
    }
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let f = &f;
                scope.spawn(move || f(w))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|e| std::panic::resume_unwind(e)))
            .collect()
    })
}

/// Shared queue over a fixed task list; workers claim the next index.
pub(crate) struct TaskCursor {
    next: AtomicUsize,
    len: usize,
}

impl TaskCursor {
    pub(crate) fn new(len: usize) -> Self {
        TaskCursor {
            next: AtomicUsize::new(0),
            len,
        }
    }

    pub(crate) fn claim(&self) -> Option<usize> {
        let i = self.next.fetch_add(1, Ordering::Relaxed);
        (i < self.len).then_some(i)
    }
}

/// Shared queue handing out owned items, used where tasks carry `&mut` data.
pub(crate) struct OwnedQueue<T> {
    items: Mutex<std::vec::IntoIter<T>>,
}

impl<T> OwnedQueue<T> {
    pub(crate) fn new(items: Vec<T>) -> Self {
        OwnedQueue {
            items: Mutex::new(items.into_iter()),
        }
    }

    pub(crate) fn pop(&self) -> Option<T> {
        self.items.lock().unwrap_or_else(|e| e.into_inner()).next()
    }
}

/// Equal contiguous slices of `items`, one per worker (some may be empty).
pub(crate) fn split_even<T>(items: &[T], parts: usize) -> Vec<&[T]> {
    let parts = parts.max(1);
    let chunk = items.len().div_ceil(parts);
    (0..parts)
        .map(|i| {
            let start = (i * chunk).min(items.len());
            let end = ((i + 1) * chunk).min(items.len());
            &items[start..end]
        })
        .collect()
}
