//! Order-preserving parallel map with a hard bound on concurrency.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

/// Applies `f` to every item using at most `max_parallel` worker threads.
///
/// Results come back in input order. The concurrency bound holds at every
/// instant because the pool never has more than `max_parallel` threads.
pub fn bounded_parallel_map<T, R, F>(items: Vec<T>, max_parallel: usize, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync,
{
    let len = items.len();
    if len == 0 {
        return Vec::new();
    }
    let workers = max_parallel.max(1).min(len);
    if workers == 1 {
        return items.into_iter().map(f).collect();
    }
    let slots: Vec<Mutex<Option<T>>> = items.into_iter().map(|i| Mutex::new(Some(i))).collect();
    let results: Vec<Mutex<Option<R>>> = (0..len).map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let index = next.fetch_add(1, Ordering::SeqCst);
                if index >= len {
                    break;
                }
                let item = slots[index]
                    .lock()
                    .expect("slot lock")
                    .take()
                    .expect("each slot taken once");
                let result = f(item);
                *results[index].lock().expect("result lock") = Some(result);
            });
        }
    });
    results
        .into_iter()
        .map(|slot| slot.into_inner().expect("result lock").expect("worker filled slot"))
        .collect()
}
