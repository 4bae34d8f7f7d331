//! Deterministic data parallelism.
//!
//! `parallel_map` fans an indexed computation out over scoped threads and
//! reassembles results in input order, so parallel and serial runs produce
//! identical output. The `MAR_THREADS` environment variable caps the worker
//! count.

/// Worker cap: `MAR_THREADS` if set and positive, otherwise the machine's
/// available parallelism.
pub fn max_threads() -> usize {
    if let Ok(v) = std::env::var("MAR_THREADS") {
        if let Ok(n) = v.trim().parse::<usize>() {
            if n >= 1 {
                return n;
            }
        }
    }
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Map `f` over `items`, possibly in parallel; results come back in input
/// order regardless of scheduling.
pub fn parallel_map<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync,
{
    let threads = max_threads().min(items.len());
    if threads <= 1 {
        return items.iter().map(f).collect();
    }
    let chunk_len = items.len().div_ceil(threads);
    let mut pieces: Vec<Vec<U>> = Vec::with_capacity(threads);
    std::thread::scope(|scope| {
        let handles: Vec<_> = items
            .chunks(chunk_len)
            .map(|chunk| {
                let f = &f;
                scope.spawn(move || chunk.iter().map(f).collect::<Vec<U>>())
            })
            .collect();
        for handle in handles {
            pieces.push(handle.join().expect("worker panicked"));
        }
    });
    pieces.into_iter().flatten().collect()
}
