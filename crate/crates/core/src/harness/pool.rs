use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

/// Runs `jobs` on at most `workers` threads and returns the results in job
/// order.
pub fn run_pool<T, F>(jobs: Vec<F>, workers: usize) -> Vec<T>
where
    T: Send,
    F: FnOnce() -> T + Send,
{
    run_pool_with(jobs, workers, &|_: usize, _: &T| {})
}

/// As [`run_pool`], calling `on_done(job, result)` from the finishing worker
/// as each job completes; calls are serialized.
pub fn run_pool_with<T, F>(jobs: Vec<F>, workers: usize, on_done: &(dyn Fn(usize, &T) + Sync)) -> Vec<T>
where
    T: Send,
    F: FnOnce() -> T + Send,
{
    let writer = Mutex::new(());
    let n = jobs.len();
    let workers = workers.clamp(1, n.max(1));
    let slots: Vec<Mutex<Option<F>>> = jobs.into_iter().map(|j| Mutex::new(Some(j))).collect();
    let results: Vec<Mutex<Option<T>>> = (0..n).map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let job = slots[i].lock().unwrap().take().expect("each job runs once");
                let out = job();
                {
                    let _guard = writer.lock().unwrap();
                    on_done(i, &out);
                }
                *results[i].lock().unwrap() = Some(out);
            });
        }
    });
    results.into_iter().map(|m| m.into_inner().unwrap().expect("every job ran")).collect()
}
