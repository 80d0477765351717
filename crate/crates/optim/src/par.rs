/// Evaluates `f` on every point with up to `jobs` threads. Results keep the
/// input order.
pub(crate) fn map<T, R, F>(points: &[T], jobs: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let jobs = jobs.max(1).min(points.len());
    if jobs <= 1 {
        return points.iter().map(&f).collect();
    }
    let chunk = points.len().div_ceil(jobs);
    std::thread::scope(|s| {
        let handles: Vec<_> = points
            .chunks(chunk)
            .map(|c| s.spawn(|| c.iter().map(&f).collect::<Vec<R>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("evaluation thread panicked"))
            .collect()
    })
}
