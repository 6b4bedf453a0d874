/// Splits `out` into `threads` contiguous runs of whole units of `unit_len`
/// elements and calls `f(first_unit, run)` for each run, on scoped threads.
///
/// Work is only ever partitioned by output element, so each element's
/// accumulation order is independent of the thread count.
pub(crate) fn par_units<F>(out: &mut [f32], unit_len: usize, threads: usize, f: F)
where
    F: Fn(usize, &mut [f32]) + Sync,
{
    debug_assert!(unit_len > 0 && out.len().is_multiple_of(unit_len));
    let units = out.len() / unit_len;
    if threads <= 1 || units < 2 {
        f(0, out);
        return;
    }
    let per_thread = units.div_ceil(threads.min(units));
    std::thread::scope(|scope| {
        for (i, run) in out.chunks_mut(per_thread * unit_len).enumerate() {
            let f = &f;
            scope.spawn(move || f(i * per_thread, run));
        }
    });
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn covers_every_unit_once() {
        for threads in [1, 2, 3, 4, 7, 16] {
            let mut out = vec![0.0f32; 10 * 3];
            par_units(&mut out, 3, threads, |first, run| {
                for (u, unit) in run.chunks_mut(3).enumerate() {
                    for v in unit {
                        *v += (first + u) as f32;
                    }
                }
            });
            let expected: Vec<f32> = (0..10).flat_map(|u| [u as f32; 3]).collect();
            assert_eq!(out, expected, "threads={threads}");
        }
    }
}
