//! Runtime execution settings: the parallel/sequential switch and the
//! combinatorial budget.
//!
//! Both are process-wide. With the `parallel` feature disabled every helper
//! here runs sequentially and [`set_parallel`] has no effect. Results are
//! always collected in input order, so output never depends on scheduling.

use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};

use crate::error::{Error, Result};

/// Default cap on candidate maps / sections any single enumeration may touch.
pub const DEFAULT_BUDGET: u64 = 10_000_000;

static PARALLEL: AtomicBool = AtomicBool::new(cfg!(feature = "parallel"));
static BUDGET: AtomicU64 = AtomicU64::new(DEFAULT_BUDGET);

pub fn set_parallel(on: bool) {
    PARALLEL.store(on && cfg!(feature = "parallel"), Ordering::Relaxed);
}

pub fn is_parallel() -> bool {
    PARALLEL.load(Ordering::Relaxed)
}

/// Caps worker threads at `jobs`; `1` switches to the sequential path.
/// The thread pool can be sized once per process, later calls only toggle
/// the switch.
pub fn set_jobs(jobs: usize) -> Result<()> {
    if jobs == 0 {
        return Err(Error::InvalidParameter("--jobs must be at least 1".into()));
    }
    set_parallel(jobs > 1);
    #[cfg(feature = "parallel")]
    if jobs > 1 {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
    Ok(())
}

pub fn budget() -> u64 {
    BUDGET.load(Ordering::Relaxed)
}

pub fn set_budget(budget: u64) {
    BUDGET.store(budget, Ordering::Relaxed);
}

pub(crate) fn check_budget(what: &'static str, needed: u128) -> Result<()> {
    check_budget_within(what, needed, budget())
}

pub(crate) fn check_budget_within(what: &'static str, needed: u128, budget: u64) -> Result<()> {
    if needed > budget as u128 {
        return Err(Error::BudgetExceeded {
            what,
            needed,
            budget,
        });
    }
    Ok(())
}

/// `base^exp`, saturating at `u128::MAX`.
pub(crate) fn saturating_pow(base: usize, exp: usize) -> u128 {
    let mut acc: u128 = 1;
    for _ in 0..exp {
        acc = acc.saturating_mul(base as u128);
    }
    acc
}

/// Maps `f` over `0..n`, in parallel when enabled, preserving order.
pub(crate) fn map_range<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if is_parallel() && n > 1 {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    (0..n).map(f).collect()
}

/// Maps `f` over a slice, in parallel when enabled, preserving order.
pub(crate) fn map_slice<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if is_parallel() && items.len() > 1 {
        use rayon::prelude::*;
        return items.par_iter().map(f).collect();
    }
    items.iter().map(f).collect()
}
