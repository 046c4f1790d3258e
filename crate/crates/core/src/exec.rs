//! Execution strategy for the data-parallel parts of the simulator.
//!
//! With the `parallel` feature (on by default) independent work items run on
//! a rayon pool; without it, or with [`Execution::Sequential`], everything
//! runs on the calling thread. Results never depend on the strategy: work
//! items share no mutable state and are collected in input order.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// Whether this build can actually run work in parallel.
    pub fn parallel_available() -> bool {
        cfg!(feature = "parallel")
    }

    pub fn join<A, B, RA, RB>(self, a: A, b: B) -> (RA, RB)
    where
        A: FnOnce() -> RA + Send,
        B: FnOnce() -> RB + Send,
        RA: Send,
        RB: Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => rayon::join(a, b),
            _ => (a(), b()),
        }
    }

    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                use rayon::prelude::*;
                items.par_iter().map(f).collect()
            }
            _ => items.iter().map(f).collect(),
        }
    }

    /// Run `f` with parallelism capped at `threads` workers. Falls back to
    /// the global pool when a dedicated pool cannot be built.
    pub fn with_threads<R: Send>(self, threads: Option<usize>, f: impl FnOnce() -> R + Send) -> R {
        match (self, threads) {
            #[cfg(feature = "parallel")]
            (Execution::Parallel, Some(n)) if n > 0 => {
                match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
                    Ok(pool) => pool.install(f),
                    Err(_) => f(),
                }
            }
            _ => f(),
        }
    }
}

/// Thread cap from `CEI_SIM_THREADS`, if set to a positive integer.
pub fn thread_cap_from_env() -> Option<usize> {
    std::env::var("CEI_SIM_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strategies_agree() {
        let items: Vec<u64> = (0..1000).collect();
        let f = |x: &u64| x.wrapping_mul(2654435761) % 977;
        assert_eq!(Execution::Sequential.map(&items, f), Execution::Parallel.map(&items, f));
        assert_eq!(Execution::Parallel.join(|| 1, || 2), (1, 2));
        let r = Execution::Parallel.with_threads(Some(2), || Execution::Parallel.map(&items, f));
        assert_eq!(r, Execution::Sequential.map(&items, f));
    }
}
