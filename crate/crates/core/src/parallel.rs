//! Ordered map over independent tasks, on a rayon pool or sequentially.
//!
//! Results always come back in task order, so any reduction done by the
//! caller is independent of how many workers ran.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Execution {
    Sequential,
    /// `workers == 0` uses rayon's default thread count.
    Parallel { workers: usize },
}

impl Default for Execution {
    fn default() -> Self {
        Self::Parallel { workers: 0 }
    }
}

impl Execution {
    /// One worker means sequential; zero means "let the pool decide".
    pub fn from_workers(workers: usize) -> Self {
        if workers == 1 {
            Self::Sequential
        } else {
            Self::Parallel { workers }
        }
    }
}

#[cfg(feature = "parallel")]
pub fn map_ordered<T, R, F>(exec: Execution, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    use rayon::prelude::*;
    match exec {
        Execution::Sequential => items.iter().map(f).collect(),
        Execution::Parallel { workers } => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build();
            match pool {
                Ok(pool) => pool.install(|| items.par_iter().map(&f).collect()),
                Err(_) => items.iter().map(f).collect(),
            }
        }
    }
}

#[cfg(not(feature = "parallel"))]
pub fn map_ordered<T, R, F>(_exec: Execution, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    items.iter().map(f).collect()
}
