//! Data-parallel helpers with a sequential fallback.

use crate::search::Execution;

/// Maps every item to a vector and concatenates the results in input order.
pub(crate) fn flat_map<T, R, F>(exec: Execution, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Vec<R> + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            items.par_iter().flat_map_iter(&f).collect()
        }
        _ => items.iter().flat_map(f).collect(),
    }
}
