//! Data-parallel map helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) [`Exec::Parallel`] dispatches to
//! rayon; without it every call runs sequentially. Results are always
//! returned in input order, so outputs do not depend on the mode.

/// Execution mode for per-agent batch work.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    Parallel,
}

impl Default for Exec {
    fn default() -> Self {
        if is_parallel_available() {
            Exec::Parallel
        } else {
            Exec::Sequential
        }
    }
}

#[inline]
pub fn is_parallel_available() -> bool {
    cfg!(feature = "parallel")
}

impl Exec {
    pub fn map<T, U, F>(self, items: &[T], f: F) -> Vec<U>
    where
        T: Sync,
        U: Send,
        F: Fn(&T) -> U + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Exec::Parallel => {
                use rayon::prelude::*;
                items.par_iter().map(f).collect()
            }
            _ => items.iter().map(f).collect(),
        }
    }

    pub fn map_indexed<U, F>(self, count: usize, f: F) -> Vec<U>
    where
        U: Send,
        F: Fn(usize) -> U + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Exec::Parallel => {
                use rayon::prelude::*;
                (0..count).into_par_iter().map(f).collect()
            }
            _ => (0..count).map(f).collect(),
        }
    }

    /// Like [`Exec::map_indexed`] but short-circuits on the first error
    /// (lowest index wins in both modes).
    pub fn try_map_indexed<U, E, F>(self, count: usize, f: F) -> Result<Vec<U>, E>
    where
        U: Send,
        E: Send,
        F: Fn(usize) -> Result<U, E> + Sync + Send,
    {
        self.map_indexed(count, f).into_iter().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree_and_preserve_order() {
        let data: Vec<u64> = (0..1000).collect();
        let a = Exec::Sequential.map(&data, |x| x * x);
        let b = Exec::Parallel.map(&data, |x| x * x);
        assert_eq!(a, b);
        let c = Exec::Parallel.map_indexed(10, |i| i);
        assert_eq!(c, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn try_map_reports_first_error() {
        let r: Result<Vec<usize>, usize> =
            Exec::Parallel.try_map_indexed(50, |i| if i % 7 == 3 { Err(i) } else { Ok(i) });
        assert_eq!(r, Err(3));
    }
}
