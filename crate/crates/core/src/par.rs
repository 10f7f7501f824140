//! Chunked data-parallel helpers.
//!
//! With the `parallel` feature the chunks are processed on the rayon pool;
//! without it (or with [`Execution::Sequential`]) the same chunks are
//! processed in order on the calling thread. Chunk boundaries are fixed by
//! `CHUNK` and results are collected in chunk order, so both paths produce
//! identical outputs.

pub const CHUNK: usize = 1 << 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// Whether `Parallel` actually runs on multiple threads in this build.
    pub const fn parallel_available() -> bool {
        cfg!(feature = "parallel")
    }
}

pub fn map_chunks<T, R, F>(items: &[T], exec: Execution, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&[T]) -> R + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            items.par_chunks(CHUNK).map(f).collect()
        }
        _ => items.chunks(CHUNK).map(f).collect(),
    }
}

/// Maps every element, preserving order.
pub fn map_each<T, R, F>(items: &[T], exec: Execution, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    map_chunks(items, exec, |chunk| {
        chunk.iter().map(&f).collect::<Vec<_>>()
    })
    .into_iter()
    .flatten()
    .collect()
}
