//! Batch runners over seeds. With the `parallel` feature (on by default) the
//! seeds are spread over the rayon pool; without it they run in order on the
//! calling thread. Results always come back in seed order, so both paths
//! produce identical output.

/// Run `f` once per seed on the calling thread.
pub fn map_seeds_sequential<T, F>(seeds: &[u64], f: F) -> Vec<T>
where
    F: Fn(u64) -> T,
{
    seeds.iter().map(|&s| f(s)).collect()
}

#[cfg(feature = "parallel")]
pub fn map_seeds_parallel<T, F>(seeds: &[u64], f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    use rayon::prelude::*;
    seeds.par_iter().map(|&s| f(s)).collect()
}

/// The default runner for this build.
pub fn map_seeds<T, F>(seeds: &[u64], f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        map_seeds_parallel(seeds, f)
    }
    #[cfg(not(feature = "parallel"))]
    {
        map_seeds_sequential(seeds, f)
    }
}

pub fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        let seeds: Vec<u64> = (0..200).collect();
        let f = |s: u64| s.wrapping_mul(0x9E37_79B9_7F4A_7C15) >> 7;
        assert_eq!(map_seeds(&seeds, f), map_seeds_sequential(&seeds, f));
    }
}
