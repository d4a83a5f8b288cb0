//! Sequential or rayon-backed execution of independent work items.
//!
//! Results are always collected in index order and any reduction is done
//! sequentially afterwards, so the output does not depend on the number of
//! threads. Without the `parallel` feature [`Execution::Parallel`] runs
//! sequentially.

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// `(0..n).map(f)`, possibly in parallel.
    pub fn map<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            Execution::Sequential => (0..n).map(f).collect(),
            Execution::Parallel => par_map(n, f),
        }
    }

    /// Applies `f` to every element of `xs`, possibly in parallel chunks.
    pub fn for_each_mut<T, F>(self, xs: &mut [T], f: F)
    where
        T: Send,
        F: Fn(&mut T) + Sync + Send,
    {
        match self {
            Execution::Sequential => xs.iter_mut().for_each(f),
            Execution::Parallel => par_for_each_mut(xs, f),
        }
    }
}

#[cfg(feature = "parallel")]
fn par_map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn par_map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}

// below this size the rayon split costs more than it saves
const MIN_CHUNK: usize = 4096;

#[cfg(feature = "parallel")]
fn par_for_each_mut<T, F>(xs: &mut [T], f: F)
where
    T: Send,
    F: Fn(&mut T) + Sync + Send,
{
    use rayon::prelude::*;
    if xs.len() < 2 * MIN_CHUNK {
        xs.iter_mut().for_each(f);
    } else {
        xs.par_chunks_mut(MIN_CHUNK)
            .for_each(|c| c.iter_mut().for_each(&f));
    }
}

#[cfg(not(feature = "parallel"))]
fn par_for_each_mut<T, F>(xs: &mut [T], f: F)
where
    T: Send,
    F: Fn(&mut T) + Sync + Send,
{
    let _ = MIN_CHUNK;
    xs.iter_mut().for_each(f);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree() {
        let f = |i: usize| (i as f64).sqrt().sin();
        assert_eq!(
            Execution::Sequential.map(1000, f),
            Execution::Parallel.map(1000, f)
        );
        let mut a: Vec<f64> = (0..20_000).map(|i| i as f64).collect();
        let mut b = a.clone();
        Execution::Sequential.for_each_mut(&mut a, |x| *x = x.cos());
        Execution::Parallel.for_each_mut(&mut b, |x| *x = x.cos());
        assert_eq!(a, b);
    }
}
