//! Deterministic pairwise summation.
//!
//! The accumulator behaves like a binary counter: two partial sums of equal
//! size are merged as soon as both exist, so the summation tree depends only
//! on the number of terms and their order.

#[derive(Clone, Debug)]
pub struct Pairwise<const K: usize> {
    stack: Vec<([f64; K], u32)>,
}

impl<const K: usize> Default for Pairwise<K> {
    fn default() -> Self {
        Self::new()
    }
}

impl<const K: usize> Pairwise<K> {
    pub fn new() -> Self {
        Self { stack: Vec::with_capacity(40) }
    }

    pub fn push(&mut self, v: [f64; K]) {
        let mut cur = (v, 0u32);
        while let Some(top) = self.stack.last() {
            if top.1 != cur.1 {
                break;
            }
            let (a, level) = self.stack.pop().unwrap();
            let mut s = a;
            for (x, y) in s.iter_mut().zip(cur.0.iter()) {
                *x += y;
            }
            cur = (s, level + 1);
        }
        self.stack.push(cur);
    }

    pub fn finish(self) -> [f64; K] {
        let mut out = [0.0; K];
        let mut first = true;
        for (v, _) in self.stack.into_iter().rev() {
            if first {
                out = v;
                first = false;
            } else {
                for (o, x) in out.iter_mut().zip(v.iter()) {
                    *o = x + *o;
                }
            }
        }
        out
    }
}

pub fn pairwise_sum(values: &[f64]) -> f64 {
    let mut acc = Pairwise::<1>::new();
    for v in values {
        acc.push([*v]);
    }
    acc.finish()[0]
}

pub fn pairwise_sum_arrays<const K: usize>(values: &[[f64; K]]) -> [f64; K] {
    let mut acc = Pairwise::<K>::new();
    for v in values {
        acc.push(*v);
    }
    acc.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_sums() {
        assert_eq!(pairwise_sum(&[]), 0.0);
        assert_eq!(pairwise_sum(&[2.5]), 2.5);
        assert_eq!(pairwise_sum(&[1.0, 2.0, 3.0, 4.0, 5.0]), 15.0);
    }

    #[test]
    fn tree_shape_for_eight_terms() {
        // ((a+b)+(c+d))+((e+f)+(g+h))
        let v = [1e16, 1.0, -1e16, 1.0, 3.0, 4.0, 5.0, 6.0];
        let expect = ((v[0] + v[1]) + (v[2] + v[3])) + ((v[4] + v[5]) + (v[6] + v[7]));
        assert_eq!(pairwise_sum(&v), expect);
    }

    #[test]
    fn error_grows_slowly() {
        let n = 1 << 20;
        let v = vec![0.1; n];
        let s = pairwise_sum(&v);
        assert!((s - 0.1 * n as f64).abs() < 1e-9);
    }
}
