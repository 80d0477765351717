//! Banded storage and an in-place LU factorization without pivoting.
//!
//! The coupled tangent is unsymmetric but strongly block-diagonal
//! dominant once DOFs are interleaved per node, so Doolittle elimination
//! inside the band is stable in practice. Tiny pivots are still detected
//! and reported rather than divided by.

/// Square matrix with `kl` sub-diagonals and `ku` super-diagonals.
///
/// Row-major band storage: entry `(i, j)` lives at `i * width + (j + kl - i)`.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = kl + ku + 1;
        BandMatrix {
            n,
            kl,
            ku,
            width,
            data: vec![0.0; n * width],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    pub fn clear(&mut self) {
        self.data.iter_mut().for_each(|v| *v = 0.0);
    }

    #[inline]
    fn index(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.ku, "({i}, {j}) outside band");
        i * self.width + (j + self.kl - i)
    }

    /// Adds `v` at `(i, j)`; panics in debug builds if the entry is outside the band.
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self.index(i, j);
        self.data[k] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j + self.kl < i || j > i + self.ku {
            0.0
        } else {
            self.data[self.index(i, j)]
        }
    }

    /// `y = A x`
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for (i, yi) in y.iter_mut().enumerate() {
            let j0 = i.saturating_sub(self.kl);
            let j1 = (i + self.ku).min(self.n - 1);
            let row = &self.data[i * self.width..(i + 1) * self.width];
            let mut s = 0.0;
            for j in j0..=j1 {
                s += row[j + self.kl - i] * x[j];
            }
            *yi = s;
        }
        y
    }

    /// Factorizes in place. On a vanishing pivot returns its equation index.
    pub fn factor(mut self) -> Result<BandLu, usize> {
        let (n, kl, ku, w) = (self.n, self.kl, self.ku, self.width);
        let scale = self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let tiny = scale * 1e-14;
        for k in 0..n {
            let pivot = self.data[k * w + kl];
            if !(pivot.abs() > tiny) {
                return Err(k);
            }
            let jend = (k + ku).min(n - 1);
            let iend = (k + kl).min(n - 1);
            let (head, tail) = self.data.split_at_mut((k + 1) * w);
            let prow = &head[k * w + kl + 1..k * w + kl + 1 + (jend - k)];
            for i in k + 1..=iend {
                let off = (i - k - 1) * w;
                let lik_pos = off + (k + kl - i);
                let lik = tail[lik_pos] / pivot;
                tail[lik_pos] = lik;
                if lik == 0.0 {
                    continue;
                }
                let start = off + (k + 1 + kl - i);
                let row = &mut tail[start..start + (jend - k)];
                for (r, p) in row.iter_mut().zip(prow) {
                    *r -= lik * p;
                }
            }
        }
        Ok(BandLu { a: self })
    }
}

/// LU factors stored over the original band.
#[derive(Debug, Clone)]
pub struct BandLu {
    a: BandMatrix,
}

impl BandLu {
    pub fn n(&self) -> usize {
        self.a.n
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.a.kl, self.a.ku)
    }

    /// Re-factors rows `i0..` from `a`, keeping the factors of the leading rows.
    ///
    /// The leading rows of `a` are assumed to match the matrix this
    /// factorization came from; the factors may grow to `a`'s size and band.
    pub fn refactor_tail(self, a: &BandMatrix, i0: usize) -> Result<BandLu, usize> {
        let (n, kl, ku, w) = (a.n, a.kl, a.ku, a.width);
        if kl < self.a.kl || ku < self.a.ku || n < i0 || self.a.n < i0 {
            return Err(i0);
        }
        let mut data = vec![0.0; n * w];
        for i in 0..i0 {
            let old = &self.a.data[i * self.a.width..(i + 1) * self.a.width];
            for (jj, v) in old.iter().enumerate() {
                // column j = i + jj - old_kl
                let new_pos = jj + kl - self.a.kl;
                data[i * w + new_pos] = *v;
            }
        }
        data[i0 * w..].copy_from_slice(&a.data[i0 * w..]);
        let scale = a.data[i0 * w..].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let tiny = scale * 1e-14;
        for i in i0..n {
            let (head, row) = data.split_at_mut(i * w);
            let row = &mut row[..w];
            for k in i.saturating_sub(kl)..i {
                let lik_pos = k + kl - i;
                let pivot = head[k * w + kl];
                let lik = row[lik_pos] / pivot;
                row[lik_pos] = lik;
                if lik == 0.0 {
                    continue;
                }
                let jend = (k + ku).min(n - 1);
                let prow = &head[k * w + kl + 1..k * w + kl + 1 + (jend - k)];
                let start = k + 1 + kl - i;
                for (r, p) in row[start..start + (jend - k)].iter_mut().zip(prow) {
                    *r -= lik * p;
                }
            }
            if !(row[kl].abs() > tiny) {
                return Err(i);
            }
        }
        Ok(BandLu {
            a: BandMatrix {
                n,
                kl,
                ku,
                width: w,
                data,
            },
        })
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let BandMatrix {
            n, kl, ku, width: w, ref data,
        } = self.a;
        assert_eq!(b.len(), n);
        for i in 0..n {
            let j0 = i.saturating_sub(kl);
            let row = &data[i * w..];
            let mut s = b[i];
            for j in j0..i {
                s -= row[j + kl - i] * b[j];
            }
            b[i] = s;
        }
        for i in (0..n).rev() {
            let j1 = (i + ku).min(n - 1);
            let row = &data[i * w..];
            let mut s = b[i];
            for j in i + 1..=j1 {
                s -= row[j + kl - i] * b[j];
            }
            b[i] = s / row[kl];
        }
    }
}
