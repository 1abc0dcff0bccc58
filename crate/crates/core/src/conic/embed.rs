use num_complex::Complex64;

use super::AffineExpr;

/// A complex vector of length `len` stored in the real variables
/// `offset .. offset + 2 * len` as interleaved `(re, im)` pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ComplexBlock {
    pub offset: usize,
    pub len: usize,
}

impl ComplexBlock {
    pub fn re(&self, j: usize) -> usize {
        debug_assert!(j < self.len);
        self.offset + 2 * j
    }

    pub fn im(&self, j: usize) -> usize {
        debug_assert!(j < self.len);
        self.offset + 2 * j + 1
    }

    /// `Re{c^H f}` as an affine expression in the block.
    pub fn inner_re<'a>(&self, c: impl IntoIterator<Item = &'a Complex64>) -> AffineExpr {
        let mut e = AffineExpr::default();
        for (j, cj) in c.into_iter().enumerate() {
            e.terms.push((self.re(j), cj.re));
            e.terms.push((self.im(j), cj.im));
        }
        e
    }

    /// `Im{c^H f}` as an affine expression in the block.
    pub fn inner_im<'a>(&self, c: impl IntoIterator<Item = &'a Complex64>) -> AffineExpr {
        let mut e = AffineExpr::default();
        for (j, cj) in c.into_iter().enumerate() {
            e.terms.push((self.im(j), cj.re));
            e.terms.push((self.re(j), -cj.im));
        }
        e
    }

    /// The `2 len` real coordinates; their squared norm is `||f||^2`.
    pub fn coordinates(&self, scale: f64) -> Vec<AffineExpr> {
        (self.offset..self.offset + 2 * self.len)
            .map(|i| AffineExpr::term(i, scale))
            .collect()
    }

    pub fn read(&self, z: &[f64]) -> Vec<Complex64> {
        extract_complex(&z[self.offset..self.offset + 2 * self.len])
    }

    pub fn write(&self, z: &mut [f64], v: &[Complex64]) {
        z[self.offset..self.offset + 2 * self.len].copy_from_slice(&embed_complex(v));
    }
}

pub fn embed_complex(v: &[Complex64]) -> Vec<f64> {
    v.iter().flat_map(|z| [z.re, z.im]).collect()
}

pub fn extract_complex(z: &[f64]) -> Vec<Complex64> {
    z.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])).collect()
}
