use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{hermitian_asymmetry, CMat, Hermitian};

/// Real symmetric image `[[Re H, −Im H], [Im H, Re H]]` of a Hermitian `H`.
///
/// The map preserves positive semidefiniteness and doubles every
/// eigenvalue's multiplicity.
pub fn hermitian_embedding(h: &CMat) -> Result<DMatrix<f64>> {
    if !h.is_square() {
        return Err(Error::Dimension(format!("embedding needs a square block, got {}x{}", h.nrows(), h.ncols())));
    }
    let scale = h.iter().map(|x| x.norm()).fold(1.0, f64::max);
    let asym = hermitian_asymmetry(h);
    if asym > Hermitian::TOL * scale {
        return Err(Error::NotHermitian { asymmetry: asym });
    }
    let n = h.nrows();
    Ok(DMatrix::from_fn(2 * n, 2 * n, |r, c| {
        let x = h[(r % n, c % n)];
        match (r < n, c < n) {
            (true, true) | (false, false) => x.re,
            (true, false) => -x.im,
            (false, true) => x.im,
        }
    }))
}

/// Index pairs `(row, col)` of the svec ordering used by the PSD cone:
/// upper triangle, column by column.
pub fn svec_order(n: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    for col in 0..n {
        for row in 0..=col {
            out.push((row, col));
        }
    }
    out
}
