use serde::{Deserialize, Serialize};

use crate::core::Matrix;
use crate::PfmError;

/// Fixed 2-D sinusoidal encoding of a patch grid, one row per token in
/// row-major grid order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositionalEncoding {
    pub grid_h: usize,
    pub grid_w: usize,
    pub values: Matrix,
}

impl PositionalEncoding {
    pub fn d(&self) -> usize {
        self.values.cols()
    }

    pub fn n_tokens(&self) -> usize {
        self.values.rows()
    }
}

/// The first `d/2` channels encode the grid row, the last `d/2` the column.
/// Within each half, channel pair `(2i, 2i+1)` holds `sin` and `cos` of
/// `pos / 10000^(2i / (d/2))`.
pub fn positional_encoding(grid_h: usize, grid_w: usize, d: usize) -> Result<PositionalEncoding, PfmError> {
    if d == 0 || d % 4 != 0 {
        return Err(PfmError::Shape(format!(
            "positional encoding width {d} is not a positive multiple of 4"
        )));
    }
    let half = d / 2;
    let values = Matrix::from_fn(grid_h * grid_w, d, |token, c| {
        let (pos, k) = if c < half {
            (token / grid_w, c)
        } else {
            (token % grid_w, c - half)
        };
        let freq = 10000f64.powf(-((k - k % 2) as f64) / half as f64);
        let phase = pos as f64 * freq;
        if k % 2 == 0 {
            phase.sin()
        } else {
            phase.cos()
        }
    });
    Ok(PositionalEncoding { grid_h, grid_w, values })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn origin_is_zero_phase() {
        let p = positional_encoding(2, 3, 8).unwrap();
        assert_eq!(p.values.row(0), &[0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0]);
        assert!(positional_encoding(2, 2, 6).is_err());
    }
}
