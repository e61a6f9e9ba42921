//! Multi-level orthonormal Haar transform on vectors and images.

use crate::error::{Error, Result};
use crate::signal::Signal;

const INV_SQRT2: f64 = std::f64::consts::FRAC_1_SQRT_2;

fn check_levels(shape: &[usize], levels: usize) -> Result<()> {
    let (h, w, _) = shape_hw(shape);
    let block = 1usize
        .checked_shl(levels as u32)
        .ok_or_else(|| Error::param("too many wavelet levels"))?;
    for d in [h, w] {
        if d > 1 && d % block != 0 {
            return Err(Error::param(format!(
                "dimension {d} is not divisible by 2^{levels}"
            )));
        }
    }
    Ok(())
}

fn shape_hw(shape: &[usize]) -> (usize, usize, usize) {
    crate::signal::dims3(shape)
}

fn haar_step(buf: &mut [f64], tmp: &mut Vec<f64>, inverse: bool) {
    let half = buf.len() / 2;
    tmp.clear();
    tmp.extend_from_slice(buf);
    for i in 0..half {
        if inverse {
            let (a, d) = (tmp[i], tmp[half + i]);
            buf[2 * i] = (a + d) * INV_SQRT2;
            buf[2 * i + 1] = (a - d) * INV_SQRT2;
        } else {
            let (x0, x1) = (tmp[2 * i], tmp[2 * i + 1]);
            buf[i] = (x0 + x1) * INV_SQRT2;
            buf[half + i] = (x0 - x1) * INV_SQRT2;
        }
    }
}

/// One channel stored densely as `h x w`; transforms the leading
/// `bh x bw` block along each non-singleton axis.
fn transform_block(img: &mut [f64], w: usize, bh: usize, bw: usize, inverse: bool) {
    let mut tmp = Vec::new();
    let mut line = Vec::new();
    let mut pass = |axis: usize, img: &mut [f64]| {
        if axis == 0 && bw > 1 {
            for r in 0..bh {
                haar_step(&mut img[r * w..r * w + bw], &mut tmp, inverse);
            }
        } else if axis == 1 && bh > 1 {
            for c in 0..bw {
                line.clear();
                line.extend((0..bh).map(|r| img[r * w + c]));
                haar_step(&mut line, &mut tmp, inverse);
                for (r, v) in line.iter().enumerate() {
                    img[r * w + c] = *v;
                }
            }
        }
    };
    let order = if inverse { [1, 0] } else { [0, 1] };
    for axis in order {
        pass(axis, img);
    }
}

fn run(x: &Signal, levels: usize, inverse: bool) -> Result<Signal> {
    check_levels(x.shape(), levels)?;
    let (h, w, c) = x.dims3();
    let mut out = vec![0.0; x.len()];
    let mut chan = vec![0.0; h * w];
    for ch in 0..c {
        for (p, v) in chan.iter_mut().enumerate() {
            *v = x.data()[p * c + ch];
        }
        let blocks: Vec<(usize, usize)> = (0..levels)
            .map(|l| ((h >> l).max(1), (w >> l).max(1)))
            .collect();
        if inverse {
            for &(bh, bw) in blocks.iter().rev() {
                transform_block(&mut chan, w, bh, bw, true);
            }
        } else {
            for &(bh, bw) in &blocks {
                transform_block(&mut chan, w, bh, bw, false);
            }
        }
        for (p, v) in chan.iter().enumerate() {
            out[p * c + ch] = *v;
        }
    }
    Ok(x.with_data(out))
}

/// Coefficients `W x`. The coarsest approximation occupies the leading block.
pub fn haar_forward(x: &Signal, levels: usize) -> Result<Signal> {
    run(x, levels, false)
}

/// `Wᵀ c`, the exact inverse of [`haar_forward`].
pub fn haar_inverse(c: &Signal, levels: usize) -> Result<Signal> {
    run(c, levels, true)
}

/// Largest level count that the shape supports.
pub fn max_haar_levels(shape: &[usize]) -> usize {
    let (h, w, _) = shape_hw(shape);
    let tz = |d: usize| if d > 1 { d.trailing_zeros() as usize } else { usize::MAX };
    let l = tz(h).min(tz(w));
    if l == usize::MAX {
        0
    } else {
        l
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    #[test]
    fn orthonormal_and_invertible() {
        let mut rng = Rng::new(7);
        for shape in [vec![16], vec![8, 16], vec![8, 8, 3]] {
            let x = rng.normal_signal(&shape);
            let c = haar_forward(&x, 3).unwrap();
            assert!((c.norm() - x.norm()).abs() <= 1e-12 * x.norm());
            assert!(haar_inverse(&c, 3).unwrap().max_abs_diff(&x) <= 1e-12);
        }
        assert!(haar_forward(&Signal::zeros(&[12]), 3).is_err());
        assert_eq!(max_haar_levels(&[64, 32]), 5);
    }

    #[test]
    fn single_level_pairs() {
        let x = Signal::from_vec(vec![1.0, 3.0, 2.0, 2.0]).unwrap();
        let c = haar_forward(&x, 1).unwrap();
        let s = std::f64::consts::SQRT_2;
        let want = [4.0 / s, 4.0 / s, -2.0 / s, 0.0];
        for (a, b) in c.data().iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
    }
}
