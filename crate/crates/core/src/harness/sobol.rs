//! Unscrambled Sobol points with Joe–Kuo direction numbers, Gray-code order.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub const MAX_DIMENSION: usize = 16;
const BITS: u32 = 32;

/// `(degree s, coefficient a, initial m_1..m_s)` for dimensions 2..=16.
const DIRECTION_DATA: [(u32, u32, &[u32]); MAX_DIMENSION - 1] = [
    (1, 0, &[1]),
    (2, 1, &[1, 3]),
    (3, 1, &[1, 3, 1]),
    (3, 2, &[1, 1, 1]),
    (4, 1, &[1, 1, 3, 3]),
    (4, 4, &[1, 3, 5, 13]),
    (5, 2, &[1, 1, 5, 5, 17]),
    (5, 4, &[1, 1, 5, 5, 5]),
    (5, 7, &[1, 1, 7, 11, 19]),
    (5, 11, &[1, 1, 5, 1, 1]),
    (5, 13, &[1, 1, 1, 3, 11]),
    (5, 14, &[1, 3, 5, 5, 31]),
    (6, 1, &[1, 3, 3, 9, 7, 49]),
    (6, 13, &[1, 1, 1, 15, 21, 21]),
    (6, 16, &[1, 3, 1, 13, 27, 49]),
];

fn direction_numbers(dim: usize) -> [u32; BITS as usize] {
    let mut v = [0u32; BITS as usize];
    if dim == 0 {
        for (k, vk) in v.iter_mut().enumerate() {
            *vk = 1 << (BITS - 1 - k as u32);
        }
        return v;
    }
    let (s, a, m_init) = DIRECTION_DATA[dim - 1];
    let s = s as usize;
    let mut m = vec![0u32; BITS as usize];
    m[..s].copy_from_slice(m_init);
    for i in s..BITS as usize {
        let mut mi = m[i - s] ^ (m[i - s] << s);
        for k in 1..s {
            if (a >> (s - 1 - k)) & 1 == 1 {
                mi ^= m[i - k] << k;
            }
        }
        m[i] = mi;
    }
    for (k, vk) in v.iter_mut().enumerate() {
        *vk = m[k] << (BITS - 1 - k as u32);
    }
    v
}

/// First `n` Sobol points in `[0, 1)^d`, skipping the initial all-zeros point.
pub fn sobol_sequence(n: usize, d: usize) -> Result<DMatrix<f64>> {
    if d == 0 || d > MAX_DIMENSION {
        return Err(Error::invalid(format!(
            "Sobol dimension must be in 1..={MAX_DIMENSION}, got {d}"
        )));
    }
    if n as u64 >= 1u64 << BITS {
        return Err(Error::invalid("too many Sobol points requested"));
    }
    let dirs: Vec<[u32; BITS as usize]> = (0..d).map(direction_numbers).collect();
    let mut state = vec![0u32; d];
    let scale = 1.0 / (1u64 << BITS) as f64;
    let mut out = DMatrix::zeros(n, d);
    for i in 0..n {
        // point i+1 flips the direction number of the lowest zero bit of i
        let c = (!(i as u64)).trailing_zeros() as usize;
        for j in 0..d {
            state[j] ^= dirs[j][c];
            out[(i, j)] = state[j] as f64 * scale;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;

    /// First 32 non-zero points of the unscrambled 16-dimensional sequence,
    /// times 1024, from SciPy's `qmc.Sobol(d=16, scramble=False)`.
    const REFERENCE: [[u32; 16]; 32] = [
        [512, 512, 512, 512, 512, 512, 512, 512, 512, 512, 512, 512, 512, 512, 512, 512],
        [768, 256, 256, 256, 768, 768, 256, 768, 768, 768, 768, 768, 256, 256, 768, 256],
        [256, 768, 768, 768, 256, 256, 768, 256, 256, 256, 256, 256, 768, 768, 256, 768],
        [384, 384, 640, 896, 384, 128, 384, 896, 896, 640, 896, 384, 384, 640, 384, 896],
        [896, 896, 128, 384, 896, 640, 896, 384, 384, 128, 384, 896, 896, 128, 896, 384],
        [640, 128, 896, 640, 640, 896, 128, 128, 128, 384, 128, 640, 128, 896, 640, 640],
        [128, 640, 384, 128, 128, 384, 640, 640, 640, 896, 640, 128, 640, 384, 128, 128],
        [192, 320, 960, 448, 576, 320, 448, 960, 960, 320, 704, 64, 960, 960, 832, 960],
        [704, 832, 448, 960, 64, 832, 960, 448, 448, 832, 192, 576, 448, 448, 320, 448],
        [960, 64, 704, 192, 320, 576, 192, 192, 192, 576, 448, 832, 704, 704, 64, 704],
        [448, 576, 192, 704, 832, 64, 704, 704, 704, 64, 960, 320, 192, 192, 576, 192],
        [320, 192, 320, 576, 960, 448, 64, 64, 64, 960, 320, 448, 576, 320, 704, 64],
        [832, 704, 832, 64, 448, 960, 576, 576, 576, 448, 832, 960, 64, 832, 192, 576],
        [576, 448, 64, 832, 192, 704, 320, 832, 832, 192, 576, 704, 832, 64, 448, 320],
        [64, 960, 576, 320, 704, 192, 832, 320, 320, 704, 64, 192, 320, 576, 960, 832],
        [96, 480, 480, 672, 288, 992, 544, 864, 480, 160, 96, 416, 672, 672, 352, 32],
        [608, 992, 992, 160, 800, 480, 32, 352, 992, 672, 608, 928, 160, 160, 864, 544],
        [864, 224, 224, 928, 544, 224, 800, 96, 736, 928, 864, 672, 928, 928, 608, 288],
        [352, 736, 736, 416, 32, 736, 288, 608, 224, 416, 352, 160, 416, 416, 96, 800],
        [480, 96, 864, 288, 160, 864, 928, 224, 608, 544, 992, 32, 800, 32, 224, 928],
        [992, 608, 352, 800, 672, 352, 416, 736, 96, 32, 480, 544, 288, 544, 736, 416],
        [736, 352, 608, 32, 928, 96, 672, 992, 352, 288, 224, 800, 544, 288, 992, 672],
        [224, 864, 96, 544, 416, 608, 160, 480, 864, 800, 736, 288, 32, 800, 480, 160],
        [160, 160, 544, 864, 864, 672, 992, 160, 544, 480, 672, 480, 352, 352, 544, 992],
        [672, 672, 32, 352, 352, 160, 480, 672, 32, 992, 160, 992, 864, 864, 32, 480],
        [928, 416, 800, 608, 96, 416, 736, 928, 288, 736, 416, 736, 96, 96, 288, 736],
        [416, 928, 288, 96, 608, 928, 224, 416, 800, 224, 928, 224, 608, 608, 800, 224],
        [288, 288, 160, 224, 736, 544, 608, 800, 416, 864, 288, 96, 224, 992, 928, 96],
        [800, 800, 672, 736, 224, 32, 96, 288, 928, 352, 800, 608, 736, 480, 416, 608],
        [544, 32, 416, 480, 480, 288, 864, 32, 672, 96, 544, 864, 480, 736, 160, 352],
        [32, 544, 928, 992, 992, 800, 352, 544, 160, 608, 32, 352, 992, 224, 672, 864],
        [48, 272, 720, 560, 144, 944, 816, 688, 1008, 48, 400, 976, 464, 1008, 1008, 112],
    ];

    #[test]
    fn first_points_one_dimensional() {
        let s = sobol_sequence(4, 1).unwrap();
        assert_eq!(s.as_slice(), &[0.5, 0.75, 0.25, 0.375]);
    }

    #[test]
    fn matches_reference_table() {
        let s = sobol_sequence(32, 16).unwrap();
        for (i, row) in REFERENCE.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                assert_eq!(s[(i, j)], *v as f64 / 1024.0, "point {i} dim {j}");
            }
        }
    }

    #[test]
    fn prefix_is_stable_across_dimensions() {
        let a = sobol_sequence(100, 3).unwrap();
        let b = sobol_sequence(100, 16).unwrap();
        assert_eq!(a, b.columns(0, 3).into_owned());
    }

    #[test]
    fn coordinates_in_unit_interval() {
        let s = sobol_sequence(4096, 16).unwrap();
        assert!(s.iter().all(|v| (0.0..1.0).contains(v)));
    }

    #[test]
    fn dimension_cap() {
        assert!(sobol_sequence(4, 17).is_err());
        assert!(sobol_sequence(4, 0).is_err());
    }

    fn star_discrepancy(points: &[f64]) -> f64 {
        let mut x = points.to_vec();
        x.sort_by(f64::total_cmp);
        let n = x.len() as f64;
        x.iter()
            .enumerate()
            .map(|(i, v)| ((i as f64 + 1.0) / n - v).max(v - i as f64 / n))
            .fold(0.0, f64::max)
    }

    #[test]
    fn lower_discrepancy_than_uniform() {
        let s = sobol_sequence(64, 1).unwrap();
        let sobol = star_discrepancy(s.as_slice());
        let mut uniform: Vec<f64> = (0..20)
            .map(|seed| {
                let mut r = rng::stream(seed, 0);
                let u: Vec<f64> = (0..64).map(|_| r.random()).collect();
                star_discrepancy(&u)
            })
            .collect();
        uniform.sort_by(f64::total_cmp);
        let median = 0.5 * (uniform[9] + uniform[10]);
        assert!(sobol < median, "{sobol} vs {median}");
    }
}
