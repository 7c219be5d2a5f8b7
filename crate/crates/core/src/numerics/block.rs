//! Block tridiagonal direct solvers with dense blocks.
//!
//! Block row `i` reads `lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = b[i]`.
//! Vectors are stored block-major: entry `r` of block `i` lives at `i * bs + r`.

use nalgebra::{DMatrix, DVector, LU};

#[derive(Debug, Clone)]
pub struct BlockTridiagonal {
    pub lower: Vec<DMatrix<f64>>,
    pub diag: Vec<DMatrix<f64>>,
    pub upper: Vec<DMatrix<f64>>,
}

impl BlockTridiagonal {
    pub fn zeros(blocks: usize, bs: usize) -> Self {
        let z = DMatrix::zeros(bs, bs);
        Self {
            lower: vec![z.clone(); blocks],
            diag: vec![z.clone(); blocks],
            upper: vec![z; blocks],
        }
    }

    pub fn blocks(&self) -> usize {
        self.diag.len()
    }

    pub fn block_size(&self) -> usize {
        self.diag.first().map_or(0, |d| d.nrows())
    }

    /// Block Thomas factorization. Returns `None` if a pivot block is singular.
    pub fn factor(&self) -> Option<BlockTridiagonalLu> {
        let n = self.blocks();
        let mut pivots = Vec::with_capacity(n);
        let mut gain: Vec<DMatrix<f64>> = Vec::with_capacity(n);
        for i in 0..n {
            let mut s = self.diag[i].clone();
            if i > 0 {
                s -= &self.lower[i] * &gain[i - 1];
            }
            let lu = LU::new(s);
            if !lu.is_invertible() {
                return None;
            }
            let g = if i + 1 < n {
                lu.solve(&self.upper[i])?
            } else {
                DMatrix::zeros(self.block_size(), self.block_size())
            };
            gain.push(g);
            pivots.push(lu);
        }
        Some(BlockTridiagonalLu {
            lower: self.lower.clone(),
            pivots,
            gain,
        })
    }
}

#[derive(Debug, Clone)]
pub struct BlockTridiagonalLu {
    lower: Vec<DMatrix<f64>>,
    pivots: Vec<LU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
    gain: Vec<DMatrix<f64>>,
}

impl BlockTridiagonalLu {
    pub fn block_size(&self) -> usize {
        self.gain.first().map_or(0, |g| g.nrows())
    }

    pub fn solve_in_place(&self, rhs: &mut [f64]) {
        let bs = self.block_size();
        let n = self.pivots.len();
        assert_eq!(rhs.len(), n * bs);
        let mut ys: Vec<DVector<f64>> = Vec::with_capacity(n);
        for i in 0..n {
            let mut b = DVector::from_column_slice(&rhs[i * bs..(i + 1) * bs]);
            if i > 0 {
                b -= &self.lower[i] * &ys[i - 1];
            }
            let y = self.pivots[i].solve(&b).expect("factor checked invertibility");
            ys.push(y);
        }
        for i in (0..n.saturating_sub(1)).rev() {
            let next = ys[i + 1].clone();
            ys[i] -= &self.gain[i] * next;
        }
        for (i, y) in ys.iter().enumerate() {
            rhs[i * bs..(i + 1) * bs].copy_from_slice(y.as_slice());
        }
    }
}

/// Periodic block tridiagonal system: `lower[0]` couples block 0 to the last
/// block and `upper[n-1]` couples the last block back to block 0.
#[derive(Debug, Clone)]
pub struct CyclicBlockTridiagonal(pub BlockTridiagonal);

#[derive(Debug, Clone)]
pub struct CyclicBlockLu {
    bs: usize,
    blocks: usize,
    interior: Option<BlockTridiagonalLu>,
    // couplings of block 0 to the interior blocks (first, last)
    row0_first: DMatrix<f64>,
    row0_last: DMatrix<f64>,
    // interior solution for unit columns of the block-0 coupling
    w: DMatrix<f64>,
    schur: LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl CyclicBlockTridiagonal {
    pub fn factor(&self) -> Option<CyclicBlockLu> {
        let m = &self.0;
        let n = m.blocks();
        let bs = m.block_size();
        if n == 1 {
            let s = &m.diag[0] + &m.lower[0] + &m.upper[0];
            let schur = LU::new(s);
            if !schur.is_invertible() {
                return None;
            }
            return Some(CyclicBlockLu {
                bs,
                blocks: 1,
                interior: None,
                row0_first: DMatrix::zeros(bs, bs),
                row0_last: DMatrix::zeros(bs, bs),
                w: DMatrix::zeros(0, bs),
                schur,
            });
        }
        let interior = BlockTridiagonal {
            lower: m.lower[1..].to_vec(),
            diag: m.diag[1..].to_vec(),
            upper: m.upper[1..].to_vec(),
        };
        let lu = interior.factor()?;
        let ni = n - 1;
        // E: interior rows coupled to x0
        let mut e = DMatrix::zeros(ni * bs, bs);
        e.view_mut((0, 0), (bs, bs)).copy_from(&m.lower[1]);
        let last = (ni - 1) * bs;
        let mut tail = e.view((last, 0), (bs, bs)).clone_owned();
        tail += &m.upper[n - 1];
        e.view_mut((last, 0), (bs, bs)).copy_from(&tail);
        let mut w = e;
        for c in 0..bs {
            let mut col: Vec<f64> = w.column(c).iter().copied().collect();
            lu.solve_in_place(&mut col);
            w.column_mut(c).copy_from_slice(&col);
        }
        let row0_first = m.upper[0].clone();
        let row0_last = m.lower[0].clone();
        let mut s = m.diag[0].clone();
        s -= &row0_first * w.view((0, 0), (bs, bs));
        s -= &row0_last * w.view((last, 0), (bs, bs));
        let schur = LU::new(s);
        if !schur.is_invertible() {
            return None;
        }
        Some(CyclicBlockLu {
            bs,
            blocks: n,
            interior: Some(lu),
            row0_first,
            row0_last,
            w,
            schur,
        })
    }
}

impl CyclicBlockLu {
    pub fn solve_in_place(&self, rhs: &mut [f64]) {
        let bs = self.bs;
        assert_eq!(rhs.len(), self.blocks * bs);
        let Some(interior) = &self.interior else {
            let b = DVector::from_column_slice(rhs);
            let x = self.schur.solve(&b).expect("checked");
            rhs.copy_from_slice(x.as_slice());
            return;
        };
        let (head, rest) = rhs.split_at_mut(bs);
        interior.solve_in_place(rest);
        let ni = self.blocks - 1;
        let y_first = DVector::from_column_slice(&rest[..bs]);
        let y_last = DVector::from_column_slice(&rest[(ni - 1) * bs..]);
        let b0 = DVector::from_column_slice(head) - &self.row0_first * y_first - &self.row0_last * y_last;
        let x0 = self.schur.solve(&b0).expect("checked");
        let corr = &self.w * &x0;
        rest.iter_mut().zip(corr.iter()).for_each(|(r, c)| *r -= c);
        head.copy_from_slice(x0.as_slice());
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_system(n: usize, bs: usize, seed: u64) -> BlockTridiagonal {
        let mut state = seed;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let mut m = BlockTridiagonal::zeros(n, bs);
        for i in 0..n {
            for r in 0..bs {
                for c in 0..bs {
                    m.lower[i][(r, c)] = next();
                    m.upper[i][(r, c)] = next();
                    m.diag[i][(r, c)] = next();
                }
                m.diag[i][(r, r)] += 4.0 * bs as f64;
            }
        }
        m
    }

    fn apply(m: &BlockTridiagonal, x: &[f64], cyclic: bool) -> Vec<f64> {
        let n = m.blocks();
        let bs = m.block_size();
        let blk = |i: usize| DVector::from_column_slice(&x[i * bs..(i + 1) * bs]);
        let mut out = Vec::new();
        for i in 0..n {
            let mut v = &m.diag[i] * blk(i);
            if i > 0 {
                v += &m.lower[i] * blk(i - 1);
            } else if cyclic {
                v += &m.lower[0] * blk(n - 1);
            }
            if i + 1 < n {
                v += &m.upper[i] * blk(i + 1);
            } else if cyclic {
                v += &m.upper[n - 1] * blk(0);
            }
            out.extend(v.iter());
        }
        out
    }

    #[test]
    fn block_thomas_round_trip() {
        let m = random_system(9, 3, 7);
        let x: Vec<f64> = (0..27).map(|i| (i as f64).sin()).collect();
        let mut b = apply(&m, &x, false);
        m.factor().unwrap().solve_in_place(&mut b);
        for (a, c) in x.iter().zip(&b) {
            assert!((a - c).abs() < 1e-12);
        }
    }

    #[test]
    fn cyclic_round_trip() {
        for n in [1usize, 2, 3, 11] {
            let m = random_system(n, 2, 3 + n as u64);
            let x: Vec<f64> = (0..2 * n).map(|i| (0.7 * i as f64).cos()).collect();
            let mut b = apply(&m, &x, true);
            CyclicBlockTridiagonal(m).factor().unwrap().solve_in_place(&mut b);
            for (a, c) in x.iter().zip(&b) {
                assert!((a - c).abs() < 1e-11, "n={n}");
            }
        }
    }
}
