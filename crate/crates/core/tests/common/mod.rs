//! Dense reference solve for Poisson blending, assembled from the blending
//! equations directly without the library's system builder.

use latentforge::ImageGrid;
use nalgebra::{DMatrix, DVector};

const NEIGHBOURS: [(isize, isize); 4] = [(-1, 0), (1, 0), (0, -1), (0, 1)];

/// For every region pixel p and every in-image neighbour q:
/// `sum (u_p - u_q) = sum v_pq`, with `u_q = bg_q` outside the region and
/// guidance `v_pq` taken from the source inside, the background across the
/// boundary.
pub fn dense_solve(src: &ImageGrid, bg: &ImageGrid, top: usize, left: usize, ch: usize) -> Vec<f64> {
    let (h, w) = src.dims();
    let (bh, bw) = bg.dims();
    let n = h * w;
    let mut a = DMatrix::<f64>::zeros(n, n);
    let mut b = DVector::<f64>::zeros(n);
    for r in 0..h {
        for c in 0..w {
            let i = r * w + c;
            for (dr, dc) in NEIGHBOURS {
                let (gr, gc) = ((top + r) as isize + dr, (left + c) as isize + dc);
                if gr < 0 || gc < 0 || gr >= bh as isize || gc >= bw as isize {
                    continue;
                }
                let (lr, lc) = (r as isize + dr, c as isize + dc);
                a[(i, i)] += 1.0;
                if lr >= 0 && lc >= 0 && lr < h as isize && lc < w as isize {
                    let j = lr as usize * w + lc as usize;
                    a[(i, j)] -= 1.0;
                    b[i] += src.get(r, c, ch) - src.get(lr as usize, lc as usize, ch);
                } else {
                    let bq = bg.get(gr as usize, gc as usize, ch);
                    b[i] += (bg.get(top + r, left + c, ch) - bq) + bq;
                }
            }
        }
    }
    a.lu()
        .solve(&b)
        .expect("region system is nonsingular")
        .as_slice()
        .to_vec()
}
