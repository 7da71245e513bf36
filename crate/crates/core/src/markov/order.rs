//! Nested dissection of regular lattices by recursive coordinate bisection.

use crate::grid::GridSpec;

/// Rectangles at or below this many sites are ordered directly.
const LEAF: usize = 16;
/// Separators are two lines wide: the squared five-point operator couples
/// sites two cells apart.
const SEPARATOR: usize = 2;

/// Elimination ordering `perm[new] = old` for `p` components on `grid`,
/// with component-major unknowns `c * n + site`. Sites are ordered by
/// recursive bisection (both halves, then the separator); the `p` unknowns
/// of a site stay adjacent.
pub fn nested_dissection_order(grid: &GridSpec, p: usize) -> Vec<usize> {
    let [m0, m1] = grid.sizes();
    let mut sites = Vec::with_capacity(m0 * m1);
    dissect(grid, [0, m0], [0, m1], &mut sites);
    let n = grid.num_sites();
    sites.iter().flat_map(|&s| (0..p).map(move |c| c * n + s)).collect()
}

fn dissect(grid: &GridSpec, r: [usize; 2], c: [usize; 2], out: &mut Vec<usize>) {
    let (h, w) = (r[1] - r[0], c[1] - c[0]);
    let longest = h.max(w);
    if h * w <= LEAF || longest < 2 * SEPARATOR + 1 {
        for i in r[0]..r[1] {
            for j in c[0]..c[1] {
                out.push(grid.site_index(i, j));
            }
        }
        return;
    }
    if h >= w {
        let mid = r[0] + (h - SEPARATOR) / 2;
        dissect(grid, [r[0], mid], c, out);
        dissect(grid, [mid + SEPARATOR, r[1]], c, out);
        dissect_separator(grid, [mid, mid + SEPARATOR], c, out);
    } else {
        let mid = c[0] + (w - SEPARATOR) / 2;
        dissect(grid, r, [c[0], mid], out);
        dissect(grid, r, [mid + SEPARATOR, c[1]], out);
        dissect_separator(grid, r, [mid, mid + SEPARATOR], out);
    }
}

fn dissect_separator(grid: &GridSpec, r: [usize; 2], c: [usize; 2], out: &mut Vec<usize>) {
    for i in r[0]..r[1] {
        for j in c[0]..c[1] {
            out.push(grid.site_index(i, j));
        }
    }
}
