//! Stack-based flood fill, the reference partition for connected component
//! labeling tests.

/// Labels connected regions of `mask` (row-major, `h * w` entries).
///
/// Labels are dense, starting at 1, assigned in order of each region's first
/// pixel in row-major scan order. Background stays 0.
pub fn components(mask: &[bool], h: usize, w: usize, eight_connected: bool) -> Vec<u32> {
    assert_eq!(mask.len(), h * w);
    let mut labels = vec![0u32; h * w];
    let mut next = 1u32;
    let mut stack = Vec::new();
    for start in 0..h * w {
        if !mask[start] || labels[start] != 0 {
            continue;
        }
        labels[start] = next;
        stack.push(start);
        while let Some(p) = stack.pop() {
            let (y, x) = (p / w, p % w);
            let mut visit = |ny: isize, nx: isize| {
                if ny < 0 || nx < 0 || ny >= h as isize || nx >= w as isize {
                    return;
                }
                let q = ny as usize * w + nx as usize;
                if mask[q] && labels[q] == 0 {
                    labels[q] = next;
                    stack.push(q);
                }
            };
            let (y, x) = (y as isize, x as isize);
            visit(y - 1, x);
            visit(y + 1, x);
            visit(y, x - 1);
            visit(y, x + 1);
            if eight_connected {
                visit(y - 1, x - 1);
                visit(y - 1, x + 1);
                visit(y + 1, x - 1);
                visit(y + 1, x + 1);
            }
        }
        next += 1;
    }
    labels
}
