//! Lane grouping.
//!
//! The detected lane class is extracted as a binary mask, connected regions
//! become supermarkings (one label per region), and supermarkings that lie on
//! the same lane marking are merged when their connection cost is small.
//!
//! The cost of a pair combines two measurements over the four endpoint pairs:
//! geometric endpoint-to-endpoint distances, and directional distances (each
//! endpoint's perpendicular distance to the other region's principal line).
//! The directional set is affinely renormalized to the mean and variance of
//! the geometric set so the two distributions are comparable, and the cost is
//! their plain average.

use crate::error::{Error, Result};
use crate::label::LabelMap;
use crate::par;

/// Packed bit mask over an (h, w) pixel grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    h: usize,
    w: usize,
    words: Vec<u64>,
}

impl BinaryMask {
    pub fn new(h: usize, w: usize) -> BinaryMask {
        BinaryMask { h, w, words: vec![0; (h * w).div_ceil(64)] }
    }

    pub fn height(&self) -> usize {
        self.h
    }

    pub fn width(&self) -> usize {
        self.w
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> bool {
        let bit = y * self.w + x;
        self.words[bit / 64] >> (bit % 64) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, value: bool) {
        let bit = y * self.w + x;
        if value {
            self.words[bit / 64] |= 1 << (bit % 64);
        } else {
            self.words[bit / 64] &= !(1 << (bit % 64));
        }
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }
}

/// Pixel adjacency used by connected component labeling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Connectivity {
    Four,
    Eight,
}

/// One connected lane-mark region and its geometric features.
#[derive(Debug, Clone, PartialEq)]
pub struct Supermarking {
    pub label: u32,
    pub pixel_count: usize,
    /// (row, col) mean of the region's pixels.
    pub centroid: (f64, f64),
    /// Extreme pixels along the principal axis; `top` has the smaller
    /// projection onto `direction`.
    pub top: (f64, f64),
    pub bottom: (f64, f64),
    /// Unit principal direction, oriented toward increasing row.
    pub direction: (f64, f64),
    /// (min_row, min_col, max_row, max_col).
    pub bbox: (usize, usize, usize, usize),
}

/// The distance sets behind one pair's connection cost.
#[derive(Debug, Clone, PartialEq)]
pub struct PairDistances {
    /// Euclidean distances between the four endpoint pairs.
    pub geometric: [f64; 4],
    /// Perpendicular distance from each endpoint to the other region's
    /// principal line.
    pub directional: [f64; 4],
    /// `directional` renormalized to the mean/variance of `geometric`.
    pub directional_norm: [f64; 4],
}

/// Bit set exactly where `labels` equals `lane_class`.
pub fn extract_lane_mask(labels: &LabelMap, lane_class: u8) -> BinaryMask {
    let mut mask = BinaryMask::new(labels.height(), labels.width());
    for y in 0..labels.height() {
        for x in 0..labels.width() {
            if labels.at(y, x) == lane_class {
                mask.set(y, x, true);
            }
        }
    }
    mask
}

struct Dsu {
    parent: Vec<u32>,
}

impl Dsu {
    fn new(n: usize) -> Dsu {
        Dsu { parent: (0..n as u32).collect() }
    }

    fn find(&mut self, mut i: u32) -> u32 {
        while self.parent[i as usize] != i {
            let grand = self.parent[self.parent[i as usize] as usize];
            self.parent[i as usize] = grand;
            i = grand;
        }
        i
    }

    fn union(&mut self, a: u32, b: u32) {
        let (ra, rb) = (self.find(a), self.find(b));
        // anchor to the smaller root so labeling stays scan-ordered
        if ra < rb {
            self.parent[rb as usize] = ra;
        } else {
            self.parent[ra as usize] = rb;
        }
    }
}

/// Labels maximal connected regions of `mask` and computes each region's
/// supermarking features.
///
/// Labels are dense, 1-based, in order of each region's first pixel in
/// row-major scan; regions smaller than `min_pixels` are discarded as noise
/// (their pixels get label 0).
pub fn connected_components(
    mask: &BinaryMask,
    connectivity: Connectivity,
    min_pixels: usize,
) -> (Vec<u32>, Vec<Supermarking>) {
    let (h, w) = (mask.height(), mask.width());
    let mut provisional = vec![0u32; h * w]; // 0 = background, labels offset by 1
    let mut dsu = Dsu::new(0);
    let mut next = 0u32;
    for y in 0..h {
        for x in 0..w {
            if !mask.get(y, x) {
                continue;
            }
            let mut neighbor_min = u32::MAX;
            let mut neighbors = [0u32; 4];
            let mut n_count = 0;
            let consider = |ny: isize, nx: isize, provisional: &[u32]| {
                if ny < 0 || nx < 0 || nx >= w as isize {
                    return None;
                }
                let q = ny as usize * w + nx as usize;
                (provisional[q] != 0).then(|| provisional[q])
            };
            let (yi, xi) = (y as isize, x as isize);
            let candidates: [(isize, isize); 4] = match connectivity {
                Connectivity::Four => [(yi, xi - 1), (yi - 1, xi), (yi, xi), (yi, xi)],
                Connectivity::Eight => {
                    [(yi, xi - 1), (yi - 1, xi - 1), (yi - 1, xi), (yi - 1, xi + 1)]
                }
            };
            let limit = if connectivity == Connectivity::Four { 2 } else { 4 };
            for &(ny, nx) in candidates.iter().take(limit) {
                if let Some(l) = consider(ny, nx, &provisional) {
                    neighbors[n_count] = l;
                    n_count += 1;
                    neighbor_min = neighbor_min.min(l);
                }
            }
            if n_count == 0 {
                next += 1;
                dsu.parent.push(next - 1);
                provisional[y * w + x] = next;
            } else {
                provisional[y * w + x] = neighbor_min;
                for &l in neighbors.iter().take(n_count) {
                    dsu.union(neighbor_min - 1, l - 1);
                }
            }
        }
    }

    // Resolve roots, gather pixels per component in scan order.
    let mut root_to_slot: Vec<Option<usize>> = vec![None; next as usize];
    let mut pixels_per: Vec<Vec<(usize, usize)>> = Vec::new();
    let mut resolved = vec![0u32; h * w];
    for y in 0..h {
        for x in 0..w {
            let p = provisional[y * w + x];
            if p == 0 {
                continue;
            }
            let root = dsu.find(p - 1) as usize;
            let slot = *root_to_slot[root].get_or_insert_with(|| {
                pixels_per.push(Vec::new());
                pixels_per.len() - 1
            });
            pixels_per[slot].push((y, x));
            resolved[y * w + x] = slot as u32 + 1;
        }
    }

    // Drop speckle and relabel densely.
    let mut labels = vec![0u32; h * w];
    let mut marks = Vec::new();
    let mut remap: Vec<u32> = vec![0; pixels_per.len() + 1];
    let mut kept = 0u32;
    for (slot, pixels) in pixels_per.iter().enumerate() {
        if pixels.len() >= min_pixels.max(1) {
            kept += 1;
            remap[slot + 1] = kept;
            marks.push(supermarking_features(kept, pixels));
        }
    }
    for (dst, src) in labels.iter_mut().zip(&resolved) {
        *dst = remap[*src as usize];
    }
    (labels, marks)
}

/// Computes the geometric features of one connected region.
///
/// The principal direction is the dominant eigenvector of the 2x2 pixel
/// covariance, oriented toward increasing row; a single pixel (or any
/// degenerate covariance) points straight down. Endpoints are the pixels with
/// extreme projection onto that direction, ties resolved by scan order.
pub fn supermarking_features(label: u32, pixels: &[(usize, usize)]) -> Supermarking {
    assert!(!pixels.is_empty(), "a supermarking has at least one pixel");
    let n = pixels.len() as f64;
    let (mut sr, mut sc) = (0.0f64, 0.0f64);
    let mut bbox = (usize::MAX, usize::MAX, 0usize, 0usize);
    for &(r, c) in pixels {
        sr += r as f64;
        sc += c as f64;
        bbox = (bbox.0.min(r), bbox.1.min(c), bbox.2.max(r), bbox.3.max(c));
    }
    let centroid = (sr / n, sc / n);

    let (mut srr, mut scc, mut src) = (0.0f64, 0.0f64, 0.0f64);
    for &(r, c) in pixels {
        let dr = r as f64 - centroid.0;
        let dc = c as f64 - centroid.1;
        srr += dr * dr;
        scc += dc * dc;
        src += dr * dc;
    }
    srr /= n;
    scc /= n;
    src /= n;

    let direction = if srr.max(scc).max(src.abs()) < 1e-12 {
        (1.0, 0.0)
    } else if src.abs() < 1e-12 {
        if srr >= scc {
            (1.0, 0.0)
        } else {
            (0.0, 1.0)
        }
    } else {
        let half_trace = 0.5 * (srr + scc);
        let lambda = half_trace + (0.25 * (srr - scc) * (srr - scc) + src * src).sqrt();
        let (vr, vc) = (src, lambda - srr);
        let norm = (vr * vr + vc * vc).sqrt();
        let (vr, vc) = (vr / norm, vc / norm);
        if vr < 0.0 || (vr == 0.0 && vc < 0.0) {
            (-vr, -vc)
        } else {
            (vr, vc)
        }
    };

    let mut top = pixels[0];
    let mut bottom = pixels[0];
    let proj = |&(r, c): &(usize, usize)| r as f64 * direction.0 + c as f64 * direction.1;
    let (mut lo, mut hi) = (proj(&pixels[0]), proj(&pixels[0]));
    for p in &pixels[1..] {
        let t = proj(p);
        if t < lo {
            lo = t;
            top = *p;
        }
        if t > hi {
            hi = t;
            bottom = *p;
        }
    }

    Supermarking {
        label,
        pixel_count: pixels.len(),
        centroid,
        top: (top.0 as f64, top.1 as f64),
        bottom: (bottom.0 as f64, bottom.1 as f64),
        direction,
        bbox,
    }
}

fn euclid(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0) * (a.0 - b.0) + (a.1 - b.1) * (a.1 - b.1)).sqrt()
}

/// Perpendicular distance from `p` to the infinite principal line of `s`.
fn line_distance(p: (f64, f64), s: &Supermarking) -> f64 {
    let dr = p.0 - s.centroid.0;
    let dc = p.1 - s.centroid.1;
    (dr * s.direction.1 - dc * s.direction.0).abs()
}

/// The four geometric and four directional distances between two
/// supermarkings, plus the renormalized directional set.
pub fn pair_distances(a: &Supermarking, b: &Supermarking) -> PairDistances {
    let geometric = [
        euclid(a.top, b.top),
        euclid(a.top, b.bottom),
        euclid(a.bottom, b.top),
        euclid(a.bottom, b.bottom),
    ];
    let directional = [
        line_distance(a.top, b),
        line_distance(a.bottom, b),
        line_distance(b.top, a),
        line_distance(b.bottom, a),
    ];
    let directional_norm = normalize_directional(directional, geometric);
    PairDistances { geometric, directional, directional_norm }
}

fn mean_var(values: &[f64; 4]) -> (f64, f64) {
    let mean = values.iter().sum::<f64>() / 4.0;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 4.0;
    (mean, var)
}

/// Affinely maps the directional distances onto the distribution of the
/// geometric ones: standardize by the directional mean/variance, then rescale
/// to the geometric variance and re-center on the geometric mean. When the
/// directional spread vanishes the standardization limit is the geometric
/// mean itself.
pub fn normalize_directional(dist_r: [f64; 4], dist_g: [f64; 4]) -> [f64; 4] {
    let (mean_dir, var_dir) = mean_var(&dist_r);
    let (mean_geo, var_geo) = mean_var(&dist_g);
    if var_dir < 1e-12 {
        return [mean_geo; 4];
    }
    let scale = (var_geo / var_dir).sqrt();
    dist_r.map(|r| (r - mean_dir) * scale + mean_geo)
}

/// The connection cost: the average of `(geometric + renormalized
/// directional) / 2` over the four endpoint pairs.
pub fn connection_cost(d: &PairDistances) -> f64 {
    d.geometric.iter().zip(&d.directional_norm).map(|(g, r)| (g + r) / 2.0).sum::<f64>() / 4.0
}

/// Merges supermarkings whose pairwise connection cost is below `threshold`.
///
/// Returns one group id per input mark, dense and 1-based, numbered by each
/// group's smallest member label. Union-find closure makes the result
/// transitive and independent of pair order; costs are evaluated in parallel
/// but applied in a fixed order.
pub fn group_supermarkings(marks: &[Supermarking], threshold: f64) -> Vec<u32> {
    let n = marks.len();
    if n == 0 {
        return Vec::new();
    }
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let costs = par::map_indexed(pairs.len(), |k| {
        let (i, j) = pairs[k];
        connection_cost(&pair_distances(&marks[i], &marks[j]))
    });
    let mut dsu = Dsu::new(n);
    for (&(i, j), cost) in pairs.iter().zip(&costs) {
        if *cost < threshold {
            dsu.union(i as u32, j as u32);
        }
    }
    let mut remap = vec![0u32; n];
    let mut next = 0u32;
    let mut groups = vec![0u32; n];
    for (i, group) in groups.iter_mut().enumerate() {
        let root = dsu.find(i as u32) as usize;
        if remap[root] == 0 {
            next += 1;
            remap[root] = next;
        }
        *group = remap[root];
    }
    groups
}

/// Rewrites a component label image into group labels (`groups` as returned
/// by [`group_supermarkings`] for the same marks).
pub fn regroup_labels(component_labels: &[u32], groups: &[u32]) -> Vec<u32> {
    component_labels.iter().map(|&l| if l == 0 { 0 } else { groups[(l - 1) as usize] }).collect()
}

/// Rejects thresholds the grouping contract does not allow.
pub fn validate_threshold(threshold: f64) -> Result<()> {
    if threshold.is_nan() || threshold <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "merge threshold must be positive, got {threshold}"
        )));
    }
    Ok(())
}
