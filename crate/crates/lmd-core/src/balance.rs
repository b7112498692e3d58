//! Median frequency class balancing.
//!
//! `p_c` is the number of pixels of class `c` divided by the total number of
//! (non-ignored) pixels over the images where `c` appears at all, and the
//! weight of a present class is `median(p) / p_c`. Classes that appear in no
//! image have no defined frequency and get weight 0.

use crate::error::{Error, Result};
use crate::label::LabelMap;

/// Per-class pixel frequencies. Raw counts are kept alongside the derived
/// frequency so weight ratios can be computed from exact integers.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassFrequencies {
    /// `p_c` for present classes, `None` where the class appears in no image.
    pub frequencies: Vec<Option<f64>>,
    /// How many images contain each class.
    pub present_images: Vec<u32>,
    /// Pixels of each class, over all images.
    pub class_pixels: Vec<u64>,
    /// Non-ignored pixels, summed over the images where the class appears.
    pub covered_pixels: Vec<u64>,
}

impl ClassFrequencies {
    pub fn num_classes(&self) -> usize {
        self.frequencies.len()
    }

    /// Assembles frequencies from raw counts (mainly useful for tests and
    /// for merging counts gathered in parallel).
    pub fn from_counts(
        class_pixels: Vec<u64>,
        covered_pixels: Vec<u64>,
        present_images: Vec<u32>,
    ) -> ClassFrequencies {
        let frequencies = class_pixels
            .iter()
            .zip(&covered_pixels)
            .map(|(&n, &d)| (d > 0).then(|| n as f64 / d as f64))
            .collect();
        ClassFrequencies { frequencies, present_images, class_pixels, covered_pixels }
    }
}

/// Non-negative loss weights, one per class; absent classes get 0.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassWeights {
    pub weights: Vec<f64>,
}

/// Tallies per-class pixel frequencies over a set of label maps.
///
/// Pixels labeled `ignore_id` count neither as class pixels nor toward the
/// per-image totals. Any other label >= `num_classes` is rejected.
pub fn class_frequencies(
    maps: &[LabelMap],
    num_classes: usize,
    ignore_id: Option<u8>,
) -> Result<ClassFrequencies> {
    if num_classes == 0 {
        return Err(Error::InvalidArgument("num_classes must be >= 1".into()));
    }
    let mut class_pixels = vec![0u64; num_classes];
    let mut covered_pixels = vec![0u64; num_classes];
    let mut present_images = vec![0u32; num_classes];
    let mut per_image = vec![0u64; num_classes];
    for map in maps {
        per_image.iter_mut().for_each(|v| *v = 0);
        let mut valid = 0u64;
        for y in 0..map.height() {
            for x in 0..map.width() {
                let label = map.at(y, x);
                if Some(label) == ignore_id {
                    continue;
                }
                if label as usize >= num_classes {
                    return Err(Error::LabelOutOfRange { label, num_classes, y, x });
                }
                per_image[label as usize] += 1;
                valid += 1;
            }
        }
        for c in 0..num_classes {
            if per_image[c] > 0 {
                class_pixels[c] += per_image[c];
                covered_pixels[c] += valid;
                present_images[c] += 1;
            }
        }
    }
    Ok(ClassFrequencies::from_counts(class_pixels, covered_pixels, present_images))
}

/// `w_c = median(p) / p_c` over present classes; absent classes weigh 0.
///
/// The median of an even number of present classes is the mean of the two
/// middle frequencies. Ratios are formed from the exact pixel counts, so a
/// frequency vector like (0.5, 0.3, 0.2) yields exactly (0.6, 1.0, 1.5).
pub fn median_frequency_weights(f: &ClassFrequencies) -> Result<ClassWeights> {
    let mut present: Vec<usize> =
        (0..f.num_classes()).filter(|&c| f.frequencies[c].is_some()).collect();
    if present.is_empty() {
        return Err(Error::InvalidArgument("no class is present in any image".into()));
    }
    present.sort_by(|&a, &b| {
        f.frequencies[a]
            .partial_cmp(&f.frequencies[b])
            .expect("frequencies are finite")
            .then(a.cmp(&b))
    });

    let mut weights = vec![0.0f64; f.num_classes()];
    let k = present.len();
    if k % 2 == 1 {
        let m = present[k / 2];
        let (mn, md) = (f.class_pixels[m] as f64, f.covered_pixels[m] as f64);
        for &c in &present {
            weights[c] = (mn * f.covered_pixels[c] as f64) / (md * f.class_pixels[c] as f64);
        }
    } else {
        let lo = f.frequencies[present[k / 2 - 1]].unwrap();
        let hi = f.frequencies[present[k / 2]].unwrap();
        let median = 0.5 * (lo + hi);
        for &c in &present {
            weights[c] = median / f.frequencies[c].unwrap();
        }
    }
    Ok(ClassWeights { weights })
}

/// Returns `w` with the weight of `class_id` multiplied by `factor`.
pub fn scale_class_weight(w: &ClassWeights, class_id: usize, factor: f64) -> Result<ClassWeights> {
    if class_id >= w.weights.len() {
        return Err(Error::InvalidArgument(format!(
            "class {class_id} out of range (have {})",
            w.weights.len()
        )));
    }
    if factor.is_nan() || factor <= 0.0 {
        return Err(Error::InvalidArgument(format!("scale factor must be positive, got {factor}")));
    }
    let mut scaled = w.clone();
    scaled.weights[class_id] *= factor;
    Ok(scaled)
}
