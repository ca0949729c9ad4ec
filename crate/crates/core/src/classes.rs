//! The seven land-use / land-cover classes of the synthetic dataset.
//!
//! Label indices are the alphabetical ordinal of the class name.

use std::collections::BTreeMap;

pub const LULC_CLASSES: [&str; 7] = [
    "Bare Land",
    "Crop Land",
    "Cultivated Vegetation",
    "Natural Vegetation",
    "Snow Ice",
    "Water Body",
    "Woody Vegetation",
];

/// Per-class image counts of the reference synthetic dataset (388 total).
pub const REFERENCE_COUNTS: [(&str, usize); 7] = [
    ("Bare Land", 52),
    ("Crop Land", 57),
    ("Cultivated Vegetation", 54),
    ("Natural Vegetation", 54),
    ("Snow Ice", 58),
    ("Water Body", 52),
    ("Woody Vegetation", 61),
];

pub fn label_index(class_name: &str) -> Option<usize> {
    LULC_CLASSES.iter().position(|c| *c == class_name)
}

pub fn reference_counts() -> BTreeMap<String, usize> {
    REFERENCE_COUNTS
        .iter()
        .map(|(c, n)| (c.to_string(), *n))
        .collect()
}

/// Lowercase, `_`-separated form used in file names.
pub fn slug(class_name: &str) -> String {
    class_name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn class_list_is_alphabetical_and_counts_total_388() {
        let mut sorted = LULC_CLASSES;
        sorted.sort();
        assert_eq!(sorted, LULC_CLASSES);
        assert_eq!(REFERENCE_COUNTS.iter().map(|(_, n)| n).sum::<usize>(), 388);
        for (i, (name, _)) in REFERENCE_COUNTS.iter().enumerate() {
            assert_eq!(label_index(name), Some(i));
        }
    }
}
