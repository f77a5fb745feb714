//! One-to-one matching of detections to ground-truth intervals.

/// Result of [`match_events`]; all entries are indices into the inputs.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Matching {
    /// `(detection, label)` pairs, sorted by detection.
    pub pairs: Vec<(usize, usize)>,
    pub false_positives: Vec<usize>,
    pub missed: Vec<usize>,
}

impl Matching {
    /// Label matched to `detection`, if any.
    pub fn label_of(&self, detection: usize) -> Option<usize> {
        self.pairs.iter().find(|p| p.0 == detection).map(|p| p.1)
    }
}

/// Inclusive-interval overlap length; 0 when disjoint.
pub fn overlap(a: (usize, usize), b: (usize, usize)) -> usize {
    let lo = a.0.max(b.0);
    let hi = a.1.min(b.1);
    if lo <= hi {
        hi - lo + 1
    } else {
        0
    }
}

/// Greedy matching over inclusive `(start, end)` intervals: overlapping
/// pairs are taken largest overlap first (ties: earlier detection, then
/// earlier label) while both sides are free.
pub fn match_events(detected: &[(usize, usize)], truth: &[(usize, usize)]) -> Matching {
    let mut candidates: Vec<(usize, usize, usize)> = Vec::new();
    for (d, &di) in detected.iter().enumerate() {
        for (l, &li) in truth.iter().enumerate() {
            let o = overlap(di, li);
            if o > 0 {
                candidates.push((o, d, l));
            }
        }
    }
    candidates.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut det_used = vec![false; detected.len()];
    let mut lab_used = vec![false; truth.len()];
    let mut pairs = Vec::new();
    for (_, d, l) in candidates {
        if !det_used[d] && !lab_used[l] {
            det_used[d] = true;
            lab_used[l] = true;
            pairs.push((d, l));
        }
    }
    pairs.sort_unstable();
    Matching {
        pairs,
        false_positives: (0..detected.len()).filter(|&d| !det_used[d]).collect(),
        missed: (0..truth.len()).filter(|&l| !lab_used[l]).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_lists() {
        let iv = [(0, 10), (20, 30), (40, 50)];
        let m = match_events(&iv, &iv);
        assert_eq!(m.pairs, vec![(0, 0), (1, 1), (2, 2)]);
        assert!(m.false_positives.is_empty() && m.missed.is_empty());
    }

    #[test]
    fn larger_overlap_wins() {
        // Overlaps 3 with the first label and 8 with the second.
        let m = match_events(&[(7, 17)], &[(0, 9), (10, 30)]);
        assert_eq!(m.pairs, vec![(0, 1)]);
        assert_eq!(m.missed, vec![0]);
    }

    #[test]
    fn empty_detections() {
        let m = match_events(&[], &[(0, 1), (5, 6)]);
        assert_eq!(m.missed, vec![0, 1]);
        assert!(m.pairs.is_empty());
    }

    #[test]
    fn disjoint_detection_is_false_positive() {
        let m = match_events(&[(0, 5), (100, 120)], &[(3, 8)]);
        assert_eq!(m.pairs, vec![(0, 0)]);
        assert_eq!(m.false_positives, vec![1]);
        assert_eq!(m.label_of(0), Some(0));
        assert_eq!(m.label_of(1), None);
    }

    #[test]
    fn touching_endpoints_overlap() {
        assert_eq!(overlap((0, 5), (5, 9)), 1);
        assert_eq!(overlap((0, 4), (5, 9)), 0);
    }
}
