//! Durations of contiguous IFC stretches, binned on power-of-two bounds.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub start_window: usize,
    pub length: usize,
}

/// Inclusive bounds `[2^k, 2^(k+1) − 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bin {
    pub lower: usize,
    pub upper: usize,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RunLengthHistogram {
    pub segments: Vec<Segment>,
    /// From `[1,1]` up to the bin holding the longest segment, empty bins included.
    pub bins: Vec<Bin>,
}

impl RunLengthHistogram {
    pub fn flagged_windows(&self) -> usize {
        self.segments.iter().map(|s| s.length).sum()
    }
}

/// Bin index of a segment length (`floor(log2(len))`).
pub fn bin_index(length: usize) -> usize {
    assert!(length > 0, "segments have positive length");
    (usize::BITS - 1 - length.leading_zeros()) as usize
}

/// Maximal runs of `true` in window order, ignoring recording boundaries.
pub fn run_lengths(flags: &[bool]) -> RunLengthHistogram {
    let zeros = vec![0usize; flags.len()];
    run_lengths_bounded(flags, &zeros)
}

/// Maximal runs of `true`; a run also ends where `recording` changes.
pub fn run_lengths_bounded(flags: &[bool], recording: &[usize]) -> RunLengthHistogram {
    assert_eq!(flags.len(), recording.len(), "one recording id per flag");
    let mut segments = Vec::new();
    let mut open: Option<Segment> = None;
    for (i, &flag) in flags.iter().enumerate() {
        let boundary = i > 0 && recording[i] != recording[i - 1];
        if boundary || !flag {
            if let Some(seg) = open.take() {
                segments.push(seg);
            }
        }
        if flag {
            match open.as_mut() {
                Some(seg) => seg.length += 1,
                None => {
                    open = Some(Segment {
                        start_window: i,
                        length: 1,
                    })
                }
            }
        }
    }
    segments.extend(open);
    RunLengthHistogram {
        bins: histogram(&segments),
        segments,
    }
}

fn histogram(segments: &[Segment]) -> Vec<Bin> {
    let Some(longest) = segments.iter().map(|s| s.length).max() else {
        return Vec::new();
    };
    let mut bins: Vec<Bin> = (0..=bin_index(longest))
        .map(|k| Bin {
            lower: 1 << k,
            upper: (1 << (k + 1)) - 1,
            count: 0,
        })
        .collect();
    for s in segments {
        bins[bin_index(s.length)].count += 1;
    }
    bins
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn direct_rle() {
        let h = run_lengths(&[true, true, false, true]);
        assert_eq!(
            h.segments,
            vec![
                Segment { start_window: 0, length: 2 },
                Segment { start_window: 3, length: 1 }
            ]
        );
        assert_eq!(
            h.bins,
            vec![Bin { lower: 1, upper: 1, count: 1 }, Bin { lower: 2, upper: 3, count: 1 }]
        );
    }

    #[test]
    fn all_false_has_no_segments() {
        let h = run_lengths(&[false; 9]);
        assert!(h.segments.is_empty() && h.bins.is_empty());
        assert!(run_lengths(&[]).segments.is_empty());
    }

    #[test]
    fn runs_stop_at_recording_boundaries() {
        let h = run_lengths_bounded(&[true, true, true, true], &[0, 0, 1, 1]);
        assert_eq!(h.segments.len(), 2);
        assert_eq!(h.segments[1], Segment { start_window: 2, length: 2 });
        assert_eq!(h.flagged_windows(), 4);
    }

    #[test]
    fn bins_include_empty_middle() {
        let mut flags = vec![true; 9];
        flags.push(false);
        flags.push(true);
        let h = run_lengths(&flags);
        let counts: Vec<_> = h.bins.iter().map(|b| (b.lower, b.upper, b.count)).collect();
        assert_eq!(counts, vec![(1, 1, 1), (2, 3, 0), (4, 7, 0), (8, 15, 1)]);
    }

    #[test]
    fn bin_index_bounds() {
        assert_eq!(bin_index(1), 0);
        assert_eq!(bin_index(3), 1);
        assert_eq!(bin_index(4), 2);
        assert_eq!(bin_index(15), 3);
        assert_eq!(bin_index(16), 4);
    }
}
