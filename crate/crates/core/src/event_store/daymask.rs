use serde::{Deserialize, Serialize};

/// Fixed-length set of day indices, stored as packed bits.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DayMask {
    words: Vec<u64>,
    len: usize,
}

impl DayMask {
    pub fn new(len: usize) -> Self {
        DayMask {
            words: vec![0; len.div_ceil(64)],
            len,
        }
    }

    pub fn full(len: usize) -> Self {
        let mut m = DayMask::new(len);
        for t in 0..len {
            m.set(t, true);
        }
        m
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, t: usize) -> bool {
        t < self.len && (self.words[t >> 6] >> (t & 63)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, t: usize, value: bool) {
        assert!(t < self.len, "day {t} out of range {}", self.len);
        if value {
            self.words[t >> 6] |= 1 << (t & 63);
        } else {
            self.words[t >> 6] &= !(1 << (t & 63));
        }
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn union(&self, other: &DayMask) -> DayMask {
        assert_eq!(self.len, other.len);
        DayMask {
            words: self
                .words
                .iter()
                .zip(&other.words)
                .map(|(a, b)| a | b)
                .collect(),
            len: self.len,
        }
    }

    pub fn iter_ones(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len).filter(move |&t| self.get(t))
    }

    /// Maximal runs of set days as `(start, length)`.
    pub fn runs(&self) -> Vec<Run> {
        let mut out = Vec::new();
        let mut t = 0;
        while t < self.len {
            if self.get(t) {
                let start = t;
                while t < self.len && self.get(t) {
                    t += 1;
                }
                out.push(Run(start, t - start));
            } else {
                t += 1;
            }
        }
        out
    }

    pub fn from_runs(len: usize, runs: &[Run]) -> Option<DayMask> {
        let mut m = DayMask::new(len);
        for &Run(start, n) in runs {
            if start.checked_add(n)? > len {
                return None;
            }
            for t in start..start + n {
                m.set(t, true);
            }
        }
        Some(m)
    }
}

/// Run-length segment `(start, length)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Run(pub usize, pub usize);
