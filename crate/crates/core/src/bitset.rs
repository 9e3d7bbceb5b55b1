//! Dense fixed-length bit vector used by the membership and convolution kernels.

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bitset {
    words: Vec<u64>,
    len: usize,
}

impl Bitset {
    pub fn new(len: usize) -> Self {
        Bitset {
            words: vec![0; len.div_ceil(64)],
            len,
        }
    }

    pub fn from_indices(len: usize, indices: impl IntoIterator<Item = u64>) -> Self {
        let mut b = Bitset::new(len);
        for i in indices {
            b.insert(i as usize);
        }
        b
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn insert(&mut self, i: usize) {
        debug_assert!(i < self.len);
        self.words[i >> 6] |= 1 << (i & 63);
    }

    #[inline]
    pub fn contains(&self, i: usize) -> bool {
        i < self.len && (self.words[i >> 6] >> (i & 63)) & 1 == 1
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn iter_ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    None
                } else {
                    let tz = w.trailing_zeros() as usize;
                    w &= w - 1;
                    Some(wi * 64 + tz)
                }
            })
        })
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn and_assign(&mut self, other: &Bitset) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a &= *b;
        }
    }

    /// Bits `[start, start + len)` as a new bit vector.
    pub fn slice(&self, start: usize, len: usize) -> Bitset {
        debug_assert!(start + len <= self.len);
        let mut out = Bitset::new(len);
        let off = start & 63;
        let base = start >> 6;
        let nw = self.words.len();
        for (w, slot) in out.words.iter_mut().enumerate() {
            let wi = base + w;
            let lo = self.words.get(wi).map_or(0, |&x| x >> off);
            let hi = if off > 0 && wi + 1 < nw {
                self.words[wi + 1] << (64 - off)
            } else {
                0
            };
            *slot = lo | hi;
        }
        out.clear_tail();
        out
    }

    fn clear_tail(&mut self) {
        let tail = self.len & 63;
        if tail != 0 {
            let last = self.words.len() - 1;
            self.words[last] &= (1u64 << tail) - 1;
        }
    }

    /// `self |= src << shift`, clipped to `self.len()`. Returns the number of
    /// bits that were newly set.
    pub fn or_shifted(&mut self, src: &Bitset, shift: usize) -> usize {
        let word_shift = shift >> 6;
        let bit_shift = shift & 63;
        let mut added = 0usize;
        let nw = self.words.len();
        for (si, &w) in src.words.iter().enumerate() {
            if w == 0 {
                continue;
            }
            let lo = si + word_shift;
            if lo >= nw {
                break;
            }
            let parts = if bit_shift == 0 {
                [(lo, w), (usize::MAX, 0)]
            } else {
                [(lo, w << bit_shift), (lo + 1, w >> (64 - bit_shift))]
            };
            for (idx, bits) in parts {
                if idx < nw && bits != 0 {
                    let old = self.words[idx];
                    let new = old | bits;
                    added += (new ^ old).count_ones() as usize;
                    self.words[idx] = new;
                }
            }
        }
        let tail = self.len & 63;
        if tail != 0 {
            let last = nw - 1;
            let mask = (1u64 << tail) - 1;
            let stray = self.words[last] & !mask;
            added -= stray.count_ones() as usize;
            self.words[last] &= mask;
        }
        added
    }
}
