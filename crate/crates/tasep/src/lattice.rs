//! Lattice parameters, occupation bit patterns, and the flat index layout
//! shared by every other module.
//!
//! Sites are numbered `n-1` (entry side) down to `0` (exit side). A pattern
//! of length `l` placed at offset `d` describes the occupation of the window
//! of sites `d + l - 1, ..., d`; bit `j` of the pattern is the occupation of
//! site `d + j`, so the leftmost written digit is the highest site of the
//! window.
//!
//! The flat layout orders correlation components by ascending order `l`,
//! then ascending window offset `d`, then the pattern value `b` as an
//! unsigned integer. All modules index through [`IndexLayout`]; none do
//! their own offset arithmetic.

use crate::error::{Error, Result};

/// Largest pattern length representable by [`BitPattern`] (bits of `u64`).
pub const MAX_PATTERN_LEN: usize = 64;

/// Rates of a TASEP lattice: `n` sites, entry rate `alpha` at site `n-1`,
/// exit rate `beta` at site `0`, and hop rates `h_i` from site `i` to site
/// `i-1` for `i = 1..n-1`. All rates are per unit time.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeParams {
    n: usize,
    alpha: f64,
    beta: f64,
    /// `h[i-1]` is the hop rate from site `i` to `i-1`.
    h: Vec<f64>,
    /// Total rate constant `c = alpha + beta + sum h_j`.
    c: f64,
}

impl LatticeParams {
    /// Validates and stores lattice parameters. `h` must contain `n - 1`
    /// strictly positive rates; `alpha` and `beta` must be strictly
    /// positive and finite.
    pub fn new(n: usize, alpha: f64, beta: f64, h: Vec<f64>) -> Result<Self> {
        if n < 1 {
            return Err(Error::InvalidInput("n must be at least 1".into()));
        }
        if n > MAX_PATTERN_LEN {
            return Err(Error::InvalidInput(format!(
                "n = {n} exceeds the supported maximum of {MAX_PATTERN_LEN} sites"
            )));
        }
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::InvalidInput(format!("alpha = {alpha} must be > 0")));
        }
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::InvalidInput(format!("beta = {beta} must be > 0")));
        }
        if h.len() != n - 1 {
            return Err(Error::InvalidInput(format!(
                "h has {} entries, expected n - 1 = {}",
                h.len(),
                n - 1
            )));
        }
        for (i, &hi) in h.iter().enumerate() {
            if !(hi.is_finite() && hi > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "h[{}] = {hi} must be > 0",
                    i + 1
                )));
            }
        }
        let c = alpha + beta + h.iter().sum::<f64>();
        Ok(Self { n, alpha, beta, h, c })
    }

    /// Homogeneous rates: `h_i = hop` for every interior bond.
    pub fn uniform(n: usize, alpha: f64, beta: f64, hop: f64) -> Result<Self> {
        Self::new(n, alpha, beta, vec![hop; n.saturating_sub(1)])
    }

    /// Number of sites.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Entry rate at site `n-1`.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Exit rate at site `0`.
    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Hop rate from site `i` to site `i-1`; `i` must satisfy
    /// `1 <= i <= n-1`.
    pub fn hop(&self, i: usize) -> f64 {
        debug_assert!(1 <= i && i < self.n, "hop index {i} out of range");
        self.h[i - 1]
    }

    /// Hop rates as a slice; entry `i-1` is the rate from site `i`.
    pub fn hops(&self) -> &[f64] {
        &self.h
    }

    /// Total rate constant `c = alpha + beta + sum h_j`, the natural
    /// inverse time scale of the lattice.
    pub fn total_rate(&self) -> f64 {
        self.c
    }
}

/// An occupation pattern: `len` significant bits stored in `bits`. Leading
/// zeros are significant, so the length is carried explicitly; `len = 0`
/// encodes the empty pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BitPattern {
    len: usize,
    bits: u64,
}

/// Mask with the `k` lowest bits set; `k = 64` is allowed.
#[inline]
pub(crate) fn low_mask(k: usize) -> u64 {
    debug_assert!(k <= 64);
    if k == 64 {
        u64::MAX
    } else {
        (1u64 << k) - 1
    }
}

impl BitPattern {
    /// The empty pattern of length 0.
    pub const EMPTY: BitPattern = BitPattern { len: 0, bits: 0 };

    /// Builds a pattern of `len` bits from the value `bits`;
    /// requires `bits < 2^len` and `len <= 64`.
    pub fn new(len: usize, bits: u64) -> Result<Self> {
        if len > MAX_PATTERN_LEN {
            return Err(Error::InvalidInput(format!(
                "pattern length {len} exceeds {MAX_PATTERN_LEN}"
            )));
        }
        if bits & !low_mask(len) != 0 {
            return Err(Error::InvalidInput(format!(
                "pattern value {bits:#b} does not fit in {len} bits"
            )));
        }
        Ok(Self { len, bits })
    }

    /// Parses a pattern from a string of `0`/`1` digits, leftmost digit
    /// first (highest site of the window).
    pub fn parse(digits: &str) -> Result<Self> {
        if digits.len() > MAX_PATTERN_LEN {
            return Err(Error::InvalidInput(format!(
                "pattern string has {} digits, more than {MAX_PATTERN_LEN}",
                digits.len()
            )));
        }
        let mut bits = 0u64;
        for ch in digits.chars() {
            bits = (bits << 1)
                | match ch {
                    '0' => 0,
                    '1' => 1,
                    _ => {
                        return Err(Error::InvalidInput(format!(
                            "pattern digit `{ch}` is not 0 or 1"
                        )))
                    }
                };
        }
        Ok(Self { len: digits.len(), bits })
    }

    /// Number of bits.
    pub fn len(&self) -> usize {
        self.len
    }

    /// True for the empty pattern.
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Pattern value as an unsigned integer.
    pub fn bits(&self) -> u64 {
        self.bits
    }

    /// Bit `j` (occupation of site `d + j` when placed at offset `d`);
    /// requires `j < len`.
    pub fn bit(&self, j: usize) -> bool {
        debug_assert!(j < self.len);
        (self.bits >> j) & 1 == 1
    }

    /// Removes the `i` leftmost bits; `i >= len` yields the empty pattern.
    pub fn left_truncate(&self, i: usize) -> BitPattern {
        let keep = self.len.saturating_sub(i);
        BitPattern { len: keep, bits: self.bits & low_mask(keep) }
    }

    /// Removes the `i` rightmost bits; `i >= len` yields the empty pattern.
    pub fn right_truncate(&self, i: usize) -> BitPattern {
        let keep = self.len.saturating_sub(i);
        BitPattern { len: keep, bits: self.bits >> (self.len - keep) }
    }

    /// Keeps only the `i` leftmost bits; requires `i <= len`.
    pub fn left_crop(&self, i: usize) -> Result<BitPattern> {
        if i > self.len {
            return Err(Error::InvalidInput(format!(
                "left crop of {i} bits from a pattern of length {}",
                self.len
            )));
        }
        Ok(BitPattern { len: i, bits: self.bits >> (self.len - i) })
    }

    /// Keeps only the `i` rightmost bits; requires `i <= len`.
    pub fn right_crop(&self, i: usize) -> Result<BitPattern> {
        if i > self.len {
            return Err(Error::InvalidInput(format!(
                "right crop of {i} bits from a pattern of length {}",
                self.len
            )));
        }
        Ok(BitPattern { len: i, bits: self.bits & low_mask(i) })
    }

    /// Concatenation; `self` occupies the high (left) bits of the result.
    pub fn concat(&self, right: BitPattern) -> BitPattern {
        assert!(
            self.len + right.len <= MAX_PATTERN_LEN,
            "concatenation of {} + {} bits exceeds {MAX_PATTERN_LEN}",
            self.len,
            right.len
        );
        BitPattern {
            len: self.len + right.len,
            bits: (self.bits << right.len) | right.bits,
        }
    }

    /// Number of occupied sites in the pattern.
    pub fn count_ones(&self) -> u32 {
        self.bits.count_ones()
    }
}

impl std::fmt::Display for BitPattern {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.len == 0 {
            return write!(f, "(empty)");
        }
        for j in (0..self.len).rev() {
            write!(f, "{}", (self.bits >> j) & 1)?;
        }
        Ok(())
    }
}

/// Bijection between correlation indices `(l, d, b)` and flat offsets.
///
/// Level `l` holds `(n - l + 1) * 2^l` components (windows `d = 0..n-l`,
/// patterns `b < 2^l`); levels are stored in ascending order of `l` up to
/// `max_order`. The total length is `2^(n+2) - 2n - 4` at `max_order = n`
/// and `(n - m + 2) * 2^(m+1) - 2n - 4` at `max_order = m`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexLayout {
    n: usize,
    max_order: usize,
    /// `offsets[l - 1]` is the flat offset of level `l`;
    /// `offsets[max_order]` is the total length.
    offsets: Vec<usize>,
}

impl IndexLayout {
    /// Builds the layout for lattice size `n` and maximal correlation
    /// order `max_order`; requires `1 <= max_order <= n <= 64`.
    pub fn new(n: usize, max_order: usize) -> Result<Self> {
        if n < 1 || n > MAX_PATTERN_LEN {
            return Err(Error::InvalidInput(format!(
                "lattice size {n} outside 1..={MAX_PATTERN_LEN}"
            )));
        }
        if max_order < 1 || max_order > n {
            return Err(Error::InvalidInput(format!(
                "max_order {max_order} outside 1..={n}"
            )));
        }
        // Level sizes overflow usize long before n = 64 is reachable in
        // practice; keep the arithmetic checked.
        let mut offsets = Vec::with_capacity(max_order + 1);
        let mut acc = 0usize;
        offsets.push(0);
        for l in 1..=max_order {
            let windows = n - l + 1;
            let level = windows
                .checked_mul(1usize << l)
                .and_then(|s| s.checked_add(acc))
                .ok_or_else(|| {
                    Error::InvalidInput(format!(
                        "layout for n = {n}, max_order = {max_order} overflows"
                    ))
                })?;
            acc = level;
            offsets.push(acc);
        }
        Ok(Self { n, max_order, offsets })
    }

    /// Lattice size.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Maximal correlation order held by the layout.
    pub fn max_order(&self) -> usize {
        self.max_order
    }

    /// Total number of components.
    pub fn len(&self) -> usize {
        self.offsets[self.max_order]
    }

    /// True when the layout holds no components (never, since
    /// `max_order >= 1`).
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of windows `n - l + 1` at level `l`.
    pub fn windows(&self, l: usize) -> usize {
        debug_assert!(1 <= l && l <= self.max_order);
        self.n - l + 1
    }

    /// Flat offset of component `(l, d, b)` with full range checking.
    pub fn flat_index(&self, l: usize, d: usize, b: BitPattern) -> Result<usize> {
        if l < 1 || l > self.max_order {
            return Err(Error::InvalidInput(format!(
                "order {l} outside 1..={}",
                self.max_order
            )));
        }
        if b.len() != l {
            return Err(Error::InvalidInput(format!(
                "pattern length {} does not match order {l}",
                b.len()
            )));
        }
        if d > self.n - l {
            return Err(Error::InvalidInput(format!(
                "window offset {d} outside 0..={}",
                self.n - l
            )));
        }
        Ok(self.flat(l, d, b.bits()))
    }

    /// Flat offset from raw parts; range checks only in debug builds.
    /// Used by the inner loops of the vector fields.
    #[inline]
    pub fn flat(&self, l: usize, d: usize, bits: u64) -> usize {
        debug_assert!(1 <= l && l <= self.max_order);
        debug_assert!(d <= self.n - l);
        debug_assert!(bits < (1u64 << l));
        self.offsets[l - 1] + (d << l) + bits as usize
    }

    /// Inverse of [`IndexLayout::flat_index`].
    pub fn unflatten(&self, idx: usize) -> Result<(usize, usize, BitPattern)> {
        if idx >= self.len() {
            return Err(Error::InvalidInput(format!(
                "flat offset {idx} outside 0..{}",
                self.len()
            )));
        }
        // Levels are few (max_order <= n <= 64): linear scan.
        let l = (1..=self.max_order)
            .find(|&l| idx < self.offsets[l])
            .expect("offset below total length lies in some level");
        let rel = idx - self.offsets[l - 1];
        let d = rel >> l;
        let bits = (rel & ((1usize << l) - 1)) as u64;
        Ok((l, d, BitPattern { len: l, bits }))
    }

    /// Iterator over all `(l, d, b)` triples in flat order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, BitPattern)> + '_ {
        (1..=self.max_order).flat_map(move |l| {
            (0..self.windows(l)).flat_map(move |d| {
                (0..(1u64 << l)).map(move |bits| (l, d, BitPattern { len: l, bits }))
            })
        })
    }
}
