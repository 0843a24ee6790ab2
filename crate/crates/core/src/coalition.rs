use core::fmt;

/// A subset of the input indices `{0, .., d-1}`, stored as a bit mask.
///
/// Indices are zero-based in code; `Display` prints them one-based joined by
/// `+` (the convention used in result files), and the empty set as `none`.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Coalition(u64);

impl Coalition {
    pub const MAX_PLAYERS: usize = 63;
    pub const EMPTY: Coalition = Coalition(0);

    pub const fn from_mask(mask: u64) -> Self {
        Coalition(mask)
    }

    pub const fn mask(self) -> u64 {
        self.0
    }

    /// The grand coalition `{0, .., d-1}`.
    pub const fn full(d: usize) -> Self {
        assert!(d <= Self::MAX_PLAYERS);
        Coalition((1u64 << d) - 1)
    }

    pub const fn singleton(i: usize) -> Self {
        assert!(i < Self::MAX_PLAYERS);
        Coalition(1u64 << i)
    }

    pub fn from_indices<I: IntoIterator<Item = usize>>(indices: I) -> Self {
        indices
            .into_iter()
            .fold(Self::EMPTY, |acc, i| acc.with(i))
    }

    pub const fn contains(self, i: usize) -> bool {
        i < 64 && self.0 & (1u64 << i) != 0
    }

    pub const fn with(self, i: usize) -> Self {
        Coalition(self.0 | (1u64 << i))
    }

    pub const fn without(self, i: usize) -> Self {
        Coalition(self.0 & !(1u64 << i))
    }

    pub const fn union(self, other: Self) -> Self {
        Coalition(self.0 | other.0)
    }

    pub const fn intersection(self, other: Self) -> Self {
        Coalition(self.0 & other.0)
    }

    pub const fn is_subset_of(self, other: Self) -> bool {
        self.0 & !other.0 == 0
    }

    /// Complement within `{0, .., d-1}`.
    pub const fn complement(self, d: usize) -> Self {
        Coalition(!self.0 & Self::full(d).0)
    }

    pub const fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub const fn is_empty(self) -> bool {
        self.0 == 0
    }

    /// Member indices in increasing order.
    pub fn iter(self) -> Members {
        Members(self.0)
    }

    /// All `2^d` coalitions of `{0, .., d-1}` by increasing mask.
    pub fn all(d: usize) -> impl Iterator<Item = Coalition> + Clone {
        (0..=Self::full(d).0).map(Coalition)
    }
}

#[derive(Clone)]
pub struct Members(u64);

impl Iterator for Members {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        if self.0 == 0 {
            return None;
        }
        let i = self.0.trailing_zeros() as usize;
        self.0 &= self.0 - 1;
        Some(i)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = self.0.count_ones() as usize;
        (n, Some(n))
    }
}

impl ExactSizeIterator for Members {}

impl fmt::Display for Coalition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return f.write_str("none");
        }
        for (k, i) in self.iter().enumerate() {
            if k > 0 {
                f.write_str("+")?;
            }
            write!(f, "{}", i + 1)?;
        }
        Ok(())
    }
}

impl fmt::Debug for Coalition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Coalition({self})")
    }
}
