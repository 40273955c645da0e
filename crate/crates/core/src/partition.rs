//! Set partitions of `[n]`, binary outcomes, subsets and integer partitions.
//!
//! Elements of the ground set are 1-based in every public interface. Internally
//! element `i` occupies bit `n - i` of a `u32` mask, so a subset mask and the
//! integer value of the matching indicator string `1^S 0^{S^c}` coincide: the
//! outcome `"110"` and the subset `{1, 2}` are both mask `0b110`.

use std::fmt;

use crate::error::{DcError, Result};

/// Largest ground set accepted anywhere (masks are `u32`).
pub const MAX_GROUND_SET: usize = 24;

/// Default enumeration cap; Bell(12) = 4,213,597 partitions.
pub const DEFAULT_PARTITION_CAP: usize = 12;

#[inline]
pub(crate) fn element_bit(n: usize, element: usize) -> u32 {
    1u32 << (n - element)
}

fn check_ground_set(n: usize) -> Result<()> {
    if n > MAX_GROUND_SET {
        return Err(DcError::Size {
            n,
            cap: MAX_GROUND_SET,
        });
    }
    Ok(())
}

/// A subset of `[n]`, stored as a bitmask.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Subset {
    n: usize,
    mask: u32,
}

impl Subset {
    pub fn from_mask(n: usize, mask: u32) -> Result<Self> {
        check_ground_set(n)?;
        if n < 32 && mask >> n != 0 {
            return Err(DcError::Domain(format!("mask {mask:#b} is not a subset of [{n}]")));
        }
        Ok(Self { n, mask })
    }

    /// Builds a subset from 1-based elements; duplicates are ignored.
    pub fn from_elements(n: usize, elements: &[usize]) -> Result<Self> {
        check_ground_set(n)?;
        let mut mask = 0;
        for &e in elements {
            if e == 0 || e > n {
                return Err(DcError::Domain(format!("element {e} is not in [{n}]")));
            }
            mask |= element_bit(n, e);
        }
        Ok(Self { n, mask })
    }

    pub fn empty(n: usize) -> Self {
        Self { n, mask: 0 }
    }

    pub fn full(n: usize) -> Self {
        Self {
            n,
            mask: full_mask(n),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn mask(&self) -> u32 {
        self.mask
    }

    pub fn len(&self) -> usize {
        self.mask.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.mask == 0
    }

    pub fn contains(&self, element: usize) -> bool {
        element >= 1 && element <= self.n && self.mask & element_bit(self.n, element) != 0
    }

    pub fn is_subset_of(&self, other: &Subset) -> bool {
        self.mask & !other.mask == 0
    }

    pub fn complement(&self) -> Subset {
        Subset {
            n: self.n,
            mask: full_mask(self.n) & !self.mask,
        }
    }

    /// Sorted 1-based elements.
    pub fn elements(&self) -> Vec<usize> {
        (1..=self.n).filter(|&e| self.contains(e)).collect()
    }

    /// All subsets of `[n]` in increasing mask order.
    pub fn all(n: usize) -> Vec<Subset> {
        (0..1u32 << n).map(|mask| Subset { n, mask }).collect()
    }

    /// All subsets of `[n]` ordered by size, then by mask.
    pub fn size_sorted(n: usize) -> Vec<Subset> {
        let mut subsets = Self::all(n);
        subsets.sort_by_key(|s| (s.len(), s.mask));
        subsets
    }

    /// Subsets of `self`, including the empty set and `self`.
    pub fn subsets(&self) -> impl Iterator<Item = Subset> + '_ {
        let n = self.n;
        let top = self.mask;
        let mut next = Some(top);
        std::iter::from_fn(move || {
            let current = next?;
            next = if current == 0 {
                None
            } else {
                Some((current - 1) & top)
            };
            Some(Subset { n, mask: current })
        })
    }
}

impl fmt::Display for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.elements().iter().map(|e| e.to_string()).collect();
        write!(f, "{{{}}}", parts.join(","))
    }
}

pub(crate) fn full_mask(n: usize) -> u32 {
    if n >= 32 {
        u32::MAX
    } else {
        (1u32 << n) - 1
    }
}

/// A binary string `rho` in `{0,1}^n`.
///
/// Ordering by [`Outcome::bits`] is the numeric order of the string read as a
/// binary integer, with the first character most significant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Outcome {
    n: usize,
    bits: u32,
}

impl Outcome {
    pub fn from_bits(n: usize, bits: u32) -> Result<Self> {
        let s = Subset::from_mask(n, bits)?;
        Ok(Self { n, bits: s.mask })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let n = text.len();
        check_ground_set(n)?;
        let mut bits = 0u32;
        for c in text.chars() {
            bits <<= 1;
            match c {
                '0' => {}
                '1' => bits |= 1,
                _ => return Err(DcError::Parse(format!("not a binary string: {text:?}"))),
            }
        }
        Ok(Self { n, bits })
    }

    /// The outcome equal to 1 exactly on `s`, i.e. `1^S 0^{S^c}`.
    pub fn indicator(s: Subset) -> Self {
        Self {
            n: s.n,
            bits: s.mask,
        }
    }

    pub fn all(n: usize) -> Vec<Outcome> {
        (0..1u32 << n).map(|bits| Outcome { n, bits }).collect()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn index(&self) -> usize {
        self.bits as usize
    }

    /// The value at 1-based position `element`.
    pub fn get(&self, element: usize) -> bool {
        self.bits & element_bit(self.n, element) != 0
    }

    /// `-rho`: zeros and ones swapped.
    pub fn complement(&self) -> Outcome {
        Outcome {
            n: self.n,
            bits: full_mask(self.n) & !self.bits,
        }
    }

    /// Number of ones, `||rho||`.
    pub fn ones(&self) -> usize {
        self.bits.count_ones() as usize
    }

    /// The set of positions where the outcome is 1.
    pub fn support(&self) -> Subset {
        Subset {
            n: self.n,
            mask: self.bits,
        }
    }

    /// True when the outcome is 1 on every element of `s` (the event `1^S`).
    pub fn is_one_on(&self, s: Subset) -> bool {
        s.mask & !self.bits == 0
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.n == 0 {
            return Ok(());
        }
        write!(f, "{:0width$b}", self.bits, width = self.n)
    }
}

/// A partition of `[n]` in restricted-growth form: `labels[i]` is the block of
/// element `i + 1`, and labels first appear in increasing order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SetPartition {
    labels: Vec<u8>,
    blocks: usize,
}

impl SetPartition {
    pub fn from_labels(labels: Vec<u8>) -> Result<Self> {
        check_ground_set(labels.len())?;
        let mut next = 0u8;
        for &label in &labels {
            if label > next {
                return Err(DcError::Domain(format!(
                    "labels {labels:?} are not a restricted-growth string"
                )));
            }
            if label == next {
                next += 1;
            }
        }
        Ok(Self {
            blocks: next as usize,
            labels,
        })
    }

    /// Builds a partition from 1-based blocks covering `[n]` exactly once.
    pub fn from_blocks(n: usize, blocks: &[Vec<usize>]) -> Result<Self> {
        check_ground_set(n)?;
        let mut owner = vec![usize::MAX; n];
        for (b, block) in blocks.iter().enumerate() {
            if block.is_empty() {
                return Err(DcError::Domain("empty block".into()));
            }
            for &e in block {
                if e == 0 || e > n || owner[e - 1] != usize::MAX {
                    return Err(DcError::Domain(format!(
                        "blocks {blocks:?} do not partition [{n}]"
                    )));
                }
                owner[e - 1] = b;
            }
        }
        if owner.contains(&usize::MAX) {
            return Err(DcError::Domain(format!("blocks {blocks:?} do not cover [{n}]")));
        }
        Ok(Self::canonical(owner.into_iter()))
    }

    /// Relabels arbitrary block identifiers by order of first appearance.
    fn canonical(owner: impl Iterator<Item = usize>) -> Self {
        let mut seen: Vec<usize> = Vec::new();
        let labels = owner
            .map(|b| match seen.iter().position(|&x| x == b) {
                Some(pos) => pos as u8,
                None => {
                    seen.push(b);
                    (seen.len() - 1) as u8
                }
            })
            .collect();
        Self {
            labels,
            blocks: seen.len(),
        }
    }

    /// Parses a restricted-growth string such as `"00122"` (labels in base 36).
    pub fn parse(text: &str) -> Result<Self> {
        let labels = text
            .chars()
            .map(|c| {
                c.to_digit(36)
                    .map(|d| d as u8)
                    .ok_or_else(|| DcError::Parse(format!("bad label {c:?} in {text:?}")))
            })
            .collect::<Result<Vec<u8>>>()?;
        Self::from_labels(labels)
    }

    /// The partition of `[n]` into singletons.
    pub fn singletons(n: usize) -> Self {
        Self {
            labels: (0..n as u8).collect(),
            blocks: n,
        }
    }

    /// The partition of `[n]` into a single block.
    pub fn one_block(n: usize) -> Self {
        Self {
            labels: vec![0; n],
            blocks: usize::from(n > 0),
        }
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    /// Number of blocks, `||sigma||`.
    pub fn num_blocks(&self) -> usize {
        self.blocks
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    /// Blocks as sorted lists of 1-based elements, in label order.
    pub fn blocks(&self) -> Vec<Vec<usize>> {
        let mut blocks = vec![Vec::new(); self.blocks];
        for (i, &label) in self.labels.iter().enumerate() {
            blocks[label as usize].push(i + 1);
        }
        blocks
    }

    /// Blocks as masks over `[n]`, in label order.
    pub fn block_masks(&self) -> Vec<u32> {
        let n = self.n();
        let mut masks = vec![0u32; self.blocks];
        for (i, &label) in self.labels.iter().enumerate() {
            masks[label as usize] |= element_bit(n, i + 1);
        }
        masks
    }

    /// Block sizes in label order.
    pub fn block_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.blocks];
        for &label in &self.labels {
            sizes[label as usize] += 1;
        }
        sizes
    }
}

impl fmt::Display for SetPartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &label in &self.labels {
            let c = char::from_digit(label as u32, 36).unwrap_or('?');
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

/// Bell number `|B_n|` via the Bell triangle.
pub fn bell_number(n: usize) -> u128 {
    let mut row = vec![1u128];
    for _ in 0..n {
        let mut next = Vec::with_capacity(row.len() + 1);
        next.push(*row.last().unwrap());
        for &value in &row {
            let prev = *next.last().unwrap();
            next.push(prev + value);
        }
        row = next;
    }
    row[0]
}

/// All partitions of `[n]` in lexicographic restricted-growth order, with the
/// default cap of [`DEFAULT_PARTITION_CAP`].
pub fn enumerate_partitions(n: usize) -> Result<Vec<SetPartition>> {
    enumerate_partitions_capped(n, DEFAULT_PARTITION_CAP)
}

pub fn enumerate_partitions_capped(n: usize, cap: usize) -> Result<Vec<SetPartition>> {
    if n == 0 {
        return Err(DcError::Domain("n must be positive".into()));
    }
    if n > cap.min(MAX_GROUND_SET) {
        return Err(DcError::Size {
            n,
            cap: cap.min(MAX_GROUND_SET),
        });
    }
    let mut out = Vec::with_capacity(bell_number(n) as usize);
    let mut labels = vec![0u8; n];
    // prefix_max[i] = max(labels[0..=i])
    let mut prefix_max = vec![0u8; n];
    loop {
        out.push(SetPartition {
            labels: labels.clone(),
            blocks: prefix_max[n - 1] as usize + 1,
        });
        let Some(i) = (1..n).rev().find(|&i| labels[i] <= prefix_max[i - 1]) else {
            break;
        };
        labels[i] += 1;
        prefix_max[i] = prefix_max[i - 1].max(labels[i]);
        for j in i + 1..n {
            labels[j] = 0;
            prefix_max[j] = prefix_max[i];
        }
    }
    Ok(out)
}

/// Restriction `sigma_S`: the blocks `B ∩ S` that are nonempty, re-indexed over
/// the elements of `S` in increasing order. Restricting to the empty set gives
/// the empty partition.
pub fn restrict(sigma: &SetPartition, s: Subset) -> Result<SetPartition> {
    if s.n() != sigma.n() {
        return Err(DcError::Domain(format!(
            "subset of [{}] applied to a partition of [{}]",
            s.n(),
            sigma.n()
        )));
    }
    let owner = s
        .elements()
        .into_iter()
        .map(|e| sigma.labels[e - 1] as usize);
    Ok(SetPartition::canonical(owner))
}

/// `||sigma_S||` from precomputed block masks.
#[inline]
pub(crate) fn restricted_block_count(block_masks: &[u32], s: u32) -> usize {
    block_masks.iter().filter(|&&b| b & s != 0).count()
}

fn check_same_n(sigma: &SetPartition, rho: &Outcome) -> Result<()> {
    if sigma.n() != rho.n() {
        return Err(DcError::Domain(format!(
            "partition of [{}] paired with a string of length {}",
            sigma.n(),
            rho.n()
        )));
    }
    Ok(())
}

/// `sigma ◁ rho`: every block is monochromatic under `rho`.
pub fn is_compatible(sigma: &SetPartition, rho: &Outcome) -> Result<bool> {
    check_same_n(sigma, rho)?;
    Ok(sigma
        .block_masks()
        .iter()
        .all(|&b| b & rho.bits == 0 || b & !rho.bits == 0))
}

/// `c(sigma, rho)`: the number of blocks on which `rho` is 1.
pub fn color_count(sigma: &SetPartition, rho: &Outcome) -> Result<usize> {
    if !is_compatible(sigma, rho)? {
        return Err(DcError::Precondition(format!(
            "{rho} is not constant on the blocks of {sigma}"
        )));
    }
    Ok(sigma
        .block_masks()
        .iter()
        .filter(|&&b| b & rho.bits != 0)
        .count())
}

/// `sigma^T`: the partition whose only possible non-singleton block is `T`.
pub fn single_block_partition(t: Subset) -> Result<SetPartition> {
    if t.len() == 1 {
        return Err(DcError::Domain(format!(
            "sigma^T needs |T| = 0 or |T| >= 2, got T = {t}"
        )));
    }
    let n = t.n();
    let owner = (1..=n).map(|e| if t.contains(e) { 0 } else { e });
    Ok(SetPartition::canonical(owner))
}

/// An integer partition of `n`, parts non-increasing.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct IntegerPartition {
    parts: Vec<usize>,
}

impl IntegerPartition {
    /// Sorts the parts into non-increasing order; parts must be positive.
    pub fn new(mut parts: Vec<usize>) -> Result<Self> {
        if parts.contains(&0) {
            return Err(DcError::Domain("integer partition with a zero part".into()));
        }
        parts.sort_unstable_by(|a, b| b.cmp(a));
        Ok(Self { parts })
    }

    pub fn parts(&self) -> &[usize] {
        &self.parts
    }

    pub fn n(&self) -> usize {
        self.parts.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }
}

impl fmt::Display for IntegerPartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.parts.iter().map(|p| p.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// All integer partitions of `n` in decreasing lexicographic order,
/// starting from `(n)` and ending at `(1,…,1)`.
pub fn integer_partitions(n: usize) -> Vec<IntegerPartition> {
    fn go(remaining: usize, max_part: usize, prefix: &mut Vec<usize>, out: &mut Vec<IntegerPartition>) {
        if remaining == 0 {
            out.push(IntegerPartition {
                parts: prefix.clone(),
            });
            return;
        }
        for part in (1..=remaining.min(max_part)).rev() {
            prefix.push(part);
            go(remaining - part, part, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    go(n, n, &mut Vec::new(), &mut out);
    out
}

/// `pi(sigma)`: the sorted block sizes.
pub fn shape(sigma: &SetPartition) -> IntegerPartition {
    let mut parts = sigma.block_sizes();
    parts.sort_unstable_by(|a, b| b.cmp(a));
    IntegerPartition { parts }
}

/// `a_pi`: the number of set partitions of `[n]` whose shape is `pi`,
/// `n! / (prod part! * prod multiplicity!)`.
pub fn orbit_size(pi: &IntegerPartition, n: usize) -> Result<u128> {
    if pi.n() != n {
        return Err(DcError::Domain(format!("{pi} does not sum to {n}")));
    }
    if n > 30 {
        return Err(DcError::Size { n, cap: 30 });
    }
    let factorial = |k: usize| (1..=k as u128).product::<u128>();
    let mut denom = 1u128;
    let mut run = 0;
    for (i, &part) in pi.parts.iter().enumerate() {
        denom *= factorial(part);
        run += 1;
        if i + 1 == pi.parts.len() || pi.parts[i + 1] != part {
            denom *= factorial(run);
            run = 0;
        }
    }
    Ok(factorial(n) / denom)
}
