//! Binary codebooks mapping users and items to fixed-width bit vectors.
//!
//! Items get the shortest width that can address every item. Because the code
//! space is a power of two, some codes are left over; those surplus codes are
//! assigned to the highest-ranked items (by mean training rating), so a few
//! items are reachable through two codes and every code decodes to an item.

use crate::error::{Error, Result};

/// Number of bits needed to address `count` distinct values (`count` >= 1).
pub fn bits_needed(count: usize) -> usize {
    if count <= 1 {
        0
    } else {
        (usize::BITS - (count - 1).leading_zeros()) as usize
    }
}

/// Encodes `index` as a big-endian bit vector of width `n_bits`.
pub fn encode_index(index: usize, n_bits: usize) -> Result<Vec<u8>> {
    if n_bits >= usize::BITS as usize {
        return Err(Error::InvalidConfig(format!(
            "code width {n_bits} exceeds supported maximum"
        )));
    }
    let capacity = 1usize << n_bits;
    if index >= capacity {
        return Err(Error::IndexOutOfRange {
            what: "code space",
            index,
            size: capacity,
        });
    }
    Ok((0..n_bits)
        .map(|t| ((index >> (n_bits - 1 - t)) & 1) as u8)
        .collect())
}

/// Folds a big-endian bit vector back into the integer it encodes.
pub fn decode_index(bits: &[u8]) -> Result<usize> {
    if bits.len() >= usize::BITS as usize {
        return Err(Error::InvalidConfig(format!(
            "code width {} exceeds supported maximum",
            bits.len()
        )));
    }
    let mut value = 0usize;
    for (index, &bit) in bits.iter().enumerate() {
        if bit > 1 {
            return Err(Error::NonBinaryEntry {
                index,
                value: bit as f64,
            });
        }
        value = (value << 1) | bit as usize;
    }
    Ok(value)
}

/// Bijective code assignment for the users selected at training time.
#[derive(Debug, Clone, PartialEq)]
pub struct UserCodebook {
    n_bits: usize,
    user_ids: Vec<u64>,
}

impl UserCodebook {
    pub fn build(user_ids: Vec<u64>) -> Result<Self> {
        if user_ids.is_empty() {
            return Err(Error::Empty { what: "user ids" });
        }
        let n_bits = bits_needed(user_ids.len());
        Ok(UserCodebook { n_bits, user_ids })
    }

    pub fn n_bits(&self) -> usize {
        self.n_bits
    }

    pub fn num_users(&self) -> usize {
        self.user_ids.len()
    }

    pub fn user_ids(&self) -> &[u64] {
        &self.user_ids
    }

    pub fn user_id(&self, index: usize) -> Result<u64> {
        self.user_ids
            .get(index)
            .copied()
            .ok_or(Error::IndexOutOfRange {
                what: "users",
                index,
                size: self.user_ids.len(),
            })
    }

    /// Index of the user with the given raw id, if it was encoded.
    pub fn position_of_id(&self, raw_id: u64) -> Option<usize> {
        self.user_ids.iter().position(|&id| id == raw_id)
    }

    pub fn encode(&self, user_index: usize) -> Result<Vec<u8>> {
        if user_index >= self.user_ids.len() {
            return Err(Error::IndexOutOfRange {
                what: "users",
                index: user_index,
                size: self.user_ids.len(),
            });
        }
        encode_index(user_index, self.n_bits)
    }

    /// Inverse of [`encode`](Self::encode); codes outside the user range error.
    pub fn decode(&self, bits: &[u8]) -> Result<usize> {
        if bits.len() != self.n_bits {
            return Err(Error::DimensionMismatch {
                expected: self.n_bits,
                got: bits.len(),
            });
        }
        let value = decode_index(bits)?;
        if value >= self.user_ids.len() {
            return Err(Error::IndexOutOfRange {
                what: "users",
                index: value,
                size: self.user_ids.len(),
            });
        }
        Ok(value)
    }
}

/// Surjective code assignment for items.
///
/// The primary code of item `i` is the binary expansion of `i`. The surplus
/// codes `N_m..2^n_bits` are attached, in order, to the items ranked highest
/// by mean training rating (ties broken by ascending raw id), so exactly
/// `2^n_bits - N_m` items carry two codes and every code is decodable.
#[derive(Debug, Clone, PartialEq)]
pub struct ItemCodebook {
    n_bits: usize,
    item_ids: Vec<u64>,
    rank_to_item: Vec<u32>,
    item_to_rank: Vec<u32>,
}

impl ItemCodebook {
    /// Builds the codebook from raw ids and per-item mean training ratings
    /// (items never rated in training should be given mean 0).
    pub fn build(item_ids: Vec<u64>, mean_ratings: &[f64]) -> Result<Self> {
        if item_ids.is_empty() {
            return Err(Error::Empty { what: "item ids" });
        }
        if mean_ratings.len() != item_ids.len() {
            return Err(Error::DimensionMismatch {
                expected: item_ids.len(),
                got: mean_ratings.len(),
            });
        }
        if let Some(bad) = mean_ratings.iter().position(|m| !m.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "non-finite mean rating for item index {bad}"
            )));
        }
        let mut rank_to_item: Vec<u32> = (0..item_ids.len() as u32).collect();
        rank_to_item.sort_by(|&a, &b| {
            mean_ratings[b as usize]
                .total_cmp(&mean_ratings[a as usize])
                .then(item_ids[a as usize].cmp(&item_ids[b as usize]))
        });
        Self::from_parts(item_ids, rank_to_item)
    }

    /// Rebuilds a codebook from its serialized parts, validating that the
    /// rank order is a permutation of the items.
    pub fn from_parts(item_ids: Vec<u64>, rank_to_item: Vec<u32>) -> Result<Self> {
        if item_ids.is_empty() {
            return Err(Error::Empty { what: "item ids" });
        }
        if rank_to_item.len() != item_ids.len() {
            return Err(Error::DimensionMismatch {
                expected: item_ids.len(),
                got: rank_to_item.len(),
            });
        }
        let mut item_to_rank = vec![u32::MAX; item_ids.len()];
        for (rank, &item) in rank_to_item.iter().enumerate() {
            let slot = item_to_rank
                .get_mut(item as usize)
                .ok_or(Error::IndexOutOfRange {
                    what: "items",
                    index: item as usize,
                    size: rank_to_item.len(),
                })?;
            if *slot != u32::MAX {
                return Err(Error::InvalidConfig(format!(
                    "item index {item} appears twice in rank order"
                )));
            }
            *slot = rank as u32;
        }
        Ok(ItemCodebook {
            n_bits: bits_needed(item_ids.len()),
            item_ids,
            rank_to_item,
            item_to_rank,
        })
    }

    pub fn n_bits(&self) -> usize {
        self.n_bits
    }

    pub fn num_items(&self) -> usize {
        self.item_ids.len()
    }

    pub fn num_codes(&self) -> usize {
        1usize << self.n_bits
    }

    /// Count of codes left over after giving every item its primary code.
    pub fn surplus(&self) -> usize {
        self.num_codes() - self.num_items()
    }

    pub fn item_ids(&self) -> &[u64] {
        &self.item_ids
    }

    pub fn item_id(&self, index: usize) -> Result<u64> {
        self.item_ids
            .get(index)
            .copied()
            .ok_or(Error::IndexOutOfRange {
                what: "items",
                index,
                size: self.item_ids.len(),
            })
    }

    /// Index of the item with the given raw id, if present.
    pub fn position_of_id(&self, raw_id: u64) -> Option<usize> {
        self.item_ids.iter().position(|&id| id == raw_id)
    }

    /// Items ordered by descending mean training rating.
    pub fn rank_to_item(&self) -> &[u32] {
        &self.rank_to_item
    }

    pub fn rank_of(&self, item_index: usize) -> Result<usize> {
        self.item_to_rank
            .get(item_index)
            .map(|&r| r as usize)
            .ok_or(Error::IndexOutOfRange {
                what: "items",
                index: item_index,
                size: self.item_ids.len(),
            })
    }

    /// The item an integer code value decodes to; total over the code space.
    pub fn decode_value(&self, value: usize) -> Result<usize> {
        if value >= self.num_codes() {
            return Err(Error::IndexOutOfRange {
                what: "code space",
                index: value,
                size: self.num_codes(),
            });
        }
        if value < self.item_ids.len() {
            Ok(value)
        } else {
            Ok(self.rank_to_item[value - self.item_ids.len()] as usize)
        }
    }

    /// Decodes a sampled bit vector into an item index; total over all codes.
    pub fn decode(&self, bits: &[u8]) -> Result<usize> {
        if bits.len() != self.n_bits {
            return Err(Error::DimensionMismatch {
                expected: self.n_bits,
                got: bits.len(),
            });
        }
        self.decode_value(decode_index(bits)?)
    }

    /// The code every item is guaranteed to own: its index in binary.
    pub fn primary_code(&self, item_index: usize) -> Result<Vec<u8>> {
        if item_index >= self.item_ids.len() {
            return Err(Error::IndexOutOfRange {
                what: "items",
                index: item_index,
                size: self.item_ids.len(),
            });
        }
        encode_index(item_index, self.n_bits)
    }

    /// Integer values of the codes assigned to an item: its primary code and,
    /// for the top-ranked items, the surplus code.
    pub fn code_values(&self, item_index: usize) -> Result<(usize, Option<usize>)> {
        let rank = self.rank_of(item_index)?;
        let surplus = if rank < self.surplus() {
            Some(self.item_ids.len() + rank)
        } else {
            None
        };
        Ok((item_index, surplus))
    }
}
