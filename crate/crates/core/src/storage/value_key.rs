//! Key layout of the value index.
//!
//! `name_id (u32 BE) | family (u8) | payload`, where family 0 carries the
//! value bytes truncated to [`MAX_VALUE_KEY`] and family 1 carries an
//! order-preserving encoding of the value parsed as a decimal.

pub const STRING_FAMILY: u8 = 0;
pub const NUMBER_FAMILY: u8 = 1;
pub const MAX_VALUE_KEY: usize = 256;

pub fn string_key(name_id: u32, value: &[u8]) -> (Vec<u8>, bool) {
    let truncated = value.len() >= MAX_VALUE_KEY;
    let payload = &value[..value.len().min(MAX_VALUE_KEY)];
    let mut k = Vec::with_capacity(5 + payload.len());
    k.extend_from_slice(&name_id.to_be_bytes());
    k.push(STRING_FAMILY);
    k.extend_from_slice(payload);
    (k, truncated)
}

pub fn number_key(name_id: u32, value: f64) -> Vec<u8> {
    let mut k = Vec::with_capacity(13);
    k.extend_from_slice(&name_id.to_be_bytes());
    k.push(NUMBER_FAMILY);
    k.extend_from_slice(&ordered_f64(value));
    k
}

/// Lowest and highest possible keys of one family.
pub fn family_bounds(name_id: u32, family: u8) -> (Vec<u8>, Vec<u8>) {
    let mut lo = name_id.to_be_bytes().to_vec();
    lo.push(family);
    let mut hi = lo.clone();
    hi.extend(std::iter::repeat_n(0xff, MAX_VALUE_KEY + 1));
    (lo, hi)
}

pub fn payload(key: &[u8]) -> &[u8] {
    &key[5..]
}

/// Bit pattern whose unsigned byte order equals the numeric order of `v`.
pub fn ordered_f64(v: f64) -> [u8; 8] {
    // -0.0 and 0.0 compare equal numerically, so they share a key
    let v = if v == 0.0 { 0.0 } else { v };
    let bits = v.to_bits();
    let flipped = if bits >> 63 == 1 { !bits } else { bits | (1 << 63) };
    flipped.to_be_bytes()
}

pub fn decode_ordered_f64(b: &[u8]) -> f64 {
    let flipped = u64::from_be_bytes(b[..8].try_into().unwrap());
    let bits = if flipped >> 63 == 1 { flipped & !(1 << 63) } else { !flipped };
    f64::from_bits(bits)
}
