//! Items stored by the sketches.
//!
//! Sketches work in the comparison model: the only operations performed on an
//! item are comparing two of them and copying one. Averaging is never done.

use std::cmp::Ordering;
use std::fmt::Debug;

use crate::error::{Result, SketchError};

/// Payload encoding used in serialized sketches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Codec {
    F64 = 0,
    Utf8 = 1,
}

impl Codec {
    pub fn from_byte(b: u8) -> Result<Self> {
        match b {
            0 => Ok(Codec::F64),
            1 => Ok(Codec::Utf8),
            other => Err(SketchError::Corrupt(format!("unknown item codec {other}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Codec::F64 => "f64",
            Codec::Utf8 => "string",
        }
    }
}

/// A totally ordered, copyable stream item.
///
/// `item_cmp` must be a total order in which `Equal` implies the two values are
/// indistinguishable (identical encodings). Both backends rely on this to
/// produce byte-identical sketches regardless of how ties were ordered.
pub trait Item: Clone + Default + Debug + Send + Sync + 'static {
    const CODEC: Codec;

    fn item_cmp(&self, other: &Self) -> Ordering;

    fn encode(&self, out: &mut Vec<u8>);

    fn decode(bytes: &[u8]) -> Result<Self>;

    /// Parses one line of a text stream.
    fn parse_text(s: &str) -> Result<Self>;

    /// Inverse of [`Item::parse_text`].
    fn to_text(&self) -> String;

    #[inline]
    fn less(&self, other: &Self) -> bool {
        self.item_cmp(other) == Ordering::Less
    }
}

impl Item for f64 {
    const CODEC: Codec = Codec::F64;

    #[inline]
    fn item_cmp(&self, other: &Self) -> Ordering {
        self.total_cmp(other)
    }

    fn encode(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }

    fn decode(bytes: &[u8]) -> Result<Self> {
        let raw: [u8; 8] = bytes
            .try_into()
            .map_err(|_| SketchError::Corrupt(format!("f64 payload of {} bytes", bytes.len())))?;
        Ok(f64::from_le_bytes(raw))
    }

    fn parse_text(s: &str) -> Result<Self> {
        s.trim()
            .parse::<f64>()
            .map_err(|e| SketchError::InvalidParameter(format!("not a number {s:?}: {e}")))
    }

    fn to_text(&self) -> String {
        self.to_string()
    }
}

impl Item for String {
    const CODEC: Codec = Codec::Utf8;

    #[inline]
    fn item_cmp(&self, other: &Self) -> Ordering {
        self.as_bytes().cmp(other.as_bytes())
    }

    fn encode(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(self.as_bytes());
    }

    fn decode(bytes: &[u8]) -> Result<Self> {
        String::from_utf8(bytes.to_vec())
            .map_err(|e| SketchError::Corrupt(format!("invalid utf-8 payload: {e}")))
    }

    fn parse_text(s: &str) -> Result<Self> {
        Ok(s.to_string())
    }

    fn to_text(&self) -> String {
        self.clone()
    }
}

pub(crate) fn sort_items<T: Item>(items: &mut [T]) {
    items.sort_by(T::item_cmp);
}

pub(crate) fn is_sorted<T: Item>(items: &[T]) -> bool {
    items.windows(2).all(|w| w[0].item_cmp(&w[1]) != Ordering::Greater)
}

/// Index of the first element not less than `item` in a sorted slice.
#[inline]
pub(crate) fn lower_bound<T: Item>(items: &[T], item: &T) -> usize {
    items.partition_point(|x| x.less(item))
}

/// Merges two sorted runs.
pub(crate) fn merge_sorted<T: Item>(left: Vec<T>, right: Vec<T>) -> Vec<T> {
    if left.is_empty() {
        return right;
    }
    if right.is_empty() {
        return left;
    }
    let mut out = Vec::with_capacity(left.len() + right.len());
    let mut a = left.into_iter().peekable();
    let mut b = right.into_iter().peekable();
    loop {
        match (a.peek(), b.peek()) {
            (Some(x), Some(y)) => {
                if y.less(x) {
                    out.push(b.next().unwrap());
                } else {
                    out.push(a.next().unwrap());
                }
            }
            (Some(_), None) => {
                out.extend(a);
                break;
            }
            (None, _) => {
                out.extend(b);
                break;
            }
        }
    }
    out
}
