use super::{decode_symbol, CodecError, CodedPacket};
use crate::gf256;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecodeStatus {
    /// Rank increased.
    Innovative,
    /// The equation reduced to zero against the rows already held.
    Redundant,
    /// Rank reached the generation size; every slot is determined.
    Decoded,
}

/// A recovered source slot (1-based) or the reason it had to be dropped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReleasedSlot {
    pub slot: usize,
    pub packet: Result<Vec<u8>, CodecError>,
}

#[derive(Debug, Clone)]
struct Row {
    coeffs: Vec<u8>,
    payload: Vec<u8>,
}

impl Row {
    fn is_unit(&self, pivot: usize) -> bool {
        self.coeffs
            .iter()
            .enumerate()
            .all(|(j, &c)| if j == pivot { c == 1 } else { c == 0 })
    }
}

/// Streaming Gaussian elimination for one generation.
///
/// Rows are kept in reduced row-echelon form indexed by pivot column: every
/// pivot is 1 and is the only nonzero entry in its column.
#[derive(Debug, Clone)]
pub struct Decoder {
    generation_id: u32,
    /// Column count, fixed by the first packet's advertised generation size.
    width: usize,
    /// Current target rank; shrinks when a short-sealed `n'` is advertised.
    generation_size: usize,
    symbol_size: usize,
    rows: Vec<Option<Row>>,
    rank: usize,
    released: Vec<bool>,
    max_prefix: usize,
}

impl Decoder {
    pub fn new(generation_id: u32, generation_size: usize, symbol_size: usize) -> Self {
        Decoder {
            generation_id,
            width: generation_size,
            generation_size,
            symbol_size,
            rows: vec![None; generation_size],
            rank: 0,
            released: vec![false; generation_size],
            max_prefix: 0,
        }
    }

    /// Creates a decoder sized from the first packet seen for a generation.
    pub fn for_packet(cp: &CodedPacket) -> Self {
        Decoder::new(cp.generation_id, cp.generation_size as usize, cp.payload.len())
    }

    pub fn generation_id(&self) -> u32 {
        self.generation_id
    }

    pub fn generation_size(&self) -> usize {
        self.generation_size
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn is_decoded(&self) -> bool {
        self.rank == self.generation_size
    }

    /// Highest prefix size seen so far.
    pub fn max_prefix(&self) -> usize {
        self.max_prefix
    }

    pub fn released_count(&self) -> usize {
        self.released.iter().filter(|&&r| r).count()
    }

    /// Row-reduces `cp` into the system.
    pub fn push(&mut self, cp: &CodedPacket) -> Result<DecodeStatus, CodecError> {
        if cp.generation_id != self.generation_id {
            return Err(CodecError::GenerationMismatch {
                expected: self.generation_id,
                got: cp.generation_id,
            });
        }
        if cp.payload.len() != self.symbol_size {
            return Err(CodecError::PayloadLength {
                expected: self.symbol_size,
                got: cp.payload.len(),
            });
        }
        let k = cp.prefix_size();
        let advertised = cp.generation_size as usize;
        if k == 0 || k > advertised || advertised > self.width {
            return Err(CodecError::Inconsistent(format!(
                "prefix {k}, generation size {advertised}, decoder width {}",
                self.width
            )));
        }
        if advertised < self.generation_size {
            if advertised < self.max_prefix.max(self.rank) {
                return Err(CodecError::Inconsistent(format!(
                    "generation size {advertised} below rank {} / prefix {}",
                    self.rank, self.max_prefix
                )));
            }
            self.generation_size = advertised;
        }
        if self.is_decoded() {
            return Ok(DecodeStatus::Redundant);
        }

        let mut coeffs = vec![0u8; self.width];
        coeffs[..k].copy_from_slice(&cp.coefficients);
        let mut payload = cp.payload.clone();

        for (col, row) in self.rows.iter().enumerate() {
            let c = coeffs[col];
            if c == 0 {
                continue;
            }
            if let Some(row) = row {
                gf256::axpy(&mut coeffs, &row.coeffs, c).expect("row width");
                gf256::axpy(&mut payload, &row.payload, c).expect("symbol size");
            }
        }

        let Some(pivot) = coeffs.iter().position(|&c| c != 0) else {
            return Ok(DecodeStatus::Redundant);
        };
        if pivot >= self.generation_size {
            return Err(CodecError::Inconsistent(format!(
                "pivot column {} beyond generation size {}",
                pivot + 1,
                self.generation_size
            )));
        }
        let scale = gf256::inv(coeffs[pivot]).expect("pivot is nonzero");
        gf256::scale(&mut coeffs, scale);
        gf256::scale(&mut payload, scale);

        for row in self.rows.iter_mut().flatten() {
            let c = row.coeffs[pivot];
            if c != 0 {
                gf256::axpy(&mut row.coeffs, &coeffs, c).expect("row width");
                gf256::axpy(&mut row.payload, &payload, c).expect("symbol size");
            }
        }

        self.rows[pivot] = Some(Row { coeffs, payload });
        self.rank += 1;
        self.max_prefix = self.max_prefix.max(k);
        if self.is_decoded() {
            Ok(DecodeStatus::Decoded)
        } else {
            Ok(DecodeStatus::Innovative)
        }
    }

    /// Returns every slot whose row has reduced to a unit vector and has not
    /// been returned before, in slot order, with length prefix and padding
    /// stripped. A slot with a corrupt length prefix is reported once and
    /// never retried.
    pub fn release(&mut self) -> Vec<ReleasedSlot> {
        let mut out = Vec::new();
        for col in 0..self.generation_size {
            if self.released[col] {
                continue;
            }
            let Some(row) = &self.rows[col] else { continue };
            if !row.is_unit(col) {
                continue;
            }
            self.released[col] = true;
            let packet = decode_symbol(&row.payload)
                .map(<[u8]>::to_vec)
                .ok_or(CodecError::FramingCorruption { slot: col + 1 });
            out.push(ReleasedSlot {
                slot: col + 1,
                packet,
            });
        }
        out
    }
}
