//! Wire format of one transmission, exercised by codec round-trip tests.
//!
//! Layout: one kind/op tag byte (bit 7 = XOR pair, low bits = operation
//! index), then one or two `(session: 1 byte, seq: 4 bytes big-endian)`
//! header entries, then the payload (for a pair, the byte-wise XOR of both
//! packets' payloads).

use crate::vnet::{CodingOp, PacketId, Session, Transmission, TxKind};
use thiserror::Error;

const PAIR_BIT: u8 = 0x80;

#[derive(Debug, Error, PartialEq)]
pub enum WireError {
    #[error("frame truncated")]
    Truncated,
    #[error("unknown op tag {0:#x}")]
    BadTag(u8),
    #[error("bad session byte {0}")]
    BadSession(u8),
    #[error("operation {0:?} cannot carry an XOR pair")]
    PairNotAllowed(CodingOp),
    #[error("operation {0:?} must carry an XOR pair")]
    PairRequired(CodingOp),
    #[error("payload does not match the declared packet identities")]
    PayloadMismatch,
}

fn op_from_index(i: u8) -> Option<CodingOp> {
    CodingOp::SEVEN.get(i as usize).copied()
}

fn push_ref(out: &mut Vec<u8>, p: &PacketId) {
    out.push(p.session.byte());
    out.extend_from_slice(&p.seq.to_be_bytes());
}

/// Serialize a transmission to bytes, materializing `payload_len` payload
/// bytes from the packet identities.
pub fn encode_frame(tx: &Transmission, payload_len: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(1 + 10 + payload_len);
    match tx.kind {
        TxKind::Uncoded(p) => {
            out.push(tx.op.index7() as u8);
            push_ref(&mut out, &p);
            out.extend_from_slice(&p.payload(payload_len));
        }
        TxKind::XorPair(a, b) => {
            out.push(PAIR_BIT | tx.op.index7() as u8);
            push_ref(&mut out, &a);
            push_ref(&mut out, &b);
            let pa = a.payload(payload_len);
            let pb = b.payload(payload_len);
            out.extend(pa.iter().zip(&pb).map(|(x, y)| x ^ y));
        }
    }
    out
}

fn read_ref(bytes: &[u8], run_seed: u64) -> Result<(PacketId, &[u8]), WireError> {
    if bytes.len() < 5 {
        return Err(WireError::Truncated);
    }
    let session = Session::from_byte(bytes[0]).ok_or(WireError::BadSession(bytes[0]))?;
    let seq = u32::from_be_bytes([bytes[1], bytes[2], bytes[3], bytes[4]]);
    Ok((PacketId::new(session, seq, run_seed), &bytes[5..]))
}

/// Parse a frame back into a transmission, reconstructing packet identities
/// with `run_seed` and verifying the payload bytes against them.
pub fn decode_frame(bytes: &[u8], run_seed: u64) -> Result<(Transmission, Vec<u8>), WireError> {
    let (&tag, rest) = bytes.split_first().ok_or(WireError::Truncated)?;
    let op = op_from_index(tag & !PAIR_BIT).ok_or(WireError::BadTag(tag))?;
    let is_pair = tag & PAIR_BIT != 0;
    let pair_ok = matches!(op, CodingOp::Premix | CodingOp::ClassicXor);
    if is_pair && !pair_ok {
        return Err(WireError::PairNotAllowed(op));
    }
    if !is_pair && matches!(op, CodingOp::Premix) {
        return Err(WireError::PairRequired(op));
    }
    if is_pair {
        let (a, rest) = read_ref(rest, run_seed)?;
        let (b, rest) = read_ref(rest, run_seed)?;
        let expect: Vec<u8> = a
            .payload(rest.len())
            .iter()
            .zip(&b.payload(rest.len()))
            .map(|(x, y)| x ^ y)
            .collect();
        if rest != expect {
            return Err(WireError::PayloadMismatch);
        }
        Ok((
            Transmission {
                op,
                kind: TxKind::XorPair(a, b),
            },
            rest.to_vec(),
        ))
    } else {
        let (p, rest) = read_ref(rest, run_seed)?;
        if rest != p.payload(rest.len()) {
            return Err(WireError::PayloadMismatch);
        }
        Ok((
            Transmission {
                op,
                kind: TxKind::Uncoded(p),
            },
            rest.to_vec(),
        ))
    }
}
