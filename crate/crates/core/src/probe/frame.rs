//! Probe wire format.
//!
//! ```text
//! offset  size  field
//!      0     4  magic "SPX1"
//!      4     1  kind (0 = request, 1 = ack)
//!      5     8  seq, u64 big-endian
//!     13     8  client_send_ns, u64 big-endian
//!     21     4  payload_len, u32 big-endian
//!     25     n  payload
//! ```

use std::io::{self, Read, Write};

use super::ProbeError;

pub const MAGIC: [u8; 4] = *b"SPX1";
pub const HEADER_LEN: usize = 25;
/// Total size of a request frame on the wire.
pub const REQUEST_FRAME_LEN: usize = 33_300;
/// Total size of an acknowledgment frame on the wire.
pub const ACK_FRAME_LEN: usize = 1_024;
/// Upper bound on accepted payloads; larger lengths are treated as corruption.
pub const MAX_PAYLOAD_LEN: u32 = 16 * 1024 * 1024;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum FrameKind {
    Request = 0,
    Ack = 1,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProbeFrame {
    pub kind: FrameKind,
    pub seq: u64,
    pub client_send_ns: u64,
    pub payload: Vec<u8>,
}

impl ProbeFrame {
    /// A request whose encoded size is `frame_len` bytes (at least the header).
    pub fn request(seq: u64, client_send_ns: u64, frame_len: usize) -> Self {
        ProbeFrame {
            kind: FrameKind::Request,
            seq,
            client_send_ns,
            payload: vec![0u8; frame_len.saturating_sub(HEADER_LEN)],
        }
    }

    /// The acknowledgment for `request`, echoing its seq and send time.
    pub fn ack_for(request: &ProbeFrame) -> Self {
        ProbeFrame {
            kind: FrameKind::Ack,
            seq: request.seq,
            client_send_ns: request.client_send_ns,
            payload: vec![0u8; ACK_FRAME_LEN - HEADER_LEN],
        }
    }

    pub fn encoded_len(&self) -> usize {
        HEADER_LEN + self.payload.len()
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(self.encoded_len());
        buf.extend_from_slice(&MAGIC);
        buf.push(self.kind as u8);
        buf.extend_from_slice(&self.seq.to_be_bytes());
        buf.extend_from_slice(&self.client_send_ns.to_be_bytes());
        buf.extend_from_slice(&(self.payload.len() as u32).to_be_bytes());
        buf.extend_from_slice(&self.payload);
        buf
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> io::Result<()> {
        w.write_all(&self.encode())
    }

    /// Reads one frame. `Ok(None)` on a clean end of stream between frames.
    pub fn read_from<R: Read>(r: &mut R) -> Result<Option<ProbeFrame>, ProbeError> {
        let mut header = [0u8; HEADER_LEN];
        let got = read_full(r, &mut header)?;
        if got == 0 {
            return Ok(None);
        }
        if got < HEADER_LEN {
            return Err(ProbeError::Truncated { expected: HEADER_LEN, got });
        }
        let (head, payload_len) = Self::decode_header(&header)?;
        let mut payload = vec![0u8; payload_len as usize];
        let got = read_full(r, &mut payload)?;
        if got < payload.len() {
            return Err(ProbeError::Truncated { expected: HEADER_LEN + payload.len(), got: HEADER_LEN + got });
        }
        Ok(Some(ProbeFrame { payload, ..head }))
    }

    pub fn decode(bytes: &[u8]) -> Result<ProbeFrame, ProbeError> {
        let mut cursor = bytes;
        let frame = Self::read_from(&mut cursor)?.ok_or(ProbeError::Truncated { expected: HEADER_LEN, got: 0 })?;
        if !cursor.is_empty() {
            return Err(ProbeError::Malformed(format!("{} trailing bytes", cursor.len())));
        }
        Ok(frame)
    }

    fn decode_header(header: &[u8; HEADER_LEN]) -> Result<(ProbeFrame, u32), ProbeError> {
        if header[0..4] != MAGIC {
            return Err(ProbeError::Malformed(format!("bad magic {:02x?}", &header[0..4])));
        }
        let kind = match header[4] {
            0 => FrameKind::Request,
            1 => FrameKind::Ack,
            other => return Err(ProbeError::Malformed(format!("unknown kind {other}"))),
        };
        let seq = u64::from_be_bytes(header[5..13].try_into().expect("8 bytes"));
        let client_send_ns = u64::from_be_bytes(header[13..21].try_into().expect("8 bytes"));
        let payload_len = u32::from_be_bytes(header[21..25].try_into().expect("4 bytes"));
        if payload_len > MAX_PAYLOAD_LEN {
            return Err(ProbeError::Malformed(format!("payload length {payload_len} too large")));
        }
        Ok((ProbeFrame { kind, seq, client_send_ns, payload: Vec::new() }, payload_len))
    }
}

/// Like `read_exact`, but reports how many bytes arrived before EOF.
fn read_full<R: Read>(r: &mut R, buf: &mut [u8]) -> io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(filled)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sizes_match_the_field_methodology() {
        let req = ProbeFrame::request(7, 123, REQUEST_FRAME_LEN);
        assert_eq!(req.encode().len(), 33_300);
        assert_eq!(req.payload.len(), 33_275);
        let ack = ProbeFrame::ack_for(&req);
        assert_eq!(ack.encode().len(), 1_024);
        assert_eq!((ack.seq, ack.client_send_ns, ack.kind), (7, 123, FrameKind::Ack));
    }

    #[test]
    fn header_layout_is_big_endian() {
        let f = ProbeFrame { kind: FrameKind::Ack, seq: 0x0102, client_send_ns: 0x0a0b, payload: vec![9, 9] };
        let bytes = f.encode();
        assert_eq!(&bytes[0..4], b"SPX1");
        assert_eq!(bytes[4], 1);
        assert_eq!(&bytes[5..13], &[0, 0, 0, 0, 0, 0, 1, 2]);
        assert_eq!(&bytes[13..21], &[0, 0, 0, 0, 0, 0, 0x0a, 0x0b]);
        assert_eq!(&bytes[21..25], &[0, 0, 0, 2]);
        assert_eq!(&bytes[25..], &[9, 9]);
    }

    #[test]
    fn malformed_inputs() {
        let mut bytes = ProbeFrame::request(1, 1, 64).encode();
        bytes[0] = b'X';
        assert!(matches!(ProbeFrame::decode(&bytes), Err(ProbeError::Malformed(_))));

        let mut bytes = ProbeFrame::request(1, 1, 64).encode();
        bytes[4] = 7;
        assert!(matches!(ProbeFrame::decode(&bytes), Err(ProbeError::Malformed(_))));

        let bytes = ProbeFrame::request(1, 1, 64).encode();
        assert!(matches!(ProbeFrame::decode(&bytes[..40]), Err(ProbeError::Truncated { .. })));
        assert!(matches!(ProbeFrame::decode(&bytes[..10]), Err(ProbeError::Truncated { .. })));

        let mut empty: &[u8] = &[];
        assert!(ProbeFrame::read_from(&mut empty).unwrap().is_none());
    }

    proptest! {
        #[test]
        fn encode_decode_roundtrip(seq: u64, ns: u64, ack: bool, payload in proptest::collection::vec(any::<u8>(), 0..512)) {
            let kind = if ack { FrameKind::Ack } else { FrameKind::Request };
            let f = ProbeFrame { kind, seq, client_send_ns: ns, payload };
            prop_assert_eq!(ProbeFrame::decode(&f.encode()).unwrap(), f);
        }
    }
}
