//! On-disk power files.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic "WBPOWER\0" | version u32 | fingerprint [32] | n u64 | count u64
//! count × ( len u32, element encoding | len u32, numerator | len u32, denominator )
//! sha256 of everything above [32]
//! ```
//!
//! Numerator and denominator are little-endian magnitudes
//! (`BigUint::to_bytes_le`). Any mismatch makes the file invisible.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use sha2::{Digest, Sha256};

const MAGIC: &[u8; 8] = b"WBPOWER\0";
const VERSION: u32 = 1;

pub fn file_name(dir: &Path, fingerprint: &[u8; 32], n: u64) -> PathBuf {
    let tag: String = fingerprint[..8].iter().map(|b| format!("{b:02x}")).collect();
    dir.join(format!("power-{tag}-{n:06}.bin"))
}

pub fn save(
    dir: &Path,
    fingerprint: &[u8; 32],
    n: u64,
    records: &[(Vec<u8>, BigRational)],
) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(fingerprint);
    buf.extend_from_slice(&n.to_le_bytes());
    buf.extend_from_slice(&(records.len() as u64).to_le_bytes());
    for (enc, q) in records {
        for field in [
            enc.clone(),
            q.numer().magnitude().to_bytes_le(),
            q.denom().magnitude().to_bytes_le(),
        ] {
            buf.extend_from_slice(&(field.len() as u32).to_le_bytes());
            buf.extend_from_slice(&field);
        }
    }
    let digest = Sha256::digest(&buf);
    buf.extend_from_slice(&digest);
    let path = file_name(dir, fingerprint, n);
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&buf)?;
        f.sync_all()?;
    }
    fs::rename(tmp, path)
}

/// Records of a valid file, or `None` if absent, corrupt or foreign.
pub fn load(dir: &Path, fingerprint: &[u8; 32], n: u64) -> Option<Vec<(Vec<u8>, BigRational)>> {
    let bytes = fs::read(file_name(dir, fingerprint, n)).ok()?;
    if bytes.len() < 32 {
        return None;
    }
    let (body, digest) = bytes.split_at(bytes.len() - 32);
    if Sha256::digest(body).as_slice() != digest {
        return None;
    }
    let mut r = Reader { bytes: body };
    if r.take(8)? != MAGIC || r.u32()? != VERSION || r.take(32)? != fingerprint || r.u64()? != n {
        return None;
    }
    let count = r.u64()?;
    let mut out = Vec::with_capacity(count.min(1 << 24) as usize);
    for _ in 0..count {
        let enc = r.field()?.to_vec();
        let num = BigUint::from_bytes_le(r.field()?);
        let den = BigUint::from_bytes_le(r.field()?);
        if den == BigUint::from(0u32) {
            return None;
        }
        out.push((enc, BigRational::new(BigInt::from(num), BigInt::from(den))));
    }
    r.bytes.is_empty().then_some(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, k: usize) -> Option<&'a [u8]> {
        if self.bytes.len() < k {
            return None;
        }
        let (head, tail) = self.bytes.split_at(k);
        self.bytes = tail;
        Some(head)
    }

    fn u32(&mut self) -> Option<u32> {
        Some(u32::from_le_bytes(self.take(4)?.try_into().ok()?))
    }

    fn u64(&mut self) -> Option<u64> {
        Some(u64::from_le_bytes(self.take(8)?.try_into().ok()?))
    }

    fn field(&mut self) -> Option<&'a [u8]> {
        let len = self.u32()? as usize;
        self.take(len)
    }
}
