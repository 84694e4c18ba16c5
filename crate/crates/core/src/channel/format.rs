//! Binary dataset format.
//!
//! ```text
//! header (40 bytes, little-endian)
//!   magic        [u8; 8]  "IGCDSET\0"
//!   version      u32
//!   k            u32
//!   n            u64
//!   generator    u8       0 gaussian, 1 geometric, 2 geometric-var-distance
//!   geometry     u8       1 if every record carries coordinates
//!   reserved     [u8; 6]
//!   seed         u64
//! record (repeated n times)
//!   h            k*k × (re f64, im f64), row-major
//!   weights      k × f64
//!   noise        k × f64
//!   p_max        f64
//!   tx, rx       k × (x f64, y f64) each, only when geometry = 1
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use super::{ChannelError, ChannelInstance, Dataset, GeneratorTag, Geometry};

pub const MAGIC: [u8; 8] = *b"IGCDSET\0";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 40;

pub fn save_dataset(d: &Dataset, path: impl AsRef<Path>) -> Result<(), ChannelError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_dataset(d, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset, ChannelError> {
    let mut r = BufReader::new(File::open(path)?);
    read_dataset(&mut r)
}

pub fn write_dataset(d: &Dataset, w: &mut impl Write) -> Result<(), ChannelError> {
    let k = d.k();
    let geometry = d.has_geometry();
    let mut header = Vec::with_capacity(HEADER_LEN);
    header.extend_from_slice(&MAGIC);
    header.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    header.extend_from_slice(&(k as u32).to_le_bytes());
    header.extend_from_slice(&(d.len() as u64).to_le_bytes());
    header.push(d.generator.code());
    header.push(u8::from(geometry));
    header.extend_from_slice(&[0u8; 6]);
    header.extend_from_slice(&d.seed.to_le_bytes());
    w.write_all(&header)?;

    let mut buf = Vec::with_capacity(record_len(k, geometry));
    for c in &d.instances {
        buf.clear();
        for z in c.h_matrix() {
            buf.extend_from_slice(&z.re.to_le_bytes());
            buf.extend_from_slice(&z.im.to_le_bytes());
        }
        for x in c.weights.iter().chain(&c.noise) {
            buf.extend_from_slice(&x.to_le_bytes());
        }
        buf.extend_from_slice(&c.p_max.to_le_bytes());
        if geometry {
            let g = c.geometry.as_ref().expect("checked by has_geometry");
            for p in g.tx.iter().chain(&g.rx) {
                buf.extend_from_slice(&p[0].to_le_bytes());
                buf.extend_from_slice(&p[1].to_le_bytes());
            }
        }
        w.write_all(&buf)?;
    }
    Ok(())
}

fn record_len(k: usize, geometry: bool) -> usize {
    let floats = 2 * k * k + 2 * k + 1 + if geometry { 4 * k } else { 0 };
    floats * 8
}

pub fn read_dataset(r: &mut impl Read) -> Result<Dataset, ChannelError> {
    let mut header = [0u8; HEADER_LEN];
    read_exact_or(r, &mut header, || {
        ChannelError::Header("file shorter than the 40-byte header".into())
    })?;
    if header[..8] != MAGIC {
        return Err(ChannelError::BadMagic);
    }
    let version = u32::from_le_bytes(header[8..12].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(ChannelError::UnsupportedVersion {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let k = u32::from_le_bytes(header[12..16].try_into().unwrap()) as usize;
    let n = u64::from_le_bytes(header[16..24].try_into().unwrap()) as usize;
    let generator = GeneratorTag::from_code(header[24])
        .ok_or_else(|| ChannelError::Header(format!("unknown generator code {}", header[24])))?;
    let geometry = match header[25] {
        0 => false,
        1 => true,
        other => return Err(ChannelError::Header(format!("bad geometry flag {other}"))),
    };
    let seed = u64::from_le_bytes(header[32..40].try_into().unwrap());
    if n > 0 && k == 0 {
        return Err(ChannelError::Header("K = 0 with records present".into()));
    }

    let len = record_len(k, geometry);
    let mut buf = vec![0u8; len];
    let mut instances = Vec::with_capacity(n.min(1 << 20));
    for record in 0..n {
        read_exact_or(r, &mut buf, || ChannelError::Record {
            record,
            reason: format!("truncated: expected {len} bytes"),
        })?;
        let mut fields = buf
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()));
        let mut next = || fields.next().expect("record length fixed by header");
        let h = (0..k * k)
            .map(|_| {
                let re = next();
                let im = next();
                Complex64::new(re, im)
            })
            .collect();
        let weights = (0..k).map(|_| next()).collect();
        let noise = (0..k).map(|_| next()).collect();
        let p_max = next();
        let geom = geometry.then(|| {
            let mut pts = || (0..k).map(|_| [next(), next()]).collect::<Vec<_>>();
            let tx = pts();
            let rx = pts();
            Geometry { tx, rx }
        });
        let c = ChannelInstance::new(k, h, weights, noise, p_max, geom).map_err(|e| {
            ChannelError::Record {
                record,
                reason: e.to_string(),
            }
        })?;
        instances.push(c);
    }
    let mut probe = [0u8; 1];
    if r.read(&mut probe)? != 0 {
        return Err(ChannelError::Header(format!(
            "trailing bytes after {n} records"
        )));
    }
    Dataset::new(instances, seed, generator)
}

fn read_exact_or(
    r: &mut impl Read,
    buf: &mut [u8],
    err: impl FnOnce() -> ChannelError,
) -> Result<(), ChannelError> {
    match r.read_exact(buf) {
        Ok(()) => Ok(()),
        Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => Err(err()),
        Err(e) => Err(e.into()),
    }
}
