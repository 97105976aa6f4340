//! Little-endian binary and CSV serialisation of homodyne records.
//!
//! ```text
//! "HTRC"  version:u32  sample_rate:f64  theta:f64  n:u64  samples:[f64; n]
//! "HREF"  freq_hz:f64  phase:f64  n:u64  samples:[f64; n]      (optional)
//! ```
//!
//! The generating seed is not part of the format; a loaded trace has seed 0.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::synth::{HomodyneTrace, ReferenceChannel};

pub const FORMAT_VERSION: u32 = 1;
const TRACE_MAGIC: &[u8; 4] = b"HTRC";
const REF_MAGIC: &[u8; 4] = b"HREF";

fn write_block(w: &mut impl Write, samples: &[f64]) -> Result<()> {
    w.write_all(&(samples.len() as u64).to_le_bytes())?;
    for v in samples {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn write_trace(w: &mut impl Write, trace: &HomodyneTrace) -> Result<()> {
    trace.validate()?;
    w.write_all(TRACE_MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&trace.sample_rate.to_le_bytes())?;
    w.write_all(&trace.theta.to_le_bytes())?;
    write_block(w, &trace.samples)?;
    if let Some(r) = &trace.reference {
        w.write_all(REF_MAGIC)?;
        w.write_all(&r.freq_hz.to_le_bytes())?;
        w.write_all(&r.phase.to_le_bytes())?;
        write_block(w, &r.samples)?;
    }
    Ok(())
}

fn read_exact<const N: usize>(r: &mut impl Read, what: &str) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Format(format!("truncated {what}")),
        _ => Error::Io(e),
    })?;
    Ok(buf)
}

fn read_f64(r: &mut impl Read, what: &str) -> Result<f64> {
    Ok(f64::from_le_bytes(read_exact::<8>(r, what)?))
}

fn read_block(r: &mut impl Read, what: &str) -> Result<Vec<f64>> {
    let n = u64::from_le_bytes(read_exact::<8>(r, what)?);
    let n = usize::try_from(n).map_err(|_| Error::Format(format!("{what} length {n} too large")))?;
    let mut bytes = Vec::new();
    r.take(8 * n as u64).read_to_end(&mut bytes)?;
    if bytes.len() != 8 * n {
        return Err(Error::Format(format!("truncated {what}: expected {n} samples")));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

pub fn read_trace(r: &mut impl Read) -> Result<HomodyneTrace> {
    if &read_exact::<4>(r, "magic")? != TRACE_MAGIC {
        return Err(Error::Format("not a trace file (bad magic)".into()));
    }
    let version = u32::from_le_bytes(read_exact::<4>(r, "version")?);
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let sample_rate = read_f64(r, "sample rate")?;
    let theta = read_f64(r, "theta")?;
    let samples = read_block(r, "samples")?;
    let mut magic = [0u8; 4];
    let reference = match r.read(&mut magic)? {
        0 => None,
        got => {
            if got < 4 {
                r.read_exact(&mut magic[got..])
                    .map_err(|_| Error::Format("truncated reference block".into()))?;
            }
            if &magic != REF_MAGIC {
                return Err(Error::Format("unexpected block after samples".into()));
            }
            let freq_hz = read_f64(r, "reference frequency")?;
            let phase = read_f64(r, "reference phase")?;
            let samples = read_block(r, "reference samples")?;
            Some(ReferenceChannel { freq_hz, phase, samples })
        }
    };
    let trace = HomodyneTrace {
        samples,
        sample_rate,
        theta,
        seed: 0,
        reference,
    };
    trace.validate().map_err(|e| Error::Format(e.to_string()))?;
    Ok(trace)
}

pub fn save(path: &Path, trace: &HomodyneTrace) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_trace(&mut w, trace)?;
    w.flush()?;
    Ok(())
}

pub fn load(path: &Path) -> Result<HomodyneTrace> {
    read_trace(&mut BufReader::new(File::open(path)?))
}

/// CSV with columns `t,sample` and `reference` when present.
pub fn to_csv(trace: &HomodyneTrace) -> String {
    let mut out = String::from(if trace.reference.is_some() { "t,sample,reference\n" } else { "t,sample\n" });
    for (k, v) in trace.samples.iter().enumerate() {
        let t = k as f64 / trace.sample_rate;
        match &trace.reference {
            Some(r) => out.push_str(&format!("{t},{v},{}\n", r.samples[k])),
            None => out.push_str(&format!("{t},{v}\n")),
        }
    }
    out
}
