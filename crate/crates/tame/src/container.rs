//! Binary containers.
//!
//! `TAMETASK` (one task):
//! ```text
//! "TAMETASK" | u32 version | u32 N | u32 H | u32 W | N label bytes | N*3*H*W pixel bytes
//! ```
//! `TAMECKPT` (checkpoints), after the magic: `u32 version | u32 kind | u32 float width`,
//! then a kind-specific body. All integers and floats are little-endian.
//! - kind 1, expert: seven u32 layer sizes, u8 frozen flag, u32 tensor count,
//!   and per tensor `u32 rank | u32 dims.. | floats`.
//! - kind 2, feature statistics (f64): u32 count, per entry `u32 dim | u64 n | mean | covariance`.
//! - kind 3, replay buffer: `u64 capacity | u64 next step | u32 entries`, per entry
//!   `u32 expert | u64 insertion step | u32 id length | id | TAMETASK block |
//!   u32 feature dim | f32 features`.

use std::path::Path;

use tame_core::nn::{CnnConfig, ExpertCnn};
use tame_core::replay::{ReplayBuffer, ReplayEntry};
use tame_core::similarity::FeatureStats;
use tame_core::task::CHANNELS;
use tame_core::{Real, Tensor};

use crate::error::{Error, Result};

pub const TASK_MAGIC: &[u8; 8] = b"TAMETASK";
pub const CKPT_MAGIC: &[u8; 8] = b"TAMECKPT";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u32)]
pub enum CheckpointKind {
    Expert = 1,
    Stats = 2,
    Buffer = 3,
}

/// Images and labels of one task as stored in a `TAMETASK` container.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskBlock {
    pub height: usize,
    pub width: usize,
    pub labels: Vec<u8>,
    pub pixels: Vec<u8>,
}

impl TaskBlock {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn label_histogram(&self) -> [usize; 256] {
        let mut h = [0; 256];
        self.labels.iter().for_each(|&l| h[l as usize] += 1);
        h
    }
}

/// Cursor over a byte slice that reports failures with the offending offset.
pub struct Reader<'a> {
    path: &'a Path,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(path: &'a Path, bytes: &'a [u8]) -> Self {
        Reader { path, bytes, pos: 0 }
    }

    pub fn offset(&self) -> u64 {
        self.pos as u64
    }

    pub fn error(&self, message: impl Into<String>) -> Error {
        Error::format(self.path, self.pos as u64, message)
    }

    pub fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(self.error(format!(
                "truncated {what}: need {n} bytes, {} remain",
                self.bytes.len() - self.pos
            ))),
        }
    }

    pub fn magic(&mut self, magic: &[u8; 8]) -> Result<()> {
        if self.bytes.len() - self.pos < magic.len() {
            return Err(self.error("truncated header"));
        }
        if &self.bytes[self.pos..self.pos + magic.len()] != magic {
            return Err(self.error("bad magic"));
        }
        self.pos += magic.len();
        Ok(())
    }

    pub fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    pub fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    pub fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }

    pub fn floats<S: Real>(&mut self, n: usize, width: usize, what: &str) -> Result<Vec<S>> {
        let bytes = self.take(n.checked_mul(width).ok_or_else(|| self.error("size overflow"))?, what)?;
        Ok(bytes
            .chunks_exact(width)
            .map(|c| match width {
                4 => S::from_f64(f32::read_le(c) as f64),
                _ => S::from_f64(f64::read_le(c)),
            })
            .collect())
    }

    pub fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(self.error(format!("{} trailing bytes", self.bytes.len() - self.pos)));
        }
        Ok(())
    }
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&u32::try_from(v).expect("fits u32").to_le_bytes());
}

fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

// ------------------------------------------------------------------ TAMETASK

pub fn write_task_block(out: &mut Vec<u8>, height: usize, width: usize, labels: &[u8], pixels: &[u8]) {
    debug_assert_eq!(pixels.len(), labels.len() * CHANNELS * height * width);
    out.extend_from_slice(TASK_MAGIC);
    put_u32(out, VERSION as usize);
    put_u32(out, labels.len());
    put_u32(out, height);
    put_u32(out, width);
    out.extend_from_slice(labels);
    out.extend_from_slice(pixels);
}

pub fn encode_task(block: &TaskBlock) -> Vec<u8> {
    let mut out = Vec::with_capacity(24 + block.labels.len() + block.pixels.len());
    write_task_block(&mut out, block.height, block.width, &block.labels, &block.pixels);
    out
}

pub fn read_task_block(r: &mut Reader<'_>) -> Result<TaskBlock> {
    r.magic(TASK_MAGIC)?;
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(r.error(format!("unsupported TAMETASK version {version}")));
    }
    let n = r.u32("image count")? as usize;
    let height = r.u32("height")? as usize;
    let width = r.u32("width")? as usize;
    let labels = r.take(n, "labels")?.to_vec();
    let pixels = r.take(n * CHANNELS * height * width, "pixels")?.to_vec();
    Ok(TaskBlock {
        height,
        width,
        labels,
        pixels,
    })
}

pub fn decode_task(path: &Path, bytes: &[u8]) -> Result<TaskBlock> {
    let mut r = Reader::new(path, bytes);
    let block = read_task_block(&mut r)?;
    r.finish()?;
    Ok(block)
}

// ------------------------------------------------------------------ TAMECKPT

fn header(kind: CheckpointKind, float_width: usize) -> Vec<u8> {
    let mut out = CKPT_MAGIC.to_vec();
    put_u32(&mut out, VERSION as usize);
    put_u32(&mut out, kind as usize);
    put_u32(&mut out, float_width);
    out
}

fn read_header(r: &mut Reader<'_>, kind: CheckpointKind) -> Result<usize> {
    r.magic(CKPT_MAGIC)?;
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(r.error(format!("unsupported TAMECKPT version {version}")));
    }
    let k = r.u32("kind")?;
    if k != kind as u32 {
        return Err(r.error(format!("checkpoint kind {k}, expected {}", kind as u32)));
    }
    let width = r.u32("float width")? as usize;
    if width != 4 && width != 8 {
        return Err(r.error(format!("float width {width}")));
    }
    Ok(width)
}

pub fn encode_expert<S: Real>(expert: &ExpertCnn<S>) -> Vec<u8> {
    let c = expert.config();
    let mut out = header(CheckpointKind::Expert, S::BYTES);
    for v in [c.in_channels, c.image_size, c.channels[0], c.channels[1], c.channels[2], c.dense_hidden, c.feature_dim] {
        put_u32(&mut out, v);
    }
    out.push(expert.is_frozen() as u8);
    put_u32(&mut out, expert.params().len());
    for t in expert.params() {
        put_u32(&mut out, t.shape().len());
        t.shape().iter().for_each(|&d| put_u32(&mut out, d));
        t.data().iter().for_each(|&v| v.write_le(&mut out));
    }
    out
}

/// Decodes an expert checkpoint; the stored float width must match `S`.
pub fn decode_expert<S: Real>(path: &Path, bytes: &[u8]) -> Result<ExpertCnn<S>> {
    let mut r = Reader::new(path, bytes);
    let width = read_header(&mut r, CheckpointKind::Expert)?;
    if width != S::BYTES {
        return Err(r.error(format!("checkpoint stores {width}-byte floats, run uses {}", S::BYTES)));
    }
    let mut dims = [0usize; 7];
    for d in &mut dims {
        *d = r.u32("layer size")? as usize;
    }
    let config = CnnConfig {
        in_channels: dims[0],
        image_size: dims[1],
        channels: [dims[2], dims[3], dims[4]],
        dense_hidden: dims[5],
        feature_dim: dims[6],
    };
    let frozen = r.u8("frozen flag")? != 0;
    let count = r.u32("tensor count")? as usize;
    let mut params = Vec::with_capacity(count);
    for _ in 0..count {
        let rank = r.u32("rank")? as usize;
        let shape = (0..rank).map(|_| r.u32("dim").map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        let n = shape.iter().product();
        params.push(Tensor::from_vec(&shape, r.floats(n, width, "tensor data")?)?);
    }
    r.finish()?;
    Ok(ExpertCnn::from_params(config, params, frozen)?)
}

pub fn encode_stats(stats: &[FeatureStats]) -> Vec<u8> {
    let mut out = header(CheckpointKind::Stats, 8);
    put_u32(&mut out, stats.len());
    for s in stats {
        put_u32(&mut out, s.dim());
        put_u64(&mut out, s.n_samples as u64);
        s.mean.iter().chain(&s.covariance).for_each(|&v| v.write_le(&mut out));
    }
    out
}

pub fn decode_stats(path: &Path, bytes: &[u8]) -> Result<Vec<FeatureStats>> {
    let mut r = Reader::new(path, bytes);
    let width = read_header(&mut r, CheckpointKind::Stats)?;
    if width != 8 {
        return Err(r.error("feature statistics must be stored as 64-bit floats"));
    }
    let count = r.u32("stats count")? as usize;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let d = r.u32("dim")? as usize;
        let n_samples = r.u64("sample count")? as usize;
        let mean = r.floats::<f64>(d, 8, "mean")?;
        let covariance = r.floats::<f64>(d * d, 8, "covariance")?;
        out.push(FeatureStats {
            mean,
            covariance,
            n_samples,
        });
    }
    r.finish()?;
    Ok(out)
}

/// Serializes every buffer entry with its expert key; features are narrowed to f32.
pub fn encode_buffer<S: Real>(buffer: &ReplayBuffer<S>) -> Vec<u8> {
    let mut out = header(CheckpointKind::Buffer, 4);
    put_u64(&mut out, buffer.capacity() as u64);
    put_u64(&mut out, buffer.next_step());
    let entries: Vec<(usize, &ReplayEntry<S>)> = buffer
        .experts()
        .flat_map(|k| buffer.retrieve(k).iter().map(move |e| (k, e)))
        .collect();
    put_u32(&mut out, entries.len());
    for (expert, e) in entries {
        put_u32(&mut out, expert);
        put_u64(&mut out, e.insertion_step);
        put_u32(&mut out, e.task_id.len());
        out.extend_from_slice(e.task_id.as_bytes());
        write_task_block(&mut out, e.height, e.width, &e.labels, &e.pixels);
        put_u32(&mut out, e.features.row_len());
        e.features.data().iter().for_each(|&v| (v.as_f64() as f32).write_le(&mut out));
    }
    out
}

pub fn decode_buffer<S: Real>(path: &Path, bytes: &[u8]) -> Result<ReplayBuffer<S>> {
    let mut r = Reader::new(path, bytes);
    let width = read_header(&mut r, CheckpointKind::Buffer)?;
    if width != 4 {
        return Err(r.error("buffer features must be stored as 32-bit floats"));
    }
    let capacity = r.u64("capacity")? as usize;
    let next_step = r.u64("next step")?;
    let count = r.u32("entry count")? as usize;
    let mut buffer = ReplayBuffer::new(capacity);
    for _ in 0..count {
        let expert = r.u32("expert")? as usize;
        let insertion_step = r.u64("insertion step")?;
        let id_len = r.u32("id length")? as usize;
        let task_id = String::from_utf8(r.take(id_len, "task id")?.to_vec()).map_err(|_| r.error("task id is not UTF-8"))?;
        let block = read_task_block(&mut r)?;
        let fd = r.u32("feature dim")? as usize;
        let features = Tensor::from_vec(&[block.len(), fd], r.floats(block.len() * fd, 4, "features")?)?;
        let entry = ReplayEntry {
            task_id,
            height: block.height,
            width: block.width,
            pixels: block.pixels,
            labels: block.labels,
            features,
            insertion_step,
        };
        buffer.restore(expert, entry)?;
    }
    r.finish()?;
    // the newest entry is never evicted, so it always determines the next step
    if buffer.next_step() != next_step {
        return Err(r.error(format!(
            "recorded next step {next_step} disagrees with the stored entries ({})",
            buffer.next_step()
        )));
    }
    Ok(buffer)
}

#[cfg(test)]
mod tests {
    use super::*;
    use tame_core::rng;
    use tame_core::task::{Task, TaskRole};

    fn block(n: usize) -> TaskBlock {
        TaskBlock {
            height: 2,
            width: 3,
            labels: (0..n).map(|i| (i % 2) as u8).collect(),
            pixels: (0..n * 18).map(|i| (i * 13 % 256) as u8).collect(),
        }
    }

    #[test]
    fn task_round_trip_and_layout() {
        let b = block(4);
        let bytes = encode_task(&b);
        assert_eq!(&bytes[..8], TASK_MAGIC);
        assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 4);
        assert_eq!(bytes.len(), 8 + 16 + 4 + 4 * 18);
        assert_eq!(decode_task(Path::new("t"), &bytes).unwrap(), b);
    }

    #[test]
    fn task_errors_carry_offsets() {
        let mut bytes = encode_task(&block(2));
        let short = &bytes[..bytes.len() - 1];
        match decode_task(Path::new("t"), short).unwrap_err() {
            Error::Format { offset, message, .. } => {
                assert_eq!(offset, 24 + 2);
                assert!(message.contains("truncated"));
            }
            e => panic!("{e}"),
        }
        bytes[0] = b'X';
        let err = decode_task(Path::new("t"), &bytes).unwrap_err();
        assert!(err.to_string().contains("bad magic"), "{err}");
    }

    #[test]
    fn expert_round_trip_is_bit_exact() {
        let cfg = CnnConfig::default().with_image_size(8);
        let mut e = ExpertCnn::<f32>::new(cfg, &mut rng::stream(1, &[])).unwrap();
        e.freeze();
        let bytes = encode_expert(&e);
        let back = decode_expert::<f32>(Path::new("e"), &bytes).unwrap();
        assert_eq!(back, e);
        assert_eq!(back.content_hash(), e.content_hash());
        assert!(decode_expert::<f64>(Path::new("e"), &bytes).is_err());
    }

    #[test]
    fn stats_round_trip() {
        let s = vec![FeatureStats {
            mean: vec![1.5, -2.0],
            covariance: vec![1.0, 0.25, 0.25, 3.0],
            n_samples: 17,
        }];
        assert_eq!(decode_stats(Path::new("s"), &encode_stats(&s)).unwrap(), s);
    }

    #[test]
    fn buffer_round_trip() {
        let mut buf = ReplayBuffer::<f32>::new(10);
        for (i, expert) in [(0, 2), (1, 0), (2, 2), (3, 1)] {
            let task = Task {
                task_id: format!("t{i}"),
                role: TaskRole::Lifelong,
                height: 2,
                width: 3,
                pixels: vec![i as u8; 3 * 18],
                labels: vec![0, 1, 1],
                class_pair: (0, 1),
                archetype: None,
            };
            let features = Tensor::from_vec(&[3, 2], vec![0.5, 1.0, 1.5, 2.0, 2.5, i as f32]).unwrap();
            buf.store(expert, ReplayEntry::new(&task, features).unwrap()).unwrap();
        }
        let bytes = encode_buffer(&buf);
        let back = decode_buffer::<f32>(Path::new("b"), &bytes).unwrap();
        assert_eq!(back, buf);
    }
}
