//! The RAFD binary dataset container and the split index.
//!
//! Layout (little endian):
//!
//! ```text
//! "RAFD" u16 version=1 u16 reserved u32 count
//! per recording:
//!   u8 label, u8 n_antennas, u8 pad x2, u16 n_frames, u16 n_chirps,
//!   u16 n_samples, u16 pad
//!   f32 samples [antenna][frame][chirp][sample]
//!   u8 has_ground_truth, then per frame f32 x5
//!   (range, velocity, azimuth, elevation, amplitude; NaN when absent)
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array4;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::radar::{GestureClass, Recording, TargetState};

pub const MAGIC: &[u8; 4] = b"RAFD";
pub const VERSION: u16 = 1;

/// Streaming writer; the recording count is fixed up front.
pub struct DatasetWriter<W: Write> {
    inner: W,
    declared: u32,
    written: u32,
}

impl DatasetWriter<BufWriter<File>> {
    pub fn create(path: &Path, count: usize) -> Result<Self> {
        Self::new(BufWriter::new(File::create(path)?), count)
    }
}

impl<W: Write> DatasetWriter<W> {
    pub fn new(mut inner: W, count: usize) -> Result<Self> {
        let declared = u32::try_from(count)
            .map_err(|_| Error::InvalidArgument(format!("too many recordings: {count}")))?;
        inner.write_all(MAGIC)?;
        inner.write_all(&VERSION.to_le_bytes())?;
        inner.write_all(&0u16.to_le_bytes())?;
        inner.write_all(&declared.to_le_bytes())?;
        Ok(Self {
            inner,
            declared,
            written: 0,
        })
    }

    pub fn write(&mut self, rec: &Recording) -> Result<()> {
        if self.written == self.declared {
            return Err(Error::InvalidArgument("more recordings than declared".into()));
        }
        let shape = rec.samples.shape();
        let small = |v: usize, what: &str| -> Result<u16> {
            u16::try_from(v).map_err(|_| Error::InvalidArgument(format!("{what} {v} too large")))
        };
        let n_antennas = u8::try_from(shape[0])
            .map_err(|_| Error::InvalidArgument("too many antennas".into()))?;
        let w = &mut self.inner;
        w.write_all(&[rec.label.index() as u8, n_antennas, 0, 0])?;
        w.write_all(&small(shape[1], "n_frames")?.to_le_bytes())?;
        w.write_all(&small(shape[2], "n_chirps")?.to_le_bytes())?;
        w.write_all(&small(shape[3], "n_samples")?.to_le_bytes())?;
        w.write_all(&0u16.to_le_bytes())?;
        let mut buf = Vec::with_capacity(rec.samples.len() * 4);
        for v in rec.samples.iter() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
        match &rec.ground_truth {
            None => w.write_all(&[0])?,
            Some(gt) => {
                if gt.len() != shape[1] {
                    return Err(Error::dims(shape[1], gt.len()));
                }
                w.write_all(&[1])?;
                for state in gt {
                    let vals = match state {
                        Some(t) => [t.range, t.radial_velocity, t.azimuth, t.elevation, t.amplitude]
                            .map(|v| v as f32),
                        None => [f32::NAN; 5],
                    };
                    for v in vals {
                        w.write_all(&v.to_le_bytes())?;
                    }
                }
            }
        }
        self.written += 1;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        if self.written != self.declared {
            return Err(Error::InvalidArgument(format!(
                "declared {} recordings, wrote {}",
                self.declared, self.written
            )));
        }
        self.inner.flush()?;
        Ok(self.inner)
    }
}

/// Streaming reader yielding one recording at a time.
pub struct DatasetReader<R: Read> {
    inner: R,
    count: usize,
    read: usize,
}

impl DatasetReader<BufReader<File>> {
    pub fn open(path: &Path) -> Result<Self> {
        Self::new(BufReader::new(File::open(path)?))
    }
}

fn read_array<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::Format("truncated dataset".into())
        } else {
            Error::Io(e)
        }
    })?;
    Ok(buf)
}

impl<R: Read> DatasetReader<R> {
    pub fn new(mut inner: R) -> Result<Self> {
        let magic: [u8; 4] = read_array(&mut inner)?;
        if &magic != MAGIC {
            return Err(Error::Format("missing RAFD magic".into()));
        }
        let version = u16::from_le_bytes(read_array(&mut inner)?);
        if version != VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let _reserved: [u8; 2] = read_array(&mut inner)?;
        let count = u32::from_le_bytes(read_array(&mut inner)?) as usize;
        Ok(Self {
            inner,
            count,
            read: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn next_recording(&mut self) -> Result<Option<Recording>> {
        if self.read == self.count {
            return Ok(None);
        }
        let r = &mut self.inner;
        let head: [u8; 4] = read_array(r)?;
        let label = GestureClass::from_index(head[0] as usize)
            .map_err(|_| Error::Format(format!("bad label {}", head[0])))?;
        let n_antennas = head[1] as usize;
        let n_frames = u16::from_le_bytes(read_array(r)?) as usize;
        let n_chirps = u16::from_le_bytes(read_array(r)?) as usize;
        let n_samples = u16::from_le_bytes(read_array(r)?) as usize;
        let _pad: [u8; 2] = read_array(r)?;
        let total = n_antennas * n_frames * n_chirps * n_samples;
        let mut bytes = vec![0u8; total * 4];
        r.read_exact(&mut bytes)
            .map_err(|_| Error::Format("truncated sample block".into()))?;
        let values: Vec<f32> = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Format("non-finite sample".into()));
        }
        let samples = Array4::from_shape_vec((n_antennas, n_frames, n_chirps, n_samples), values)
            .map_err(|e| Error::Format(e.to_string()))?;
        let flag: [u8; 1] = read_array(r)?;
        let ground_truth = match flag[0] {
            0 => None,
            1 => {
                let mut gt = Vec::with_capacity(n_frames);
                for _ in 0..n_frames {
                    let mut v = [0f64; 5];
                    for x in v.iter_mut() {
                        *x = f32::from_le_bytes(read_array(r)?) as f64;
                    }
                    gt.push(if v.iter().any(|x| x.is_nan()) {
                        None
                    } else {
                        Some(TargetState {
                            range: v[0],
                            radial_velocity: v[1],
                            azimuth: v[2],
                            elevation: v[3],
                            amplitude: v[4],
                        })
                    });
                }
                Some(gt)
            }
            other => return Err(Error::Format(format!("bad ground-truth flag {other}"))),
        };
        self.read += 1;
        Ok(Some(Recording {
            samples,
            label,
            ground_truth,
        }))
    }
}

impl<R: Read> Iterator for DatasetReader<R> {
    type Item = Result<Recording>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_recording().transpose()
    }
}

/// Train/validation/test membership plus the recording-level class of every
/// recording in the dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndex {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
    pub labels: Vec<GestureClass>,
}

/// Percentages of the three splits.
pub const SPLIT_PERCENT: [usize; 3] = [58, 17, 25];

impl SplitIndex {
    /// Stratified split: each class is shuffled with `seed` and cut by
    /// [`SPLIT_PERCENT`] (rounded, test takes the remainder).
    pub fn stratified(labels: &[GestureClass], seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut train, mut val, mut test) = (Vec::new(), Vec::new(), Vec::new());
        for class in GestureClass::ALL {
            let mut ids: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
            ids.shuffle(&mut rng);
            let n = ids.len();
            let n_train = (n * SPLIT_PERCENT[0] + 50) / 100;
            let n_val = ((n * SPLIT_PERCENT[1] + 50) / 100).min(n - n_train);
            train.extend_from_slice(&ids[..n_train]);
            val.extend_from_slice(&ids[n_train..n_train + n_val]);
            test.extend_from_slice(&ids[n_train + n_val..]);
        }
        train.sort_unstable();
        val.sort_unstable();
        test.sort_unstable();
        Self {
            train,
            val,
            test,
            labels: labels.to_vec(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.labels.len();
        let mut seen = vec![false; n];
        for &id in self.train.iter().chain(&self.val).chain(&self.test) {
            if id >= n || std::mem::replace(&mut seen[id], true) {
                return Err(Error::Format(format!("split id {id} invalid or repeated")));
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let split: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        split.validate()?;
        Ok(split)
    }
}
