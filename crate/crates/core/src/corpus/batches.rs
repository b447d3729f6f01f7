//! Seeded mini-batch streams over a manifest split.

use std::path::Path;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::{CorpusError, CorpusManifest, SampleRecord, Split};
use crate::net::Tensor;
use crate::seed::rng_for;

#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    /// N×3×H×W with values in [0, 1].
    pub images: Tensor<f32>,
    /// Five-class label indices.
    pub labels: Vec<usize>,
    pub sample_ids: Vec<String>,
}

/// Permutation of `0..n` for one epoch, a function of `(shuffle_seed, epoch)`.
pub fn epoch_order(n: usize, shuffle_seed: u64, epoch: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_for("epoch", &[shuffle_seed, epoch]));
    order
}

/// Decodes an image to RGB8, insisting on the expected `(width, height)`.
pub fn decode_frame(path: &Path, size: (u32, u32)) -> Result<Vec<u8>, String> {
    let img = image::open(path).map_err(|e| e.to_string())?.into_rgb8();
    if img.dimensions() != size {
        return Err(format!("image is {:?}, corpus expects {:?}", img.dimensions(), size));
    }
    Ok(img.into_raw())
}

fn decode_record(manifest: &CorpusManifest, r: &SampleRecord) -> Result<Vec<u8>, CorpusError> {
    let path = manifest.image_path(r);
    decode_frame(&path, manifest.config.image_size).map_err(|reason| CorpusError::Decode {
        sample_id: r.sample_id.clone(),
        path,
        reason,
    })
}

/// Packs RGB8 frames into an NCHW tensor scaled by 1/255.
pub fn frames_to_tensor(frames: &[&[u8]], size: (u32, u32)) -> Tensor<f32> {
    let (w, h) = (size.0 as usize, size.1 as usize);
    let plane = w * h;
    let mut data = vec![0.0f32; frames.len() * 3 * plane];
    for (dst, src) in data.chunks_mut(3 * plane).zip(frames) {
        assert_eq!(src.len(), 3 * plane, "frame size");
        for (p, px) in src.chunks_exact(3).enumerate() {
            for c in 0..3 {
                dst[c * plane + p] = px[c] as f32 / 255.0;
            }
        }
    }
    Tensor::from_vec(&[frames.len(), 3, h, w], data).expect("batch shape")
}

/// Lazily decoding batch iterator; see [`load_batches`].
pub struct BatchStream<'a> {
    manifest: &'a CorpusManifest,
    order: Vec<usize>,
    batch_size: usize,
    pos: usize,
}

impl Iterator for BatchStream<'_> {
    type Item = Result<Batch, CorpusError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.pos >= self.order.len() {
            return None;
        }
        let end = (self.pos + self.batch_size).min(self.order.len());
        let records: Vec<&SampleRecord> = self.order[self.pos..end].iter().map(|&i| &self.manifest.records[i]).collect();
        self.pos = end;
        let decoded: Result<Vec<Vec<u8>>, CorpusError> = records.par_iter().map(|r| decode_record(self.manifest, r)).collect();
        Some(decoded.map(|frames| {
            let refs: Vec<&[u8]> = frames.iter().map(Vec::as_slice).collect();
            Batch {
                images: frames_to_tensor(&refs, self.manifest.config.image_size),
                labels: records.iter().map(|r| r.class.index()).collect(),
                sample_ids: records.iter().map(|r| r.sample_id.clone()).collect(),
            }
        }))
    }
}

/// Batches of `split` in the seeded order for `epoch`; the last batch may
/// be short.
pub fn load_batches(
    manifest: &CorpusManifest,
    split: Split,
    batch_size: usize,
    shuffle_seed: u64,
    epoch: u64,
) -> Result<BatchStream<'_>, CorpusError> {
    if batch_size == 0 {
        return Err(CorpusError::Parameter("batch size must be at least 1".into()));
    }
    let members: Vec<usize> = (0..manifest.records.len()).filter(|&i| manifest.records[i].split == split).collect();
    let order = epoch_order(members.len(), shuffle_seed, epoch).into_iter().map(|i| members[i]).collect();
    Ok(BatchStream { manifest, order, batch_size, pos: 0 })
}

/// A split decoded once into memory. Produces the same batches as
/// [`load_batches`] without re-reading files every epoch.
#[derive(Debug, Clone, Default)]
pub struct SplitData {
    pub image_size: (u32, u32),
    pub sample_ids: Vec<String>,
    pub object_ids: Vec<u32>,
    pub view_ids: Vec<u32>,
    pub labels: Vec<usize>,
    frames: Vec<Vec<u8>>,
}

impl SplitData {
    pub fn load(manifest: &CorpusManifest, split: Split) -> Result<Self, CorpusError> {
        let records: Vec<&SampleRecord> = manifest.records_in(split).collect();
        let frames = records.par_iter().map(|r| decode_record(manifest, r)).collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            image_size: manifest.config.image_size,
            sample_ids: records.iter().map(|r| r.sample_id.clone()).collect(),
            object_ids: records.iter().map(|r| r.object_id).collect(),
            view_ids: records.iter().map(|r| r.view_id).collect(),
            labels: records.iter().map(|r| r.class.index()).collect(),
            frames,
        })
    }

    pub fn empty(image_size: (u32, u32)) -> Self {
        Self { image_size, ..Self::default() }
    }

    pub fn push(&mut self, sample_id: String, object_id: u32, view_id: u32, label: usize, rgb: Vec<u8>) {
        assert_eq!(rgb.len(), (self.image_size.0 * self.image_size.1 * 3) as usize, "frame size");
        self.sample_ids.push(sample_id);
        self.object_ids.push(object_id);
        self.view_ids.push(view_id);
        self.labels.push(label);
        self.frames.push(rgb);
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frame(&self, i: usize) -> &[u8] {
        &self.frames[i]
    }

    pub fn batch_of(&self, indices: &[usize]) -> Batch {
        let refs: Vec<&[u8]> = indices.iter().map(|&i| self.frames[i].as_slice()).collect();
        Batch {
            images: frames_to_tensor(&refs, self.image_size),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            sample_ids: indices.iter().map(|&i| self.sample_ids[i].clone()).collect(),
        }
    }

    /// Seeded epoch order, identical to [`load_batches`].
    pub fn batches(&self, batch_size: usize, shuffle_seed: u64, epoch: u64) -> impl Iterator<Item = Batch> + '_ {
        let order = epoch_order(self.len(), shuffle_seed, epoch);
        let chunks: Vec<Vec<usize>> = order.chunks(batch_size.max(1)).map(<[usize]>::to_vec).collect();
        chunks.into_iter().map(move |idx| self.batch_of(&idx))
    }

    /// Stored order, for evaluation.
    pub fn sequential_batches(&self, batch_size: usize) -> impl Iterator<Item = (Vec<usize>, Batch)> + '_ {
        let idx: Vec<usize> = (0..self.len()).collect();
        let chunks: Vec<Vec<usize>> = idx.chunks(batch_size.max(1)).map(<[usize]>::to_vec).collect();
        chunks.into_iter().map(move |i| {
            let b = self.batch_of(&i);
            (i, b)
        })
    }
}
