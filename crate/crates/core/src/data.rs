//! MNIST loading from IDX files, raw or gzipped.
//!
//! IDX headers are big-endian: a 4-byte magic (`0x00000803` images, `0x00000801` labels),
//! then one 32-bit count per dimension. Pixels are scaled by `1/255` into `[0, 1]`.

use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;

use crate::error::{PnnError, Result};
use crate::linalg::Vector;

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;
pub const IMAGE_SIDE: usize = 28;
pub const IMAGE_PIXELS: usize = IMAGE_SIDE * IMAGE_SIDE;
pub const NUM_CLASSES: usize = 10;

pub const TRAIN_IMAGES: &str = "train-images-idx3-ubyte";
pub const TRAIN_LABELS: &str = "train-labels-idx1-ubyte";
pub const EVAL_IMAGES: &str = "t10k-images-idx3-ubyte";
pub const EVAL_LABELS: &str = "t10k-labels-idx1-ubyte";

#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub pixels: Vec<f64>,
    pub label: u8,
}

impl Example {
    /// Checks pixel range and label; width is left to the model (synthetic tests use small inputs).
    pub fn new(pixels: Vec<f64>, label: u8) -> Result<Self> {
        if usize::from(label) >= NUM_CLASSES {
            return Err(PnnError::InvalidArgument(format!("label {label} outside 0..=9")));
        }
        if let Some(p) = pixels.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(PnnError::InvalidArgument(format!("pixel {p} outside [0, 1]")));
        }
        Ok(Example { pixels, label })
    }
}

#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub train: Vec<Example>,
    pub eval: Vec<Example>,
}

pub fn one_hot(label: u8) -> Result<Vector> {
    target_vector(label, NUM_CLASSES)
}

pub(crate) fn target_vector(label: u8, width: usize) -> Result<Vector> {
    let idx = usize::from(label);
    if idx >= width {
        return Err(PnnError::InvalidArgument(format!(
            "label {label} does not fit an output layer of width {width}"
        )));
    }
    let mut v = Vector::zeros(width);
    v[idx] = 1.0;
    Ok(v)
}

fn read_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let mut raw = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut raw))
        .map_err(|e| PnnError::io(path, e))?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| PnnError::io(path, e))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

struct IdxReader<'a> {
    path: &'a Path,
    bytes: &'a [u8],
}

impl IdxReader<'_> {
    fn err(&self, offset: usize, message: impl Into<String>) -> PnnError {
        PnnError::IdxFormat {
            path: self.path.to_path_buf(),
            offset,
            message: message.into(),
        }
    }

    fn u32_at(&self, offset: usize) -> Result<u32> {
        self.bytes
            .get(offset..offset + 4)
            .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
            .ok_or_else(|| self.err(offset, "truncated header"))
    }

    fn expect_magic(&self, expected: u32) -> Result<()> {
        let magic = self.u32_at(0)?;
        if magic != expected {
            return Err(self.err(
                0,
                format!("bad magic number {magic:#010x}, expected {expected:#010x}"),
            ));
        }
        Ok(())
    }

    fn payload(&self, offset: usize, len: usize) -> Result<&[u8]> {
        self.bytes.get(offset..offset + len).ok_or_else(|| {
            self.err(
                self.bytes.len(),
                format!("truncated payload: need {len} bytes from offset {offset}"),
            )
        })
    }
}

/// Loads a 28x28 image file; each image is flattened row-major.
pub fn load_idx_images(path: impl AsRef<Path>) -> Result<Vec<Vec<f64>>> {
    let path = path.as_ref();
    let bytes = read_maybe_gz(path)?;
    let r = IdxReader { path, bytes: &bytes };
    r.expect_magic(IMAGE_MAGIC)?;
    let count = r.u32_at(4)? as usize;
    let rows = r.u32_at(8)? as usize;
    let cols = r.u32_at(12)? as usize;
    if rows != IMAGE_SIDE || cols != IMAGE_SIDE {
        return Err(r.err(8, format!("expected 28x28 images, found {rows}x{cols}")));
    }
    let data = r.payload(16, count * IMAGE_PIXELS)?;
    Ok(data
        .chunks_exact(IMAGE_PIXELS)
        .map(|img| img.iter().map(|&b| f64::from(b) / 255.0).collect())
        .collect())
}

pub fn load_idx_labels(path: impl AsRef<Path>) -> Result<Vec<u8>> {
    let path = path.as_ref();
    let bytes = read_maybe_gz(path)?;
    let r = IdxReader { path, bytes: &bytes };
    r.expect_magic(LABEL_MAGIC)?;
    let count = r.u32_at(4)? as usize;
    let data = r.payload(8, count)?;
    if let Some(pos) = data.iter().position(|&l| usize::from(l) >= NUM_CLASSES) {
        return Err(r.err(8 + pos, format!("label {} outside 0..=9", data[pos])));
    }
    Ok(data.to_vec())
}

/// Writes raw (uncompressed) 28x28 images.
pub fn write_idx_images(path: impl AsRef<Path>, images: &[Vec<u8>]) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::with_capacity(16 + images.len() * IMAGE_PIXELS);
    buf.extend_from_slice(&IMAGE_MAGIC.to_be_bytes());
    buf.extend_from_slice(&(images.len() as u32).to_be_bytes());
    buf.extend_from_slice(&(IMAGE_SIDE as u32).to_be_bytes());
    buf.extend_from_slice(&(IMAGE_SIDE as u32).to_be_bytes());
    for img in images {
        if img.len() != IMAGE_PIXELS {
            return Err(PnnError::InvalidArgument(format!(
                "image has {} bytes, expected {IMAGE_PIXELS}",
                img.len()
            )));
        }
        buf.extend_from_slice(img);
    }
    File::create(path)
        .and_then(|mut f| f.write_all(&buf))
        .map_err(|e| PnnError::io(path, e))
}

pub fn write_idx_labels(path: impl AsRef<Path>, labels: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::with_capacity(8 + labels.len());
    buf.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    buf.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    buf.extend_from_slice(labels);
    File::create(path)
        .and_then(|mut f| f.write_all(&buf))
        .map_err(|e| PnnError::io(path, e))
}

fn zip_examples(images: Vec<Vec<f64>>, labels: Vec<u8>, what: &str) -> Result<Vec<Example>> {
    if images.len() != labels.len() {
        return Err(PnnError::InvalidArgument(format!(
            "{what}: {} images but {} labels",
            images.len(),
            labels.len()
        )));
    }
    images
        .into_iter()
        .zip(labels)
        .map(|(pixels, label)| Example::new(pixels, label))
        .collect()
}

/// Pairs images with labels. `train_cap` truncates the training list (prefix, before any shuffle).
pub fn make_dataset(
    train_images: Vec<Vec<f64>>,
    train_labels: Vec<u8>,
    eval_images: Vec<Vec<f64>>,
    eval_labels: Vec<u8>,
    train_cap: Option<usize>,
) -> Result<Dataset> {
    let mut train = zip_examples(train_images, train_labels, "train")?;
    let eval = zip_examples(eval_images, eval_labels, "eval")?;
    if let Some(cap) = train_cap {
        train.truncate(cap);
    }
    Ok(Dataset { train, eval })
}

/// Finds `name` or `name.gz` in `dir`.
pub fn locate(dir: &Path, name: &str) -> Result<PathBuf> {
    let plain = dir.join(name);
    if plain.is_file() {
        return Ok(plain);
    }
    let gz = dir.join(format!("{name}.gz"));
    if gz.is_file() {
        return Ok(gz);
    }
    Err(PnnError::io(
        plain,
        std::io::Error::new(std::io::ErrorKind::NotFound, "MNIST file not found (also tried .gz)"),
    ))
}

/// Loads the standard four MNIST files from `dir`.
///
/// `train_size` and `train_cap` both truncate the 60000-example training split; the smaller wins.
pub fn load_mnist(dir: impl AsRef<Path>, train_size: Option<usize>, train_cap: Option<usize>) -> Result<Dataset> {
    let dir = dir.as_ref();
    let cap = match (train_size, train_cap) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, b) => a.or(b),
    };
    make_dataset(
        load_idx_images(locate(dir, TRAIN_IMAGES)?)?,
        load_idx_labels(locate(dir, TRAIN_LABELS)?)?,
        load_idx_images(locate(dir, EVAL_IMAGES)?)?,
        load_idx_labels(locate(dir, EVAL_LABELS)?)?,
        cap,
    )
}

/// Loads only the 10000-example evaluation split from `dir`.
pub fn load_mnist_eval(dir: impl AsRef<Path>) -> Result<Vec<Example>> {
    let dir = dir.as_ref();
    zip_examples(
        load_idx_images(locate(dir, EVAL_IMAGES)?)?,
        load_idx_labels(locate(dir, EVAL_LABELS)?)?,
        "eval",
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use tempfile::tempdir;

    #[test]
    fn one_hot_basis_vectors() {
        let v = one_hot(0).unwrap();
        assert_eq!(v.as_slice(), &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let v = one_hot(9).unwrap();
        assert_eq!(v[9], 1.0);
        assert_eq!(v.iter().sum::<f64>(), 1.0);
        let v = one_hot(3).unwrap();
        assert!(v.iter().enumerate().all(|(i, &x)| x == if i == 3 { 1.0 } else { 0.0 }));
        assert!(one_hot(10).is_err());
    }

    #[test]
    fn zero_image_and_scale_endpoint() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("img");
        let mut bright = vec![0u8; IMAGE_PIXELS];
        bright[5] = 255;
        write_idx_images(&p, &[vec![0u8; IMAGE_PIXELS], bright]).unwrap();
        let imgs = load_idx_images(&p).unwrap();
        assert_eq!(imgs.len(), 2);
        assert!(imgs[0].iter().all(|&x| x == 0.0));
        assert_eq!(imgs[0].len(), 784);
        assert_eq!(imgs[1][5], 1.0);
    }

    #[test]
    fn single_label_and_out_of_range_label() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("lbl");
        write_idx_labels(&p, &[7]).unwrap();
        assert_eq!(load_idx_labels(&p).unwrap(), vec![7]);

        write_idx_labels(&p, &[1, 10]).unwrap();
        match load_idx_labels(&p).unwrap_err() {
            PnnError::IdxFormat { offset, .. } => assert_eq!(offset, 9),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn bad_magic_truncation_and_dims() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("x");
        write_idx_labels(&p, &[1, 2]).unwrap();
        assert!(matches!(load_idx_images(&p), Err(PnnError::IdxFormat { offset: 0, .. })));

        write_idx_images(&p, &[vec![3u8; IMAGE_PIXELS]]).unwrap();
        let mut bytes = std::fs::read(&p).unwrap();
        bytes.truncate(100);
        std::fs::write(&p, &bytes).unwrap();
        assert!(matches!(load_idx_images(&p), Err(PnnError::IdxFormat { offset: 100, .. })));

        let mut hdr = Vec::new();
        for v in [IMAGE_MAGIC, 1, 27, 28] {
            hdr.extend_from_slice(&v.to_be_bytes());
        }
        hdr.extend(vec![0u8; 27 * 28]);
        std::fs::write(&p, &hdr).unwrap();
        assert!(matches!(load_idx_images(&p), Err(PnnError::IdxFormat { offset: 8, .. })));
    }

    #[test]
    fn gzip_is_detected_by_magic_bytes() {
        use flate2::write::GzEncoder;
        let dir = tempdir().unwrap();
        let raw = dir.path().join("l");
        write_idx_labels(&raw, &[4, 2, 0]).unwrap();
        let gz = dir.path().join("l.gz");
        let mut enc = GzEncoder::new(Vec::new(), flate2::Compression::default());
        enc.write_all(&std::fs::read(&raw).unwrap()).unwrap();
        std::fs::write(&gz, enc.finish().unwrap()).unwrap();
        assert_eq!(load_idx_labels(&gz).unwrap(), vec![4, 2, 0]);
    }

    #[test]
    fn make_dataset_cap_and_mismatch() {
        let imgs = |n| vec![vec![0.0; 4]; n];
        let ds = make_dataset(imgs(6), vec![1; 6], imgs(2), vec![0; 2], Some(5)).unwrap();
        assert_eq!(ds.train.len(), 5);
        assert_eq!(ds.eval.len(), 2);
        let ds = make_dataset(imgs(6), vec![1; 6], imgs(2), vec![0; 2], None).unwrap();
        assert_eq!(ds.train.len(), 6);
        assert!(make_dataset(imgs(3), vec![1; 2], imgs(2), vec![0; 2], None).is_err());
        assert!(make_dataset(imgs(3), vec![1; 3], imgs(2), vec![0; 1], None).is_err());
    }

    #[test]
    fn locate_prefers_raw_then_gz() {
        let dir = tempdir().unwrap();
        assert!(locate(dir.path(), "a").is_err());
        std::fs::write(dir.path().join("a.gz"), b"").unwrap();
        assert_eq!(locate(dir.path(), "a").unwrap(), dir.path().join("a.gz"));
        std::fs::write(dir.path().join("a"), b"").unwrap();
        assert_eq!(locate(dir.path(), "a").unwrap(), dir.path().join("a"));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn idx_round_trip_is_bit_exact(bytes in proptest::collection::vec(any::<u8>(), IMAGE_PIXELS * 2)) {
            let dir = tempdir().unwrap();
            let p = dir.path().join("imgs");
            let imgs: Vec<Vec<u8>> = bytes.chunks(IMAGE_PIXELS).map(<[u8]>::to_vec).collect();
            write_idx_images(&p, &imgs).unwrap();
            let loaded = load_idx_images(&p).unwrap();
            for (img, back) in imgs.iter().zip(&loaded) {
                for (&b, &x) in img.iter().zip(back) {
                    prop_assert_eq!(x.to_bits(), (f64::from(b) / 255.0).to_bits());
                    prop_assert_eq!((x * 255.0).round() as u8, b);
                }
            }
        }

        #[test]
        fn normalization_preserves_order(a in any::<u8>(), b in any::<u8>()) {
            let (pa, pb) = (f64::from(a) / 255.0, f64::from(b) / 255.0);
            prop_assert_eq!(a < b, pa < pb);
        }
    }
}
