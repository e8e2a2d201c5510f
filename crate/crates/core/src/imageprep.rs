//! Contrast transforms for 8-bit grayscale images: global histogram
//! equalization and contrast-limited adaptive histogram equalization (CLAHE),
//! plus binary PGM (P5) input/output.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const LEVELS: usize = 256;

pub const DEFAULT_TILES: (usize, usize) = (8, 8);
pub const DEFAULT_CLIP_LIMIT: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    /// Row-major intensities.
    pub pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(Error::Image(format!(
                "{width}x{height} image needs {} pixels, got {}",
                width * height,
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> u8) -> Self {
        let pixels = (0..height)
            .flat_map(|y| (0..width).map(move |x| (x, y)))
            .map(|(x, y)| f(x, y))
            .collect();
        Self {
            width,
            height,
            pixels,
        }
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }
}

/// Output level for every input level.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistogramMapping {
    pub lut: Vec<u8>,
}

impl HistogramMapping {
    pub fn apply(&self, img: &GrayImage) -> GrayImage {
        GrayImage {
            width: img.width,
            height: img.height,
            pixels: img.pixels.iter().map(|&p| self.lut[usize::from(p)]).collect(),
        }
    }

    pub fn is_monotone(&self) -> bool {
        self.lut.windows(2).all(|w| w[0] <= w[1])
    }
}

pub fn histogram(img: &GrayImage) -> Result<[u64; LEVELS]> {
    if img.is_empty() {
        return Err(Error::Empty("image"));
    }
    let mut h = [0u64; LEVELS];
    for &p in &img.pixels {
        h[usize::from(p)] += 1;
    }
    Ok(h)
}

fn round_half_up(v: f64) -> u8 {
    (v + 0.5).floor().clamp(0.0, 255.0) as u8
}

/// `s_k = round((L - 1) / total * sum_{j<=k} h_j)` with round-half-up.
fn mapping_from_counts(counts: &[f64; LEVELS], total: f64) -> HistogramMapping {
    let mut cum = 0.0;
    let lut = counts
        .iter()
        .map(|&c| {
            cum += c;
            round_half_up((LEVELS - 1) as f64 * cum / total)
        })
        .collect();
    HistogramMapping { lut }
}

pub fn equalization_mapping(img: &GrayImage) -> Result<HistogramMapping> {
    let h = histogram(img)?;
    let counts = h.map(|c| c as f64);
    Ok(mapping_from_counts(&counts, img.pixels.len() as f64))
}

pub fn equalize(img: &GrayImage) -> Result<(GrayImage, HistogramMapping)> {
    let map = equalization_mapping(img)?;
    Ok((map.apply(img), map))
}

/// Pixel range `[start, end)` of each of `n` tiles along an axis of `len` pixels.
fn tile_bounds(len: usize, n: usize) -> Vec<(usize, usize)> {
    (0..n).map(|t| (t * len / n, (t + 1) * len / n)).collect()
}

/// Clipped, redistributed histogram mapping for one tile.
fn tile_mapping(img: &GrayImage, xs: (usize, usize), ys: (usize, usize), clip_limit: f64) -> HistogramMapping {
    let mut counts = [0.0f64; LEVELS];
    for y in ys.0..ys.1 {
        for x in xs.0..xs.1 {
            counts[usize::from(img.get(x, y))] += 1.0;
        }
    }
    let total = ((xs.1 - xs.0) * (ys.1 - ys.0)) as f64;
    let limit = clip_limit * total / LEVELS as f64;
    let mut excess = 0.0;
    for c in counts.iter_mut() {
        if *c > limit {
            excess += *c - limit;
            *c = limit;
        }
    }
    if excess > 0.0 {
        let share = excess / LEVELS as f64;
        counts.iter_mut().for_each(|c| *c += share);
    }
    mapping_from_counts(&counts, total)
}

/// Position of `p` between neighbouring tile centers: `(lower, upper, weight of upper)`.
/// Outside the first and last centers the nearest tile is used alone.
fn interpolation_cell(p: f64, centers: &[f64]) -> (usize, usize, f64) {
    let last = centers.len() - 1;
    if p <= centers[0] {
        return (0, 0, 0.0);
    }
    if p >= centers[last] {
        return (last, last, 0.0);
    }
    let hi = centers.partition_point(|&c| c <= p).min(last);
    let lo = hi - 1;
    let w = (p - centers[lo]) / (centers[hi] - centers[lo]);
    (lo, hi, w)
}

/// Contrast-limited adaptive histogram equalization.
///
/// The image is split into `tiles.0 × tiles.1` (columns × rows) tiles. Each
/// tile histogram is clipped at `clip_limit * tile_pixels / 256`, the clipped
/// mass is spread evenly over all levels and the tile's equalization mapping
/// is built. Every output pixel bilinearly blends the mappings of the four
/// tiles whose centers surround it.
pub fn clahe(img: &GrayImage, tiles: (usize, usize), clip_limit: f64) -> Result<GrayImage> {
    let (tx, ty) = tiles;
    if img.is_empty() {
        return Err(Error::Empty("image"));
    }
    if tx == 0 || ty == 0 {
        return Err(Error::InvalidParameter("tile counts must be at least 1".into()));
    }
    if !(clip_limit > 0.0) {
        return Err(Error::InvalidParameter("clip limit must be positive".into()));
    }
    if tx > img.width || ty > img.height {
        return Err(Error::Image(format!(
            "{tx}x{ty} tile grid is larger than the {}x{} image",
            img.width, img.height
        )));
    }
    let xb = tile_bounds(img.width, tx);
    let yb = tile_bounds(img.height, ty);
    let maps: Vec<HistogramMapping> = yb
        .iter()
        .flat_map(|&ys| xb.iter().map(move |&xs| (xs, ys)))
        .map(|(xs, ys)| tile_mapping(img, xs, ys, clip_limit))
        .collect();
    let center = |(a, b): (usize, usize)| (a + b) as f64 / 2.0 - 0.5;
    let cx: Vec<f64> = xb.iter().copied().map(center).collect();
    let cy: Vec<f64> = yb.iter().copied().map(center).collect();
    let cells_x: Vec<(usize, usize, f64)> =
        (0..img.width).map(|x| interpolation_cell(x as f64, &cx)).collect();

    let mut out = Vec::with_capacity(img.pixels.len());
    for y in 0..img.height {
        let (y0, y1, wy) = interpolation_cell(y as f64, &cy);
        for (x, &(x0, x1, wx)) in cells_x.iter().enumerate() {
            let p = usize::from(img.get(x, y));
            let m = |tyi: usize, txi: usize| f64::from(maps[tyi * tx + txi].lut[p]);
            let top = (1.0 - wx) * m(y0, x0) + wx * m(y0, x1);
            let bottom = (1.0 - wx) * m(y1, x0) + wx * m(y1, x1);
            out.push(round_half_up((1.0 - wy) * top + wy * bottom));
        }
    }
    GrayImage::new(img.width, img.height, out)
}

fn next_token(bytes: &mut std::slice::Iter<'_, u8>) -> Result<String> {
    let mut token = String::new();
    while let Some(&b) = bytes.next() {
        if b == b'#' && token.is_empty() {
            // comment to end of line
            bytes.by_ref().find(|&&c| c == b'\n');
            continue;
        }
        if b.is_ascii_whitespace() {
            if token.is_empty() {
                continue;
            }
            break;
        }
        token.push(char::from(b));
    }
    if token.is_empty() {
        return Err(Error::Image("truncated PGM header".into()));
    }
    Ok(token)
}

/// Parses a binary PGM (`P5`, maxval 255).
pub fn read_pgm<R: Read>(mut reader: R) -> Result<GrayImage> {
    let mut buf = Vec::new();
    reader
        .read_to_end(&mut buf)
        .map_err(|e| Error::Image(e.to_string()))?;
    let mut bytes = buf.iter();
    let magic = next_token(&mut bytes)?;
    if magic != "P5" {
        return Err(Error::Image(format!("expected P5 magic, found {magic:?}")));
    }
    let mut dims = [0usize; 3];
    for d in &mut dims {
        let t = next_token(&mut bytes)?;
        *d = t
            .parse()
            .map_err(|_| Error::Image(format!("bad PGM header field {t:?}")))?;
    }
    let [width, height, maxval] = dims;
    if maxval != 255 {
        return Err(Error::Image(format!("only maxval 255 is supported, got {maxval}")));
    }
    let pixels: Vec<u8> = bytes.take(width * height).copied().collect();
    if pixels.len() != width * height {
        return Err(Error::Image(format!(
            "expected {} pixel bytes, found {}",
            width * height,
            pixels.len()
        )));
    }
    GrayImage::new(width, height, pixels)
}

pub fn write_pgm<W: Write>(img: &GrayImage, mut writer: W) -> std::io::Result<()> {
    write!(writer, "P5\n{} {}\n255\n", img.width, img.height)?;
    writer.write_all(&img.pixels)
}

pub fn load_pgm(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_pgm(std::io::BufReader::new(file))
}

pub fn save_pgm(img: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    write_pgm(img, &mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_histogram() {
        let img = GrayImage::from_fn(4, 4, |_, _| 7);
        let h = histogram(&img).unwrap();
        assert_eq!(h[7], 16);
        assert_eq!(h.iter().sum::<u64>(), 16);
    }

    #[test]
    fn two_pixel_histogram() {
        let img = GrayImage::new(2, 1, vec![0, 255]).unwrap();
        let h = histogram(&img).unwrap();
        assert_eq!((h[0], h[255], h.iter().sum::<u64>()), (1, 1, 2));
    }

    #[test]
    fn empty_image_rejected() {
        let img = GrayImage::new(0, 0, vec![]).unwrap();
        assert!(histogram(&img).is_err());
        assert!(equalize(&img).is_err());
        assert!(clahe(&img, (1, 1), 2.0).is_err());
    }

    #[test]
    fn constant_image_maps_to_white() {
        let img = GrayImage::from_fn(5, 3, |_, _| 42);
        let (out, map) = equalize(&img).unwrap();
        assert!(out.pixels.iter().all(|&p| p == 255));
        assert_eq!(map.lut[42], 255);
    }

    #[test]
    fn two_level_image() {
        let img = GrayImage::from_fn(4, 4, |x, _| if x < 2 { 10 } else { 200 });
        let (_, map) = equalize(&img).unwrap();
        assert_eq!(map.lut[10], 128);
        assert_eq!(map.lut[200], 255);
    }

    #[test]
    fn uniform_histogram_is_near_identity() {
        let img = GrayImage::from_fn(16, 16, |x, y| (y * 16 + x) as u8);
        let (_, map) = equalize(&img).unwrap();
        for k in 0..256 {
            assert!((i32::from(map.lut[k]) - k as i32).abs() <= 1, "level {k}");
        }
    }

    #[test]
    fn clahe_single_tile_no_clip_is_equalize() {
        let img = GrayImage::from_fn(13, 7, |x, y| ((x * 37 + y * 11) % 200) as u8);
        let (eq, _) = equalize(&img).unwrap();
        assert_eq!(clahe(&img, (1, 1), f64::INFINITY).unwrap(), eq);
        assert_eq!(clahe(&img, (1, 1), 1e9).unwrap(), eq);
    }

    #[test]
    fn clahe_constant_stays_constant() {
        let img = GrayImage::from_fn(32, 24, |_, _| 90);
        for tiles in [(1, 1), (2, 3), (8, 8)] {
            let out = clahe(&img, tiles, 2.0).unwrap();
            assert!(out.pixels.iter().all(|&p| p == out.pixels[0]), "{tiles:?}");
        }
    }

    #[test]
    fn clahe_parameter_checks() {
        let img = GrayImage::from_fn(4, 4, |x, _| x as u8);
        assert!(clahe(&img, (5, 1), 2.0).is_err());
        assert!(clahe(&img, (0, 1), 2.0).is_err());
        assert!(clahe(&img, (1, 1), 0.0).is_err());
    }

    #[test]
    fn pgm_round_trip_with_comment() {
        let img = GrayImage::from_fn(3, 2, |x, y| (x * 50 + y * 7) as u8);
        let mut buf = Vec::new();
        write_pgm(&img, &mut buf).unwrap();
        assert!(buf.starts_with(b"P5\n3 2\n255\n"));
        assert_eq!(read_pgm(buf.as_slice()).unwrap(), img);

        let mut commented = b"P5\n# made by hand\n3 2\n255\n".to_vec();
        commented.extend_from_slice(&img.pixels);
        assert_eq!(read_pgm(commented.as_slice()).unwrap(), img);
    }

    #[test]
    fn pgm_errors() {
        assert!(read_pgm(&b"P2\n1 1\n255\n0"[..]).is_err());
        assert!(read_pgm(&b"P5\n2 2\n65535\n"[..]).is_err());
        assert!(read_pgm(&b"P5\n2 2\n255\n\x01"[..]).is_err());
    }
}
