//! Segmentation maps, contour extraction and majority-overlap filtering.

use std::path::Path;

use crate::error::{Error, Result};
use crate::labeling::{label_components, Connectivity};

/// A labeled pixel grid. Label 0 is background, any positive label is foreground.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegMap {
    width: usize,
    height: usize,
    labels: Vec<u8>,
    source_id: String,
}

impl SegMap {
    pub fn new(
        width: usize,
        height: usize,
        labels: Vec<u8>,
        source_id: impl Into<String>,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::param(
                "dimensions",
                "width and height must be at least 1",
            ));
        }
        if labels.len() != width * height {
            return Err(Error::Contract(format!(
                "label buffer has {} entries, expected {}x{}",
                labels.len(),
                width,
                height
            )));
        }
        Ok(Self {
            width,
            height,
            labels,
            source_id: source_id.into(),
        })
    }

    /// All-background map.
    pub fn empty(width: usize, height: usize, source_id: impl Into<String>) -> Result<Self> {
        Self::new(width, height, vec![0; width * height], source_id)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub(crate) fn labels_mut(&mut self) -> &mut [u8] {
        &mut self.labels
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn with_source_id(mut self, id: impl Into<String>) -> Self {
        self.source_id = id.into();
        self
    }

    pub fn label(&self, x: usize, y: usize) -> u8 {
        self.labels[y * self.width + x]
    }

    pub fn is_foreground(&self, x: usize, y: usize) -> bool {
        self.label(x, y) > 0
    }

    pub fn foreground(&self) -> Vec<bool> {
        self.labels.iter().map(|&l| l > 0).collect()
    }

    pub fn foreground_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l > 0).count()
    }

    pub fn same_shape(&self, other: &SegMap) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub(crate) fn ensure_same_shape(&self, other: &SegMap) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::Contract(format!(
                "map dimensions differ: {}x{} ({}) vs {}x{} ({})",
                self.width, self.height, self.source_id, other.width, other.height, other.source_id
            )))
        }
    }

    pub fn flip_horizontal(&self) -> SegMap {
        self.remap(self.width, self.height, |x, y| (self.width - 1 - x, y))
    }

    pub fn flip_vertical(&self) -> SegMap {
        self.remap(self.width, self.height, |x, y| (x, self.height - 1 - y))
    }

    /// Rotates a quarter turn clockwise; the result is `height` wide.
    pub fn rotate90(&self) -> SegMap {
        // output (x, y) takes input (y, H-1-x)
        self.remap(self.height, self.width, |x, y| (y, self.height - 1 - x))
    }

    fn remap(&self, w: usize, h: usize, source: impl Fn(usize, usize) -> (usize, usize)) -> SegMap {
        let mut labels = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                let (sx, sy) = source(x, y);
                labels.push(self.label(sx, sy));
            }
        }
        SegMap {
            width: w,
            height: h,
            labels,
            source_id: self.source_id.clone(),
        }
    }
}

/// Binary view of a pixel grid.
pub trait BinaryMask {
    fn dims(&self) -> (usize, usize);
    fn bits(&self) -> Vec<bool>;
}

impl BinaryMask for SegMap {
    fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    fn bits(&self) -> Vec<bool> {
        self.foreground()
    }
}

/// Contour pixels of a map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContourSet {
    pub width: usize,
    pub height: usize,
    pub mask: Vec<bool>,
    pub count: usize,
}

impl ContourSet {
    pub fn from_mask(width: usize, height: usize, mask: Vec<bool>) -> Self {
        assert_eq!(mask.len(), width * height);
        let count = mask.iter().filter(|&&b| b).count();
        Self {
            width,
            height,
            mask,
            count,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        self.mask[y * self.width + x]
    }

    /// Contour pixel coordinates in raster order.
    pub fn points(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let w = self.width;
        self.mask
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| (i % w, i / w))
    }
}

impl BinaryMask for ContourSet {
    fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    fn bits(&self) -> Vec<bool> {
        self.mask.clone()
    }
}

/// Foreground pixels with a 4-neighbour of a different label, or on the image border.
pub fn extract_contours(map: &SegMap) -> ContourSet {
    let (w, h) = (map.width, map.height);
    let mut mask = vec![false; w * h];
    for y in 0..h {
        for x in 0..w {
            let l = map.label(x, y);
            if l == 0 {
                continue;
            }
            let on_border = x == 0 || y == 0 || x + 1 == w || y + 1 == h;
            mask[y * w + x] = on_border
                || map.label(x - 1, y) != l
                || map.label(x + 1, y) != l
                || map.label(x, y - 1) != l
                || map.label(x, y + 1) != l;
        }
    }
    ContourSet::from_mask(w, h, mask)
}

/// Removes each 8-connected foreground component of `pred` unless at least
/// `threshold` of its pixels lie on foreground of `gt`.
pub fn filter_majority_overlap(pred: &SegMap, gt: &SegMap, threshold: f64) -> Result<SegMap> {
    pred.ensure_same_shape(gt)?;
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::param(
            "overlap-threshold",
            format!("{threshold} not in (0, 1]"),
        ));
    }
    let comps = label_components(
        pred.width,
        pred.height,
        &pred.foreground(),
        Connectivity::Eight,
    );
    let mut size = vec![0usize; comps.count];
    let mut overlap = vec![0usize; comps.count];
    for (i, &l) in comps.labels.iter().enumerate() {
        if l > 0 {
            size[l as usize - 1] += 1;
            if gt.labels[i] > 0 {
                overlap[l as usize - 1] += 1;
            }
        }
    }
    let keep: Vec<bool> = size
        .iter()
        .zip(&overlap)
        .map(|(&s, &o)| o as f64 >= threshold * s as f64)
        .collect();
    let labels = pred
        .labels
        .iter()
        .zip(&comps.labels)
        .map(|(&v, &l)| if l > 0 && keep[l as usize - 1] { v } else { 0 })
        .collect();
    Ok(SegMap {
        width: pred.width,
        height: pred.height,
        labels,
        source_id: pred.source_id.clone(),
    })
}

/// On-disk encodings for label maps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapFormat {
    Pgm,
    Png,
    RawU8,
}

impl MapFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "pgm" => Some(MapFormat::Pgm),
            "png" => Some(MapFormat::Png),
            "raw" | "tpi" => Some(MapFormat::RawU8),
            _ => None,
        }
    }
}

impl std::str::FromStr for MapFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "pgm" => Ok(MapFormat::Pgm),
            "png" => Ok(MapFormat::Png),
            "raw" | "raw-u8" => Ok(MapFormat::RawU8),
            other => Err(format!("unknown map format `{other}`")),
        }
    }
}

const RAW_MAGIC: &[u8; 4] = b"TPI1";

pub fn load_segmap(path: &Path, format: MapFormat) -> Result<SegMap> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let id = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_segmap(&bytes, format, id)
}

pub fn parse_segmap(
    bytes: &[u8],
    format: MapFormat,
    source_id: impl Into<String>,
) -> Result<SegMap> {
    let (w, h, labels) = match format {
        MapFormat::Pgm => parse_pgm(bytes)?,
        MapFormat::RawU8 => parse_raw(bytes)?,
        MapFormat::Png => parse_png(bytes)?,
    };
    SegMap::new(w, h, labels, source_id)
}

fn parse_raw(bytes: &[u8]) -> Result<(usize, usize, Vec<u8>)> {
    if bytes.len() < 12 {
        return Err(Error::format(bytes.len(), "truncated TPI1 header"));
    }
    if &bytes[..4] != RAW_MAGIC {
        return Err(Error::format(0, "missing TPI1 magic"));
    }
    let w = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let h = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    if w == 0 || h == 0 {
        return Err(Error::format(4, "zero dimension"));
    }
    let body = &bytes[12..];
    if body.len() != w * h {
        return Err(Error::format(
            12 + body.len().min(w * h),
            format!("expected {} pixel bytes, found {}", w * h, body.len()),
        ));
    }
    Ok((w, h, body.to_vec()))
}

struct PgmCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl PgmCursor<'_> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::format(start, format!("expected {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::format(start, format!("{what} out of range")))
    }
}

fn parse_pgm(bytes: &[u8]) -> Result<(usize, usize, Vec<u8>)> {
    if bytes.len() < 2 || bytes[0] != b'P' || !(bytes[1] == b'5' || bytes[1] == b'2') {
        return Err(Error::format(0, "not a P2/P5 PGM header"));
    }
    let binary = bytes[1] == b'5';
    let mut cur = PgmCursor { bytes, pos: 2 };
    let w = cur.number("width")?;
    let h = cur.number("height")?;
    cur.skip_space_and_comments();
    let maxval_at = cur.pos;
    let maxval = cur.number("maxval")?;
    if w == 0 || h == 0 {
        return Err(Error::format(2, "zero dimension"));
    }
    if maxval == 0 || maxval > 255 {
        return Err(Error::format(
            maxval_at,
            format!("unsupported bit depth (maxval {maxval}); only 8-bit maps are accepted"),
        ));
    }
    let n = w * h;
    let labels = if binary {
        if cur.pos >= bytes.len() || !bytes[cur.pos].is_ascii_whitespace() {
            return Err(Error::format(cur.pos, "missing separator after maxval"));
        }
        let start = cur.pos + 1;
        let body = &bytes[start..];
        if body.len() < n {
            return Err(Error::format(
                bytes.len(),
                format!(
                    "dimension mismatch: expected {n} pixel bytes, found {}",
                    body.len()
                ),
            ));
        }
        body[..n].to_vec()
    } else {
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let at = cur.pos;
            let v = cur.number("pixel value").map_err(|_| {
                Error::format(at, format!("dimension mismatch: expected {n} pixel values"))
            })?;
            if v > maxval {
                return Err(Error::format(
                    at,
                    format!("pixel value {v} exceeds maxval {maxval}"),
                ));
            }
            labels.push(v as u8);
        }
        labels
    };
    Ok((w, h, labels))
}

#[cfg(feature = "png")]
fn parse_png(bytes: &[u8]) -> Result<(usize, usize, Vec<u8>)> {
    let decoder = png::Decoder::new(std::io::Cursor::new(bytes));
    let mut reader = decoder
        .read_info()
        .map_err(|e| Error::format(0, format!("png: {e}")))?;
    let info = reader.info();
    if info.color_type != png::ColorType::Grayscale || info.bit_depth != png::BitDepth::Eight {
        return Err(Error::format(
            0,
            format!(
                "unsupported bit depth: png must be 8-bit grayscale, got {:?} {:?}",
                info.color_type, info.bit_depth
            ),
        ));
    }
    let (w, h) = (info.width as usize, info.height as usize);
    let mut buf = vec![0; reader.output_buffer_size().unwrap_or(w * h)];
    let frame = reader
        .next_frame(&mut buf)
        .map_err(|e| Error::format(0, format!("png: {e}")))?;
    buf.truncate(frame.buffer_size());
    if buf.len() != w * h {
        return Err(Error::format(0, "png: dimension mismatch"));
    }
    Ok((w, h, buf))
}

#[cfg(not(feature = "png"))]
fn parse_png(_bytes: &[u8]) -> Result<(usize, usize, Vec<u8>)> {
    Err(Error::format(
        0,
        "png support not compiled in (enable the `png` feature)",
    ))
}

/// Binary P5 encoding of the labels.
pub fn encode_pgm(map: &SegMap) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", map.width, map.height).into_bytes();
    out.extend_from_slice(&map.labels);
    out
}

pub fn encode_raw(map: &SegMap) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + map.labels.len());
    out.extend_from_slice(RAW_MAGIC);
    out.extend_from_slice(&(map.width as u32).to_le_bytes());
    out.extend_from_slice(&(map.height as u32).to_le_bytes());
    out.extend_from_slice(&map.labels);
    out
}

pub fn save_segmap(map: &SegMap, path: &Path, format: MapFormat) -> Result<()> {
    let bytes = match format {
        MapFormat::Pgm => encode_pgm(map),
        MapFormat::RawU8 => encode_raw(map),
        MapFormat::Png => encode_png(map)?,
    };
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

#[cfg(feature = "png")]
fn encode_png(map: &SegMap) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, map.width as u32, map.height as u32);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc
            .write_header()
            .map_err(|e| Error::Contract(format!("png encode: {e}")))?;
        writer
            .write_image_data(&map.labels)
            .map_err(|e| Error::Contract(format!("png encode: {e}")))?;
    }
    Ok(out)
}

#[cfg(not(feature = "png"))]
fn encode_png(_map: &SegMap) -> Result<Vec<u8>> {
    Err(Error::Contract("png support not compiled in".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn block_map(size: usize, x0: usize, y0: usize, side: usize) -> SegMap {
        let mut labels = vec![0; size * size];
        for y in y0..y0 + side {
            for x in x0..x0 + side {
                labels[y * size + x] = 1;
            }
        }
        SegMap::new(size, size, labels, "block").unwrap()
    }

    #[test]
    fn pgm_all_zero() {
        let bytes = b"P5\n4 4\n255\n\0\0\0\0\0\0\0\0\0\0\0\0\0\0\0\0";
        let m = parse_segmap(bytes, MapFormat::Pgm, "z").unwrap();
        assert_eq!((m.width(), m.height()), (4, 4));
        assert_eq!(m.foreground_count(), 0);
    }

    #[test]
    fn pgm_single_foreground_pixel() {
        let mut bytes = b"P5\n# comment line\n4 4\n255\n".to_vec();
        let mut body = vec![0u8; 16];
        body[6] = 1;
        bytes.extend(body);
        let m = parse_segmap(&bytes, MapFormat::Pgm, "one").unwrap();
        assert_eq!(m.foreground_count(), 1);
        assert_eq!(m.label(2, 1), 1);
    }

    #[test]
    fn ascii_pgm() {
        let m = parse_segmap(b"P2 3 1 255\n0 7 0\n", MapFormat::Pgm, "a").unwrap();
        assert_eq!(m.labels(), &[0, 7, 0]);
    }

    #[test]
    fn corrupted_magic_is_a_format_error() {
        let err = parse_segmap(b"P9\n4 4\n255\n", MapFormat::Pgm, "bad").unwrap_err();
        assert!(matches!(err, Error::Format { offset: 0, .. }), "{err}");
    }

    #[test]
    fn short_body_and_bit_depth_errors() {
        let err = parse_segmap(b"P5\n4 4\n255\n\0\0", MapFormat::Pgm, "s").unwrap_err();
        assert!(matches!(err, Error::Format { .. }));
        let err = parse_segmap(b"P5\n1 1\n65535\n\0\0", MapFormat::Pgm, "d").unwrap_err();
        match err {
            Error::Format { offset, message } => {
                assert_eq!(offset, 7);
                assert!(message.contains("bit depth"));
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn raw_roundtrip_and_truncation() {
        let m = block_map(5, 1, 1, 2);
        let bytes = encode_raw(&m);
        assert_eq!(&bytes[..4], b"TPI1");
        assert_eq!(parse_segmap(&bytes, MapFormat::RawU8, "block").unwrap(), m);
        assert!(parse_segmap(&bytes[..20], MapFormat::RawU8, "t").is_err());
    }

    #[cfg(feature = "png")]
    #[test]
    fn png_roundtrip() {
        let m = block_map(6, 2, 1, 3);
        let bytes = encode_png(&m).unwrap();
        assert_eq!(parse_segmap(&bytes, MapFormat::Png, "block").unwrap(), m);
    }

    #[test]
    fn contours_of_empty_map() {
        let m = SegMap::empty(5, 5, "e").unwrap();
        assert_eq!(extract_contours(&m).count, 0);
    }

    #[test]
    fn isolated_pixel_is_its_own_contour() {
        let m = block_map(5, 2, 2, 1);
        let c = extract_contours(&m);
        assert_eq!(c.count, 1);
        assert!(c.contains(2, 2));
    }

    #[test]
    fn block_contour_is_its_perimeter() {
        let m = block_map(8, 2, 2, 4);
        let c = extract_contours(&m);
        // Enumerate block pixels that have a 4-neighbour outside the block.
        let inside = |x: i64, y: i64| (2..6).contains(&x) && (2..6).contains(&y);
        let mut expected = vec![false; 64];
        for y in 0..8i64 {
            for x in 0..8i64 {
                if inside(x, y)
                    && [(1, 0), (-1, 0), (0, 1), (0, -1)]
                        .iter()
                        .any(|(dx, dy)| !inside(x + dx, y + dy))
                {
                    expected[(y * 8 + x) as usize] = true;
                }
            }
        }
        assert_eq!(c.mask, expected);
        assert_eq!(c.count, 12);
    }

    #[test]
    fn class_boundaries_are_contours() {
        let m = SegMap::new(4, 3, vec![0, 0, 0, 0, 1, 1, 2, 2, 0, 0, 0, 0], "mc").unwrap();
        let c = extract_contours(&m);
        assert_eq!(c.count, 4);
        let m = SegMap::new(
            5,
            5,
            vec![
                0, 0, 0, 0, 0, //
                0, 1, 1, 2, 0, //
                0, 1, 1, 2, 0, //
                0, 1, 1, 2, 0, //
                0, 0, 0, 0, 0,
            ],
            "mc",
        )
        .unwrap();
        let c = extract_contours(&m);
        // The interior pixel (2, 2) touches class 2 on its right.
        assert!(c.contains(2, 2));
    }

    #[test]
    fn border_foreground_is_contour() {
        let m = SegMap::new(3, 3, vec![1; 9], "full").unwrap();
        let c = extract_contours(&m);
        assert_eq!(c.count, 8);
        assert!(!c.contains(1, 1));
    }

    #[test]
    fn overlap_filter_cases() {
        let gt = block_map(10, 0, 0, 5);
        // fully inside
        let inside = block_map(10, 1, 1, 2);
        assert_eq!(filter_majority_overlap(&inside, &gt, 0.5).unwrap(), inside);
        // disjoint
        let outside = block_map(10, 7, 7, 2);
        assert_eq!(
            filter_majority_overlap(&outside, &gt, 0.5)
                .unwrap()
                .foreground_count(),
            0
        );
        // 10-pixel bar, 5 on gt foreground: kept with the inclusive rule
        let mut labels = vec![0u8; 100];
        for x in 0..10 {
            labels[2 * 10 + x] = 1;
        }
        let bar = SegMap::new(10, 10, labels, "bar").unwrap();
        let overlap = bar
            .labels()
            .iter()
            .zip(gt.labels())
            .filter(|(&p, &g)| p > 0 && g > 0)
            .count();
        assert_eq!(overlap, 5);
        assert_eq!(filter_majority_overlap(&bar, &gt, 0.5).unwrap(), bar);
        assert_eq!(
            filter_majority_overlap(&bar, &gt, 0.51)
                .unwrap()
                .foreground_count(),
            0
        );
    }

    #[test]
    fn overlap_filter_rejects_bad_inputs() {
        let a = SegMap::empty(3, 3, "a").unwrap();
        let b = SegMap::empty(4, 3, "b").unwrap();
        assert!(matches!(
            filter_majority_overlap(&a, &b, 0.5),
            Err(Error::Contract(_))
        ));
        assert!(filter_majority_overlap(&a, &a, 0.0).is_err());
        assert!(filter_majority_overlap(&a, &a, 1.5).is_err());
    }

    #[test]
    fn rotation_is_a_quarter_turn() {
        let m = SegMap::new(3, 2, vec![1, 2, 3, 4, 5, 6], "r").unwrap();
        let r = m.rotate90();
        assert_eq!((r.width(), r.height()), (2, 3));
        assert_eq!(r.labels(), &[4, 1, 5, 2, 6, 3]);
        assert_eq!(r.rotate90().rotate90().rotate90(), m);
    }

    fn arb_map() -> impl Strategy<Value = SegMap> {
        (1usize..12, 1usize..12).prop_flat_map(|(w, h)| {
            proptest::collection::vec(
                prop_oneof![3 => Just(0u8), 2 => Just(1u8), 1 => Just(2u8)],
                w * h,
            )
            .prop_map(move |labels| SegMap::new(w, h, labels, "p").unwrap())
        })
    }

    proptest! {
        #[test]
        fn contours_are_foreground(m in arb_map()) {
            let c = extract_contours(&m);
            for (i, &b) in c.mask.iter().enumerate() {
                prop_assert!(!b || m.labels()[i] > 0);
            }
            prop_assert_eq!(c.count, c.mask.iter().filter(|&&b| b).count());
        }

        #[test]
        fn contours_commute_with_mirroring(m in arb_map()) {
            let c = extract_contours(&m);
            let flipped = SegMap::new(m.width(), m.height(), c.mask.iter().map(|&b| b as u8).collect(), "c").unwrap();
            let ch = extract_contours(&m.flip_horizontal());
            let cv = extract_contours(&m.flip_vertical());
            prop_assert_eq!(ch.mask, flipped.flip_horizontal().foreground());
            prop_assert_eq!(cv.mask, flipped.flip_vertical().foreground());
        }

        #[test]
        fn self_overlap_keeps_everything(m in arb_map(), t in 0.01f64..=1.0) {
            prop_assert_eq!(filter_majority_overlap(&m, &m, t).unwrap(), m);
        }
    }
}
