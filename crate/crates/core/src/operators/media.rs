//! Pixel and sample level helpers used by the filter operators and the
//! reference inference providers.

use sha2::{Digest, Sha256};

use crate::data::{AudioClip, Bitmap, Payload};

/// Region of an image, in pixels. May extend past the image bounds; users
/// clamp before reading pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rect {
    pub x: i64,
    pub y: i64,
    pub w: i64,
    pub h: i64,
}

impl Rect {
    /// Intersection with a `width`×`height` image, or `None` when empty.
    pub fn clamp(self, width: u32, height: u32) -> Option<Rect> {
        let x0 = self.x.max(0);
        let y0 = self.y.max(0);
        let x1 = (self.x + self.w).min(width as i64);
        let y1 = (self.y + self.h).min(height as i64);
        (x1 > x0 && y1 > y0).then(|| Rect {
            x: x0,
            y: y0,
            w: x1 - x0,
            h: y1 - y0,
        })
    }
}

pub fn crop(img: &Bitmap, region: Rect) -> Option<Bitmap> {
    let r = region.clamp(img.width, img.height)?;
    let mut rgb = Vec::with_capacity((r.w * r.h * 3) as usize);
    let stride = img.width as usize * 3;
    for y in r.y..r.y + r.h {
        let start = y as usize * stride + r.x as usize * 3;
        rgb.extend_from_slice(&img.rgb[start..start + r.w as usize * 3]);
    }
    Some(Bitmap::new(r.w as u32, r.h as u32, rgb))
}

pub fn resize_nearest(img: &Bitmap, width: u32, height: u32) -> Bitmap {
    let mut rgb = Vec::with_capacity(width as usize * height as usize * 3);
    for y in 0..height {
        let sy = (y as u64 * img.height as u64 / height.max(1) as u64) as u32;
        for x in 0..width {
            let sx = (x as u64 * img.width as u64 / width.max(1) as u64) as u32;
            rgb.extend_from_slice(&img.pixel(sx.min(img.width - 1), sy.min(img.height - 1)));
        }
    }
    Bitmap::new(width, height, rgb)
}

/// Copies `src` into `dst` at `region`, scaling `src` to the region size.
pub fn paste_scaled(dst: &mut Bitmap, src: &Bitmap, region: Rect) {
    let Some(r) = region.clamp(dst.width, dst.height) else {
        return;
    };
    let scaled = resize_nearest(src, r.w as u32, r.h as u32);
    let stride = dst.width as usize * 3;
    for row in 0..r.h as usize {
        let d = (r.y as usize + row) * stride + r.x as usize * 3;
        let s = row * r.w as usize * 3;
        dst.rgb[d..d + r.w as usize * 3].copy_from_slice(&scaled.rgb[s..s + r.w as usize * 3]);
    }
}

/// Separable box blur with edge clamping.
pub fn box_blur(img: &Bitmap, radius: u32) -> Bitmap {
    if radius == 0 || img.width == 0 || img.height == 0 {
        return img.clone();
    }
    let (w, h) = (img.width as usize, img.height as usize);
    let horizontal = blur_pass(&img.rgb, w, h, radius as usize, true);
    let rgb = blur_pass(&horizontal, w, h, radius as usize, false);
    Bitmap::new(img.width, img.height, rgb)
}

fn blur_pass(src: &[u8], w: usize, h: usize, r: usize, horizontal: bool) -> Vec<u8> {
    let mut out = vec![0u8; src.len()];
    let window = (2 * r + 1) as u32;
    let half = window / 2;
    // floor((s + half) / window) as a multiply and shift, exact while
    // 256 * window^2 < 2^shift. Sums stay in range by construction, so
    // the arithmetic is wrapping.
    let shift = if 256 * (window as u64).pow(2) < 1 << 32 { 32 } else { 48 };
    let inv = (1u64 << shift).div_ceil(window as u64);
    let avg = |s: u32| ((s.wrapping_add(half) as u64).wrapping_mul(inv) >> shift) as u8;
    if horizontal {
        // prefix sums over the edge-padded row; each output is one difference
        let span = (2 * r + 1) * 3;
        let mut padded = Vec::with_capacity((w + 2 * r + 1) * 3);
        let mut prefix = vec![0u32; (w + 2 * r + 1) * 3 + 3];
        for (row, dst) in src.chunks_exact(w * 3).zip(out.chunks_exact_mut(w * 3)) {
            padded.clear();
            for _ in 0..r {
                padded.extend_from_slice(&row[..3]);
            }
            padded.extend_from_slice(row);
            for _ in 0..=r {
                padded.extend_from_slice(&row[row.len() - 3..]);
            }
            let mut acc = [0u32; 3];
            for (p, px) in prefix[3..].chunks_exact_mut(3).zip(padded.chunks_exact(3)) {
                for c in 0..3 {
                    acc[c] = acc[c].wrapping_add(px[c] as u32);
                    p[c] = acc[c];
                }
            }
            for ((d, hi), lo) in dst.iter_mut().zip(&prefix[span..]).zip(&prefix[..]) {
                *d = avg(hi.wrapping_sub(*lo));
            }
        }
    } else {
        // running sums for a whole row at once keep the reads sequential
        let stride = w * 3;
        let row = |y: isize| {
            let y = y.clamp(0, h as isize - 1) as usize;
            &src[y * stride..(y + 1) * stride]
        };
        let mut sum = vec![0u32; stride];
        for y in -(r as isize)..=r as isize {
            for (s, v) in sum.iter_mut().zip(row(y)) {
                *s += *v as u32;
            }
        }
        for (y, dst) in out.chunks_exact_mut(stride).enumerate() {
            for (d, s) in dst.iter_mut().zip(&sum) {
                *d = avg(*s);
            }
            let (add, sub) = (row(y as isize + r as isize + 1), row(y as isize - r as isize));
            for ((s, a), b) in sum.iter_mut().zip(add).zip(sub) {
                *s = s.wrapping_add(*a as u32).wrapping_sub(*b as u32);
            }
        }
    }
    out
}

pub fn mean_luma(img: &Bitmap) -> f64 {
    let n = img.width as u64 * img.height as u64;
    if n == 0 {
        return 0.0;
    }
    let total: f64 = img
        .rgb
        .chunks_exact(3)
        .map(|p| 0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64)
        .sum();
    total / n as f64
}

pub fn fill_rect(img: &mut Bitmap, region: Rect, color: [u8; 3]) {
    let Some(r) = region.clamp(img.width, img.height) else {
        return;
    };
    for y in r.y..r.y + r.h {
        for x in r.x..r.x + r.w {
            let i = (y as usize * img.width as usize + x as usize) * 3;
            img.rgb[i..i + 3].copy_from_slice(&color);
        }
    }
}

pub fn fill_ellipse(img: &mut Bitmap, region: Rect, color: [u8; 3]) {
    let Some(r) = region.clamp(img.width, img.height) else {
        return;
    };
    let cx = region.x as f64 + region.w as f64 / 2.0;
    let cy = region.y as f64 + region.h as f64 / 2.0;
    let (rx, ry) = (region.w as f64 / 2.0, region.h as f64 / 2.0);
    for y in r.y..r.y + r.h {
        for x in r.x..r.x + r.w {
            let dx = (x as f64 + 0.5 - cx) / rx;
            let dy = (y as f64 + 0.5 - cy) / ry;
            if dx * dx + dy * dy <= 1.0 {
                let i = (y as usize * img.width as usize + x as usize) * 3;
                img.rgb[i..i + 3].copy_from_slice(&color);
            }
        }
    }
}

/// Draws a cartoon face filling `region`: skin ellipse, two eyes, mouth.
pub fn draw_face(img: &mut Bitmap, region: Rect, skin: [u8; 3]) {
    fill_ellipse(img, region, skin);
    let ew = (region.w / 6).max(1);
    let eh = (region.h / 8).max(1);
    let ey = region.y + region.h / 3;
    let dark = [40, 30, 30];
    fill_ellipse(img, Rect { x: region.x + region.w / 4 - ew / 2, y: ey, w: ew, h: eh }, dark);
    fill_ellipse(img, Rect { x: region.x + 3 * region.w / 4 - ew / 2, y: ey, w: ew, h: eh }, dark);
    fill_rect(
        img,
        Rect {
            x: region.x + region.w / 3,
            y: region.y + 2 * region.h / 3,
            w: (region.w / 3).max(1),
            h: (region.h / 12).max(1),
        },
        [150, 40, 50],
    );
}

/// Resamples by `factor` with linear interpolation. A factor above one
/// shortens the clip and raises its pitch when played at the same rate.
pub fn resample(samples: &[i16], factor: f64) -> Vec<i16> {
    if samples.is_empty() || factor <= 0.0 {
        return samples.to_vec();
    }
    let out_len = ((samples.len() as f64) / factor).round().max(1.0) as usize;
    (0..out_len)
        .map(|i| {
            let pos = i as f64 * factor;
            let i0 = (pos.floor() as usize).min(samples.len() - 1);
            let i1 = (i0 + 1).min(samples.len() - 1);
            let frac = pos - i0 as f64;
            let v = samples[i0] as f64 * (1.0 - frac) + samples[i1] as f64 * frac;
            v.round().clamp(i16::MIN as f64, i16::MAX as f64) as i16
        })
        .collect()
}

pub fn cut(clip: &AudioClip, start_ms: u64, end_ms: u64) -> Option<AudioClip> {
    let rate = clip.sample_rate as u64;
    let a = (start_ms * rate / 1000) as usize;
    let b = ((end_ms * rate / 1000) as usize).min(clip.samples.len());
    (b > a).then(|| AudioClip {
        sample_rate: clip.sample_rate,
        samples: clip.samples[a..b].to_vec(),
    })
}

pub fn rms(samples: &[i16]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let sum: f64 = samples.iter().map(|s| (*s as f64).powi(2)).sum();
    (sum / samples.len() as f64).sqrt()
}

pub fn tone(sample_rate: u32, len: usize, freq_hz: f64, amplitude: f64) -> Vec<i16> {
    (0..len)
        .map(|i| {
            let t = i as f64 / sample_rate as f64;
            (amplitude * (2.0 * std::f64::consts::PI * freq_hz * t).sin()) as i16
        })
        .collect()
}

fn hex(bytes: &[u8]) -> String {
    use std::fmt::Write;
    bytes.iter().fold(String::with_capacity(bytes.len() * 2), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Content digest of a payload, independent of labels and provenance.
pub fn payload_digest(payload: &Payload) -> String {
    let mut h = Sha256::new();
    match payload {
        Payload::Image(b) => {
            h.update(b"image");
            h.update(b.width.to_le_bytes());
            h.update(b.height.to_le_bytes());
            h.update(&b.rgb);
        }
        Payload::Audio(a) => {
            h.update(b"audio");
            h.update(a.sample_rate.to_le_bytes());
            for s in &a.samples {
                h.update(s.to_le_bytes());
            }
        }
        Payload::Video(v) => {
            h.update(b"video");
            for f in &v.frames {
                h.update(f.width.to_le_bytes());
                h.update(f.height.to_le_bytes());
                h.update(&f.rgb);
            }
        }
        other => {
            h.update(b"json");
            h.update(serde_json::to_vec(other).expect("payloads serialize"));
        }
    }
    hex(&h.finalize())
}

/// Hex SHA-256.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

pub fn digest_u64(bytes: &[u8]) -> u64 {
    let d = Sha256::digest(bytes);
    u64::from_le_bytes(d[..8].try_into().expect("digest is 32 bytes"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gradient(w: u32, h: u32) -> Bitmap {
        let mut rgb = Vec::new();
        for y in 0..h {
            for x in 0..w {
                rgb.extend_from_slice(&[x as u8, y as u8, (x + y) as u8]);
            }
        }
        Bitmap::new(w, h, rgb)
    }

    #[test]
    fn crop_reads_the_right_pixels_and_clamps() {
        let img = gradient(10, 8);
        let c = crop(&img, Rect { x: 2, y: 3, w: 4, h: 2 }).unwrap();
        assert_eq!((c.width, c.height), (4, 2));
        assert_eq!(c.pixel(0, 0), [2, 3, 5]);
        assert_eq!(c.pixel(3, 1), [5, 4, 9]);
        let edge = crop(&img, Rect { x: 8, y: 6, w: 10, h: 10 }).unwrap();
        assert_eq!((edge.width, edge.height), (2, 2));
        assert!(crop(&img, Rect { x: 20, y: 0, w: 3, h: 3 }).is_none());
    }

    #[test]
    fn blur_of_constant_image_is_identity() {
        let img = Bitmap::filled(12, 9, [100, 50, 25]);
        assert_eq!(box_blur(&img, 3), img);
    }

    #[test]
    fn blur_matches_naive_average() {
        let img = gradient(7, 5);
        let r = 1i64;
        let blurred = box_blur(&img, r as u32);
        // naive separable reference with clamped edges
        let get = |x: i64, y: i64, c: usize| {
            img.pixel(x.clamp(0, 6) as u32, y.clamp(0, 4) as u32)[c] as u32
        };
        for y in 0..5i64 {
            for x in 0..7i64 {
                for c in 0..3 {
                    let rows: Vec<u32> = (-r..=r)
                        .map(|dy| {
                            let s: u32 = (-r..=r).map(|dx| get(x + dx, y + dy, c)).sum();
                            (s + 1) / 3
                        })
                        .collect();
                    let expected = (rows.iter().sum::<u32>() + 1) / 3;
                    assert_eq!(blurred.pixel(x as u32, y as u32)[c] as u32, expected);
                }
            }
        }
    }

    /// Separable reference with clamped edges and rounded integer division.
    fn reference_blur(img: &Bitmap, r: u32) -> Vec<u8> {
        let (w, h) = (img.width as i64, img.height as i64);
        let d = 2 * r + 1;
        let r = r as i64;
        let row: Vec<Vec<[u32; 3]>> = (0..h)
            .map(|y| {
                (0..w)
                    .map(|x| {
                        std::array::from_fn(|c| {
                            let s: u32 = (-r..=r).map(|dx| img.pixel((x + dx).clamp(0, w - 1) as u32, y as u32)[c] as u32).sum();
                            (s + d / 2) / d
                        })
                    })
                    .collect()
            })
            .collect();
        let mut out = Vec::new();
        for y in 0..h {
            for x in 0..w as usize {
                for c in 0..3 {
                    let s: u32 = (-r..=r).map(|dy| row[(y + dy).clamp(0, h - 1) as usize][x][c]).sum();
                    out.push(((s + d / 2) / d) as u8);
                }
            }
        }
        out
    }

    #[test]
    fn blur_matches_reference() {
        let img = gradient(40, 30);
        for r in [1u32, 2, 7, 19, 64] {
            assert_eq!(box_blur(&img, r).rgb, reference_blur(&img, r), "r={r}");
        }
    }

    #[test]
    fn very_wide_blur_matches_reference() {
        let img = gradient(4, 3);
        for r in [2047u32, 2048, 2100] {
            assert_eq!(box_blur(&img, r).rgb, reference_blur(&img, r), "r={r}");
        }
    }

    #[test]
    fn luma_of_white_is_255() {
        assert!((mean_luma(&Bitmap::filled(4, 4, [255, 255, 255])) - 255.0).abs() < 1e-9);
    }

    #[test]
    fn resample_lengths() {
        let s: Vec<i16> = (0..1000).map(|i| i as i16).collect();
        assert_eq!(resample(&s, 1.0), s);
        assert_eq!(resample(&s, 1.05).len(), 952);
        assert_eq!(resample(&s, 0.95).len(), 1053);
    }

    #[test]
    fn cut_window() {
        let clip = AudioClip { sample_rate: 1000, samples: (0..1000).map(|i| i as i16).collect() };
        let c = cut(&clip, 100, 250).unwrap();
        assert_eq!(c.samples.len(), 150);
        assert_eq!(c.samples[0], 100);
        assert!(cut(&clip, 2000, 3000).is_none());
    }

    #[test]
    fn paste_covers_region() {
        let mut dst = Bitmap::filled(10, 10, [0, 0, 0]);
        paste_scaled(&mut dst, &Bitmap::filled(3, 3, [9, 9, 9]), Rect { x: 2, y: 2, w: 4, h: 4 });
        assert_eq!(dst.pixel(2, 2), [9, 9, 9]);
        assert_eq!(dst.pixel(5, 5), [9, 9, 9]);
        assert_eq!(dst.pixel(6, 6), [0, 0, 0]);
    }

    #[test]
    fn digests_differ_by_content() {
        let a = Payload::Image(Bitmap::filled(2, 2, [1, 1, 1]));
        let b = Payload::Image(Bitmap::filled(2, 2, [1, 1, 2]));
        assert_ne!(payload_digest(&a), payload_digest(&b));
        assert_eq!(payload_digest(&a), payload_digest(&a.clone()));
        assert_eq!(payload_digest(&a).len(), 64);
    }
}
