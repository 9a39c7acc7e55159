use crate::raster::Raster;

/// Normalized Gaussian taps for offsets `-r..=r`, `r = ceil(3 sigma)`.
pub fn gaussian_kernel(sigma_px: f64) -> Vec<f32> {
    if sigma_px <= 0.0 {
        return vec![1.0];
    }
    let r = (3.0 * sigma_px).ceil() as i64;
    let w: Vec<f64> = (-r..=r)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma_px * sigma_px)).exp())
        .collect();
    let sum: f64 = w.iter().sum();
    w.iter().map(|v| (v / sum) as f32).collect()
}

/// Separable Gaussian blur with clamp-to-edge borders. `sigma_px == 0` returns a copy.
pub fn gaussian_blur(src: &Raster<f32>, sigma_px: f64) -> Raster<f32> {
    assert!(sigma_px >= 0.0, "sigma must be non-negative");
    if sigma_px == 0.0 {
        return src.clone();
    }
    let k = gaussian_kernel(sigma_px);
    convolve_separable(src, &k)
}

/// Convolves rows then columns with the same odd-length kernel.
pub fn convolve_separable(src: &Raster<f32>, kernel: &[f32]) -> Raster<f32> {
    let tmp = convolve_rows(src, kernel);
    convolve_cols(&tmp, kernel)
}

fn convolve_rows(src: &Raster<f32>, k: &[f32]) -> Raster<f32> {
    let (w, h) = (src.width(), src.height());
    let r = k.len() / 2;
    let mut out = Raster::filled(w, h, 0.0f32);
    let dst = out.as_mut_slice();
    for y in 0..h {
        let row = src.row(y);
        let orow = &mut dst[y * w..(y + 1) * w];
        for (x, o) in orow.iter_mut().enumerate() {
            let mut acc = 0.0f32;
            if x >= r && x + r < w {
                let win = &row[x - r..=x + r];
                for (a, b) in win.iter().zip(k) {
                    acc += a * b;
                }
            } else {
                for (j, kv) in k.iter().enumerate() {
                    let xi = (x as isize + j as isize - r as isize).clamp(0, w as isize - 1);
                    acc += row[xi as usize] * kv;
                }
            }
            *o = acc;
        }
    }
    out
}

fn convolve_cols(src: &Raster<f32>, k: &[f32]) -> Raster<f32> {
    let (w, h) = (src.width(), src.height());
    let r = k.len() / 2;
    let data = src.as_slice();
    let mut out = Raster::filled(w, h, 0.0f32);
    let dst = out.as_mut_slice();
    for y in 0..h {
        let orow = &mut dst[y * w..(y + 1) * w];
        for (j, &kv) in k.iter().enumerate() {
            let yi = (y as isize + j as isize - r as isize).clamp(0, h as isize - 1) as usize;
            let srow = &data[yi * w..(yi + 1) * w];
            for (o, s) in orow.iter_mut().zip(srow) {
                *o += s * kv;
            }
        }
    }
    out
}
