use crate::error::{invalid, FlatnessError, Result};

/// Lattice spacing used for a net of resolution `h` in dimension `n`.
///
/// The cubic lattice with spacing `s` covers space within `s * sqrt(n) / 2`,
/// so spacing `h` suffices up to n = 4 and is shrunk beyond.
pub(crate) fn lattice_spacing(n: usize, h: f64) -> f64 {
    if n <= 4 {
        h
    } else {
        2.0 * h / (n as f64).sqrt()
    }
}

/// Guaranteed covering radius of [`ball_lattice`].
pub(crate) fn covering_radius(n: usize, h: f64) -> f64 {
    lattice_spacing(n, h) * (n as f64).sqrt() / 2.0
}

/// Flat coordinates of an `h`-net of the closed ball `B_r(0)` in R^n: cubic
/// lattice points inside the ball together with the radial projections of
/// lattice points in the shell `r < |z| <= r + covering radius`.
pub(crate) fn ball_lattice(n: usize, r: f64, h: f64, cap: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(invalid("n", "must be at least 1"));
    }
    if !(h > 0.0 && r > 0.0 && h.is_finite() && r.is_finite()) {
        return Err(invalid("h", "need 0 < h and 0 < r"));
    }
    let s = lattice_spacing(n, h);
    let reach = r + covering_radius(n, h);
    let m = (reach / s).floor() as i64;
    let side = (2 * m + 1) as f64;
    let estimate = side.powi(n as i32);
    if estimate > 8.0 * cap as f64 {
        return Err(FlatnessError::SizeCapExceeded {
            size: estimate as usize,
            cap,
        });
    }
    let mut idx = vec![-m; n];
    let mut out: Vec<f64> = Vec::new();
    let mut z = vec![0.0; n];
    loop {
        for k in 0..n {
            z[k] = idx[k] as f64 * s;
        }
        let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm <= r * (1.0 + 1e-12) {
            out.extend_from_slice(&z);
        } else if norm <= reach {
            out.extend(z.iter().map(|v| v * r / norm));
        }
        let mut k = 0;
        loop {
            if k == n {
                return finish(out, n, r, cap);
            }
            if idx[k] < m {
                idx[k] += 1;
                break;
            }
            idx[k] = -m;
            k += 1;
        }
    }
}

fn finish(points: Vec<f64>, n: usize, r: f64, cap: usize) -> Result<Vec<f64>> {
    let count = points.len() / n;
    let mut order: Vec<usize> = (0..count).collect();
    let row = |i: usize| &points[i * n..(i + 1) * n];
    order.sort_by(|&a, &b| {
        row(a)
            .iter()
            .zip(row(b))
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let tol = 1e-12 * r;
    let mut out: Vec<f64> = Vec::with_capacity(points.len());
    let mut last: Option<usize> = None;
    for i in order {
        if let Some(j) = last {
            let close = row(i).iter().zip(row(j)).all(|(x, y)| (x - y).abs() <= tol);
            if close {
                continue;
            }
        }
        out.extend_from_slice(row(i));
        last = Some(i);
    }
    if out.len() / n > cap {
        return Err(FlatnessError::SizeCapExceeded {
            size: out.len() / n,
            cap,
        });
    }
    Ok(out)
}
