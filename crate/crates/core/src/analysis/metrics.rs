use nalgebra::DMatrix;

use crate::model::{Component, Parameters};
use crate::tensor::Real;
use crate::{Error, Result};

/// Subtract each column's mean.
pub fn center_columns(x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut c = x.clone();
    for mut col in c.column_iter_mut() {
        let mean = col.mean();
        col.add_scalar_mut(-mean);
    }
    c
}

/// Linear CKA between two activation matrices over the same rows.
pub fn linear_cka(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<f64> {
    if x.nrows() != y.nrows() {
        return Err(Error::Shape(format!("CKA row counts differ: {} vs {}", x.nrows(), y.nrows())));
    }
    if x.nrows() < 2 {
        return Err(Error::Degenerate("CKA needs at least two rows".into()));
    }
    let (xc, yc) = (center_columns(x), center_columns(y));
    let xx = (xc.transpose() * &xc).norm_squared();
    let yy = (yc.transpose() * &yc).norm_squared();
    if xx == 0.0 || yy == 0.0 {
        return Err(Error::Degenerate("CKA input has zero variance".into()));
    }
    let xy = (xc.transpose() * &yc).norm_squared();
    // sqrt(xx * xx) rounds back to xx, so identical inputs give exactly 1.
    Ok(xy / (xx * yy).sqrt())
}

/// Exact 1-D Wasserstein-1 distance between two empirical distributions,
/// integrating the absolute CDF difference between consecutive sample
/// values. Sizes may differ.
pub fn emd_1d(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Degenerate("EMD of an empty sample".into()));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("EMD sample".into()));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len(), b.len());
    let (mut i, mut j) = (0, 0);
    let mut x = a[0].min(b[0]);
    let mut total = 0.0;
    while i < n || j < m {
        let next = match (a.get(i), b.get(j)) {
            (Some(&u), Some(&v)) => u.min(v),
            (Some(&u), None) => u,
            (None, Some(&v)) => v,
            (None, None) => unreachable!(),
        };
        // Counts are exact integers, so compare with a common denominator.
        let diff = (i * m).abs_diff(j * n) as f64 / (n * m) as f64;
        total += diff * (next - x);
        x = next;
        while i < n && a[i] == x {
            i += 1;
        }
        while j < m && b[j] == x {
            j += 1;
        }
    }
    Ok(total)
}

/// Mean of per-column EMDs between two matrices with equal column counts.
pub fn emd_per_dimension(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<f64> {
    if x.ncols() != y.ncols() {
        return Err(Error::Shape(format!("column counts differ: {} vs {}", x.ncols(), y.ncols())));
    }
    let mut sum = 0.0;
    for (cx, cy) in x.column_iter().zip(y.column_iter()) {
        sum += emd_1d(cx.as_slice(), cy.as_slice())?;
    }
    Ok(sum / x.ncols().max(1) as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Displacement {
    pub encoder: f64,
    pub decoder: f64,
    /// Per-tensor relative displacement, in layout order.
    pub per_tensor: Vec<(String, f64)>,
    /// Tensors left out because their base norm is zero.
    pub skipped: Vec<String>,
}

impl Displacement {
    pub fn get(&self, c: Component) -> f64 {
        match c {
            Component::Encoder => self.encoder,
            Component::Decoder => self.decoder,
        }
    }
}

/// Relative L2 displacement per tensor, then the unweighted mean over
/// each component's tensors.
pub fn weight_displacement<T: Real>(base: &Parameters<T>, ft: &Parameters<T>) -> Result<Displacement> {
    if !base.same_layout(ft) {
        return Err(Error::Shape("parameter layouts differ".into()));
    }
    let mut per_tensor = Vec::new();
    let mut skipped = Vec::new();
    let mut sums = [(0.0, 0usize); 2];
    for (b, f) in base.tensors.iter().zip(&ft.tensors) {
        let bn = b.tensor.norm();
        if bn == 0.0 {
            skipped.push(b.name.clone());
            continue;
        }
        let dn = b
            .tensor
            .data
            .iter()
            .zip(&f.tensor.data)
            .map(|(x, y)| (y.f64() - x.f64()).powi(2))
            .sum::<f64>()
            .sqrt();
        let d = dn / bn;
        per_tensor.push((b.name.clone(), d));
        let s = &mut sums[b.component.tag() as usize];
        s.0 += d;
        s.1 += 1;
    }
    let mean = |(s, n): (f64, usize)| if n == 0 { 0.0 } else { s / n as f64 };
    Ok(Displacement {
        encoder: mean(sums[0]),
        decoder: mean(sums[1]),
        per_tensor,
        skipped,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    /// Descending.
    pub singular_values: Vec<f64>,
    pub effective_rank: usize,
    /// Smallest over largest singular value.
    pub tail: f64,
}

/// Singular spectrum of the column-centered matrix.
pub fn spectral_stats(x: &DMatrix<f64>, energy_threshold: f64) -> Result<Spectrum> {
    spectral_stats_raw(&center_columns(x), energy_threshold)
}

/// As [`spectral_stats`] but without centering.
pub fn spectral_stats_raw(x: &DMatrix<f64>, energy_threshold: f64) -> Result<Spectrum> {
    if x.nrows() < 2 || x.ncols() < 2 {
        return Err(Error::Degenerate(format!("spectrum of a {}x{} matrix", x.nrows(), x.ncols())));
    }
    if !(energy_threshold > 0.0 && energy_threshold <= 1.0) {
        return Err(Error::Config(format!("energy threshold {energy_threshold} outside (0, 1]")));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("spectrum input".into()));
    }
    let mut sv: Vec<f64> = x.clone().svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    if sv[0] == 0.0 {
        return Err(Error::Degenerate("all-zero matrix".into()));
    }
    Ok(Spectrum {
        effective_rank: effective_rank(&sv, energy_threshold),
        tail: sv[sv.len() - 1] / sv[0],
        singular_values: sv,
    })
}

/// Smallest m whose leading m squared singular values hold the threshold
/// share of the total energy.
pub fn effective_rank(singular_values: &[f64], energy_threshold: f64) -> usize {
    let total: f64 = singular_values.iter().map(|s| s * s).sum();
    let mut acc = 0.0;
    for (i, s) in singular_values.iter().enumerate() {
        acc += s * s;
        if acc >= energy_threshold * total {
            return i + 1;
        }
    }
    singular_values.len()
}
