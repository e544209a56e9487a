//! Static graphs: Gaussian proximity over inter-area distances and identity.

use crate::data::{AreaRegistry, CoordKind};
use crate::error::{Error, Result};
use crate::numerics::Tensor;

const EARTH_RADIUS_M: f64 = 6_371_008.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphKind {
    Identity,
    Proximity,
    Learned,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdjacencyMatrix {
    pub kind: GraphKind,
    pub matrix: Tensor,
}

impl AdjacencyMatrix {
    pub fn identity(n: usize) -> Self {
        Self {
            kind: GraphKind::Identity,
            matrix: Tensor::eye(n),
        }
    }

    pub fn size(&self) -> usize {
        self.matrix.rows()
    }
}

/// Great-circle distance in meters between two `(lat, lon)` points in degrees.
pub fn haversine_m(a: (f64, f64), b: (f64, f64)) -> f64 {
    let (lat1, lon1) = (a.0.to_radians(), a.1.to_radians());
    let (lat2, lon2) = (b.0.to_radians(), b.1.to_radians());
    let h = ((lat2 - lat1) / 2.0).sin().powi(2)
        + lat1.cos() * lat2.cos() * ((lon2 - lon1) / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

/// Symmetric `N × N` distances in meters with a zero diagonal.
pub fn distance_matrix(registry: &AreaRegistry) -> Result<Tensor> {
    let n = registry.len();
    if registry.coords.len() != n {
        return Err(Error::Schema(format!(
            "registry has {n} ids but {} coordinates",
            registry.coords.len()
        )));
    }
    if let Some(i) = registry
        .coords
        .iter()
        .position(|(a, b)| !a.is_finite() || !b.is_finite())
    {
        return Err(Error::Schema(format!(
            "area {} has a missing coordinate",
            registry.ids[i]
        )));
    }
    let mut d = Tensor::zeros(&[n, n]);
    for i in 0..n {
        for j in (i + 1)..n {
            let (a, b) = (registry.coords[i], registry.coords[j]);
            let dist = match registry.kind {
                CoordKind::LatLon => haversine_m(a, b),
                CoordKind::Xy => ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt(),
            };
            d.set(i, j, dist);
            d.set(j, i, dist);
        }
    }
    Ok(d)
}

/// Population standard deviation of the distance entries.
pub fn distance_sigma(distances: &Tensor, include_diagonal: bool) -> f64 {
    let n = distances.rows();
    let vals: Vec<f64> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|&(i, j)| include_diagonal || i != j)
        .map(|(i, j)| distances.get(i, j))
        .collect();
    if vals.is_empty() {
        return 0.0;
    }
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64).sqrt()
}

/// Unnormalized kernel `exp(-(d/σ)²)`. A zero σ (all distances equal) keeps
/// only the zero-distance entries.
pub fn gaussian_kernel(distances: &Tensor, sigma: f64) -> Tensor {
    distances.map(|d| {
        if sigma > 0.0 {
            (-(d / sigma).powi(2)).exp()
        } else if d == 0.0 {
            1.0
        } else {
            0.0
        }
    })
}

/// Row-normalized Gaussian proximity.
pub fn gaussian_proximity(
    distances: &Tensor,
    include_diagonal_in_sigma: bool,
) -> Result<AdjacencyMatrix> {
    let n = distances.rows();
    if distances.shape() != [n, n] {
        return Err(Error::dim("gaussian_proximity", distances.shape(), &[n, n]));
    }
    if distances.data().iter().any(|d| !(*d >= 0.0)) {
        return Err(Error::Contract("distances must be non-negative".into()));
    }
    let sigma = distance_sigma(distances, include_diagonal_in_sigma);
    let mut k = gaussian_kernel(distances, sigma);
    for i in 0..n {
        let total: f64 = k.row(i).iter().sum();
        for j in 0..n {
            k.set(i, j, k.get(i, j) / total);
        }
    }
    Ok(AdjacencyMatrix {
        kind: GraphKind::Proximity,
        matrix: k,
    })
}

/// Writes a matrix as comma-separated rows.
pub fn dump_matrix(matrix: &Tensor, labels: &[String]) -> String {
    let mut out = String::from("area_id");
    for l in labels {
        out.push(',');
        out.push_str(l);
    }
    out.push('\n');
    for (i, l) in labels.iter().enumerate() {
        out.push_str(l);
        for v in matrix.row(i) {
            out.push(',');
            out.push_str(&format!("{v}"));
        }
        out.push('\n');
    }
    out
}
