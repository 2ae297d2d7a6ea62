use std::f64::consts::PI;
use std::io::Write;
use std::sync::{Arc, OnceLock};

use statrs::distribution::{ContinuousCDF, Normal};

use super::kernel::equivalent_radius;
use super::{dot, gauss_legendre, Domain, KernelOperator, SphereTransform};
use crate::error::{invalid, Error, Result};

/// How the nodes were laid out; used for cell lookup and spectral work.
#[derive(Debug, Clone, PartialEq)]
pub enum GridLayout {
    /// Gauss–Legendre rings in `cos θ` × equispaced longitudes (S² only).
    /// Node index `j * n_phi + k`.
    SphereRings {
        n_theta: usize,
        n_phi: usize,
        cos_nodes: Vec<f64>,
        gl_weights: Vec<f64>,
        /// Cell boundaries in `cos θ`, length `n_theta + 1`.
        band_edges: Vec<f64>,
    },
    /// Gauss–Legendre in `r²` × equispaced angles. Node index `j * n_ang + k`.
    DiskRings {
        n_r: usize,
        n_ang: usize,
        /// Cell boundaries in `r²`, length `n_r + 1`.
        band_edges: Vec<f64>,
    },
    /// Equal-weight node set; cells are nearest-node regions.
    Scattered,
}

/// Nodes and positive weights discretizing the surface measure of a domain.
pub struct QuadratureGrid {
    domain: Domain,
    dim: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    cell_radius: Vec<f64>,
    band_limit: Option<usize>,
    layout: GridLayout,
    transform: OnceLock<Arc<SphereTransform>>,
    operator: OnceLock<Arc<KernelOperator>>,
}

impl std::fmt::Debug for QuadratureGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("QuadratureGrid")
            .field("domain", &self.domain)
            .field("len", &self.len())
            .field("band_limit", &self.band_limit)
            .finish()
    }
}

/// Build a quadrature grid.
///
/// * `Sphere{2}`: `resolution = [n_theta, n_phi]`, band limit
///   `min(n_theta - 1, (n_phi - 1) / 2)`.
/// * `Sphere{n}`, `n ≠ 2`: `resolution = [m]` equal-weight points
///   (equispaced on S¹, Halton-mapped Gaussians otherwise).
/// * `Disk2d`: `resolution = [n_r, n_ang]`.
pub fn build_grid(domain: Domain, resolution: &[usize]) -> Result<QuadratureGrid> {
    if resolution.is_empty() || resolution.contains(&0) {
        return Err(invalid("resolution", "must be positive"));
    }
    match domain {
        Domain::Sphere { n: 2 } => {
            let [n_theta, n_phi] = two(resolution)?;
            if n_phi < 3 {
                return Err(invalid("resolution", "n_phi must be at least 3"));
            }
            Ok(sphere2_grid(n_theta, n_phi))
        }
        Domain::Sphere { n } => {
            if resolution.len() != 1 {
                return Err(invalid("resolution", format!("S^{n} takes a single point count")));
            }
            Ok(scattered_sphere_grid(n, resolution[0]))
        }
        Domain::Disk2d => {
            let [n_r, n_ang] = two(resolution)?;
            Ok(disk_grid(n_r, n_ang))
        }
        Domain::Plane2d => Err(Error::Unsupported("quadrature grid on the unbounded plane".into())),
    }
}

fn two(res: &[usize]) -> Result<[usize; 2]> {
    match res {
        [a, b] => Ok([*a, *b]),
        _ => Err(invalid("resolution", "expected two integers")),
    }
}

fn band_edges(gl_weights: &[f64], lo: f64, scale: f64) -> Vec<f64> {
    let mut edges = Vec::with_capacity(gl_weights.len() + 1);
    let mut acc = lo;
    edges.push(acc);
    for w in gl_weights {
        acc += w * scale;
        edges.push(acc);
    }
    edges
}

fn sphere2_grid(n_theta: usize, n_phi: usize) -> QuadratureGrid {
    let (t, w) = gauss_legendre(n_theta);
    let dphi = 2.0 * PI / n_phi as f64;
    let mut nodes = Vec::with_capacity(3 * n_theta * n_phi);
    let mut weights = Vec::with_capacity(n_theta * n_phi);
    for j in 0..n_theta {
        let s = (1.0 - t[j] * t[j]).sqrt();
        for k in 0..n_phi {
            let phi = dphi * k as f64;
            nodes.extend_from_slice(&[s * phi.cos(), s * phi.sin(), t[j]]);
            weights.push(w[j] * dphi);
        }
    }
    let cell_radius = weights.iter().map(|&w| equivalent_radius(2, w)).collect();
    let band_limit = (n_theta - 1).min((n_phi - 1) / 2);
    let mut edges = band_edges(&w, -1.0, 1.0);
    *edges.last_mut().unwrap() = 1.0;
    QuadratureGrid::assemble(
        Domain::sphere(2),
        nodes,
        weights,
        cell_radius,
        Some(band_limit),
        GridLayout::SphereRings {
            n_theta,
            n_phi,
            cos_nodes: t,
            gl_weights: w,
            band_edges: edges,
        },
    )
}

fn disk_grid(n_r: usize, n_ang: usize) -> QuadratureGrid {
    let (t, w) = gauss_legendre(n_r);
    let dphi = 2.0 * PI / n_ang as f64;
    let mut nodes = Vec::with_capacity(2 * n_r * n_ang);
    let mut weights = Vec::with_capacity(n_r * n_ang);
    for j in 0..n_r {
        let r = (0.5 * (1.0 + t[j])).sqrt();
        for k in 0..n_ang {
            let phi = dphi * k as f64;
            nodes.extend_from_slice(&[r * phi.cos(), r * phi.sin()]);
            // dA = ½ d(r²) dφ and d(r²) = dt / 2
            weights.push(0.25 * w[j] * dphi);
        }
    }
    let cell_radius = weights.iter().map(|&w| equivalent_radius(2, w)).collect();
    let mut edges = band_edges(&w, 0.0, 0.5);
    *edges.last_mut().unwrap() = 1.0;
    QuadratureGrid::assemble(
        Domain::Disk2d,
        nodes,
        weights,
        cell_radius,
        None,
        GridLayout::DiskRings {
            n_r,
            n_ang,
            band_edges: edges,
        },
    )
}

const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    let b = base as f64;
    while i > 0 {
        f /= b;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

fn scattered_sphere_grid(n: usize, m: usize) -> QuadratureGrid {
    let dim = n + 1;
    let mut nodes = Vec::with_capacity(dim * m);
    if n == 1 {
        for k in 0..m {
            let phi = 2.0 * PI * k as f64 / m as f64;
            nodes.extend_from_slice(&[phi.cos(), phi.sin()]);
        }
    } else {
        assert!(dim <= PRIMES.len(), "sphere dimension too large");
        let normal = Normal::standard();
        for i in 0..m {
            let mut x: Vec<f64> = (0..dim)
                .map(|d| normal.inverse_cdf(radical_inverse(i as u64 + 1, PRIMES[d])))
                .collect();
            let r = dot(&x, &x).sqrt();
            x.iter_mut().for_each(|c| *c /= r);
            nodes.extend_from_slice(&x);
        }
    }
    let area = super::sphere_area(n);
    let weights = vec![area / m as f64; m];
    let cell_radius = weights.iter().map(|&w| equivalent_radius(n, w)).collect();
    QuadratureGrid::assemble(Domain::sphere(n), nodes, weights, cell_radius, None, GridLayout::Scattered)
}

impl QuadratureGrid {
    fn assemble(
        domain: Domain,
        nodes: Vec<f64>,
        weights: Vec<f64>,
        cell_radius: Vec<f64>,
        band_limit: Option<usize>,
        layout: GridLayout,
    ) -> Self {
        QuadratureGrid {
            dim: domain.ambient_dim(),
            domain,
            nodes,
            weights,
            cell_radius,
            band_limit,
            layout,
            transform: OnceLock::new(),
            operator: OnceLock::new(),
        }
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.nodes[i * self.dim..(i + 1) * self.dim]
    }

    pub fn nodes(&self) -> impl Iterator<Item = &[f64]> {
        self.nodes.chunks_exact(self.dim)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn cell_radius(&self) -> &[f64] {
        &self.cell_radius
    }

    pub fn band_limit(&self) -> Option<usize> {
        self.band_limit
    }

    pub fn layout(&self) -> &GridLayout {
        &self.layout
    }

    /// Exact measure of the domain.
    pub fn measure(&self) -> f64 {
        self.domain.measure().expect("grids live on bounded domains")
    }

    /// `Σ wᵢ gᵢ`.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }

    /// `Σ wᵢ g(xᵢ)`.
    pub fn integrate_fn(&self, g: impl Fn(&[f64]) -> f64) -> f64 {
        self.nodes().zip(&self.weights).map(|(x, w)| w * g(x)).sum()
    }

    pub fn map_nodes(&self, g: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        self.nodes().map(g).collect()
    }

    /// Short descriptor, e.g. `S^2:64x128`.
    pub fn descriptor(&self) -> String {
        match &self.layout {
            GridLayout::SphereRings { n_theta, n_phi, .. } => format!("{}:{}x{}", self.domain, n_theta, n_phi),
            GridLayout::DiskRings { n_r, n_ang, .. } => format!("{}:{}x{}", self.domain, n_r, n_ang),
            GridLayout::Scattered => format!("{}:{}", self.domain, self.len()),
        }
    }

    /// Harmonic transform of an S² grid.
    pub fn transform(&self) -> Option<Arc<SphereTransform>> {
        let GridLayout::SphereRings {
            n_phi,
            cos_nodes,
            gl_weights,
            ..
        } = &self.layout
        else {
            return None;
        };
        let lmax = self.band_limit?;
        Some(
            self.transform
                .get_or_init(|| {
                    Arc::new(SphereTransform::new(cos_nodes, gl_weights, *n_phi, lmax).expect("valid band limit"))
                })
                .clone(),
        )
    }

    /// The potential operator `ρ ↦ ∫ G(·, y) ρ(y) dy` on this grid.
    pub fn operator(&self) -> Arc<KernelOperator> {
        self.operator.get_or_init(|| Arc::new(KernelOperator::for_grid(self))).clone()
    }

    /// Index of the cell containing `x`.
    pub fn locate(&self, x: &[f64]) -> usize {
        match &self.layout {
            GridLayout::SphereRings {
                n_phi, band_edges, ..
            } => {
                let j = band_of(band_edges, x[2]);
                let k = sector_of(x[1].atan2(x[0]), *n_phi);
                j * n_phi + k
            }
            GridLayout::DiskRings {
                n_ang, band_edges, ..
            } => {
                let j = band_of(band_edges, x[0] * x[0] + x[1] * x[1]);
                let k = sector_of(x[1].atan2(x[0]), *n_ang);
                j * n_ang + k
            }
            GridLayout::Scattered => {
                let mut best = 0;
                let mut best_d = f64::NEG_INFINITY;
                for (i, y) in self.nodes().enumerate() {
                    let d = dot(x, y);
                    if d > best_d {
                        best_d = d;
                        best = i;
                    }
                }
                best
            }
        }
    }

    /// CSV with node coordinates, weight and cell radius.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let coords: Vec<String> = (0..self.dim).map(|d| format!("x{d}")).collect();
        writeln!(out, "{},weight,cell_radius", coords.join(","))?;
        for i in 0..self.len() {
            let mut row: Vec<String> = self.node(i).iter().map(|v| format!("{v:e}")).collect();
            row.push(format!("{:e}", self.weights[i]));
            row.push(format!("{:e}", self.cell_radius[i]));
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

fn band_of(edges: &[f64], v: f64) -> usize {
    let n = edges.len() - 1;
    let idx = edges.partition_point(|&e| e <= v);
    idx.clamp(1, n) - 1
}

fn sector_of(phi: f64, n: usize) -> usize {
    let d = 2.0 * PI / n as f64;
    let k = (phi / d).round() as i64;
    k.rem_euclid(n as i64) as usize
}
