//! Graded radial meshes on a truncated window `[r_min, r_max]` of `(0, R)`.
//!
//! Nodes are uniform in a mesh coordinate `t`; for the default log mesh
//! `r = e^t`, so power weights become translation invariant in `t`.

use serde::{Deserialize, Serialize};

use crate::error::GridError;

/// Default upper truncation for `R = inf`.
pub const DEFAULT_R_MAX_INFINITE: f64 = 1e4;
/// Default node count.
pub const DEFAULT_NODES: usize = 2048;
/// Smallest accepted node count.
pub const MIN_NODES: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialDomain {
    pub dim: u32,
    /// `f64::INFINITY` for the whole space.
    #[serde(serialize_with = "ser_radius")]
    pub radius: f64,
}

fn ser_radius<S: serde::Serializer>(r: &f64, s: S) -> Result<S::Ok, S::Error> {
    if r.is_finite() {
        s.serialize_f64(*r)
    } else {
        s.serialize_str("inf")
    }
}

impl RadialDomain {
    pub fn new(dim: u32, radius: f64) -> Result<Self, GridError> {
        if dim < 1 {
            return Err(GridError::Domain(format!("dimension must be >= 1, got {dim}")));
        }
        if !(radius > 0.0) {
            return Err(GridError::Domain(format!("radius must be positive, got {radius}")));
        }
        Ok(RadialDomain { dim, radius })
    }

    pub fn whole_space(dim: u32) -> Self {
        RadialDomain {
            dim,
            radius: f64::INFINITY,
        }
    }

    pub fn is_bounded(&self) -> bool {
        self.radius.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeshKind {
    /// Geometric spacing, `r = e^t`.
    Log,
    /// Arithmetic spacing, `r = t`.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub nodes: usize,
    pub r_min: Option<f64>,
    pub r_max: Option<f64>,
    pub kind: MeshKind,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            nodes: DEFAULT_NODES,
            r_min: None,
            r_max: None,
            kind: MeshKind::Log,
        }
    }
}

impl GridSpec {
    pub fn with_nodes(nodes: usize) -> Self {
        GridSpec {
            nodes,
            ..Default::default()
        }
    }

    pub fn bounds(mut self, r_min: f64, r_max: f64) -> Self {
        self.r_min = Some(r_min);
        self.r_max = Some(r_max);
        self
    }
}

/// Mesh nodes with the map derivatives needed by the form assembly and
/// positive quadrature weights for `dr`.
#[derive(Debug, Clone, Serialize)]
pub struct Grid {
    pub domain: RadialDomain,
    pub kind: MeshKind,
    /// Spacing in the mesh coordinate.
    pub h: f64,
    pub t: Vec<f64>,
    pub r: Vec<f64>,
    /// Quadrature weights for `∫ f dr`.
    pub weights: Vec<f64>,
    pub r_min: f64,
    pub r_max: f64,
}

fn default_r_min(domain: &RadialDomain) -> f64 {
    1e-4 * domain.radius.min(1.0)
}

/// Builds a deterministic grid. Unset bounds take the defaults
/// `r_min = 1e-4 * min(R, 1)` and `r_max = R` (or `1e4` when `R = inf`).
pub fn build_grid(domain: RadialDomain, spec: &GridSpec) -> Result<Grid, GridError> {
    if spec.nodes < MIN_NODES {
        return Err(GridError::Bounds(format!(
            "need at least {MIN_NODES} nodes, got {}",
            spec.nodes
        )));
    }
    let r_min = spec.r_min.unwrap_or_else(|| default_r_min(&domain));
    let r_max = spec.r_max.unwrap_or(if domain.is_bounded() {
        domain.radius
    } else {
        DEFAULT_R_MAX_INFINITE
    });
    if !(r_min > 0.0 && r_min.is_finite()) {
        return Err(GridError::Bounds(format!("r_min must be positive, got {r_min}")));
    }
    if !(r_max > r_min && r_max.is_finite()) {
        return Err(GridError::Bounds(format!("need r_min < r_max < inf, got [{r_min}, {r_max}]")));
    }
    if r_max > domain.radius {
        return Err(GridError::Bounds(format!(
            "r_max = {r_max} exceeds the radius {}",
            domain.radius
        )));
    }
    let m = spec.nodes;
    let (t0, t1) = match spec.kind {
        MeshKind::Log => (r_min.ln(), r_max.ln()),
        MeshKind::Uniform => (r_min, r_max),
    };
    let h = (t1 - t0) / (m - 1) as f64;
    let t: Vec<f64> = (0..m).map(|i| t0 + i as f64 * h).collect();
    let mut r: Vec<f64> = match spec.kind {
        MeshKind::Log => t.iter().map(|t| t.exp()).collect(),
        MeshKind::Uniform => t.clone(),
    };
    // pin the ends exactly
    r[0] = r_min;
    r[m - 1] = r_max;
    Ok(Grid::from_parts(domain, spec.kind, h, t, r))
}

/// Gregory end-corrected trapezoid weights in the mesh coordinate (order 4),
/// falling back to the plain trapezoid rule on very small grids.
fn coordinate_weights(m: usize, h: f64) -> Vec<f64> {
    let mut w = vec![h; m];
    if m >= 8 {
        let ends = [3.0 / 8.0, 7.0 / 6.0, 23.0 / 24.0];
        for (i, c) in ends.iter().enumerate() {
            w[i] = c * h;
            w[m - 1 - i] = c * h;
        }
    } else {
        w[0] = 0.5 * h;
        w[m - 1] = 0.5 * h;
    }
    w
}

impl Grid {
    fn from_parts(domain: RadialDomain, kind: MeshKind, h: f64, t: Vec<f64>, r: Vec<f64>) -> Self {
        let m = r.len();
        let cw = coordinate_weights(m, h);
        let weights = (0..m)
            .map(|i| {
                let jac = match kind {
                    MeshKind::Log => r[i],
                    MeshKind::Uniform => 1.0,
                };
                cw[i] * jac
            })
            .collect();
        Grid {
            domain,
            kind,
            h,
            r_min: r[0],
            r_max: r[m - 1],
            t,
            r,
            weights,
        }
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    /// `r(t)` for an arbitrary mesh coordinate.
    pub fn r_at(&self, t: f64) -> f64 {
        match self.kind {
            MeshKind::Log => t.exp(),
            MeshKind::Uniform => t,
        }
    }

    /// `dr/dt` at mesh coordinate `t`.
    pub fn jacobian_at(&self, t: f64) -> f64 {
        match self.kind {
            MeshKind::Log => t.exp(),
            MeshKind::Uniform => 1.0,
        }
    }

    /// `(d²r/dt²) / (dr/dt)`, constant for both mesh kinds.
    pub fn curvature(&self) -> f64 {
        match self.kind {
            MeshKind::Log => 1.0,
            MeshKind::Uniform => 0.0,
        }
    }

    /// Whether the upper end is an artificial cut rather than the boundary `R`.
    pub fn right_truncated(&self) -> bool {
        !self.domain.is_bounded() || self.r_max < self.domain.radius
    }

    /// Grid over the node range `lo..=hi`, same spacing.
    pub fn window(&self, lo: usize, hi: usize) -> Result<Grid, GridError> {
        if hi >= self.len() || hi < lo + MIN_NODES - 1 {
            return Err(GridError::Bounds(format!("bad window {lo}..={hi} of {}", self.len())));
        }
        let mut r = self.r[lo..=hi].to_vec();
        let t = self.t[lo..=hi].to_vec();
        r[0] = self.r[lo];
        Ok(Grid::from_parts(self.domain, self.kind, self.h, t, r))
    }

    /// Same bounds and kind with a different node count.
    pub fn with_nodes(&self, nodes: usize) -> Result<Grid, GridError> {
        build_grid(
            self.domain,
            &GridSpec {
                nodes,
                r_min: Some(self.r_min),
                r_max: Some(self.r_max),
                kind: self.kind,
            },
        )
    }

    pub fn spec(&self) -> GridSpec {
        GridSpec {
            nodes: self.len(),
            r_min: Some(self.r_min),
            r_max: Some(self.r_max),
            kind: self.kind,
        }
    }
}

/// `∫ f dr` over the grid window from samples at the nodes.
pub fn quad_integral(grid: &Grid, f: &[f64]) -> Result<f64, GridError> {
    if f.len() != grid.len() {
        return Err(GridError::Length {
            got: f.len(),
            want: grid.len(),
        });
    }
    let mut acc = 0.0;
    for (i, (&fi, &wi)) in f.iter().zip(&grid.weights).enumerate() {
        if !fi.is_finite() {
            return Err(GridError::NonFinite { index: i, r: grid.r[i] });
        }
        acc += fi * wi;
    }
    Ok(acc)
}
