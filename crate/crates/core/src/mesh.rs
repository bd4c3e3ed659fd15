//! Structured triangulation of the unit square with a square subdomain
//! partition and edge classification.
//!
//! The `(n m) x (n m)` grid of squares is split along the lower-left to
//! upper-right diagonal. Vertices are numbered row by row (`j * (N + 1) + i`),
//! triangles two per square (lower then upper), and edges in order of first
//! appearance while walking triangles.

use serde::Serialize;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MeshConfig {
    /// Subdomains per side `n`; `H = 1 / n`.
    pub subdomains_per_side: usize,
    /// Elements per subdomain side `m`; `h = H / m`.
    pub elements_per_subdomain_side: usize,
}

impl MeshConfig {
    pub fn new(subdomains_per_side: usize, elements_per_subdomain_side: usize) -> Self {
        Self {
            subdomains_per_side,
            elements_per_subdomain_side,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.subdomains_per_side == 0 || self.elements_per_subdomain_side == 0 {
            return Err(Error::Config(format!(
                "mesh needs at least one subdomain and one element per side, got n={} m={}",
                self.subdomains_per_side, self.elements_per_subdomain_side
            )));
        }
        Ok(())
    }

    pub fn subdomain_size(&self) -> f64 {
        1.0 / self.subdomains_per_side as f64
    }

    pub fn element_size(&self) -> f64 {
        self.subdomain_size() / self.elements_per_subdomain_side as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeClass {
    /// On the outer boundary; carries no trace unknowns.
    Dirichlet,
    /// Shared by two triangles of the same subdomain.
    Interior,
    /// Shared by triangles of two different subdomains.
    Interface,
}

#[derive(Debug, Clone, Serialize)]
pub struct Triangle {
    /// Counter-clockwise vertex indices.
    pub vertices: [usize; 3],
    pub subdomain: usize,
    /// Local edge `l` is opposite local vertex `l`.
    pub edges: [usize; 3],
}

#[derive(Debug, Clone, Serialize)]
pub struct Edge {
    /// Endpoints with `vertices[0] < vertices[1]`; traces are parametrized
    /// from the first to the second.
    pub vertices: [usize; 2],
    /// Adjacent triangles, ascending.
    pub triangles: Vec<usize>,
    /// Unit normal pointing out of `triangles[0]`.
    pub normal: [f64; 2],
    pub class: EdgeClass,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Bottom,
    Right,
    Top,
    Left,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Bottom, Side::Right, Side::Top, Side::Left];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// Macro-edge along `x`, separating a subdomain from the one above it.
    Horizontal,
    /// Macro-edge along `y`, separating a subdomain from the one to its right.
    Vertical,
}

/// The common boundary `E_ij` of two adjacent subdomains.
#[derive(Debug, Clone, Serialize)]
pub struct MacroEdge {
    /// `(master, other)`; the master is the lower subdomain index.
    pub subdomains: (usize, usize),
    pub orientation: Orientation,
    /// Mesh edges ordered by increasing coordinate along the macro-edge.
    pub edges: Vec<usize>,
    pub start: [f64; 2],
    pub end: [f64; 2],
    /// Unit normal pointing out of the master subdomain.
    pub master_normal: [f64; 2],
}

impl MacroEdge {
    pub fn length(&self) -> f64 {
        ((self.end[0] - self.start[0]).powi(2) + (self.end[1] - self.start[1]).powi(2)).sqrt()
    }

    /// Affine arc-length parameter in `[-1, 1]`, increasing along the edge.
    pub fn parameter(&self, x: [f64; 2]) -> f64 {
        let len = self.length();
        let t = ((x[0] - self.start[0]) * (self.end[0] - self.start[0])
            + (x[1] - self.start[1]) * (self.end[1] - self.start[1]))
            / (len * len);
        2.0 * t - 1.0
    }

    /// `+1` for the master subdomain, `-1` for the other side.
    pub fn normal_sign(&self, subdomain: usize) -> f64 {
        if subdomain == self.subdomains.0 {
            1.0
        } else {
            debug_assert_eq!(subdomain, self.subdomains.1);
            -1.0
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Mesh {
    #[serde(skip)]
    pub config: MeshConfig,
    pub vertices: Vec<[f64; 2]>,
    pub triangles: Vec<Triangle>,
    pub edges: Vec<Edge>,
    /// Per subdomain, its boundary edges grouped by side
    /// (bottom, right, top, left), each ordered by increasing coordinate.
    #[serde(skip)]
    pub subdomain_boundaries: Vec<[Vec<usize>; 4]>,
    #[serde(skip)]
    pub macro_edges: Vec<MacroEdge>,
}

impl Mesh {
    pub fn num_subdomains(&self) -> usize {
        self.config.subdomains_per_side * self.config.subdomains_per_side
    }

    pub fn subdomain_size(&self) -> f64 {
        self.config.subdomain_size()
    }

    pub fn element_size(&self) -> f64 {
        self.config.element_size()
    }

    /// Triangles of subdomain `s` in ascending order.
    pub fn subdomain_triangles(&self, s: usize) -> Vec<usize> {
        (0..self.triangles.len())
            .filter(|&t| self.triangles[t].subdomain == s)
            .collect()
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t].vertices.map(|v| self.vertices[v]);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        let [a, b] = self.edges[e].vertices.map(|v| self.vertices[v]);
        ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt()
    }

    pub fn edge_midpoint(&self, e: usize) -> [f64; 2] {
        let [a, b] = self.edges[e].vertices.map(|v| self.vertices[v]);
        [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
    }

    /// Outward unit normal of triangle `t` on mesh edge `e`.
    pub fn outward_normal(&self, t: usize, e: usize) -> [f64; 2] {
        let edge = &self.edges[e];
        if edge.triangles[0] == t {
            edge.normal
        } else {
            debug_assert_eq!(edge.triangles.get(1), Some(&t));
            [-edge.normal[0], -edge.normal[1]]
        }
    }

    pub fn count(&self, class: EdgeClass) -> usize {
        self.edges.iter().filter(|e| e.class == class).count()
    }

    /// Serializes vertices, triangles and edge classes as JSON.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Builds the structured mesh for `cfg`.
pub fn build_structured_mesh(cfg: MeshConfig) -> Result<Mesh> {
    cfg.validate()?;
    let n = cfg.subdomains_per_side;
    let m = cfg.elements_per_subdomain_side;
    let big_n = n * m;
    let h = 1.0 / big_n as f64;
    let vid = |i: usize, j: usize| j * (big_n + 1) + i;

    let mut vertices = Vec::with_capacity((big_n + 1) * (big_n + 1));
    for j in 0..=big_n {
        for i in 0..=big_n {
            vertices.push([i as f64 * h, j as f64 * h]);
        }
    }

    let mut triangles = Vec::with_capacity(2 * big_n * big_n);
    for j in 0..big_n {
        for i in 0..big_n {
            let subdomain = (j / m) * n + i / m;
            let (v00, v10, v11, v01) = (vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1));
            triangles.push(Triangle {
                vertices: [v00, v10, v11],
                subdomain,
                edges: [0; 3],
            });
            triangles.push(Triangle {
                vertices: [v00, v11, v01],
                subdomain,
                edges: [0; 3],
            });
        }
    }

    // edge lookup keyed by the smaller endpoint; each vertex has at most 3 "forward" edges
    let mut forward: Vec<Vec<(usize, usize)>> = vec![Vec::new(); vertices.len()];
    let mut edges: Vec<Edge> = Vec::with_capacity(3 * big_n * big_n + 2 * big_n);
    for t in 0..triangles.len() {
        for l in 0..3 {
            let a = triangles[t].vertices[(l + 1) % 3];
            let b = triangles[t].vertices[(l + 2) % 3];
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let found = forward[lo].iter().find(|&&(other, _)| other == hi).map(|&(_, e)| e);
            let e = match found {
                Some(e) => {
                    edges[e].triangles.push(t);
                    e
                }
                None => {
                    let e = edges.len();
                    // outward normal of t: edge a->b runs counter-clockwise, so rotate clockwise
                    let (pa, pb) = (vertices[a], vertices[b]);
                    let (dx, dy) = (pb[0] - pa[0], pb[1] - pa[1]);
                    let len = (dx * dx + dy * dy).sqrt();
                    edges.push(Edge {
                        vertices: [lo, hi],
                        triangles: vec![t],
                        normal: [dy / len, -dx / len],
                        class: EdgeClass::Dirichlet,
                    });
                    forward[lo].push((hi, e));
                    e
                }
            };
            triangles[t].edges[l] = e;
        }
    }
    for edge in &mut edges {
        edge.class = match edge.triangles.as_slice() {
            [_] => EdgeClass::Dirichlet,
            [t0, t1] if triangles[*t0].subdomain != triangles[*t1].subdomain => EdgeClass::Interface,
            [_, _] => EdgeClass::Interior,
            other => unreachable!("edge with {} triangles", other.len()),
        };
    }

    let subdomain_boundaries = collect_subdomain_boundaries(&cfg, &vertices, &edges);
    let mut mesh = Mesh {
        config: cfg,
        vertices,
        triangles,
        edges,
        subdomain_boundaries,
        macro_edges: Vec::new(),
    };
    mesh.macro_edges = build_macro_edges(&mesh);
    Ok(mesh)
}

fn collect_subdomain_boundaries(cfg: &MeshConfig, vertices: &[[f64; 2]], edges: &[Edge]) -> Vec<[Vec<usize>; 4]> {
    let n = cfg.subdomains_per_side;
    let m = cfg.elements_per_subdomain_side;
    let big_n = n * m;
    let mut out: Vec<[Vec<usize>; 4]> = (0..n * n).map(|_| Default::default()).collect();
    // grid coordinates of each vertex recovered from the row-major numbering
    let grid = |v: usize| (v % (big_n + 1), v / (big_n + 1));
    for (e, edge) in edges.iter().enumerate() {
        let (i0, j0) = grid(edge.vertices[0]);
        let (i1, j1) = grid(edge.vertices[1]);
        if j0 == j1 && j0 % m == 0 {
            // horizontal edge on a subdomain row boundary
            let col = i0.min(i1) / m;
            let row = j0 / m;
            if row < n {
                out[row * n + col][0].push(e);
            }
            if row > 0 {
                out[(row - 1) * n + col][2].push(e);
            }
        } else if i0 == i1 && i0 % m == 0 {
            let row = j0.min(j1) / m;
            let col = i0 / m;
            if col < n {
                out[row * n + col][3].push(e);
            }
            if col > 0 {
                out[row * n + col - 1][1].push(e);
            }
        }
    }
    for sides in &mut out {
        for (s, list) in sides.iter_mut().enumerate() {
            let axis = if s % 2 == 0 { 0 } else { 1 };
            list.sort_by(|&a, &b| {
                let ma = vertices[edges[a].vertices[0]][axis];
                let mb = vertices[edges[b].vertices[0]][axis];
                ma.total_cmp(&mb)
            });
        }
    }
    out
}

fn build_macro_edges(mesh: &Mesh) -> Vec<MacroEdge> {
    let n = mesh.config.subdomains_per_side;
    let big_h = mesh.subdomain_size();
    let mut out = Vec::with_capacity(2 * n * n.saturating_sub(1));
    for row in 0..n {
        for col in 0..n {
            let s = row * n + col;
            if col + 1 < n {
                let x = (col + 1) as f64 * big_h;
                out.push(MacroEdge {
                    subdomains: (s, s + 1),
                    orientation: Orientation::Vertical,
                    edges: mesh.subdomain_boundaries[s][1].clone(),
                    start: [x, row as f64 * big_h],
                    end: [x, (row + 1) as f64 * big_h],
                    master_normal: [1.0, 0.0],
                });
            }
            if row + 1 < n {
                let y = (row + 1) as f64 * big_h;
                out.push(MacroEdge {
                    subdomains: (s, s + n),
                    orientation: Orientation::Horizontal,
                    edges: mesh.subdomain_boundaries[s][2].clone(),
                    start: [col as f64 * big_h, y],
                    end: [(col + 1) as f64 * big_h, y],
                    master_normal: [0.0, 1.0],
                });
            }
        }
    }
    out
}

/// The macro-edges of `mesh`, one per pair of adjacent subdomains.
pub fn macro_edges(mesh: &Mesh) -> &[MacroEdge] {
    &mesh.macro_edges
}
