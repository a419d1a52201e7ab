use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Hemisphere {
    Left,
    Right,
    Midline,
}

impl Hemisphere {
    /// 10-20 naming: odd suffix left, even suffix right, `z` midline.
    pub fn from_channel_name(name: &str) -> Self {
        match name.trim().chars().last() {
            Some(c) if c.is_ascii_digit() => {
                if (c as u8 - b'0') % 2 == 1 {
                    Hemisphere::Left
                } else {
                    Hemisphere::Right
                }
            }
            _ => Hemisphere::Midline,
        }
    }
}

/// How attention bias is derived from the montage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BiasKind {
    /// `B_ij = 1` for adjacent channels, `0` otherwise.
    #[default]
    Adjacency,
    /// `B_ij = -d_ij`, the shortest weighted path length between channels.
    NegDistance,
}

/// Channel graph: undirected edges, hemisphere assignment and optional
/// unitless edge lengths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMontage", into = "RawMontage")]
pub struct MontageGraph {
    hemispheres: Vec<Hemisphere>,
    edges: Vec<(usize, usize)>,
    distances: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMontage {
    hemispheres: Vec<Hemisphere>,
    edges: Vec<(usize, usize)>,
    #[serde(default)]
    distances: Option<Vec<f64>>,
}

impl TryFrom<RawMontage> for MontageGraph {
    type Error = Error;
    fn try_from(raw: RawMontage) -> Result<Self> {
        MontageGraph::new(raw.hemispheres, raw.edges, raw.distances)
    }
}

impl From<MontageGraph> for RawMontage {
    fn from(m: MontageGraph) -> Self {
        RawMontage {
            hemispheres: m.hemispheres,
            edges: m.edges,
            distances: m.distances,
        }
    }
}

/// Approximate planar 10-20 positions, x to the right and y to the nose.
const POSITIONS: &[(&str, f64, f64)] = &[
    ("FP1", -0.3, 0.95),
    ("FP2", 0.3, 0.95),
    ("F7", -0.8, 0.6),
    ("F3", -0.4, 0.55),
    ("FZ", 0.0, 0.5),
    ("F4", 0.4, 0.55),
    ("F8", 0.8, 0.6),
    ("T3", -1.0, 0.0),
    ("T7", -1.0, 0.0),
    ("C3", -0.5, 0.0),
    ("CZ", 0.0, 0.0),
    ("C4", 0.5, 0.0),
    ("T4", 1.0, 0.0),
    ("T8", 1.0, 0.0),
    ("T5", -0.8, -0.6),
    ("P7", -0.8, -0.6),
    ("P3", -0.4, -0.55),
    ("PZ", 0.0, -0.5),
    ("P4", 0.4, -0.55),
    ("T6", 0.8, -0.6),
    ("P8", 0.8, -0.6),
    ("O1", -0.3, -0.95),
    ("O2", 0.3, -0.95),
];

const ADJACENCY_RADIUS: f64 = 0.65;

fn position(name: &str) -> Option<(f64, f64)> {
    let upper = name.trim().to_ascii_uppercase();
    POSITIONS
        .iter()
        .find(|(n, _, _)| *n == upper)
        .map(|&(_, x, y)| (x, y))
}

impl MontageGraph {
    pub fn new(
        hemispheres: Vec<Hemisphere>,
        edges: Vec<(usize, usize)>,
        distances: Option<Vec<f64>>,
    ) -> Result<Self> {
        let n = hemispheres.len();
        for &(a, b) in &edges {
            if a >= n || b >= n {
                return Err(Error::Config(format!("montage edge ({a}, {b}) references a missing node")));
            }
            if a == b {
                return Err(Error::Config(format!("montage self-loop on node {a}")));
            }
        }
        if let Some(d) = &distances {
            if d.len() != edges.len() {
                return Err(Error::Config(format!(
                    "{} distances for {} edges",
                    d.len(),
                    edges.len()
                )));
            }
            if d.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::Config("montage distances must be finite and non-negative".into()));
            }
        }
        Ok(Self {
            hemispheres,
            edges,
            distances,
        })
    }

    /// Nodes without edges, all assigned to the midline.
    pub fn unconnected(n: usize) -> Self {
        Self {
            hemispheres: vec![Hemisphere::Midline; n],
            edges: Vec::new(),
            distances: None,
        }
    }

    /// Builds the graph from 10-20 channel names. Channels whose names are
    /// not in the 10-20 table get a hemisphere from their suffix but no edges.
    pub fn from_channel_names<S: AsRef<str>>(names: &[S]) -> Self {
        let hemispheres = names
            .iter()
            .map(|n| Hemisphere::from_channel_name(n.as_ref()))
            .collect();
        let pos: Vec<Option<(f64, f64)>> = names.iter().map(|n| position(n.as_ref())).collect();
        let mut edges = Vec::new();
        let mut distances = Vec::new();
        for i in 0..names.len() {
            for j in i + 1..names.len() {
                if let (Some((xi, yi)), Some((xj, yj))) = (pos[i], pos[j]) {
                    let d = libm::hypot(xi - xj, yi - yj);
                    if d <= ADJACENCY_RADIUS {
                        edges.push((i, j));
                        distances.push(d);
                    }
                }
            }
        }
        Self {
            hemispheres,
            edges,
            distances: Some(distances),
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.hemispheres.len()
    }

    pub fn hemisphere(&self, node: usize) -> Hemisphere {
        self.hemispheres[node]
    }

    pub fn hemispheres(&self) -> &[Hemisphere] {
        &self.hemispheres
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn distances(&self) -> Option<&[f64]> {
        self.distances.as_deref()
    }

    pub fn nodes_in(&self, side: Hemisphere) -> Vec<usize> {
        (0..self.n_nodes())
            .filter(|&i| self.hemispheres[i] == side)
            .collect()
    }

    pub fn is_adjacent(&self, a: usize, b: usize) -> bool {
        self.edges
            .iter()
            .any(|&(x, y)| (x == a && y == b) || (x == b && y == a))
    }

    /// Symmetric `n x n` attention bias, row-major.
    pub fn bias_matrix(&self, kind: BiasKind) -> Vec<f64> {
        let n = self.n_nodes();
        let mut b = vec![0.0; n * n];
        match kind {
            BiasKind::Adjacency => {
                for &(i, j) in &self.edges {
                    b[i * n + j] = 1.0;
                    b[j * n + i] = 1.0;
                }
            }
            BiasKind::NegDistance => {
                let weight = |e: usize| self.distances.as_ref().map_or(1.0, |d| d[e]);
                let unreachable = 1.0 + (0..self.edges.len()).map(weight).sum::<f64>();
                let mut dist = vec![f64::INFINITY; n * n];
                for i in 0..n {
                    dist[i * n + i] = 0.0;
                }
                for (e, &(i, j)) in self.edges.iter().enumerate() {
                    let w = weight(e);
                    if w < dist[i * n + j] {
                        dist[i * n + j] = w;
                        dist[j * n + i] = w;
                    }
                }
                for k in 0..n {
                    for i in 0..n {
                        for j in 0..n {
                            let via = dist[i * n + k] + dist[k * n + j];
                            if via < dist[i * n + j] {
                                dist[i * n + j] = via;
                            }
                        }
                    }
                }
                for (out, d) in b.iter_mut().zip(&dist) {
                    *out = -if d.is_finite() { *d } else { unreachable };
                }
            }
        }
        b
    }
}

/// Channel names for an `n`-channel referential 10-20 montage: left/right
/// pairs first, then midline electrodes.
pub fn standard_channel_names(n: usize) -> Vec<String> {
    const ORDER: &[&str] = &[
        "Fp1", "Fp2", "F3", "F4", "C3", "C4", "P3", "P4", "O1", "O2", "F7", "F8", "T3", "T4", "T5",
        "T6", "Fz", "Cz", "Pz",
    ];
    (0..n)
        .map(|i| match ORDER.get(i) {
            Some(name) => String::from(*name),
            None => format!("X{}", i + 1),
        })
        .collect()
}
