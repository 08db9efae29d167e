//! Undirected simple graphs, Laplacians and induced subgraphs.
//!
//! Vertices are 0-based here; the edge-list text format is 1-based.

use std::collections::{BTreeSet, VecDeque};

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{FrdeError, Result};
use crate::rng::{stream_rng, Stream};
use crate::spectral::SymmetricMatrix;

/// Laplacians are ordinary symmetric matrices with zero row sums.
pub type LaplacianMatrix = SymmetricMatrix;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    adj: Vec<Vec<usize>>,
    edges: Vec<(usize, usize)>,
}

impl Graph {
    /// Builds a graph from 0-based edges. Repeated edges collapse into one.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n == 0 {
            return Err(FrdeError::InvalidArgument(
                "graph needs at least one vertex".into(),
            ));
        }
        let mut set = BTreeSet::new();
        for (u, v) in edges {
            for w in [u, v] {
                if w >= n {
                    return Err(FrdeError::InvalidVertex { vertex: w, n });
                }
            }
            if u == v {
                return Err(FrdeError::SelfLoop(u));
            }
            set.insert((u.min(v), u.max(v)));
        }
        let mut adj = vec![Vec::new(); n];
        for &(u, v) in &set {
            adj[u].push(v);
            adj[v].push(u);
        }
        for a in &mut adj {
            a.sort_unstable();
        }
        Ok(Graph {
            n,
            adj,
            edges: set.into_iter().collect(),
        })
    }

    pub fn empty(n: usize) -> Result<Self> {
        Graph::new(n, std::iter::empty())
    }

    pub fn path(n: usize) -> Result<Self> {
        Graph::new(n, (1..n).map(|i| (i - 1, i)))
    }

    pub fn complete(n: usize) -> Result<Self> {
        Graph::new(n, (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))))
    }

    pub fn n_vertices(&self) -> usize {
        self.n
    }

    /// Edges as `(u, v)` with `u < v`, sorted.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adj[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.n && self.adj[u].binary_search(&v).is_ok()
    }

    pub fn vertices(&self) -> Vec<usize> {
        (0..self.n).collect()
    }

    /// Parses the `n <count>` / `u v` text block (1-based ids, `#` comments).
    pub fn parse_edge_list(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|l| !l.is_empty());
        let header = lines
            .next()
            .ok_or_else(|| FrdeError::Parse("edge list is empty".into()))?;
        let n = match header.split_whitespace().collect::<Vec<_>>().as_slice() {
            ["n", count] => count
                .parse::<usize>()
                .map_err(|e| FrdeError::Parse(format!("bad vertex count {count:?}: {e}")))?,
            _ => {
                return Err(FrdeError::Parse(format!(
                    "expected \"n <count>\", got {header:?}"
                )))
            }
        };
        let mut edges = Vec::new();
        for line in lines {
            let ids: Vec<usize> = line
                .split_whitespace()
                .map(|t| {
                    t.parse::<usize>()
                        .map_err(|e| FrdeError::Parse(format!("bad vertex id {t:?}: {e}")))
                })
                .collect::<Result<_>>()?;
            match ids.as_slice() {
                [u, v] if *u >= 1 && *v >= 1 => edges.push((u - 1, v - 1)),
                [_, _] => return Err(FrdeError::Parse(format!("ids are 1-based: {line:?}"))),
                _ => return Err(FrdeError::Parse(format!("expected \"u v\", got {line:?}"))),
            }
        }
        Graph::new(n, edges)
    }

    pub fn to_edge_list(&self) -> String {
        let mut s = format!("n {}\n", self.n);
        for &(u, v) in &self.edges {
            s.push_str(&format!("{} {}\n", u + 1, v + 1));
        }
        s
    }
}

/// A vertex subset together with its complement, both in a fixed order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubsetPartition {
    pub subset: Vec<usize>,
    pub complement: Vec<usize>,
}

impl SubsetPartition {
    pub fn new(g: &Graph, subset: &[usize]) -> Result<Self> {
        validate_subset(g, subset)?;
        let mut member = vec![false; g.n];
        for &v in subset {
            member[v] = true;
        }
        Ok(SubsetPartition {
            subset: subset.to_vec(),
            complement: (0..g.n).filter(|&v| !member[v]).collect(),
        })
    }
}

/// Checks ids are in range and distinct. An empty subset is allowed here.
pub fn validate_subset(g: &Graph, subset: &[usize]) -> Result<()> {
    let mut seen = vec![false; g.n];
    for &v in subset {
        if v >= g.n {
            return Err(FrdeError::InvalidVertex { vertex: v, n: g.n });
        }
        if std::mem::replace(&mut seen[v], true) {
            return Err(FrdeError::DuplicateVertex(v));
        }
    }
    Ok(())
}

pub fn laplacian(g: &Graph) -> LaplacianMatrix {
    let mut m = DMatrix::zeros(g.n, g.n);
    for &(u, v) in &g.edges {
        m[(u, v)] = -1.0;
        m[(v, u)] = -1.0;
        m[(u, u)] += 1.0;
        m[(v, v)] += 1.0;
    }
    SymmetricMatrix::from_symmetric_unchecked(m)
}

/// Whether the subgraph induced by `subset` is connected (breadth-first search).
pub fn is_connected(g: &Graph, subset: &[usize]) -> Result<bool> {
    if subset.is_empty() {
        return Err(FrdeError::EmptyVertexSet);
    }
    validate_subset(g, subset)?;
    let mut member = vec![false; g.n];
    for &v in subset {
        member[v] = true;
    }
    let mut seen = vec![false; g.n];
    let mut queue = VecDeque::from([subset[0]]);
    seen[subset[0]] = true;
    let mut reached = 1;
    while let Some(v) = queue.pop_front() {
        for &w in g.neighbors(v) {
            if member[w] && !seen[w] {
                seen[w] = true;
                reached += 1;
                queue.push_back(w);
            }
        }
    }
    Ok(reached == subset.len())
}

pub fn is_graph_connected(g: &Graph) -> bool {
    is_connected(g, &g.vertices()).expect("full vertex set is valid")
}

/// Laplacian of the induced subgraph, rows and columns in `subset` order.
pub fn induced_laplacian(g: &Graph, subset: &[usize]) -> Result<LaplacianMatrix> {
    if subset.is_empty() {
        return Err(FrdeError::EmptyVertexSet);
    }
    validate_subset(g, subset)?;
    let mut pos = vec![usize::MAX; g.n];
    for (i, &v) in subset.iter().enumerate() {
        pos[v] = i;
    }
    let k = subset.len();
    let mut m = DMatrix::zeros(k, k);
    for &(u, v) in &g.edges {
        let (i, j) = (pos[u], pos[v]);
        if i != usize::MAX && j != usize::MAX {
            m[(i, j)] = -1.0;
            m[(j, i)] = -1.0;
            m[(i, i)] += 1.0;
            m[(j, j)] += 1.0;
        }
    }
    Ok(SymmetricMatrix::from_symmetric_unchecked(m))
}

/// Diagonal of neighbor counts of each subset vertex inside the complement.
pub fn boundary_degree_matrix(g: &Graph, partition: &SubsetPartition) -> SymmetricMatrix {
    let mut outside = vec![false; g.n];
    for &v in &partition.complement {
        outside[v] = true;
    }
    let counts: Vec<f64> = partition
        .subset
        .iter()
        .map(|&v| g.neighbors(v).iter().filter(|&&w| outside[w]).count() as f64)
        .collect();
    SymmetricMatrix::from_diagonal(&counts)
}

/// Connectivity requirements checked on each random geometric sample.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometricConstraints {
    pub connected: bool,
    /// Extra subsets whose induced subgraphs must each be connected.
    pub connected_subsets: Vec<Vec<usize>>,
    /// Every vertex must have at least this many neighbors.
    pub min_degree: usize,
    pub max_retries: usize,
}

impl Default for GeometricConstraints {
    fn default() -> Self {
        GeometricConstraints {
            connected: true,
            connected_subsets: Vec::new(),
            min_degree: 0,
            max_retries: 1000,
        }
    }
}

impl GeometricConstraints {
    pub fn none() -> Self {
        GeometricConstraints {
            connected: false,
            connected_subsets: Vec::new(),
            min_degree: 0,
            max_retries: 1,
        }
    }
}

/// Random geometric graph in the unit square: an edge joins every pair at
/// Euclidean distance at most `radius`. Samples are redrawn until the
/// constraints hold or `max_retries` samples have been rejected.
pub fn random_geometric(
    n: usize,
    radius: f64,
    seed: u64,
    constraints: &GeometricConstraints,
) -> Result<Graph> {
    if n == 0 {
        return Err(FrdeError::InvalidArgument("n must be at least 1".into()));
    }
    if !(radius > 0.0 && radius <= std::f64::consts::SQRT_2) {
        return Err(FrdeError::InvalidArgument(format!(
            "radius {radius} outside (0, sqrt 2]"
        )));
    }
    for s in &constraints.connected_subsets {
        if s.is_empty() {
            return Err(FrdeError::EmptyVertexSet);
        }
    }
    let attempts = constraints.max_retries.max(1);
    for attempt in 0..attempts {
        let mut rng = stream_rng(seed, Stream::Graph, &[attempt as u64]);
        let pts: Vec<(f64, f64)> = (0..n)
            .map(|_| (rng.random::<f64>(), rng.random::<f64>()))
            .collect();
        let r2 = radius * radius;
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                let (dx, dy) = (pts[i].0 - pts[j].0, pts[i].1 - pts[j].1);
                if dx * dx + dy * dy <= r2 {
                    edges.push((i, j));
                }
            }
        }
        let g = Graph::new(n, edges)?;
        if constraints.connected && !is_graph_connected(&g) {
            continue;
        }
        if (0..n).any(|i| g.degree(i) < constraints.min_degree) {
            continue;
        }
        let mut ok = true;
        for s in &constraints.connected_subsets {
            if !is_connected(&g, s)? {
                ok = false;
                break;
            }
        }
        if ok {
            return Ok(g);
        }
    }
    Err(FrdeError::ConstraintUnsatisfiable {
        radius,
        retries: attempts,
    })
}
