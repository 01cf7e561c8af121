use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Static sensor topology: symmetric, nonnegative, unit self-loops.
#[derive(Clone, Debug, PartialEq)]
pub struct AdjacencyMatrix {
    pub weights: Tensor,
    pub node_ids: Vec<u32>,
}

impl AdjacencyMatrix {
    pub fn len(&self) -> usize {
        self.node_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.node_ids.is_empty()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.weights.at2(i, j) > 0.0
    }

    /// Fully connected graph, used where no layout is known.
    pub fn complete(node_ids: Vec<u32>) -> Self {
        let n = node_ids.len();
        Self {
            weights: Tensor::ones(&[n, n]),
            node_ids,
        }
    }

    /// Writes the matrix as CSV with a `node_id` header column.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["node_id".to_string()];
        header.extend(self.node_ids.iter().map(u32::to_string));
        w.write_record(&header).map_err(csv_err)?;
        let n = self.len();
        for i in 0..n {
            let mut row = vec![self.node_ids[i].to_string()];
            row.extend((0..n).map(|j| self.weights.at2(i, j).to_string()));
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::io("<adjacency csv>", e))
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}

/// Sensor coordinates keyed by node id.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodePosition {
    pub node_id: u32,
    pub x: f64,
    pub y: f64,
}

/// Reads `node_id,x,y` rows.
pub fn read_positions<R: Read>(input: R) -> Result<Vec<NodePosition>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let rows = rdr
        .deserialize()
        .collect::<std::result::Result<Vec<NodePosition>, _>>()
        .map_err(csv_err)?;
    if rows.is_empty() {
        return Err(Error::Format("position file has no rows".into()));
    }
    Ok(rows)
}

pub fn write_positions<W: Write>(positions: &[NodePosition], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["node_id", "x", "y"]).map_err(csv_err)?;
    for p in positions {
        w.write_record([p.node_id.to_string(), p.x.to_string(), p.y.to_string()])
            .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io("<positions csv>", e))
}

/// Index pairs that share identical coordinates.
pub fn duplicate_positions(positions: &[NodePosition]) -> Vec<(usize, usize)> {
    let mut dups = Vec::new();
    for i in 0..positions.len() {
        for j in i + 1..positions.len() {
            if positions[i].x == positions[j].x && positions[i].y == positions[j].y {
                dups.push((i, j));
            }
        }
    }
    dups
}

/// Symmetrized k-nearest-neighbour graph with unit edge weights and unit
/// self-loops. Distance ties are broken by lower node index.
pub fn build_adjacency(positions: &[NodePosition], k: usize) -> Result<AdjacencyMatrix> {
    let n = positions.len();
    if n < 2 {
        return Err(Error::Config(format!("adjacency needs at least 2 nodes, got {n}")));
    }
    if k == 0 || k >= n {
        return Err(Error::Config(format!("neighbour count k={k} must satisfy 1 <= k < {n}")));
    }
    for (i, j) in duplicate_positions(positions) {
        log::warn!(
            "nodes {} and {} share coordinates; neighbour ties resolved by index",
            positions[i].node_id,
            positions[j].node_id
        );
    }

    let mut w = Tensor::identity(n);
    for i in 0..n {
        let mut others: Vec<(f64, usize)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| {
                let dx = positions[i].x - positions[j].x;
                let dy = positions[i].y - positions[j].y;
                (dx.hypot(dy), j)
            })
            .collect();
        others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for &(_, j) in others.iter().take(k) {
            w.data_mut()[i * n + j] = 1.0;
            w.data_mut()[j * n + i] = 1.0;
        }
    }
    Ok(AdjacencyMatrix {
        weights: w,
        node_ids: positions.iter().map(|p| p.node_id).collect(),
    })
}
