//! Discretization of the unit square into `K × K` blocks.
//!
//! Cells are indexed row-major: `cell = row * K + col`, where the column comes
//! from the horizontal coordinate and the row from the vertical one. Only cells
//! holding at least one observation become *active blocks*; blocks are numbered
//! `0..n_blocks` in increasing cell order and joined by 4-neighbour edges.

use log::warn;

use crate::data::{Dataset, Location};
use crate::error::{Error, Result};
use crate::graph::Graph;

/// Column/row of the cell containing `s`. Points on a grid line go to the
/// higher-index cell; the upper domain edge is clamped into the last cell.
pub fn cell_coords(s: Location, k: usize) -> (usize, usize) {
    let idx = |c: f64| ((c * k as f64).floor() as usize).min(k - 1);
    (idx(s.s_h), idx(s.s_v))
}

#[derive(Debug, Clone)]
pub struct BlockGrid {
    resolution: usize,
    active_cells: Vec<usize>,
    cell_to_block: Vec<Option<usize>>,
    nearest_block: Vec<usize>,
    block_of: Vec<usize>,
    block_counts: Vec<usize>,
    graph: Graph,
    component_sizes: Vec<usize>,
}

impl BlockGrid {
    /// Builds the grid and fails if the active-block graph is disconnected.
    pub fn build(dataset: &Dataset, resolution: usize) -> Result<Self> {
        let grid = Self::build_unchecked(dataset, resolution)?;
        if grid.component_sizes.len() > 1 {
            return Err(Error::Disconnected {
                sizes: grid.component_sizes.clone(),
            });
        }
        Ok(grid)
    }

    /// Builds the grid over the observations whose blocks lie in the largest
    /// connected component. Returns the grid, the retained dataset, and the
    /// indices of the retained rows in the original dataset.
    pub fn build_largest_component(
        dataset: &Dataset,
        resolution: usize,
    ) -> Result<(Self, Dataset, Vec<usize>)> {
        let full = Self::build_unchecked(dataset, resolution)?;
        if full.component_sizes.len() == 1 {
            let rows = (0..dataset.len()).collect();
            return Ok((full, dataset.clone(), rows));
        }
        let labels = full.graph.component_labels();
        let mut obs_per_comp = vec![0usize; full.component_sizes.len()];
        for &b in &full.block_of {
            obs_per_comp[labels[b]] += 1;
        }
        // largest by block count, ties by observation count then component order
        let keep = (0..full.component_sizes.len())
            .max_by(|&a, &b| {
                (full.component_sizes[a], obs_per_comp[a])
                    .cmp(&(full.component_sizes[b], obs_per_comp[b]))
                    .then(b.cmp(&a))
            })
            .expect("at least one component");
        warn!(
            "block graph has {} components (sizes {:?}); keeping component with {} blocks",
            full.component_sizes.len(),
            full.component_sizes,
            full.component_sizes[keep]
        );
        let rows: Vec<usize> = (0..dataset.len())
            .filter(|&i| labels[full.block_of[i]] == keep)
            .collect();
        let kept = dataset.subset(&rows);
        let grid = Self::build(&kept, resolution)?;
        Ok((grid, kept, rows))
    }

    /// Builds the grid without requiring connectivity; the component count is
    /// still recorded.
    pub fn build_unchecked(dataset: &Dataset, resolution: usize) -> Result<Self> {
        if dataset.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if resolution == 0 {
            return Err(Error::ZeroResolution);
        }
        let k = resolution;
        let n_cells = k * k;
        let cells: Vec<usize> = dataset
            .locations()
            .iter()
            .map(|&s| {
                let (col, row) = cell_coords(s, k);
                row * k + col
            })
            .collect();
        let mut occupied = vec![false; n_cells];
        for &c in &cells {
            occupied[c] = true;
        }
        let active_cells: Vec<usize> = (0..n_cells).filter(|&c| occupied[c]).collect();
        let mut cell_to_block = vec![None; n_cells];
        for (b, &c) in active_cells.iter().enumerate() {
            cell_to_block[c] = Some(b);
        }
        let block_of: Vec<usize> = cells.iter().map(|&c| cell_to_block[c].unwrap()).collect();
        let mut block_counts = vec![0; active_cells.len()];
        for &b in &block_of {
            block_counts[b] += 1;
        }

        let mut edges = Vec::new();
        for (b, &c) in active_cells.iter().enumerate() {
            let (row, col) = (c / k, c % k);
            if col + 1 < k {
                if let Some(nb) = cell_to_block[c + 1] {
                    edges.push((b, nb));
                }
            }
            if row + 1 < k {
                if let Some(nb) = cell_to_block[c + k] {
                    edges.push((b, nb));
                }
            }
        }
        let graph = Graph::new(active_cells.len(), edges);
        let component_sizes = graph.component_sizes();
        let nearest_block = nearest_active_blocks(k, &active_cells, &cell_to_block);

        Ok(Self {
            resolution: k,
            active_cells,
            cell_to_block,
            nearest_block,
            block_of,
            block_counts,
            graph,
            component_sizes,
        })
    }

    /// Blocks per side, `K`.
    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn n_blocks(&self) -> usize {
        self.active_cells.len()
    }

    /// Row-major cell index of each active block.
    pub fn active_cells(&self) -> &[usize] {
        &self.active_cells
    }

    /// Active block of every observation.
    pub fn block_of(&self) -> &[usize] {
        &self.block_of
    }

    pub fn block_counts(&self) -> &[usize] {
        &self.block_counts
    }

    /// The 4-neighbour adjacency graph on active blocks.
    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn component_sizes(&self) -> &[usize] {
        &self.component_sizes
    }

    pub fn is_connected(&self) -> bool {
        self.component_sizes.len() == 1
    }

    /// Active block whose cell contains `s`, or `None` if that cell is empty.
    pub fn block_of_point(&self, s: Location) -> Result<Option<usize>> {
        s.validate()?;
        Ok(self.cell_to_block[self.cell_of(s)])
    }

    /// Active block supplying the cluster label at `s`: the block containing
    /// `s` when active, otherwise the active block with the nearest centroid
    /// (ties to the smaller block id).
    pub fn nearest_block_of_point(&self, s: Location) -> Result<usize> {
        s.validate()?;
        Ok(self.nearest_block[self.cell_of(s)])
    }

    /// `nearest_block_of_point` for a raw cell index.
    pub fn nearest_block_of_cell(&self, cell: usize) -> usize {
        self.nearest_block[cell]
    }

    pub fn cell_of(&self, s: Location) -> usize {
        let (col, row) = cell_coords(s, self.resolution);
        row * self.resolution + col
    }

    /// Centroid of a row-major cell.
    pub fn cell_centroid(&self, cell: usize) -> Location {
        let k = self.resolution as f64;
        let (row, col) = (cell / self.resolution, cell % self.resolution);
        Location::new((col as f64 + 0.5) / k, (row as f64 + 0.5) / k)
    }
}

fn nearest_active_blocks(k: usize, active: &[usize], cell_to_block: &[Option<usize>]) -> Vec<usize> {
    let coords = |c: usize| ((c % k) as i64, (c / k) as i64);
    (0..k * k)
        .map(|c| {
            if let Some(b) = cell_to_block[c] {
                return b;
            }
            let (cx, cy) = coords(c);
            // squared centroid distance is an integer in cell units
            let mut best = (i64::MAX, usize::MAX);
            for (b, &ac) in active.iter().enumerate() {
                let (ax, ay) = coords(ac);
                let d2 = (ax - cx).pow(2) + (ay - cy).pow(2);
                if d2 < best.0 {
                    best = (d2, b);
                }
            }
            best.1
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dataset_at(locs: &[(f64, f64)]) -> Dataset {
        let n = locs.len();
        Dataset::new(
            locs.iter().map(|&(h, v)| Location::new(h, v)).collect(),
            vec![1.0; n],
            vec![0.0; n],
            1,
        )
        .unwrap()
    }

    fn one_per_cell(k: usize) -> Dataset {
        let mut locs = Vec::new();
        for row in 0..k {
            for col in 0..k {
                locs.push(((col as f64 + 0.5) / k as f64, (row as f64 + 0.5) / k as f64));
            }
        }
        dataset_at(&locs)
    }

    #[test]
    fn full_five_by_five_mesh() {
        let grid = BlockGrid::build(&one_per_cell(5), 5).unwrap();
        assert_eq!(grid.n_blocks(), 25);
        assert_eq!(grid.graph().n_edges(), 40);
        assert!(grid.is_connected());
    }

    #[test]
    fn floor_rule_cell() {
        assert_eq!(cell_coords(Location::new(0.12, 0.34), 5), (0, 1));
    }

    #[test]
    fn boundary_ties_go_up_and_clamp() {
        assert_eq!(cell_coords(Location::new(0.2, 0.4), 5), (1, 2));
        assert_eq!(cell_coords(Location::new(1.0, 1.0), 5), (4, 4));
        assert_eq!(cell_coords(Location::new(0.0, 1.0), 3), (0, 2));
    }

    #[test]
    fn single_cell_dataset() {
        let grid = BlockGrid::build(&dataset_at(&[(0.1, 0.1), (0.15, 0.05), (0.01, 0.19)]), 5).unwrap();
        assert_eq!(grid.n_blocks(), 1);
        assert_eq!(grid.graph().n_edges(), 0);
        assert_eq!(grid.block_counts(), &[3]);
    }

    #[test]
    fn block_of_point_lookup() {
        let grid = BlockGrid::build(&dataset_at(&[(0.1, 0.1), (0.3, 0.1)]), 5).unwrap();
        assert_eq!(grid.block_of_point(Location::new(0.1, 0.1)).unwrap(), Some(0));
        assert_eq!(grid.block_of_point(Location::new(0.3, 0.1)).unwrap(), Some(1));
        assert_eq!(grid.block_of_point(Location::new(0.9, 0.9)).unwrap(), None);
        assert_eq!(grid.block_of_point(Location::new(0.4, 0.1)).unwrap(), None);
        assert!(grid.block_of_point(Location::new(1.5, 0.1)).is_err());
    }

    #[test]
    fn nearest_block_for_empty_cell() {
        // blocks at cells (0,0) and (2,0); cell (3,0) is closest to (2,0)
        let grid = BlockGrid::build_unchecked(&dataset_at(&[(0.1, 0.1), (0.5, 0.1)]), 5).unwrap();
        assert_eq!(grid.nearest_block_of_point(Location::new(0.7, 0.1)).unwrap(), 1);
        // cell (1,0) is equidistant: smaller id wins
        assert_eq!(grid.nearest_block_of_point(Location::new(0.3, 0.1)).unwrap(), 0);
    }

    #[test]
    fn disconnected_graph_is_an_error() {
        let ds = dataset_at(&[(0.1, 0.1), (0.15, 0.1), (0.9, 0.9)]);
        match BlockGrid::build(&ds, 5) {
            Err(Error::Disconnected { sizes }) => assert_eq!(sizes, vec![1, 1]),
            other => panic!("unexpected {other:?}"),
        }
        let (grid, kept, rows) = BlockGrid::build_largest_component(&ds, 5).unwrap();
        assert!(grid.is_connected());
        assert_eq!(kept.len(), 2);
        assert_eq!(rows, vec![0, 1]);
    }

    #[test]
    fn empty_dataset_rejected() {
        let ds = Dataset::new(vec![], vec![], vec![], 1).unwrap();
        assert!(matches!(BlockGrid::build(&ds, 3), Err(Error::EmptyDataset)));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn counts_partition_observations(
                pts in prop::collection::vec((0.0f64..=1.0, 0.0f64..=1.0), 1..80),
                k in 1usize..12,
            ) {
                let ds = dataset_at(&pts);
                let grid = BlockGrid::build_unchecked(&ds, k).unwrap();
                prop_assert_eq!(grid.block_counts().iter().sum::<usize>(), ds.len());
                prop_assert!(grid.block_counts().iter().all(|&c| c >= 1));
                for &(a, b) in grid.graph().edges() {
                    let (ca, cb) = (grid.active_cells()[a], grid.active_cells()[b]);
                    let (ra, cola, rb, colb) = (ca / k, ca % k, cb / k, cb % k);
                    prop_assert_eq!(ra.abs_diff(rb) + cola.abs_diff(colb), 1);
                }
                let again = BlockGrid::build_unchecked(&ds, k).unwrap();
                prop_assert_eq!(grid.block_of(), again.block_of());
                prop_assert_eq!(grid.graph(), again.graph());
            }
        }
    }
}
