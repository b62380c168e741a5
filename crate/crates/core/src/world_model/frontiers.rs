use super::{CellState, OccupancyGrid, FACE_NEIGHBORS};

/// Free voxels with at least one `Unknown` face neighbour, as ascending linear indices.
pub fn detect_frontiers(grid: &OccupancyGrid) -> Vec<usize> {
    grid.iter_state(CellState::Free)
        .filter(|&(_, v)| {
            FACE_NEIGHBORS.iter().any(|o| {
                grid.state([v[0] + o[0], v[1] + o[1], v[2] + o[2]]) == Some(CellState::Unknown)
            })
        })
        .map(|(i, _)| i)
        .collect()
}
