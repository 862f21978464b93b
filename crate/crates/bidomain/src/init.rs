//! Broken-wave initial data.

use serde::{Deserialize, Serialize};

use crate::params::BidomainParams;
use crate::sim::BidomainState;

/// Cross-field stimulation: `u` is raised for `x < cross.0` and `v` is raised
/// for `y < cross.1`, on top of the homogeneous rest state. The excited
/// strip travels right and its lower end, blocked by the refractory half,
/// curls into a single spiral whose tip starts near `cross`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CrossField {
    pub cross: (f64, f64),
    pub u_excited: f64,
    pub v_refractory: f64,
    /// Width of the excited strip; `None` excites everything left of the cross.
    pub strip_width: Option<f64>,
}

impl Default for CrossField {
    fn default() -> Self {
        CrossField {
            cross: (32.75, 42.0),
            u_excited: 2.0,
            v_refractory: 1.0,
            strip_width: None,
        }
    }
}

impl CrossField {
    pub fn centered(params: &BidomainParams) -> Self {
        let mid = 0.5 * (params.domain.0 + params.domain.1);
        CrossField {
            cross: (mid, mid),
            ..Default::default()
        }
    }
}

pub fn initiate_spiral(params: &BidomainParams, protocol: &CrossField) -> BidomainState {
    let grid = crate::grid::Grid::new(params.grid_n, params.domain.0, params.domain.1);
    let (u0, v0) = params.rest_state();
    let mut s = BidomainState::uniform(grid.n, u0, v0);
    let (cx, cy) = protocol.cross;
    let left = protocol.strip_width.map_or(f64::NEG_INFINITY, |w| cx - w);
    for j in 0..grid.n {
        let y = grid.coord(j);
        for i in 0..grid.n {
            let x = grid.coord(i);
            let k = j * grid.n + i;
            if x < cx && x >= left {
                s.u[k] = protocol.u_excited;
            }
            if y < cy {
                s.v[k] = protocol.v_refractory;
            }
        }
    }
    s
}
