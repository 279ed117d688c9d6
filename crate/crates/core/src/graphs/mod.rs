//! Rule dependency graph, position graphs, cycles and exports.

pub mod cycles;
pub mod export;
mod grd;
mod position;

pub use cycles::{elementary_cycles, elementary_cycles_through, find_cycle_through, has_cycle_through, scc};
pub use grd::{Grd, GrdEdge};
pub use position::{position_name, EdgeKind, PgEdge, PgNode, Position, PositionGraph, Variant};
