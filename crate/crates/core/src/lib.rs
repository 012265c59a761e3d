//! Information scrambling in closed spin chains.

pub mod ed;
pub mod error;
pub mod fermion;
pub mod grid;
pub mod hilbert;
pub mod linalg;
pub mod magnon;
pub mod measures;
pub mod qdp;
pub mod scenario;
pub mod validate;

pub use error::{Error, Result};
pub use grid::{measure_grid, Dynamics, Grid, Measure, Parties};
pub use hilbert::{
    configuration_index, configuration_sites, partial_trace, ChainSpec, DensityMatrix, Mixture, PureState, Reduce,
    Sector, SectorAmplitudes,
};
pub use linalg::C64;
pub use magnon::{GreenTable, HarperParams, HeisenbergParams, TwoMagnonGreenTable};
pub use measures::{MeasureReport, MeasuredParty, XStateRdm};
