//! Downward continuation of gravity anomalies through an equivalent simple
//! layer.
//!
//! The measured vertical derivative of the gravitational potential on a
//! surface is represented as the field of a non-negative surface density on
//! a horizontal plane at depth `h` below the observations. Discretizing the
//! layer on a rectangular grid turns the continuation problem into a dense
//! first-kind linear system `A phi = f`, solved under the constraint
//! `phi >= 0` by an active-set non-negative least-squares method. The depth
//! `h` plays the role of the regularization parameter: scanning it produces
//! a residual curve `chi(h)`, and under noisy data the working depth is the
//! deepest one whose residual stays within the noise level.
//!
//! # Quick start
//!
//! ```
//! use gravicont::{
//!     add_noise, assemble_matrix, depth_scan, select_depth, synth_field,
//!     NnlsOptions, NoiseSpec, ObservationSet, PointSource, Rect,
//! };
//! use nalgebra::Point3;
//!
//! let extent = Rect::new(-1.0, 1.0, -1.0, 1.0)?;
//! let sources = vec![PointSource::new(0.3, Point3::new(0.1, -0.2, -0.3))?];
//!
//! // Synthesize noisy observations on a small surface grid.
//! let obs = ObservationSet::regular_grid(extent, 8, 8, 0.0)?;
//! let clean = synth_field(&sources, obs.points(), 1.0)?;
//! let noisy = add_noise(&clean, &NoiseSpec::new(0.01, 42)?)?;
//! let obs = obs.with_values(noisy)?;
//!
//! // Scan continuation depths and pick the deepest admissible one.
//! let depths: Vec<f64> = (1..=8).map(|i| 0.05 * i as f64).collect();
//! let scan = depth_scan(&obs, extent, 8, 8, &depths, 1.0, &NnlsOptions::default())?;
//! let report = select_depth(&scan, 0.01, obs.values())?;
//! assert!(report.selected.is_some());
//! # Ok::<(), gravicont::Error>(())
//! ```

// Guards written as `!(x > 0.0)` are deliberate: they reject NaN along
// with the out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod continuation;
pub mod error;
pub mod forward;
pub mod model;
pub mod nnls;
pub mod noise;

pub use continuation::{
    add_noise, depth_scan, mass_clusters, peel_sources, residual, select_depth,
    select_depth_from_curve, DepthFailure, DepthScanResult, EstimatedSource, PeelOptions,
    PeelOutcome, SelectionReport, SourceCluster,
};
pub use error::{Error, Result};
pub use forward::{
    apply_forward, assemble_matrix, kernel_newton, kernel_vertical, synth_field, KernelMatrix,
    DEFAULT_G, EPS_GEOM,
};
pub use model::{
    ContinuationGrid, LayerDensity, NoiseSpec, ObservationSet, PointSource, Rect,
};
pub use nnls::{
    brute_force_nnls, format_trace_line, kkt_check, nnls_solve, nnls_solve_traced, KktReport,
    LsSolver, NnlsOptions, NnlsResult, TraceRecord, BRUTE_FORCE_MAX_COLUMNS,
};

// The book chapters double as documentation tests so their code stays in
// sync with the crate.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/forward.md")]
    mod forward {}
    #[doc = include_str!("../../../book/src/nnls.md")]
    mod nnls {}
    #[doc = include_str!("../../../book/src/depth-selection.md")]
    mod depth_selection {}
    #[doc = include_str!("../../../book/src/peeling.md")]
    mod peeling {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
