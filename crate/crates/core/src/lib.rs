//! Faceted crystal growth from supersaturated vapor.
//!
//! Evolves a k-gonal prism crystal by coupling an exterior drift-diffusion
//! supersaturation field to per-facet motion under the averaged
//! Gibbs-Thomson law. The geometric constructions the model rests on
//! (Wulff shape, crystalline curvature, the moving-boundary diffeomorphism,
//! boundary extension functions) are implemented as independently
//! verifiable components.
//!
//! Module map:
//! - [`geometry`]: admissible prisms parameterized by signed facet distances
//! - [`energy`]: surface energy density, Frank/Wulff shapes, crystalline curvature
//! - [`field`]: exterior drift-diffusion solver on a truncated Cartesian grid
//! - [`dynamics`]: facet velocities and the facet-distance ODE
//! - [`mapping`]: diffeomorphism from the initial to the current exterior domain
//! - [`extension`]: boundary extension functions h_i and the homogenizing field G
//! - [`sim`]: coupling loops (splitting and successive approximation), config, output

pub mod dynamics;
pub mod energy;
pub mod error;
pub mod extension;
pub mod field;
pub mod geometry;
pub mod mapping;
pub mod sim;
pub mod smoothstep;

pub use error::{Error, Result};
