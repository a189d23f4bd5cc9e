// Validation is written `!(x > 0.0)` so NaN is rejected along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attack;
pub mod augment;
pub mod cli;
pub mod compose;
pub mod config;
pub mod dbgd;
pub mod error;
pub mod experiments;
pub mod genscore;
pub mod gradcheck;
pub mod image;
pub mod io;
pub mod latent;
pub mod optim;
pub mod par;
pub mod rng;
pub mod trace;

pub use error::{Error, Result};
pub use image::ImageGrid;
pub use latent::{BasisEnsemble, LatentCode};
pub use rng::RngStream;
pub use trace::{ScoreTrace, TraceRow};
