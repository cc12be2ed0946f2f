//! Joint power allocation and reflection design for an OFDM downlink assisted
//! by a passive reflect-array.
//!
//! * [`model`]: channel composition, DFT, rate.
//! * [`wf`]: water-filling over subcarriers.
//! * [`sca`]: reflection update by successive convex approximation.
//! * [`sdr_init`]: semidefinite-relaxation starting point.
//! * [`altopt`]: the alternating loop and the comparison schemes.
//! * [`harness`]: channel generation, experiments, CSV output.
//!
//! ```
//! use irs_ofdm::model::SystemConfig;
//! use irs_ofdm::wf::waterfill;
//!
//! let cfg = SystemConfig::default();
//! assert_eq!((cfg.n_sc, cfg.m_elems), (64, 20));
//! let wf = waterfill(&[1.0, 1.0], 2.0).unwrap();
//! assert_eq!(wf.p.as_slice(), &[1.0, 1.0]);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod altopt;
pub mod error;
pub mod harness;
pub mod model;
pub mod sca;
pub mod sdr_init;
pub mod wf;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/waterfill.md")]
    mod waterfill {}
    #[doc = include_str!("../../../book/src/sca.md")]
    mod sca {}
    #[doc = include_str!("../../../book/src/sdr.md")]
    mod sdr {}
    #[doc = include_str!("../../../book/src/altopt.md")]
    mod altopt {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
