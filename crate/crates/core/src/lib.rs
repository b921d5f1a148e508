//! User scheduling and beamforming for user-centric cell-free MIMO
//! downlinks.
//!
//! The modules follow one time slot of a simulation: [`netgen`] places RRHs
//! and users and forms serving clusters, [`channel`] draws fading and
//! estimates channels from uplink pilots, [`wsr`] schedules users and designs
//! beamformers, [`baselines`] provides round-robin references, and [`sim`]
//! runs the slot loop with proportional-fair weights.
//!
//! ```
//! use cellfree::sim::{build_realization, slot_channels, Profile, SimConfig};
//!
//! let config = SimConfig { user_count: Some(30), ..SimConfig::profile(Profile::Desk) };
//! let real = build_realization(&config, 0)?;
//! let channels = slot_channels(&config, &real, 0)?;
//! assert_eq!(channels.num_users(), 30);
//! assert_eq!(channels.num_rrhs(), 21);
//! # Ok::<(), cellfree::Error>(())
//! ```

pub mod channel;
pub mod error;
pub mod linalg;
pub mod netgen;
pub mod pairs;
pub mod rng;
pub mod wsr;
pub mod baselines;
pub mod sim;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/quickstart.md")]
    mod quickstart {}
    #[doc = include_str!("../../../book/src/network.md")]
    mod network {}
    #[doc = include_str!("../../../book/src/estimation.md")]
    mod estimation {}
    #[doc = include_str!("../../../book/src/optimization.md")]
    mod optimization {}
    #[doc = include_str!("../../../book/src/baselines.md")]
    mod baselines {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/configuration.md")]
    mod configuration {}
}
