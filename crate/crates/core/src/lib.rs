//! Robust second-price auctions with a random reserve price.
//!
//! The seller knows only each bidder's mean value in `(0, 1)`; nature picks the
//! worst joint value distribution consistent with those means. This crate
//! computes the closed-form saddle point of that zero-sum game and checks it
//! three independent ways:
//!
//! * [`verify`] certifies both best responses numerically through the seller
//!   indifference identity and the supporting affine certificate;
//! * [`game_oracle`] discretizes the game and solves it as one linear program;
//! * [`simulate`] runs Monte Carlo auctions against a battery of adversarial
//!   value distributions.
//!
//! ```
//! use robust_reserve::{AuctionInstance, compute_equilibrium};
//!
//! let instance = AuctionInstance::new(&[0.6, 0.5, 0.1]).unwrap();
//! let eq = compute_equilibrium(&instance).unwrap();
//! assert_eq!(eq.k(), 2);
//! assert!((eq.alpha() - 0.366).abs() < 1e-3);
//! ```

pub mod distributions;
pub mod equilibrium;
mod error;
pub mod game_oracle;
pub mod revenue;
pub mod simulate;
pub mod verify;

pub use distributions::{HighestValueDist, ReserveDist, ValueProfile, WorstCaseDist};
pub use equilibrium::{
    compute_equilibrium, cutoff_k, lambert_w_minus1, solve_alpha, ActiveSet, AuctionInstance,
    Equilibrium,
};
pub use error::{Error, Result};
pub use revenue::{AffineCertificate, InterimAllocation};
pub use verify::{VerificationReport, VerifyConfig};
