//! Han-Kobayashi achievable sum-rates for two-user ergodic fading Gaussian
//! interference channels.
//!
//! A [`channel::FadingLaw`] is a finite distribution over fading states.
//! [`rates`] evaluates the seven rate bounds and six sum-rate bounds of the
//! scheme for given split and power policies, [`optimize`] maximizes their
//! minimum, and [`schemes`] handles the channel sub-classes where the
//! optimal structure is known.

pub mod channel;
pub mod cli;
pub mod exec;
pub mod optimize;
pub mod rates;
pub mod schemes;

pub use channel::{classify_channel, FadingLaw, FadingState, PowerMode, StateClass, Structural};
pub use optimize::{maximize_joint, maximize_separable, OptimizationResult, OptimizeOptions};
pub use rates::{PowerPolicy, SplitPolicy};
