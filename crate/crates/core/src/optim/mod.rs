//! Preference losses, exact gradients and the optimisers that minimise them.

mod adam;
mod loss;
mod newton;
mod schedule;
mod train;

pub use adam::{Adam, AdamConfig};
pub use loss::{
    bce_preference_loss, ensemble_loss, loss_and_gradient, member_objective, AnchorNorm,
    LossConfig,
};
pub use newton::{minimize_newton, NewtonConfig, NewtonOutcome};
pub use schedule::{LrSchedule, TrainSchedule};
pub use train::{train, train_with, trainable_blocks, TrainOutcome};
