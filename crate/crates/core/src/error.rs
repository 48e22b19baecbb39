use crate::model::Params;
use crate::regions::Region;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid model configuration: {0}")]
    InvalidConfig(&'static str),

    /// A state with a non-finite component (or a runaway `|α|`) was produced or
    /// supplied. `last` is the last finite state seen.
    #[error("diverged at step {step}: last finite state {last:?}")]
    Diverged { step: usize, last: Params },

    #[error("gradient flow did not reach tolerance after {steps} steps (state {state:?})")]
    NotConverged { steps: u64, state: Params },

    #[error("region {0} is empty for this configuration")]
    EmptyRegion(Region),

    #[error("sampler exhausted its draw budget for region {0}")]
    SamplerBudget(Region),

    #[error("precondition failed: point is not in region {0}")]
    NotInRegion(Region),

    #[error("fit window needs at least two records")]
    WindowTooShort,

    #[error("fit window contains a non-positive value at step {0}")]
    NonPositive(usize),

    #[error("trajectory is empty")]
    EmptyTrajectory,
}
