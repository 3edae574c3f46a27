use tinynn::NnError;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("invalid action: {0}")]
    InvalidAction(String),
    #[error("invalid goal: {0}")]
    InvalidGoal(String),
    #[error("policy produced an invalid distribution at state {state}: {reason}")]
    InvalidDistribution { state: String, reason: String },
    #[error("goal {0} is unreachable from the start state")]
    Unreachable(String),
    #[error("biased route for goal {goal} has length {biased}, optimal is {optimal}")]
    BiasNotOptimal {
        goal: String,
        biased: usize,
        optimal: usize,
    },
    #[error("biased route for goal {goal} is blocked at ({x},{y})")]
    BiasBlocked { goal: String, x: i32, y: i32 },
    #[error("no demonstrations to learn from")]
    EmptyDemos,
    #[error("{learner} diverged at {stage} {index}: {reason}")]
    Divergence {
        learner: &'static str,
        stage: &'static str,
        index: usize,
        reason: String,
    },
    #[error("metric {metric} is not supported for {policy} policies")]
    UnsupportedMetric { metric: String, policy: String },
    #[error("observation prefix is empty")]
    EmptyPrefix,
    #[error("observability fraction must lie in (0, 1], got {0}")]
    InvalidFraction(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("policy bank is empty")]
    EmptyBank,
    #[error("environment was queried {0} times during inference")]
    EnvInteractionDuringInference(u64),
    #[error("training failed for goal {goal}: {source}")]
    GoalTraining {
        goal: String,
        #[source]
        source: Box<Error>,
    },
    #[error("corrupt bank file {file}: {reason}")]
    Corrupt { file: String, reason: String },
    #[error("unsupported policy file format {0:?}")]
    UnknownFormat(String),
    #[error("bank manifest lists goal {goal} but {file} is missing")]
    MissingGoalFile { goal: String, file: String },
    #[error("trajectory format error: {0}")]
    Format(String),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
