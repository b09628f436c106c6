//! Maps library failures onto the process exit contract: 1 for usage
//! problems, 2 for bad input data, 3 for numerical aborts.

use std::fmt;

use molebm::energy::EnergyError;
use molebm::graph::GraphError;
use molebm::io::IoError;
use molebm::langevin::LangevinError;
use molebm::metrics::MetricsError;
use molebm::pipeline::PipelineError;
use molebm::training::TrainError;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or configuration values.
    Usage(String),
    /// Unreadable, malformed, or inconsistent inputs.
    Data(String),
    /// A chain or loss became non-finite.
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Numerical(m) => f.write_str(m),
        }
    }
}

pub fn usage(message: impl fmt::Display) -> CliError {
    CliError::Usage(message.to_string())
}

#[derive(Clone, Copy)]
enum Class {
    Usage,
    Data,
    Numerical,
}

impl Class {
    fn wrap(self, message: String) -> CliError {
        match self {
            Class::Usage => CliError::Usage(message),
            Class::Data => CliError::Data(message),
            Class::Numerical => CliError::Numerical(message),
        }
    }
}

fn classify_energy(e: &EnergyError) -> Class {
    match e {
        EnergyError::InvalidArchitecture => Class::Usage,
        _ => Class::Data,
    }
}

fn classify_langevin(e: &LangevinError) -> Class {
    match e {
        LangevinError::InvalidConfig(_) => Class::Usage,
        LangevinError::NonFiniteEnergy { .. } => Class::Numerical,
        LangevinError::EmptyComposite => Class::Data,
        LangevinError::Energy(inner) => classify_energy(inner),
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<GraphError> for CliError {
    fn from(e: GraphError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<EnergyError> for CliError {
    fn from(e: EnergyError) -> Self {
        classify_energy(&e).wrap(e.to_string())
    }
}

impl From<LangevinError> for CliError {
    fn from(e: LangevinError) -> Self {
        classify_langevin(&e).wrap(e.to_string())
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        let class = match &e {
            TrainError::InvalidConfig(_) => Class::Usage,
            TrainError::NonFiniteLoss { .. } => Class::Numerical,
            TrainError::Energy(inner) => classify_energy(inner),
            TrainError::Langevin(inner) => classify_langevin(inner),
            _ => Class::Data,
        };
        class.wrap(e.to_string())
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        let class = match &e {
            PipelineError::InvalidCount | PipelineError::TooFewModels(_) => Class::Usage,
            PipelineError::Chain { source, .. } => classify_langevin(source),
            PipelineError::Langevin(inner) => classify_langevin(inner),
            PipelineError::Energy(inner) => classify_energy(inner),
            _ => Class::Data,
        };
        class.wrap(e.to_string())
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        let class = match &e {
            MetricsError::InvalidBins | MetricsError::InvalidDelta(_) => Class::Usage,
            _ => Class::Data,
        };
        class.wrap(e.to_string())
    }
}
