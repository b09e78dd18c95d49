use std::fmt;
use std::path::Path;

/// A command failure, carrying the process exit code it maps to.
#[derive(Debug)]
pub enum Failure {
    /// Exit 1: unreadable or invalid configuration.
    Config(anyhow::Error),
    /// Exit 2: missing or malformed data.
    Data(anyhow::Error),
    /// Exit 3: divergence or a failed gradient check.
    Numeric(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Config(_) => 1,
            Failure::Data(_) => 2,
            Failure::Numeric(_) => 3,
        }
    }

    pub fn config(msg: impl fmt::Display) -> Self {
        Failure::Config(anyhow::anyhow!("{msg}"))
    }

    pub fn data_at(path: &Path, err: impl fmt::Display) -> Self {
        Failure::Data(anyhow::anyhow!("{}: {err}", path.display()))
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (kind, err) = match self {
            Failure::Config(e) => ("config error", e),
            Failure::Data(e) => ("data error", e),
            Failure::Numeric(e) => ("numeric failure", e),
        };
        write!(f, "{kind}: {err:#}")
    }
}

/// Library errors sorted by who is at fault.
impl From<abip::Error> for Failure {
    fn from(e: abip::Error) -> Self {
        use abip::Error as E;
        match e {
            E::Diverged { .. } | E::NumericOverflow { .. } | E::NonFiniteGradient { .. } => Failure::Numeric(e.into()),
            E::Io(_) | E::Format { .. } | E::ShapeMismatch { .. } | E::EmptyDataset => Failure::Data(e.into()),
            _ => Failure::Config(e.into()),
        }
    }
}

pub type CmdResult<T = ()> = Result<T, Failure>;

/// Wraps filesystem writes under the output directory.
pub fn write_output(path: &Path, bytes: impl AsRef<[u8]>) -> CmdResult {
    std::fs::write(path, bytes).map_err(|e| Failure::Data(anyhow::anyhow!("cannot write {}: {e}", path.display())))
}
