use std::io;

use protofield_core::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Config,
    Numerical,
    Io,
    Verification,
}

/// A failed run, tagged with the pipeline stage it failed in.
#[derive(Debug, thiserror::Error)]
#[error("{stage}: {message}")]
pub struct Failure {
    pub stage: &'static str,
    pub kind: Kind,
    pub message: String,
}

impl Failure {
    pub fn new(stage: &'static str, kind: Kind, message: impl Into<String>) -> Self {
        Self {
            stage,
            kind,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            Kind::Config => 2,
            Kind::Numerical | Kind::Io => 3,
            Kind::Verification => 4,
        }
    }
}

/// Map a core error at `stage`; config errors keep their exit code.
pub fn core(stage: &'static str) -> impl Fn(Error) -> Failure {
    move |e| {
        let kind = match e {
            Error::Config { .. } => Kind::Config,
            _ => Kind::Numerical,
        };
        Failure::new(stage, kind, e.to_string())
    }
}

pub fn io(stage: &'static str) -> impl Fn(io::Error) -> Failure {
    move |e| Failure::new(stage, Kind::Io, e.to_string())
}
