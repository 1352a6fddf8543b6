//! External command templates.
//!
//! Content download and video decoding are delegated to user-configured
//! programs. A template is a whitespace-separated argument list whose tokens
//! may contain `{name}` placeholders, e.g.
//! `ffmpeg -ss {start} -to {end} -i {input} {out_dir}/%05d.jpg`.
//! Substitution happens per token after splitting, and the program is run
//! directly (no shell), so substituted values never need quoting.

use std::collections::BTreeMap;
use std::process::{Command, Output};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CommandError {
    #[error("command template is empty")]
    Empty,
    #[error("command template references unknown placeholder {{{0}}}")]
    UnknownPlaceholder(String),
    #[error("failed to launch `{program}`: {source}")]
    Spawn {
        program: String,
        #[source]
        source: std::io::Error,
    },
    #[error("`{program}` exited with {status}: {stderr}")]
    Failed {
        program: String,
        status: String,
        stderr: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommandTemplate {
    tokens: Vec<String>,
}

impl CommandTemplate {
    pub fn parse(template: &str) -> Result<Self, CommandError> {
        let tokens: Vec<String> = template.split_whitespace().map(str::to_owned).collect();
        if tokens.is_empty() {
            return Err(CommandError::Empty);
        }
        Ok(Self { tokens })
    }

    /// Expands placeholders. Every `{name}` must have a binding.
    pub fn expand(&self, vars: &BTreeMap<&str, String>) -> Result<Vec<String>, CommandError> {
        self.tokens.iter().map(|t| expand_token(t, vars)).collect()
    }

    /// Runs the expanded command to completion; a non-zero exit is an error.
    pub fn run(&self, vars: &BTreeMap<&str, String>) -> Result<Output, CommandError> {
        let argv = self.expand(vars)?;
        let program = argv[0].clone();
        let output = Command::new(&program)
            .args(&argv[1..])
            .output()
            .map_err(|source| CommandError::Spawn {
                program: program.clone(),
                source,
            })?;
        if !output.status.success() {
            return Err(CommandError::Failed {
                program,
                status: output.status.to_string(),
                stderr: String::from_utf8_lossy(&output.stderr).trim().to_owned(),
            });
        }
        Ok(output)
    }
}

fn expand_token(token: &str, vars: &BTreeMap<&str, String>) -> Result<String, CommandError> {
    let mut out = String::with_capacity(token.len());
    let mut rest = token;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        match after.find('}') {
            Some(close) => {
                let name = &after[..close];
                let value = vars
                    .get(name)
                    .ok_or_else(|| CommandError::UnknownPlaceholder(name.to_owned()))?;
                out.push_str(value);
                rest = &after[close + 1..];
            }
            None => {
                out.push_str(&rest[open..]);
                rest = "";
            }
        }
    }
    out.push_str(rest);
    Ok(out)
}
