use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::Label;
use crate::seed::rng_from_seed;

/// Shortest human-marked occurrence interval for a relevant video, seconds.
pub const RELEVANT_MIN_S: f64 = 10.0;
/// Longest human-marked occurrence interval for a relevant video, seconds.
pub const RELEVANT_MAX_S: f64 = 20.0;
/// Length of the randomly placed interval for irrelevant videos, seconds.
pub const IRRELEVANT_INTERVAL_S: f64 = 15.0;

#[derive(Debug, Error, PartialEq)]
pub enum IntervalError {
    #[error("interval start {0} must be finite and non-negative")]
    BadStart(f64),
    #[error("interval end {end} must be finite and greater than start {start}")]
    NotIncreasing { start: f64, end: f64 },
    #[error("video duration {0} must be positive")]
    NonPositiveDuration(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub start_s: f64,
    pub end_s: f64,
}

impl Interval {
    pub fn new(start_s: f64, end_s: f64) -> Result<Self, IntervalError> {
        if !start_s.is_finite() || start_s < 0.0 {
            return Err(IntervalError::BadStart(start_s));
        }
        if !end_s.is_finite() || end_s <= start_s {
            return Err(IntervalError::NotIncreasing { start: start_s, end: end_s });
        }
        Ok(Self { start_s, end_s })
    }

    pub fn length(&self) -> f64 {
        self.end_s - self.start_s
    }
}

/// Why an interval is not acceptable for a label.
#[derive(Debug, Clone, PartialEq)]
pub enum IntervalViolation {
    BelowMinimum { length_s: f64 },
    AboveMaximum { length_s: f64 },
    /// Irrelevant intervals are placed by the system, never by a person.
    MachineAssigned,
}

impl fmt::Display for IntervalViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IntervalViolation::BelowMinimum { length_s } => {
                write!(f, "below {RELEVANT_MIN_S} s (length {length_s} s)")
            }
            IntervalViolation::AboveMaximum { length_s } => {
                write!(f, "above {RELEVANT_MAX_S} s (length {length_s} s)")
            }
            IntervalViolation::MachineAssigned => {
                f.write_str("machine-assigned: irrelevant intervals are chosen at random by the system")
            }
        }
    }
}

/// Checks a human-submitted interval against the label's rules.
pub fn validate_interval(label: Label, interval: &Interval) -> Result<(), IntervalViolation> {
    match label {
        Label::Irrelevant => Err(IntervalViolation::MachineAssigned),
        Label::Relevant => {
            let length_s = interval.length();
            if length_s < RELEVANT_MIN_S {
                Err(IntervalViolation::BelowMinimum { length_s })
            } else if length_s > RELEVANT_MAX_S {
                Err(IntervalViolation::AboveMaximum { length_s })
            } else {
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssignedInterval {
    pub interval: Interval,
    /// The video is shorter than the target length; the interval covers all of it.
    pub short: bool,
}

/// Places a 15 s interval uniformly at random inside a video, or spans the
/// whole video (flagged short) when it is shorter than that.
pub fn assign_irrelevant_interval(duration_s: f64, seed: u64) -> Result<AssignedInterval, IntervalError> {
    if !duration_s.is_finite() || duration_s <= 0.0 {
        return Err(IntervalError::NonPositiveDuration(duration_s));
    }
    if duration_s < IRRELEVANT_INTERVAL_S {
        return Ok(AssignedInterval {
            interval: Interval { start_s: 0.0, end_s: duration_s },
            short: true,
        });
    }
    let slack = duration_s - IRRELEVANT_INTERVAL_S;
    let start_s = if slack > 0.0 {
        rng_from_seed(seed).random_range(0.0..=slack)
    } else {
        0.0
    };
    Ok(AssignedInterval {
        interval: Interval {
            start_s,
            end_s: start_s + IRRELEVANT_INTERVAL_S,
        },
        short: false,
    })
}
