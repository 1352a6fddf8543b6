use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use image::RgbImage;

use super::FramepipeError;
use crate::command::{CommandError, CommandTemplate};
use crate::corpus::Interval;

/// Optional decoder output listing one presentation timestamp (seconds from
/// video start) per emitted image, in file-name order.
pub const TIMESTAMPS_FILE: &str = "timestamps.txt";

const IMAGE_EXTENSIONS: &[&str] = &["jpg", "jpeg", "png", "bmp", "ppm"];

/// External video decoder, invoked through a command template with the
/// placeholders `{input}`, `{start}`, `{end}` (seconds) and `{out_dir}`.
///
/// The decoder writes every frame it yields for the interval as an image
/// into `{out_dir}`; file names must sort in presentation order. It may
/// also write [`TIMESTAMPS_FILE`]; without it, timestamps are spread evenly
/// over the interval.
///
/// An ffmpeg template looks like
/// `ffmpeg -v error -ss {start} -to {end} -i {input} -vsync 0 {out_dir}/%05d.png`.
#[derive(Debug, Clone)]
pub struct Decoder {
    template: CommandTemplate,
}

#[derive(Debug, Clone)]
pub struct RawFrames {
    pub frames: Vec<RgbImage>,
    pub timestamps: Vec<f64>,
}

impl RawFrames {
    pub fn native_count(&self) -> usize {
        self.frames.len()
    }
}

impl Decoder {
    pub fn new(template: CommandTemplate) -> Self {
        Self { template }
    }

    pub fn parse(template: &str) -> Result<Self, CommandError> {
        CommandTemplate::parse(template).map(Self::new)
    }

    /// Decodes every frame inside `interval`, in presentation order.
    pub fn enumerate_frames(&self, video: &Path, interval: &Interval) -> Result<RawFrames, FramepipeError> {
        if !(interval.end_s > interval.start_s) {
            return Err(FramepipeError::EmptyInterval {
                start_s: interval.start_s,
                end_s: interval.end_s,
            });
        }
        match fs::metadata(video) {
            Ok(m) if m.is_file() && m.len() > 0 => {}
            _ => return Err(FramepipeError::Undecodable(format!("{} is missing or empty", video.display()))),
        }

        let scratch = tempfile::Builder::new()
            .prefix(".decode-")
            .tempdir()
            .map_err(|e| FramepipeError::Io(e.to_string()))?;
        let vars: BTreeMap<&str, String> = [
            ("input", video.display().to_string()),
            ("start", format!("{:.3}", interval.start_s)),
            ("end", format!("{:.3}", interval.end_s)),
            ("out_dir", scratch.path().display().to_string()),
        ]
        .into_iter()
        .collect();
        self.template
            .run(&vars)
            .map_err(|e| FramepipeError::DecoderFailure(e.to_string()))?;

        let mut files: Vec<PathBuf> = fs::read_dir(scratch.path())
            .map_err(|e| FramepipeError::Io(e.to_string()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.extension()
                    .and_then(|x| x.to_str())
                    .is_some_and(|x| IMAGE_EXTENSIONS.contains(&x.to_ascii_lowercase().as_str()))
            })
            .collect();
        files.sort();

        let mut frames = Vec::with_capacity(files.len());
        for f in &files {
            let img = image::open(f)
                .map_err(|e| FramepipeError::Undecodable(format!("{}: {e}", f.display())))?
                .to_rgb8();
            frames.push(img);
        }

        let timestamps = match fs::read_to_string(scratch.path().join(TIMESTAMPS_FILE)) {
            Ok(text) => parse_timestamps(&text, frames.len())?,
            Err(_) => even_timestamps(interval, frames.len()),
        };
        Ok(RawFrames { frames, timestamps })
    }
}

fn even_timestamps(interval: &Interval, n: usize) -> Vec<f64> {
    let step = interval.length() / n.max(1) as f64;
    (0..n).map(|i| interval.start_s + i as f64 * step).collect()
}

fn parse_timestamps(text: &str, expected: usize) -> Result<Vec<f64>, FramepipeError> {
    let ts: Vec<f64> = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| FramepipeError::DecoderFailure(format!("bad {TIMESTAMPS_FILE}: {e}")))?;
    if ts.len() != expected {
        return Err(FramepipeError::DecoderFailure(format!(
            "{TIMESTAMPS_FILE} lists {} timestamps for {expected} frames",
            ts.len()
        )));
    }
    if ts.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(FramepipeError::DecoderFailure(format!(
            "{TIMESTAMPS_FILE} is not strictly increasing"
        )));
    }
    Ok(ts)
}
