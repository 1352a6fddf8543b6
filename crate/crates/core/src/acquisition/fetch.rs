use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use super::{AcquisitionError, PrivateMapEntry};
use crate::command::CommandTemplate;

/// Downloads one video through the user's fetch command.
///
/// The template may use `{platform_id}`, `{local_id}` and `{output}`; the
/// command must write the video to `{output}`. Succeeds only if that file
/// exists and is non-empty afterwards.
pub fn fetch_video(
    template: &CommandTemplate,
    entry: &PrivateMapEntry,
    output: &Path,
) -> Result<PathBuf, AcquisitionError> {
    let fail = |message: String| AcquisitionError::Fetch {
        local_id: entry.local_id.clone(),
        message,
    };
    if let Some(parent) = output.parent() {
        fs::create_dir_all(parent).map_err(|e| fail(e.to_string()))?;
    }
    let vars: BTreeMap<&str, String> = [
        ("platform_id", entry.platform_video_id.clone()),
        ("local_id", entry.local_id.to_string()),
        ("output", output.display().to_string()),
    ]
    .into_iter()
    .collect();
    template.run(&vars).map_err(|e| fail(e.to_string()))?;
    match fs::metadata(output) {
        Ok(m) if m.is_file() && m.len() > 0 => Ok(output.to_path_buf()),
        Ok(_) => Err(fail(format!("{} is empty", output.display()))),
        Err(_) => Err(fail(format!("{} was not created", output.display()))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry() -> PrivateMapEntry {
        PrivateMapEntry {
            local_id: "vid_0001".into(),
            platform_video_id: "abc123".into(),
        }
    }

    #[test]
    fn verifies_output_exists_and_is_nonempty() {
        let dir = tempfile::tempdir().unwrap();
        let script = dir.path().join("fetch.sh");
        fs::write(&script, "printf %s \"$1\" > \"$2\"\n").unwrap();

        let ok = CommandTemplate::parse(&format!("sh {} {{platform_id}} {{output}}", script.display())).unwrap();
        let out = dir.path().join("videos/vid_0001.mp4");
        let path = fetch_video(&ok, &entry(), &out).unwrap();
        assert_eq!(fs::read_to_string(path).unwrap(), "abc123");

        let empty = CommandTemplate::parse("touch {output}").unwrap();
        let out2 = dir.path().join("videos/vid_0002.mp4");
        assert!(matches!(fetch_video(&empty, &entry(), &out2), Err(AcquisitionError::Fetch { .. })));

        let noop = CommandTemplate::parse("true {platform_id}").unwrap();
        let out3 = dir.path().join("videos/vid_0003.mp4");
        assert!(fetch_video(&noop, &entry(), &out3).is_err());

        let failing = CommandTemplate::parse("false").unwrap();
        assert!(fetch_video(&failing, &entry(), &out3).is_err());
    }
}
