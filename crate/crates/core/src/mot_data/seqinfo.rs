use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::FormatError;

/// Capture platform of a sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Platform {
    #[serde(rename = "UAV")]
    Uav,
    #[serde(rename = "surveillance")]
    Surveillance,
    #[serde(rename = "handheld")]
    Handheld,
    #[serde(rename = "unknown")]
    Unknown,
}

impl Platform {
    pub const ALL: [Platform; 3] = [Platform::Handheld, Platform::Surveillance, Platform::Uav];

    pub fn as_str(self) -> &'static str {
        match self {
            Platform::Uav => "UAV",
            Platform::Surveillance => "surveillance",
            Platform::Handheld => "handheld",
            Platform::Unknown => "unknown",
        }
    }
}

impl fmt::Display for Platform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Platform {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "uav" | "drone" => Ok(Platform::Uav),
            "surveillance" => Ok(Platform::Surveillance),
            "handheld" => Ok(Platform::Handheld),
            "unknown" | "" => Ok(Platform::Unknown),
            other => Err(format!("unknown platform '{other}'")),
        }
    }
}

/// Contents of a sequence's `seqinfo.ini`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceMeta {
    pub name: String,
    pub frame_rate: f64,
    pub seq_length: u32,
    pub visible_dir: String,
    pub infrared_dir: String,
    pub image_ext: String,
    pub visible_width: u32,
    pub visible_height: u32,
    pub infrared_width: u32,
    pub infrared_height: u32,
    pub platform: Platform,
}

impl SequenceMeta {
    /// Metadata with the default folder layout (`visible/`, `infrared/`, JPEG
    /// frames) and identical resolutions in both modalities.
    pub fn new(name: impl Into<String>, frame_rate: f64, seq_length: u32, width: u32, height: u32) -> Self {
        Self {
            name: name.into(),
            frame_rate,
            seq_length,
            visible_dir: "visible".into(),
            infrared_dir: "infrared".into(),
            image_ext: ".jpg".into(),
            visible_width: width,
            visible_height: height,
            infrared_width: width,
            infrared_height: height,
            platform: Platform::Unknown,
        }
    }

    pub fn with_platform(mut self, platform: Platform) -> Self {
        self.platform = platform;
        self
    }

    /// Sequence duration in seconds.
    pub fn duration_s(&self) -> f64 {
        f64::from(self.seq_length) / self.frame_rate
    }

    /// File name of `frame` (1-based) in either modality folder.
    pub fn frame_file_name(&self, frame: u32) -> String {
        format!("{frame:06}{}", self.image_ext)
    }

    /// Renders the `[Sequence]` section read back by [`parse_seqinfo`].
    pub fn to_ini(&self) -> String {
        format!(
            "[Sequence]\nname={}\nimDir={}\nimDirIr={}\nframeRate={}\nseqLength={}\nimWidth={}\nimHeight={}\nimWidthIr={}\nimHeightIr={}\nimExt={}\nplatform={}\n",
            self.name,
            self.visible_dir,
            self.infrared_dir,
            self.frame_rate,
            self.seq_length,
            self.visible_width,
            self.visible_height,
            self.infrared_width,
            self.infrared_height,
            self.image_ext,
            self.platform,
        )
    }
}

/// Parses the `[Sequence]` section of a seqinfo.ini document.
///
/// Required keys: `name`, `imDir`, `frameRate`, `seqLength`, `imWidth`,
/// `imHeight`. Optional: `imDirIr` (default `infrared`), `imWidthIr` /
/// `imHeightIr` (default to the visible resolution), `imExt` (default
/// `.jpg`), `platform` (default unknown). Other keys and sections are ignored.
pub fn parse_seqinfo(text: &str) -> Result<SequenceMeta, FormatError> {
    let mut in_sequence = false;
    let mut entries: Vec<(String, String)> = Vec::new();
    for raw in text.lines() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with(';') || line.starts_with('#') {
            continue;
        }
        if line.starts_with('[') && line.ends_with(']') {
            in_sequence = line[1..line.len() - 1].trim().eq_ignore_ascii_case("sequence");
            continue;
        }
        if !in_sequence {
            continue;
        }
        if let Some((k, v)) = line.split_once('=') {
            entries.push((k.trim().to_string(), v.trim().to_string()));
        }
    }
    let lookup = |key: &str| entries.iter().rev().find(|(k, _)| k == key).map(|(_, v)| v.as_str());
    let required = |key: &str| lookup(key).ok_or_else(|| FormatError::MissingKey(key.to_string()));

    let name = required("name")?.to_string();
    let visible_dir = required("imDir")?.to_string();
    let frame_rate = parse_positive_real("frameRate", required("frameRate")?)?;
    let seq_length = parse_positive_int("seqLength", required("seqLength")?)?;
    let visible_width = parse_positive_int("imWidth", required("imWidth")?)?;
    let visible_height = parse_positive_int("imHeight", required("imHeight")?)?;
    let infrared_width = match lookup("imWidthIr") {
        Some(v) => parse_positive_int("imWidthIr", v)?,
        None => visible_width,
    };
    let infrared_height = match lookup("imHeightIr") {
        Some(v) => parse_positive_int("imHeightIr", v)?,
        None => visible_height,
    };
    let platform = match lookup("platform") {
        Some(v) => v.parse().map_err(|reason| FormatError::InvalidValue {
            key: "platform".into(),
            value: v.into(),
            reason,
        })?,
        None => Platform::Unknown,
    };

    Ok(SequenceMeta {
        name,
        frame_rate,
        seq_length,
        visible_dir,
        infrared_dir: lookup("imDirIr").unwrap_or("infrared").to_string(),
        image_ext: lookup("imExt").unwrap_or(".jpg").to_string(),
        visible_width,
        visible_height,
        infrared_width,
        infrared_height,
        platform,
    })
}

fn parse_positive_real(key: &str, value: &str) -> Result<f64, FormatError> {
    let invalid = |reason: &str| FormatError::InvalidValue {
        key: key.into(),
        value: value.into(),
        reason: reason.into(),
    };
    let v: f64 = value.parse().map_err(|_| invalid("not a number"))?;
    if !v.is_finite() || v <= 0.0 {
        return Err(invalid("must be positive"));
    }
    Ok(v)
}

fn parse_positive_int(key: &str, value: &str) -> Result<u32, FormatError> {
    let invalid = |reason: &str| FormatError::InvalidValue {
        key: key.into(),
        value: value.into(),
        reason: reason.into(),
    };
    let v: i64 = value.parse().map_err(|_| invalid("not an integer"))?;
    if v <= 0 {
        return Err(invalid("must be positive"));
    }
    u32::try_from(v).map_err(|_| invalid("too large"))
}
