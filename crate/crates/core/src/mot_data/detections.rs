use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use super::annotations::{parse_index, parse_integral, parse_real};
use super::{FormatError, ObjectClass};
use crate::assignment::BBox;

/// Which sensor produced a detection. `F` marks a box confirmed by both.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Modality {
    V,
    T,
    F,
}

impl Modality {
    pub fn as_char(self) -> char {
        match self {
            Modality::V => 'V',
            Modality::T => 'T',
            Modality::F => 'F',
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

/// A detector output. det.txt line: `frame,x,y,w,h,score,class,modality`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub frame: u32,
    pub bbox: BBox,
    pub score: f64,
    pub class: ObjectClass,
    pub modality: Modality,
}

pub fn parse_detections(text: &str) -> Result<Vec<Detection>, FormatError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split(',').map(str::trim).collect();
        if fields.len() != 8 {
            return Err(FormatError::ColumnCount {
                line,
                expected: 8,
                found: fields.len(),
            });
        }
        let frame = parse_index(fields[0], line, "frame")?;
        let x = parse_real(fields[1], line, "x")?;
        let y = parse_real(fields[2], line, "y")?;
        let w = parse_real(fields[3], line, "w")?;
        let h = parse_real(fields[4], line, "h")?;
        if w < 0.0 || h < 0.0 {
            return Err(FormatError::InvalidField {
                line,
                field: "w/h",
                reason: format!("negative box size {w}x{h}"),
            });
        }
        let score = parse_real(fields[5], line, "score")?;
        if !(0.0..=1.0).contains(&score) {
            return Err(FormatError::InvalidField {
                line,
                field: "score",
                reason: format!("{score} is outside [0, 1]"),
            });
        }
        let label = parse_integral(fields[6], line, "class")?;
        let class = u8::try_from(label)
            .ok()
            .and_then(ObjectClass::new)
            .ok_or(FormatError::InvalidClass { line, value: label })?;
        let modality = match fields[7] {
            "V" => Modality::V,
            "T" => Modality::T,
            "F" => Modality::F,
            other => {
                return Err(FormatError::InvalidField {
                    line,
                    field: "modality",
                    reason: format!("'{other}' is not V, T or F"),
                })
            }
        };
        out.push(Detection {
            frame,
            bbox: BBox::new(x, y, w, h),
            score,
            class,
            modality,
        });
    }
    Ok(out)
}

pub fn serialize_detections(dets: &[Detection]) -> String {
    let mut out = String::with_capacity(dets.len() * 40);
    for d in dets {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            d.frame,
            d.bbox.x,
            d.bbox.y,
            d.bbox.w,
            d.bbox.h,
            d.score,
            d.class.get(),
            d.modality
        );
    }
    out
}

/// Buckets detections by frame: element `k` holds frame `k + 1`. Detections
/// past `n_frames` are dropped.
pub fn detections_by_frame(dets: &[Detection], n_frames: u32) -> Vec<Vec<Detection>> {
    let mut frames = vec![Vec::new(); n_frames as usize];
    for d in dets {
        if let Some(bucket) = frames.get_mut(d.frame as usize - 1) {
            bucket.push(*d);
        }
    }
    frames
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_serialize() {
        let text = "1,10,20,30,40,0.9,1,V\n2,0.5,1,2,3,1,2,T\n";
        let dets = parse_detections(text).unwrap();
        assert_eq!(dets.len(), 2);
        assert_eq!(dets[0].bbox, BBox::new(10.0, 20.0, 30.0, 40.0));
        assert_eq!(dets[1].modality, Modality::T);
        assert_eq!(serialize_detections(&dets), text);
    }

    #[test]
    fn rejects_bad_rows() {
        assert!(parse_detections("1,10,20,30,40,0.9,1\n").is_err());
        assert!(parse_detections("1,10,20,30,40,1.5,1,V\n").is_err());
        assert!(parse_detections("1,10,20,30,40,0.5,1,X\n").is_err());
        assert!(parse_detections("1,10,20,30,40,0.5,4,V\n").is_err());
    }

    #[test]
    fn bucketing() {
        let dets = parse_detections("2,0,0,1,1,0.5,1,V\n2,5,5,1,1,0.5,1,T\n9,0,0,1,1,0.5,1,V\n").unwrap();
        let frames = detections_by_frame(&dets, 3);
        assert_eq!(frames.iter().map(Vec::len).collect::<Vec<_>>(), vec![0, 2, 0]);
    }
}
