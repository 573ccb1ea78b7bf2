use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::{FormatError, SequenceMeta};
use crate::assignment::BBox;

/// Category label. The format allows exactly two labels, 1 and 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct ObjectClass(u8);

impl ObjectClass {
    pub const ONE: ObjectClass = ObjectClass(1);
    pub const TWO: ObjectClass = ObjectClass(2);

    pub fn new(label: u8) -> Option<Self> {
        matches!(label, 1 | 2).then_some(Self(label))
    }

    pub fn get(self) -> u8 {
        self.0
    }
}

impl TryFrom<u8> for ObjectClass {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        Self::new(v).ok_or_else(|| format!("class label {v} is not 1 or 2"))
    }
}

impl From<ObjectClass> for u8 {
    fn from(c: ObjectClass) -> u8 {
        c.0
    }
}

/// One ground-truth line: `frame,id,x,y,w,h,valid,class,1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub frame: u32,
    pub track_id: u32,
    pub bbox: BBox,
    pub valid: bool,
    pub class: ObjectClass,
}

/// Ground truth of one sequence, sorted by `(frame, track_id)` with a
/// per-frame index.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AnnotationSet {
    records: Vec<AnnotationRecord>,
    index: BTreeMap<u32, Range<usize>>,
}

impl AnnotationSet {
    /// Sorts `records` and rejects a repeated `(frame, track_id)` key.
    pub fn new(mut records: Vec<AnnotationRecord>) -> Result<Self, FormatError> {
        records.sort_by_key(|r| (r.frame, r.track_id));
        if let Some(w) = records
            .windows(2)
            .find(|w| (w[0].frame, w[0].track_id) == (w[1].frame, w[1].track_id))
        {
            return Err(FormatError::DuplicateRecord {
                line: 0,
                frame: w[1].frame,
                track_id: w[1].track_id,
            });
        }
        let mut index = BTreeMap::new();
        let mut start = 0;
        while start < records.len() {
            let frame = records[start].frame;
            let end = start + records[start..].iter().take_while(|r| r.frame == frame).count();
            index.insert(frame, start..end);
            start = end;
        }
        Ok(Self { records, index })
    }

    pub fn records(&self) -> &[AnnotationRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Records of one frame (empty if the frame has none).
    pub fn frame(&self, frame: u32) -> &[AnnotationRecord] {
        self.index.get(&frame).map_or(&[][..], |r| &self.records[r.clone()])
    }

    /// Annotated frame numbers in ascending order.
    pub fn frames(&self) -> impl Iterator<Item = u32> + '_ {
        self.index.keys().copied()
    }

    pub fn max_frame(&self) -> Option<u32> {
        self.index.keys().next_back().copied()
    }

    /// Copy holding only `valid = 1` records.
    pub fn valid_only(&self) -> AnnotationSet {
        let kept = self.records.iter().filter(|r| r.valid).copied().collect();
        AnnotationSet::new(kept).expect("subset of a valid set")
    }
}

/// Line-by-line parse that keeps going after errors. Returns every record that
/// parsed cleanly and every problem found, in line order; duplicate keys are
/// reported against the later line.
pub fn parse_annotation_lines(text: &str, seq_length: Option<u32>) -> (Vec<AnnotationRecord>, Vec<FormatError>) {
    let mut records = Vec::new();
    let mut errors = Vec::new();
    let mut seen = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        match parse_record(raw, line_no, seq_length) {
            Ok(rec) => {
                if seen.insert((rec.frame, rec.track_id), line_no).is_some() {
                    errors.push(FormatError::DuplicateRecord {
                        line: line_no,
                        frame: rec.frame,
                        track_id: rec.track_id,
                    });
                } else {
                    records.push(rec);
                }
            }
            Err(e) => errors.push(e),
        }
    }
    (records, errors)
}

/// Parses a 9-column ground-truth file. Fails on the first malformed line.
pub fn parse_annotations(text: &str, meta: &SequenceMeta) -> Result<AnnotationSet, FormatError> {
    let (records, mut errors) = parse_annotation_lines(text, Some(meta.seq_length));
    if !errors.is_empty() {
        return Err(errors.swap_remove(0));
    }
    AnnotationSet::new(records)
}

/// Canonical text form: one newline-terminated line per record, reals in
/// shortest round-trip notation (integral values carry no decimal point).
pub fn serialize_annotations(set: &AnnotationSet) -> String {
    let mut out = String::with_capacity(set.len() * 32);
    for r in set.records() {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},1",
            r.frame,
            r.track_id,
            r.bbox.x,
            r.bbox.y,
            r.bbox.w,
            r.bbox.h,
            u8::from(r.valid),
            r.class.get()
        );
    }
    out
}

/// Relabels every record as class 1 (the single-class evaluation copy).
pub fn collapse_classes(set: &AnnotationSet) -> AnnotationSet {
    AnnotationSet {
        records: set
            .records
            .iter()
            .map(|r| AnnotationRecord {
                class: ObjectClass::ONE,
                ..*r
            })
            .collect(),
        index: set.index.clone(),
    }
}

fn parse_record(raw: &str, line: usize, seq_length: Option<u32>) -> Result<AnnotationRecord, FormatError> {
    let fields: Vec<&str> = raw.split(',').map(str::trim).collect();
    if fields.len() != 9 {
        return Err(FormatError::ColumnCount {
            line,
            expected: 9,
            found: fields.len(),
        });
    }
    let frame = parse_index(fields[0], line, "frame")?;
    let track_id = parse_index(fields[1], line, "track_id")?;
    let x = parse_real(fields[2], line, "x")?;
    let y = parse_real(fields[3], line, "y")?;
    let w = parse_real(fields[4], line, "w")?;
    let h = parse_real(fields[5], line, "h")?;
    if w <= 0.0 || h <= 0.0 {
        return Err(FormatError::InvalidField {
            line,
            field: "w/h",
            reason: format!("box size {w}x{h} is not positive"),
        });
    }
    let valid = match parse_integral(fields[6], line, "valid")? {
        0 => false,
        1 => true,
        other => {
            return Err(FormatError::InvalidField {
                line,
                field: "valid",
                reason: format!("{other} is not 0 or 1"),
            })
        }
    };
    let label = parse_integral(fields[7], line, "class")?;
    let class = u8::try_from(label)
        .ok()
        .and_then(ObjectClass::new)
        .ok_or(FormatError::InvalidClass { line, value: label })?;
    if parse_integral(fields[8], line, "reserved")? != 1 {
        return Err(FormatError::InvalidField {
            line,
            field: "reserved",
            reason: "ninth column must be 1".into(),
        });
    }
    if let Some(len) = seq_length {
        if frame > len {
            return Err(FormatError::FrameOutOfRange {
                line,
                frame,
                seq_length: len,
            });
        }
    }
    Ok(AnnotationRecord {
        frame,
        track_id,
        bbox: BBox::new(x, y, w, h),
        valid,
        class,
    })
}

pub(crate) fn parse_real(s: &str, line: usize, field: &'static str) -> Result<f64, FormatError> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(FormatError::InvalidNumber {
            line,
            field,
            value: s.to_string(),
        }),
    }
}

/// Integer field; integral reals such as `3.0` are accepted.
pub(crate) fn parse_integral(s: &str, line: usize, field: &'static str) -> Result<i64, FormatError> {
    if let Ok(v) = s.parse::<i64>() {
        return Ok(v);
    }
    let v = parse_real(s, line, field)?;
    if v.fract() == 0.0 && v.abs() < 9.0e15 {
        Ok(v as i64)
    } else {
        Err(FormatError::InvalidNumber {
            line,
            field,
            value: s.to_string(),
        })
    }
}

/// 1-based index field (frame number or track id).
pub(crate) fn parse_index(s: &str, line: usize, field: &'static str) -> Result<u32, FormatError> {
    let v = parse_integral(s, line, field)?;
    match u32::try_from(v) {
        Ok(v) if v >= 1 => Ok(v),
        _ => Err(FormatError::InvalidField {
            line,
            field,
            reason: format!("{v} is not a positive index"),
        }),
    }
}
