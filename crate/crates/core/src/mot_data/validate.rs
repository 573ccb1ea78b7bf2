use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::layout::{read_text, DataError, SequencePair, GT1_FILE, GT_DIR};
use super::{collapse_classes, parse_annotation_lines, AnnotationSet, FormatError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IssueKind {
    Unreadable,
    FrameCountMismatch,
    FilenameMismatch,
    SeqLengthMismatch,
    MissingGroundTruth,
    ColumnCount,
    InvalidValue,
    InvalidClass,
    DuplicateRecord,
    FrameOutOfRange,
    CollapsedCopyMismatch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Issue {
    pub severity: Severity,
    pub kind: IssueKind,
    pub location: String,
    pub message: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        write!(f, "{sev} [{:?}] {}: {}", self.kind, self.location, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        !self.issues.iter().any(|i| i.severity == Severity::Error)
    }

    pub fn has(&self, kind: IssueKind) -> bool {
        self.issues.iter().any(|i| i.kind == kind)
    }

    fn error(&mut self, kind: IssueKind, location: impl Into<String>, message: impl Into<String>) {
        self.issues.push(Issue {
            severity: Severity::Error,
            kind,
            location: location.into(),
            message: message.into(),
        });
    }

    fn warning(&mut self, kind: IssueKind, location: impl Into<String>, message: impl Into<String>) {
        self.issues.push(Issue {
            severity: Severity::Warning,
            kind,
            location: location.into(),
            message: message.into(),
        });
    }
}

// Per-file cap on listed name mismatches; the rest are summarized.
const MAX_NAME_ISSUES: usize = 10;

/// Checks a sequence directory. Problems, including unreadable files, become
/// report entries; this never fails.
pub fn validate_sequence(root: &Path) -> ValidationReport {
    let mut report = ValidationReport::default();
    let pair = match SequencePair::open(root) {
        Ok(pair) => pair,
        Err(e) => {
            report.error(IssueKind::Unreadable, root.display().to_string(), e.to_string());
            return report;
        }
    };
    let gt_path = pair.gt_path();
    let gt_text = match read_text(&gt_path) {
        Ok(text) => Some(text),
        Err(DataError::Io { source, .. }) if source.kind() == std::io::ErrorKind::NotFound => None,
        Err(e) => {
            report.error(IssueKind::Unreadable, gt_path.display().to_string(), e.to_string());
            None
        }
    };
    let gt1_path = root.join(GT_DIR).join(GT1_FILE);
    let gt1_text = read_text(&gt1_path).ok();
    let mut inner = validate_pair(&pair, gt_text.as_deref(), gt1_text.as_deref());
    report.issues.append(&mut inner.issues);
    report
}

/// Consistency checks over an already listed sequence.
pub fn validate_pair(pair: &SequencePair, gt_text: Option<&str>, gt1_text: Option<&str>) -> ValidationReport {
    let mut report = ValidationReport::default();
    let meta = &pair.meta;
    let vis_loc = format!("{}/{}", meta.name, meta.visible_dir);
    let ir_loc = format!("{}/{}", meta.name, meta.infrared_dir);

    if pair.visible_frames.len() != pair.infrared_frames.len() {
        report.error(
            IssueKind::FrameCountMismatch,
            &meta.name,
            format!(
                "{} visible frames but {} infrared frames",
                pair.visible_frames.len(),
                pair.infrared_frames.len()
            ),
        );
    }
    for (loc, listing) in [(&vis_loc, &pair.visible_frames), (&ir_loc, &pair.infrared_frames)] {
        if listing.len() != meta.seq_length as usize {
            report.error(
                IssueKind::SeqLengthMismatch,
                loc.as_str(),
                format!(
                    "seqLength is {} but {} frames are present",
                    meta.seq_length,
                    listing.len()
                ),
            );
        }
    }

    let vis: BTreeSet<&str> = pair.visible_frames.iter().map(String::as_str).collect();
    let ir: BTreeSet<&str> = pair.infrared_frames.iter().map(String::as_str).collect();
    let unpaired: Vec<_> = vis.symmetric_difference(&ir).collect();
    for name in unpaired.iter().take(MAX_NAME_ISSUES) {
        let side = if vis.contains(**name) { &ir_loc } else { &vis_loc };
        report.error(
            IssueKind::FilenameMismatch,
            side.as_str(),
            format!("no counterpart for frame file {name}"),
        );
    }
    if unpaired.len() > MAX_NAME_ISSUES {
        report.error(
            IssueKind::FilenameMismatch,
            &meta.name,
            format!("{} more unpaired frame files", unpaired.len() - MAX_NAME_ISSUES),
        );
    }
    let expected: BTreeSet<String> = (1..=meta.seq_length).map(|f| meta.frame_file_name(f)).collect();
    let misnamed: Vec<_> = vis.union(&ir).filter(|n| !expected.contains(**n)).collect();
    for name in misnamed.iter().take(MAX_NAME_ISSUES) {
        report.error(
            IssueKind::FilenameMismatch,
            &meta.name,
            format!("{name} does not follow the {} frame naming", meta.frame_file_name(1)),
        );
    }

    let gt_loc = format!("{}/{GT_DIR}", meta.name);
    let Some(text) = gt_text else {
        report.warning(IssueKind::MissingGroundTruth, gt_loc, "no gt.txt");
        return report;
    };
    let (records, errors) = parse_annotation_lines(text, Some(meta.seq_length));
    for e in &errors {
        report.error(issue_kind(e), format!("{gt_loc}/gt.txt"), e.to_string());
    }
    if let (Some(gt1), true) = (gt1_text, errors.is_empty()) {
        let expected = AnnotationSet::new(records).map(|s| collapse_classes(&s));
        let (records1, errors1) = parse_annotation_lines(gt1, Some(meta.seq_length));
        let actual = AnnotationSet::new(records1);
        if !errors1.is_empty() || expected.ok() != actual.ok() {
            report.error(
                IssueKind::CollapsedCopyMismatch,
                format!("{gt_loc}/{GT1_FILE}"),
                "gt1.txt is not the class-collapsed copy of gt.txt",
            );
        }
    }
    report
}

fn issue_kind(e: &FormatError) -> IssueKind {
    match e {
        FormatError::ColumnCount { .. } => IssueKind::ColumnCount,
        FormatError::InvalidClass { .. } => IssueKind::InvalidClass,
        FormatError::DuplicateRecord { .. } => IssueKind::DuplicateRecord,
        FormatError::FrameOutOfRange { .. } => IssueKind::FrameOutOfRange,
        FormatError::MissingKey(_)
        | FormatError::InvalidValue { .. }
        | FormatError::InvalidNumber { .. }
        | FormatError::InvalidField { .. } => IssueKind::InvalidValue,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mot_data::SequenceMeta;
    use std::path::PathBuf;

    fn pair(n_vis: u32, n_ir: u32, seq_length: u32) -> SequencePair {
        let meta = SequenceMeta::new("seq", 25.0, seq_length, 640, 480);
        SequencePair {
            root: PathBuf::from("seq"),
            visible_frames: (1..=n_vis).map(|f| meta.frame_file_name(f)).collect(),
            infrared_frames: (1..=n_ir).map(|f| meta.frame_file_name(f)).collect(),
            meta,
        }
    }

    #[test]
    fn matching_listings_are_valid() {
        let report = validate_pair(&pair(750, 750, 750), Some("1,1,0,0,5,5,1,1,1\n"), None);
        assert!(report.is_valid(), "{:?}", report.issues);
        assert!(report.issues.is_empty());
    }

    #[test]
    fn frame_count_mismatch() {
        let report = validate_pair(&pair(750, 749, 750), Some(""), None);
        assert!(!report.is_valid());
        assert!(report.has(IssueKind::FrameCountMismatch));
        assert!(report.has(IssueKind::FilenameMismatch));
    }

    #[test]
    fn out_of_range_frame() {
        let report = validate_pair(&pair(750, 750, 750), Some("800,1,0,0,5,5,1,1,1\n"), None);
        assert!(report.has(IssueKind::FrameOutOfRange));
        assert!(!report.is_valid());
    }

    #[test]
    fn renamed_frame() {
        let mut p = pair(3, 3, 3);
        p.infrared_frames[2] = "frame3.jpg".into();
        let report = validate_pair(&p, Some(""), None);
        assert!(report.has(IssueKind::FilenameMismatch));
        assert!(!report.has(IssueKind::FrameCountMismatch));
    }

    #[test]
    fn missing_gt_is_a_warning() {
        let report = validate_pair(&pair(2, 2, 2), None, None);
        assert!(report.is_valid());
        assert!(report.has(IssueKind::MissingGroundTruth));
    }

    #[test]
    fn stale_collapsed_copy() {
        let gt = "1,1,0,0,5,5,1,2,1\n";
        let ok = validate_pair(&pair(2, 2, 2), Some(gt), Some("1,1,0,0,5,5,1,1,1\n"));
        assert!(ok.is_valid());
        let stale = validate_pair(&pair(2, 2, 2), Some(gt), Some(gt));
        assert!(stale.has(IssueKind::CollapsedCopyMismatch));
    }

    #[test]
    fn unreadable_directory_reported() {
        let report = validate_sequence(Path::new("/nonexistent/sequence"));
        assert!(!report.is_valid());
        assert!(report.has(IssueKind::Unreadable));
    }
}
