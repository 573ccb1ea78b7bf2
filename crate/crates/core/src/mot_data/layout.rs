//! On-disk sequence tree:
//!
//! ```text
//! <sequence>/
//!   seqinfo.ini
//!   visible/000001.jpg ...
//!   infrared/000001.jpg ...
//!   gt/gt.txt, gt/gt1.txt
//!   det/det.txt            (optional)
//! ```

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use super::{
    collapse_classes, parse_annotations, parse_detections, parse_seqinfo, serialize_annotations, serialize_detections,
    AnnotationSet, Detection, FormatError, SequenceMeta,
};

pub const SEQINFO_FILE: &str = "seqinfo.ini";
pub const GT_DIR: &str = "gt";
pub const GT_FILE: &str = "gt.txt";
pub const GT1_FILE: &str = "gt1.txt";
pub const DET_DIR: &str = "det";
pub const DET_FILE: &str = "det.txt";

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {source}")]
    Format {
        path: PathBuf,
        #[source]
        source: FormatError,
    },
}

pub(crate) fn read_text(path: &Path) -> Result<String, DataError> {
    fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> DataError + '_ {
    move |source| DataError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Metadata plus the paired frame listings of one sequence directory.
#[derive(Debug, Clone, PartialEq)]
pub struct SequencePair {
    pub root: PathBuf,
    pub meta: SequenceMeta,
    /// Sorted file names found in the visible folder.
    pub visible_frames: Vec<String>,
    /// Sorted file names found in the infrared folder.
    pub infrared_frames: Vec<String>,
}

impl SequencePair {
    pub fn open(root: &Path) -> Result<Self, DataError> {
        let meta = read_meta(root)?;
        let visible_frames = list_files(&root.join(&meta.visible_dir))?;
        let infrared_frames = list_files(&root.join(&meta.infrared_dir))?;
        Ok(Self {
            root: root.to_path_buf(),
            meta,
            visible_frames,
            infrared_frames,
        })
    }

    pub fn gt_path(&self) -> PathBuf {
        self.root.join(GT_DIR).join(GT_FILE)
    }
}

pub fn read_meta(root: &Path) -> Result<SequenceMeta, DataError> {
    let path = root.join(SEQINFO_FILE);
    parse_seqinfo(&read_text(&path)?).map_err(|source| DataError::Format { path, source })
}

/// Sorted names of the regular files in `dir`.
pub fn list_files(dir: &Path) -> Result<Vec<String>, DataError> {
    let mut names = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let entry = entry.map_err(io_err(dir))?;
        if entry.file_type().map_err(io_err(dir))?.is_file() {
            names.push(entry.file_name().to_string_lossy().into_owned());
        }
    }
    names.sort();
    Ok(names)
}

/// Subdirectories of `root` holding a seqinfo.ini, sorted by name.
pub fn list_sequences(root: &Path) -> Result<Vec<PathBuf>, DataError> {
    let mut dirs = Vec::new();
    for entry in fs::read_dir(root).map_err(io_err(root))? {
        let path = entry.map_err(io_err(root))?.path();
        if path.join(SEQINFO_FILE).is_file() {
            dirs.push(path);
        }
    }
    dirs.sort();
    Ok(dirs)
}

/// Metadata and full ground truth (`gt/gt.txt`) of one sequence.
pub fn load_sequence(root: &Path) -> Result<(SequenceMeta, AnnotationSet), DataError> {
    let meta = read_meta(root)?;
    let path = root.join(GT_DIR).join(GT_FILE);
    let gt = parse_annotations(&read_text(&path)?, &meta).map_err(|source| DataError::Format { path, source })?;
    Ok((meta, gt))
}

/// Every sequence below `root`, sorted by directory name.
pub fn load_dataset(root: &Path) -> Result<Vec<(SequenceMeta, AnnotationSet)>, DataError> {
    list_sequences(root)?.iter().map(|dir| load_sequence(dir)).collect()
}

pub fn load_detections(root: &Path) -> Result<Vec<Detection>, DataError> {
    let path = root.join(DET_DIR).join(DET_FILE);
    parse_detections(&read_text(&path)?).map_err(|source| DataError::Format { path, source })
}

/// Writes a complete sequence tree under `root`: seqinfo.ini, zero-byte
/// placeholder frames in both modality folders, gt.txt, the class-collapsed
/// gt1.txt and, when given, det/det.txt.
pub fn write_sequence_tree(
    root: &Path,
    meta: &SequenceMeta,
    gt: &AnnotationSet,
    detections: Option<&[Detection]>,
) -> Result<(), DataError> {
    let write =
        |path: PathBuf, contents: &[u8]| fs::write(&path, contents).map_err(|source| DataError::Io { path, source });
    let mkdir = |path: PathBuf| fs::create_dir_all(&path).map_err(|source| DataError::Io { path, source });

    mkdir(root.to_path_buf())?;
    write(root.join(SEQINFO_FILE), meta.to_ini().as_bytes())?;
    for dir in [&meta.visible_dir, &meta.infrared_dir] {
        let folder = root.join(dir);
        mkdir(folder.clone())?;
        for frame in 1..=meta.seq_length {
            write(folder.join(meta.frame_file_name(frame)), b"")?;
        }
    }
    mkdir(root.join(GT_DIR))?;
    write(root.join(GT_DIR).join(GT_FILE), serialize_annotations(gt).as_bytes())?;
    write(
        root.join(GT_DIR).join(GT1_FILE),
        serialize_annotations(&collapse_classes(gt)).as_bytes(),
    )?;
    if let Some(dets) = detections {
        mkdir(root.join(DET_DIR))?;
        write(root.join(DET_DIR).join(DET_FILE), serialize_detections(dets).as_bytes())?;
    }
    Ok(())
}
