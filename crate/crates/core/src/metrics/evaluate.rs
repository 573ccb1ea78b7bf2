use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::clear::{check_threshold, clear_counts, ClearCounts, ClearReport};
use super::frames::SequenceData;
use super::hota::{hota_counts, HotaCounts, HotaReport};
use super::identity::{id_counts, IdCounts, IdReport};
use super::MetricsError;
use crate::mot_data::{collapse_classes, AnnotationSet, Platform, SequenceMeta, TrajectorySet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Protocol {
    /// All selected sequences evaluated together.
    I,
    /// One group per capture platform.
    II,
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Protocol::I => f.write_str("Protocol I"),
            Protocol::II => f.write_str("Protocol II"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    /// IoU threshold for CLEAR and IDF1 matching.
    pub threshold: f64,
    /// Upper bound on sequences evaluated concurrently.
    pub jobs: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            threshold: 0.5,
            jobs: 1,
        }
    }
}

/// Raw counts of one sequence (or a pooled group of them).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SequenceCounts {
    pub clear: ClearCounts,
    pub id: IdCounts,
    pub hota: HotaCounts,
}

impl std::ops::AddAssign for SequenceCounts {
    fn add_assign(&mut self, o: Self) {
        self.clear += o.clear;
        self.id += o.id;
        self.hota += o.hota;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceMetrics {
    pub clear: ClearReport,
    pub id: IdReport,
    pub hota: HotaReport,
}

impl From<&SequenceCounts> for SequenceMetrics {
    fn from(c: &SequenceCounts) -> Self {
        Self {
            clear: c.clear.into(),
            id: c.id.into(),
            hota: HotaReport::from(&c.hota),
        }
    }
}

/// Headline values of a group, the unit averaged across Protocol II groups.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Headline {
    pub hota: f64,
    pub deta: f64,
    pub assa: f64,
    pub mota: f64,
    pub motp: f64,
    pub idf1: f64,
}

impl From<&SequenceMetrics> for Headline {
    fn from(m: &SequenceMetrics) -> Self {
        Self {
            hota: m.hota.hota,
            deta: m.hota.deta,
            assa: m.hota.assa,
            mota: m.clear.mota,
            motp: m.clear.motp,
            idf1: m.id.idf1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupReport {
    /// "all" under Protocol I, otherwise the platform name.
    pub group: String,
    pub per_sequence: BTreeMap<String, SequenceMetrics>,
    /// Metrics recomputed from summed counts.
    pub pooled: SequenceMetrics,
    pub pooled_counts: SequenceCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub protocol: Protocol,
    pub groups: Vec<GroupReport>,
    /// Protocol II only: counts pooled over every group.
    pub overall_pooled: Option<SequenceMetrics>,
    /// Protocol II only: unweighted mean of the group headlines.
    pub group_mean: Option<Headline>,
}

/// Counts for one sequence. Ground truth is class-collapsed and restricted to
/// `valid = 1` records; prediction classes are ignored.
pub fn sequence_counts(
    meta: &SequenceMeta,
    gt: &AnnotationSet,
    pred: &TrajectorySet,
    threshold: f64,
) -> Result<SequenceCounts, MetricsError> {
    check_threshold(threshold)?;
    if let Some(last) = pred.max_frame() {
        if last > meta.seq_length {
            return Err(MetricsError::PredictionOutOfRange {
                sequence: meta.name.clone(),
                frame: last,
                seq_length: meta.seq_length,
            });
        }
    }
    let gt_tracks = TrajectorySet::from_annotations(&collapse_classes(gt), false);
    let n = meta.seq_length;
    let data = SequenceData::from_frames(&gt_tracks.frame_objects(n), &pred.frame_objects(n))?;
    Ok(SequenceCounts {
        clear: clear_counts(&data, threshold),
        id: id_counts(&data, threshold),
        hota: hota_counts(&data),
    })
}

/// Scores tracker results against a dataset under a protocol. Every
/// sequence must have a result; extra results are ignored. Sequences are
/// scored independently (up to `options.jobs` at once) and pooled by summing
/// raw counts.
pub fn evaluate(
    dataset: &[(SequenceMeta, AnnotationSet)],
    results: &BTreeMap<String, TrajectorySet>,
    protocol: Protocol,
    options: EvalOptions,
) -> Result<EvaluationReport, MetricsError> {
    check_threshold(options.threshold)?;
    let missing: Vec<String> = dataset
        .iter()
        .filter(|(m, _)| !results.contains_key(&m.name))
        .map(|(m, _)| m.name.clone())
        .collect();
    if !missing.is_empty() {
        return Err(MetricsError::MissingResults(missing));
    }

    let score =
        |(meta, gt): &(SequenceMeta, AnnotationSet)| sequence_counts(meta, gt, &results[&meta.name], options.threshold);
    let counts: Vec<SequenceCounts> = if options.jobs > 1 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(options.jobs)
            .build()
            .map_err(|e| MetricsError::Pool(e.to_string()))?
            .install(|| dataset.par_iter().map(score).collect::<Result<_, _>>())?
    } else {
        dataset.iter().map(score).collect::<Result<_, _>>()?
    };

    let build_group = |name: String, members: Vec<usize>| {
        let mut pooled_counts = SequenceCounts::default();
        let mut per_sequence = BTreeMap::new();
        for k in members {
            pooled_counts += counts[k];
            per_sequence.insert(dataset[k].0.name.clone(), SequenceMetrics::from(&counts[k]));
        }
        GroupReport {
            group: name,
            per_sequence,
            pooled: SequenceMetrics::from(&pooled_counts),
            pooled_counts,
        }
    };

    match protocol {
        Protocol::I => Ok(EvaluationReport {
            protocol,
            groups: vec![build_group("all".into(), (0..dataset.len()).collect())],
            overall_pooled: None,
            group_mean: None,
        }),
        Protocol::II => {
            let mut platforms: Vec<Platform> = Platform::ALL.to_vec();
            if dataset.iter().any(|(m, _)| m.platform == Platform::Unknown) {
                platforms.push(Platform::Unknown);
            }
            let groups: Vec<GroupReport> = platforms
                .into_iter()
                .map(|p| {
                    let members = (0..dataset.len()).filter(|&k| dataset[k].0.platform == p).collect();
                    build_group(p.to_string(), members)
                })
                .filter(|g| !g.per_sequence.is_empty())
                .collect();
            let mut all = SequenceCounts::default();
            for c in &counts {
                all += *c;
            }
            let group_mean = (!groups.is_empty()).then(|| {
                let heads: Vec<Headline> = groups.iter().map(|g| Headline::from(&g.pooled)).collect();
                let mean = |f: fn(&Headline) -> f64| heads.iter().map(f).sum::<f64>() / heads.len() as f64;
                Headline {
                    hota: mean(|h| h.hota),
                    deta: mean(|h| h.deta),
                    assa: mean(|h| h.assa),
                    mota: mean(|h| h.mota),
                    motp: mean(|h| h.motp),
                    idf1: mean(|h| h.idf1),
                }
            });
            Ok(EvaluationReport {
                protocol,
                groups,
                overall_pooled: Some(SequenceMetrics::from(&all)),
                group_mean,
            })
        }
    }
}
