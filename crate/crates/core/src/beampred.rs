//! Position-to-beam prediction: dataset construction from recorded
//! sessions and a nearest-neighbor baseline scored by top-k accuracy.
//!
//! Samples join the `/gnss` and `/channel/kpi` streams of a bag within a
//! timestamp slop; each pair becomes (position, optional pixel feature,
//! best-beam label). The pixel feature projects the reported position
//! through a fixed observer camera, standing in for an image-domain
//! detector. Prediction ranks beams by votes among the k nearest training
//! positions.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use crate::bus::bag::BagFile;
use crate::bus::sync::ApproxSync;
use crate::ckm::Ckm;
use crate::linksys::LinkKpi;
use crate::mobility::CameraIntrinsics;
use crate::msgs::{topics, GnssMsg};
use crate::prng::SplitMix64;
use crate::timebase::SimTime;
use crate::wire::WireError;
use crate::{Pose, Vec3};

#[derive(Debug, Error, PartialEq)]
pub enum BeamPredError {
    #[error("bag has no `{0}` topic")]
    MissingTopic(&'static str),
    #[error("payload on `{topic}` does not decode: {source}")]
    BadPayload {
        topic: &'static str,
        source: WireError,
    },
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("test set is empty")]
    EmptyTestSet,
    #[error("k must be at least 1")]
    BadK,
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

/// One labeled observation.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    /// Label (KPI) timestamp.
    pub stamp: SimTime,
    /// Position-fix timestamp; equals `stamp` for synthetic datasets.
    pub gnss_stamp: SimTime,
    /// Reported receiver position (m).
    pub position: Vec3,
    /// Optional pixel feature from the observer-camera projection.
    pub pixel: Option<(f64, f64)>,
    /// Best beam index at this position.
    pub label: u16,
}

/// A fixed camera observing the scene, for the pixel feature.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraView {
    pub intrinsics: CameraIntrinsics,
    /// Camera frame in world coordinates (+x boresight).
    pub pose: Pose,
}

impl CameraView {
    /// Pixel of a world point; None behind the camera or off-image.
    pub fn project(&self, world: Vec3) -> Option<(f64, f64)> {
        self.intrinsics.project(self.pose.inverse().apply(world))
    }
}

/// Joins `/gnss` and `/channel/kpi` within `slop_ns` and emits one sample
/// per matched pair, in stream order. With a camera, each sample also
/// carries the projected pixel of its reported position (None when
/// off-screen, which keeps such samples usable as position-only).
pub fn build_dataset(
    bag: &BagFile,
    slop_ns: u64,
    camera: Option<&CameraView>,
) -> Result<Vec<Sample>, BeamPredError> {
    for topic in [topics::GNSS, topics::KPI] {
        if bag.topic_id(topic).is_none() {
            return Err(BeamPredError::MissingTopic(match topic {
                topics::GNSS => topics::GNSS,
                _ => topics::KPI,
            }));
        }
    }
    let mut sync = ApproxSync::new(&[topics::GNSS, topics::KPI], slop_ns);
    let mut samples = Vec::new();
    for record in &bag.records {
        let name = &bag.topic(record.topic_id).expect("topic ids are closed").name;
        if name != topics::GNSS && name != topics::KPI {
            continue;
        }
        for tuple in sync.push(bag.envelope(record)) {
            let gnss = GnssMsg::decode(&tuple[0].payload).map_err(|source| {
                BeamPredError::BadPayload {
                    topic: topics::GNSS,
                    source,
                }
            })?;
            let kpi = LinkKpi::decode(tuple[1].header.stamp, &tuple[1].payload).map_err(
                |source| BeamPredError::BadPayload {
                    topic: topics::KPI,
                    source,
                },
            )?;
            samples.push(Sample {
                stamp: tuple[1].header.stamp,
                gnss_stamp: tuple[0].header.stamp,
                position: gnss.position,
                pixel: camera.and_then(|c| c.project(gnss.position)),
                label: kpi.best_beam,
            });
        }
    }
    Ok(samples)
}

/// Dense synthetic dataset from a generated map: one sample per cell with
/// a finite best beam, positioned at the cell center.
pub fn dataset_from_ckm(ckm: &Ckm, camera: Option<&CameraView>) -> Vec<Sample> {
    let Some(beams) = ckm.layer("best_beam") else {
        return Vec::new();
    };
    let mut samples = Vec::new();
    for j in 0..ckm.grid.n_y {
        for i in 0..ckm.grid.n_x {
            let beam = beams.at(i, j);
            if !beam.is_finite() {
                continue;
            }
            let position = ckm.grid.cell_center(i, j);
            samples.push(Sample {
                stamp: SimTime::ZERO,
                gnss_stamp: SimTime::ZERO,
                position,
                pixel: camera.and_then(|c| c.project(position)),
                label: beam as u16,
            });
        }
    }
    samples
}

/// Beams ranked by vote count among the k nearest training positions
/// (Euclidean); ties broken by smaller mean neighbor distance, then lower
/// beam index. Neighbor ties at equal distance resolve by training order.
pub fn knn_predict(train: &[Sample], query: Vec3, k: usize) -> Result<Vec<u16>, BeamPredError> {
    if train.is_empty() {
        return Err(BeamPredError::EmptyTrainingSet);
    }
    if k == 0 {
        return Err(BeamPredError::BadK);
    }
    let mut order: Vec<(f64, usize)> = train
        .iter()
        .enumerate()
        .map(|(i, s)| ((s.position - query).norm(), i))
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    order.truncate(k);

    // label -> (votes, total distance)
    let mut tally: Vec<(u16, usize, f64)> = Vec::new();
    for &(d, i) in &order {
        let label = train[i].label;
        match tally.iter_mut().find(|t| t.0 == label) {
            Some(t) => {
                t.1 += 1;
                t.2 += d;
            }
            None => tally.push((label, 1, d)),
        }
    }
    tally.sort_by(|a, b| {
        b.1.cmp(&a.1)
            .then((a.2 / a.1 as f64).total_cmp(&(b.2 / b.1 as f64)))
            .then(a.0.cmp(&b.0))
    });
    Ok(tally.into_iter().map(|t| t.0).collect())
}

/// Top-k accuracy over a test set.
#[derive(Debug, Clone, PartialEq)]
pub struct TopKReport {
    pub samples: usize,
    /// (k, fraction of samples whose label appears in the top k).
    pub accuracy: Vec<(usize, f64)>,
}

impl TopKReport {
    pub fn at(&self, k: usize) -> Option<f64> {
        self.accuracy.iter().find(|(kk, _)| *kk == k).map(|(_, a)| *a)
    }
}

pub const DEFAULT_KS: [usize; 3] = [1, 3, 5];

/// Scores the k-NN predictor: acc(k) = fraction of test samples whose
/// label appears among the top-k ranked beams. Queries evaluate in
/// parallel; the report is deterministic.
pub fn evaluate_topk(
    train: &[Sample],
    test: &[Sample],
    neighbors: usize,
    ks: &[usize],
) -> Result<TopKReport, BeamPredError> {
    if train.is_empty() {
        return Err(BeamPredError::EmptyTrainingSet);
    }
    if test.is_empty() {
        return Err(BeamPredError::EmptyTestSet);
    }
    if neighbors == 0 {
        return Err(BeamPredError::BadK);
    }
    let hit_depth: Vec<Option<usize>> = test
        .par_iter()
        .map(|s| {
            let ranked = knn_predict(train, s.position, neighbors)
                .expect("train set verified non-empty");
            ranked.iter().position(|&b| b == s.label)
        })
        .collect();
    let accuracy = ks
        .iter()
        .map(|&k| {
            let hits = hit_depth.iter().filter(|d| d.is_some_and(|r| r < k)).count();
            (k, hits as f64 / test.len() as f64)
        })
        .collect();
    Ok(TopKReport {
        samples: test.len(),
        accuracy,
    })
}

/// Deterministic shuffled split: first ⌊n·train_fraction⌋ samples of the
/// seeded permutation train, the rest test.
pub fn split_dataset(
    samples: &[Sample],
    train_fraction: f64,
    seed: u64,
) -> (Vec<Sample>, Vec<Sample>) {
    debug_assert!((0.0..=1.0).contains(&train_fraction));
    let mut indices: Vec<usize> = (0..samples.len()).collect();
    let mut rng = SplitMix64::substream(seed, "beampred-split");
    for i in (1..indices.len()).rev() {
        let j = (rng.next_u64() % (i as u64 + 1)) as usize;
        indices.swap(i, j);
    }
    let cut = (samples.len() as f64 * train_fraction).floor() as usize;
    let train = indices[..cut].iter().map(|&i| samples[i].clone()).collect();
    let test = indices[cut..].iter().map(|&i| samples[i].clone()).collect();
    (train, test)
}

fn format_stamp(t: SimTime) -> String {
    format!("{}.{:09}", t.nanos() / 1_000_000_000, t.nanos() % 1_000_000_000)
}

/// Writes one text record per sample: `t x y z [u v] beam`.
pub fn write_dataset(samples: &[Sample], path: &Path) -> Result<(), BeamPredError> {
    let mut out = String::new();
    for s in samples {
        let line = match s.pixel {
            Some((u, v)) => format!(
                "{} {} {} {} {} {} {}\n",
                format_stamp(s.stamp),
                s.position.x,
                s.position.y,
                s.position.z,
                u,
                v,
                s.label
            ),
            None => format!(
                "{} {} {} {} {}\n",
                format_stamp(s.stamp),
                s.position.x,
                s.position.y,
                s.position.z,
                s.label
            ),
        };
        out.push_str(&line);
    }
    fs::write(path, out).map_err(|e| BeamPredError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Reads a dataset written by [`write_dataset`]. `#` starts a comment.
pub fn read_dataset(path: &Path) -> Result<Vec<Sample>, BeamPredError> {
    let text = fs::read_to_string(path).map_err(|e| BeamPredError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let err = |line: usize, message: String| BeamPredError::Parse {
        path: path.display().to_string(),
        line,
        message,
    };
    let mut samples = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 5 && fields.len() != 7 {
            return Err(err(
                line_no,
                format!("want 5 or 7 fields (t x y z [u v] beam), got {}", fields.len()),
            ));
        }
        let num = |s: &str| -> Result<f64, BeamPredError> {
            s.parse::<f64>()
                .map_err(|_| err(line_no, format!("{s:?} is not a number")))
        };
        let t = num(fields[0])?;
        if !(t >= 0.0) {
            return Err(err(line_no, "timestamp must be non-negative".to_string()));
        }
        let stamp = SimTime::from_secs_f64(t);
        let position = Vec3::new(num(fields[1])?, num(fields[2])?, num(fields[3])?);
        let pixel = if fields.len() == 7 {
            Some((num(fields[4])?, num(fields[5])?))
        } else {
            None
        };
        let label = fields[fields.len() - 1]
            .parse::<u16>()
            .map_err(|_| err(line_no, format!("{:?} is not a beam index", fields.last())))?;
        samples.push(Sample {
            stamp,
            gnss_stamp: stamp,
            position,
            pixel,
            label,
        });
    }
    Ok(samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bus::bag::{BagRecord, BagTopic};
    use crate::msgs::schemas;
    use crate::Quat;

    fn test_bag(pairs: &[(u64, u64, Vec3, u16)]) -> BagFile {
        // (gnss_ns, kpi_ns, position, beam) per pair; records interleaved
        // in stamp order like a real recording.
        let topics_list = vec![
            BagTopic {
                id: 0,
                name: topics::GNSS.to_string(),
                schema: schemas::GNSS.to_string(),
            },
            BagTopic {
                id: 1,
                name: topics::KPI.to_string(),
                schema: schemas::KPI.to_string(),
            },
        ];
        let mut records = Vec::new();
        for (seq, &(gnss_ns, kpi_ns, position, beam)) in pairs.iter().enumerate() {
            records.push(BagRecord {
                stamp: SimTime::from_nanos(gnss_ns),
                topic_id: 0,
                seq: seq as u32,
                frame_id: "world".to_string(),
                payload: GnssMsg { position }.encode(),
            });
            let kpi = LinkKpi {
                stamp: SimTime::from_nanos(kpi_ns),
                tx_id: 0,
                rx_id: 1,
                best_beam: beam,
                sinr_eff_db: 10.0,
                bler: 0.01,
                rate_bpshz: 3.0,
                per_beam_sinr_db: vec![],
            };
            records.push(BagRecord {
                stamp: kpi.stamp,
                topic_id: 1,
                seq: seq as u32,
                frame_id: "tx".to_string(),
                payload: kpi.encode(),
            });
        }
        records.sort_by_key(|r| (r.stamp, r.topic_id));
        BagFile {
            topics: topics_list,
            records,
        }
    }

    fn grid_samples(n: usize, labeler: impl Fn(usize, usize) -> u16) -> Vec<Sample> {
        let mut out = Vec::new();
        for j in 0..n {
            for i in 0..n {
                out.push(Sample {
                    stamp: SimTime::ZERO,
                    gnss_stamp: SimTime::ZERO,
                    position: Vec3::new(i as f64, j as f64, 0.0),
                    pixel: None,
                    label: labeler(i, j),
                });
            }
        }
        out
    }

    #[test]
    fn aligned_bag_yields_one_sample_per_pair() {
        let pairs: Vec<(u64, u64, Vec3, u16)> = (0..10)
            .map(|i| {
                (
                    i * 100_000_000,
                    i * 100_000_000,
                    Vec3::new(i as f64, 0.0, 1.5),
                    (i % 4) as u16,
                )
            })
            .collect();
        let bag = test_bag(&pairs);
        let samples = build_dataset(&bag, 0, None).unwrap();
        assert_eq!(samples.len(), 10);
        for (s, p) in samples.iter().zip(&pairs) {
            assert_eq!(s.position, p.2);
            assert_eq!(s.label, p.3);
            assert_eq!(s.stamp, s.gnss_stamp);
            assert_eq!(s.pixel, None);
        }
    }

    #[test]
    fn offset_stamps_with_zero_slop_match_nothing() {
        let pairs: Vec<(u64, u64, Vec3, u16)> = (0..5)
            .map(|i| (i * 1_000_000, i * 1_000_000 + 500, Vec3::zero(), 0))
            .collect();
        let bag = test_bag(&pairs);
        assert!(build_dataset(&bag, 0, None).unwrap().is_empty());
        // The same bag joins fine once the slop covers the offset, and
        // every emitted pair respects it.
        let samples = build_dataset(&bag, 500, None).unwrap();
        assert_eq!(samples.len(), 5);
        for s in &samples {
            assert!(s.stamp.abs_diff(s.gnss_stamp) <= 500);
        }
    }

    #[test]
    fn missing_topic_is_reported() {
        let bag = BagFile {
            topics: vec![BagTopic {
                id: 0,
                name: topics::GNSS.to_string(),
                schema: schemas::GNSS.to_string(),
            }],
            records: vec![],
        };
        assert_eq!(
            build_dataset(&bag, 0, None).unwrap_err(),
            BeamPredError::MissingTopic(topics::KPI)
        );
    }

    #[test]
    fn pixel_feature_matches_direct_projection() {
        let camera = CameraView {
            intrinsics: CameraIntrinsics::with_fov(64, 48, 90.0, 1000.0),
            pose: Pose::new(Vec3::new(0.0, 0.0, 10.0), Quat::identity()),
        };
        let position = Vec3::new(20.0, 3.0, 1.5);
        let bag = test_bag(&[(0, 0, position, 2)]);
        let samples = build_dataset(&bag, 0, Some(&camera)).unwrap();
        assert_eq!(samples.len(), 1);
        let expect = camera.project(position).unwrap();
        assert_eq!(samples[0].pixel, Some(expect));
        // A position behind the camera keeps the sample, featureless.
        let behind = test_bag(&[(0, 0, Vec3::new(-5.0, 0.0, 1.5), 2)]);
        let s2 = build_dataset(&behind, 0, Some(&camera)).unwrap();
        assert_eq!(s2[0].pixel, None);
    }

    #[test]
    fn knn_memorizes_training_points() {
        let train = grid_samples(4, |i, j| (i + 4 * j) as u16);
        for s in &train {
            let ranked = knn_predict(&train, s.position, 1).unwrap();
            assert_eq!(ranked[0], s.label);
        }
    }

    #[test]
    fn unanimous_training_set_always_wins() {
        let train = grid_samples(3, |_, _| 7);
        let mut rng = SplitMix64::substream(5, "beampred-unanimous");
        for _ in 0..20 {
            let q = Vec3::new(rng.uniform(-5.0, 5.0), rng.uniform(-5.0, 5.0), 0.0);
            let ranked = knn_predict(&train, q, 5).unwrap();
            assert_eq!(ranked, vec![7]);
        }
    }

    #[test]
    fn ranking_matches_brute_force_oracle() {
        let mut rng = SplitMix64::substream(6, "beampred-oracle");
        for _ in 0..50 {
            let train: Vec<Sample> = (0..30)
                .map(|_| Sample {
                    stamp: SimTime::ZERO,
                    gnss_stamp: SimTime::ZERO,
                    position: Vec3::new(
                        rng.uniform(-10.0, 10.0),
                        rng.uniform(-10.0, 10.0),
                        0.0,
                    ),
                    pixel: None,
                    label: (rng.next_u64() % 6) as u16,
                })
                .collect();
            let query = Vec3::new(rng.uniform(-10.0, 10.0), rng.uniform(-10.0, 10.0), 0.0);
            let k = 1 + (rng.next_u64() % 10) as usize;
            let got = knn_predict(&train, query, k).unwrap();

            // Oracle: sort every (distance, index) pair, take k, tally by
            // label, rank by (votes desc, mean distance asc, label asc).
            let mut pairs: Vec<(f64, usize)> = train
                .iter()
                .enumerate()
                .map(|(i, s)| ((s.position - query).norm(), i))
                .collect();
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let mut by_label: std::collections::BTreeMap<u16, Vec<f64>> = Default::default();
            for &(d, i) in pairs.iter().take(k) {
                by_label.entry(train[i].label).or_default().push(d);
            }
            let mut expect: Vec<(u16, usize, f64)> = by_label
                .into_iter()
                .map(|(l, ds)| (l, ds.len(), ds.iter().sum::<f64>() / ds.len() as f64))
                .collect();
            expect.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.total_cmp(&b.2)).then(a.0.cmp(&b.0)));
            let expect: Vec<u16> = expect.into_iter().map(|e| e.0).collect();
            assert_eq!(got, expect);
        }
    }

    #[test]
    fn empty_train_and_bad_k_are_rejected() {
        assert_eq!(
            knn_predict(&[], Vec3::zero(), 3).unwrap_err(),
            BeamPredError::EmptyTrainingSet
        );
        let train = grid_samples(2, |_, _| 0);
        assert_eq!(
            knn_predict(&train, Vec3::zero(), 0).unwrap_err(),
            BeamPredError::BadK
        );
        assert_eq!(
            evaluate_topk(&train, &[], 5, &DEFAULT_KS).unwrap_err(),
            BeamPredError::EmptyTestSet
        );
    }

    #[test]
    fn train_equals_test_is_perfect_and_monotone() {
        let data = grid_samples(8, |i, j| ((i / 2) + 4 * (j / 2)) as u16);
        let report = evaluate_topk(&data, &data, 1, &DEFAULT_KS).unwrap();
        assert_eq!(report.at(1), Some(1.0));
        let report5 = evaluate_topk(&data, &data, 5, &[1, 2, 3, 4, 5]).unwrap();
        let accs: Vec<f64> = report5.accuracy.iter().map(|(_, a)| *a).collect();
        for w in accs.windows(2) {
            assert!(w[0] <= w[1], "top-k accuracy must be monotone: {accs:?}");
        }
        assert!(accs.iter().all(|a| (0.0..=1.0).contains(a)));
    }

    #[test]
    fn split_is_seeded_and_complete() {
        let data = grid_samples(10, |i, j| (i + 10 * j) as u16);
        let (train_a, test_a) = split_dataset(&data, 0.8, 42);
        let (train_b, test_b) = split_dataset(&data, 0.8, 42);
        assert_eq!(train_a, train_b);
        assert_eq!(test_a, test_b);
        assert_eq!(train_a.len(), 80);
        assert_eq!(test_a.len(), 20);
        // Different seed, different shuffle; union still covers everything.
        let (train_c, _) = split_dataset(&data, 0.8, 43);
        assert_ne!(train_a, train_c);
        let mut labels: Vec<u16> = train_a
            .iter()
            .chain(&test_a)
            .map(|s| s.label)
            .collect();
        labels.sort_unstable();
        assert_eq!(labels, (0..100).collect::<Vec<u16>>());
    }

    #[test]
    fn split_report_reproduces_bit_exactly() {
        let data = grid_samples(12, |i, j| ((i / 3) + 4 * (j / 3)) as u16);
        let run = || {
            let (train, test) = split_dataset(&data, 0.8, 7);
            evaluate_topk(&train, &test, 5, &DEFAULT_KS).unwrap()
        };
        let a = run();
        let b = run();
        assert_eq!(a, b);
        for (_, acc) in &a.accuracy {
            assert_eq!(acc.to_bits(), b.at(a.accuracy[0].0).map(|_| *acc).unwrap().to_bits());
        }
    }

    #[test]
    fn dataset_text_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let samples = vec![
            Sample {
                stamp: SimTime::from_millis(1500),
                gnss_stamp: SimTime::from_millis(1500),
                position: Vec3::new(1.25, -3.5, 1.5),
                pixel: Some((12.5, 7.25)),
                label: 9,
            },
            Sample {
                stamp: SimTime::from_nanos(2_000_000_001),
                gnss_stamp: SimTime::from_nanos(2_000_000_001),
                position: Vec3::new(-0.001, 64.0, 2.0),
                pixel: None,
                label: 0,
            },
        ];
        let path = dir.path().join("dataset.txt");
        write_dataset(&samples, &path).unwrap();
        let back = read_dataset(&path).unwrap();
        assert_eq!(back, samples);
        assert_eq!(
            fs::read_to_string(&path).unwrap().lines().next().unwrap(),
            "1.500000000 1.25 -3.5 1.5 12.5 7.25 9"
        );
        // Malformed field counts are line-addressed.
        fs::write(&path, "0.0 1.0 2.0\n").unwrap();
        match read_dataset(&path).unwrap_err() {
            BeamPredError::Parse { line, .. } => assert_eq!(line, 1),
            other => panic!("unexpected error {other:?}"),
        }
    }
}
