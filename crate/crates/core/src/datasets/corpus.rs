//! Labeled segment corpora: generation or ingestion per class, distortion
//! recipes, a parent-level train/test split, and an on-disk store.
//!
//! Store layout: `<root>/manifest.json` plus `<root>/<LABEL>/<id>.csv`.

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::ingest::{ingest_path, list_signal_files, read_csv_signal, write_csv_signal};
use super::synth::synth_signal;
use crate::distortion::{DistortionKind, DistortionSpec};
use crate::error::{Error, Result};
use crate::features::fuzzy::std_dev;
use crate::features::{extract_batch, FeatureConfig, FeatureRow, FeatureTable};
use crate::rng::{derive_seed, stream};
use crate::signal::{segment, ClassLabel, Segment};

// stream tags, so the per-purpose seed paths never collide
const TAG_SOURCE: u64 = 1;
const TAG_RECIPE_PICK: u64 = 2;
const TAG_RECIPE_NOISE: u64 = 3;
const TAG_SPLIT: u64 = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Source {
    #[default]
    Synth,
    /// A directory of `.csv` / `.wav` recordings, read in name order.
    Ingest { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RecipeOp {
    /// AWGN with sigma = `sigma_rel` times the segment's standard deviation.
    RelativeAwgn { sigma_rel: f64 },
    Awgn { sigma: f64 },
    HorizontalScale { alpha: f64 },
    VerticalScale { alpha: f64 },
}

/// Applies `op` to a seeded random `fraction` of the class's segments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recipe {
    pub fraction: f64,
    #[serde(flatten)]
    pub op: RecipeOp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSpec {
    pub label: ClassLabel,
    /// Number of segments.
    pub count: usize,
    #[serde(default)]
    pub source: Source,
    /// Synthetic parents cycle through these rates.
    #[serde(default = "default_rates")]
    pub sample_rates_hz: Vec<f64>,
    #[serde(default = "default_segment_s")]
    pub segment_s: f64,
    #[serde(default = "default_one")]
    pub segments_per_parent: usize,
    #[serde(default)]
    pub distortions: Vec<Recipe>,
}

fn default_rates() -> Vec<f64> {
    vec![200.0]
}

fn default_segment_s() -> f64 {
    8.0
}

fn default_one() -> usize {
    1
}

fn default_split() -> f64 {
    0.7
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub classes: Vec<ClassSpec>,
    #[serde(default = "default_split")]
    pub split_frac: f64,
    #[serde(default)]
    pub master_seed: u64,
}

impl CorpusSpec {
    /// Desk-scale version of the reference composition: 200 ECG (half at
    /// 500 Hz, half at 100 Hz, half of all ECG with AWGN at 0.05 std),
    /// 150 EEG at 200 Hz, 75 body-sway at 1 kHz and 100 audio at 1 kHz, all in
    /// 8 s segments.
    pub fn desk_default(master_seed: u64) -> CorpusSpec {
        CorpusSpec::scaled(master_seed, [200, 150, 75, 100])
    }

    /// The same composition with custom per-class counts.
    pub fn scaled(master_seed: u64, counts: [usize; 4]) -> CorpusSpec {
        let class = |label, count, rates: &[f64], distortions| ClassSpec {
            label,
            count,
            source: Source::Synth,
            sample_rates_hz: rates.to_vec(),
            segment_s: 8.0,
            segments_per_parent: 1,
            distortions,
        };
        CorpusSpec {
            classes: vec![
                class(
                    ClassLabel::Ecg,
                    counts[0],
                    &[500.0, 100.0],
                    vec![Recipe {
                        fraction: 0.5,
                        op: RecipeOp::RelativeAwgn { sigma_rel: 0.05 },
                    }],
                ),
                class(ClassLabel::Eeg, counts[1], &[200.0], vec![]),
                class(ClassLabel::BMov, counts[2], &[1000.0], vec![]),
                class(ClassLabel::NonBio, counts[3], &[1000.0], vec![]),
            ],
            split_frac: 0.7,
            master_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.split_frac > 0.0 && self.split_frac < 1.0) {
            return bad(format!("split_frac must lie in (0, 1), got {}", self.split_frac));
        }
        if self.classes.is_empty() {
            return bad("corpus spec has no classes".into());
        }
        for (i, c) in self.classes.iter().enumerate() {
            if self.classes[..i].iter().any(|o| o.label == c.label) {
                return bad(format!("label {} appears twice", c.label));
            }
            if c.count == 0 {
                return bad(format!("{}: count must be positive", c.label));
            }
            if !(c.segment_s.is_finite() && c.segment_s > 0.0) {
                return bad(format!("{}: segment_s must be positive", c.label));
            }
            if c.segments_per_parent == 0 {
                return bad(format!("{}: segments_per_parent must be positive", c.label));
            }
            if c.source == Source::Synth
                && (c.sample_rates_hz.is_empty()
                    || c.sample_rates_hz.iter().any(|r| !(r.is_finite() && *r > 0.0)))
            {
                return bad(format!("{}: sample_rates_hz must be non-empty and positive", c.label));
            }
            for r in &c.distortions {
                if !(0.0..=1.0).contains(&r.fraction) {
                    return bad(format!("{}: recipe fraction {} outside [0, 1]", c.label, r.fraction));
                }
            }
        }
        Ok(())
    }

    pub fn hash(&self) -> String {
        hex(&Sha256::digest(serde_json::to_string(self).expect("spec serializes").as_bytes()))
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusItem {
    pub id: String,
    pub label: ClassLabel,
    pub split: Split,
    /// Synthetic parent id or ingested file path.
    pub origin: String,
    pub distortions: Vec<DistortionSpec>,
    pub segment: Segment,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub spec: CorpusSpec,
    pub spec_hash: String,
    pub items: Vec<CorpusItem>,
}

struct Parent {
    origin: String,
    segments: Vec<Segment>,
}

pub fn build_corpus(spec: &CorpusSpec) -> Result<Corpus> {
    spec.validate()?;
    let mut items = Vec::new();
    for class in &spec.classes {
        items.extend(build_class(spec, class)?);
    }
    Ok(Corpus {
        spec: spec.clone(),
        spec_hash: spec.hash(),
        items,
    })
}

fn build_class(spec: &CorpusSpec, class: &ClassSpec) -> Result<Vec<CorpusItem>> {
    let ci = class.label.index() as u64;
    let parents = match &class.source {
        Source::Synth => synth_parents(spec, class)?,
        Source::Ingest { path } => ingest_parents(class, path)?,
    };

    // parent-level split
    let n_parents = parents.len();
    let mut order: Vec<usize> = (0..n_parents).collect();
    order.shuffle(&mut stream(spec.master_seed, &[TAG_SPLIT, ci]));
    let n_train = ((n_parents as f64 * spec.split_frac).round() as usize).clamp(1, n_parents);
    let mut is_train = vec![false; n_parents];
    for &p in &order[..n_train] {
        is_train[p] = true;
    }

    let mut items = Vec::with_capacity(class.count);
    'outer: for (p, parent) in parents.into_iter().enumerate() {
        for (j, seg) in parent.segments.into_iter().enumerate() {
            if items.len() == class.count {
                break 'outer;
            }
            items.push(CorpusItem {
                id: format!("{}-{p:05}-{j:03}", class.label.slug()),
                label: class.label,
                split: if is_train[p] { Split::Train } else { Split::Test },
                origin: parent.origin.clone(),
                distortions: Vec::new(),
                segment: seg,
            });
        }
    }
    if items.len() < class.count {
        return Err(Error::InsufficientSourceData(format!(
            "{}: {} segments requested, {} available",
            class.label,
            class.count,
            items.len()
        )));
    }

    for (ri, recipe) in class.distortions.iter().enumerate() {
        let mut pick: Vec<usize> = (0..items.len()).collect();
        pick.shuffle(&mut stream(spec.master_seed, &[TAG_RECIPE_PICK, ci, ri as u64]));
        let n = (items.len() as f64 * recipe.fraction).round() as usize;
        let mut chosen = pick[..n].to_vec();
        chosen.sort_unstable();
        let updates: Vec<(usize, DistortionSpec, Segment)> = chosen
            .par_iter()
            .map(|&i| {
                let seg = &items[i].segment;
                let kind = match recipe.op {
                    RecipeOp::RelativeAwgn { sigma_rel } => DistortionKind::Awgn {
                        sigma: sigma_rel * std_dev(&seg.samples),
                    },
                    RecipeOp::Awgn { sigma } => DistortionKind::Awgn { sigma },
                    RecipeOp::HorizontalScale { alpha } => DistortionKind::HorizontalScale { alpha },
                    RecipeOp::VerticalScale { alpha } => DistortionKind::VerticalScale { alpha },
                };
                let d = DistortionSpec {
                    kind,
                    seed: derive_seed(spec.master_seed, &[TAG_RECIPE_NOISE, ci, ri as u64, i as u64]),
                };
                let out = d.apply(seg, None)?;
                Ok((i, d, out))
            })
            .collect::<Result<_>>()?;
        for (i, d, seg) in updates {
            items[i].distortions.push(d);
            items[i].segment = seg;
        }
    }
    Ok(items)
}

fn synth_parents(spec: &CorpusSpec, class: &ClassSpec) -> Result<Vec<Parent>> {
    let ci = class.label.index() as u64;
    let n_parents = class.count.div_ceil(class.segments_per_parent);
    let duration = class.segment_s * class.segments_per_parent as f64;
    (0..n_parents)
        .into_par_iter()
        .map(|p| {
            let rate = class.sample_rates_hz[p % class.sample_rates_hz.len()];
            let seed = derive_seed(spec.master_seed, &[TAG_SOURCE, ci, p as u64]);
            let mut signal = synth_signal(class.label, duration, rate, seed)?;
            signal.source_id = format!("{}-{p:05}", class.label.slug());
            Ok(Parent {
                origin: signal.source_id.clone(),
                segments: segment(&signal, class.segment_s)?,
            })
        })
        .collect()
}

fn ingest_parents(class: &ClassSpec, dir: &Path) -> Result<Vec<Parent>> {
    let mut parents = Vec::new();
    let mut total = 0;
    for file in list_signal_files(dir)? {
        if total >= class.count {
            break;
        }
        let signal = ingest_path(&file)?;
        let segments = match segment(&signal, class.segment_s) {
            Ok(s) => s,
            Err(Error::SignalTooShort { .. }) => continue,
            Err(e) => return Err(e),
        };
        total += segments.len();
        parents.push(Parent {
            origin: file.display().to_string(),
            segments,
        });
    }
    if total < class.count {
        return Err(Error::InsufficientSourceData(format!(
            "{}: {} segments requested, {} found under {}",
            class.label,
            class.count,
            total,
            dir.display()
        )));
    }
    Ok(parents)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ManifestItem {
    id: String,
    label: ClassLabel,
    split: Split,
    origin: String,
    offset_s: f64,
    sample_rate_hz: f64,
    n_samples: usize,
    distortions: Vec<DistortionSpec>,
    file: String,
    sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Manifest {
    format: String,
    format_version: u32,
    spec_hash: String,
    spec: CorpusSpec,
    items: Vec<ManifestItem>,
}

const CORPUS_FORMAT: &str = "biogate-corpus";
const CORPUS_FORMAT_VERSION: u32 = 1;

fn segment_csv(seg: &Segment) -> Vec<u8> {
    let mut buf = Vec::new();
    write_csv_signal(&mut buf, &seg.samples, seg.sample_rate_hz).expect("writing to memory");
    buf
}

impl Corpus {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &CorpusItem> {
        self.items.iter().filter(move |i| i.split == split)
    }

    fn manifest(&self) -> (Manifest, Vec<Vec<u8>>) {
        let files: Vec<Vec<u8>> = self.items.iter().map(|i| segment_csv(&i.segment)).collect();
        let items = self
            .items
            .iter()
            .zip(&files)
            .map(|(i, bytes)| ManifestItem {
                id: i.id.clone(),
                label: i.label,
                split: i.split,
                origin: i.origin.clone(),
                offset_s: i.segment.offset_s,
                sample_rate_hz: i.segment.sample_rate_hz,
                n_samples: i.segment.len(),
                distortions: i.distortions.clone(),
                file: format!("{}/{}.csv", i.label.as_str(), i.id),
                sha256: hex(&Sha256::digest(bytes)),
            })
            .collect();
        (
            Manifest {
                format: CORPUS_FORMAT.into(),
                format_version: CORPUS_FORMAT_VERSION,
                spec_hash: self.spec_hash.clone(),
                spec: self.spec.clone(),
                items,
            },
            files,
        )
    }

    /// Digest of the manifest, which itself records a digest of every
    /// segment file.
    pub fn content_hash(&self) -> String {
        let (m, _) = self.manifest();
        hex(&Sha256::digest(serde_json::to_vec(&m).expect("manifest serializes")))
    }

    pub fn save(&self, root: &Path) -> Result<()> {
        let (manifest, files) = self.manifest();
        for label in ClassLabel::ALL {
            if self.items.iter().any(|i| i.label == label) {
                std::fs::create_dir_all(root.join(label.as_str()))?;
            }
        }
        for (item, bytes) in manifest.items.iter().zip(&files) {
            std::fs::write(root.join(&item.file), bytes)?;
        }
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        std::fs::write(root.join("manifest.json"), text + "\n")?;
        Ok(())
    }

    pub fn load(root: &Path) -> Result<Corpus> {
        let mpath = root.join("manifest.json");
        let text = std::fs::read_to_string(&mpath)?;
        let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: mpath.clone(),
            line: e.line(),
            msg: e.to_string(),
        })?;
        if manifest.format != CORPUS_FORMAT || manifest.format_version != CORPUS_FORMAT_VERSION {
            return Err(Error::VersionMismatch {
                found: manifest.format_version,
                expected: CORPUS_FORMAT_VERSION,
            });
        }
        let items = manifest
            .items
            .par_iter()
            .map(|m| {
                let path = root.join(&m.file);
                let bytes = std::fs::read(&path)?;
                let signal = read_csv_signal(&bytes[..], &path)?;
                if signal.len() != m.n_samples || signal.sample_rate_hz != m.sample_rate_hz {
                    return Err(Error::Parse {
                        path,
                        line: 1,
                        msg: "segment does not match its manifest entry".into(),
                    });
                }
                Ok(CorpusItem {
                    id: m.id.clone(),
                    label: m.label,
                    split: m.split,
                    origin: m.origin.clone(),
                    distortions: m.distortions.clone(),
                    segment: Segment::new(signal.samples, signal.sample_rate_hz, &m.origin, m.offset_s),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Corpus {
            spec: manifest.spec,
            spec_hash: manifest.spec_hash,
            items,
        })
    }

    /// Features for every item of `split` (all items when `None`), in corpus
    /// order.
    pub fn feature_table(&self, split: Option<Split>, config: &FeatureConfig) -> Result<FeatureTable> {
        let items: Vec<&CorpusItem> = self
            .items
            .iter()
            .filter(|i| split.is_none_or(|s| i.split == s))
            .collect();
        let segments: Vec<Segment> = items.iter().map(|i| i.segment.clone()).collect();
        let rows = extract_batch(&segments, config)
            .into_iter()
            .zip(&items)
            .map(|(fv, item)| {
                Ok(FeatureRow {
                    source_id: item.id.clone(),
                    label: Some(item.label),
                    features: fv?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(FeatureTable { rows })
    }
}
