//! Clip records, corpus files, annotator-vote consensus and the seeded
//! synthetic corpus generator.
//!
//! A corpus file is line-delimited JSON. The first line is a header carrying
//! the feature dimensions, `{"dims": [D_v, D_w, D_s]}`; every following line
//! is one [`ClipRecord`] with an optional `"split"` field. Floats are written
//! with shortest round-trip formatting and parsed exactly.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::rng;

/// Feature dimensions shared by every record of a corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "[usize; 3]", into = "[usize; 3]")]
pub struct Dims {
    pub video: usize,
    pub word: usize,
    pub sentence: usize,
}

impl Dims {
    pub fn new(video: usize, word: usize, sentence: usize) -> Self {
        Self {
            video,
            word,
            sentence,
        }
    }
}

impl From<[usize; 3]> for Dims {
    fn from(d: [usize; 3]) -> Self {
        Self::new(d[0], d[1], d[2])
    }
}

impl From<Dims> for [usize; 3] {
    fn from(d: Dims) -> Self {
        [d.video, d.word, d.sentence]
    }
}

/// Where a clip's audio comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AudioSource {
    /// Waveform file (see [`crate::audio::read_waveform`]).
    Waveform { path: String, sample_rate: u32 },
    /// Already pooled spectrogram statistics.
    Pooled { pooled: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipRecord {
    pub clip_id: String,
    pub video_id: String,
    pub start_s: f64,
    pub end_s: f64,
    pub video_feat: Vec<f64>,
    /// Wide-window variant of `video_feat`, used by the overlapping-clip baseline.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub video_feat_wide: Option<Vec<f64>>,
    pub narration_text: String,
    #[serde(default)]
    pub token_embs: Vec<Vec<f64>>,
    pub sent_emb: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub keystep_text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub keystep_emb: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task_label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub narration_objects: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub visible_objects: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audio: Option<AudioSource>,
}

impl ClipRecord {
    pub fn has_keystep(&self) -> bool {
        self.keystep_text.is_some()
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.start_s + self.end_s)
    }

    fn validate(&self, dims: Dims) -> Result<()> {
        let invalid = |message: &str| Error::InvalidRecord {
            clip_id: self.clip_id.clone(),
            message: message.to_string(),
        };
        let check = |field: &'static str, expected: usize, v: &[f64]| {
            if v.len() != expected {
                return Err(Error::DimensionMismatch {
                    clip_id: self.clip_id.clone(),
                    field,
                    expected,
                    found: v.len(),
                });
            }
            if !linalg::all_finite(v) {
                return Err(Error::NonFinite(format!(
                    "clip {}: {field}",
                    self.clip_id
                )));
            }
            Ok(())
        };

        if self.clip_id.is_empty() {
            return Err(invalid("empty clip_id"));
        }
        if (self.end_s - self.start_s).is_nan() || self.end_s - self.start_s <= 0.0 {
            return Err(invalid("end_s must exceed start_s"));
        }
        check("video_feat", dims.video, &self.video_feat)?;
        if let Some(wide) = &self.video_feat_wide {
            check("video_feat_wide", dims.video, wide)?;
        }
        for tok in &self.token_embs {
            check("token_embs", dims.word, tok)?;
        }
        check("sent_emb", dims.sentence, &self.sent_emb)?;
        match (&self.keystep_text, &self.keystep_emb) {
            (Some(_), Some(e)) => check("keystep_emb", dims.sentence, e)?,
            (None, None) => {}
            _ => {
                return Err(invalid(
                    "keystep_text and keystep_emb must be present together",
                ))
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

/// Which record schema a corpus file is expected to follow.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schema {
    /// Keystep and task annotations may be present.
    Labeled,
    /// Raw clips only; annotations are rejected.
    Unlabeled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    dims: Dims,
    clips: Vec<ClipRecord>,
    split: Option<BTreeMap<String, Split>>,
    index: HashMap<String, usize>,
}

impl Corpus {
    pub fn new(
        dims: Dims,
        clips: Vec<ClipRecord>,
        split: Option<BTreeMap<String, Split>>,
    ) -> Result<Self> {
        let mut index = HashMap::with_capacity(clips.len());
        for (i, clip) in clips.iter().enumerate() {
            clip.validate(dims)?;
            if index.insert(clip.clip_id.clone(), i).is_some() {
                return Err(Error::DuplicateClip(clip.clip_id.clone()));
            }
        }
        if let Some(split) = &split {
            if let Some(id) = split.keys().find(|id| !index.contains_key(*id)) {
                return Err(Error::UnknownClip(id.clone()));
            }
        }
        Ok(Self {
            dims,
            clips,
            split,
            index,
        })
    }

    pub fn empty(dims: Dims) -> Self {
        Self {
            dims,
            clips: Vec::new(),
            split: None,
            index: HashMap::new(),
        }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn clips(&self) -> &[ClipRecord] {
        &self.clips
    }

    pub fn len(&self) -> usize {
        self.clips.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clips.is_empty()
    }

    pub fn get(&self, clip_id: &str) -> Option<&ClipRecord> {
        self.index.get(clip_id).map(|&i| &self.clips[i])
    }

    pub fn require(&self, clip_id: &str) -> Result<&ClipRecord> {
        self.get(clip_id)
            .ok_or_else(|| Error::UnknownClip(clip_id.to_string()))
    }

    pub fn contains(&self, clip_id: &str) -> bool {
        self.index.contains_key(clip_id)
    }

    pub fn split(&self) -> Option<&BTreeMap<String, Split>> {
        self.split.as_ref()
    }

    pub fn split_of(&self, clip_id: &str) -> Option<Split> {
        self.split.as_ref()?.get(clip_id).copied()
    }

    /// Replaces the split map.
    pub fn with_split(self, split: BTreeMap<String, Split>) -> Result<Self> {
        Corpus::new(self.dims, self.clips, Some(split))
    }

    /// Clips assigned to `split`, in corpus order.
    pub fn split_subset(&self, split: Split) -> Corpus {
        let ids: Vec<&str> = self
            .clips
            .iter()
            .filter(|c| self.split_of(&c.clip_id) == Some(split))
            .map(|c| c.clip_id.as_str())
            .collect();
        self.subset(&ids).expect("ids come from this corpus")
    }

    /// Clips with the given ids, in the order given. Split tags are kept.
    pub fn subset(&self, ids: &[&str]) -> Result<Corpus> {
        let clips = ids
            .iter()
            .map(|id| self.require(id).cloned())
            .collect::<Result<Vec<_>>>()?;
        let split = self.split.as_ref().map(|s| {
            ids.iter()
                .filter_map(|id| s.get(*id).map(|v| (id.to_string(), *v)))
                .collect()
        });
        Corpus::new(self.dims, clips, split)
    }

    /// Drops keystep and task annotations, giving an unlabeled-schema corpus.
    pub fn to_unlabeled(&self) -> Corpus {
        let clips = self
            .clips
            .iter()
            .cloned()
            .map(|mut c| {
                c.keystep_text = None;
                c.keystep_emb = None;
                c.task_label = None;
                c
            })
            .collect();
        Corpus::new(self.dims, clips, self.split.clone()).expect("stripping keeps invariants")
    }

    /// Concatenates corpora that share dimensions.
    pub fn merge(parts: &[&Corpus]) -> Result<Corpus> {
        let dims = parts
            .first()
            .map(|c| c.dims)
            .ok_or_else(|| Error::Precondition("nothing to merge".into()))?;
        let mut clips = Vec::new();
        let mut split = BTreeMap::new();
        let mut any_split = false;
        for part in parts {
            if part.dims != dims {
                return Err(Error::Shape(format!(
                    "cannot merge corpora with dims {:?} and {:?}",
                    dims, part.dims
                )));
            }
            clips.extend(part.clips.iter().cloned());
            if let Some(s) = &part.split {
                any_split = true;
                split.extend(s.iter().map(|(k, v)| (k.clone(), *v)));
            }
        }
        Corpus::new(dims, clips, any_split.then_some(split))
    }

    fn check_schema(&self, schema: Schema) -> Result<()> {
        if schema == Schema::Unlabeled {
            if let Some(c) = self
                .clips
                .iter()
                .find(|c| c.keystep_text.is_some() || c.task_label.is_some())
            {
                return Err(Error::InvalidRecord {
                    clip_id: c.clip_id.clone(),
                    message: "annotations are not allowed in an unlabeled corpus".into(),
                });
            }
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct Header {
    dims: Dims,
}

#[derive(Serialize)]
struct LineOut<'a> {
    #[serde(flatten)]
    record: &'a ClipRecord,
    #[serde(skip_serializing_if = "Option::is_none")]
    split: Option<Split>,
}

#[derive(Deserialize)]
struct LineIn {
    #[serde(flatten)]
    record: ClipRecord,
    #[serde(default)]
    split: Option<Split>,
}

pub fn write_corpus_to<W: Write>(corpus: &Corpus, mut out: W) -> Result<()> {
    let io = |e| Error::io("<corpus writer>", e);
    serde_json::to_writer(&mut out, &Header { dims: corpus.dims })?;
    out.write_all(b"\n").map_err(io)?;
    for clip in &corpus.clips {
        let line = LineOut {
            record: clip,
            split: corpus.split_of(&clip.clip_id),
        };
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n").map_err(io)?;
    }
    out.flush().map_err(io)
}

pub fn write_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_corpus_to(corpus, BufWriter::new(file))
}

/// Parses a corpus from any reader; `origin` only labels error messages.
pub fn read_corpus_from<R: Read>(reader: R, schema: Schema, origin: &Path) -> Result<Corpus> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        message,
    };
    let mut lines = BufReader::new(reader).lines().enumerate();
    let header: Header = loop {
        match lines.next() {
            None => {
                return Err(Error::MissingHeader {
                    path: origin.to_path_buf(),
                })
            }
            Some((i, line)) => {
                let line = line.map_err(|e| Error::io(origin, e))?;
                if line.trim().is_empty() {
                    continue;
                }
                break serde_json::from_str(&line)
                    .map_err(|e| parse_err(i + 1, format!("bad header: {e}")))?;
            }
        }
    };

    let mut clips = Vec::new();
    let mut split = BTreeMap::new();
    for (i, line) in lines {
        let line = line.map_err(|e| Error::io(origin, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: LineIn =
            serde_json::from_str(&line).map_err(|e| parse_err(i + 1, e.to_string()))?;
        if let Some(s) = parsed.split {
            split.insert(parsed.record.clip_id.clone(), s);
        }
        clips.push(parsed.record);
    }
    let split = (!split.is_empty()).then_some(split);
    let corpus = Corpus::new(header.dims, clips, split)?;
    corpus.check_schema(schema)?;
    Ok(corpus)
}

pub fn load_corpus(path: impl AsRef<Path>, schema: Schema) -> Result<Corpus> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_corpus_from(file, schema, path)
}

// ---------------------------------------------------------------------------
// Annotator votes

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Vote {
    Yes,
    No,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Confidence {
    Very,
    Somewhat,
    Not,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationVotes {
    pub clip_id: String,
    pub votes: Vec<Vote>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidences: Option<Vec<Confidence>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Consensus {
    Positive,
    Negative,
    Discarded,
}

pub const ANNOTATORS: usize = 7;
pub const CONSENSUS_QUORUM: usize = 5;

/// Five of seven annotators must agree for a label; anything else is dropped.
/// Confidences are not consulted.
pub fn aggregate_annotations(votes: &AnnotationVotes) -> Result<Consensus> {
    if votes.votes.len() != ANNOTATORS {
        return Err(Error::VoteCount(votes.votes.len()));
    }
    let yes = votes.votes.iter().filter(|v| **v == Vote::Yes).count();
    let no = ANNOTATORS - yes;
    Ok(if yes >= CONSENSUS_QUORUM {
        Consensus::Positive
    } else if no >= CONSENSUS_QUORUM {
        Consensus::Negative
    } else {
        Consensus::Discarded
    })
}

/// Reads one [`AnnotationVotes`] per line. Between one and seven votes are
/// accepted here; consensus itself needs all seven.
pub fn load_annotations(path: impl AsRef<Path>) -> Result<Vec<AnnotationVotes>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let rec: AnnotationVotes =
            serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
        if rec.votes.is_empty() || rec.votes.len() > ANNOTATORS {
            return Err(parse_err(format!(
                "expected 1..={ANNOTATORS} votes, found {}",
                rec.votes.len()
            )));
        }
        out.push(rec);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Oracle label files: {"clip_id": ..., "label": 0|1} per line.

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelLine {
    pub clip_id: String,
    pub label: u8,
}

pub fn write_labels(labels: &BTreeMap<String, u8>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for (clip_id, &label) in labels {
        serde_json::to_writer(
            &mut out,
            &LabelLine {
                clip_id: clip_id.clone(),
                label,
            },
        )?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn load_labels(path: impl AsRef<Path>) -> Result<BTreeMap<String, u8>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = BTreeMap::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let rec: LabelLine = serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
        if rec.label > 1 {
            return Err(parse_err(format!("label {} is not binary", rec.label)));
        }
        if out.insert(rec.clip_id.clone(), rec.label).is_some() {
            return Err(parse_err(format!("duplicate clip_id {}", rec.clip_id)));
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Synthetic corpora

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_tasks: usize,
    pub n_keysteps_per_task: usize,
    pub n_clips: usize,
    /// Probability that a clip's narration describes the demonstrated keystep.
    pub visual_rate: f64,
    pub noise_sigma: f64,
    pub dims: Dims,
    pub tokens_per_clip: usize,
    pub clips_per_video: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_tasks: 4,
            n_keysteps_per_task: 4,
            n_clips: 500,
            visual_rate: 0.5,
            noise_sigma: 0.1,
            dims: Dims::new(32, 32, 32),
            tokens_per_clip: 3,
            clips_per_video: 8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub corpus: Corpus,
    /// Planted truth: 1 when the narration describes the shown keystep.
    pub oracle: BTreeMap<String, u8>,
}

/// Seconds per synthetic clip.
const SYNTH_CLIP_S: f64 = 3.0;
/// Half-width, in clips, of the wide-window feature (about 16 s).
const SYNTH_WIDE_RADIUS: usize = 2;
const SYNTH_OBJECTS_PER_STEP: usize = 3;
const SYNTH_DETECTOR_MISS: f64 = 0.25;
const GENERIC_OBJECTS: [&str; 4] = ["hand", "table", "bowl", "knife"];

/// Builds a labeled corpus with a planted visual/non-visual split.
///
/// Each keystep owns a unit anchor in video space and one in sentence space;
/// anchors are kept well apart (pairwise cosine below 0.45 whenever the
/// dimension allows it). A visual clip draws its video feature and its
/// sentence embedding from the same keystep; a non-visual clip keeps the
/// keystep (and its annotation) for the video but narrates a different one.
pub fn synth_corpus(cfg: &SynthConfig, seed: u64) -> Result<SynthOutput> {
    let n_keysteps = cfg.n_tasks * cfg.n_keysteps_per_task;
    if cfg.n_clips == 0 {
        return Err(Error::InvalidParameter("n_clips must be at least 1".into()));
    }
    if cfg.dims.video == 0 || cfg.dims.word == 0 || cfg.dims.sentence == 0 {
        return Err(Error::InvalidParameter("dims must be positive".into()));
    }
    if n_keysteps < 2 {
        return Err(Error::InvalidParameter(
            "need at least two keysteps to plant non-visual clips".into(),
        ));
    }
    if !(0.0..=1.0).contains(&cfg.visual_rate) {
        return Err(Error::InvalidParameter("visual_rate must lie in [0, 1]".into()));
    }
    if !(cfg.noise_sigma >= 0.0 && cfg.noise_sigma.is_finite()) {
        return Err(Error::InvalidParameter("noise_sigma must be >= 0".into()));
    }
    if cfg.tokens_per_clip == 0 || cfg.clips_per_video == 0 {
        return Err(Error::InvalidParameter(
            "tokens_per_clip and clips_per_video must be positive".into(),
        ));
    }

    let mut rng = rng::seeded(seed, &[rng::STREAM_SYNTH]);
    let video_anchors = spread_unit_vectors(n_keysteps, cfg.dims.video, &mut rng);
    let sent_anchors = spread_unit_vectors(n_keysteps, cfg.dims.sentence, &mut rng);
    let expansions: Vec<Matrix> = (0..cfg.tokens_per_clip)
        .map(|_| {
            let scale = 1.0 / (cfg.dims.sentence as f64).sqrt();
            let mut m = Matrix::zeros(cfg.dims.word, cfg.dims.sentence);
            m.data
                .iter_mut()
                .for_each(|x| *x = scale * rng.sample::<f64, _>(StandardNormal));
            m
        })
        .collect();

    let step_name = |k: usize| {
        format!(
            "task{}-step{}",
            k / cfg.n_keysteps_per_task,
            k % cfg.n_keysteps_per_task
        )
    };
    let step_objects = |k: usize| -> Vec<String> {
        (0..SYNTH_OBJECTS_PER_STEP)
            .map(|m| format!("obj{k}-{m}"))
            .collect()
    };

    let id_width = cfg.n_clips.to_string().len();
    let mut clips = Vec::with_capacity(cfg.n_clips);
    let mut oracle = BTreeMap::new();
    let mut task = 0usize;
    for i in 0..cfg.n_clips {
        let slot = i % cfg.clips_per_video;
        if slot == 0 {
            task = rng.random_range(0..cfg.n_tasks);
        }
        let video_index = i / cfg.clips_per_video;
        let shown = task * cfg.n_keysteps_per_task + rng.random_range(0..cfg.n_keysteps_per_task);
        let visual = rng.random::<f64>() < cfg.visual_rate;
        let told = if visual {
            shown
        } else {
            let other = rng.random_range(0..n_keysteps - 1);
            if other >= shown {
                other + 1
            } else {
                other
            }
        };

        let video_feat = noisy_copy(&video_anchors[shown], cfg.noise_sigma, &mut rng);
        let sent_emb = noisy_copy(&sent_anchors[told], cfg.noise_sigma, &mut rng);
        let token_embs = expansions.iter().map(|m| m.matvec(&sent_emb)).collect();

        let mut mentioned = step_objects(told);
        mentioned.push(GENERIC_OBJECTS[rng.random_range(0..GENERIC_OBJECTS.len())].to_string());
        let mut visible: Vec<String> = step_objects(shown)
            .into_iter()
            .filter(|_| rng.random::<f64>() >= SYNTH_DETECTOR_MISS)
            .collect();
        visible.push(GENERIC_OBJECTS[rng.random_range(0..GENERIC_OBJECTS.len())].to_string());

        let clip_id = format!("c{i:0id_width$}");
        oracle.insert(clip_id.clone(), u8::from(visual));
        clips.push(ClipRecord {
            clip_id,
            video_id: format!("v{video_index:0id_width$}"),
            start_s: slot as f64 * SYNTH_CLIP_S,
            end_s: (slot + 1) as f64 * SYNTH_CLIP_S,
            video_feat,
            video_feat_wide: None,
            narration_text: format!("narrates {}", step_name(told)),
            token_embs,
            sent_emb,
            keystep_text: Some(step_name(shown)),
            keystep_emb: Some(sent_anchors[shown].clone()),
            task_label: Some(format!("task{task}")),
            narration_objects: Some(mentioned),
            visible_objects: Some(visible),
            audio: None,
        });
    }

    // Wide-window features average the neighbouring clips of the same video.
    let wide: Vec<Vec<f64>> = (0..clips.len())
        .map(|i| {
            let video_start = i - i % cfg.clips_per_video;
            let video_end = (video_start + cfg.clips_per_video).min(clips.len());
            let lo = i.saturating_sub(SYNTH_WIDE_RADIUS).max(video_start);
            let hi = (i + SYNTH_WIDE_RADIUS + 1).min(video_end);
            let mut acc = vec![0.0; cfg.dims.video];
            for c in &clips[lo..hi] {
                linalg::axpy(1.0, &c.video_feat, &mut acc);
            }
            linalg::normalize(&mut acc);
            acc
        })
        .collect();
    for (clip, w) in clips.iter_mut().zip(wide) {
        clip.video_feat_wide = Some(w);
    }

    Ok(SynthOutput {
        corpus: Corpus::new(cfg.dims, clips, None)?,
        oracle,
    })
}

/// `anchor + sigma·ξ`, renormalized. With `sigma = 0` the anchor is returned
/// bit-for-bit; the noise draw happens either way so the random stream does
/// not depend on the noise level.
fn noisy_copy(anchor: &[f64], sigma: f64, rng: &mut rng::Rng) -> Vec<f64> {
    let noise: Vec<f64> = (0..anchor.len())
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect();
    if sigma == 0.0 {
        return anchor.to_vec();
    }
    let mut v: Vec<f64> = anchor
        .iter()
        .zip(&noise)
        .map(|(a, n)| a + sigma * n)
        .collect();
    linalg::normalize(&mut v);
    v
}

const ANCHOR_MAX_COS: f64 = 0.45;
const ANCHOR_ATTEMPTS: usize = 2000;

/// `n` unit vectors with small pairwise cosine: orthonormal when `n <= dim`,
/// otherwise rejection-sampled against [`ANCHOR_MAX_COS`] (falling back to
/// the best candidate seen).
fn spread_unit_vectors(n: usize, dim: usize, rng: &mut rng::Rng) -> Vec<Vec<f64>> {
    let gaussian = |rng: &mut rng::Rng| -> Vec<f64> {
        let mut v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        linalg::normalize(&mut v);
        v
    };
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(n);
    for _ in 0..n {
        if out.len() < dim {
            // Gram-Schmidt against what we have so far.
            loop {
                let mut v = gaussian(rng);
                for u in &out {
                    let d = linalg::dot(&v, u);
                    linalg::axpy(-d, u, &mut v);
                }
                if linalg::norm(&v) > 1e-6 {
                    linalg::normalize(&mut v);
                    out.push(v);
                    break;
                }
            }
            continue;
        }
        let mut best: Option<(f64, Vec<f64>)> = None;
        for _ in 0..ANCHOR_ATTEMPTS {
            let v = gaussian(rng);
            let worst = out
                .iter()
                .map(|u| linalg::dot(&v, u))
                .fold(f64::NEG_INFINITY, f64::max);
            if best.as_ref().is_none_or(|(b, _)| worst < *b) {
                best = Some((worst, v));
            }
            if worst < ANCHOR_MAX_COS {
                break;
            }
        }
        out.push(best.expect("at least one attempt").1);
    }
    out
}
