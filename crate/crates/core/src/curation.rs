//! Visual-narration label derivation from keystep-annotated corpora.
//!
//! Three rules turn a labeled corpus into a [`CuratedSet`]:
//!
//! * **SS** keeps a clip when its narration embedding agrees with its keystep
//!   annotation, `S(t, y) >= c`.
//! * **VR** keeps every clip that carries a keystep.
//! * **MC** keeps clips ranked in the top `k` by both a video and a text task
//!   classifier, scored on the clip's own task label.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{ClipRecord, Corpus, LabelLine};
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum SetName {
    Ss,
    Vr,
    Mc,
    Pseudo,
    Gold,
}

impl std::fmt::Display for SetName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SetName::Ss => "SS",
            SetName::Vr => "VR",
            SetName::Mc => "MC",
            SetName::Pseudo => "PSEUDO",
            SetName::Gold => "GOLD",
        })
    }
}

/// A derived set of `(clip_id, label)` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CuratedSet {
    pub name: SetName,
    /// Derivation parameters, e.g. `c` or `k`.
    pub params: BTreeMap<String, f64>,
    pairs: Vec<(String, u8)>,
}

impl CuratedSet {
    pub fn new(
        name: SetName,
        params: BTreeMap<String, f64>,
        pairs: Vec<(String, u8)>,
    ) -> Result<Self> {
        let mut seen = HashSet::with_capacity(pairs.len());
        for (id, label) in &pairs {
            if *label > 1 {
                return Err(Error::InvalidParameter(format!(
                    "clip {id}: label {label} is not binary"
                )));
            }
            if !seen.insert(id.as_str()) {
                return Err(Error::DuplicateClip(id.clone()));
            }
        }
        Ok(Self {
            name,
            params,
            pairs,
        })
    }

    /// Builds a gold set from a label map, restricted to `ids` when given.
    pub fn from_labels(
        name: SetName,
        labels: &BTreeMap<String, u8>,
        ids: Option<&[&str]>,
    ) -> Result<Self> {
        let pairs = match ids {
            None => labels.iter().map(|(k, v)| (k.clone(), *v)).collect(),
            Some(ids) => ids
                .iter()
                .map(|id| {
                    labels
                        .get(*id)
                        .map(|l| (id.to_string(), *l))
                        .ok_or_else(|| Error::UnknownClip(id.to_string()))
                })
                .collect::<Result<_>>()?,
        };
        Self::new(name, BTreeMap::new(), pairs)
    }

    pub fn pairs(&self) -> &[(String, u8)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn positives(&self) -> impl Iterator<Item = &str> {
        self.pairs
            .iter()
            .filter(|(_, l)| *l == 1)
            .map(|(id, _)| id.as_str())
    }

    pub fn positive_set(&self) -> HashSet<&str> {
        self.positives().collect()
    }

    pub fn n_pos(&self) -> usize {
        self.positives().count()
    }

    pub fn n_neg(&self) -> usize {
        self.pairs.len() - self.n_pos()
    }

    pub fn label_of(&self, clip_id: &str) -> Option<u8> {
        self.pairs
            .iter()
            .find(|(id, _)| id == clip_id)
            .map(|(_, l)| *l)
    }

    /// Checks that every clip id exists in `corpus`.
    pub fn check_against(&self, corpus: &Corpus) -> Result<()> {
        match self.pairs.iter().find(|(id, _)| !corpus.contains(id)) {
            Some((id, _)) => Err(Error::UnknownClip(id.clone())),
            None => Ok(()),
        }
    }

    /// `"SS(c=0.5)"`-style tag recorded in checkpoints.
    pub fn provenance(&self) -> String {
        let params: Vec<String> = self.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
        format!("{}({})", self.name, params.join(","))
    }
}

#[derive(Serialize, Deserialize)]
struct SetHeader {
    name: SetName,
    params: BTreeMap<String, f64>,
}

/// Writes a parameter header line followed by one `{"clip_id", "label"}` line per pair.
pub fn write_curated(set: &CuratedSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io = |e| Error::io(path, e);
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    serde_json::to_writer(
        &mut out,
        &SetHeader {
            name: set.name,
            params: set.params.clone(),
        },
    )?;
    out.write_all(b"\n").map_err(io)?;
    for (clip_id, label) in &set.pairs {
        serde_json::to_writer(
            &mut out,
            &LabelLine {
                clip_id: clip_id.clone(),
                label: *label,
            },
        )?;
        out.write_all(b"\n").map_err(io)?;
    }
    out.flush().map_err(io)
}

pub fn load_curated(path: impl AsRef<Path>) -> Result<CuratedSet> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut header: Option<SetHeader> = None;
    let mut pairs = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |e: serde_json::Error| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        };
        if header.is_none() {
            header = Some(serde_json::from_str(&line).map_err(parse_err)?);
        } else {
            let rec: LabelLine = serde_json::from_str(&line).map_err(parse_err)?;
            pairs.push((rec.clip_id, rec.label));
        }
    }
    let header = header.ok_or_else(|| Error::MissingHeader {
        path: path.to_path_buf(),
    })?;
    CuratedSet::new(header.name, header.params, pairs)
}

/// Clamped cosine similarity `max(0, cos(a, b))`; zero when either side is zero.
pub fn sentence_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!(
            "sentence embeddings of length {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(linalg::cosine(a, b).max(0.0))
}

fn clip_similarity(clip: &ClipRecord) -> Option<f64> {
    let keystep = clip.keystep_emb.as_ref()?;
    Some(linalg::cosine(&clip.sent_emb, keystep).max(0.0))
}

fn params(key: &str, value: f64) -> BTreeMap<String, f64> {
    BTreeMap::from([(key.to_string(), value)])
}

/// Sentence-similarity rule. Keystep-bearing clips below `c` are emitted with
/// label 0; clips without a keystep are left out.
pub fn derive_ss(corpus: &Corpus, c: f64) -> CuratedSet {
    let pairs = corpus
        .clips()
        .iter()
        .filter_map(|clip| {
            clip_similarity(clip).map(|s| (clip.clip_id.clone(), u8::from(s >= c)))
        })
        .collect();
    CuratedSet::new(SetName::Ss, params("c", c), pairs).expect("corpus ids are unique")
}

/// Visual-relevance rule: every keystep-bearing clip is positive.
pub fn derive_vr(corpus: &Corpus) -> CuratedSet {
    let pairs = corpus
        .clips()
        .iter()
        .filter(|c| c.has_keystep())
        .map(|c| (c.clip_id.clone(), 1))
        .collect();
    CuratedSet::new(SetName::Vr, BTreeMap::new(), pairs).expect("corpus ids are unique")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Video,
    Text,
}

impl Modality {
    fn features<'a>(&self, clip: &'a ClipRecord) -> &'a [f64] {
        match self {
            Modality::Video => &clip.video_feat,
            Modality::Text => &clip.sent_emb,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub iterations: usize,
    pub lr: f64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            iterations: 200,
            lr: 0.5,
        }
    }
}

/// Multinomial logistic regression over one modality's features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskClassifier {
    pub modality: Modality,
    pub weight: Matrix,
    pub bias: Vec<f64>,
    /// Task label to row; rows are assigned in sorted label order.
    pub task_index: BTreeMap<String, usize>,
}

impl TaskClassifier {
    pub fn n_tasks(&self) -> usize {
        self.task_index.len()
    }

    pub fn probabilities(&self, features: &[f64]) -> Result<Vec<f64>> {
        if features.len() != self.weight.cols {
            return Err(Error::Shape(format!(
                "classifier expects {} features, got {}",
                self.weight.cols,
                features.len()
            )));
        }
        let mut logits = self.weight.matvec(features);
        linalg::axpy(1.0, &self.bias, &mut logits);
        Ok(softmax(&logits))
    }

    pub fn clip_probabilities(&self, clip: &ClipRecord) -> Result<Vec<f64>> {
        self.probabilities(self.modality.features(clip))
    }

    /// Probability assigned to the clip's own task label.
    pub fn own_task_score(&self, clip: &ClipRecord) -> Result<f64> {
        let task = clip.task_label.as_ref().ok_or_else(|| Error::InvalidRecord {
            clip_id: clip.clip_id.clone(),
            message: "missing task_label".into(),
        })?;
        let row = *self.task_index.get(task).ok_or_else(|| Error::InvalidRecord {
            clip_id: clip.clip_id.clone(),
            message: format!("task {task} unknown to the classifier"),
        })?;
        Ok(self.clip_probabilities(clip)?[row])
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer(BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let clf: Self = serde_json::from_reader(BufReader::new(file))?;
        if clf.weight.rows != clf.task_index.len() || clf.bias.len() != clf.weight.rows {
            return Err(Error::Shape("classifier rows disagree with task index".into()));
        }
        Ok(clf)
    }
}

pub(crate) fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Full-batch gradient descent on mean cross-entropy, from zero weights.
/// Clips without a task label are skipped.
pub fn train_task_classifier(
    corpus: &Corpus,
    modality: Modality,
    cfg: ClassifierConfig,
) -> Result<TaskClassifier> {
    let labeled: Vec<&ClipRecord> = corpus
        .clips()
        .iter()
        .filter(|c| c.task_label.is_some())
        .collect();
    let tasks: std::collections::BTreeSet<&str> = labeled
        .iter()
        .filter_map(|c| c.task_label.as_deref())
        .collect();
    if tasks.len() < 2 {
        return Err(Error::Precondition(format!(
            "task classifier needs at least 2 distinct task labels, found {}",
            tasks.len()
        )));
    }
    let task_index: BTreeMap<String, usize> = tasks
        .iter()
        .enumerate()
        .map(|(i, t)| (t.to_string(), i))
        .collect();
    let dim = match modality {
        Modality::Video => corpus.dims().video,
        Modality::Text => corpus.dims().sentence,
    };
    let n_tasks = task_index.len();
    let mut clf = TaskClassifier {
        modality,
        weight: Matrix::zeros(n_tasks, dim),
        bias: vec![0.0; n_tasks],
        task_index,
    };
    let targets: Vec<usize> = labeled
        .iter()
        .map(|c| clf.task_index[c.task_label.as_deref().expect("filtered")])
        .collect();

    let scale = cfg.lr / labeled.len() as f64;
    for _ in 0..cfg.iterations {
        let mut grad_w = Matrix::zeros(n_tasks, dim);
        let mut grad_b = vec![0.0; n_tasks];
        for (clip, &target) in labeled.iter().zip(&targets) {
            let x = modality.features(clip);
            let mut delta = clf.probabilities(x)?;
            delta[target] -= 1.0;
            grad_w.add_outer(1.0, &delta, x);
            linalg::axpy(1.0, &delta, &mut grad_b);
        }
        linalg::axpy(-scale, &grad_w.data, &mut clf.weight.data);
        linalg::axpy(-scale, &grad_b, &mut clf.bias);
    }
    if !linalg::all_finite(&clf.weight.data) || !linalg::all_finite(&clf.bias) {
        return Err(Error::NonFinite("task classifier weights".into()));
    }
    Ok(clf)
}

/// Ranks (1 = best) of `scores`, descending, ties broken by ascending id.
fn descending_ranks(scores: &[(&str, f64)]) -> BTreeMap<String, usize> {
    let mut order: Vec<&(&str, f64)> = scores.iter().collect();
    order.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    order
        .iter()
        .enumerate()
        .map(|(r, (id, _))| (id.to_string(), r + 1))
        .collect()
}

/// Modality-consensus rule over globally ranked own-task probabilities.
pub fn derive_mc(
    corpus: &Corpus,
    video_clf: &TaskClassifier,
    text_clf: &TaskClassifier,
    k: usize,
) -> Result<CuratedSet> {
    if video_clf.task_index != text_clf.task_index {
        return Err(Error::Precondition(
            "video and text classifiers use different task taxonomies".into(),
        ));
    }
    let mut video_scores = Vec::with_capacity(corpus.len());
    let mut text_scores = Vec::with_capacity(corpus.len());
    for clip in corpus.clips() {
        video_scores.push((clip.clip_id.as_str(), video_clf.own_task_score(clip)?));
        text_scores.push((clip.clip_id.as_str(), text_clf.own_task_score(clip)?));
    }
    mc_from_scores(&video_scores, &text_scores, k)
}

/// MC selection given per-modality scores; exposed for tests and tooling.
pub fn mc_from_scores(
    video_scores: &[(&str, f64)],
    text_scores: &[(&str, f64)],
    k: usize,
) -> Result<CuratedSet> {
    if k > video_scores.len() {
        return Err(Error::InvalidParameter(format!(
            "k = {k} exceeds the {} task-labeled clips",
            video_scores.len()
        )));
    }
    let video_rank = descending_ranks(video_scores);
    let text_rank = descending_ranks(text_scores);
    let pairs = video_scores
        .iter()
        .map(|(id, _)| {
            let vr = video_rank[*id];
            let tr = *text_rank
                .get(*id)
                .ok_or_else(|| Error::UnknownClip(id.to_string()))?;
            Ok((id.to_string(), u8::from(vr <= k && tr <= k)))
        })
        .collect::<Result<Vec<_>>>()?;
    CuratedSet::new(SetName::Mc, params("k", k as f64), pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{synth_corpus, Dims, SynthConfig};

    #[test]
    fn similarity_examples() {
        let e = [0.3, -0.2, 0.9];
        assert!((sentence_similarity(&e, &e).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(sentence_similarity(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        let s = sentence_similarity(&[1.0, 0.0, 0.0], &[1.0, 1.0, 0.0]).unwrap();
        assert!((s - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert_eq!(sentence_similarity(&[1.0, 0.0], &[-1.0, 0.0]).unwrap(), 0.0);
        assert!(sentence_similarity(&[1.0], &[1.0, 0.0]).is_err());
        assert_eq!(sentence_similarity(&[0.0, 0.0], &[1.0, 0.0]).unwrap(), 0.0);
    }

    fn clip(id: &str, sent: Vec<f64>, keystep: Option<Vec<f64>>) -> ClipRecord {
        ClipRecord {
            clip_id: id.into(),
            video_id: "v".into(),
            start_s: 0.0,
            end_s: 3.0,
            video_feat: vec![1.0, 0.0],
            video_feat_wide: None,
            narration_text: String::new(),
            token_embs: vec![],
            sent_emb: sent,
            keystep_text: keystep.as_ref().map(|_| "step".to_string()),
            keystep_emb: keystep,
            task_label: None,
            narration_objects: None,
            visible_objects: None,
            audio: None,
        }
    }

    #[test]
    fn ss_boundary_and_missing_keystep() {
        // cos((1,1),(1,0)) = 1/√2; using c equal to that value exactly.
        let c = linalg::cosine(&[1.0, 1.0], &[1.0, 0.0]);
        let corpus = Corpus::new(
            Dims::new(2, 2, 2),
            vec![
                clip("a", vec![1.0, 1.0], Some(vec![1.0, 0.0])),
                clip("b", vec![1.0, 0.0], None),
                clip("c", vec![0.0, 1.0], Some(vec![1.0, 0.0])),
            ],
            None,
        )
        .unwrap();
        let ss = derive_ss(&corpus, c);
        assert_eq!(ss.pairs(), &[("a".to_string(), 1), ("c".to_string(), 0)]);
        assert_eq!(ss.params["c"], c);

        let vr = derive_vr(&corpus);
        assert_eq!(vr.positive_set(), HashSet::from(["a", "c"]));
    }

    #[test]
    fn vr_without_keysteps_is_empty() {
        let out = synth_corpus(&SynthConfig::default(), 2).unwrap();
        assert!(derive_vr(&out.corpus.to_unlabeled()).is_empty());
    }

    #[test]
    fn mc_hand_example() {
        // video ranking: a(0.9) b(0.8) c(0.7) d(0.2) e(0.1)
        // text ranking:  c(0.95) a(0.6) e(0.5) b(0.4) d(0.3)
        // top-2 video {a,b}, top-2 text {c,a} -> {a}
        let video = [("a", 0.9), ("b", 0.8), ("c", 0.7), ("d", 0.2), ("e", 0.1)];
        let text = [("a", 0.6), ("b", 0.4), ("c", 0.95), ("d", 0.3), ("e", 0.5)];
        let set = mc_from_scores(&video, &text, 2).unwrap();
        assert_eq!(set.positive_set(), HashSet::from(["a"]));
        assert_eq!(set.len(), 5);
        // top-3: video {a,b,c}, text {c,a,e} -> {a,c}
        let set = mc_from_scores(&video, &text, 3).unwrap();
        assert_eq!(set.positive_set(), HashSet::from(["a", "c"]));
        assert!(mc_from_scores(&video, &text, 0).unwrap().positive_set().is_empty());
        assert_eq!(mc_from_scores(&video, &text, 5).unwrap().n_pos(), 5);
        assert!(mc_from_scores(&video, &text, 6).is_err());
    }

    #[test]
    fn mc_ties_break_by_clip_id() {
        let video = [("b", 0.5), ("a", 0.5)];
        let text = [("b", 0.5), ("a", 0.5)];
        let set = mc_from_scores(&video, &text, 1).unwrap();
        assert_eq!(set.positive_set(), HashSet::from(["a"]));
    }

    #[test]
    fn zero_iteration_classifier_is_uniform() {
        let out = synth_corpus(&SynthConfig::default(), 4).unwrap();
        let clf = train_task_classifier(
            &out.corpus,
            Modality::Video,
            ClassifierConfig {
                iterations: 0,
                lr: 0.5,
            },
        )
        .unwrap();
        let n = clf.n_tasks() as f64;
        for clip in out.corpus.clips().iter().take(20) {
            for p in clf.clip_probabilities(clip).unwrap() {
                assert!((p - 1.0 / n).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn classifier_needs_two_tasks() {
        let corpus = Corpus::new(
            Dims::new(2, 2, 2),
            vec![ClipRecord {
                task_label: Some("only".into()),
                ..clip("a", vec![1.0, 0.0], None)
            }],
            None,
        )
        .unwrap();
        assert!(train_task_classifier(&corpus, Modality::Text, ClassifierConfig::default()).is_err());
    }

    #[test]
    fn separable_tasks_fit_perfectly() {
        let mut clips = Vec::new();
        for i in 0..40 {
            let (task, base) = if i % 2 == 0 {
                ("left", [1.0, 0.1])
            } else {
                ("right", [-1.0, 0.2])
            };
            let jitter = (i as f64 * 0.37).sin() * 0.3;
            clips.push(ClipRecord {
                task_label: Some(task.into()),
                video_feat: vec![base[0] + jitter * 0.2, base[1] + jitter],
                ..clip(&format!("c{i:02}"), vec![1.0, 0.0], None)
            });
        }
        let corpus = Corpus::new(Dims::new(2, 2, 2), clips, None).unwrap();
        let clf = train_task_classifier(&corpus, Modality::Video, ClassifierConfig::default()).unwrap();
        for c in corpus.clips() {
            let probs = clf.clip_probabilities(c).unwrap();
            let predicted = probs
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .unwrap()
                .0;
            assert_eq!(predicted, clf.task_index[c.task_label.as_ref().unwrap()]);
        }
    }
}
