//! Context bank construction, the hybrid classifier, evaluation and
//! prediction.
//!
//! The bank holds one vector per training user (stylometric and personality
//! views fused by CCA, or concatenated) and one per forum. The classifier is
//! the content CNN whose output layer also reads the frozen user and forum
//! vectors of each comment; with both context parts disabled it is exactly
//! the content-only CNN.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::sync::atomic::{AtomicU64, Ordering};

use crate::cca::{concat_table, fit_tables, fuse_table, CcaModel, DEFAULT_RIDGE};
use crate::corpus::{build_entity_documents, CommentRecord, EntityDocument, EntityKey, Label, Vocabulary};
use crate::embedding::EmbeddingTable;
use crate::personality::{personality_table, pretrain_from, EssayRecord};
use crate::provenance::{corpus_hash, hash_str, id_hash, stage_seed};
use crate::pvdm::{PvdmConfig, PvdmModel};
use crate::tensor::{limbs_to_u64, strings_to_tensors, tensors_to_strings, u64_to_limbs, NamedTensor, TensorSet};
use crate::textcnn::{
    categorical_cross_entropy_bits, encode_padded, train_classifier, CnnConfig, CnnModel, Example, Head, History,
    Loss, TrainConfig,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fusion {
    Cca,
    /// Stylometric and personality vectors side by side, unprojected.
    Concat,
}

/// Which context parts the classifier reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ablation {
    pub use_user: bool,
    pub use_discourse: bool,
}

impl Ablation {
    pub const FULL: Self = Self {
        use_user: true,
        use_discourse: true,
    };
    pub const CONTENT_ONLY: Self = Self {
        use_user: false,
        use_discourse: false,
    };
}

/// Encoder sizes shared by the personality and content CNNs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncoderShape {
    pub embedding_dim: usize,
    pub heights: [usize; 3],
    pub feature_maps: usize,
    pub hidden: usize,
    pub max_len: usize,
}

impl Default for EncoderShape {
    fn default() -> Self {
        Self {
            embedding_dim: 300,
            heights: [3, 4, 5],
            feature_maps: 128,
            hidden: 100,
            max_len: 100,
        }
    }
}

impl EncoderShape {
    pub fn cnn_config(&self, vocab_size: usize, classes: usize, head: Head, extra_dim: usize) -> CnnConfig {
        CnnConfig {
            vocab_size,
            embedding_dim: self.embedding_dim,
            heights: self.heights,
            feature_maps: self.feature_maps,
            hidden: self.hidden,
            classes,
            head,
            max_len: self.max_len,
            extra_dim,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContextConfig {
    pub min_count: u64,
    /// User documents; `dim` is the stylometric size.
    pub stylometric: PvdmConfig,
    /// Forum documents; `dim` is the discourse size.
    pub discourse: PvdmConfig,
    pub personality: EncoderShape,
    pub personality_training: TrainConfig,
    /// Fused user vector size `K`.
    pub user_dim: usize,
    /// Relative ridge for the CCA fit.
    pub ridge: f64,
    pub fusion: Fusion,
    /// Worker threads for paragraph-vector training; more than one is
    /// nondeterministic and needs the `std` feature.
    pub threads: usize,
}

impl Default for ContextConfig {
    fn default() -> Self {
        Self {
            min_count: 5,
            stylometric: PvdmConfig::default(),
            discourse: PvdmConfig::default(),
            personality: EncoderShape::default(),
            personality_training: TrainConfig::new(Loss::BinaryCrossEntropy),
            user_dim: 100,
            ridge: DEFAULT_RIDGE,
            fusion: Fusion::Cca,
            threads: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierConfig {
    pub shape: EncoderShape,
    pub training: TrainConfig,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            shape: EncoderShape::default(),
            training: TrainConfig::new(Loss::CategoricalCrossEntropyBase2),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub corpus_hash: u64,
    pub config_hash: u64,
    pub seed: u64,
    /// Hashes of the comment ids the bank was built from.
    pub source_ids: BTreeSet<u64>,
}

/// Frozen per-user and per-forum vectors.
#[derive(Debug)]
pub struct ContextBank {
    pub vocab: Vocabulary,
    pub users: EmbeddingTable,
    pub forums: EmbeddingTable,
    pub stylometric: EmbeddingTable,
    pub personality: EmbeddingTable,
    pub fusion: Fusion,
    /// Present with CCA fusion.
    pub cca: Option<CcaModel>,
    pub provenance: Provenance,
    missing: AtomicU64,
}

impl Clone for ContextBank {
    fn clone(&self) -> Self {
        Self {
            vocab: self.vocab.clone(),
            users: self.users.clone(),
            forums: self.forums.clone(),
            stylometric: self.stylometric.clone(),
            personality: self.personality.clone(),
            fusion: self.fusion,
            cca: self.cca.clone(),
            provenance: self.provenance.clone(),
            missing: AtomicU64::new(self.missing_lookups()),
        }
    }
}

/// Compares content only; the lookup counter is ignored.
impl PartialEq for ContextBank {
    fn eq(&self, other: &Self) -> bool {
        self.vocab == other.vocab
            && self.users == other.users
            && self.forums == other.forums
            && self.stylometric == other.stylometric
            && self.personality == other.personality
            && self.fusion == other.fusion
            && self.cca == other.cca
            && self.provenance == other.provenance
    }
}

fn pvdm_table(docs: &[EntityDocument], vocab_size: usize, config: PvdmConfig, threads: usize) -> Result<EmbeddingTable> {
    let model: PvdmModel<f32> = if threads > 1 {
        parallel_pvdm(docs, vocab_size, config, threads)?
    } else {
        crate::pvdm::train(docs, vocab_size, config)?.0
    };
    Ok(model.doc_table())
}

#[cfg(feature = "std")]
fn parallel_pvdm(docs: &[EntityDocument], vocab_size: usize, config: PvdmConfig, threads: usize) -> Result<PvdmModel<f32>> {
    log::warn!("paragraph vectors trained with {threads} threads; results are not reproducible");
    Ok(crate::pvdm::train_parallel(docs, vocab_size, config, threads)?.0)
}

#[cfg(not(feature = "std"))]
fn parallel_pvdm(_: &[EntityDocument], _: usize, _: PvdmConfig, _: usize) -> Result<PvdmModel<f32>> {
    Err(Error::contract("multi-threaded training needs the `std` feature"))
}

/// Learns user and forum vectors from the training split and the essays.
///
/// Stages run in order: vocabulary, stylometric paragraph vectors,
/// personality pretraining, fusion, discourse paragraph vectors. Each stage
/// draws its seed from `seed` and the stage name; errors carry the stage.
pub fn build_context(
    train: &[CommentRecord],
    essays: &[EssayRecord],
    config: &ContextConfig,
    seed: u64,
) -> Result<ContextBank> {
    let vocab = context_vocabulary(train, essays, config.min_count).map_err(|e| e.in_stage("vocabulary"))?;
    build_context_with(vocab, train, essays, config, seed, None)
}

/// Shared vocabulary of the training comments and the essays.
pub fn context_vocabulary(train: &[CommentRecord], essays: &[EssayRecord], min_count: u64) -> Result<Vocabulary> {
    if train.is_empty() {
        return Err(Error::contract("no training comments"));
    }
    Vocabulary::build(
        train.iter().map(|c| c.text.as_str()).chain(essays.iter().map(|e| e.text.as_str())),
        min_count,
    )
}

/// [`build_context`] with a prepared vocabulary and optional pretrained word
/// vectors for the personality encoder.
pub fn build_context_with(
    vocab: Vocabulary,
    train: &[CommentRecord],
    essays: &[EssayRecord],
    config: &ContextConfig,
    seed: u64,
    word_vectors: Option<&EmbeddingTable>,
) -> Result<ContextBank> {
    if train.is_empty() {
        return Err(Error::contract("no training comments").in_stage("vocabulary"));
    }
    log::info!("vocabulary: {} entries", vocab.len());

    let user_docs = build_entity_documents(train, EntityKey::User, &vocab);
    let stylometric = pvdm_table(
        &user_docs,
        vocab.len(),
        PvdmConfig {
            seed: stage_seed(seed, "stylometric"),
            ..config.stylometric
        },
        config.threads,
    )
    .map_err(|e| e.in_stage("stylometric"))?;
    log::info!("stylometric: {} users", stylometric.len());

    let personality = {
        let mut training = config.personality_training.clone();
        training.seed = stage_seed(seed, "personality-train");
        let cnn = config.personality.cnn_config(vocab.len(), 5, Head::Sigmoid, 0);
        let init = initial_model(cnn, stage_seed(seed, "personality-init"), &vocab, word_vectors)
            .map_err(|e| e.in_stage("personality"))?;
        let (model, history) = pretrain_from(essays, &vocab, init, &training).map_err(|e| e.in_stage("personality"))?;
        log::info!(
            "personality: best epoch {} of {}",
            history.best_epoch,
            history.epochs.len()
        );
        let mut texts: BTreeMap<String, Vec<&str>> = BTreeMap::new();
        for c in train {
            texts.entry(c.user_id.clone()).or_default().push(&c.text);
        }
        personality_table(&model, &vocab, &texts).map_err(|e| e.in_stage("personality"))?
    };

    let (users, cca) = match config.fusion {
        Fusion::Cca => {
            let (model, ids) = fit_tables(&stylometric, &personality, config.user_dim, config.ridge)
                .map_err(|e| e.in_stage("fusion"))?;
            log::info!(
                "fusion: CCA on {} users, top correlation {:.4}",
                ids.len(),
                model.correlations.first().copied().unwrap_or(0.0)
            );
            let users = fuse_table(&model, &stylometric, &personality).map_err(|e| e.in_stage("fusion"))?;
            (users, Some(model))
        }
        Fusion::Concat => (
            concat_table(&stylometric, &personality).map_err(|e| e.in_stage("fusion"))?,
            None,
        ),
    };

    let forum_docs = build_entity_documents(train, EntityKey::Forum, &vocab);
    let forums = pvdm_table(
        &forum_docs,
        vocab.len(),
        PvdmConfig {
            seed: stage_seed(seed, "discourse"),
            ..config.discourse
        },
        config.threads,
    )
    .map_err(|e| e.in_stage("discourse"))?;
    log::info!("discourse: {} forums", forums.len());

    Ok(ContextBank {
        vocab,
        users,
        forums,
        stylometric,
        personality,
        fusion: config.fusion,
        cca,
        provenance: Provenance {
            corpus_hash: corpus_hash(train),
            config_hash: hash_str(&format!("{config:?}")),
            seed,
            source_ids: train.iter().map(|c| id_hash(&c.id)).collect(),
        },
        missing: AtomicU64::new(0),
    })
}

impl ContextBank {
    /// Lookups that fell back to a zero vector so far.
    pub fn missing_lookups(&self) -> u64 {
        self.missing.load(Ordering::Relaxed)
    }

    fn append(&self, table: &EmbeddingTable, kind: &str, id: &str, out: &mut Vec<f32>) {
        match table.get(id) {
            Some(v) => out.extend_from_slice(v),
            None => {
                self.missing.fetch_add(1, Ordering::Relaxed);
                log::warn!("unknown {kind} `{id}`; using a zero vector");
                out.resize(out.len() + table.dim(), 0.0);
            }
        }
    }

    /// The user's vector, or zeros when the user is not in the bank.
    pub fn user_vector(&self, id: &str) -> Vec<f32> {
        let mut v = Vec::with_capacity(self.users.dim());
        self.append(&self.users, "user", id, &mut v);
        v
    }

    /// The forum's vector, or zeros when the forum is not in the bank.
    pub fn forum_vector(&self, id: &str) -> Vec<f32> {
        let mut v = Vec::with_capacity(self.forums.dim());
        self.append(&self.forums, "forum", id, &mut v);
        v
    }

    /// Side features for one comment under `ablation`.
    pub fn features(&self, ablation: Ablation, user: &str, forum: &str) -> Vec<f32> {
        let mut out = Vec::with_capacity(self.feature_dim(ablation));
        if ablation.use_user {
            self.append(&self.users, "user", user, &mut out);
        }
        if ablation.use_discourse {
            self.append(&self.forums, "forum", forum, &mut out);
        }
        out
    }

    pub fn feature_dim(&self, ablation: Ablation) -> usize {
        ablation.use_user as usize * self.users.dim() + ablation.use_discourse as usize * self.forums.dim()
    }

    /// Ids among `records` that the bank was built from.
    pub fn leaked_ids(&self, records: &[CommentRecord]) -> Vec<String> {
        records
            .iter()
            .filter(|r| self.provenance.source_ids.contains(&id_hash(&r.id)))
            .map(|r| r.id.clone())
            .collect()
    }

    pub fn to_tensors(&self, prefix: &str) -> TensorSet {
        let mut set: TensorSet = strings_to_tensors(&format!("{prefix}vocab.tokens"), self.vocab.tokens())
            .into_iter()
            .collect();
        set.push(NamedTensor {
            name: format!("{prefix}vocab.counts"),
            dims: vec![self.vocab.len(), 4],
            data: self.vocab.counts().iter().flat_map(|&c| u64_to_limbs(c)).collect(),
        });
        set.push(NamedTensor::vector(
            format!("{prefix}vocab.min_count"),
            u64_to_limbs(self.vocab.min_count()).to_vec(),
        ));
        for (name, table) in [
            ("users/", &self.users),
            ("forums/", &self.forums),
            ("stylometric/", &self.stylometric),
            ("personality/", &self.personality),
        ] {
            set.extend(table.to_tensors(&format!("{prefix}{name}")));
        }
        set.push(NamedTensor::scalar(
            format!("{prefix}fusion"),
            match self.fusion {
                Fusion::Cca => 0.0,
                Fusion::Concat => 1.0,
            },
        ));
        if let Some(cca) = &self.cca {
            set.extend(cca.to_tensors(&format!("{prefix}cca/")));
        }
        let p = &self.provenance;
        set.push(NamedTensor::vector(
            format!("{prefix}provenance.hashes"),
            [p.corpus_hash, p.config_hash, p.seed]
                .iter()
                .flat_map(|&h| u64_to_limbs(h))
                .collect(),
        ));
        set.push(NamedTensor {
            name: format!("{prefix}provenance.sources"),
            dims: vec![p.source_ids.len(), 4],
            data: p.source_ids.iter().flat_map(|&h| u64_to_limbs(h)).collect(),
        });
        set
    }

    pub fn from_tensors(set: &TensorSet, prefix: &str) -> Result<Self> {
        let tokens = tensors_to_strings(set, &format!("{prefix}vocab.tokens"))?;
        let counts = set
            .get(&format!("{prefix}vocab.counts"))?
            .data
            .chunks(4)
            .map(limbs_to_u64)
            .collect::<Result<Vec<_>>>()?;
        let min_count = limbs_to_u64(&set.get(&format!("{prefix}vocab.min_count"))?.data)?;
        let vocab = Vocabulary::from_parts(tokens, counts, min_count)?;
        let table = |name: &str| EmbeddingTable::from_tensors(set, &format!("{prefix}{name}"));
        let fusion = match set.scalar(&format!("{prefix}fusion"))? {
            0.0 => Fusion::Cca,
            1.0 => Fusion::Concat,
            _ => return Err(Error::contract("unknown fusion mode in checkpoint")),
        };
        let cca = match fusion {
            Fusion::Cca => Some(CcaModel::from_tensors(set, &format!("{prefix}cca/"))?),
            Fusion::Concat => None,
        };
        let hashes = &set.get(&format!("{prefix}provenance.hashes"))?.data;
        if hashes.len() != 12 {
            return Err(Error::contract("provenance hashes have the wrong length"));
        }
        let source_ids = set
            .get(&format!("{prefix}provenance.sources"))?
            .data
            .chunks(4)
            .map(limbs_to_u64)
            .collect::<Result<BTreeSet<_>>>()?;
        Ok(Self {
            vocab,
            users: table("users/")?,
            forums: table("forums/")?,
            stylometric: table("stylometric/")?,
            personality: table("personality/")?,
            fusion,
            cca,
            provenance: Provenance {
                corpus_hash: limbs_to_u64(&hashes[0..4])?,
                config_hash: limbs_to_u64(&hashes[4..8])?,
                seed: limbs_to_u64(&hashes[8..12])?,
                source_ids,
            },
            missing: AtomicU64::new(0),
        })
    }
}

/// Content CNN plus the frozen context it reads.
#[derive(Debug, Clone, PartialEq)]
pub struct CascadeModel {
    pub content: CnnModel<f32>,
    pub ablation: Ablation,
    pub bank: ContextBank,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub label: Label,
    /// `[non-sarcastic, sarcastic]`.
    pub probabilities: [f64; 2],
}

fn labels_of(records: &[CommentRecord]) -> Result<Vec<Label>> {
    let missing: Vec<String> = records
        .iter()
        .filter(|r| r.label.is_none())
        .map(|r| r.id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Unlabeled(missing));
    }
    Ok(records.iter().map(|r| r.label.unwrap()).collect())
}

fn one_hot(label: Label) -> Vec<f32> {
    let mut t = vec![0.0; 2];
    t[label.index()] = 1.0;
    t
}

fn initial_model(
    config: CnnConfig,
    seed: u64,
    vocab: &Vocabulary,
    word_vectors: Option<&EmbeddingTable>,
) -> Result<CnnModel<f32>> {
    let mut model = CnnModel::new(config, seed)?;
    if let Some(table) = word_vectors {
        let loaded = model.load_word_vectors(vocab, table)?;
        log::info!("loaded {loaded} of {} word vectors", vocab.len());
    }
    Ok(model)
}

/// Trains the content CNN and output layer on `train` with the bank frozen.
pub fn train_cascade(
    bank: ContextBank,
    train: &[CommentRecord],
    ablation: Ablation,
    config: &ClassifierConfig,
    seed: u64,
) -> Result<(CascadeModel, History)> {
    train_cascade_with(bank, train, ablation, config, seed, None)
}

/// [`train_cascade`] with optional pretrained word vectors.
pub fn train_cascade_with(
    bank: ContextBank,
    train: &[CommentRecord],
    ablation: Ablation,
    config: &ClassifierConfig,
    seed: u64,
    word_vectors: Option<&EmbeddingTable>,
) -> Result<(CascadeModel, History)> {
    if train.is_empty() {
        return Err(Error::contract("no training comments"));
    }
    let labels = labels_of(train)?;
    let outside = train
        .iter()
        .filter(|r| !bank.provenance.source_ids.contains(&id_hash(&r.id)))
        .count();
    if outside > 0 {
        log::warn!("{outside} training comments were not used to build the context bank");
    }
    let max_len = config.shape.max_len;
    let data: Vec<Example<f32>> = train
        .iter()
        .zip(&labels)
        .map(|(r, &l)| Example {
            tokens: encode_padded(&bank.vocab, &r.text, max_len),
            extra: bank.features(ablation, &r.user_id, &r.forum_id),
            target: one_hot(l),
        })
        .collect();
    let cnn = config
        .shape
        .cnn_config(bank.vocab.len(), 2, Head::Softmax, bank.feature_dim(ablation));
    let model = initial_model(cnn, stage_seed(seed, "content-init"), &bank.vocab, word_vectors)?;
    let mut training = config.training.clone();
    training.seed = stage_seed(seed, "content-train");
    let (content, history) = train_classifier(model, &data, &training)?;
    Ok((
        CascadeModel {
            content,
            ablation,
            bank,
        },
        history,
    ))
}

impl CascadeModel {
    pub fn predict(&self, record: &CommentRecord) -> Result<Prediction> {
        let tokens = encode_padded(&self.bank.vocab, &record.text, self.content.config.max_len);
        let extra = self.bank.features(self.ablation, &record.user_id, &record.forum_id);
        let out = self.content.forward(&tokens, &extra)?.output;
        let probabilities = [out[0] as f64, out[1] as f64];
        let label = if probabilities[1] > probabilities[0] {
            Label::Sarcastic
        } else {
            Label::NonSarcastic
        };
        Ok(Prediction { label, probabilities })
    }

    /// Metrics on a labelled test split that shares no comment with the
    /// bank's sources.
    pub fn evaluate(&self, test: &[CommentRecord]) -> Result<EvalReport> {
        let labels = labels_of(test)?;
        let leaked = self.bank.leaked_ids(test);
        if !leaked.is_empty() {
            return Err(Error::Leakage(leaked));
        }
        let mut confusion = [[0u64; 2]; 2];
        let mut loss = 0.0;
        for (r, &l) in test.iter().zip(&labels) {
            let p = self.predict(r)?;
            confusion[l.index()][p.label.index()] += 1;
            let mut target = [0.0; 2];
            target[l.index()] = 1.0;
            loss += categorical_cross_entropy_bits(&p.probabilities, &target);
        }
        let n = test.len().max(1) as f64;
        Ok(EvalReport::from_confusion(confusion, loss / n))
    }

    pub fn to_tensors(&self) -> TensorSet {
        let mut set = self.bank.to_tensors("bank/");
        set.extend(self.content.to_tensors("content/"));
        set.push(NamedTensor::vector(
            "ablation",
            vec![self.ablation.use_user as u8 as f32, self.ablation.use_discourse as u8 as f32],
        ));
        set
    }

    pub fn from_tensors(set: &TensorSet) -> Result<Self> {
        let bank = ContextBank::from_tensors(set, "bank/")?;
        let content = CnnModel::from_tensors(set, "content/")?;
        let flags = &set.get("ablation")?.data;
        let [u, d] = flags[..] else {
            return Err(Error::contract("ablation tensor must hold two flags"));
        };
        let ablation = Ablation {
            use_user: u != 0.0,
            use_discourse: d != 0.0,
        };
        if content.config.extra_dim != bank.feature_dim(ablation) {
            return Err(Error::contract("content model does not match the bank's context size"));
        }
        Ok(Self {
            content,
            ablation,
            bank,
        })
    }
}

/// Classification metrics; `confusion[actual][predicted]`, class 1 is
/// sarcastic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalReport {
    pub accuracy: f64,
    pub f1_sarcastic: f64,
    pub precision_sarcastic: f64,
    pub recall_sarcastic: f64,
    /// Per class, indexed like the labels.
    pub precision: [f64; 2],
    pub recall: [f64; 2],
    pub confusion: [[u64; 2]; 2],
    /// Mean cross-entropy in bits.
    pub loss_bits: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl EvalReport {
    pub fn from_confusion(confusion: [[u64; 2]; 2], loss_bits: f64) -> Self {
        let total: u64 = confusion.iter().flatten().sum();
        let precision = [0, 1].map(|c| ratio(confusion[c][c], confusion[0][c] + confusion[1][c]));
        let recall = [0, 1].map(|c| ratio(confusion[c][c], confusion[c][0] + confusion[c][1]));
        let (p, r) = (precision[1], recall[1]);
        Self {
            accuracy: ratio(confusion[0][0] + confusion[1][1], total),
            f1_sarcastic: if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) },
            precision_sarcastic: p,
            recall_sarcastic: r,
            precision,
            recall,
            confusion,
            loss_bits,
        }
    }
}
