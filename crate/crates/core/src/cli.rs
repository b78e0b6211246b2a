//! Command-line front end.
//!
//! Every text output starts with a `#` provenance line naming the
//! command, the hash of the effective configuration, the hash of the
//! input corpus file and the seed. Files are written to a temporary
//! name and renamed, so a failed command leaves no partial output.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{
    avg_cosine_series, dominant_label, label_entropy_series, movers_tsv, self_similarity, series_tsv, top_movers,
    trajectory_projection_tsv, Direction, TrajectorySet,
};
use crate::corpus::{normalize_and_tokenize, Corpus, TokenizedCorpus, Vocab};
use crate::eval::{evaluate, gain_series, gain_tsv, EvalReport};
use crate::generate::{beam_search, hypotheses_tsv};
use crate::io::write_atomic;
use crate::model::{Model, ModelConfig, ModelDims, Variant};
use crate::numeric::{AdamState, Storable};
use crate::splits::{make_split, verify_split, SplitAssignment, SplitTag, TaskKind};
use crate::synth::{generate_corpus, DriftWorldConfig, DriftWorldSpec};
use crate::train::{fit, peek_precision, run_seeds_with, Checkpoint, Precision, SeedSummary, TrainConfig, TrainLog};

#[derive(Debug, Parser)]
#[command(name = "authordyn", version, about = "Temporal author-conditioned LSTM language models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tokenize a raw corpus, build the vocabulary and write corpus statistics.
    Prepare(PrepareArgs),
    /// Assign documents to train/val/test for a task.
    Split(SplitArgs),
    /// Generate a synthetic drifting-topic corpus.
    Synth(SynthArgs),
    /// Train a model and write its best checkpoint and training log.
    Train(TrainArgs),
    /// Score a checkpoint on a split and write the perplexity report.
    Eval(EvalArgs),
    /// Export latent trajectories and their similarity statistics.
    Analyze(AnalyzeArgs),
    /// Beam-search continuations of a prefix for an author and timestep.
    Generate(GenerateArgs),
    /// Train and test several variants over consecutive seeds.
    Seeds(SeedsArgs),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Directory for all outputs.
    #[arg(long, env = "AUTHORDYN_OUT_DIR", default_value = "out")]
    pub out_dir: PathBuf,
    /// TOML file with optional `[model]`, `[train]` and `[synth]` tables and `min_count`.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides every seed in the configuration.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct ModelFlags {
    #[arg(long)]
    pub variant: Option<Variant>,
    /// Feed h_a into the dynamics network (ours).
    #[arg(long, overrides_with = "no_ada_dyn")]
    pub ada_dyn: bool,
    #[arg(long)]
    pub no_ada_dyn: bool,
    /// Concatenate h_a into the conditioning vector (ours).
    #[arg(long, overrides_with = "no_stat_cond")]
    pub stat_cond: bool,
    #[arg(long)]
    pub no_stat_cond: bool,
    #[arg(long)]
    pub precision: Option<Precision>,
    /// Sequential evaluation; results are identical either way.
    #[arg(long)]
    pub deterministic: bool,
}

#[derive(Debug, Clone, Args)]
pub struct PrepareArgs {
    #[command(flatten)]
    pub common: Common,
    /// Raw line-record corpus.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Build the vocabulary from this split's training documents only.
    #[arg(long)]
    pub split: Option<PathBuf>,
    #[arg(long)]
    pub min_count: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct SplitArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub task: TaskKind,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub model: ModelFlags,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub split: PathBuf,
    /// Vocabulary file from `prepare`; built from the training documents when absent.
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    /// Write an untrained checkpoint whose logits are all zero.
    #[arg(long)]
    pub uniform_debug: bool,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub split: PathBuf,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Report of a baseline model on the same split; enables the gain series.
    #[arg(long)]
    pub baseline: Option<PathBuf>,
    /// Which part of the split to score.
    #[arg(long, default_value = "test")]
    pub on: SplitTag,
    #[arg(long)]
    pub deterministic: bool,
}

#[derive(Debug, Clone, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Corpus the checkpoint was trained on; supplies author names and labels.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Length of the top-mover tables.
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    /// Rank movers only among the authors with the most documents.
    #[arg(long)]
    pub restrict_top: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Author name (needs --corpus) or numeric id.
    #[arg(long)]
    pub author: String,
    /// Timestep, 1-based.
    #[arg(long)]
    pub time: usize,
    /// Prefix text; tokenized like the corpus.
    #[arg(long, default_value = "")]
    pub prefix: String,
    #[arg(long, default_value_t = 5)]
    pub beam: usize,
    #[arg(long, default_value_t = crate::generate::DEFAULT_MAX_LEN)]
    pub max_len: usize,
    #[arg(long)]
    pub corpus: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SeedsArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub model: ModelFlags,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub task: TaskKind,
    /// Comma-separated variants.
    #[arg(long, value_delimiter = ',', default_value = "lstm,lstm-a,lstm-at,ours")]
    pub variants: Vec<Variant>,
    /// Number of seeds, counted up from --seed.
    #[arg(long, default_value_t = 5)]
    pub num_seeds: u64,
}

/// Effective configuration: defaults, then the config file, then flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub synth: DriftWorldConfig,
    pub min_count: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            synth: DriftWorldConfig::default(),
            min_count: 1,
        }
    }
}

impl RunConfig {
    fn load(common: &Common) -> Result<Self> {
        let mut cfg: RunConfig = match &common.config {
            Some(p) => {
                let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
            }
            None => RunConfig::default(),
        };
        if let Some(s) = common.seed {
            cfg.train.seed = s;
            cfg.synth.seed = s;
        }
        Ok(cfg)
    }

    fn apply(&mut self, flags: &ModelFlags) {
        if let Some(v) = flags.variant {
            self.model.variant = v;
        }
        if flags.ada_dyn {
            self.model.ada_dyn = true;
        }
        if flags.no_ada_dyn {
            self.model.ada_dyn = false;
        }
        if flags.stat_cond {
            self.model.stat_cond = true;
        }
        if flags.no_stat_cond {
            self.model.stat_cond = false;
        }
        if let Some(p) = flags.precision {
            self.train.precision = p;
        }
        if flags.deterministic {
            self.train.deterministic = true;
        }
    }

    fn hash(&self) -> String {
        short_hash(serde_json::to_string(self).expect("config serializes").as_bytes())
    }
}

fn short_hash(bytes: &[u8]) -> String {
    Sha256::digest(bytes)[..8].iter().map(|b| format!("{b:02x}")).collect()
}

fn file_hash(path: &Path) -> Result<String> {
    Ok(short_hash(&fs::read(path).with_context(|| format!("reading {}", path.display()))?))
}

struct Provenance {
    command: &'static str,
    config_hash: String,
    corpus_hash: String,
    seed: u64,
}

impl Provenance {
    fn pairs(&self) -> Vec<(&'static str, String)> {
        vec![
            ("command", self.command.to_string()),
            ("config_hash", self.config_hash.clone()),
            ("corpus_hash", self.corpus_hash.clone()),
            ("seed", self.seed.to_string()),
        ]
    }

    fn line(&self) -> String {
        let fields: Vec<String> = self.pairs().into_iter().map(|(k, v)| format!("{k}={v}")).collect();
        format!("# authordyn {}\n", fields.join(" "))
    }
}

fn output(common: &Common, name: &str) -> Result<PathBuf> {
    fs::create_dir_all(&common.out_dir).with_context(|| format!("creating {}", common.out_dir.display()))?;
    Ok(common.out_dir.join(name))
}

fn write_text(common: &Common, name: &str, prov: &Provenance, body: &str) -> Result<PathBuf> {
    let path = output(common, name)?;
    write_atomic(&path, format!("{}{body}", prov.line()).as_bytes()).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

/// `text` without its leading `#` lines.
pub fn strip_header(text: &str) -> &str {
    let mut rest = text;
    while rest.starts_with('#') {
        rest = rest.split_once('\n').map_or("", |(_, r)| r);
    }
    rest
}

fn read_split(path: &Path, corpus: &TokenizedCorpus) -> Result<SplitAssignment> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let split = SplitAssignment::from_text(&text).with_context(|| format!("parsing {}", path.display()))?;
    if split.doc_split.len() != corpus.documents.len() {
        bail!(
            "split {} covers {} documents but the corpus has {}",
            path.display(),
            split.doc_split.len(),
            corpus.documents.len()
        );
    }
    Ok(split)
}

fn read_vocab(path: &Path) -> Result<Vocab> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Vocab::from_text(strip_header(&text)).with_context(|| format!("parsing {}", path.display()))
}

fn read_corpus(path: &Path) -> Result<TokenizedCorpus> {
    TokenizedCorpus::read(path).with_context(|| format!("reading corpus {}", path.display()))
}

enum Loaded {
    F32(Checkpoint<f32>),
    F64(Checkpoint<f64>),
}

fn load_checkpoint(path: &Path) -> Result<Loaded> {
    let ctx = || format!("loading checkpoint {}", path.display());
    Ok(match peek_precision(path).with_context(ctx)? {
        Precision::F32 => Loaded::F32(Checkpoint::load(path).with_context(ctx)?),
        Precision::F64 => Loaded::F64(Checkpoint::load(path).with_context(ctx)?),
    })
}

macro_rules! with_checkpoint {
    ($loaded:expr, |$c:ident| $body:expr) => {
        match $loaded {
            Loaded::F32($c) => $body,
            Loaded::F64($c) => $body,
        }
    };
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, S>(args: I) -> Result<()>
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    execute(Cli::try_parse_from(args)?)
}

pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Prepare(a) => prepare(&a),
        Command::Split(a) => split(&a),
        Command::Synth(a) => synth(&a),
        Command::Train(a) => train(&a),
        Command::Eval(a) => eval(&a),
        Command::Analyze(a) => analyze(&a),
        Command::Generate(a) => generate(&a),
        Command::Seeds(a) => seeds(&a),
    }
}

fn prepare(a: &PrepareArgs) -> Result<()> {
    let mut cfg = RunConfig::load(&a.common)?;
    if let Some(m) = a.min_count {
        cfg.min_count = m;
    }
    let tc = read_corpus(&a.corpus)?;
    let (mask, seed) = match &a.split {
        Some(p) => {
            let s = read_split(p, &tc)?;
            (Some(s.train_mask()), s.seed)
        }
        None => (None, a.common.seed.unwrap_or(0)),
    };
    let corpus = tc.encode(cfg.min_count, mask.as_deref())?;
    let prov = Provenance {
        command: "prepare",
        config_hash: cfg.hash(),
        corpus_hash: file_hash(&a.corpus)?,
        seed,
    };
    write_text(&a.common, "vocab.txt", &prov, &corpus.vocab.to_text())?;
    // Normalized text with every token kept, so later commands re-tokenize
    // to the same sequences.
    write_text(&a.common, "corpus.jsonl", &prov, &tc.encode(1, None)?.to_jsonl())?;
    let stats = corpus.stats();
    let mut body = String::from("t\tyear\tdocs\n");
    for (t, n) in stats.docs_per_timestep.iter().enumerate() {
        body.push_str(&format!("{}\t{}\t{n}\n", t + 1, corpus.year_of(t + 1)));
    }
    write_text(&a.common, "stats.tsv", &prov, &body)?;
    println!(
        "documents {}  authors {}  timesteps {}  tokens {}  vocab {}  skipped_empty {}",
        corpus.documents.len(),
        corpus.num_authors,
        corpus.num_timesteps,
        stats.tokens,
        corpus.vocab.len(),
        tc.skipped_empty
    );
    Ok(())
}

fn split(a: &SplitArgs) -> Result<()> {
    let cfg = RunConfig::load(&a.common)?;
    let seed = a.common.seed.unwrap_or(0);
    let tc = read_corpus(&a.corpus)?;
    let s = make_split(a.task, &tc, seed);
    if let Some(v) = verify_split(&tc, &s).first() {
        bail!("split fails verification: {:?}: {}", v.rule, v.detail);
    }
    let prov = Provenance {
        command: "split",
        config_hash: cfg.hash(),
        corpus_hash: file_hash(&a.corpus)?,
        seed,
    };
    let pairs: Vec<(&str, String)> = prov.pairs().into_iter().filter(|(k, _)| *k != "seed").collect();
    let path = output(&a.common, "split.tsv")?;
    write_atomic(&path, s.to_text(&pairs).as_bytes())?;
    println!(
        "train {}  val {}  test {}",
        s.count(SplitTag::Train),
        s.count(SplitTag::Val),
        s.count(SplitTag::Test)
    );
    Ok(())
}

fn synth(a: &SynthArgs) -> Result<()> {
    let cfg = RunConfig::load(&a.common)?;
    let spec = DriftWorldSpec::from_config(&cfg.synth)?;
    let corpus = generate_corpus(&spec)?;
    let body = corpus.to_jsonl();
    let prov = Provenance {
        command: "synth",
        config_hash: cfg.hash(),
        corpus_hash: short_hash(body.as_bytes()),
        seed: cfg.synth.seed,
    };
    write_text(&a.common, "corpus.jsonl", &prov, &body)?;
    write_text(&a.common, "synth.toml", &prov, &toml::to_string(&cfg.synth)?)?;
    println!("documents {}  vocab {}", corpus.documents.len(), corpus.vocab.len());
    Ok(())
}

fn train_as<T: Storable>(
    corpus: &Corpus,
    split: &SplitAssignment,
    cfg: &RunConfig,
    uniform: bool,
) -> Result<(Checkpoint<T>, TrainLog)> {
    if uniform {
        let dims = ModelDims {
            num_authors: corpus.num_authors,
            num_timesteps: corpus.num_timesteps,
            vocab_size: corpus.vocab.len(),
        };
        let model: Model<T> = Model::uniform(cfg.model.clone(), dims)?;
        let adam = AdamState::new(&model.params);
        let ckpt = Checkpoint {
            model,
            adam,
            iteration: 0,
            vocab: corpus.vocab.clone(),
            split_hash: split.hash(),
            train_config: cfg.train.clone(),
            provenance: String::new(),
        };
        return Ok((ckpt, TrainLog::default()));
    }
    let out = fit::<T>(corpus, split, &cfg.model, &cfg.train)?;
    Ok((out.best, out.log))
}

fn train(a: &TrainArgs) -> Result<()> {
    let mut cfg = RunConfig::load(&a.common)?;
    cfg.apply(&a.model);
    let tc = read_corpus(&a.corpus)?;
    let split = read_split(&a.split, &tc)?;
    let vocab = match &a.vocab {
        Some(p) => read_vocab(p)?,
        None => tc.encode(cfg.min_count, Some(&split.train_mask()))?.vocab,
    };
    let corpus = tc.encode_with(vocab);
    let prov = Provenance {
        command: "train",
        config_hash: cfg.hash(),
        corpus_hash: file_hash(&a.corpus)?,
        seed: cfg.train.seed,
    };
    let provenance = prov.pairs().into_iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(" ");
    let path = output(&a.common, "model.ckpt")?;
    let log = match cfg.train.precision {
        Precision::F32 => {
            let (mut c, log) = train_as::<f32>(&corpus, &split, &cfg, a.uniform_debug)?;
            c.provenance = provenance;
            c.save(&path)?;
            log
        }
        Precision::F64 => {
            let (mut c, log) = train_as::<f64>(&corpus, &split, &cfg, a.uniform_debug)?;
            c.provenance = provenance;
            c.save(&path)?;
            log
        }
    };
    write_text(&a.common, "train_log.tsv", &prov, &log.to_tsv())?;
    write_text(&a.common, "config.toml", &prov, &toml::to_string(&cfg)?)?;
    if let Some(best) = log
        .rows
        .iter()
        .filter(|r| !r.val_micro_ppl.is_nan())
        .min_by(|x, y| x.val_micro_ppl.total_cmp(&y.val_micro_ppl))
    {
        println!("best val micro ppl {:.4} at iteration {}", best.val_micro_ppl, best.iter);
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn eval(a: &EvalArgs) -> Result<()> {
    let cfg = RunConfig::load(&a.common)?;
    let tc = read_corpus(&a.corpus)?;
    let split = read_split(&a.split, &tc)?;
    let loaded = load_checkpoint(&a.checkpoint)?;
    let report = with_checkpoint!(&loaded, |c| {
        c.verify(&c.vocab, Some(&split))?;
        let corpus = tc.encode_with(c.vocab.clone());
        evaluate(&c.model, &corpus, &split, a.on, !a.deterministic)?
    });
    let prov = Provenance {
        command: "eval",
        config_hash: cfg.hash(),
        corpus_hash: file_hash(&a.corpus)?,
        seed: split.seed,
    };
    write_text(&a.common, "report.tsv", &prov, &report.to_text())?;
    if let Some(b) = &a.baseline {
        let text = fs::read_to_string(b).with_context(|| format!("reading {}", b.display()))?;
        let baseline = EvalReport::from_text(strip_header(&text)).with_context(|| format!("parsing {}", b.display()))?;
        write_text(&a.common, "gain.tsv", &prov, &gain_tsv(&gain_series(&report, &baseline)?))?;
    }
    println!(
        "{} {} micro {:.4}  macro {:.4}  words {:.4}",
        report.variant, a.on.as_str(), report.micro_ppl, report.macro_ppl, report.word_ppl
    );
    Ok(())
}

fn analyze(a: &AnalyzeArgs) -> Result<()> {
    let cfg = RunConfig::load(&a.common)?;
    let tc = read_corpus(&a.corpus)?;
    let loaded = load_checkpoint(&a.checkpoint)?;
    let (traj, corpus) = with_checkpoint!(&loaded, |c| {
        if c.model.dims.num_authors != tc.author_names.len() {
            bail!(
                "checkpoint has {} authors, corpus {}",
                c.model.dims.num_authors,
                tc.author_names.len()
            );
        }
        (TrajectorySet::from_model(&c.model, tc.author_names.clone())?, tc.encode_with(c.vocab.clone()))
    });
    let prov = Provenance {
        command: "analyze",
        config_hash: cfg.hash(),
        corpus_hash: file_hash(&a.corpus)?,
        seed: 0,
    };
    write_text(&a.common, "trajectories.tsv", &prov, &traj.to_tsv())?;
    let (pca, proj) = trajectory_projection_tsv(&traj)?;
    let proj = format!("# explained {} {}\n{proj}", pca.explained[0], pca.explained[1]);
    write_text(&a.common, "projection.tsv", &prov, &proj)?;
    if traj.num_authors() >= 2 {
        write_text(&a.common, "avg_cosine.tsv", &prov, &series_tsv(&avg_cosine_series(&traj)?))?;
    }
    let mut selfsim = String::new();
    for (i, name) in traj.author_names.iter().enumerate() {
        for (t, c) in self_similarity(&traj, i)? {
            selfsim.push_str(&format!("{name}\t{t}\t{c}\n"));
        }
    }
    write_text(&a.common, "self_similarity.tsv", &prov, &selfsim)?;

    let restrict: Option<Vec<usize>> = a.restrict_top.map(|n| {
        let counts = corpus.stats().docs_per_author;
        let mut ids: Vec<usize> = (0..counts.len()).collect();
        ids.sort_by(|&x, &y| counts[y].cmp(&counts[x]).then(x.cmp(&y)));
        ids.truncate(n);
        ids
    });
    let pool = restrict.as_deref().map_or(traj.num_authors(), <[usize]>::len);
    let k = a.k.min(pool);
    for (dir, name) in [(Direction::Most, "movers_most.tsv"), (Direction::Least, "movers_least.tsv")] {
        let m = top_movers(&traj, k, dir, restrict.as_deref())?;
        write_text(&a.common, name, &prov, &movers_tsv(&traj, &m))?;
    }
    if corpus.documents.iter().any(|d| !d.labels.is_empty()) {
        write_text(&a.common, "label_entropy.tsv", &prov, &series_tsv(&label_entropy_series(&corpus)?))?;
        let mut dom = String::new();
        for (i, name) in corpus.author_names.iter().enumerate() {
            for t in 1..=corpus.num_timesteps {
                if let Some(l) = dominant_label(&corpus, i, t) {
                    dom.push_str(&format!("{name}\t{t}\t{l}\n"));
                }
            }
        }
        write_text(&a.common, "dominant_labels.tsv", &prov, &dom)?;
    }
    println!("wrote analysis for {} authors to {}", traj.num_authors(), a.common.out_dir.display());
    Ok(())
}

fn generate(a: &GenerateArgs) -> Result<()> {
    let cfg = RunConfig::load(&a.common)?;
    let loaded = load_checkpoint(&a.checkpoint)?;
    let author = match a.author.parse::<usize>() {
        Ok(id) => id,
        Err(_) => {
            let path = a.corpus.as_ref().ok_or_else(|| anyhow!("author names need --corpus"))?;
            let tc = read_corpus(path)?;
            tc.author_names
                .iter()
                .position(|n| *n == a.author)
                .ok_or_else(|| anyhow!("unknown author {:?}", a.author))?
        }
    };
    let prefix = normalize_and_tokenize(&a.prefix, true);
    let prefix: Vec<&str> = prefix.iter().map(String::as_str).collect();
    let table = with_checkpoint!(&loaded, |c| {
        let hyps = beam_search(&c.model, &c.vocab, author, a.time, &prefix, a.beam, a.max_len)?;
        hypotheses_tsv(&c.vocab, &hyps)
    });
    let prov = Provenance {
        command: "generate",
        config_hash: cfg.hash(),
        corpus_hash: file_hash(&a.checkpoint)?,
        seed: 0,
    };
    write_text(&a.common, "beams.tsv", &prov, &table)?;
    print!("{table}");
    Ok(())
}

fn label_for(m: &ModelConfig) -> String {
    let mut s = m.variant.to_string();
    if m.variant == Variant::Ours {
        if !m.ada_dyn {
            s.push_str("-noada");
        }
        if !m.stat_cond {
            s.push_str("-nostat");
        }
    }
    s
}

fn seeds(a: &SeedsArgs) -> Result<()> {
    let mut cfg = RunConfig::load(&a.common)?;
    cfg.apply(&a.model);
    if a.variants.is_empty() {
        bail!("no variants given");
    }
    let tc = read_corpus(&a.corpus)?;
    let models: Vec<(String, ModelConfig)> = a
        .variants
        .iter()
        .map(|&v| {
            let m = ModelConfig { variant: v, ..cfg.model.clone() };
            (label_for(&m), m)
        })
        .collect();
    let base = cfg.train.seed;
    let seeds: Vec<u64> = (base..base + a.num_seeds).collect();
    let summaries: Vec<SeedSummary> = run_seeds_with(&models, &cfg.train, &seeds, |seed| {
        let split = make_split(a.task, &tc, seed);
        Ok((tc.encode(cfg.min_count, Some(&split.train_mask()))?, split))
    })?;
    let prov = Provenance {
        command: "seeds",
        config_hash: cfg.hash(),
        corpus_hash: file_hash(&a.corpus)?,
        seed: base,
    };
    let table = SeedSummary::table(&summaries);
    write_text(&a.common, "seeds.tsv", &prov, &table)?;
    let mut runs = String::from("model\tseed\tmicro_ppl\tmacro_ppl\n");
    for s in &summaries {
        for r in &s.reports {
            runs.push_str(&format!("{}\t{}\t{}\t{}\n", s.label, r.seed, r.micro_ppl, r.macro_ppl));
        }
    }
    write_text(&a.common, "runs.tsv", &prov, &runs)?;
    print!("{table}");
    Ok(())
}
