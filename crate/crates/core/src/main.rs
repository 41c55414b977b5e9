use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use charrecon::eval::{eval_analogy, eval_similarity, nearest_neighbors, AnalogyDataset, SimilarityDataset};
use charrecon::io::{
    generate_synthetic_teacher, load_checkpoint, load_tagger, read_analogy, read_embeddings, read_similarity,
    read_tagged_corpus, round_tagger, save_checkpoint, save_tagger, write_atomic, write_synthetic, Checkpoint,
    Coherence, SyntheticSpec,
};
use charrecon::reconstruct::DEFAULT_CLIP_NORM;
use charrecon::rng::{derive, stream};
use charrecon::tagger::{
    count_lookup_params, grid_search, linspace, tag_accuracy, train_tagger, InputMode, TaggerConfig, TaggerModel,
};
use charrecon::{
    build_char_vocab, train_reconstruction, CharEncoder, DistanceMetric, EmbeddingTable, Error, Result, TrainConfig,
};

#[derive(Parser)]
#[command(name = "charrecon", version, about = "Character-level reconstruction of word embeddings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a character encoder to reconstruct teacher embeddings.
    TrainReconstruct(TrainReconstruct),
    /// Spearman correlation on word-similarity datasets.
    EvalSim(EvalSim),
    /// 3CosMul accuracy on analogy questions.
    EvalAnalogy(EvalAnalogy),
    /// Nearest neighbors of a word by cosine similarity.
    Nn(Nn),
    /// Train a part-of-speech tagger.
    TrainTagger(TrainTagger),
    /// Tag a file of tokens with a trained tagger.
    Tag(Tag),
    /// Report the lookup-parameter count of a tagger.
    ReportParams(ReportParams),
    /// Generate a synthetic teacher with similarity and analogy gold files.
    GenTeacher(GenTeacher),
    /// Grid search over learning rate and dropout for the tagger.
    GridSearch(GridSearch),
}

#[derive(Args)]
struct Source {
    /// Encoder checkpoint.
    #[arg(long, conflicts_with = "embeddings", required_unless_present = "embeddings")]
    ckpt: Option<PathBuf>,
    /// Embedding file in "word v1 v2 ..." format.
    #[arg(long)]
    embeddings: Option<PathBuf>,
}

#[derive(Args)]
struct TrainReconstruct {
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long, default_value = "d2")]
    metric: DistanceMetric,
    #[arg(long, default_value_t = 10)]
    epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 0.0)]
    dropout: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Add a highway gate after the rectified projection.
    #[arg(long)]
    highway: bool,
    #[arg(long, default_value_t = 1)]
    batch_size: usize,
    #[arg(long, default_value_t = DEFAULT_CLIP_NORM)]
    clip_norm: f64,
    #[arg(long)]
    out: PathBuf,
    /// Also write the per-epoch loss trace as TSV.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct EvalSim {
    #[command(flatten)]
    source: Source,
    /// Comma-separated similarity files.
    #[arg(long, value_delimiter = ',', required = true)]
    datasets: Vec<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalAnalogy {
    #[command(flatten)]
    source: Source,
    #[arg(long)]
    questions: PathBuf,
    /// Extra candidate words (one per line) when evaluating a checkpoint.
    #[arg(long)]
    vocab: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Nn {
    #[command(flatten)]
    source: Source,
    #[arg(long)]
    word: String,
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// Candidate words (one per line); required with --ckpt.
    #[arg(long)]
    vocab: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct TaggerArgs {
    #[arg(long)]
    mode: InputMode,
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    dev: PathBuf,
    /// Pre-trained word vectors, for mode full+emb.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Reconstruction checkpoint, for mode chard.
    #[arg(long)]
    recon_ckpt: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    epochs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Word encoder dimension (ignored for chard).
    #[arg(long, default_value_t = 16)]
    dim: usize,
    /// Word lookup dimension (ignored for full+emb).
    #[arg(long, default_value_t = 16)]
    word_dim: usize,
    #[arg(long)]
    highway: bool,
    /// Keep the character encoder fixed during training.
    #[arg(long)]
    freeze_chars: bool,
    #[arg(long, default_value_t = 1)]
    batch_size: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainTagger {
    #[command(flatten)]
    common: TaggerArgs,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 0.0)]
    dropout: f64,
}

#[derive(Args)]
struct GridSearch {
    #[command(flatten)]
    common: TaggerArgs,
    /// Axes as name=start:end:count.
    #[arg(long, default_value = "lr=0.0001:0.0005:5,dropout=0.1:0.5:5")]
    grid: String,
}

#[derive(Args)]
struct Tag {
    #[arg(long)]
    model: PathBuf,
    /// Tokens one per line (a second tab-separated column is ignored),
    /// sentences separated by blank lines.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportParams {
    #[arg(long)]
    model: PathBuf,
}

#[derive(Args)]
struct GenTeacher {
    #[arg(long, default_value = "coherent")]
    mode: Coherence,
    #[arg(long, default_value_t = 200)]
    vocab: usize,
    #[arg(long, default_value_t = 16)]
    dim: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Outlier rate in noisy mode.
    #[arg(long, default_value_t = 0.1)]
    noise_rate: f64,
    #[arg(long)]
    out_dir: PathBuf,
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => write_atomic(p, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn read_word_list(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let mut words: Vec<String> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let fields: Vec<&str> = line.split_whitespace().collect();
        // An embedding-file header is not a word.
        if i == 0 && fields.len() == 2 && fields.iter().all(|f| f.parse::<usize>().is_ok()) {
            continue;
        }
        if let Some(w) = fields.first() {
            words.push(w.to_string());
        }
    }
    Ok(words)
}

fn dedup(words: impl IntoIterator<Item = String>) -> Vec<String> {
    let mut seen = std::collections::HashSet::new();
    words.into_iter().filter(|w| seen.insert(w.clone())).collect()
}

/// The table to evaluate: the file as-is, or the checkpoint's encodings of
/// `words`.
fn source_table(source: &Source, words: Vec<String>) -> Result<EmbeddingTable> {
    match (&source.ckpt, &source.embeddings) {
        (Some(ckpt), _) => load_checkpoint(ckpt)?.encoder.encode_vocab(&dedup(words)),
        (None, Some(path)) => read_embeddings(path),
        (None, None) => Err(Error::InvalidArgument("give --ckpt or --embeddings".into())),
    }
}

fn train_reconstruct(a: TrainReconstruct) -> Result<()> {
    let teacher = read_embeddings(&a.embeddings)?;
    let config = TrainConfig {
        metric: a.metric,
        epochs: a.epochs,
        learning_rate: a.lr,
        dropout: a.dropout,
        seed: a.seed,
        use_highway: a.highway,
        batch_size: a.batch_size,
        clip_norm: a.clip_norm,
    };
    config.validate()?;
    let vocab = build_char_vocab(teacher.words())?;
    let init = CharEncoder::random(vocab, teacher.dim(), a.highway, &mut derive(a.seed, stream::INIT, 0));
    info!(
        "reconstructing {} words of dimension {} with {}",
        teacher.len(),
        teacher.dim(),
        a.metric
    );
    let (encoder, trace) = train_reconstruction(&config, &teacher, &init)?;
    save_checkpoint(&a.out, &Checkpoint::new(encoder, Some(config)))?;
    if let Some(p) = &a.trace {
        write_atomic(p, trace.to_tsv().as_bytes())?;
    }
    println!("initial_loss\t{}\nfinal_loss\t{}", trace.initial, trace.final_loss());
    Ok(())
}

fn eval_sim(a: EvalSim) -> Result<()> {
    let datasets = a.datasets.iter().map(|p| read_similarity(p)).collect::<Result<Vec<SimilarityDataset>>>()?;
    let words = datasets.iter().flat_map(|d| d.words().map(str::to_string)).collect();
    let table = source_table(&a.source, words)?;
    emit(&eval_similarity(&table, &datasets)?.to_tsv(), a.out.as_deref())
}

fn eval_analogy_cmd(a: EvalAnalogy) -> Result<()> {
    let questions: AnalogyDataset = read_analogy(&a.questions)?;
    let mut words: Vec<String> = questions
        .questions
        .iter()
        .flat_map(|q| q.words().map(str::to_string))
        .collect();
    if let Some(v) = &a.vocab {
        words.extend(read_word_list(v)?);
    }
    let table = source_table(&a.source, words)?;
    emit(&eval_analogy(&table, &questions)?.to_tsv(), a.out.as_deref())
}

fn nn(a: Nn) -> Result<()> {
    let mut words = match &a.vocab {
        Some(v) => read_word_list(v)?,
        None if a.source.ckpt.is_some() => {
            return Err(Error::InvalidArgument("--vocab is required with --ckpt".into()))
        }
        None => Vec::new(),
    };
    words.push(a.word.clone());
    let table = source_table(&a.source, words)?;
    let mut out = String::from("rank\tword\tcosine\n");
    for (i, (w, c)) in nearest_neighbors(&table, &a.word, a.k)?.into_iter().enumerate() {
        out.push_str(&format!("{}\t{w}\t{c}\n", i + 1));
    }
    emit(&out, None)
}

fn tagger_inputs(a: &TaggerArgs) -> Result<(Option<EmbeddingTable>, Option<CharEncoder>)> {
    let pretrained = a.embeddings.as_deref().map(read_embeddings).transpose()?;
    let recon = match &a.recon_ckpt {
        Some(p) => Some(load_checkpoint(p)?.encoder),
        None => None,
    };
    Ok((pretrained, recon))
}

fn tagger_config(a: &TaggerArgs, lr: f64, dropout: f64) -> TaggerConfig {
    TaggerConfig {
        epochs: a.epochs,
        learning_rate: lr,
        dropout,
        seed: a.seed,
        batch_size: a.batch_size,
        dim: a.dim,
        word_dim: a.word_dim,
        use_highway: a.highway,
        freeze_chars: a.freeze_chars,
        ..Default::default()
    }
}

fn save_final(model: &mut TaggerModel, out: &Path) -> Result<()> {
    round_tagger(model);
    save_tagger(out, model)
}

fn train_tagger_cmd(a: TrainTagger) -> Result<()> {
    let c = &a.common;
    let train = read_tagged_corpus(&c.train)?;
    let dev = read_tagged_corpus(&c.dev)?;
    let (pretrained, recon) = tagger_inputs(c)?;
    let config = tagger_config(c, a.lr, a.dropout);
    let (mut model, trace) = train_tagger(&config, &train, c.mode, pretrained.as_ref(), recon.as_ref())?;
    save_final(&mut model, &c.out)?;
    let mut out = String::from("epoch\ttrain_loglik_per_token\n");
    out.push_str(&format!("0\t{}\n", trace.initial));
    for (i, ll) in trace.epochs.iter().enumerate() {
        out.push_str(&format!("{}\t{ll}\n", i + 1));
    }
    out.push_str(&format!("dev_accuracy\t{}\n", tag_accuracy(&model, &dev)?));
    emit(&out, None)
}

fn parse_grid(spec: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let bad = || Error::InvalidArgument(format!("grid {spec:?}: expected lr=a:b:n,dropout=a:b:n"));
    let mut lr = None;
    let mut dropout = None;
    for axis in spec.split(',') {
        let (name, range) = axis.split_once('=').ok_or_else(bad)?;
        let parts: Vec<&str> = range.split(':').collect();
        if parts.len() != 3 {
            return Err(bad());
        }
        let lo: f64 = parts[0].parse().map_err(|_| bad())?;
        let hi: f64 = parts[1].parse().map_err(|_| bad())?;
        let n: usize = parts[2].parse().map_err(|_| bad())?;
        let values = linspace(lo, hi, n)?;
        match name.trim() {
            "lr" => lr = Some(values),
            "dropout" => dropout = Some(values),
            _ => return Err(bad()),
        }
    }
    Ok((lr.ok_or_else(bad)?, dropout.ok_or_else(bad)?))
}

fn grid_search_cmd(a: GridSearch) -> Result<()> {
    let c = &a.common;
    let (lrs, dropouts) = parse_grid(&a.grid)?;
    let train = read_tagged_corpus(&c.train)?;
    let dev = read_tagged_corpus(&c.dev)?;
    let (pretrained, recon) = tagger_inputs(c)?;
    let base = tagger_config(c, lrs[0], dropouts[0]);
    let mut result = grid_search(&base, &lrs, &dropouts, &train, &dev, c.mode, pretrained.as_ref(), recon.as_ref())?;
    save_final(&mut result.model, &c.out)?;
    let best = result.best_cell();
    let mut out = result.to_tsv();
    out.push_str(&format!("best\t{}\t{}\t{}\n", best.learning_rate, best.dropout, best.dev_accuracy));
    emit(&out, None)
}

fn read_token_sentences(path: &Path) -> Result<Vec<Vec<String>>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let mut sentences = Vec::new();
    let mut current = Vec::new();
    for line in text.lines() {
        match line.split('\t').next().map(str::trim) {
            Some(tok) if !tok.is_empty() => current.push(tok.to_string()),
            _ => {
                if !current.is_empty() {
                    sentences.push(std::mem::take(&mut current));
                }
            }
        }
    }
    if !current.is_empty() {
        sentences.push(current);
    }
    Ok(sentences)
}

fn tag(a: Tag) -> Result<()> {
    let model = load_tagger(&a.model)?;
    let mut out = String::new();
    for sentence in read_token_sentences(&a.input)? {
        for (tok, tag) in sentence.iter().zip(model.tag(&sentence)?) {
            out.push_str(&format!("{tok}\t{tag}\n"));
        }
        out.push('\n');
    }
    emit(&out, a.out.as_deref())
}

fn report_params(a: ReportParams) -> Result<()> {
    let model = load_tagger(&a.model)?;
    let words = model.words.as_ref().map_or(0, |w| w.len());
    let chars = model.char_vocab().len();
    println!("mode\tword_types\tchar_types\tlookup_params");
    println!("{}\t{words}\t{chars}\t{}", model.mode, count_lookup_params(&model));
    Ok(())
}

fn gen_teacher(a: GenTeacher) -> Result<()> {
    let spec = SyntheticSpec {
        noise_rate: a.noise_rate,
        ..SyntheticSpec::new(a.seed, a.vocab, a.dim, a.mode)
    };
    let teacher = generate_synthetic_teacher(&spec)?;
    write_synthetic(&a.out_dir, &teacher)?;
    println!(
        "words\t{}\nsimilarity_pairs\t{}\nanalogy_questions\t{}\noutliers\t{}",
        teacher.table.len(),
        teacher.similarity.pairs.len(),
        teacher.analogy.questions.len(),
        teacher.outliers.iter().filter(|&&o| o).count()
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::TrainReconstruct(a) => train_reconstruct(a),
        Command::EvalSim(a) => eval_sim(a),
        Command::EvalAnalogy(a) => eval_analogy_cmd(a),
        Command::Nn(a) => nn(a),
        Command::TrainTagger(a) => train_tagger_cmd(a),
        Command::Tag(a) => tag(a),
        Command::ReportParams(a) => report_params(a),
        Command::GenTeacher(a) => gen_teacher(a),
        Command::GridSearch(a) => grid_search_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
