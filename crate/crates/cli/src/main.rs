use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use serde_json::{json, Value};

use meemi::dictionaries::join_on_pivot;
use meemi::embeddings::parse_recipe;
use meemi::evaluation::{
    hypernym_pairs, knn, load_hypernym_data, load_similarity_dataset, HypernymTrainingSet,
    ReportMetadata, HYPERNYM_K,
};
use meemi::harness::{
    generate_pair, run_ablation, split_dictionary, AblationConfig, Distortion, SynthConfig,
};
use meemi::{
    align_bilingual, apply_map, eval_dict_induction, eval_hypernym, eval_word_similarity,
    load_dictionary, load_embeddings, load_frequencies, load_map, meemi_bilingual,
    meemi_multilingual, save_dictionary, save_embeddings, save_map, subsample,
    train_hypernym_map, EmbeddingSpace, EvalReport, FrequencyScale, LinearMap, LoadOptions,
    MeemiOptions, MultiSpace, TranslationDictionary,
};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

/// Align monolingual word embeddings and fine-tune them towards a shared space.
#[derive(Parser, Debug)]
#[command(name = "meemi", version, propagate_version = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Orthogonally align a source space to a target space.
    Align(AlignArgs),
    /// Fine-tune aligned spaces with unconstrained least-squares maps.
    Meemi(MeemiArgs),
    /// Score spaces on dictionary induction, word similarity or hypernym discovery.
    Eval(EvalArgs),
    /// Print the nearest target words of a source word.
    Translate(TranslateArgs),
    /// Generate a synthetic space pair with its gold dictionary.
    Synth(SynthArgs),
    /// Measure the fine-tuning gain across training dictionary sizes.
    Ablate(AblateArgs),
}

#[derive(Args, Debug)]
struct LoadArgs {
    /// Read at most this many vectors per embedding file.
    #[arg(long)]
    limit: Option<usize>,
    /// Lowercase embedding and dictionary tokens, keeping the first occurrence.
    #[arg(long)]
    lowercase: bool,
}

impl LoadArgs {
    fn options(&self) -> LoadOptions {
        LoadOptions {
            limit: self.limit,
            lowercase: self.lowercase,
        }
    }
}

#[derive(Args, Debug)]
struct AlignArgs {
    #[arg(long)]
    src: PathBuf,
    #[arg(long)]
    tgt: PathBuf,
    /// Training dictionary, one `src tgt` pair per line.
    #[arg(long)]
    dict: PathBuf,
    #[arg(long, default_value = "src")]
    src_lang: String,
    #[arg(long, default_value = "tgt")]
    tgt_lang: String,
    /// Normalization recipe applied to both spaces, e.g. `unit,center,unit` or `none`.
    #[arg(long, default_value = "unit,center,unit")]
    normalize: String,
    /// Train on a seeded random subset of this many pairs.
    #[arg(long)]
    train_size: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    load: LoadArgs,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FreqScaleArg {
    Raw,
    PerMillion,
}

#[derive(Args, Debug)]
struct MeemiArgs {
    /// Aligned space as `lang=path`; repeat for every language.
    #[arg(long = "space", value_name = "LANG=PATH", required = true)]
    spaces: Vec<String>,
    /// Dictionary file. Either one file with a column per `--space` (in
    /// order), or `lang=path` bilingual files pairing each language with the hub.
    #[arg(long = "dict", value_name = "[LANG=]PATH", required = true)]
    dicts: Vec<String>,
    /// Hub language; required with more than two languages.
    #[arg(long)]
    hub: Option<String>,
    /// Orthogonally align every non-hub space to the hub first.
    #[arg(long)]
    align: bool,
    /// Frequency-weighted targets (two languages only).
    #[arg(long)]
    weighted: bool,
    /// Frequency file as `lang=path`, `word<TAB>count` per line.
    #[arg(long = "freq", value_name = "LANG=PATH")]
    freqs: Vec<String>,
    #[arg(long, value_enum, default_value = "raw")]
    freq_scale: FreqScaleArg,
    /// Ridge penalty; 0 gives plain least squares.
    #[arg(long, default_value_t = 0.0)]
    ridge: f64,
    #[arg(long, default_value = "none")]
    normalize: String,
    #[arg(long)]
    train_size: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    load: LoadArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum TaskArg {
    Dict,
    Sim,
    Hyper,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long, value_enum)]
    task: TaskArg,
    /// Source (or query) space.
    #[arg(long)]
    src: PathBuf,
    /// Target (or candidate) space; defaults to the source space.
    #[arg(long)]
    tgt: Option<PathBuf>,
    #[arg(long, default_value = "src")]
    src_lang: String,
    #[arg(long, default_value = "tgt")]
    tgt_lang: String,
    /// Test dictionary (dict task).
    #[arg(long)]
    dict: Option<PathBuf>,
    /// Similarity dataset, `word_a<TAB>word_b<TAB>score` (sim task).
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Hypernym training data, `term<TAB>hypernym...` (hyper task).
    #[arg(long)]
    train: Option<PathBuf>,
    /// Hypernym test data (hyper task).
    #[arg(long)]
    test: Option<PathBuf>,
    /// Cutoffs: P@k values for dict (default 1,5,10), retrieval depth for hyper (default 15).
    #[arg(long, value_delimiter = ',')]
    k: Vec<usize>,
    /// Ridge penalty of the hypernym map.
    #[arg(long, default_value_t = 0.0)]
    ridge: f64,
    #[arg(long, default_value = "none")]
    normalize: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the JSON report here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Standard output format.
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    #[command(flatten)]
    load: LoadArgs,
}

#[derive(Args, Debug)]
struct TranslateArgs {
    /// Word to translate.
    word: String,
    #[arg(long)]
    src: PathBuf,
    #[arg(long)]
    tgt: PathBuf,
    /// Map applied to the source vector before retrieval.
    #[arg(long)]
    map: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    k: usize,
    #[command(flatten)]
    load: LoadArgs,
}

#[derive(Args, Debug)]
struct SynthSpec {
    #[arg(long, default_value_t = 2000)]
    vocab_size: usize,
    #[arg(long, default_value_t = 50)]
    dim: usize,
    #[arg(long, default_value_t = 0.02)]
    noise: f64,
    /// `orthogonal` or `diag-scaling`.
    #[arg(long, default_value = "diag-scaling")]
    distortion: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl SynthSpec {
    fn config(&self) -> Result<SynthConfig, CliError> {
        let config = SynthConfig {
            vocab_size: self.vocab_size,
            dim: self.dim,
            noise_sigma: self.noise,
            distortion: self.distortion.parse::<Distortion>()?,
            seed: self.seed,
        };
        config.validate()?;
        Ok(config)
    }
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[command(flatten)]
    spec: SynthSpec,
    /// Fraction of the gold pairs held out as test.tsv.
    #[arg(long, default_value_t = 0.2)]
    test_fraction: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct AblateArgs {
    #[command(flatten)]
    spec: SynthSpec,
    /// Training dictionary sizes.
    #[arg(long, value_delimiter = ',', default_value = "100,1000")]
    sizes: Vec<usize>,
    /// Trials per size; trial t uses seed + t.
    #[arg(long, default_value_t = 5)]
    trials: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Core(meemi::Error),
}

impl From<meemi::Error> for CliError {
    fn from(e: meemi::Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Core(e) if e.is_numeric() => EXIT_NUMERIC,
            CliError::Core(_) => EXIT_DATA,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Core(meemi::Error::Invalid(msg.into()))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Align(a) => cmd_align(&a),
        Command::Meemi(a) => cmd_meemi(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::Translate(a) => cmd_translate(&a),
        Command::Synth(a) => cmd_synth(&a),
        Command::Ablate(a) => cmd_ablate(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("meemi: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

/// Fails fast on missing inputs so no work is done before a bad path is reported.
fn check_inputs<'a>(paths: impl IntoIterator<Item = &'a Path>) -> CliResult {
    for p in paths {
        if !p.is_file() {
            return Err(invalid(format!("input file not found: {}", p.display())));
        }
    }
    Ok(())
}

fn prepare_out_dir(dir: &Path) -> CliResult {
    fs::create_dir_all(dir).map_err(|source| {
        CliError::Core(meemi::Error::Io {
            path: dir.to_owned(),
            source,
        })
    })
}

fn write_text(path: &Path, text: &str) -> CliResult {
    fs::write(path, text).map_err(|source| {
        CliError::Core(meemi::Error::Io {
            path: path.to_owned(),
            source,
        })
    })
}

fn write_json(path: &Path, value: &Value) -> CliResult {
    let mut text = serde_json::to_string_pretty(value).expect("JSON values serialize");
    text.push('\n');
    write_text(path, &text)
}

/// Splits `lang=path`.
fn split_pair(arg: &str, flag: &str) -> CliResult<(String, PathBuf)> {
    match arg.split_once('=') {
        Some((lang, path)) if !lang.is_empty() && !path.is_empty() => {
            Ok((lang.to_owned(), PathBuf::from(path)))
        }
        _ => Err(usage(format!("{flag} expects LANG=PATH, got `{arg}`"))),
    }
}

fn load_space(path: &Path, lang: &str, load: &LoadArgs, recipe: &str) -> CliResult<EmbeddingSpace> {
    let steps = parse_recipe(recipe)?;
    let space = load_embeddings(path, lang, load.options())?;
    info!("loaded {} vectors of dimension {} from {}", space.len(), space.dim(), path.display());
    Ok(space.normalize(&steps)?)
}

fn load_dict(path: &Path, langs: &[String], load: &LoadArgs) -> CliResult<TranslationDictionary> {
    let dict = load_dictionary(path, langs)?;
    if !load.lowercase {
        return Ok(dict);
    }
    let tuples = dict
        .tuples()
        .iter()
        .map(|t| t.iter().map(|w| w.to_lowercase()).collect())
        .collect();
    Ok(TranslationDictionary::new(langs.to_vec(), tuples)?)
}

fn maybe_subsample(dict: TranslationDictionary, size: Option<usize>, seed: u64) -> CliResult<TranslationDictionary> {
    match size {
        Some(n) => Ok(subsample(&dict, n, seed)?),
        None => Ok(dict),
    }
}

fn cmd_align(a: &AlignArgs) -> CliResult {
    check_inputs([a.src.as_path(), a.tgt.as_path(), a.dict.as_path()])?;
    if a.src_lang == a.tgt_lang {
        return Err(usage("--src-lang and --tgt-lang must differ"));
    }
    let src = load_space(&a.src, &a.src_lang, &a.load, &a.normalize)?;
    let tgt = load_space(&a.tgt, &a.tgt_lang, &a.load, &a.normalize)?;
    let dict = load_dict(&a.dict, &[a.src_lang.clone(), a.tgt_lang.clone()], &a.load)?;
    let dict = maybe_subsample(dict, a.train_size, a.seed)?;
    let aligned = align_bilingual(&src, &tgt, &dict)?;

    prepare_out_dir(&a.out)?;
    save_map(&aligned.fit.map, a.out.join(format!("{}.map", a.src_lang)))?;
    save_embeddings(&aligned.aligned_src, a.out.join(format!("{}.vec", a.src_lang)))?;
    save_embeddings(&tgt, a.out.join(format!("{}.vec", a.tgt_lang)))?;
    let summary = json!({
        "command": "align",
        "src_lang": a.src_lang,
        "tgt_lang": a.tgt_lang,
        "normalize": a.normalize,
        "seed": a.seed,
        "train_size": a.train_size,
        "pairs_used": aligned.fit.map.trained_on(),
        "skipped_oov": aligned.skipped_oov,
        "rank_deficient": aligned.fit.rank_deficient,
    });
    write_json(&a.out.join("align.json"), &summary)?;
    eprintln!(
        "aligned {} -> {} on {} pairs ({} skipped as OOV)",
        a.src_lang,
        a.tgt_lang,
        aligned.fit.map.trained_on(),
        aligned.skipped_oov
    );
    Ok(())
}

fn cmd_meemi(a: &MeemiArgs) -> CliResult {
    let spaces: Vec<(String, PathBuf)> =
        a.spaces.iter().map(|s| split_pair(s, "--space")).collect::<CliResult<_>>()?;
    let freqs: BTreeMap<String, PathBuf> =
        a.freqs.iter().map(|s| split_pair(s, "--freq")).collect::<CliResult<_>>()?;
    let langs: Vec<String> = spaces.iter().map(|(l, _)| l.clone()).collect();
    if langs.len() < 2 {
        return Err(usage("meemi needs at least two --space arguments"));
    }
    if (1..langs.len()).any(|i| langs[..i].contains(&langs[i])) {
        return Err(usage("each --space language may appear only once"));
    }
    let multilingual = langs.len() > 2;
    if a.weighted && multilingual {
        return Err(usage("--weighted is only available with two languages"));
    }
    let hub = match (&a.hub, multilingual) {
        (Some(h), _) if !langs.contains(h) => {
            return Err(usage(format!("hub `{h}` is not among the --space languages")))
        }
        (Some(h), _) => h.clone(),
        (None, true) => return Err(usage("--hub is required with more than two languages")),
        (None, false) => langs[1].clone(),
    };
    if a.weighted && langs.iter().any(|l| !freqs.contains_key(l)) {
        return Err(usage("--weighted needs a --freq file for every language"));
    }
    if let Some(l) = freqs.keys().find(|l| !langs.contains(l)) {
        return Err(usage(format!("--freq language `{l}` has no --space")));
    }

    // Dictionaries: a single file with one column per space, or bilingual
    // `lang=path` files against the hub.
    let keyed = a.dicts.iter().any(|d| d.contains('='));
    let dict_files: Vec<(Option<String>, PathBuf)> = if keyed {
        a.dicts
            .iter()
            .map(|d| split_pair(d, "--dict").map(|(l, p)| (Some(l), p)))
            .collect::<CliResult<_>>()?
    } else if a.dicts.len() == 1 {
        vec![(None, PathBuf::from(&a.dicts[0]))]
    } else {
        return Err(usage("several --dict files must be given as LANG=PATH"));
    };

    let mut inputs: Vec<&Path> = spaces.iter().map(|(_, p)| p.as_path()).collect();
    inputs.extend(dict_files.iter().map(|(_, p)| p.as_path()));
    inputs.extend(freqs.values().map(PathBuf::as_path));
    check_inputs(inputs)?;

    let dict = if keyed {
        let mut bis = Vec::new();
        for (lang, path) in &dict_files {
            let lang = lang.as_deref().expect("keyed");
            if lang == hub || !langs.iter().any(|l| l == lang) {
                return Err(usage(format!("--dict language `{lang}` must be a non-hub --space language")));
            }
            bis.push(load_dict(path, &[lang.to_owned(), hub.clone()], &a.load)?);
        }
        if bis.len() != langs.len() - 1 {
            return Err(usage("give one LANG=PATH --dict for every non-hub language"));
        }
        if bis.len() == 1 {
            bis.pop().expect("one dictionary")
        } else {
            join_on_pivot(&bis)?
        }
    } else {
        load_dict(&dict_files[0].1, &langs, &a.load)?
    };
    let dict = maybe_subsample(dict, a.train_size, a.seed)?;

    let mut loaded = Vec::new();
    for (lang, path) in &spaces {
        let mut space = load_space(path, lang, &a.load, &a.normalize)?;
        if let Some(f) = freqs.get(lang) {
            space = load_frequencies(&space, f)?;
        }
        loaded.push(space);
    }
    if a.align {
        let hub_space = loaded.iter().find(|s| s.lang() == hub).cloned().expect("hub present");
        for space in loaded.iter_mut().filter(|s| s.lang() != hub) {
            let col_src = dict.column(space.lang())?;
            let col_hub = dict.column(&hub)?;
            let pair = dict.project(col_src, col_hub)?;
            *space = align_bilingual(space, &hub_space, &pair)?.aligned_src;
        }
    }

    let (out_spaces, maps, used, skipped): (Vec<EmbeddingSpace>, Vec<(String, LinearMap)>, usize, usize) =
        if multilingual {
            let ms = MultiSpace::new(hub.clone(), loaded)?;
            let result = meemi_multilingual(&ms, &dict, a.ridge)?;
            let maps = result.maps.into_iter().collect();
            let spaces = result.space.into_spaces().into_values().collect();
            (spaces, maps, result.tuples_used, result.skipped_oov)
        } else {
            let (first, second) = (&loaded[0], &loaded[1]);
            let options = MeemiOptions {
                weighted: a.weighted,
                frequency_scale: match a.freq_scale {
                    FreqScaleArg::Raw => FrequencyScale::Raw,
                    FreqScaleArg::PerMillion => FrequencyScale::PerMillion,
                },
                ridge: a.ridge,
            };
            let r = meemi_bilingual(first, second, &dict, &options)?;
            let maps = vec![
                (first.lang().to_owned(), r.src_map),
                (second.lang().to_owned(), r.tgt_map),
            ];
            (vec![r.src, r.tgt], maps, r.pairs_used, r.skipped_oov)
        };

    prepare_out_dir(&a.out)?;
    for (lang, map) in &maps {
        save_map(map, a.out.join(format!("{lang}.map")))?;
    }
    for space in &out_spaces {
        save_embeddings(space, a.out.join(format!("{}.vec", space.lang())))?;
    }
    let summary = json!({
        "command": "meemi",
        "langs": langs,
        "hub": hub,
        "mode": if multilingual { "multilingual" } else { "bilingual" },
        "weighted": a.weighted,
        "ridge": a.ridge,
        "normalize": a.normalize,
        "aligned_first": a.align,
        "seed": a.seed,
        "train_size": a.train_size,
        "tuples_used": used,
        "skipped_oov": skipped,
    });
    write_json(&a.out.join("meemi.json"), &summary)?;
    eprintln!("fitted {} maps on {used} tuples ({skipped} skipped as OOV)", maps.len());
    Ok(())
}

fn require<'a>(value: &'a Option<PathBuf>, flag: &str, task: &str) -> CliResult<&'a Path> {
    value
        .as_deref()
        .ok_or_else(|| usage(format!("--task {task} requires {flag}")))
}

fn cmd_eval(a: &EvalArgs) -> CliResult {
    let tgt_path = a.tgt.as_deref().unwrap_or(&a.src);
    let report: EvalReport = match a.task {
        TaskArg::Dict => {
            let dict_path = require(&a.dict, "--dict", "dict")?;
            check_inputs([a.src.as_path(), tgt_path, dict_path])?;
            if a.src_lang == a.tgt_lang {
                return Err(usage("--src-lang and --tgt-lang must differ"));
            }
            let ks = if a.k.is_empty() { vec![1, 5, 10] } else { a.k.clone() };
            let src = load_space(&a.src, &a.src_lang, &a.load, &a.normalize)?;
            let tgt = load_space(tgt_path, &a.tgt_lang, &a.load, &a.normalize)?;
            let dict = load_dict(dict_path, &[a.src_lang.clone(), a.tgt_lang.clone()], &a.load)?;
            eval_dict_induction(&dict, &src, &tgt, &ks)?
        }
        TaskArg::Sim => {
            let data = require(&a.dataset, "--dataset", "sim")?;
            check_inputs([a.src.as_path(), tgt_path, data])?;
            let src = load_space(&a.src, &a.src_lang, &a.load, &a.normalize)?;
            let tgt = match &a.tgt {
                Some(p) => load_space(p, &a.tgt_lang, &a.load, &a.normalize)?,
                None => src.clone(),
            };
            let mut items = load_similarity_dataset(data)?;
            if a.load.lowercase {
                for item in &mut items {
                    item.word_a = item.word_a.to_lowercase();
                    item.word_b = item.word_b.to_lowercase();
                }
            }
            eval_word_similarity(&items, &src, &tgt)?
        }
        TaskArg::Hyper => {
            let train = require(&a.train, "--train", "hyper")?;
            let test = require(&a.test, "--test", "hyper")?;
            check_inputs([a.src.as_path(), tgt_path, train, test])?;
            let k = match a.k.as_slice() {
                [] => HYPERNYM_K,
                [k] => *k,
                _ => return Err(usage("--task hyper takes a single --k")),
            };
            let query = load_space(&a.src, &a.src_lang, &a.load, &a.normalize)?;
            let candidates = match &a.tgt {
                Some(p) => load_space(p, &a.tgt_lang, &a.load, &a.normalize)?,
                None => query.clone(),
            };
            let pairs = hypernym_pairs(&load_hypernym_data(train)?);
            let model = train_hypernym_map(
                &[HypernymTrainingSet {
                    pairs: &pairs,
                    space: &query,
                }],
                a.ridge,
            )?;
            let test = load_hypernym_data(test)?;
            eval_hypernym(&test, &model.map, &query, &candidates, k)?
                .with_config("train_pairs", model.pairs_used)
                .with_config("ridge", a.ridge)
        }
    };
    let report = report
        .with_config("seed", a.seed)
        .with_config("normalize", a.normalize.clone())
        .with_metadata(ReportMetadata::now());
    if let Some(out) = &a.out {
        if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
            prepare_out_dir(parent)?;
        }
        let mut text = report.to_json();
        text.push('\n');
        write_text(out, &text)?;
    }
    match a.format {
        Format::Json => println!("{}", report.to_json()),
        Format::Text => print!("{}", report.to_text()),
    }
    Ok(())
}

fn cmd_translate(a: &TranslateArgs) -> CliResult {
    let mut inputs = vec![a.src.as_path(), a.tgt.as_path()];
    inputs.extend(a.map.as_deref());
    check_inputs(inputs)?;
    if a.k == 0 {
        return Err(usage("--k must be at least 1"));
    }
    let word = if a.load.lowercase { a.word.to_lowercase() } else { a.word.clone() };
    let mut src = load_space(&a.src, "src", &a.load, "none")?;
    let tgt = load_space(&a.tgt, "tgt", &a.load, "none")?;
    if let Some(path) = &a.map {
        src = apply_map(&src, &load_map(path)?)?;
    }
    let query = src
        .vector(&word)
        .ok_or_else(|| invalid(format!("word `{word}` is out of vocabulary (OOV) in {}", a.src.display())))?;
    for (rank, n) in knn(query.as_slice(), &tgt, a.k, None)?.iter().enumerate() {
        println!("{} {} {:.6}", rank + 1, n.word, n.score);
    }
    Ok(())
}

fn cmd_synth(a: &SynthArgs) -> CliResult {
    let config = a.spec.config()?;
    let pair = generate_pair(&config)?;
    let (train, test) = split_dictionary(&pair.gold, a.test_fraction, config.seed)?;
    prepare_out_dir(&a.out)?;
    save_embeddings(&pair.src, a.out.join("src.vec"))?;
    save_embeddings(&pair.tgt, a.out.join("tgt.vec"))?;
    save_dictionary(&pair.gold, a.out.join("gold.tsv"))?;
    save_dictionary(&train, a.out.join("train.tsv"))?;
    save_dictionary(&test, a.out.join("test.tsv"))?;
    let summary = json!({
        "command": "synth",
        "synth": config,
        "test_fraction": a.test_fraction,
        "train_pairs": train.len(),
        "test_pairs": test.len(),
    });
    write_json(&a.out.join("synth.json"), &summary)?;
    eprintln!(
        "wrote {} words per language, {} train / {} test pairs to {}",
        config.vocab_size,
        train.len(),
        test.len(),
        a.out.display()
    );
    Ok(())
}

fn cmd_ablate(a: &AblateArgs) -> CliResult {
    if a.trials == 0 {
        return Err(usage("--trials must be at least 1"));
    }
    if a.sizes.is_empty() {
        return Err(invalid("no dictionary sizes given"));
    }
    let config = AblationConfig::new(a.spec.config()?, a.sizes.clone(), a.trials);
    let table = run_ablation(&config)?;
    prepare_out_dir(&a.out)?;
    let csv_path = a.out.join("ablation.csv");
    let file = fs::File::create(&csv_path).map_err(|source| {
        CliError::Core(meemi::Error::Io {
            path: csv_path.clone(),
            source,
        })
    })?;
    table.write_csv(file)?;
    write_json(&a.out.join("ablation.json"), &table.summary_json(&config))?;
    for s in table.summary() {
        println!(
            "size {:>6}: base {:.4}  meemi {:.4}  delta {:+.4}  ({} trials)",
            s.size, s.mean_base, s.mean_meemi, s.mean_delta, s.trials
        );
    }
    Ok(())
}
