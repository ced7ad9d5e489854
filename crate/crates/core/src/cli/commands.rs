use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{anyhow, Context};

use super::config::{InputFormat, RunConfig};
use super::{Cli, CliError, CliResult, Command, Report, EXIT_EXTERNAL, EXIT_INPUT, EXIT_VALIDATION};
use crate::analytics::{
    citation_profile, citation_profiles_csv, cooccurrence, keyword_csv, keyword_frequency,
    label_subfields, subfield_trend, top_cited, top_cited_csv, trend, Dimension, GroupBy,
    SubfieldAliases, YearTotals,
};
use crate::classifier::{
    augment, export_training, review_round, sample_for_review, Classifier,
    ClassifierRef, ClassifyError, Label, ReplayClassifier, TrainingSet,
};
use crate::eval::{adjudicate, estimate_corpus_recall, parse_gold_csv, score, venn};
use crate::formats::{parse_tabular, parse_tagged, FormatError};
use crate::pipeline::{
    run_pipeline, validate_ledger, write_ledger_csv, write_summary, PipelineError, RunOptions,
    StageDefs, StageTag,
};
use crate::query::Strategy;
use crate::record::Record;
use crate::store::{apply_topics, load_topic_map, Corpus};

struct Ctx {
    cfg: RunConfig,
    out: PathBuf,
    seed: u64,
    quiet: bool,
    command: String,
}

fn command_name(c: &Command) -> String {
    match c {
        Command::Ingest { .. } => "ingest".into(),
        Command::Stat { .. } => "stat".into(),
        Command::Search { .. } => "search".into(),
        Command::Pipeline { .. } => "pipeline".into(),
        Command::Label { .. } => "label".into(),
        Command::Review { .. } => "review".into(),
        Command::TrainExport { .. } => "train-export".into(),
        Command::Classify { .. } => "classify".into(),
        Command::Eval { .. } => "eval".into(),
        Command::RecallEstimate { .. } => "recall-estimate".into(),
        Command::Venn { .. } => "venn".into(),
        Command::Report { which, .. } => format!(
            "report {}",
            match which {
                Report::Trend { .. } => "trend",
                Report::Citations { .. } => "citations",
                Report::Keywords { .. } => "keywords",
                Report::Subfields { .. } => "subfields",
                Report::Cooccur { .. } => "cooccur",
                Report::TopCited { .. } => "top-cited",
            }
        ),
    }
}

impl Ctx {
    fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", msg.as_ref());
        }
    }

    fn header(&self, extra: &[(&str, String)]) -> String {
        let secs = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let mut h = format!(
            "# delineate {}\n# command={}\n# config_hash={}\n# seed={}\n",
            env!("CARGO_PKG_VERSION"),
            self.command,
            self.cfg.hash,
            self.seed
        );
        for (k, v) in extra {
            h.push_str(&format!("# {k}={v}\n"));
        }
        h.push_str(&format!("# generated_at={secs}\n"));
        h
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    /// Writes `<out>/<name>` with the metadata header.
    fn write(&self, name: &str, body: &str, extra: &[(&str, String)]) -> CliResult<PathBuf> {
        let text = format!("{}{body}", self.header(extra));
        self.write_raw(name, &text)
    }

    fn write_raw(&self, name: &str, text: &str) -> CliResult<PathBuf> {
        std::fs::create_dir_all(&self.out)
            .with_context(|| format!("cannot create {}", self.out.display()))?;
        let p = self.path(name);
        std::fs::write(&p, text).with_context(|| format!("cannot write {}", p.display()))?;
        log::info!("wrote {}", p.display());
        Ok(p)
    }

    fn corpus(&self) -> CliResult<Corpus> {
        Ok(Corpus::open(&self.cfg.workspace.root, &self.cfg.corpus.name)
            .context("corpus not found; run `ingest` first")?)
    }

    fn load_uts(&self, path: &Path) -> CliResult<Vec<Record>> {
        let uts = read_uts(path)?;
        let corpus = self.corpus()?;
        if let Some(missing) = uts.iter().find(|u| !corpus.contains(u)) {
            return Err(anyhow!("{}: {missing} is not in the corpus", path.display()).into());
        }
        Ok(corpus.load_subset(&uts)?)
    }

    /// The `--set` list, else `<out>/final.uts`, else the whole corpus.
    fn analysis_set(&self, set: Option<PathBuf>) -> CliResult<Vec<Record>> {
        let default = self.path("final.uts");
        match set {
            Some(p) => self.load_uts(&p),
            None if default.exists() => self.load_uts(&default),
            None => {
                log::info!("no final.uts; analyzing the whole corpus");
                Ok(self.corpus()?.load_all()?)
            }
        }
    }

    fn pool(&self, from: Option<PathBuf>) -> CliResult<Vec<Record>> {
        let p = from.unwrap_or_else(|| self.path("initial.uts"));
        if !p.exists() {
            return Err(anyhow!("{} does not exist; run `search` first", p.display()).into());
        }
        self.load_uts(&p)
    }

    fn strategy(&self, specs: &[String], name: &str) -> CliResult<Strategy> {
        let parts = specs
            .iter()
            .map(|s| Strategy::load(s, Some(&self.cfg.base)))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Strategy::union(name, parts.iter()))
    }

    fn classifier(&self) -> CliResult<Option<Box<dyn Classifier>>> {
        match &self.cfg.classifier {
            None => Ok(None),
            Some(r) => build_classifier(r, &self.cfg.base).map(Some),
        }
    }
}

fn classify_code(e: &ClassifyError) -> i32 {
    match e {
        ClassifyError::Unavailable(_) | ClassifyError::Http { .. } | ClassifyError::BadResponse(_) => {
            EXIT_EXTERNAL
        }
        _ => EXIT_INPUT,
    }
}

fn build_classifier(r: &ClassifierRef, base: &Path) -> CliResult<Box<dyn Classifier>> {
    r.build(Some(base)).map_err(|e| CliError {
        code: classify_code(&e),
        error: e.into(),
    })
}

fn read_uts(path: &Path) -> CliResult<BTreeSet<String>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect())
}

fn uts_body<'a>(uts: impl IntoIterator<Item = &'a str>) -> String {
    let mut s = String::new();
    for u in uts {
        s.push_str(u);
        s.push('\n');
    }
    s
}

fn csv_text(rows: &[Vec<String>]) -> String {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    for r in rows {
        w.write_record(r).expect("in-memory csv write");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv flush")).expect("utf-8 csv")
}

pub(super) fn execute(cli: Cli) -> CliResult {
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default_here(),
    };
    let ctx = Ctx {
        out: cli.out.clone().unwrap_or_else(|| cfg.workspace.out.clone()),
        seed: cli.seed.unwrap_or(cfg.workspace.seed),
        quiet: cli.quiet,
        command: command_name(&cli.command),
        cfg,
    };
    match cli.command {
        Command::Ingest {
            files,
            format,
            corpus,
            topics,
        } => ingest(&ctx, files, format, corpus, topics),
        Command::Stat { corpus } => stat(&ctx, corpus),
        Command::Search { strategies, name } => search(&ctx, strategies, name),
        Command::Pipeline {
            resume,
            initial,
            workers,
            batch_size,
        } => pipeline(&ctx, resume, initial, workers, batch_size),
        Command::Label { n, from, interactive } => label(&ctx, n, from, interactive),
        Command::Review {
            sheet,
            per_example,
            no_augment,
            from,
        } => review(&ctx, &sheet, per_example, no_augment, from),
        Command::TrainExport { output } => train_export(&ctx, output),
        Command::Classify { set } => classify(&ctx, set),
        Command::Eval {
            gold,
            predicted,
            resolutions,
        } => eval(&ctx, gold, predicted, resolutions),
        Command::RecallEstimate { gold, members, name } => recall_estimate(&ctx, gold, &members, name),
        Command::Venn { sets } => venn_cmd(&ctx, &sets),
        Command::Report { set, which } => report(&ctx, set, which),
    }
}

fn ingest(
    ctx: &Ctx,
    files: Vec<PathBuf>,
    format: Option<InputFormat>,
    corpus: Option<String>,
    topics: Option<PathBuf>,
) -> CliResult {
    let files = if files.is_empty() { ctx.cfg.corpus.files.clone() } else { files };
    if files.is_empty() {
        return Err(anyhow!("no input files given").into());
    }
    let format = format.unwrap_or(ctx.cfg.corpus.format);
    let name = corpus.unwrap_or_else(|| ctx.cfg.corpus.name.clone());
    let topics = match topics.or_else(|| ctx.cfg.corpus.topics.clone()) {
        Some(p) => Some(load_topic_map(&p)?),
        None => None,
    };
    let mut parsed = Vec::new();
    let mut total = 0;
    for f in &files {
        let file = File::open(f).with_context(|| format!("cannot open {}", f.display()))?;
        let outcome = match format {
            InputFormat::Tagged => parse_tagged(file),
            InputFormat::Tabular => parse_tabular(file),
        }
        .map_err(|e: FormatError| {
            log::warn!("{}: {e}", f.display());
            anyhow!("{}: {e}", f.display())
        })?;
        for w in &outcome.warnings {
            log::warn!("{}:{w}", f.display());
        }
        ctx.say(format!(
            "{}: {} records, {} warnings",
            f.display(),
            outcome.records.len(),
            outcome.warnings.len()
        ));
        total += outcome.records.len();
        parsed.push((f.clone(), outcome.records));
    }
    if total == 0 {
        return Err(anyhow!("no records found in the input files").into());
    }
    let mut corpus = Corpus::open_or_create(&ctx.cfg.workspace.root, &name)?;
    for (f, mut records) in parsed {
        if let Some(t) = &topics {
            apply_topics(&mut records, t);
        }
        corpus.store(records, Some(&f))?;
    }
    ctx.say(format!("corpus {name}: {} records", corpus.len()));
    Ok(())
}

fn stat(ctx: &Ctx, corpus: Option<String>) -> CliResult {
    let name = corpus.unwrap_or_else(|| ctx.cfg.corpus.name.clone());
    let c = Corpus::open(&ctx.cfg.workspace.root, &name)?;
    let h = c.handle();
    println!("name={}", h.name);
    println!("record_count={}", h.record_count);
    for s in &h.source_files {
        println!("source_file={}", s.display());
    }
    Ok(())
}

fn search(ctx: &Ctx, strategies: Vec<String>, name: Option<String>) -> CliResult {
    let preliminary = strategies.is_empty();
    let specs = if preliminary { ctx.cfg.search.preliminary.clone() } else { strategies };
    let name = name.unwrap_or_else(|| {
        if preliminary {
            "initial".into()
        } else if specs.len() == 1 {
            let s = specs[0].trim_start_matches("bundled:");
            Path::new(s)
                .file_stem()
                .map(|x| x.to_string_lossy().into_owned())
                .unwrap_or_else(|| "search".into())
        } else {
            "search".into()
        }
    });
    let strategy = ctx.strategy(&specs, &name)?;
    let records = ctx.corpus()?.load_all()?;
    let hits = strategy.run_on(&records, ctx.cfg.workspace.workers);
    let p = ctx.write(
        &format!("{name}.uts"),
        &uts_body(hits.iter().map(String::as_str)),
        &[("strategies", specs.join(" ")), ("count", hits.len().to_string())],
    )?;
    ctx.say(format!("{name}: {} records -> {}", hits.len(), p.display()));
    Ok(())
}

fn pipeline(
    ctx: &Ctx,
    resume: bool,
    initial: Option<PathBuf>,
    workers: Option<usize>,
    batch_size: Option<usize>,
) -> CliResult {
    let default_initial = ctx.path("initial.uts");
    let records = match initial {
        Some(p) => ctx.load_uts(&p)?,
        None if default_initial.exists() => ctx.load_uts(&default_initial)?,
        None => {
            let strategy = ctx.strategy(&ctx.cfg.search.preliminary, "initial")?;
            let all = ctx.corpus()?.load_all()?;
            let hits = strategy.run_on(&all, ctx.cfg.workspace.workers);
            ctx.write(
                "initial.uts",
                &uts_body(hits.iter().map(String::as_str)),
                &[
                    ("strategies", ctx.cfg.search.preliminary.join(" ")),
                    ("count", hits.len().to_string()),
                ],
            )?;
            all.into_iter().filter(|r| hits.contains(&r.ut)).collect()
        }
    };
    let stages = StageDefs::load(&ctx.cfg.pipeline.stages, Some(&ctx.cfg.base))?;
    let classifier = match ctx.classifier() {
        Ok(c) => c,
        Err(e) if e.code == EXIT_EXTERNAL => {
            log::warn!("{:#}", e.error);
            None
        }
        Err(e) => return Err(e),
    };
    let ckpt = ctx.path("pipeline.ckpt");
    std::fs::create_dir_all(&ctx.out)?;
    if !resume && ckpt.exists() {
        std::fs::remove_file(&ckpt)?;
    }
    let opts = RunOptions {
        workers: workers.unwrap_or(ctx.cfg.workspace.workers),
        batch_size: batch_size.unwrap_or(ctx.cfg.pipeline.batch_size),
        checkpoint: Some(ckpt.clone()),
    };
    let ledger = match run_pipeline(&records, &stages, classifier.as_deref(), &opts) {
        Ok(l) => l,
        Err(e @ PipelineError::ClassifierUnavailable { .. }) => {
            return Err(CliError {
                code: EXIT_EXTERNAL,
                error: anyhow!(e).context(format!(
                    "stages 1-3 are committed in {}; rerun with --resume",
                    ckpt.display()
                )),
            })
        }
        Err(e) => return Err(e.into()),
    };
    let violations = validate_ledger(&ledger, &records, &stages);
    let meta = [("initial_size", ledger.initial_size().to_string())];
    ctx.write("ledger.csv", &write_ledger_csv(&ledger), &meta)?;
    let mut summary = write_summary(ledger.summary());
    summary.push_str(&format!("violations={}\n", violations.len()));
    ctx.write("ledger_summary.txt", &summary, &[])?;
    ctx.write("final.uts", &uts_body(ledger.admitted()), &[("count", ledger.final_size().to_string())])?;
    let mut rows = vec![vec!["ut".to_string(), "response".to_string()]];
    rows.extend(ledger.unresolved().iter().map(|u| vec![u.ut.clone(), u.response.clone()]));
    ctx.write("review_unmappable.csv", &csv_text(&rows), &[])?;
    let _ = std::fs::remove_file(&ckpt);
    for t in StageTag::ALL {
        ctx.say(format!("{:<15}{}", t.as_str(), ledger.stage_count(t)));
    }
    ctx.say(format!("{:<15}{}", "final", ledger.final_size()));
    if !ledger.unresolved().is_empty() {
        ctx.say(format!(
            "{} unmappable classifier replies listed in review_unmappable.csv",
            ledger.unresolved().len()
        ));
    }
    if !violations.is_empty() {
        for v in &violations {
            eprintln!("violation: {v}");
        }
        return Err(CliError {
            code: EXIT_VALIDATION,
            error: anyhow!("ledger failed validation with {} violation(s)", violations.len()),
        });
    }
    Ok(())
}

fn load_training(path: &Path) -> CliResult<TrainingSet> {
    if path.exists() {
        Ok(TrainingSet::load_any(path)?)
    } else {
        Ok(TrainingSet::new())
    }
}

const SHEET_HEADER: [&str; 4] = ["ut", "title", "verdict", "corrected_label"];

fn label(ctx: &Ctx, n: Option<usize>, from: Option<PathBuf>, interactive: bool) -> CliResult {
    let pool = ctx.pool(from)?;
    let n = n.unwrap_or(ctx.cfg.labeling.sample_size);
    let sample = sample_for_review(&pool, n, ctx.seed)?;
    let verdicts: HashMap<String, String> = match ctx.classifier()? {
        Some(c) => {
            let out = c.classify(&sample).map_err(|e| CliError {
                code: classify_code(&e),
                error: e.into(),
            })?;
            out.verdicts
                .into_iter()
                .map(|v| (v.ut, v.label.as_str().to_string()))
                .chain(out.unmappable.into_iter().map(|u| (u.ut, "unmappable".to_string())))
                .collect()
        }
        None => {
            log::warn!("no classifier configured; verdict column left blank");
            HashMap::new()
        }
    };
    let round = load_training(&ctx.cfg.labeling.training)?.max_round() + 1;
    let stdin = std::io::stdin();
    let mut lines = stdin.lock().lines();
    let mut rows = vec![SHEET_HEADER.map(String::from).to_vec()];
    for r in &sample {
        let verdict = verdicts.get(&r.ut).cloned().unwrap_or_default();
        let mut corrected = String::new();
        if interactive {
            loop {
                print!("{}\n  [{}] {}\n  correct label (a=ai, o=other, blank=agree): ", r.ut, verdict, r.title);
                std::io::stdout().flush()?;
                let answer = lines.next().transpose()?.unwrap_or_default();
                match answer.trim() {
                    "" => break,
                    "a" | "ai" => corrected = "ai".into(),
                    "o" | "other" => corrected = "other".into(),
                    _ => continue,
                }
                break;
            }
        }
        rows.push(vec![r.ut.clone(), r.title.clone(), verdict, corrected]);
    }
    let name = format!("review_round_{round}.csv");
    let p = ctx.write(&name, &csv_text(&rows), &[("round", round.to_string())])?;
    ctx.say(format!("{} records to review -> {}", sample.len(), p.display()));
    Ok(())
}

struct SheetRow {
    ut: String,
    verdict: String,
    corrected: Option<Label>,
}

fn read_sheet(path: &Path) -> CliResult<Vec<SheetRow>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    let headers = rdr.headers()?.clone();
    if headers.iter().map(str::trim).collect::<Vec<_>>() != SHEET_HEADER {
        return Err(anyhow!("{}: header must be {}", path.display(), SHEET_HEADER.join(",")).into());
    }
    let mut rows = Vec::new();
    let mut errors = Vec::new();
    for rec in rdr.records() {
        let rec = rec.with_context(|| format!("{}", path.display()))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let corrected = rec.get(3).unwrap_or("").trim();
        let corrected = if corrected.is_empty() {
            None
        } else {
            match Label::from_response(corrected) {
                Some(l) => Some(l),
                None => {
                    errors.push(format!("line {line}: invalid label {corrected:?}"));
                    continue;
                }
            }
        };
        rows.push(SheetRow {
            ut: rec.get(0).unwrap_or("").trim().to_string(),
            verdict: rec.get(2).unwrap_or("").trim().to_string(),
            corrected,
        });
    }
    if !errors.is_empty() {
        for e in &errors {
            eprintln!("{}: {e}", path.display());
        }
        return Err(anyhow!("{} malformed row(s) in {}", errors.len(), path.display()).into());
    }
    Ok(rows)
}

fn review(
    ctx: &Ctx,
    sheet: &Path,
    per_example: Option<usize>,
    no_augment: bool,
    from: Option<PathBuf>,
) -> CliResult {
    let rows = read_sheet(sheet)?;
    let corpus = ctx.corpus()?;
    let uts: BTreeSet<String> = rows.iter().map(|r| r.ut.clone()).collect();
    if let Some(u) = uts.iter().find(|u| !corpus.contains(u)) {
        return Err(anyhow!("{}: {u} is not in the corpus", sheet.display()).into());
    }
    let by_ut: HashMap<String, Record> = corpus
        .load_subset(&uts)?
        .into_iter()
        .map(|r| (r.ut.clone(), r))
        .collect();
    let sample: Vec<Record> = rows.iter().map(|r| by_ut[&r.ut].clone()).collect();
    let shown = ReplayClassifier::from_pairs(rows.iter().map(|r| (r.ut.clone(), r.verdict.clone())));
    let corrections: BTreeMap<String, Label> = rows
        .iter()
        .filter_map(|r| r.corrected.map(|l| (r.ut.clone(), l)))
        .collect();
    let style = ctx.cfg.labeling.prompt_style;
    let path = &ctx.cfg.labeling.training;
    let mut ts = load_training(path)?;
    let delta = review_round(&sample, &shown, &corrections, ts.max_round(), style)?;
    let corrected = ts.extend(delta);
    let mut augmented = 0;
    if !no_augment && corrected > 0 {
        let pool = ctx.pool(from)?;
        let per = per_example.unwrap_or(ctx.cfg.labeling.per_example);
        augmented = ts.extend(augment(&ts, &pool, per, style)?);
    }
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    ts.save(path)?;
    ctx.say(format!(
        "added {corrected} corrections and {augmented} similar titles; training set {} examples, {} positive ({:.3})",
        ts.len(),
        ts.positive_count(),
        ts.positive_share()
    ));
    Ok(())
}

fn train_export(ctx: &Ctx, output: Option<PathBuf>) -> CliResult {
    let ts = load_training(&ctx.cfg.labeling.training)?;
    let out = output.unwrap_or_else(|| ctx.path("training_export.jsonl"));
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    export_training(&ts, &out)?;
    ctx.say(format!(
        "{} examples, {} positive, positive share {:.3} -> {}",
        ts.len(),
        ts.positive_count(),
        ts.positive_share(),
        out.display()
    ));
    Ok(())
}

fn classify(ctx: &Ctx, set: Option<PathBuf>) -> CliResult {
    let records = match set {
        Some(p) => ctx.load_uts(&p)?,
        None => ctx.corpus()?.load_all()?,
    };
    let clf = ctx
        .classifier()?
        .ok_or_else(|| anyhow!("no [classifier] configured"))?;
    let mut rows = vec![["ut", "label", "score", "backend"].map(String::from).to_vec()];
    let mut unmappable = vec![vec!["ut".to_string(), "response".to_string()]];
    for chunk in records.chunks(ctx.cfg.pipeline.batch_size.max(1)) {
        let out = clf.classify(chunk).map_err(|e| CliError {
            code: classify_code(&e),
            error: e.into(),
        })?;
        for v in out.verdicts {
            rows.push(vec![
                v.ut,
                v.label.as_str().into(),
                v.score.map(|s| format!("{s:.6}")).unwrap_or_default(),
                v.backend.as_str().into(),
            ]);
        }
        unmappable.extend(out.unmappable.into_iter().map(|u| vec![u.ut, u.response]));
    }
    let header = rows.remove(0);
    rows.sort();
    rows.insert(0, header);
    let ai = rows.iter().filter(|r| r[1] == "ai").count();
    ctx.write("verdicts.csv", &csv_text(&rows), &[("backend", clf.identity())])?;
    ctx.write("classify_unmappable.csv", &csv_text(&unmappable), &[])?;
    ctx.say(format!(
        "{} records classified: {ai} ai, {} other, {} unmappable",
        records.len(),
        rows.len() - 1 - ai,
        unmappable.len() - 1
    ));
    Ok(())
}

fn gold_path(ctx: &Ctx, gold: Option<PathBuf>) -> CliResult<PathBuf> {
    gold.or_else(|| ctx.cfg.eval.gold.clone())
        .ok_or_else(|| anyhow!("no gold labels given (--gold or [eval] gold)").into())
}

fn read_resolutions(path: &Path) -> CliResult<BTreeMap<String, Label>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line == "ut,label" {
            continue;
        }
        let (ut, l) = line
            .split_once(',')
            .ok_or_else(|| anyhow!("{}:{}: expected ut,label", path.display(), i + 1))?;
        let l = Label::from_response(l)
            .ok_or_else(|| anyhow!("{}:{}: invalid label {l:?}", path.display(), i + 1))?;
        out.insert(ut.trim().to_string(), l);
    }
    Ok(out)
}

fn adjudicated_gold(ctx: &Ctx, gold: Option<PathBuf>, resolutions: Option<PathBuf>) -> CliResult<crate::eval::Adjudicated> {
    let gp = gold_path(ctx, gold)?;
    let text = std::fs::read_to_string(&gp).with_context(|| format!("cannot read {}", gp.display()))?;
    let labels = parse_gold_csv(&text).with_context(|| gp.display().to_string())?;
    let res = match resolutions.or_else(|| ctx.cfg.eval.resolutions.clone()) {
        Some(p) => read_resolutions(&p)?,
        None => BTreeMap::new(),
    };
    Ok(adjudicate(&labels, &res))
}

fn eval(
    ctx: &Ctx,
    gold: Option<PathBuf>,
    predicted: Option<PathBuf>,
    resolutions: Option<PathBuf>,
) -> CliResult {
    let adj = adjudicated_gold(ctx, gold, resolutions)?;
    let predicted = read_uts(&predicted.unwrap_or_else(|| ctx.path("final.uts")))?;
    let report = score(&predicted, &adj.gold)?;
    ctx.write(
        "eval.csv",
        &report.to_csv(),
        &[
            ("gold", adj.gold.len().to_string()),
            ("pending", adj.pending.len().to_string()),
        ],
    )?;
    let mut pending = String::from("ut,reason\n");
    for u in &adj.pending {
        pending.push_str(&format!("{u},full_text_review\n"));
    }
    for u in &adj.insufficient {
        pending.push_str(&format!("{u},single_expert\n"));
    }
    ctx.write("eval_pending.csv", &pending, &[])?;
    ctx.say(report.summary());
    if !adj.pending.is_empty() {
        ctx.say(format!("{} tied records await full-text review", adj.pending.len()));
    }
    Ok(())
}

fn recall_estimate(ctx: &Ctx, gold: Option<PathBuf>, members: &Path, name: Option<String>) -> CliResult {
    let adj = adjudicated_gold(ctx, gold, None)?;
    let set = read_uts(members)?;
    let est = estimate_corpus_recall(&adj.gold, |u| set.contains(u))?;
    let name = name.unwrap_or_else(|| {
        members
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "members".into())
    });
    let body = format!(
        "relevant,captured,fraction,ci_low,ci_high\n{},{},{:.6},{:.6},{:.6}\n",
        est.relevant, est.captured, est.fraction, est.ci_low, est.ci_high
    );
    ctx.write(&format!("recall_{name}.csv"), &body, &[("interval", "wilson95".into())])?;
    ctx.say(format!(
        "{name}: {}/{} = {:.4} (95% CI {:.4}-{:.4})",
        est.captured, est.relevant, est.fraction, est.ci_low, est.ci_high
    ));
    Ok(())
}

fn venn_cmd(ctx: &Ctx, sets: &[String]) -> CliResult {
    let mut loaded = Vec::new();
    for s in sets {
        let (name, file) = s
            .split_once('=')
            .ok_or_else(|| anyhow!("expected NAME=FILE, got {s:?}"))?;
        loaded.push((name.to_string(), read_uts(Path::new(file))?));
    }
    let refs: Vec<(&str, &BTreeSet<String>)> = loaded.iter().map(|(n, s)| (n.as_str(), s)).collect();
    let v = venn(&refs)?;
    ctx.write("venn.csv", &v.to_csv(), &[])?;
    for m in 1..v.regions.len() {
        ctx.say(format!("{:<24}{}", v.region_name(m), v.regions[m]));
    }
    Ok(())
}

fn parse_labels_csv(path: &Path) -> CliResult<BTreeMap<String, Vec<String>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    let mut out = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let labels = rec
            .get(1)
            .unwrap_or("")
            .split(';')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::to_string)
            .collect();
        out.insert(rec.get(0).unwrap_or("").to_string(), labels);
    }
    Ok(out)
}

fn report(ctx: &Ctx, set: Option<PathBuf>, which: Report) -> CliResult {
    if let Report::Cooccur { threshold, labels } = which {
        let p = labels.unwrap_or_else(|| ctx.path("subfield_labels.csv"));
        let labels = parse_labels_csv(&p)?;
        let threshold = threshold.unwrap_or(ctx.cfg.analytics.cooccur_threshold);
        let g = cooccurrence(&labels, threshold);
        let meta = [("threshold", threshold.to_string())];
        ctx.write("cooccur_edges.csv", &g.edges_csv(), &meta)?;
        ctx.write("cooccur_nodes.csv", &g.nodes_csv(), &meta)?;
        ctx.write("cooccur.dot", &g.to_dot(), &meta)?;
        ctx.say(format!("{} labels, {} edges at threshold {threshold}", g.nodes.len(), g.edges.len()));
        return Ok(());
    }
    let records = ctx.analysis_set(set)?;
    match which {
        Report::Trend {
            dimension,
            share,
            denominator,
        } => {
            let dim = Dimension::parse(&dimension)
                .filter(|d| *d != Dimension::Subfield)
                .ok_or_else(|| anyhow!("unknown dimension {dimension:?} (year, country, institution, category)"))?;
            let denom = match denominator.as_deref() {
                None => None,
                Some("set") => Some(YearTotals::from_records(&records)),
                Some("corpus") => Some(YearTotals::from_records(&ctx.corpus()?.load_all()?)),
                Some(p) => Some(YearTotals::parse_csv(
                    &std::fs::read_to_string(p).with_context(|| format!("cannot read {p}"))?,
                )?),
            };
            let t = trend(&records, dim, denom.as_ref(), share)?;
            let mut meta = vec![("counting", "whole".to_string())];
            if let Some(d) = &denominator {
                meta.push(("denominator", d.clone()));
            }
            ctx.write(&format!("trend_{}.csv", dim.as_str()), &t.to_csv(), &meta)?;
            ctx.say(format!("{} cells", t.cells.len()));
        }
        Report::Citations { group_by } => {
            let g: GroupBy = group_by.into();
            let p = citation_profile(&records, g)?;
            ctx.write(
                &format!("citations_{}.csv", g.as_str()),
                &citation_profiles_csv(&p),
                &[
                    ("counting", "whole".into()),
                    ("top_baseline", "per publication year over the analyzed set".into()),
                ],
            )?;
            for row in p.iter().take(10) {
                ctx.say(format!(
                    "{:<24}{:>8} pubs {:>10} cites h={}",
                    row.key, row.publications, row.total_citations, row.h_index
                ));
            }
        }
        Report::Keywords { min_count } => {
            let min = min_count.unwrap_or(ctx.cfg.analytics.keyword_min_count);
            let kf = keyword_frequency(&records, min);
            ctx.write("keywords.csv", &keyword_csv(&kf), &[("min_count", min.to_string())])?;
            ctx.say(format!("{} keywords with at least {min} occurrences", kf.len()));
        }
        Report::TopCited { n } => {
            let top = top_cited(&records, n)?;
            ctx.write("top_cited.csv", &top_cited_csv(&top), &[])?;
            for r in &top {
                ctx.say(format!("{:>8}  {}", r.citation_count, r.title));
            }
        }
        Report::Subfields { n } => {
            let r = ctx
                .cfg
                .subfields
                .as_ref()
                .ok_or_else(|| anyhow!("no [subfields] backend configured"))?;
            let completer = r.build_completer(Some(&ctx.cfg.base)).map_err(|e| CliError {
                code: classify_code(&e),
                error: e.into(),
            })?;
            let aliases = match &ctx.cfg.analytics.subfield_aliases {
                Some(p) => SubfieldAliases::parse(&std::fs::read_to_string(p)?).map_err(|e| anyhow!(e))?,
                None => SubfieldAliases::bundled().clone(),
            };
            let n = n.unwrap_or(ctx.cfg.analytics.subfield_sample).min(records.len());
            let sample = sample_for_review(&records, n, ctx.seed)?;
            let labeled = label_subfields(&sample, completer.as_ref(), &aliases).map_err(|e| CliError {
                code: classify_code(&e),
                error: e.into(),
            })?;
            let mut rows = vec![vec!["ut".to_string(), "labels".to_string()]];
            rows.extend(labeled.labels.iter().map(|(u, l)| vec![u.clone(), l.join(";")]));
            let meta = [("sample", n.to_string())];
            ctx.write("subfield_labels.csv", &csv_text(&rows), &meta)?;
            ctx.write("subfield_trend.csv", &subfield_trend(&labeled.labels, &sample).to_csv(), &meta)?;
            let mut unresolved = vec![vec!["ut".to_string(), "response".to_string()]];
            unresolved.extend(labeled.unresolved.iter().map(|u| vec![u.ut.clone(), u.response.clone()]));
            ctx.write("subfield_unresolved.csv", &csv_text(&unresolved), &[])?;
            ctx.say(format!(
                "{} records labeled, {} without a usable reply, {} labels outside the alias table",
                labeled.labels.len(),
                labeled.unresolved.len(),
                labeled.unknown.len()
            ));
        }
        Report::Cooccur { .. } => unreachable!("handled above"),
    }
    Ok(())
}
