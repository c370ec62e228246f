use std::fs;
use std::io::{self, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use lexforge::bank::Bank;
use lexforge::lexicon::{EntryRecord, Lexicon, LexiconHandle, SenseId};
use lexforge::morphgen::derive_forms;
use lexforge::ontology::Ontology;
use lexforge::pipeline::{generate, rule_surface, Pipeline, Settings, ValidatedCandidate};
use lexforge::rules::{apply_rule, TriggerMode};
use lexforge::shipped;
use lexforge::validator::Resources;
use serde_json::json;

/// Mean number of derived entries per verb sense reported for a full-scale
/// Spanish run; printed by `stats` for comparison only.
const REFERENCE_PER_SENSE_MEAN: f64 = 25.0;

#[derive(Parser, Debug)]
#[command(name = "lexforge", version, about = "Lexical rule based lexicon acquisition")]
struct Cli {
    #[command(flatten)]
    data: DataArgs,
    #[command(subcommand)]
    cmd: Cmd,
}

/// Input data. Anything not given falls back to the data compiled into the
/// binary (seed lexicon, ontology, Spanish or English bank, Spanish word
/// lists and corpus sample).
#[derive(clap::Args, Debug)]
struct DataArgs {
    /// Lexicon file (JSON lines).
    #[arg(long, global = true)]
    lexicon: Option<PathBuf>,
    /// Rule bank file (JSON).
    #[arg(long, global = true)]
    bank: Option<PathBuf>,
    /// Ontology file (JSON lines).
    #[arg(long, global = true)]
    ontology: Option<PathBuf>,
    /// Built-in bank to use when --bank is absent.
    #[arg(long, global = true, default_value = "es", value_parser = ["es", "en"])]
    lang: String,
    /// Dictionary word list; repeatable.
    #[arg(long = "dict", global = true)]
    dicts: Vec<PathBuf>,
    /// Corpus text file; repeatable.
    #[arg(long = "corpus", global = true)]
    corpora: Vec<PathBuf>,
    #[arg(long, global = true, default_value = "hybrid", value_parser = parse_mode)]
    mode: TriggerMode,
    /// Maximum number of affixes in one derivation.
    #[arg(long, global = true, default_value_t = 2)]
    depth: usize,
    /// Fixed admin timestamp (`DD/MM HH:MM:SS`) instead of the clock.
    #[arg(long, global = true)]
    timestamp: Option<String>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Tsv)]
    format: Format,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Format {
    Tsv,
    Structured,
}

fn parse_mode(s: &str) -> Result<TriggerMode, String> {
    s.parse()
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Print the derived forms of a citation: form, pos, labels.
    Derive { citation: String },
    /// Apply one lexical rule to a stored sense and print both entries.
    Apply {
        sense_id: String,
        rule_id: String,
        /// Surface of the derived form; found by derivation when absent.
        #[arg(long)]
        surface: Option<String>,
    },
    /// Generate, validate and queue candidates for a list of verbs.
    Acquire {
        /// File with one citation per line; the built-in sample list when absent.
        #[arg(long)]
        verbs: Option<PathBuf>,
        /// Admit dictionary-accepted candidates without review.
        #[arg(long)]
        auto_admit_accepted: bool,
        /// Per-candidate log, including rejected forms.
        #[arg(long, default_value = "lexforge-acquire.log")]
        log: PathBuf,
        /// Write the resulting lexicon here.
        #[arg(long)]
        save: Option<PathBuf>,
    },
    /// Check the candidates generated for citations against the word lists
    /// and corpus: form, pos, status, evidence.
    Validate {
        citations: Vec<String>,
        #[arg(long)]
        verbs: Option<PathBuf>,
    },
    /// Look a surface form up, deriving it on the fly when it is not stored.
    Lookup { surface: String },
    /// Serve the HTTP interface.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        /// Directory of static files for the review front end.
        #[arg(long)]
        assets: Option<PathBuf>,
        #[arg(long)]
        auto_admit_accepted: bool,
    },
    /// Acquisition report for a verb list, without admitting anything.
    Stats {
        #[arg(long)]
        verbs: Option<PathBuf>,
    },
    /// Write the lexicon in its canonical file form.
    Export {
        /// Run load-time expansion first.
        #[arg(long)]
        expand: bool,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

struct Loaded {
    lexicon: Lexicon,
    bank: Bank,
    resources: Resources,
    settings: Settings,
}

impl DataArgs {
    fn load(&self) -> Result<Loaded> {
        let ontology = match &self.ontology {
            Some(p) => Arc::new(Ontology::load(p).with_context(|| format!("loading ontology {}", p.display()))?),
            None => shipped::ontology(),
        };
        let lexicon = match &self.lexicon {
            Some(p) => {
                Lexicon::load(p, ontology.clone()).with_context(|| format!("loading lexicon {}", p.display()))?
            }
            None => Lexicon::parse(shipped::SEED_LEXICON, ontology.clone())?,
        };
        let bank = match &self.bank {
            Some(p) => Bank::load(p, &ontology).with_context(|| format!("loading bank {}", p.display()))?,
            None if self.lang == "en" => Bank::parse(shipped::BANK_EN, &ontology)?,
            None => Bank::parse(shipped::BANK_ES, &ontology)?,
        };
        let resources = if self.dicts.is_empty() && self.corpora.is_empty() {
            if bank.language == "es" {
                shipped::resources_es()
            } else {
                Resources::new()
            }
        } else {
            let mut r = Resources::new();
            for d in &self.dicts {
                r.load_dictionary(d).with_context(|| format!("loading dictionary {}", d.display()))?;
            }
            for c in &self.corpora {
                r.load_corpus(c).with_context(|| format!("loading corpus {}", c.display()))?;
            }
            r
        };
        let settings = Settings {
            depth: self.depth,
            mode: self.mode,
            auto_admit_accepted: false,
            timestamp: self.timestamp.clone(),
        };
        Ok(Loaded { lexicon, bank, resources, settings })
    }
}

impl Loaded {
    fn pipeline(self, auto_admit: bool) -> Pipeline {
        let settings = Settings { auto_admit_accepted: auto_admit, ..self.settings };
        Pipeline::new(
            Arc::new(LexiconHandle::new(self.lexicon)),
            Arc::new(self.bank),
            Arc::new(self.resources),
            settings,
        )
    }
}

fn read_verbs(path: Option<&Path>) -> Result<Vec<String>> {
    let text = match path {
        Some(p) => fs::read_to_string(p).with_context(|| format!("reading verb list {}", p.display()))?,
        None => shipped::SAMPLE_VERBS.to_string(),
    };
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(String::from)
        .collect())
}

fn json_line(out: &mut impl Write, v: &impl serde::Serialize) -> Result<()> {
    serde_json::to_writer(&mut *out, v)?;
    writeln!(out)?;
    Ok(())
}

fn candidate_row(v: &ValidatedCandidate) -> String {
    let c = &v.candidate;
    format!(
        "{}\t{}\t{}\t{}\t{}\t{}",
        c.surface,
        c.cat().short(),
        c.source,
        v.verdict.status,
        c.rule_chain().join(" "),
        v.verdict.evidence_tsv()
    )
}

fn run(cli: Cli) -> Result<()> {
    let d = &cli.data;
    let out = &mut io::stdout().lock();
    match cli.cmd {
        Cmd::Derive { citation } => {
            let l = d.load()?;
            let s = l
                .lexicon
                .get_superentry(&citation, &l.bank.language)
                .ok_or_else(|| anyhow!("no `{}` entry for `{citation}`", l.bank.language))?;
            for f in derive_forms(s, &l.bank.morph, d.depth)? {
                match d.format {
                    Format::Tsv => writeln!(out, "{}", f.tsv())?,
                    Format::Structured => json_line(
                        out,
                        &json!({
                            "form": f.surface,
                            "pos": f.pos,
                            "labels": f.lr_labels,
                            "derivation": f.derivation,
                            "source": f.source_sense,
                        }),
                    )?,
                }
            }
        }
        Cmd::Apply { sense_id, rule_id, surface } => {
            let l = d.load()?;
            let id: SenseId = sense_id.parse().map_err(|e| anyhow!("{e}"))?;
            let source = l.lexicon.entry(&id).ok_or_else(|| anyhow!("no entry `{sense_id}`"))?;
            let rule = l.bank.rules.resolve(&rule_id).ok_or_else(|| anyhow!("unknown rule `{rule_id}`"))?;
            let surface = match surface {
                Some(s) => s,
                None => rule_surface(&l.lexicon, &l.bank, &id, rule, d.depth)?
                    .ok_or_else(|| anyhow!("no derived form of {sense_id} carries {rule_id}; pass --surface"))?,
            };
            let mut alloc = l.lexicon.allocator();
            let derived = apply_rule(rule, source, &surface, &l.lexicon, &mut alloc, &l.settings.now())?;
            let lang = l.lexicon.language_of(&id).unwrap_or(&l.bank.language).to_string();
            let before = EntryRecord::from_entry(source, &lang);
            let after = EntryRecord::from_entry(&derived, &lang);
            match d.format {
                Format::Tsv => {
                    writeln!(out, "# before\n{}", serde_json::to_string_pretty(&before)?)?;
                    writeln!(out, "# after\n{}", serde_json::to_string_pretty(&after)?)?;
                }
                Format::Structured => json_line(out, &json!({ "before": before, "after": after }))?,
            }
        }
        Cmd::Acquire { verbs, auto_admit_accepted, log, save } => {
            let verbs = read_verbs(verbs.as_deref())?;
            let p = d.load()?.pipeline(auto_admit_accepted);
            let (report, g) = p.acquire(&verbs)?;
            report.check().map_err(|e| anyhow!("report arithmetic: {e}"))?;
            let mut text = format!("# mode={} depth={} verbs={}\n", d.mode, d.depth, verbs.join(","));
            text.push_str("# form\tpos\tsource\tstatus\trule_chain\tevidence\n");
            for v in &g.candidates {
                text.push_str(&candidate_row(v));
                text.push('\n');
            }
            fs::write(&log, text).with_context(|| format!("writing run log {}", log.display()))?;
            if let Some(path) = save {
                p.lexicon().snapshot().save(&path).with_context(|| format!("saving lexicon {}", path.display()))?;
            }
            writeln!(out, "{}", serde_json::to_string_pretty(&report)?)?;
        }
        Cmd::Validate { citations, verbs } => {
            let mut all = citations;
            if let Some(p) = verbs {
                all.extend(read_verbs(Some(&p))?);
            }
            if all.is_empty() {
                bail!("no citations given");
            }
            let l = d.load()?;
            let g = generate(&all, &l.lexicon, &l.bank, &l.resources, &l.settings)?;
            for u in &g.unresolved {
                eprintln!("warning: no base entry for `{u}`");
            }
            for v in &g.candidates {
                let c = &v.candidate;
                match d.format {
                    Format::Tsv => writeln!(
                        out,
                        "{}\t{}\t{}\t{}",
                        c.surface,
                        c.cat().short(),
                        v.verdict.status,
                        v.verdict.evidence_tsv()
                    )?,
                    Format::Structured => json_line(
                        out,
                        &json!({
                            "form": c.surface,
                            "pos": c.cat(),
                            "source": c.source,
                            "rule_chain": c.rule_chain(),
                            "verdict": v.verdict,
                        }),
                    )?,
                }
            }
        }
        Cmd::Lookup { surface } => {
            let l = d.load()?;
            let p = l.pipeline(false);
            let lang = p.bank().language.clone();
            for e in p.runtime_lookup(&surface) {
                match d.format {
                    Format::Tsv => writeln!(
                        out,
                        "{}\t{}\t{}\t{}\t{}",
                        e.sense_id,
                        e.cat.short(),
                        serde_json::to_value(e.origin)?.as_str().unwrap_or_default(),
                        e.rule_chain().join(" "),
                        e.dfn
                    )?,
                    Format::Structured => json_line(out, &EntryRecord::from_entry(&e, &lang))?,
                }
            }
        }
        Cmd::Serve { addr, assets, auto_admit_accepted } => {
            let p = Arc::new(d.load()?.pipeline(auto_admit_accepted));
            let app = lexforge_service::router(p, assets);
            let rt = tokio::runtime::Runtime::new()?;
            eprintln!("listening on http://{addr}");
            rt.block_on(lexforge_service::serve(addr, app)).with_context(|| format!("serving on {addr}"))?;
        }
        Cmd::Stats { verbs } => {
            let verbs = read_verbs(verbs.as_deref())?;
            let l = d.load()?;
            let g = generate(&verbs, &l.lexicon, &l.bank, &l.resources, &l.settings)?;
            let report = g.report();
            report.check().map_err(|e| anyhow!("report arithmetic: {e}"))?;
            match d.format {
                Format::Tsv => {
                    for (sense, n) in &g.per_sense {
                        writeln!(out, "{sense}\t{n}")?;
                    }
                    writeln!(out, "total\t{}", report.candidates_generated)?;
                }
                Format::Structured => writeln!(out, "{}", serde_json::to_string_pretty(&report)?)?,
            }
            writeln!(
                out,
                "# comparison only, not a check: observed {:.2} candidates per verb sense over {} senses; \
                 a full-scale Spanish run with a complete rule bank reports about {REFERENCE_PER_SENSE_MEAN}",
                report.per_sense_mean, report.senses_processed
            )?;
        }
        Cmd::Export { expand, out: path } => {
            let p = d.load()?.pipeline(false);
            if expand {
                let n = p.load_time_expand()?;
                eprintln!("load-time expansion added {n} entries");
            }
            let text = p.lexicon().snapshot().to_string();
            match path {
                Some(path) => fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?,
                None => out.write_all(text.as_bytes())?,
            }
        }
    }
    out.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
