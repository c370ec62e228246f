//! Data files compiled into the library: a small ontology, a seed lexicon,
//! Spanish and English rule banks and Spanish validation resources.

use std::sync::Arc;

use crate::bank::Bank;
use crate::lexicon::Lexicon;
use crate::ontology::Ontology;
use crate::validator::Resources;

pub const ONTOLOGY: &str = include_str!("../data/ontology.jsonl");
pub const SEED_LEXICON: &str = include_str!("../data/seed_lexicon.jsonl");
pub const BANK_ES: &str = include_str!("../data/bank_es.json");
pub const BANK_EN: &str = include_str!("../data/bank_en.json");
/// Expected `derive_forms` output for `comprar`, one `form\tpos\tlabels` row per line.
pub const GOLDEN_COMPRAR: &str = include_str!("../data/golden/derive_comprar.tsv");
/// The rows of [`GOLDEN_COMPRAR`] that survive checking against [`DICT_ES_SAMPLE`].
pub const GOLDEN_COMPRAR_FILTERED: &str = include_str!("../data/golden/dictionary_filtered_comprar.tsv");
pub const DICT_ES_SAMPLE: &str = include_str!("../data/dict/es_mrd_sample.txt");
pub const DICT_ES_GENERAL: &str = include_str!("../data/dict/es_general.txt");
pub const CORPUS_ES: &str = include_str!("../data/corpus/es_news_sample.txt");
/// Token counts for [`CORPUS_ES`], `token\tcount` per line.
pub const CORPUS_ES_COUNTS: &str = include_str!("../data/corpus/es_news_sample.counts.tsv");
pub const SAMPLE_VERBS: &str = include_str!("../data/sample_verbs.txt");

pub fn ontology() -> Arc<Ontology> {
    Arc::new(ONTOLOGY.parse().expect("shipped ontology"))
}

pub fn seed_lexicon() -> Lexicon {
    Lexicon::parse(SEED_LEXICON, ontology()).expect("shipped seed lexicon")
}

pub fn bank_es() -> Bank {
    Bank::parse(BANK_ES, &ontology()).expect("shipped Spanish bank")
}

pub fn bank_en() -> Bank {
    Bank::parse(BANK_EN, &ontology()).expect("shipped English bank")
}

/// Both Spanish dictionaries and the corpus sample.
pub fn resources_es() -> Resources {
    let mut r = Resources::new();
    r.add_dictionary("es_mrd_sample", DICT_ES_SAMPLE).expect("fresh resources");
    r.add_dictionary("es_general", DICT_ES_GENERAL).expect("fresh resources");
    r.add_corpus_text(CORPUS_ES);
    r
}

pub fn sample_verbs() -> Vec<&'static str> {
    SAMPLE_VERBS.lines().map(str::trim).filter(|l| !l.is_empty()).collect()
}
