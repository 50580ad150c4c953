//! The English→Chinese pronoun inventory that drives projection: for each
//! overt English pronoun, the ordered Chinese pronoun forms it may stand
//! for on the source side.

use std::collections::{BTreeMap, BTreeSet};

use super::CorpusError;

/// Grammatical role of an English pronoun entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PronounCategory {
    SubjPersonal,
    ObjPersonal,
    Possessive,
    ObjPossessive,
    Reflexive,
}

impl PronounCategory {
    pub fn as_str(self) -> &'static str {
        match self {
            PronounCategory::SubjPersonal => "subjective-personal",
            PronounCategory::ObjPersonal => "objective-personal",
            PronounCategory::Possessive => "possessive",
            PronounCategory::ObjPossessive => "objective-possessive",
            PronounCategory::Reflexive => "reflexive",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PronounEntry {
    pub category: PronounCategory,
    /// Chinese candidate forms, in preference order.
    pub candidates: Vec<String>,
}

/// Map from an English pronoun surface form to its source-side candidates.
#[derive(Debug, Clone)]
pub struct PronounInventory {
    entries: BTreeMap<String, PronounEntry>,
}

impl PronounInventory {
    pub fn new(entries: BTreeMap<String, PronounEntry>) -> Result<Self, CorpusError> {
        for (pron, entry) in &entries {
            if entry.candidates.is_empty() {
                return Err(CorpusError::EmptyCandidates(pron.clone()));
            }
        }
        Ok(PronounInventory { entries })
    }

    /// Exact lookup, falling back to ASCII lowercase so that
    /// sentence-initial capitalized forms ("You", "They") still match.
    /// "I" is stored capitalized, so lowercase "i" folds up to it.
    pub fn lookup(&self, pronoun: &str) -> Option<&PronounEntry> {
        if let Some(e) = self.entries.get(pronoun) {
            return Some(e);
        }
        let lower = pronoun.to_ascii_lowercase();
        if lower == "i" {
            return self.entries.get("I");
        }
        self.entries.get(&lower)
    }

    pub fn contains(&self, pronoun: &str) -> bool {
        self.lookup(pronoun).is_some()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &PronounEntry)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Every source-side (Chinese) pronoun form appearing in any entry.
    /// These are the forms counted as "overt pronouns" by the feature
    /// extractor.
    pub fn source_pronouns(&self) -> BTreeSet<&str> {
        self.entries
            .values()
            .flat_map(|e| e.candidates.iter().map(String::as_str))
            .collect()
    }

    pub fn is_source_pronoun(&self, token: &str) -> bool {
        self.entries
            .values()
            .any(|e| e.candidates.iter().any(|c| c == token))
    }
}

/// The built-in inventory: personal, possessive, and reflexive pronoun
/// paradigms. English forms that fill several grammatical roles with one
/// surface form (you, it, her, his, its) get a single entry whose
/// candidate list is the ordered union across roles, so projection can
/// consider every plausible source form and let the language model decide.
pub fn default_inventory() -> PronounInventory {
    use PronounCategory::*;
    let table: &[(&str, PronounCategory, &[&str])] = &[
        ("I", SubjPersonal, &["我"]),
        ("we", SubjPersonal, &["我们"]),
        ("you", SubjPersonal, &["你", "你们"]),
        ("he", SubjPersonal, &["他"]),
        ("she", SubjPersonal, &["她"]),
        ("it", SubjPersonal, &["它"]),
        ("they", SubjPersonal, &["他们", "她们", "它们"]),
        ("me", ObjPersonal, &["我"]),
        ("us", ObjPersonal, &["我们"]),
        ("him", ObjPersonal, &["他"]),
        ("her", ObjPersonal, &["她", "她的"]),
        ("them", ObjPersonal, &["她们", "他们", "它们"]),
        ("my", Possessive, &["我的"]),
        ("our", Possessive, &["我们的"]),
        ("your", Possessive, &["你的", "你们的"]),
        ("his", Possessive, &["他的"]),
        ("its", Possessive, &["它的"]),
        ("their", Possessive, &["他们的", "她们的", "它们的"]),
        ("mine", ObjPossessive, &["我的"]),
        ("ours", ObjPossessive, &["我们的"]),
        ("yours", ObjPossessive, &["你的", "你们的"]),
        ("hers", ObjPossessive, &["她的"]),
        ("theirs", ObjPossessive, &["她们的", "他们的", "它们的"]),
        ("myself", Reflexive, &["我自己"]),
        ("ourselves", Reflexive, &["我们自己"]),
        ("yourself", Reflexive, &["你自己"]),
        ("yourselves", Reflexive, &["你们自己"]),
        ("himself", Reflexive, &["他自己"]),
        ("herself", Reflexive, &["她自己"]),
        ("itself", Reflexive, &["它自己"]),
        ("themselves", Reflexive, &["他们自己", "她们自己", "它们自己"]),
    ];
    let entries = table
        .iter()
        .map(|&(pron, category, cands)| {
            (
                pron.to_string(),
                PronounEntry {
                    category,
                    candidates: cands.iter().map(|c| c.to_string()).collect(),
                },
            )
        })
        .collect();
    PronounInventory::new(entries).expect("built-in inventory is well-formed")
}
