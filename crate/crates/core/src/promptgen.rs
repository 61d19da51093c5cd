//! Four-section generation prompts: Background, Principle, Format, Language Style.
//!
//! Every section starts with a `### <Title>` marker line; the sections appear
//! in that fixed order and together cover the whole prompt text, so a
//! rendered prompt can always be split back into its parts.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::Result;
use crate::taxonomy::{Taxonomy, TaxonomyError};
use crate::util;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("unknown language style preset `{0}`")]
    UnknownStyle(String),
    #[error("discipline path is empty")]
    EmptyPath,
    #[error("section `{0}` has an invalid length target")]
    InvalidLength(String),
    #[error("keyword table names unknown discipline {0}")]
    UnknownKeywordClass(String),
    #[error(transparent)]
    Taxonomy(#[from] TaxonomyError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Section {
    Background,
    Principle,
    Format,
    LanguageStyle,
}

impl Section {
    pub const ORDER: [Section; 4] = [
        Section::Background,
        Section::Principle,
        Section::Format,
        Section::LanguageStyle,
    ];

    pub fn heading(self) -> &'static str {
        match self {
            Section::Background => "### Background",
            Section::Principle => "### Principle",
            Section::Format => "### Format",
            Section::LanguageStyle => "### Language Style",
        }
    }
}

/// Inclusive word-count bounds for one output field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordRange {
    pub min: u32,
    pub max: u32,
}

impl WordRange {
    pub fn new(min: u32, max: u32) -> Self {
        WordRange { min, max }
    }

    fn describe(&self) -> String {
        if self.min <= 1 {
            format!("at most {} words", self.max)
        } else {
            format!("between {} and {} words", self.min, self.max)
        }
    }
}

pub const TITLE_FIELD: &str = "title";
pub const ABSTRACT_FIELD: &str = "abstract";

pub fn default_section_lengths() -> BTreeMap<String, WordRange> {
    BTreeMap::from([
        (TITLE_FIELD.to_owned(), WordRange::new(1, 25)),
        (ABSTRACT_FIELD.to_owned(), WordRange::new(150, 250)),
    ])
}

/// Rules that pin the machine-readable output contract parsed by the generator.
pub fn default_format_rules() -> Vec<String> {
    [
        "Wrap the whole answer in a single fenced block that opens with ``` and closes with ```.",
        "Inside the block write exactly three fields, each starting on its own line and in this order: TITLE:, KEYWORDS:, ABSTRACT:.",
        "TITLE: is one line of plain text.",
        "KEYWORDS: is a comma-separated list of 3 to 6 keywords.",
        "ABSTRACT: is a single paragraph of plain text with no headings, lists or citations.",
        "Write nothing outside the fenced block.",
    ]
    .map(String::from)
    .to_vec()
}

pub const STYLE_PRESETS: [&str; 2] = ["formal-academic-english", "formal-academic-chinese"];
pub const DEFAULT_STYLE: &str = "formal-academic-english";

fn style_text(preset: &str) -> Option<&'static str> {
    match preset {
        "formal-academic-english" => Some(
            "Write in formal academic English. Keep the tone objective and precise, use the third person, \
             prefer the terminology of the discipline over everyday wording, and avoid promotional language, \
             rhetorical questions and exclamations.",
        ),
        "formal-academic-chinese" => Some(
            "Write in formal academic Chinese (Simplified). Keep the tone objective and precise, use the \
             conventional register of national funding applications, prefer the terminology of the discipline \
             over everyday wording, and avoid promotional language, rhetorical questions and exclamations. \
             Keep the field names TITLE:, KEYWORDS: and ABSTRACT: in English.",
        ),
        _ => None,
    }
}

/// Everything needed to render one prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSpec {
    pub discipline_code: String,
    /// Discipline names from the root down to the target.
    pub discipline_path: Vec<String>,
    pub keywords: Vec<String>,
    pub section_lengths: BTreeMap<String, WordRange>,
    pub language_style: String,
    pub format_rules: Vec<String>,
    pub seed_exemplar: Option<String>,
}

impl PromptSpec {
    /// A spec with default lengths, style and format rules.
    pub fn new(code: impl Into<String>, discipline_path: Vec<String>, keywords: Vec<String>) -> Self {
        PromptSpec {
            discipline_code: code.into(),
            discipline_path,
            keywords,
            section_lengths: default_section_lengths(),
            language_style: DEFAULT_STYLE.to_owned(),
            format_rules: default_format_rules(),
            seed_exemplar: None,
        }
    }

    pub fn validate(&self) -> Result<(), PromptError> {
        if self.discipline_path.is_empty() {
            return Err(PromptError::EmptyPath);
        }
        if style_text(&self.language_style).is_none() {
            return Err(PromptError::UnknownStyle(self.language_style.clone()));
        }
        for (name, range) in &self.section_lengths {
            if range.min == 0 || range.max < range.min {
                return Err(PromptError::InvalidLength(name.clone()));
            }
        }
        Ok(())
    }

    pub fn length(&self, field: &str) -> Option<WordRange> {
        self.section_lengths.get(field).copied()
    }

    /// SHA-256 over the canonical JSON form of the spec.
    pub fn hash(&self) -> String {
        util::sha256_hex(serde_json::to_vec(self).expect("spec serializes"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedPrompt {
    pub text: String,
    pub sections: BTreeMap<Section, Span>,
    pub spec_hash: String,
}

impl RenderedPrompt {
    pub fn section(&self, section: Section) -> &str {
        let span = self.sections[&section];
        &self.text[span.start..span.end]
    }
}

pub const KEYWORD_CLAUSE: &str = "The proposal must be centered on the keywords: ";

/// Renders `spec` into the four-section prompt.
pub fn render(spec: &PromptSpec) -> Result<RenderedPrompt, PromptError> {
    spec.validate()?;
    let style = style_text(&spec.language_style).expect("validated");
    let target = spec.discipline_path.last().expect("validated");

    let mut background = String::new();
    let _ = writeln!(
        background,
        "You are preparing one research proposal for a competitive national science funding program."
    );
    let _ = writeln!(background, "Discipline: {}", spec.discipline_path.join(" > "));
    if !spec.keywords.is_empty() {
        let _ = writeln!(background, "{KEYWORD_CLAUSE}{}.", spec.keywords.join(", "));
    }
    let _ = writeln!(background, "The proposal consists of a title and an abstract. The abstract summarizes the scientific problem, the research objectives, the methods and the expected outcomes.");
    let _ = writeln!(background, "Target lengths:");
    for (field, range) in &spec.section_lengths {
        let _ = writeln!(background, "- {field}: {}", range.describe());
    }
    if let Some(exemplar) = &spec.seed_exemplar {
        let _ = writeln!(
            background,
            "An existing abstract from this discipline, for reference only:"
        );
        let _ = writeln!(background, "\"\"\"\n{}\n\"\"\"", exemplar.trim());
    }

    let mut principle = String::new();
    let _ = writeln!(
        principle,
        "Act as a scientist writing a funding proposal in the discipline \"{target}\"."
    );
    let _ = writeln!(
        principle,
        "Propose a concrete, feasible and original research project that belongs to this discipline."
    );
    let _ = writeln!(principle, "State the problem, the objectives, the methods and the expected outcomes, using the established terminology of the field.");
    let _ = writeln!(principle, "Do not copy any reference text, do not mention that the proposal is generated, and write exactly one proposal.");
    let _ = writeln!(principle, "Respect the target lengths given above.");

    let mut format = String::from("Follow these rules strictly:\n");
    for (i, rule) in spec.format_rules.iter().enumerate() {
        let _ = writeln!(format, "{}. {rule}", i + 1);
    }

    let mut language = String::new();
    let _ = writeln!(language, "Preset: {}.", spec.language_style);
    let _ = writeln!(language, "{style}");

    let bodies = [background, principle, format, language];
    let mut text = String::new();
    let mut sections = BTreeMap::new();
    for (section, body) in Section::ORDER.into_iter().zip(bodies) {
        if !text.is_empty() {
            text.push('\n');
        }
        let start = text.len();
        text.push_str(section.heading());
        text.push('\n');
        text.push_str(&body);
        sections.insert(section, Span { start, end: text.len() });
    }
    // the blank separator lines belong to the preceding section
    let mut prev_end = text.len();
    for section in Section::ORDER.iter().rev() {
        let span = sections.get_mut(section).expect("inserted");
        span.end = prev_end;
        prev_end = span.start;
    }

    Ok(RenderedPrompt {
        text,
        sections,
        spec_hash: spec.hash(),
    })
}

/// Splits prompt text back into section spans by scanning the heading markers.
pub fn parse_sections(text: &str) -> Option<BTreeMap<Section, Span>> {
    let mut starts = Vec::new();
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        let trimmed = line.trim_end_matches('\n');
        if let Some(section) = Section::ORDER.iter().find(|s| s.heading() == trimmed) {
            starts.push((*section, offset));
        }
        offset += line.len();
    }
    let found: Vec<Section> = starts.iter().map(|(s, _)| *s).collect();
    if found != Section::ORDER || starts[0].1 != 0 {
        return None;
    }
    let mut out = BTreeMap::new();
    for (i, (section, start)) in starts.iter().enumerate() {
        let end = starts.get(i + 1).map_or(text.len(), |(_, s)| *s);
        out.insert(*section, Span { start: *start, end });
    }
    Some(out)
}

/// Expert keywords per discipline code.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct KeywordTable(pub BTreeMap<String, Vec<String>>);

impl KeywordTable {
    pub fn load(path: &Path) -> Result<Self> {
        util::read_json(path)
    }

    pub fn validate(&self, taxonomy: &Taxonomy) -> Result<(), PromptError> {
        match self.0.keys().find(|c| !taxonomy.contains(c)) {
            Some(code) => Err(PromptError::UnknownKeywordClass(code.clone())),
            None => Ok(()),
        }
    }

    pub fn get(&self, code: &str) -> &[String] {
        self.0.get(code).map_or(&[], Vec::as_slice)
    }
}

/// Up to `k` keywords for `code`, sampled without replacement and returned in table order.
pub fn keywords_for(table: &KeywordTable, code: &str, k: usize, seed: u64) -> Vec<String> {
    let pool = table.get(code);
    let k = k.min(pool.len());
    if k == 0 {
        return Vec::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(util::derive_seed(seed, &["keywords", code]));
    let mut picked = rand::seq::index::sample(&mut rng, pool.len(), k).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| pool[i].clone()).collect()
}

/// Defaults applied when turning a plan row into a [`PromptSpec`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PromptConfig {
    pub keywords_per_prompt: usize,
    pub section_lengths: BTreeMap<String, WordRange>,
    pub language_style: String,
    pub format_rules: Vec<String>,
}

impl Default for PromptConfig {
    fn default() -> Self {
        PromptConfig {
            keywords_per_prompt: 3,
            section_lengths: default_section_lengths(),
            language_style: DEFAULT_STYLE.to_owned(),
            format_rules: default_format_rules(),
        }
    }
}

/// Binds a discipline to a prompt spec: path from the taxonomy, keywords from the table.
pub fn spec_for_class(
    taxonomy: &Taxonomy,
    table: &KeywordTable,
    code: &str,
    cfg: &PromptConfig,
    seed: u64,
) -> Result<PromptSpec, PromptError> {
    let discipline_path = taxonomy.name_path(code)?;
    Ok(PromptSpec {
        discipline_code: code.to_owned(),
        discipline_path,
        keywords: keywords_for(table, code, cfg.keywords_per_prompt, seed),
        section_lengths: cfg.section_lengths.clone(),
        language_style: cfg.language_style.clone(),
        format_rules: cfg.format_rules.clone(),
        seed_exemplar: None,
    })
}
