//! Episode scores (reward, success, completion) and text metrics for
//! instruction utterances: BLEU-1..4 and keyword precision/recall.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use crate::matching::max_match_size;
use crate::voxel::{grid_from_structure, hamming, BlockColor, Structure, VoxelGrid, ZONE_CELLS};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("no episodes to aggregate")]
    NoEpisodes,
    #[error("candidate has no tokens")]
    EmptyCandidate,
    #[error("no reference texts")]
    NoReferences,
    #[error("BLEU order must be 1..=4, got {0}")]
    BadOrder(usize),
    #[error("lexicon: {0}")]
    Lexicon(String),
    #[error("{candidates} candidates but {references} reference lines")]
    CorpusMismatch { candidates: usize, references: usize },
}

/// Per-episode outcome used by the aggregate scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub task_id: String,
    pub g: i64,
    pub success: bool,
    pub rho: f64,
    pub steps_used: u32,
}

/// Normalized distance between target and built given their max match:
/// `(|T| + |B| - 2M) / max(1, |T| + |B|)`.
pub fn rho(target_len: usize, built_len: usize, max_match: usize) -> f64 {
    let total = target_len + built_len;
    debug_assert!(2 * max_match <= total);
    (total - 2 * max_match) as f64 / total.max(1) as f64
}

pub fn rho_of(built: &Structure, target: &Structure) -> f64 {
    rho(target.len(), built.len(), max_match_size(built, target))
}

/// Cells differing from the target laid down at its own coordinates, over
/// the zone volume. Frame dependent, unlike `rho`.
pub fn fixed_frame_hamming(built: &VoxelGrid, target: &Structure) -> f64 {
    let target = grid_from_structure(target).expect("validated target fits the zone");
    hamming(built, &target) as f64 / ZONE_CELLS as f64
}

/// Mean episode reward.
pub fn reward_score(summaries: &[EpisodeSummary]) -> Result<f64, MetricsError> {
    mean(summaries, |s| s.g as f64)
}

/// Fraction of episodes solved.
pub fn success_rate(summaries: &[EpisodeSummary]) -> Result<f64, MetricsError> {
    mean(summaries, |s| if s.success { 1.0 } else { 0.0 })
}

/// Mean of `1 - rho`.
pub fn completion_rate(summaries: &[EpisodeSummary]) -> Result<f64, MetricsError> {
    mean(summaries, |s| 1.0 - s.rho)
}

fn mean(summaries: &[EpisodeSummary], f: impl Fn(&EpisodeSummary) -> f64) -> Result<f64, MetricsError> {
    if summaries.is_empty() {
        return Err(MetricsError::NoEpisodes);
    }
    Ok(summaries.iter().map(f).sum::<f64>() / summaries.len() as f64)
}

/// Lowercases and splits on whitespace; every other non-alphanumeric
/// character becomes a token of its own.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut word = String::new();
    for ch in text.chars().flat_map(char::to_lowercase) {
        if ch.is_alphanumeric() {
            word.push(ch);
            continue;
        }
        if !word.is_empty() {
            tokens.push(std::mem::take(&mut word));
        }
        if !ch.is_whitespace() {
            tokens.push(ch.to_string());
        }
    }
    if !word.is_empty() {
        tokens.push(word);
    }
    tokens
}

pub const MAX_BLEU_ORDER: usize = 4;

/// Clipped n-gram matches and totals for orders 1..=4, plus the lengths
/// the brevity penalty needs. Sums over a corpus give corpus BLEU.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BleuStats {
    pub matches: [usize; MAX_BLEU_ORDER],
    pub totals: [usize; MAX_BLEU_ORDER],
    pub candidate_len: usize,
    pub reference_len: usize,
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    for gram in tokens.windows(n) {
        *counts.entry(gram).or_insert(0) += 1;
    }
    counts
}

impl BleuStats {
    pub fn sentence(candidate: &str, references: &[&str]) -> Result<Self, MetricsError> {
        let cand = tokenize(candidate);
        if cand.is_empty() {
            return Err(MetricsError::EmptyCandidate);
        }
        if references.is_empty() {
            return Err(MetricsError::NoReferences);
        }
        let refs: Vec<Vec<String>> = references.iter().map(|r| tokenize(r)).collect();
        let mut stats = BleuStats {
            candidate_len: cand.len(),
            ..Default::default()
        };
        // closest reference length, shorter on ties
        stats.reference_len = refs
            .iter()
            .map(|r| r.len())
            .min_by_key(|&len| (len.abs_diff(cand.len()), len))
            .expect("nonempty references");
        for n in 1..=MAX_BLEU_ORDER {
            let mut max_ref: HashMap<&[String], usize> = HashMap::new();
            for r in &refs {
                for (gram, count) in ngram_counts(r, n) {
                    let slot = max_ref.entry(gram).or_insert(0);
                    *slot = (*slot).max(count);
                }
            }
            let cand_counts = ngram_counts(&cand, n);
            stats.totals[n - 1] = cand.len().saturating_sub(n - 1);
            stats.matches[n - 1] = cand_counts
                .iter()
                .map(|(gram, &c)| c.min(max_ref.get(gram).copied().unwrap_or(0)))
                .sum();
        }
        Ok(stats)
    }

    pub fn add(&mut self, other: &BleuStats) {
        for i in 0..MAX_BLEU_ORDER {
            self.matches[i] += other.matches[i];
            self.totals[i] += other.totals[i];
        }
        self.candidate_len += other.candidate_len;
        self.reference_len += other.reference_len;
    }

    /// BLEU-n with uniform weights and no smoothing.
    pub fn score(&self, n: usize) -> Result<f64, MetricsError> {
        if !(1..=MAX_BLEU_ORDER).contains(&n) {
            return Err(MetricsError::BadOrder(n));
        }
        if self.candidate_len == 0 {
            return Err(MetricsError::EmptyCandidate);
        }
        let mut product = 1.0;
        for i in 0..n {
            if self.matches[i] == 0 {
                return Ok(0.0);
            }
            product *= self.matches[i] as f64 / self.totals[i] as f64;
        }
        let bp = if self.candidate_len > self.reference_len {
            1.0
        } else {
            (1.0 - self.reference_len as f64 / self.candidate_len as f64).exp()
        };
        Ok(bp * product.powf(1.0 / n as f64))
    }
}

pub fn bleu(candidate: &str, references: &[&str], n: usize) -> Result<f64, MetricsError> {
    if !(1..=MAX_BLEU_ORDER).contains(&n) {
        return Err(MetricsError::BadOrder(n));
    }
    BleuStats::sentence(candidate, references)?.score(n)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Colors,
    Spatial,
    Dialog,
}

impl Category {
    pub const ALL: [Category; 3] = [Category::Colors, Category::Spatial, Category::Dialog];

    pub fn name(self) -> &'static str {
        match self {
            Category::Colors => "colors",
            Category::Spatial => "spatial",
            Category::Dialog => "dialog",
        }
    }
}

/// Domain terms per category. Terms are single lowercase tokens; a term may
/// sit in more than one category.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KeywordLexicon {
    pub colors: BTreeSet<String>,
    pub spatial: BTreeSet<String>,
    pub dialog: BTreeSet<String>,
}

const SPATIAL_TERMS: [&str; 14] = [
    "left", "right", "top", "bottom", "front", "back", "middle", "next", "above", "below", "diagonal", "tall", "row",
    "column",
];
const DIALOG_TERMS: [&str; 14] = [
    "yes", "no", "okay", "sorry", "mistake", "undo", "done", "what", "where", "which", "how", "who", "why", "when",
];

impl Default for KeywordLexicon {
    fn default() -> Self {
        let set = |terms: &[&str]| terms.iter().map(|t| t.to_string()).collect();
        KeywordLexicon {
            colors: BlockColor::ALL.iter().map(|c| c.name().to_string()).collect(),
            spatial: set(&SPATIAL_TERMS),
            dialog: set(&DIALOG_TERMS),
        }
    }
}

impl KeywordLexicon {
    /// Reads a TOML table with `colors`, `spatial` and `dialog` string
    /// arrays. Terms are lowercased.
    pub fn from_toml(text: &str) -> Result<Self, MetricsError> {
        let raw: KeywordLexicon = toml::from_str(text).map_err(|e| MetricsError::Lexicon(e.message().to_string()))?;
        let lower = |set: BTreeSet<String>| -> BTreeSet<String> { set.into_iter().map(|t| t.to_lowercase()).collect() };
        let lex = KeywordLexicon {
            colors: lower(raw.colors),
            spatial: lower(raw.spatial),
            dialog: lower(raw.dialog),
        };
        for cat in Category::ALL {
            let terms = lex.terms(cat);
            if terms.is_empty() {
                return Err(MetricsError::Lexicon(format!("category `{}` is empty", cat.name())));
            }
            if let Some(bad) = terms.iter().find(|t| tokenize(t).len() != 1) {
                return Err(MetricsError::Lexicon(format!("term `{bad}` is not a single token")));
            }
        }
        Ok(lex)
    }

    pub fn terms(&self, category: Category) -> &BTreeSet<String> {
        match category {
            Category::Colors => &self.colors,
            Category::Spatial => &self.spatial,
            Category::Dialog => &self.dialog,
        }
    }

    pub fn contains(&self, token: &str) -> bool {
        Category::ALL.iter().any(|&c| self.terms(c).contains(token))
    }
}

/// Keyword token counts for one candidate/reference pair (or a corpus sum).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct KeywordCounts {
    pub candidate: usize,
    pub reference: usize,
    pub overlap: usize,
}

impl KeywordCounts {
    /// `None` when the candidate has no keyword tokens.
    pub fn precision(&self) -> Option<f64> {
        (self.candidate > 0).then(|| self.overlap as f64 / self.candidate as f64)
    }

    /// `None` when the reference has no keyword tokens.
    pub fn recall(&self) -> Option<f64> {
        (self.reference > 0).then(|| self.overlap as f64 / self.reference as f64)
    }

    pub fn add(&mut self, other: &KeywordCounts) {
        self.candidate += other.candidate;
        self.reference += other.reference;
        self.overlap += other.overlap;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct KeywordScores {
    pub colors: KeywordCounts,
    pub spatial: KeywordCounts,
    pub dialog: KeywordCounts,
    /// Tokens in any category, each counted once.
    pub all: KeywordCounts,
}

impl KeywordScores {
    pub fn get(&self, category: Category) -> &KeywordCounts {
        match category {
            Category::Colors => &self.colors,
            Category::Spatial => &self.spatial,
            Category::Dialog => &self.dialog,
        }
    }

    pub fn add(&mut self, other: &KeywordScores) {
        self.colors.add(&other.colors);
        self.spatial.add(&other.spatial);
        self.dialog.add(&other.dialog);
        self.all.add(&other.all);
    }
}

fn multiset_counts(tokens: &[String], keep: impl Fn(&str) -> bool) -> KeywordCountsBuilder<'_> {
    let mut bag: HashMap<&str, usize> = HashMap::new();
    for t in tokens.iter().filter(|t| keep(t)) {
        *bag.entry(t.as_str()).or_insert(0) += 1;
    }
    KeywordCountsBuilder(bag)
}

struct KeywordCountsBuilder<'a>(HashMap<&'a str, usize>);

impl KeywordCountsBuilder<'_> {
    fn against(&self, reference: &KeywordCountsBuilder<'_>) -> KeywordCounts {
        KeywordCounts {
            candidate: self.0.values().sum(),
            reference: reference.0.values().sum(),
            overlap: self
                .0
                .iter()
                .map(|(t, &c)| c.min(reference.0.get(t).copied().unwrap_or(0)))
                .sum(),
        }
    }
}

pub fn keyword_pr(candidate: &str, reference: &str, lex: &KeywordLexicon) -> KeywordScores {
    let cand = tokenize(candidate);
    let refr = tokenize(reference);
    let counts = |keep: &dyn Fn(&str) -> bool| multiset_counts(&cand, keep).against(&multiset_counts(&refr, keep));
    KeywordScores {
        colors: counts(&|t| lex.colors.contains(t)),
        spatial: counts(&|t| lex.spatial.contains(t)),
        dialog: counts(&|t| lex.dialog.contains(t)),
        all: counts(&|t| lex.contains(t)),
    }
}

/// Output encoding for reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReportFormat {
    #[default]
    Text,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "text" => Ok(ReportFormat::Text),
            "json" => Ok(ReportFormat::Json),
            other => Err(format!("unknown format `{other}` (expected text or json)")),
        }
    }
}

pub fn round4(x: f64) -> f64 {
    (x * 1e4).round() / 1e4
}

fn ser_round4<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(round4(*x))
}

fn ser_round4_opt<S: Serializer>(x: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match x {
        Some(v) => s.serialize_some(&round4(*v)),
        None => s.serialize_none(),
    }
}

fn ser_round4_arr<S: Serializer>(xs: &[f64; MAX_BLEU_ORDER], s: S) -> Result<S::Ok, S::Error> {
    xs.map(round4).serialize(s)
}

fn fmt4(x: f64) -> String {
    format!("{:.4}", round4(x))
}

fn fmt4_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_string(), fmt4)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeRow {
    pub task_id: String,
    pub g: i64,
    pub c: u8,
    #[serde(serialize_with = "ser_round4")]
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    pub n: usize,
    #[serde(serialize_with = "ser_round4")]
    pub s_r: f64,
    #[serde(serialize_with = "ser_round4")]
    pub s_s: f64,
    #[serde(serialize_with = "ser_round4")]
    pub s_c: f64,
}

/// One row per episode plus the aggregate scores.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub episodes: Vec<EpisodeRow>,
    pub aggregate: Aggregate,
}

impl EvalReport {
    pub fn new(summaries: &[EpisodeSummary]) -> Result<Self, MetricsError> {
        let aggregate = Aggregate {
            n: summaries.len(),
            s_r: reward_score(summaries)?,
            s_s: success_rate(summaries)?,
            s_c: completion_rate(summaries)?,
        };
        let episodes = summaries
            .iter()
            .map(|s| EpisodeRow {
                task_id: s.task_id.clone(),
                g: s.g,
                c: s.success as u8,
                rho: s.rho,
            })
            .collect();
        Ok(EvalReport { episodes, aggregate })
    }

    pub fn render(&self, format: ReportFormat) -> String {
        match format {
            ReportFormat::Json => serde_json::to_string_pretty(self).expect("report serialization") + "\n",
            ReportFormat::Text => {
                let mut out = String::new();
                for e in &self.episodes {
                    writeln!(
                        out,
                        "episode task_id={} g={} c={} rho={}",
                        e.task_id,
                        e.g,
                        e.c,
                        fmt4(e.rho)
                    )
                    .unwrap();
                }
                let a = &self.aggregate;
                writeln!(
                    out,
                    "aggregate n={} S_r={} S_s={} S_c={}",
                    a.n,
                    fmt4(a.s_r),
                    fmt4(a.s_s),
                    fmt4(a.s_c)
                )
                .unwrap();
                out
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrRow {
    #[serde(serialize_with = "ser_round4_opt")]
    pub precision: Option<f64>,
    #[serde(serialize_with = "ser_round4_opt")]
    pub recall: Option<f64>,
}

impl From<&KeywordCounts> for PrRow {
    fn from(c: &KeywordCounts) -> Self {
        PrRow {
            precision: c.precision(),
            recall: c.recall(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KeywordRow {
    pub colors: PrRow,
    pub spatial: PrRow,
    pub dialog: PrRow,
    pub all: PrRow,
}

impl From<&KeywordScores> for KeywordRow {
    fn from(s: &KeywordScores) -> Self {
        KeywordRow {
            colors: (&s.colors).into(),
            spatial: (&s.spatial).into(),
            dialog: (&s.dialog).into(),
            all: (&s.all).into(),
        }
    }
}

impl KeywordRow {
    fn rows(&self) -> [(&'static str, &PrRow); 4] {
        [
            ("colors", &self.colors),
            ("spatial", &self.spatial),
            ("dialog", &self.dialog),
            ("all", &self.all),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UtteranceRow {
    pub index: usize,
    #[serde(serialize_with = "ser_round4_arr")]
    pub bleu: [f64; MAX_BLEU_ORDER],
    pub keywords: KeywordRow,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusRow {
    pub n: usize,
    #[serde(serialize_with = "ser_round4_arr")]
    pub bleu: [f64; MAX_BLEU_ORDER],
    pub keywords: KeywordRow,
}

/// Per-utterance and corpus BLEU-1..4 and keyword precision/recall.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TextReport {
    pub utterances: Vec<UtteranceRow>,
    pub corpus: CorpusRow,
}

impl TextReport {
    /// `references[i]` holds the reference texts for `candidates[i]`.
    pub fn new(candidates: &[&str], references: &[Vec<&str>], lex: &KeywordLexicon) -> Result<Self, MetricsError> {
        if candidates.len() != references.len() {
            return Err(MetricsError::CorpusMismatch {
                candidates: candidates.len(),
                references: references.len(),
            });
        }
        if candidates.is_empty() {
            return Err(MetricsError::EmptyCandidate);
        }
        let mut corpus_bleu = BleuStats::default();
        let mut corpus_kw = KeywordScores::default();
        let mut utterances = Vec::with_capacity(candidates.len());
        for (index, (cand, refs)) in candidates.iter().zip(references).enumerate() {
            let stats = BleuStats::sentence(cand, refs)?;
            corpus_bleu.add(&stats);
            // keywords are compared against the first reference
            let kw = keyword_pr(cand, refs[0], lex);
            corpus_kw.add(&kw);
            utterances.push(UtteranceRow {
                index,
                bleu: bleu_orders(&stats)?,
                keywords: (&kw).into(),
            });
        }
        let corpus = CorpusRow {
            n: candidates.len(),
            bleu: bleu_orders(&corpus_bleu)?,
            keywords: (&corpus_kw).into(),
        };
        Ok(TextReport { utterances, corpus })
    }

    pub fn render(&self, format: ReportFormat) -> String {
        match format {
            ReportFormat::Json => serde_json::to_string_pretty(self).expect("report serialization") + "\n",
            ReportFormat::Text => {
                let mut out = String::new();
                let line = |out: &mut String, head: String, bleu: &[f64; 4], kw: &KeywordRow| {
                    write!(out, "{head}").unwrap();
                    for (i, b) in bleu.iter().enumerate() {
                        write!(out, " bleu{}={}", i + 1, fmt4(*b)).unwrap();
                    }
                    for (name, row) in kw.rows() {
                        write!(
                            out,
                            " {name}_p={} {name}_r={}",
                            fmt4_opt(row.precision),
                            fmt4_opt(row.recall)
                        )
                        .unwrap();
                    }
                    out.push('\n');
                };
                for u in &self.utterances {
                    line(&mut out, format!("utterance index={}", u.index), &u.bleu, &u.keywords);
                }
                line(
                    &mut out,
                    format!("corpus n={}", self.corpus.n),
                    &self.corpus.bleu,
                    &self.corpus.keywords,
                );
                out
            }
        }
    }
}

fn bleu_orders(stats: &BleuStats) -> Result<[f64; MAX_BLEU_ORDER], MetricsError> {
    let mut out = [0.0; MAX_BLEU_ORDER];
    for (i, slot) in out.iter_mut().enumerate() {
        *slot = stats.score(i + 1)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::voxel::Pos;

    fn summary(g: i64, success: bool, rho: f64) -> EpisodeSummary {
        EpisodeSummary {
            task_id: "t".into(),
            g,
            success,
            rho,
            steps_used: 1,
        }
    }

    #[test]
    fn aggregate_hand_cases() {
        let s = [summary(2, true, 0.0), summary(4, false, 0.5)];
        assert_eq!(reward_score(&s).unwrap(), 3.0);
        assert_eq!(success_rate(&s).unwrap(), 0.5);
        assert_eq!(completion_rate(&s).unwrap(), 0.75);
        assert_eq!(reward_score(&[summary(7, false, 1.0)]).unwrap(), 7.0);
        let per_step: i64 = [2, -2, 1, -1].iter().sum();
        assert_eq!(reward_score(&[summary(per_step, false, 1.0)]).unwrap(), 0.0);
        assert_eq!(reward_score(&[]), Err(MetricsError::NoEpisodes));
        assert_eq!(success_rate(&[]), Err(MetricsError::NoEpisodes));
        assert_eq!(completion_rate(&[]), Err(MetricsError::NoEpisodes));
    }

    #[test]
    fn rho_cases() {
        assert_eq!(rho(5, 5, 5), 0.0);
        assert_eq!(rho(5, 0, 0), 1.0);
        assert_eq!(rho(5, 4, 4), 1.0 / 9.0);
        assert_eq!(rho(0, 0, 0), 0.0);

        let l: Structure = [(3, 0, 3), (4, 0, 3), (5, 0, 3), (3, 0, 4), (3, 0, 5)]
            .into_iter()
            .map(|(x, y, z)| (Pos::new(x, y, z), BlockColor::Red))
            .collect();
        let shifted: Structure = l.iter().take(4).map(|(p, c)| (p.offset(2, 0, 1), c)).collect();
        assert_eq!(rho_of(&shifted, &l), 1.0 / 9.0);
        assert_eq!(rho_of(&Structure::new(), &l), 1.0);
    }

    #[test]
    fn tokenizer_splits_punctuation() {
        assert_eq!(
            tokenize("Place a RED block, then stop."),
            ["place", "a", "red", "block", ",", "then", "stop", "."]
        );
        assert_eq!(tokenize("don't"), ["don", "'", "t"]);
        assert!(tokenize("   ").is_empty());
    }

    #[test]
    fn bleu_fixtures() {
        let s = "place a red block on top of the blue one";
        assert_eq!(bleu(s, &[s], 4).unwrap(), 1.0);
        let b1 = bleu("place a red block", &["place the red block"], 1).unwrap();
        assert!((b1 - 0.75).abs() < 1e-9);
        assert_eq!(bleu("green tower", &["place the red block"], 1).unwrap(), 0.0);
        assert_eq!(bleu("", &["x"], 1), Err(MetricsError::EmptyCandidate));
        assert_eq!(bleu("x", &[], 1), Err(MetricsError::NoReferences));
        assert_eq!(bleu("x", &["x"], 5), Err(MetricsError::BadOrder(5)));
    }

    #[test]
    fn bleu_brevity_and_closest_reference() {
        // 2 of 4 reference tokens, all matching: BP = exp(1 - 4/2)
        let b = bleu("red block", &["place the red block"], 1).unwrap();
        assert!((b - (-1.0f64).exp()).abs() < 1e-12);
        // closest reference length is 2, so no penalty; clipping takes the
        // max count over all references
        let b = bleu("red block", &["place the red block", "red blocks"], 1).unwrap();
        assert_eq!(b, 1.0);
    }

    #[test]
    fn bleu_bigram_by_hand() {
        // bigrams: "place a" no, "a red" no, "red block" yes -> 1/3; unigrams 3/4
        let b = bleu("place a red block", &["place the red block"], 2).unwrap();
        assert!((b - (0.75f64 * (1.0 / 3.0)).sqrt()).abs() < 1e-12);
        assert_eq!(bleu("place a red block", &["place the red block"], 3).unwrap(), 0.0);
    }

    #[test]
    fn keyword_examples() {
        let lex = KeywordLexicon::default();
        let kw = keyword_pr("place a red block", "put one red block on top", &lex);
        assert_eq!(kw.colors.precision(), Some(1.0));
        assert_eq!(kw.colors.recall(), Some(1.0));
        assert_eq!(kw.spatial.precision(), None);
        assert_eq!(kw.spatial.recall(), Some(0.0));

        let kw = keyword_pr("put it there", "left of the column", &lex);
        assert_eq!(
            kw.spatial,
            KeywordCounts {
                candidate: 0,
                reference: 2,
                overlap: 0
            }
        );

        let s = "yes, put the red one left of the blue column";
        let kw = keyword_pr(s, s, &lex);
        for c in Category::ALL {
            assert_eq!(kw.get(c).precision(), Some(1.0));
            assert_eq!(kw.get(c).recall(), Some(1.0));
        }
    }

    #[test]
    fn keyword_multiset_clipping() {
        let lex = KeywordLexicon::default();
        let kw = keyword_pr("red red red", "red blue", &lex);
        assert_eq!(
            kw.colors,
            KeywordCounts {
                candidate: 3,
                reference: 2,
                overlap: 1
            }
        );
        assert_eq!(kw.all, kw.colors);
    }

    #[test]
    fn lexicon_file() {
        let lex = KeywordLexicon::from_toml("colors = [\"Red\"]\nspatial = [\"up\"]\ndialog = [\"ok\"]\n").unwrap();
        assert!(lex.colors.contains("red"));
        assert!(KeywordLexicon::from_toml("colors = []\nspatial = [\"up\"]\ndialog = [\"ok\"]\n").is_err());
        assert!(KeywordLexicon::from_toml("colors = [\"a b\"]\nspatial = [\"up\"]\ndialog = [\"ok\"]\n").is_err());
        assert!(KeywordLexicon::from_toml("colors = [\"a\"]\n").is_err());
    }

    #[test]
    fn eval_report_formats() {
        let s = [summary(2, true, 0.0), summary(4, false, 1.0 / 9.0)];
        let r = EvalReport::new(&s).unwrap();
        assert_eq!(
            r.render(ReportFormat::Text),
            "episode task_id=t g=2 c=1 rho=0.0000\nepisode task_id=t g=4 c=0 rho=0.1111\n\
             aggregate n=2 S_r=3.0000 S_s=0.5000 S_c=0.9444\n"
        );
        let json: serde_json::Value = serde_json::from_str(&r.render(ReportFormat::Json)).unwrap();
        assert_eq!(json["aggregate"]["s_c"], 0.9444);
        assert_eq!(json["episodes"][1]["rho"], 0.1111);
    }

    #[test]
    fn text_report_identity_corpus() {
        let c = ["place a red block on the left", "yes that is done"];
        let refs: Vec<Vec<&str>> = c.iter().map(|s| vec![*s]).collect();
        let r = TextReport::new(&c, &refs, &KeywordLexicon::default()).unwrap();
        assert_eq!(r.corpus.bleu, [1.0; 4]);
        assert_eq!(
            r.corpus.keywords.colors,
            PrRow {
                precision: Some(1.0),
                recall: Some(1.0)
            }
        );
        assert!(r.render(ReportFormat::Text).contains("corpus n=2 bleu1=1.0000"));
        assert!(TextReport::new(&c, &refs[..1], &KeywordLexicon::default()).is_err());
    }
}
