//! Four-stage analyst pipeline turning a news corpus into a sector impact
//! table, behind a pluggable text-generation backend.

use alloc::borrow::ToOwned;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::market::Sector;
use crate::political::{Polarity, PoliticalError, SectorImpactTable};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AgentError {
    #[error("{role}: template placeholder `{{{placeholder}}}` has no input")]
    MissingPlaceholder { role: AgentRole, placeholder: String },
    #[error("{role}: backend `{backend}` failed: {source}")]
    Backend { role: AgentRole, backend: String, source: BackendError },
    #[error("synthesis output has no fenced csv block")]
    NoTableBlock { raw: String },
    #[error("synthesis table rejected: {source}")]
    TableParse { source: PoliticalError, raw: String },
}

impl AgentError {
    /// The unparsed synthesis text, kept for inspection.
    pub fn raw_output(&self) -> Option<&str> {
        match self {
            AgentError::NoTableBlock { raw } | AgentError::TableParse { raw, .. } => Some(raw),
            _ => None,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackendError {
    #[error("transport: {0}")]
    Transport(String),
    #[error("refused: {0}")]
    Refusal(String),
    #[error("unrecognized prompt: {0}")]
    UnknownPrompt(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NewsArticle {
    pub article_id: String,
    pub published_at: NaiveDate,
    pub source: String,
    pub title: String,
    pub body: String,
}

/// Keep articles dated within `[start, end]`, sorted by date then id.
/// Returns the kept articles and the ids of rejected ones.
pub fn filter_corpus(articles: Vec<NewsArticle>, start: NaiveDate, end: NaiveDate) -> (Vec<NewsArticle>, Vec<String>) {
    let (mut kept, rejected): (Vec<_>, Vec<_>) =
        articles.into_iter().partition(|a| a.published_at >= start && a.published_at <= end);
    kept.sort_by(|a, b| a.published_at.cmp(&b.published_at).then_with(|| a.article_id.cmp(&b.article_id)));
    (kept, rejected.into_iter().map(|a| a.article_id).collect())
}

/// Plain-text digest fed to the first analyst.
pub fn digest(articles: &[NewsArticle]) -> String {
    let mut out = String::new();
    for a in articles {
        out.push_str(&format!("[{}] {} ({}, {})\n{}\n\n", a.article_id, a.title, a.source, a.published_at, a.body.trim()));
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentRole {
    NewsAnalyst,
    PolicyAnalyst,
    MarketAnalyst,
    SynthesisAnalyst,
}

impl AgentRole {
    /// Pipeline order.
    pub const ALL: [AgentRole; 4] =
        [AgentRole::NewsAnalyst, AgentRole::PolicyAnalyst, AgentRole::MarketAnalyst, AgentRole::SynthesisAnalyst];

    pub fn name(self) -> &'static str {
        match self {
            AgentRole::NewsAnalyst => "news_analyst",
            AgentRole::PolicyAnalyst => "policy_analyst",
            AgentRole::MarketAnalyst => "market_analyst",
            AgentRole::SynthesisAnalyst => "synthesis_analyst",
        }
    }

    pub fn from_name(name: &str) -> Option<AgentRole> {
        AgentRole::ALL.into_iter().find(|r| r.name() == name)
    }

    pub fn default_template(self) -> &'static str {
        match self {
            AgentRole::NewsAnalyst => include_str!("../templates/news_analyst.txt"),
            AgentRole::PolicyAnalyst => include_str!("../templates/policy_analyst.txt"),
            AgentRole::MarketAnalyst => include_str!("../templates/market_analyst.txt"),
            AgentRole::SynthesisAnalyst => include_str!("../templates/synthesis_analyst.txt"),
        }
    }
}

impl fmt::Display for AgentRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// `{name}` placeholders in order of first appearance.
pub fn placeholders(template: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        let after = &rest[open + 1..];
        match after.find('}') {
            Some(close) => {
                let name = &after[..close];
                if !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                    if !out.iter().any(|p| p == name) {
                        out.push(name.to_owned());
                    }
                }
                rest = &after[close + 1..];
            }
            None => break,
        }
    }
    out
}

/// Substitute every placeholder; any without an input is an error.
pub fn render(role: AgentRole, template: &str, inputs: &[(&str, &str)]) -> Result<String, AgentError> {
    let mut out = String::from(template);
    for name in placeholders(template) {
        let value = inputs.iter().find(|(k, _)| *k == name).map(|(_, v)| *v).ok_or_else(|| {
            AgentError::MissingPlaceholder { role, placeholder: name.clone() }
        })?;
        out = out.replace(&format!("{{{name}}}"), value);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationParams {
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Default for GenerationParams {
    fn default() -> Self {
        GenerationParams { temperature: 0.0, max_tokens: 2048 }
    }
}

/// Text in, text out.
pub trait TextBackend {
    fn backend_id(&self) -> String;
    fn generate(&self, prompt: &str, params: &GenerationParams) -> Result<String, BackendError>;
}

/// Role named on a `Role: <name>` line of a rendered prompt.
pub fn prompt_role(prompt: &str) -> Option<AgentRole> {
    prompt.lines().find_map(|l| l.trim().strip_prefix("Role:").and_then(|r| AgentRole::from_name(r.trim())))
}

/// Offline backend answering each role with canned text. Its synthesis
/// report ends with `table` rendered as CSV.
#[derive(Clone, Debug)]
pub struct MockBackend {
    pub table_csv: String,
}

impl Default for MockBackend {
    fn default() -> Self {
        MockBackend { table_csv: SectorImpactTable::default().to_csv() }
    }
}

impl MockBackend {
    pub fn with_table_csv(table_csv: impl Into<String>) -> Self {
        MockBackend { table_csv: table_csv.into() }
    }

    /// A mock whose synthesis table leaves out `sector`.
    pub fn dropping_sector(sector: Sector) -> Self {
        let csv: String = SectorImpactTable::default()
            .to_csv()
            .lines()
            .filter(|l| !l.starts_with(&format!("{},", sector.name())))
            .flat_map(|l| [l, "\n"])
            .collect();
        MockBackend { table_csv: csv }
    }
}

impl TextBackend for MockBackend {
    fn backend_id(&self) -> String {
        "mock".into()
    }

    fn generate(&self, prompt: &str, _params: &GenerationParams) -> Result<String, BackendError> {
        let role = prompt_role(prompt).ok_or_else(|| BackendError::UnknownPrompt("no Role line".into()))?;
        Ok(match role {
            AgentRole::NewsAnalyst => "- Both campaigns emphasise the economy in the closing week.\n\
                 - Candidate 1 promises lower corporate taxes, tariffs and expanded domestic energy output.\n\
                 - Candidate 2 promises health-care subsidies, consumer relief and clean-technology credits.\n"
                .into(),
            AgentRole::PolicyAnalyst => "| Area | Candidate 1 | Candidate 2 |\n|---|---|---|\n\
                 | Fiscal | tax cuts | targeted credits |\n\
                 | Trade | broad tariffs | selective tariffs |\n\
                 | Energy | fossil expansion | renewables |\n\
                 | Health | deregulation | coverage expansion |\n"
                .into(),
            AgentRole::MarketAnalyst => {
                let mut out = String::new();
                let table = SectorImpactTable::default();
                for s in Sector::ALL {
                    out.push_str(&format!(
                        "{}: Candidate 1 {}, Candidate 2 {}.\n",
                        s.name(),
                        direction(table.polarity(crate::political::Candidate::One, s)),
                        direction(table.polarity(crate::political::Candidate::Two, s)),
                    ));
                }
                out
            }
            AgentRole::SynthesisAnalyst => format!(
                "# Election sector outlook\n\n\
                 Cyclical and rate-sensitive sectors lean towards Candidate 1; technology, \
                 health care and staples lean towards Candidate 2.\n\n```csv\n{}```\n",
                self.table_csv
            ),
        })
    }
}

fn direction(p: Polarity) -> &'static str {
    match p {
        Polarity::Positive => "supportive",
        Polarity::Negative => "adverse",
    }
}

/// Audit record of one agent call.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentRun {
    pub role: AgentRole,
    pub backend_id: String,
    /// SHA-256 of the rendered prompt, lowercase hex.
    pub prompt_hash: String,
    pub output: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest.iter() {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

pub fn run_agent<B: TextBackend + ?Sized>(
    role: AgentRole,
    template: &str,
    inputs: &[(&str, &str)],
    backend: &B,
    params: &GenerationParams,
) -> Result<AgentRun, AgentError> {
    let prompt = render(role, template, inputs)?;
    let output = backend
        .generate(&prompt, params)
        .map_err(|source| AgentError::Backend { role, backend: backend.backend_id(), source })?;
    Ok(AgentRun { role, backend_id: backend.backend_id(), prompt_hash: sha256_hex(prompt.as_bytes()), output })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthesisOutput {
    pub markdown_report: String,
    pub sector_table: SectorImpactTable,
    pub transcript: Vec<AgentRun>,
}

/// Body of the last fenced block tagged `csv`.
pub fn extract_table_block(markdown: &str) -> Option<&str> {
    let start = markdown.rfind("```csv")?;
    let body = &markdown[start + "```csv".len()..];
    let body = body.strip_prefix("\r\n").or_else(|| body.strip_prefix('\n')).unwrap_or(body);
    let end = body.find("```")?;
    Some(&body[..end])
}

pub fn parse_synthesis(markdown: &str) -> Result<SectorImpactTable, AgentError> {
    let block = extract_table_block(markdown).ok_or_else(|| AgentError::NoTableBlock { raw: markdown.into() })?;
    SectorImpactTable::parse_csv(block).map_err(|source| AgentError::TableParse { source, raw: markdown.into() })
}

/// Templates per role; defaults are the bundled ones.
#[derive(Clone, Debug)]
pub struct Templates {
    pub news: String,
    pub policy: String,
    pub market: String,
    pub synthesis: String,
}

impl Default for Templates {
    fn default() -> Self {
        Templates {
            news: AgentRole::NewsAnalyst.default_template().into(),
            policy: AgentRole::PolicyAnalyst.default_template().into(),
            market: AgentRole::MarketAnalyst.default_template().into(),
            synthesis: AgentRole::SynthesisAnalyst.default_template().into(),
        }
    }
}

/// News -> policy -> market -> synthesis, each stage reading earlier outputs.
pub fn run_pipeline<B: TextBackend + ?Sized>(
    articles: &[NewsArticle],
    backend: &B,
    templates: &Templates,
    params: &GenerationParams,
) -> Result<SynthesisOutput, AgentError> {
    let corpus = digest(articles);
    let news = run_agent(AgentRole::NewsAnalyst, &templates.news, &[("articles", &corpus)], backend, params)?;
    let policy =
        run_agent(AgentRole::PolicyAnalyst, &templates.policy, &[("news_summary", &news.output)], backend, params)?;
    let market = run_agent(
        AgentRole::MarketAnalyst,
        &templates.market,
        &[("policy_comparison", &policy.output)],
        backend,
        params,
    )?;
    let synthesis = run_agent(
        AgentRole::SynthesisAnalyst,
        &templates.synthesis,
        &[("news_summary", &news.output), ("policy_comparison", &policy.output), ("sector_analysis", &market.output)],
        backend,
        params,
    )?;
    let sector_table = parse_synthesis(&synthesis.output)?;
    Ok(SynthesisOutput {
        markdown_report: synthesis.output.clone(),
        sector_table,
        transcript: alloc::vec![news, policy, market, synthesis],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    fn article(id: &str, day: u32) -> NewsArticle {
        NewsArticle {
            article_id: id.into(),
            published_at: NaiveDate::from_ymd_opt(2024, 10, day).unwrap(),
            source: "wire".into(),
            title: "t".into(),
            body: "b".into(),
        }
    }

    #[test]
    fn corpus_filter_and_sort() {
        let d = |day| NaiveDate::from_ymd_opt(2024, 10, day).unwrap();
        let (kept, rejected) = filter_corpus(vec![article("c", 20), article("a", 3), article("b", 10)], d(1), d(31));
        assert_eq!(kept.iter().map(|a| a.article_id.as_str()).collect::<Vec<_>>(), ["a", "b", "c"]);
        assert!(rejected.is_empty());
        let (kept, rejected) = filter_corpus(vec![article("x", 30)], d(1), d(29));
        assert!(kept.is_empty());
        assert_eq!(rejected, ["x"]);
    }

    #[test]
    fn placeholders_found() {
        assert_eq!(placeholders("a {x} b {y_1} {x} {not valid}"), ["x", "y_1"]);
        assert_eq!(placeholders(AgentRole::NewsAnalyst.default_template()), ["articles"]);
        assert_eq!(
            placeholders(AgentRole::SynthesisAnalyst.default_template()),
            ["news_summary", "policy_comparison", "sector_analysis"]
        );
    }

    #[test]
    fn missing_placeholder_named() {
        let err = run_agent(
            AgentRole::NewsAnalyst,
            AgentRole::NewsAnalyst.default_template(),
            &[],
            &MockBackend::default(),
            &GenerationParams::default(),
        )
        .unwrap_err();
        assert!(err.to_string().contains("{articles}"), "{err}");
    }

    #[test]
    fn mock_is_pure() {
        let digest = digest(&[article("a", 1), article("b", 2)]);
        let t = AgentRole::NewsAnalyst.default_template();
        let run = |_| {
            run_agent(AgentRole::NewsAnalyst, t, &[("articles", &digest)], &MockBackend::default(), &GenerationParams::default())
                .unwrap()
        };
        let (a, b) = (run(0), run(1));
        assert_eq!(a, b);
        assert!(!a.output.is_empty());
        assert_eq!(a.prompt_hash.len(), 64);
    }

    #[test]
    fn mock_pipeline_yields_default_table() {
        let out = run_pipeline(&[article("a", 1)], &MockBackend::default(), &Templates::default(), &GenerationParams::default())
            .unwrap();
        assert_eq!(out.sector_table, SectorImpactTable::default());
        assert!(out.markdown_report.starts_with("# "));
        assert_eq!(out.transcript.iter().map(|r| r.role).collect::<Vec<_>>(), AgentRole::ALL);
    }

    #[test]
    fn bad_tables_rejected_with_raw_text() {
        let params = GenerationParams::default();
        let err = run_pipeline(&[], &MockBackend::dropping_sector(Sector::RealEstate), &Templates::default(), &params)
            .unwrap_err();
        assert!(err.to_string().contains("Real Estate"), "{err}");
        assert!(err.raw_output().unwrap().contains("```csv"));

        let bad = SectorImpactTable::default().to_csv().replacen("Positive", "Neutral", 1);
        let err = run_pipeline(&[], &MockBackend::with_table_csv(bad), &Templates::default(), &params).unwrap_err();
        assert!(matches!(err, AgentError::TableParse { source: PoliticalError::BadRow { .. }, .. }));
    }
}
