//! News corpus on disk: one file per article.
//!
//! `*.json` files hold a `NewsArticle` object. `*.txt` files start with
//! `key: value` header lines (`id`, `date`, `source`, `title`), then a blank
//! line, then the body; a missing `id` defaults to the file stem. Other files
//! are ignored.

use std::path::Path;

use anyhow::{bail, Context, Result};
use chrono::NaiveDate;
use edsmf_core::agents::NewsArticle;

use crate::formats::read_text;

pub fn parse_text_article(text: &str, fallback_id: &str) -> Result<NewsArticle> {
    let (head, body) = match text.split_once("\n\n") {
        Some((h, b)) => (h, b),
        None => bail!("no blank line between header and body"),
    };
    let mut id = None;
    let mut date = None;
    let mut source = String::new();
    let mut title = String::new();
    for line in head.lines() {
        let Some((key, value)) = line.split_once(':') else {
            bail!("header line `{line}` is not `key: value`");
        };
        let value = value.trim();
        match key.trim().to_ascii_lowercase().as_str() {
            "id" => id = Some(value.to_string()),
            "date" => date = Some(NaiveDate::parse_from_str(value, "%Y-%m-%d").with_context(|| format!("bad date `{value}`"))?),
            "source" => source = value.into(),
            "title" => title = value.into(),
            other => bail!("unknown header `{other}`"),
        }
    }
    Ok(NewsArticle {
        article_id: id.unwrap_or_else(|| fallback_id.into()),
        published_at: date.context("missing `date` header")?,
        source,
        title,
        body: body.trim().into(),
    })
}

/// All articles under `dir` (not recursive), in file-name order.
pub fn load_corpus(dir: &Path) -> Result<Vec<NewsArticle>> {
    let mut entries: Vec<_> = std::fs::read_dir(dir)
        .with_context(|| format!("cannot read corpus {}", dir.display()))?
        .collect::<std::io::Result<_>>()?;
    entries.sort_by_key(|e| e.file_name());
    let mut out = Vec::new();
    for e in entries {
        let path = e.path();
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
        let article = match path.extension().and_then(|s| s.to_str()) {
            Some("json") => serde_json::from_str(&read_text(&path)?).map_err(anyhow::Error::from),
            Some("txt") => parse_text_article(&read_text(&path)?, &stem),
            _ => continue,
        }
        .with_context(|| format!("article {}", path.display()))?;
        out.push(article);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_and_json_articles() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(
            dir.path().join("a1.txt"),
            "date: 2024-10-02\nsource: Wire\ntitle: Tariff talk\n\nBody line one.\nBody line two.\n",
        )
        .unwrap();
        std::fs::write(
            dir.path().join("b.json"),
            r#"{"article_id":"x9","published_at":"2024-11-01","source":"Desk","title":"Rates","body":"Text"}"#,
        )
        .unwrap();
        std::fs::write(dir.path().join("notes.md"), "ignored").unwrap();
        let arts = load_corpus(dir.path()).unwrap();
        assert_eq!(arts.len(), 2);
        assert_eq!(arts[0].article_id, "a1");
        assert_eq!(arts[0].body, "Body line one.\nBody line two.");
        assert_eq!(arts[1].article_id, "x9");
    }

    #[test]
    fn missing_date_is_an_error() {
        assert!(parse_text_article("title: t\n\nbody", "x").is_err());
        assert!(parse_text_article("no header", "x").is_err());
    }
}
