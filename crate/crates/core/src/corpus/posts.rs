use regex::Regex;
use serde_json::Value;
use std::cmp::Ordering;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use super::markup::decode_entities;
use crate::error::{Error, Result};

/// One question or answer from the dump.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PostRecord {
    pub post_id: String,
    pub body_markup: String,
    pub tags: Vec<String>,
    pub vote_count: i64,
    pub is_answer: bool,
    /// Question id for answers.
    pub parent_id: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PostFormat {
    /// `Posts.xml` from the data dump, one `<row .../>` per line.
    DumpXml,
    /// One JSON object per line: `{id, body, tags, score, parent_id}`.
    Jsonl,
}

impl PostFormat {
    fn sniff(path: &Path, first_line: Option<&str>) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("xml") => PostFormat::DumpXml,
            Some(ext) if ext.eq_ignore_ascii_case("jsonl") || ext.eq_ignore_ascii_case("json") => {
                PostFormat::Jsonl
            }
            _ => match first_line.map(str::trim_start) {
                Some(l) if l.starts_with('<') => PostFormat::DumpXml,
                _ => PostFormat::Jsonl,
            },
        }
    }
}

/// Lowercase and deduplicate tags, keeping first-seen order.
pub fn normalize_tags<I, S>(tags: I) -> Vec<String>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut out: Vec<String> = Vec::new();
    for tag in tags {
        let t = tag.as_ref().trim().to_lowercase();
        if !t.is_empty() && !out.contains(&t) {
            out.push(t);
        }
    }
    out
}

/// Parse the dump's `<a><b>` or `|a|b|` tag encodings.
fn parse_tag_string(raw: &str) -> Vec<String> {
    let pieces = raw
        .split(['<', '>', '|'])
        .filter(|s| !s.trim().is_empty());
    normalize_tags(pieces)
}

/// Streaming reader over posts that satisfy a tag predicate.
///
/// Malformed records are skipped and counted; I/O failures end the stream
/// with an error item.
pub struct PostStream<F> {
    lines: std::io::Lines<BufReader<File>>,
    pending: Option<String>,
    format: PostFormat,
    path: PathBuf,
    filter: F,
    warnings: usize,
    line_no: usize,
    failed: bool,
}

impl<F> PostStream<F> {
    /// Records skipped so far because they were malformed.
    pub fn warnings(&self) -> usize {
        self.warnings
    }

    pub fn format(&self) -> PostFormat {
        self.format
    }
}

/// Open a dump (XML or JSONL) and stream the posts whose tags satisfy
/// `filter`, in file order.
pub fn load_posts<F>(path: &Path, filter: F) -> Result<PostStream<F>>
where
    F: FnMut(&[String]) -> bool,
{
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let pending = match lines.next() {
        Some(line) => Some(line.map_err(|e| Error::io(path, e))?),
        None => None,
    };
    let format = PostFormat::sniff(path, pending.as_deref());
    Ok(PostStream {
        lines,
        pending,
        format,
        path: path.to_path_buf(),
        filter,
        warnings: 0,
        line_no: 0,
        failed: false,
    })
}

impl<F> Iterator for PostStream<F>
where
    F: FnMut(&[String]) -> bool,
{
    type Item = Result<PostRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        loop {
            let line = match self.pending.take() {
                Some(l) => l,
                None => match self.lines.next()? {
                    Ok(l) => l,
                    Err(e) => {
                        self.failed = true;
                        return Some(Err(Error::io(&self.path, e)));
                    }
                },
            };
            self.line_no += 1;
            let parsed = match self.format {
                PostFormat::Jsonl => parse_jsonl_line(&line),
                PostFormat::DumpXml => parse_xml_row(&line),
            };
            match parsed {
                LineParse::Blank => continue,
                LineParse::Malformed(why) => {
                    log::warn!("{}:{}: skipping record: {}", self.path.display(), self.line_no, why);
                    self.warnings += 1;
                }
                LineParse::Record(post) => {
                    if (self.filter)(&post.tags) {
                        return Some(Ok(post));
                    }
                }
            }
        }
    }
}

enum LineParse {
    Blank,
    Malformed(String),
    Record(PostRecord),
}

fn id_string(v: &Value) -> Option<String> {
    match v {
        Value::String(s) if !s.trim().is_empty() => Some(s.trim().to_string()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

fn parse_jsonl_line(line: &str) -> LineParse {
    if line.trim().is_empty() {
        return LineParse::Blank;
    }
    let value: Value = match serde_json::from_str(line) {
        Ok(v) => v,
        Err(e) => return LineParse::Malformed(format!("invalid JSON: {e}")),
    };
    let Some(post_id) = value.get("id").and_then(id_string) else {
        return LineParse::Malformed("missing id".into());
    };
    let Some(body) = value.get("body").and_then(Value::as_str) else {
        return LineParse::Malformed("missing body".into());
    };
    let tags = match value.get("tags") {
        Some(Value::Array(items)) => normalize_tags(items.iter().filter_map(Value::as_str)),
        Some(Value::String(s)) => parse_tag_string(s),
        _ => Vec::new(),
    };
    let vote_count = value.get("score").and_then(Value::as_i64).unwrap_or(0);
    let parent_id = value.get("parent_id").and_then(id_string);
    LineParse::Record(PostRecord {
        post_id,
        body_markup: body.to_string(),
        tags,
        vote_count,
        is_answer: parent_id.is_some(),
        parent_id,
    })
}

fn attr_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r#"([A-Za-z]+)="([^"]*)""#).expect("static regex"))
}

fn parse_xml_row(line: &str) -> LineParse {
    let trimmed = line.trim();
    if !trimmed.starts_with("<row") {
        // XML declaration, <posts> wrapper, blank lines
        return LineParse::Blank;
    }
    if !trimmed.ends_with("/>") {
        return LineParse::Malformed("unterminated row".into());
    }
    let mut post_id = None;
    let mut body = None;
    let mut tags = Vec::new();
    let mut vote_count = 0;
    let mut post_type = None;
    let mut parent_id = None;
    for cap in attr_regex().captures_iter(trimmed) {
        let value = decode_entities(&cap[2]);
        match &cap[1] {
            "Id" => post_id = Some(value),
            "Body" => body = Some(value),
            "Tags" => tags = parse_tag_string(&value),
            "Score" => vote_count = value.trim().parse().unwrap_or(0),
            "PostTypeId" => post_type = Some(value),
            "ParentId" => parent_id = Some(value),
            _ => {}
        }
    }
    let Some(post_id) = post_id.filter(|s| !s.is_empty()) else {
        return LineParse::Malformed("missing Id".into());
    };
    let Some(body) = body else {
        return LineParse::Malformed("missing Body".into());
    };
    let is_answer = post_type.as_deref() == Some("2") || parent_id.is_some();
    LineParse::Record(PostRecord {
        post_id,
        body_markup: body,
        tags,
        vote_count,
        is_answer,
        parent_id,
    })
}

/// Numeric comparison when both ids are integers, lexicographic otherwise.
pub(crate) fn compare_ids(a: &str, b: &str) -> Ordering {
    match (a.parse::<u64>(), b.parse::<u64>()) {
        (Ok(x), Ok(y)) => x.cmp(&y),
        _ => a.cmp(b),
    }
}

/// The most voted answer; ties go to the smallest post id.
pub fn select_answer<'a>(_post: &PostRecord, answers: &'a [PostRecord]) -> Option<&'a PostRecord> {
    answers.iter().min_by(|a, b| {
        b.vote_count
            .cmp(&a.vote_count)
            .then_with(|| compare_ids(&a.post_id, &b.post_id))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn post(id: &str, votes: i64) -> PostRecord {
        PostRecord {
            post_id: id.into(),
            body_markup: String::new(),
            tags: vec![],
            vote_count: votes,
            is_answer: true,
            parent_id: Some("q".into()),
        }
    }

    fn write_tmp(ext: &str, content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::Builder::new().suffix(ext).tempfile().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn filters_by_tag_in_file_order() {
        let f = write_tmp(
            ".jsonl",
            r#"{"id": 1, "body": "a", "tags": ["java"], "score": 1}
{"id": 2, "body": "b", "tags": ["python"], "score": 1}
{"id": 3, "body": "c", "tags": ["Java", "arrays"], "score": 1}
{"id": 4, "body": "d", "tags": "<java><io>", "score": 1}
"#,
        );
        let stream = load_posts(f.path(), |tags: &[String]| tags.iter().any(|t| t == "java")).unwrap();
        let ids: Vec<_> = stream.map(|p| p.unwrap().post_id).collect();
        assert_eq!(ids, ["1", "3", "4"]);
    }

    #[test]
    fn empty_file_yields_nothing() {
        let f = write_tmp(".jsonl", "");
        let mut stream = load_posts(f.path(), |_: &[String]| true).unwrap();
        assert!(stream.next().is_none());
        assert_eq!(stream.warnings(), 0);
    }

    #[test]
    fn record_without_body_is_skipped_with_warning() {
        let f = write_tmp(
            ".jsonl",
            "{\"id\": 1, \"body\": \"ok\"}\n{\"id\": 2, \"tags\": [\"java\"]}\n",
        );
        let mut stream = load_posts(f.path(), |_: &[String]| true).unwrap();
        let posts: Vec<_> = stream.by_ref().map(Result::unwrap).collect();
        assert_eq!(posts.len(), 1);
        assert_eq!(stream.warnings(), 1);
    }

    #[test]
    fn missing_file_is_fatal() {
        assert!(load_posts(Path::new("/nonexistent/posts.jsonl"), |_: &[String]| true).is_err());
    }

    #[test]
    fn parses_dump_rows() {
        let f = write_tmp(
            ".xml",
            r#"<?xml version="1.0" encoding="utf-8"?>
<posts>
  <row Id="10" PostTypeId="1" Score="4" Body="&lt;p&gt;How?&lt;/p&gt;" Tags="&lt;java&gt;&lt;java.io&gt;" />
  <row Id="11" PostTypeId="2" ParentId="10" Score="7" Body="&lt;p&gt;Use &lt;code&gt;x&lt;/code&gt;.&lt;/p&gt;" />
  <row Id="12" PostTypeId="2" ParentId="10" Score="2" />
</posts>
"#,
        );
        let mut stream = load_posts(f.path(), |_: &[String]| true).unwrap();
        let posts: Vec<_> = stream.by_ref().map(Result::unwrap).collect();
        assert_eq!(posts.len(), 2);
        assert_eq!(posts[0].tags, ["java", "java.io"]);
        assert!(posts[1].is_answer);
        assert_eq!(posts[1].parent_id.as_deref(), Some("10"));
        assert_eq!(posts[1].body_markup, "<p>Use <code>x</code>.</p>");
        assert_eq!(stream.warnings(), 1);
    }

    #[test]
    fn select_answer_takes_max_votes() {
        let q = post("q", 0);
        let answers = [post("1", 3), post("2", 7), post("3", 2)];
        assert_eq!(select_answer(&q, &answers).unwrap().post_id, "2");
    }

    #[test]
    fn select_answer_breaks_ties_by_smallest_id() {
        let q = post("q", 0);
        let answers = [post("a2", 5), post("a1", 5)];
        assert_eq!(select_answer(&q, &answers).unwrap().post_id, "a1");
        // numeric ids compare numerically
        let answers = [post("10", 5), post("9", 5)];
        assert_eq!(select_answer(&q, &answers).unwrap().post_id, "9");
    }

    #[test]
    fn select_answer_on_no_answers() {
        assert!(select_answer(&post("q", 0), &[]).is_none());
    }
}
