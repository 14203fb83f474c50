//! HTML body cleanup for post bodies.

/// How code elements are treated when stripping markup.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MarkupPolicy {
    /// Keep the text of inline `<code>` spans (outside `<pre>`). Off by default:
    /// inline code is removed together with code blocks.
    pub keep_inline_code: bool,
}

const BLOCK_TAGS: &[&str] = &[
    "p", "div", "br", "li", "ul", "ol", "h1", "h2", "h3", "h4", "h5", "h6", "blockquote", "pre",
    "table", "tr", "td", "th", "hr", "dl", "dt", "dd",
];

/// [`strip_markup_with`] under the default policy.
pub fn strip_markup(body_markup: &str) -> String {
    strip_markup_with(body_markup, &MarkupPolicy::default())
}

/// Remove code blocks (and, by policy, inline code) with their content,
/// drop every other tag while keeping its text, decode entities and collapse
/// whitespace. Never fails; unbalanced markup is stripped best-effort.
pub fn strip_markup_with(body_markup: &str, policy: &MarkupPolicy) -> String {
    let s = body_markup;
    let bytes = s.as_bytes();
    let mut raw = String::with_capacity(s.len());
    let mut i = 0;
    while i < s.len() {
        if bytes[i] != b'<' || !starts_tag(&s[i + 1..]) {
            let ch = s[i..].chars().next().expect("in bounds");
            raw.push(ch);
            i += ch.len_utf8();
            continue;
        }
        if s[i..].starts_with("<!--") {
            i = match s[i + 4..].find("-->") {
                Some(end) => i + 4 + end + 3,
                None => s.len(),
            };
            continue;
        }
        let Some(close) = s[i..].find('>') else {
            // truncated tag: nothing after it is trustworthy text
            break;
        };
        let inner = &s[i + 1..i + close];
        let tag_end = i + close + 1;
        let closing = inner.starts_with('/');
        let name = tag_name(inner);
        let self_closing = inner.ends_with('/');

        let drops_content = !closing
            && !self_closing
            && (name == "pre" || (name == "code" && !policy.keep_inline_code));
        if drops_content {
            i = skip_element(s, tag_end, &name);
            raw.push(' ');
            continue;
        }
        if BLOCK_TAGS.contains(&name.as_str()) {
            raw.push(' ');
        }
        i = tag_end;
    }
    let decoded = decode_entities(&raw);
    collapse_ws(&defuse_angle_brackets(&decoded))
}

fn starts_tag(rest: &str) -> bool {
    matches!(rest.chars().next(), Some(c) if c.is_ascii_alphabetic() || c == '/' || c == '!')
}

fn tag_name(inner: &str) -> String {
    inner
        .trim_start_matches('/')
        .chars()
        .take_while(|c| c.is_ascii_alphanumeric())
        .collect::<String>()
        .to_ascii_lowercase()
}

/// Position right after the closing tag matching `name`, honoring nesting of
/// the same element; end of input when unclosed.
fn skip_element(s: &str, from: usize, name: &str) -> usize {
    let lower = s.to_ascii_lowercase();
    let open = format!("<{name}");
    let close = format!("</{name}");
    let mut depth = 1usize;
    let mut i = from;
    while depth > 0 {
        let next_open = lower[i..].find(&open).map(|p| p + i);
        let next_close = lower[i..].find(&close).map(|p| p + i);
        match (next_open, next_close) {
            (_, None) => return s.len(),
            (Some(o), Some(c)) if o < c && is_name_boundary(&lower, o + open.len()) => {
                depth += 1;
                i = o + open.len();
            }
            (_, Some(c)) => {
                depth -= 1;
                i = match lower[c..].find('>') {
                    Some(gt) => c + gt + 1,
                    None => return s.len(),
                };
            }
        }
    }
    i
}

fn is_name_boundary(s: &str, at: usize) -> bool {
    !matches!(s.as_bytes().get(at), Some(b) if b.is_ascii_alphanumeric())
}

/// Decode named and numeric character references; unknown ones are kept.
pub(crate) fn decode_entities(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(amp) = rest.find('&') {
        out.push_str(&rest[..amp]);
        rest = &rest[amp..];
        let decoded = rest
            .find(';')
            .filter(|&semi| semi <= 10)
            .and_then(|semi| decode_one(&rest[1..semi]).map(|c| (c, semi)));
        match decoded {
            Some((c, semi)) => {
                out.push(c);
                rest = &rest[semi + 1..];
            }
            None => {
                out.push('&');
                rest = &rest[1..];
            }
        }
    }
    out.push_str(rest);
    out
}

fn decode_one(name: &str) -> Option<char> {
    match name {
        "lt" => Some('<'),
        "gt" => Some('>'),
        "amp" => Some('&'),
        "quot" => Some('"'),
        "apos" => Some('\''),
        "nbsp" => Some(' '),
        _ => {
            let num = name.strip_prefix('#')?;
            let code = match num.strip_prefix(['x', 'X']) {
                Some(hex) => u32::from_str_radix(hex, 16).ok()?,
                None => num.parse().ok()?,
            };
            char::from_u32(code)
        }
    }
}

/// A decoded `<` directly before a letter would read as a tag downstream;
/// separate it with a space.
fn defuse_angle_brackets(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars().peekable();
    while let Some(c) = chars.next() {
        out.push(c);
        if c == '<' && matches!(chars.peek(), Some(n) if n.is_alphabetic()) {
            out.push(' ');
        }
    }
    out
}

fn collapse_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}
