//! Software-aware tokenizer: qualified names and calls such as
//! `iterator.remove()` or `Map.Entry<K,V>` stay whole, while sentence
//! punctuation around them is split off.

use super::sentence::Token;

const LEADING: &[char] = &['(', '[', '{', '"', '\'', '`'];
const TRAILING: &[char] = &[',', ';', ':', '!', '?', '"', '\'', '`'];

/// Tokenize plain text. Every non-whitespace char belongs to exactly one
/// token; tokens are ordered by `char_start`.
pub fn tokenize_software(text: &str) -> Vec<Token> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if chars[i].is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        while i < chars.len() && !chars[i].is_whitespace() {
            i += 1;
        }
        split_chunk(&chars, start, i, &mut tokens);
    }
    tokens
}

fn push(chars: &[char], start: usize, end: usize, out: &mut Vec<Token>) {
    out.push(Token {
        surface: chars[start..end].iter().collect(),
        char_start: start,
        char_end: end,
        is_api_like: false,
    });
}

fn count(chars: &[char], c: char) -> usize {
    chars.iter().filter(|&&x| x == c).count()
}

fn split_chunk(chars: &[char], mut start: usize, mut end: usize, out: &mut Vec<Token>) {
    while start < end && LEADING.contains(&chars[start]) {
        push(chars, start, start + 1, out);
        start += 1;
    }
    let mut trailing: Vec<(usize, usize)> = Vec::new();
    while start < end {
        let core = &chars[start..end];
        let last = chars[end - 1];
        if TRAILING.contains(&last) || opener_for(last).is_some_and(|o| count(core, last) > count(core, o)) {
            trailing.push((end - 1, end));
            end -= 1;
        } else if last == '.' {
            let dots = core.iter().rev().take_while(|&&c| c == '.').count();
            if dots == core.len() {
                // the whole chunk is dots: one token (ellipsis or period)
                break;
            }
            trailing.push((end - dots, end));
            end -= dots;
        } else {
            break;
        }
    }
    if start < end {
        push(chars, start, end, out);
    }
    for &(s, e) in trailing.iter().rev() {
        push(chars, s, e, out);
    }
}

fn opener_for(c: char) -> Option<char> {
    match c {
        ')' => Some('('),
        ']' => Some('['),
        '}' => Some('{'),
        _ => None,
    }
}
