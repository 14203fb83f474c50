/// Pluggable sentence segmentation.
pub trait SentenceSplitter {
    /// Sentences as trimmed, non-empty slices of `text`, in order.
    fn split<'a>(&self, text: &'a str) -> Vec<&'a str>;
}

/// Terminator + capitalization rule splitter.
///
/// A boundary falls after a run of `.`, `!` or `?` (plus closing quotes and
/// brackets) when whitespace follows and the next word starts with an
/// uppercase letter, a digit, an opening quote/bracket, or is an API call.
/// Periods inside a token (`list.add().`) never split since no whitespace
/// follows them, and a short list of abbreviations is exempt.
#[derive(Debug, Clone)]
pub struct RuleSplitter {
    pub abbreviations: Vec<String>,
}

impl Default for RuleSplitter {
    fn default() -> Self {
        let abbreviations = [
            "e.g", "i.e", "etc", "vs", "cf", "eg", "ie", "mr", "mrs", "dr", "approx", "fig", "no",
        ];
        RuleSplitter {
            abbreviations: abbreviations.iter().map(|s| s.to_string()).collect(),
        }
    }
}

const CLOSERS: &[char] = &['"', '\'', ')', ']', '}'];

impl RuleSplitter {
    fn is_abbreviation(&self, text: &str, terminator_at: usize) -> bool {
        let word_start = text[..terminator_at]
            .rfind(char::is_whitespace)
            .map(|p| p + 1)
            .unwrap_or(0);
        let word = text[word_start..terminator_at]
            .trim_start_matches(['(', '"', '\''])
            .to_lowercase();
        self.abbreviations.contains(&word)
    }

    fn starts_new_sentence(next_word: &str) -> bool {
        let Some(first) = next_word.chars().next() else {
            return true;
        };
        if first.is_uppercase() || first.is_ascii_digit() || matches!(first, '"' | '\'' | '(' | '[') {
            return true;
        }
        // lower-case sentence openers are common for API names: "next() reads..."
        next_word.contains("()")
    }
}

impl SentenceSplitter for RuleSplitter {
    fn split<'a>(&self, text: &'a str) -> Vec<&'a str> {
        let mut out = Vec::new();
        let mut start = 0;
        let chars: Vec<(usize, char)> = text.char_indices().collect();
        let mut k = 0;
        while k < chars.len() {
            let (pos, c) = chars[k];
            if !matches!(c, '.' | '!' | '?') {
                k += 1;
                continue;
            }
            let mut j = k + 1;
            while j < chars.len() && (matches!(chars[j].1, '.' | '!' | '?') || CLOSERS.contains(&chars[j].1)) {
                j += 1;
            }
            let end = chars.get(j).map(|&(p, _)| p).unwrap_or(text.len());
            let followed_by_space = j == chars.len() || chars[j].1.is_whitespace();
            if followed_by_space && !(c == '.' && self.is_abbreviation(text, pos)) {
                let rest = text[end..].trim_start();
                let next_word = rest.split_whitespace().next().unwrap_or("");
                if Self::starts_new_sentence(next_word) {
                    push_trimmed(&mut out, &text[start..end]);
                    start = end;
                }
            }
            k = j;
        }
        push_trimmed(&mut out, &text[start..]);
        out
    }
}

fn push_trimmed<'a>(out: &mut Vec<&'a str>, piece: &'a str) {
    let piece = piece.trim();
    if !piece.is_empty() {
        out.push(piece);
    }
}

/// Split with the default [`RuleSplitter`].
pub fn split_sentences(text: &str) -> Vec<String> {
    RuleSplitter::default()
        .split(text)
        .into_iter()
        .map(str::to_string)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn splits_two_terminated_clauses() {
        assert_eq!(split_sentences("A. B."), ["A.", "B."]);
    }

    #[test]
    fn does_not_split_inside_api_call() {
        assert_eq!(
            split_sentences("Use list.add(). Then sort."),
            ["Use list.add().", "Then sort."]
        );
    }

    #[test]
    fn empty_input() {
        assert!(split_sentences("").is_empty());
        assert!(split_sentences("   ").is_empty());
    }

    #[test]
    fn respects_abbreviations_and_lowercase_continuations() {
        assert_eq!(
            split_sentences("Use a collection, e.g. ArrayList. It works. really it does"),
            ["Use a collection, e.g. ArrayList.", "It works. really it does"]
        );
    }

    #[test]
    fn lowercase_api_opener_starts_sentence() {
        assert_eq!(
            split_sentences("Read the docs. nextline() will read the line."),
            ["Read the docs.", "nextline() will read the line."]
        );
    }

    proptest! {
        #[test]
        fn concatenation_covers_input(text in "[A-Za-z .!?()\"]{0,80}") {
            let parts = RuleSplitter::default().split(&text);
            prop_assert!(parts.iter().all(|p| !p.is_empty()));
            let joined: String = parts.concat();
            let squeezed: String = text.chars().filter(|c| !c.is_whitespace()).collect();
            let joined_squeezed: String = joined.chars().filter(|c| !c.is_whitespace()).collect();
            prop_assert_eq!(joined_squeezed, squeezed);
        }
    }
}
