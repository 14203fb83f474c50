//! Rule-table verb inflection for English regular verbs.

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VerbForm {
    Base,
    /// Third-person singular present, `-s`.
    ThirdPerson,
    /// Present participle, `-ing`.
    Progressive,
    /// Past tense and past participle, `-ed`.
    Past,
}

const FORMS: [VerbForm; 4] = [VerbForm::Base, VerbForm::ThirdPerson, VerbForm::Progressive, VerbForm::Past];

fn is_vowel(c: char) -> bool {
    matches!(c, 'a' | 'e' | 'i' | 'o' | 'u')
}

/// Single vowel group ending consonant-vowel-consonant, last not w/x/y:
/// `stop` → `stopp-`.
fn doubles_final(lemma: &str) -> bool {
    let c: Vec<char> = lemma.chars().collect();
    let n = c.len();
    if n < 3 {
        return false;
    }
    let groups = c
        .iter()
        .enumerate()
        .filter(|&(i, &ch)| is_vowel(ch) && (i == 0 || !is_vowel(c[i - 1])))
        .count();
    groups == 1 && !is_vowel(c[n - 1]) && is_vowel(c[n - 2]) && !is_vowel(c[n - 3]) && !matches!(c[n - 1], 'w' | 'x' | 'y')
}

fn ends_consonant_y(lemma: &str) -> bool {
    let c: Vec<char> = lemma.chars().collect();
    c.len() >= 2 && c[c.len() - 1] == 'y' && !is_vowel(c[c.len() - 2])
}

/// Inflect a lowercase lemma.
pub fn inflect(lemma: &str, form: VerbForm) -> String {
    let last = lemma.chars().last();
    match form {
        VerbForm::Base => lemma.to_string(),
        VerbForm::ThirdPerson => {
            if ["s", "x", "z", "ch", "sh"].iter().any(|s| lemma.ends_with(s)) {
                format!("{lemma}es")
            } else if ends_consonant_y(lemma) {
                format!("{}ies", &lemma[..lemma.len() - 1])
            } else {
                format!("{lemma}s")
            }
        }
        VerbForm::Progressive => {
            if let Some(stem) = lemma.strip_suffix("ie") {
                format!("{stem}ying")
            } else if last == Some('e') && !lemma.ends_with("ee") && lemma.len() > 2 {
                format!("{}ing", &lemma[..lemma.len() - 1])
            } else if doubles_final(lemma) {
                format!("{lemma}{}ing", last.unwrap())
            } else {
                format!("{lemma}ing")
            }
        }
        VerbForm::Past => {
            if last == Some('e') {
                format!("{lemma}d")
            } else if ends_consonant_y(lemma) {
                format!("{}ied", &lemma[..lemma.len() - 1])
            } else if doubles_final(lemma) {
                format!("{lemma}{}ed", last.unwrap())
            } else {
                format!("{lemma}ed")
            }
        }
    }
}

/// Find a lemma accepted by `known` that inflects back to `word`
/// (compared lowercase). Base form wins over inflected readings.
pub fn lemmatize(word: &str, known: impl Fn(&str) -> bool) -> Option<(String, VerbForm)> {
    let w = word.to_lowercase();
    let mut candidates = vec![w.clone()];
    let strip = |suffix: &str| w.strip_suffix(suffix).map(str::to_string);
    for (suffix, add) in [
        ("ies", "y"),
        ("es", ""),
        ("s", ""),
        ("ying", "ie"),
        ("ing", ""),
        ("ing", "e"),
        ("ied", "y"),
        ("ed", ""),
        ("ed", "e"),
        ("d", ""),
    ] {
        if let Some(stem) = strip(suffix) {
            candidates.push(format!("{stem}{add}"));
            let c: Vec<char> = stem.chars().collect();
            if c.len() >= 2 && c[c.len() - 1] == c[c.len() - 2] {
                candidates.push(c[..c.len() - 1].iter().collect());
            }
        }
    }
    for lemma in candidates {
        if lemma.is_empty() || !known(&lemma) {
            continue;
        }
        if let Some(form) = FORMS.into_iter().find(|&f| inflect(&lemma, f) == w) {
            return Some((lemma, form));
        }
    }
    None
}

/// Copy the capitalization of `model` onto `word`: all-caps or leading cap.
pub(crate) fn match_case(model: &str, word: &str) -> String {
    let letters: Vec<char> = model.chars().filter(|c| c.is_alphabetic()).collect();
    if letters.len() > 1 && letters.iter().all(|c| c.is_uppercase()) {
        return word.to_uppercase();
    }
    match model.chars().next() {
        Some(c) if c.is_uppercase() => {
            let mut chars = word.chars();
            chars.next().map(|f| f.to_uppercase().chain(chars).collect()).unwrap_or_default()
        }
        _ => word.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rule_table() {
        let cases = [
            ("load", ["load", "loads", "loading", "loaded"]),
            ("fetch", ["fetch", "fetches", "fetching", "fetched"]),
            ("copy", ["copy", "copies", "copying", "copied"]),
            ("parse", ["parse", "parses", "parsing", "parsed"]),
            ("stop", ["stop", "stops", "stopping", "stopped"]),
            ("open", ["open", "opens", "opening", "opened"]),
            ("tie", ["tie", "ties", "tying", "tied"]),
            ("play", ["play", "plays", "playing", "played"]),
        ];
        for (lemma, forms) in cases {
            for (f, want) in FORMS.iter().zip(forms) {
                assert_eq!(inflect(lemma, *f), want, "{lemma} {f:?}");
            }
        }
    }

    #[test]
    fn reads_becomes_loads() {
        let (lemma, form) = lemmatize("reads", |l| l == "read").unwrap();
        assert_eq!((lemma.as_str(), form), ("read", VerbForm::ThirdPerson));
        assert_eq!(inflect("load", form), "loads");
    }

    #[test]
    fn unknown_words_do_not_lemmatize() {
        assert_eq!(lemmatize("thing", |l| l == "read"), None);
        assert_eq!(lemmatize("reader", |l| l == "read"), None);
    }

    #[test]
    fn case_is_copied() {
        assert_eq!(match_case("Reads", "loads"), "Loads");
        assert_eq!(match_case("READ", "load"), "LOAD");
        assert_eq!(match_case("read", "load"), "load");
    }

    proptest! {
        #[test]
        fn every_form_lemmatizes_back(lemma in "[bcdfgklmnprst][aeiou][bcdfgklmnprst]{1,2}[e]?") {
            for f in FORMS {
                let w = inflect(&lemma, f);
                let (l, g) = lemmatize(&w, |x| x == lemma).unwrap();
                prop_assert_eq!(l, lemma.clone());
                prop_assert_eq!(inflect(&lemma, g), w);
            }
        }
    }
}
