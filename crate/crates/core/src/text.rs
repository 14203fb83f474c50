//! Character-offset helpers. All offsets in this crate count Unicode scalar
//! values, not bytes.

/// Number of chars in `s`.
pub fn char_len(s: &str) -> usize {
    s.chars().count()
}

/// Byte offset of the `char_idx`-th char, or `s.len()` past the end.
pub fn byte_offset(s: &str, char_idx: usize) -> usize {
    s.char_indices()
        .nth(char_idx)
        .map(|(b, _)| b)
        .unwrap_or(s.len())
}

/// Char slice `[start, end)`; `None` when out of range or inverted.
pub fn slice_chars(s: &str, start: usize, end: usize) -> Option<&str> {
    if start > end || end > char_len(s) {
        return None;
    }
    let b0 = byte_offset(s, start);
    let b1 = byte_offset(s, end);
    Some(&s[b0..b1])
}

/// Char offset of a byte offset that lies on a char boundary.
pub fn char_offset(s: &str, byte_idx: usize) -> usize {
    s[..byte_idx].chars().count()
}

/// Trim and collapse internal whitespace runs to single spaces.
pub fn normalize_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Replace the char range `[start, end)` of `s` with `with`.
pub fn replace_chars(s: &str, start: usize, end: usize, with: &str) -> String {
    let b0 = byte_offset(s, start);
    let b1 = byte_offset(s, end);
    let mut out = String::with_capacity(s.len() + with.len());
    out.push_str(&s[..b0]);
    out.push_str(with);
    out.push_str(&s[b1..]);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slices_multibyte_text_by_chars() {
        let s = "é get() ü";
        assert_eq!(slice_chars(s, 2, 7), Some("get()"));
        assert_eq!(slice_chars(s, 8, 9), Some("ü"));
        assert_eq!(slice_chars(s, 8, 10), None);
        assert_eq!(char_offset(s, byte_offset(s, 8)), 8);
    }

    #[test]
    fn replaces_char_range() {
        assert_eq!(replace_chars("a iterator.remove() b", 2, 19, "remove"), "a remove b");
    }
}
