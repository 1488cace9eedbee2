//! Section detection for heading-organized clinical notes.

use super::Section;

/// Characters allowed inside a header besides uppercase letters and digits.
const HEADER_EXTRA: [char; 4] = [' ', '&', '/', ','];

fn is_header_char(c: char) -> bool {
    c.is_ascii_uppercase() || c.is_ascii_digit() || c == '-' || HEADER_EXTRA.contains(&c)
}

/// Detects sections. A header is a line-initial run of uppercase letters,
/// digits, spaces and `&/,-` of length >= 2 immediately followed by a
/// colon; each body runs from after the colon to the next header or end of
/// text. Text before the first header becomes one headerless section.
/// Concatenating the `[header_start, body_end)` slices reproduces the
/// input.
pub fn sectionize(text: &str) -> Vec<Section> {
    let chars: Vec<char> = text.chars().collect();
    let mut heads: Vec<(usize, usize)> = Vec::new(); // (header_start, colon)
    let mut i = 0usize;
    while i < chars.len() {
        let line_initial = i == 0 || chars[i - 1] == '\n';
        if line_initial {
            let mut j = i;
            while j < chars.len() && is_header_char(chars[j]) && chars[j] != '\n' {
                j += 1;
            }
            if j < chars.len() && chars[j] == ':' && j - i >= 2 {
                heads.push((i, j));
                i = j + 1;
                continue;
            }
        }
        // skip to next line start
        while i < chars.len() && chars[i] != '\n' {
            i += 1;
        }
        i += 1;
    }

    let mut sections = Vec::new();
    if chars.is_empty() {
        return sections;
    }
    let first_head = heads.first().map(|(s, _)| *s).unwrap_or(chars.len());
    if first_head > 0 {
        sections.push(Section {
            header: None,
            header_start: 0,
            body_start: 0,
            body_end: first_head,
        });
    }
    for (k, (start, colon)) in heads.iter().enumerate() {
        let body_end = heads.get(k + 1).map(|(s, _)| *s).unwrap_or(chars.len());
        let raw: String = chars[*start..*colon].iter().collect();
        sections.push(Section {
            header: Some(normalize_header(&raw)),
            header_start: *start,
            body_start: colon + 1,
            body_end,
        });
    }
    sections
}

/// Uppercases, trims, and collapses internal whitespace runs.
pub fn normalize_header(raw: &str) -> String {
    raw.split_whitespace().collect::<Vec<_>>().join(" ").to_uppercase()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const NOTE: &str = "HISTORY OF PRESENT ILLNESS: A 49-year-old female with history of \
atopic dermatitis comes to the clinic with complaints of left otalgia and headache. \
Symptoms started approximately three weeks ago.\n\
FAMILY HISTORY: Reviewed and unchanged.\n\
ALLEGIES: To cephalixin.\n\
CURRENT MEDICATION: Ibuprofen.\n\
SOCIAL HISTORY: She is a nonsmoker.\n";

    #[test]
    fn finds_headed_sections() {
        let secs = sectionize(NOTE);
        let headers: Vec<&str> =
            secs.iter().filter_map(|s| s.header.as_deref()).collect();
        assert_eq!(
            headers,
            vec![
                "HISTORY OF PRESENT ILLNESS",
                "FAMILY HISTORY",
                "ALLEGIES",
                "CURRENT MEDICATION",
                "SOCIAL HISTORY"
            ]
        );
        assert_eq!(secs.len(), 5);
    }

    #[test]
    fn headerless_text_is_one_section() {
        let secs = sectionize("no headers here");
        assert_eq!(secs.len(), 1);
        assert!(secs[0].header.is_none());
        assert_eq!((secs[0].body_start, secs[0].body_end), (0, 15));
    }

    #[test]
    fn empty_text_has_no_sections() {
        assert!(sectionize("").is_empty());
    }

    #[test]
    fn short_runs_and_midline_colons_are_not_headers() {
        // "A:" is length 1; "at 10:30" colon is not line-initial-run
        let secs = sectionize("A: too short\ntime at 10:30 here");
        assert_eq!(secs.len(), 1);
        assert!(secs[0].header.is_none());
    }

    #[test]
    fn lowercase_lines_are_body_text() {
        let secs = sectionize("PLAN: rest\nFollow up: soon");
        assert_eq!(secs.len(), 1);
        assert_eq!(secs[0].header.as_deref(), Some("PLAN"));
    }

    proptest! {
        // Round-trip: sections tile the text exactly.
        #[test]
        fn sections_tile_the_text(
            blocks in proptest::collection::vec(("[A-Z]{2,8}", "[a-z ]{0,20}"), 1..6),
            preamble in "[a-z ]{0,12}",
        ) {
            let mut text = preamble.clone();
            for (h, b) in &blocks {
                if !text.is_empty() && !text.ends_with('\n') {
                    text.push('\n');
                }
                text.push_str(h);
                text.push(':');
                text.push_str(b);
            }
            let chars: Vec<char> = text.chars().collect();
            let secs = sectionize(&text);
            let rebuilt: String = secs
                .iter()
                .map(|s| chars[s.header_start..s.body_end].iter().collect::<String>())
                .collect();
            prop_assert_eq!(rebuilt, text.clone());
            // non-overlapping and ordered
            for w in secs.windows(2) {
                prop_assert_eq!(w[0].body_end, w[1].header_start);
            }
        }
    }
}
