//! Tokenizer: maximal alphanumeric runs plus single-character punctuation.

use super::Token;

/// Splits text into tokens. Runs of letters/digits form one token each,
/// every other non-whitespace character is its own token, and whitespace
/// produces none. Offsets are character offsets, so joining token texts
/// with the original gaps reproduces the input.
pub fn tokenize(text: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut run_start: Option<usize> = None;
    let push = |start: usize, end: usize, tokens: &mut Vec<Token>| {
        let index = tokens.len();
        tokens.push(Token { start, end, index });
    };
    for (i, c) in text.chars().enumerate() {
        if c.is_alphanumeric() {
            if run_start.is_none() {
                run_start = Some(i);
            }
        } else {
            if let Some(s) = run_start.take() {
                push(s, i, &mut tokens);
            }
            if !c.is_whitespace() {
                push(i, i + 1, &mut tokens);
            }
        }
    }
    if let Some(s) = run_start {
        push(s, text.chars().count(), &mut tokens);
    }
    tokens
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn texts(input: &str) -> Vec<String> {
        let chars: Vec<char> = input.chars().collect();
        tokenize(input)
            .iter()
            .map(|t| chars[t.start..t.end].iter().collect())
            .collect()
    }

    #[test]
    fn splits_words_and_punctuation() {
        assert_eq!(
            texts("left otalgia and headache."),
            vec!["left", "otalgia", "and", "headache", "."]
        );
    }

    #[test]
    fn empty_text_yields_no_tokens() {
        assert!(tokenize("").is_empty());
    }

    #[test]
    fn punctuation_is_single_char_tokens() {
        assert_eq!(texts("b.i.d., 40mg"), vec!["b", ".", "i", ".", "d", ".", ",", "40mg"]);
    }

    #[test]
    fn tokens_are_ordered_and_indexed() {
        let toks = tokenize("a b c");
        for (i, t) in toks.iter().enumerate() {
            assert_eq!(t.index, i);
        }
        assert!(toks.windows(2).all(|w| w[0].end <= w[1].start));
    }

    proptest! {
        // Offset-faithful: replacing each token span with its text and each
        // gap with the original whitespace reproduces the input.
        #[test]
        fn offsets_reconstruct_source(s in "[ a-zA-Z0-9.,;:()\\n-]{0,80}") {
            let chars: Vec<char> = s.chars().collect();
            let toks = tokenize(&s);
            let mut rebuilt = String::new();
            let mut pos = 0usize;
            for t in &toks {
                rebuilt.extend(&chars[pos..t.start]);
                rebuilt.extend(&chars[t.start..t.end]);
                pos = t.end;
            }
            rebuilt.extend(&chars[pos..]);
            prop_assert_eq!(rebuilt, s.clone());
            // gaps carry no token characters
            let covered: usize = toks.iter().map(|t| t.end - t.start).sum();
            let non_ws = chars.iter().filter(|c| !c.is_whitespace()).count();
            prop_assert_eq!(covered, non_ws);
        }
    }
}
