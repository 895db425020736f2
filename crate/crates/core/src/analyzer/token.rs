use std::ops::Range;

use super::AnalyzerError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub surface: String,
    pub index: usize,
    /// Character offsets into the raw utterance.
    pub span: Range<usize>,
}

/// Lowercase, drop sentence-final `.`/`!`/`?` and split commas off as
/// tokens of their own.
pub fn tokenize(utterance: &str) -> Result<Vec<Token>, AnalyzerError> {
    let chars: Vec<char> = utterance.chars().collect();
    let mut raw: Vec<(String, Range<usize>)> = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c == ',' {
            raw.push((",".into(), i..i + 1));
            i += 1;
        } else {
            let start = i;
            while i < chars.len() && !chars[i].is_whitespace() && chars[i] != ',' {
                i += 1;
            }
            let mut end = i;
            while end > start && matches!(chars[end - 1], '.' | '!' | '?') {
                end -= 1;
            }
            if end > start {
                let word: String = chars[start..end].iter().collect();
                raw.push((word.to_lowercase(), start..end));
            }
        }
    }
    if raw.is_empty() {
        return Err(AnalyzerError::EmptyInput);
    }
    Ok(raw
        .into_iter()
        .enumerate()
        .map(|(index, (surface, span))| Token {
            surface,
            index,
            span,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn surfaces(s: &str) -> Vec<String> {
        tokenize(s).unwrap().into_iter().map(|t| t.surface).collect()
    }

    #[test]
    fn splits_commas_and_strips_final_punctuation() {
        assert_eq!(
            surfaces("PR2, bring the soda can to the dining table!"),
            ["pr2", ",", "bring", "the", "soda", "can", "to", "the", "dining", "table"]
        );
        assert_eq!(surfaces("Which one?"), ["which", "one"]);
    }

    #[test]
    fn blank_input_is_an_error() {
        assert_eq!(tokenize("   "), Err(AnalyzerError::EmptyInput));
        assert_eq!(tokenize("?!"), Err(AnalyzerError::EmptyInput));
    }

    #[test]
    fn spans_point_into_the_utterance() {
        let toks = tokenize("Hi,  there.").unwrap();
        assert_eq!(toks[0].span, 0..2);
        assert_eq!(toks[1].span, 2..3);
        assert_eq!(toks[2].span, 5..10);
        assert_eq!(toks[2].index, 2);
    }
}
