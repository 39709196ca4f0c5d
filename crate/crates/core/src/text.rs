//! Tokenization shared by the query evaluator, the stub embedder and the
//! topic term extractor.

/// Splits on every non-alphanumeric character and lowercases. No stemming.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Lowercases and collapses runs of whitespace into a single space.
pub fn squash(text: &str) -> String {
    text.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

const STOPWORDS: &[&str] = &[
    "a", "about", "above", "across", "after", "again", "against", "all", "also", "am", "among",
    "an", "and", "any", "are", "as", "at", "be", "been", "before", "being", "between", "both",
    "but", "by", "can", "could", "did", "do", "does", "during", "each", "either", "et", "etc",
    "few", "for", "from", "further", "had", "has", "have", "having", "here", "how", "however",
    "i", "if", "in", "into", "is", "it", "its", "itself", "may", "more", "most", "much", "must",
    "no", "nor", "not", "of", "off", "on", "once", "one", "only", "or", "other", "our", "out",
    "over", "own", "per", "same", "several", "should", "so", "some", "such", "than", "that",
    "the", "their", "them", "then", "there", "these", "they", "this", "those", "through", "thus",
    "to", "too", "two", "under", "until", "up", "upon", "us", "use", "used", "using", "very",
    "via", "was", "we", "were", "what", "when", "where", "whether", "which", "while", "who",
    "whom", "why", "will", "with", "within", "without", "would", "yet", "you", "your",
];

pub fn is_stopword(token: &str) -> bool {
    STOPWORDS.binary_search(&token).is_ok()
}

/// Tokens for topic term extraction: stopwords and pure numbers removed.
pub fn content_tokens(text: &str) -> Vec<String> {
    tokenize(text)
        .into_iter()
        .filter(|t| t.chars().count() > 1 && !is_stopword(t) && !t.chars().all(|c| c.is_numeric()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stopwords_are_sorted() {
        let mut sorted = STOPWORDS.to_vec();
        sorted.sort_unstable();
        assert_eq!(sorted, STOPWORDS);
    }

    #[test]
    fn splits_on_punctuation() {
        assert_eq!(tokenize("LLMs in Health-care, 2023!"), vec!["llms", "in", "health", "care", "2023"]);
        assert!(tokenize(" -- ").is_empty());
    }

    #[test]
    fn content_tokens_drop_noise() {
        assert_eq!(content_tokens("The use of LLMs in 2023 for a task"), vec!["llms", "task"]);
    }
}
