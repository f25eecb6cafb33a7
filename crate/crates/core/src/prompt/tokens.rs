/// Estimates how many model tokens a piece of text costs.
pub trait TokenEstimator: Send + Sync {
    fn estimate(&self, text: &str) -> usize;
}

/// One token per four characters, rounded up.
#[derive(Debug, Clone, Copy, Default)]
pub struct CharEstimator;

impl TokenEstimator for CharEstimator {
    fn estimate(&self, text: &str) -> usize {
        text.chars().count().div_ceil(4)
    }
}

pub fn estimate_tokens(text: &str) -> usize {
    CharEstimator.estimate(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ceiling_of_quarter_length() {
        assert_eq!(estimate_tokens(""), 0);
        assert_eq!(estimate_tokens("12345678"), 2);
        assert_eq!(estimate_tokens("123456789"), 3);
        assert_eq!(estimate_tokens("←←←←"), 1);
    }
}
