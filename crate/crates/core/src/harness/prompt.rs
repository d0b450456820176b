use std::path::Path;

use serde::{Deserialize, Serialize};

/// The three instruction conditions compared in reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PromptCondition {
    /// Ask for 10 nouns as different from each other as possible.
    Dat,
    /// Ask for 10 nouns, no further instruction.
    Base,
    /// Ask for 10 nouns chosen randomly.
    Random,
}

impl std::str::FromStr for PromptCondition {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_lowercase().as_str() {
            "dat" => Ok(Self::Dat),
            "base" => Ok(Self::Base),
            "random" => Ok(Self::Random),
            other => Err(format!("unknown condition {other:?} (expected dat|base|random)")),
        }
    }
}

impl std::fmt::Display for PromptCondition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Self::Dat => "dat",
            Self::Base => "base",
            Self::Random => "random",
        };
        f.write_str(s)
    }
}

/// Versioned instruction text for the divergent-nouns condition, shipped
/// with the crate and swappable at runtime (see [`PromptTemplates`]).
pub const DAT_PROMPT_V1: &str = include_str!("../../resources/prompts/dat_v1.txt");

const BASE_PROMPT: &str = "Please write 10 nouns.";
const RANDOM_PROMPT: &str = "Please write 10 nouns randomly.";

/// Prompt text per condition. Every prompt is sent as a single user message
/// with no system message.
#[derive(Debug, Clone)]
pub struct PromptTemplates {
    dat: String,
    base: String,
    random: String,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        Self {
            dat: DAT_PROMPT_V1.trim_end().to_string(),
            base: BASE_PROMPT.to_string(),
            random: RANDOM_PROMPT.to_string(),
        }
    }
}

impl PromptTemplates {
    /// Replace the divergent-nouns template with the contents of a file.
    pub fn with_dat_template_file(path: impl AsRef<Path>) -> std::io::Result<Self> {
        let dat = std::fs::read_to_string(path)?;
        Ok(Self {
            dat: dat.trim_end().to_string(),
            ..Self::default()
        })
    }

    pub fn render(&self, condition: PromptCondition) -> String {
        match condition {
            PromptCondition::Dat => self.dat.clone(),
            PromptCondition::Base => self.base.clone(),
            PromptCondition::Random => self.random.clone(),
        }
    }
}

/// Prompt for a condition using the shipped default templates.
pub fn build_prompt(condition: PromptCondition) -> String {
    PromptTemplates::default().render(condition)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn base_prompt_contains_required_clause() {
        assert!(build_prompt(PromptCondition::Base).contains("write 10 nouns"));
    }

    #[test]
    fn random_prompt_contains_required_clause() {
        assert!(build_prompt(PromptCondition::Random).contains("write 10 nouns randomly"));
    }

    #[test]
    fn dat_prompt_requests_unrelated_single_nouns() {
        let p = build_prompt(PromptCondition::Dat);
        assert!(p.contains("10 nouns"));
        assert!(p.contains("as different from each other as possible"));
        assert!(p.contains("Only single words"));
        assert!(p.contains("No proper nouns"));
    }

    #[test]
    fn dat_template_is_swappable() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        use std::io::Write;
        f.write_all(b"custom instructions\n").unwrap();
        let templates = PromptTemplates::with_dat_template_file(f.path()).unwrap();
        assert_eq!(templates.render(PromptCondition::Dat), "custom instructions");
        assert_eq!(templates.render(PromptCondition::Base), BASE_PROMPT);
    }

    #[test]
    fn condition_round_trips_through_strings() {
        for (s, c) in [
            ("dat", PromptCondition::Dat),
            ("base", PromptCondition::Base),
            ("random", PromptCondition::Random),
        ] {
            assert_eq!(s.parse::<PromptCondition>().unwrap(), c);
            assert_eq!(c.to_string(), s);
        }
        assert!("other".parse::<PromptCondition>().is_err());
    }
}
