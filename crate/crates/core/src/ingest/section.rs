use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SectionKind {
    Technical,
    NonTechnical,
    Unknown,
}

impl SectionKind {
    /// Only pages positively identified as non-technical skip text analysis.
    pub fn is_bypassed(self) -> bool {
        self == SectionKind::NonTechnical
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SectionCues {
    pub technical: Vec<String>,
    pub non_technical: Vec<String>,
}

impl Default for SectionCues {
    fn default() -> Self {
        Self {
            technical: [
                "general procedure",
                "typical procedure",
                "general experiment",
                "experimental section",
                "experimental",
                "methods",
                "methodology",
                "synthesis of",
                "characterization",
            ]
            .map(String::from)
            .to_vec(),
            non_technical: ["references", "acknowledg", "abstract", "introduction", "conclusion"]
                .map(String::from)
                .to_vec(),
        }
    }
}

pub fn classify_section(page_text: &str, cues: &SectionCues) -> SectionKind {
    let text = page_text.to_lowercase();
    let hit = |list: &[String]| list.iter().any(|c| text.contains(&c.to_lowercase()));
    if hit(&cues.technical) {
        SectionKind::Technical
    } else if hit(&cues.non_technical) {
        SectionKind::NonTechnical
    } else {
        SectionKind::Unknown
    }
}
