use std::path::Path;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    CorefText,
    CorefAsset,
    Reactions,
    Revisit,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::CorefText => "coref_text",
            Task::CorefAsset => "coref_asset",
            Task::Reactions => "reactions",
            Task::Revisit => "revisit",
        }
    }

    pub fn from_marker(prompt: &str) -> Option<Task> {
        let start = prompt.find("[task:")? + "[task:".len();
        let end = prompt[start..].find(']')? + start;
        match &prompt[start..end] {
            "coref_text" => Some(Task::CorefText),
            "coref_asset" => Some(Task::CorefAsset),
            "reactions" => Some(Task::Reactions),
            "revisit" => Some(Task::Revisit),
            _ => None,
        }
    }

    fn builtin_source(self) -> &'static str {
        match self {
            Task::CorefText => include_str!("../../templates/coref_text.toml"),
            Task::CorefAsset => include_str!("../../templates/coref_asset.toml"),
            Task::Reactions => include_str!("../../templates/reactions.toml"),
            Task::Revisit => include_str!("../../templates/revisit.toml"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FewShot {
    pub input: String,
    pub output: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub name: String,
    pub version: u32,
    pub task: Task,
    pub instruction: String,
    pub output_contract: String,
    #[serde(default)]
    pub few_shot: Vec<FewShot>,
}

#[derive(Debug, thiserror::Error)]
pub enum TemplateError {
    #[error("reading template {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parsing template: {0}")]
    Toml(#[from] toml::de::Error),
}

impl PromptTemplate {
    pub fn builtin(task: Task) -> Self {
        Self::parse(task.builtin_source()).expect("bundled templates parse")
    }

    /// The bundled template text, byte for byte.
    pub fn builtin_source(task: Task) -> &'static str {
        task.builtin_source()
    }

    pub fn parse(source: &str) -> Result<Self, TemplateError> {
        Ok(toml::from_str(source)?)
    }

    pub fn from_path(path: &Path) -> Result<Self, TemplateError> {
        let text = std::fs::read_to_string(path).map_err(|source| TemplateError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    /// The instruction block sent ahead of the content. It ends with a task
    /// marker so that pattern-based backends can tell requests apart.
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(self.instruction.trim());
        out.push_str("\n\nOutput format: ");
        out.push_str(self.output_contract.trim());
        for (i, ex) in self.few_shot.iter().enumerate() {
            out.push_str(&format!(
                "\n\nExample {} input:\n{}\nExample {} output:\n{}",
                i + 1,
                ex.input.trim(),
                i + 1,
                ex.output.trim()
            ));
        }
        out.push_str(&format!(
            "\n\n[task:{}] [template:{}@v{}]\n",
            self.task.as_str(),
            self.name,
            self.version
        ));
        out
    }
}

/// The four templates one run uses.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TemplateSet {
    pub coref_text: PromptTemplate,
    pub coref_asset: PromptTemplate,
    pub reactions: PromptTemplate,
    pub revisit: PromptTemplate,
}

impl Default for TemplateSet {
    fn default() -> Self {
        Self {
            coref_text: PromptTemplate::builtin(Task::CorefText),
            coref_asset: PromptTemplate::builtin(Task::CorefAsset),
            reactions: PromptTemplate::builtin(Task::Reactions),
            revisit: PromptTemplate::builtin(Task::Revisit),
        }
    }
}

impl TemplateSet {
    /// Loads `<dir>/<task>.toml` where present, bundled templates otherwise.
    pub fn from_dir(dir: &Path) -> Result<Self, TemplateError> {
        let load = |task: Task| -> Result<PromptTemplate, TemplateError> {
            let path = dir.join(format!("{}.toml", task.as_str()));
            if path.exists() {
                PromptTemplate::from_path(&path)
            } else {
                Ok(PromptTemplate::builtin(task))
            }
        };
        Ok(Self {
            coref_text: load(Task::CorefText)?,
            coref_asset: load(Task::CorefAsset)?,
            reactions: load(Task::Reactions)?,
            revisit: load(Task::Revisit)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use sha2::{Digest, Sha256};

    fn hex(bytes: &[u8]) -> String {
        bytes.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Editing a template changes extraction behaviour; these pins make such
    /// edits deliberate.
    #[test]
    fn bundled_template_hashes_are_pinned() {
        let pins = [
            (Task::CorefText, "b42d20bc37420656d7cc4680bb89098606b80d216a57f9c319779f10744a6313"),
            (Task::CorefAsset, "adf250aaaac5472c2c771673f23bc2c8f44e627d7bdf7b2f5d00a66b87524dfd"),
            (Task::Reactions, "16f1f203c3d4876eaa2fe054154dc6b441c17431f793e8024c03c0f92e14d0ba"),
            (Task::Revisit, "8a4da1253cd72a927cc9fd9d71069df3b0dfb1973cbd1a6cdf06813dd47307bc"),
        ];
        for (task, pin) in pins {
            let digest = Sha256::digest(PromptTemplate::builtin_source(task).as_bytes());
            assert_eq!(hex(&digest), pin, "{task:?}");
        }
    }

    #[test]
    fn rendered_prompt_carries_task_marker() {
        for task in [Task::CorefText, Task::CorefAsset, Task::Reactions, Task::Revisit] {
            let t = PromptTemplate::builtin(task);
            assert_eq!(t.task, task);
            let prompt = t.render();
            assert_eq!(Task::from_marker(&prompt), Some(task));
            assert!(prompt.contains("Example 1 input:"));
        }
    }

    #[test]
    fn directory_override_falls_back_to_bundled() {
        let dir = tempfile::tempdir().unwrap();
        let mut custom = PromptTemplate::builtin(Task::Revisit);
        custom.version = 7;
        std::fs::write(dir.path().join("revisit.toml"), toml::to_string(&custom).unwrap()).unwrap();
        let set = TemplateSet::from_dir(dir.path()).unwrap();
        assert_eq!(set.revisit.version, 7);
        assert_eq!(set.reactions, PromptTemplate::builtin(Task::Reactions));
    }
}
