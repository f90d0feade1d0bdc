//! JSON problem files: either an inclusion problem or a vector optimization
//! problem, distinguished by the `kind` field.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::catalog;
use crate::error::{Error, Result};
use crate::setmaps::SviProblem;
use crate::vopt::VopSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProblemFile {
    Svi(SviProblem),
    Vop(VopSpec),
}

/// Names accepted by [`example`].
pub const EXAMPLE_NAMES: &[&str] = &[
    "ex38",
    "ex38-boxed",
    "triangle-vop",
    "triangle-vop-ccw",
    "sine-deviation",
];

/// Bundled example problems by name.
pub fn example(name: &str) -> Result<ProblemFile> {
    Ok(match name {
        "ex38" => ProblemFile::Svi(catalog::example_3_8()),
        "ex38-boxed" => ProblemFile::Svi(catalog::example_3_8_boxed()),
        "triangle-vop" => ProblemFile::Vop(catalog::triangle_vop(true)),
        "triangle-vop-ccw" => ProblemFile::Vop(catalog::triangle_vop(false)),
        "sine-deviation" => ProblemFile::Vop(catalog::sine_deviation_vop()),
        other => {
            return Err(Error::InvalidConfig(format!(
                "unknown example '{other}'; known: {}",
                EXAMPLE_NAMES.join(", ")
            )))
        }
    })
}

impl ProblemFile {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Parse(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = self.to_json()?;
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::Parse(format!("cannot write {}: {e}", path.display())))
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ProblemFile::Svi(_) => "svi",
            ProblemFile::Vop(_) => "vop",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_example_round_trips() {
        for name in EXAMPLE_NAMES {
            let file = example(name).unwrap();
            let back = ProblemFile::from_json(&file.to_json().unwrap()).unwrap();
            assert_eq!(back, file, "{name}");
        }
    }

    #[test]
    fn kind_tag_is_required() {
        let mut v: serde_json::Value = serde_json::from_str(&example("ex38").unwrap().to_json().unwrap()).unwrap();
        v.as_object_mut().unwrap().remove("kind");
        assert!(matches!(ProblemFile::from_json(&v.to_string()), Err(Error::Parse(_))));
    }

    #[test]
    fn invalid_problem_is_rejected_on_parse() {
        let mut v: serde_json::Value = serde_json::from_str(&example("triangle-vop").unwrap().to_json().unwrap()).unwrap();
        v["objective_lipschitz"] = serde_json::json!(0.5);
        assert!(ProblemFile::from_json(&v.to_string()).is_err());
    }

    #[test]
    fn unknown_example() {
        assert!(example("nope").is_err());
    }
}
