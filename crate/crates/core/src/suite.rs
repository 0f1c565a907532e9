//! Benchmark suites: videos plus questions, generated from one seed.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::generate::{generate_qa_with, generate_video_with_id, GenerationProfile};
use crate::model::{ModelError, QAInstance, QuestionKind, SyntheticVideo};
use crate::rng::mix_seed;

pub const SUITE_VERSION: u32 = 1;

/// Attempts per slot before a question kind is given up on for that slot.
const MAX_ATTEMPTS: u64 = 64;

#[derive(Debug, Error)]
pub enum SuiteError {
    #[error("invalid profile: {0}")]
    Profile(String),
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("suite is inconsistent: {0}")]
    Inconsistent(String),
    #[error("could not generate question {index}: {source}")]
    Generation { index: usize, source: ModelError },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Suite {
    pub version: u32,
    pub seed: u64,
    pub profile: GenerationProfile,
    pub videos: Vec<SyntheticVideo>,
    pub questions: Vec<QAInstance>,
}

impl Suite {
    /// `n` questions, one video each, question kinds in round-robin order.
    pub fn generate(seed: u64, n: usize, profile: &GenerationProfile) -> Result<Self, SuiteError> {
        profile.validate().map_err(|e| SuiteError::Profile(e.to_string()))?;
        let mut videos = Vec::with_capacity(n);
        let mut questions = Vec::with_capacity(n);
        for i in 0..n {
            let kind = QuestionKind::ALL[i % QuestionKind::ALL.len()];
            let mut last_err = None;
            let mut made = None;
            for attempt in 0..MAX_ATTEMPTS {
                let vseed = mix_seed(&[b"suite-video", &seed.to_le_bytes(), &(i as u64).to_le_bytes(), &attempt.to_le_bytes()]);
                let vid = format!("s{seed}-v{i:04}");
                let video = generate_video_with_id(vseed, profile, &vid).map_err(|e| SuiteError::Profile(e.to_string()))?;
                match generate_qa_with(&video, vseed, kind, profile.n_options) {
                    Ok(mut qa) => {
                        qa.question_id = format!("s{seed}-q{i:04}");
                        made = Some((video, qa));
                        break;
                    }
                    Err(e) => last_err = Some(e),
                }
            }
            let (video, qa) = made.ok_or_else(|| SuiteError::Generation {
                index: i,
                source: last_err.expect("at least one attempt"),
            })?;
            videos.push(video);
            questions.push(qa);
        }
        Ok(Suite { version: SUITE_VERSION, seed, profile: profile.clone(), videos, questions })
    }

    pub fn validate(&self) -> Result<(), SuiteError> {
        if self.version != SUITE_VERSION {
            return Err(SuiteError::Inconsistent(format!("unsupported version {}", self.version)));
        }
        let by_id = self.video_index();
        if by_id.len() != self.videos.len() {
            return Err(SuiteError::Inconsistent("duplicate video ids".into()));
        }
        for v in &self.videos {
            v.validate().map_err(|e| SuiteError::Inconsistent(e.to_string()))?;
        }
        for q in &self.questions {
            let v = by_id
                .get(q.video_id.as_str())
                .ok_or_else(|| SuiteError::Inconsistent(format!("{} references unknown video {}", q.question_id, q.video_id)))?;
            q.validate(v).map_err(|e| SuiteError::Inconsistent(e.to_string()))?;
        }
        Ok(())
    }

    pub fn video_index(&self) -> BTreeMap<&str, &SyntheticVideo> {
        self.videos.iter().map(|v| (v.video_id.as_str(), v)).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("suite serializes")
    }

    pub fn from_json(text: &str, origin: &str) -> Result<Self, SuiteError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let suite: Suite = serde_path_to_error::deserialize(de)
            .map_err(|e| SuiteError::Parse { path: origin.to_string(), message: format!("{} at `{}`", e.inner(), e.path()) })?;
        suite.validate()?;
        Ok(suite)
    }

    pub fn load(path: &Path) -> Result<Self, SuiteError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text, &path.display().to_string())
    }

    pub fn save(&self, path: &Path) -> Result<(), SuiteError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }
}

/// Reads a generation profile from TOML or JSON (by extension).
pub fn load_profile(path: &Path) -> Result<GenerationProfile, SuiteError> {
    let text = std::fs::read_to_string(path)?;
    let bad = |message: String| SuiteError::Parse { path: path.display().to_string(), message };
    let profile: GenerationProfile = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?
    } else {
        toml::from_str(&text).map_err(|e| bad(e.to_string()))?
    };
    profile.validate().map_err(|e| SuiteError::Profile(e.to_string()))?;
    Ok(profile)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_suite() {
        let p = GenerationProfile::default();
        let a = Suite::generate(0, 10, &p).unwrap();
        let b = Suite::generate(0, 10, &p).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        assert_eq!(a.questions.len(), 10);
        a.validate().unwrap();
    }

    #[test]
    fn empty_suite_is_valid() {
        let s = Suite::generate(3, 0, &GenerationProfile::default()).unwrap();
        let back = Suite::from_json(&s.to_json(), "mem").unwrap();
        assert!(back.questions.is_empty());
    }

    #[test]
    fn kinds_rotate() {
        let s = Suite::generate(1, 5, &GenerationProfile::default()).unwrap();
        let kinds: Vec<QuestionKind> = s.questions.iter().map(|q| q.question_kind).collect();
        assert_eq!(kinds, QuestionKind::ALL.to_vec());
    }
}
