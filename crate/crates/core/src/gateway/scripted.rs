use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Mutex;

use super::{CompletionRequest, GatewayError, ModelBackend};
use crate::canonical;

/// Transcript key matching any prompt without its own entry.
pub const WILDCARD: &str = "*";

pub fn prompt_hash(prompt: &str) -> String {
    canonical::sha256_hex(prompt)
}

/// Replays canned completions keyed by prompt hash. Sample `i` of a request
/// is entry `(sample_offset + i) % len`, so output depends only on the
/// request. Every request is recorded for inspection.
#[derive(Debug, Default)]
pub struct ScriptedBackend {
    transcripts: BTreeMap<String, Vec<String>>,
    recorded: Mutex<Vec<CompletionRequest>>,
}

impl ScriptedBackend {
    pub fn new(transcripts: BTreeMap<String, Vec<String>>) -> Result<Self, GatewayError> {
        if let Some((key, _)) = transcripts.iter().find(|(_, v)| v.is_empty()) {
            return Err(GatewayError::Fixture(format!("transcript `{key}` has no completions")));
        }
        Ok(Self {
            transcripts,
            recorded: Mutex::default(),
        })
    }

    /// Same completions for every prompt.
    pub fn constant(completions: Vec<String>) -> Result<Self, GatewayError> {
        Self::new(BTreeMap::from([(WILDCARD.to_string(), completions)]))
    }

    /// Loads every `*.json` file in `dir`; each holds an object mapping
    /// prompt hash (or `*`) to a list of completions. Files are read in name
    /// order and a key may appear in only one file.
    pub fn from_dir(dir: &Path) -> Result<Self, GatewayError> {
        let read_err = |e: std::io::Error| GatewayError::Fixture(format!("{}: {e}", dir.display()));
        let mut paths: Vec<_> = std::fs::read_dir(dir)
            .map_err(read_err)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        let mut transcripts = BTreeMap::new();
        for path in paths {
            let text = std::fs::read_to_string(&path).map_err(read_err)?;
            let table: BTreeMap<String, Vec<String>> = serde_json::from_str(&text)
                .map_err(|e| GatewayError::Fixture(format!("{}: {e}", path.display())))?;
            for (key, completions) in table {
                if transcripts.insert(key.clone(), completions).is_some() {
                    return Err(GatewayError::Fixture(format!(
                        "{}: duplicate transcript key `{key}`",
                        path.display()
                    )));
                }
            }
        }
        Self::new(transcripts)
    }

    /// Writes the table as a single fixture file `dir/<name>.json`.
    pub fn write_fixture(transcripts: &BTreeMap<String, Vec<String>>, dir: &Path, name: &str) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(format!("{name}.json")), canonical::to_string_pretty(transcripts))
    }

    pub fn recorded(&self) -> Vec<CompletionRequest> {
        self.recorded.lock().expect("recorder poisoned").clone()
    }

    fn lookup(&self, prompt: &str) -> Option<&Vec<String>> {
        self.transcripts
            .get(&prompt_hash(prompt))
            .or_else(|| self.transcripts.get(WILDCARD))
    }
}

impl ModelBackend for ScriptedBackend {
    fn complete(&self, req: &CompletionRequest) -> Result<Vec<String>, GatewayError> {
        self.recorded.lock().expect("recorder poisoned").push(req.clone());
        let list = self.lookup(&req.prompt).ok_or_else(|| {
            GatewayError::Fixture(format!("no transcript for prompt hash {}", prompt_hash(&req.prompt)))
        })?;
        Ok((0..u64::from(req.n))
            .map(|i| list[((req.sample_offset + i) % list.len() as u64) as usize].clone())
            .collect())
    }

    fn describe(&self) -> String {
        format!("scripted({} transcripts)", self.transcripts.len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::DecodeParams;

    fn req(prompt: &str, n: u32, offset: u64) -> CompletionRequest {
        CompletionRequest {
            prompt: prompt.into(),
            n,
            params: DecodeParams { temperature: 1.0, max_tokens: 16 },
            sample_offset: offset,
        }
    }

    #[test]
    fn cycles_per_prompt() {
        let b = ScriptedBackend::new(BTreeMap::from([(prompt_hash("p"), vec!["c1".into(), "c2".into()])])).unwrap();
        assert_eq!(b.complete(&req("p", 3, 0)).unwrap(), ["c1", "c2", "c1"]);
        assert_eq!(b.complete(&req("p", 1, 5)).unwrap(), ["c2"]);
        assert!(matches!(b.complete(&req("other", 1, 0)), Err(GatewayError::Fixture(_))));
        assert_eq!(b.recorded().len(), 3);
    }

    #[test]
    fn wildcard_and_dir_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let table = BTreeMap::from([(WILDCARD.to_string(), vec!["x".to_string()])]);
        ScriptedBackend::write_fixture(&table, dir.path(), "all").unwrap();
        let b = ScriptedBackend::from_dir(dir.path()).unwrap();
        assert_eq!(b.complete(&req("anything", 2, 0)).unwrap(), ["x", "x"]);
    }
}
