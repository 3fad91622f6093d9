//! JSON config file. Keys are the long flag names, grouped by subcommand:
//!
//! ```json
//! { "convergence": { "m": 5, "weight": "I3", "dx-levels": "2^-5..2^-7" },
//!   "weights": { "construct": { "d": 2, "n": 3, "p": 3 } } }
//! ```
//!
//! Flags given on the command line override the file.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

pub struct ConfigFile {
    root: Map<String, Value>,
}

impl ConfigFile {
    pub fn empty() -> Self {
        Self { root: Map::new() }
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        match serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))? {
            Value::Object(root) => Ok(Self { root }),
            _ => Err(format!("{}: top level must be an object", path.display())),
        }
    }

    /// Section at a path of keys such as `["weights", "check"]`.
    fn section(&self, path: &[&str]) -> Option<&Map<String, Value>> {
        let mut cur = &self.root;
        for key in path {
            cur = cur.get(*key)?.as_object()?;
        }
        Some(cur)
    }

    /// Overlays the flags that were given on the command line onto the file
    /// section and deserializes the result.
    pub fn merge<T: Serialize + DeserializeOwned>(&self, path: &[&str], cli: &T) -> Result<T, String> {
        let mut merged = self.section(path).cloned().unwrap_or_default();
        let Value::Object(flags) = serde_json::to_value(cli).map_err(|e| e.to_string())? else {
            return Err("flags did not serialize to an object".into());
        };
        for (k, v) in flags {
            if !v.is_null() {
                merged.insert(k, v);
            }
        }
        serde_json::from_value(Value::Object(merged)).map_err(|e| format!("config section `{}`: {e}", path.join(".")))
    }
}
