//! Flat key=value configuration files.
//!
//! Lines are `key = value`; `#` starts a comment. Keys match the long flag
//! names without dashes prefix (for example `protocol`, `nbar`, `delta-s`).
//! Precedence is flags over file over built-in defaults; keys not used by
//! the invoked subcommand are ignored.

use std::collections::HashMap;
use std::path::Path;

pub struct FileConfig {
    values: HashMap<String, String>,
}

impl FileConfig {
    pub fn empty() -> Self {
        FileConfig {
            values: HashMap::new(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        let mut values = HashMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                format!(
                    "config {}:{}: expected key=value, got '{raw}'",
                    path.display(),
                    lineno + 1
                )
            })?;
            values.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(FileConfig { values })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|s| s.as_str())
    }

    /// Flag value if given, else the config entry parsed as `T`, else `None`.
    pub fn resolve<T: std::str::FromStr + Clone>(
        &self,
        flag: &Option<T>,
        key: &str,
    ) -> Result<Option<T>, String> {
        if let Some(v) = flag {
            return Ok(Some(v.clone()));
        }
        match self.get(key) {
            Some(raw) => raw
                .parse::<T>()
                .map(Some)
                .map_err(|_| format!("config key '{key}': cannot parse '{raw}'")),
            None => Ok(None),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn test_parse_and_precedence() {
        let dir = std::env::temp_dir().join("netkit-config-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("cfg.txt");
        let mut f = std::fs::File::create(&path).unwrap();
        writeln!(f, "# comment\nprotocol = conference\nnbar = 0.05  # inline").unwrap();
        drop(f);
        let cfg = FileConfig::load(&path).unwrap();
        assert_eq!(cfg.get("protocol"), Some("conference"));
        let flag: Option<f64> = Some(0.1);
        assert_eq!(cfg.resolve(&flag, "nbar").unwrap(), Some(0.1));
        let none: Option<f64> = None;
        assert_eq!(cfg.resolve(&none, "nbar").unwrap(), Some(0.05));
        assert_eq!(cfg.resolve::<f64>(&None, "missing").unwrap(), None);
    }
}
