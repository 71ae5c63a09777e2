//! Plain-text `key = value` run configuration.
//!
//! Every subcommand resolves its parameters the same way: an explicit
//! flag wins, then the config file, then the built-in default. The
//! resolved values are recorded in flag order and written next to any
//! file the command produces, so a finished run can be repeated with
//! `--config <that file>` alone.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use bnn_core::fmt_f64;

/// Key/value pairs from a config file. Later lines override earlier
/// ones; `#` starts a comment anywhere on a line.
#[derive(Debug, Default)]
pub struct ConfigMap {
    values: BTreeMap<String, String>,
}

impl ConfigMap {
    pub fn empty() -> Self {
        ConfigMap::default()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        let mut values = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("{}:{}: expected `key = value`, got `{raw}`", path.display(), lineno + 1);
            };
            values.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(ConfigMap { values })
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }
}

/// A value that can live in a config file.
///
/// Floats render with full round-trip precision so that a written
/// config reproduces the run bit for bit.
pub trait ConfigValue: Sized {
    fn parse_cfg(s: &str) -> Result<Self>;
    fn render_cfg(&self) -> String;
}

macro_rules! config_value_via_fromstr {
    ($($t:ty => $what:literal),*) => {$(
        impl ConfigValue for $t {
            fn parse_cfg(s: &str) -> Result<Self> {
                <$t as FromStr>::from_str(s)
                    .map_err(|_| anyhow::anyhow!("`{s}` is not {}", $what))
            }
            fn render_cfg(&self) -> String {
                self.to_string()
            }
        }
    )*};
}

config_value_via_fromstr!(
    u64 => "an unsigned integer",
    usize => "an unsigned integer",
    bool => "`true` or `false`"
);

impl ConfigValue for f64 {
    fn parse_cfg(s: &str) -> Result<Self> {
        s.parse().map_err(|_| anyhow::anyhow!("`{s}` is not a float"))
    }

    fn render_cfg(&self) -> String {
        fmt_f64(*self)
    }
}

impl ConfigValue for String {
    fn parse_cfg(s: &str) -> Result<Self> {
        Ok(s.to_string())
    }

    fn render_cfg(&self) -> String {
        self.clone()
    }
}

impl ConfigValue for PathBuf {
    fn parse_cfg(s: &str) -> Result<Self> {
        Ok(PathBuf::from(s))
    }

    fn render_cfg(&self) -> String {
        self.display().to_string()
    }
}

/// Resolves one command's parameters against a config file and records
/// the outcome for the config echo written next to the outputs.
pub struct Resolver<'a> {
    cfg: &'a ConfigMap,
    entries: Vec<(String, String)>,
}

impl<'a> Resolver<'a> {
    /// Checks the file against the command's legal key set before any
    /// value is read, so typos fail loudly instead of falling back to
    /// defaults.
    pub fn new(command: &'static str, cfg: &'a ConfigMap, allowed: &[&str]) -> Result<Self> {
        if let Some(written_for) = cfg.get("command") {
            if written_for != command {
                bail!("config file was written for `{written_for}`, not `{command}`");
            }
        }
        for key in cfg.values.keys() {
            if key != "command" && !allowed.contains(&key.as_str()) {
                bail!(
                    "unknown config key `{key}` for {command} (allowed: {})",
                    allowed.join(", ")
                );
            }
        }
        Ok(Resolver { cfg, entries: vec![("command".into(), command.into())] })
    }

    fn from_cfg<T: ConfigValue>(&self, key: &str) -> Result<Option<T>> {
        match self.cfg.get(key) {
            Some(raw) => {
                let v = T::parse_cfg(raw).with_context(|| format!("config key `{key}`"))?;
                Ok(Some(v))
            }
            None => Ok(None),
        }
    }

    fn record(&mut self, key: &str, value: &str) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    /// Flag, then config file, then default.
    pub fn value<T: ConfigValue>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T> {
        let v = match flag {
            Some(v) => v,
            None => self.from_cfg(key)?.unwrap_or(default),
        };
        self.record(key, &v.render_cfg());
        Ok(v)
    }

    /// Flag or config file; absent everywhere is an error.
    pub fn required<T: ConfigValue>(&mut self, key: &str, flag: Option<T>) -> Result<T> {
        match self.optional(key, flag)? {
            Some(v) => Ok(v),
            None => bail!(
                "missing `{key}`: pass --{} or set it in the config file",
                key.replace('_', "-")
            ),
        }
    }

    /// Flag or config file; may legitimately stay unset.
    pub fn optional<T: ConfigValue>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>> {
        let v = match flag {
            Some(v) => Some(v),
            None => self.from_cfg(key)?,
        };
        if let Some(v) = &v {
            self.record(key, &v.render_cfg());
        }
        Ok(v)
    }

    pub fn render(&self) -> String {
        let mut s = String::from("# resolved bnn run configuration\n");
        for (k, v) in &self.entries {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(v);
            s.push('\n');
        }
        s
    }

    /// Writes the resolved config next to `artifact`, swapping its
    /// extension for `.config`.
    pub fn write_next_to(&self, artifact: &Path) -> Result<PathBuf> {
        let path = sibling(artifact, "config");
        if path == artifact {
            bail!("output path {} collides with its own config echo", artifact.display());
        }
        fs::write(&path, self.render())
            .with_context(|| format!("cannot write {}", path.display()))?;
        Ok(path)
    }
}

/// `weights.bnnw` -> `weights.log.csv` and friends.
pub fn sibling(path: &Path, ext: &str) -> PathBuf {
    let mut p = path.to_path_buf();
    p.set_extension(ext);
    p
}
