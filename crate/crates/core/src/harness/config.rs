//! JSON configuration files: one flat object whose keys are the fields of
//! [`SystemConfig`] and [`ChannelGenSpec`]. Omitted keys keep their
//! defaults; unknown keys are rejected.

use std::collections::BTreeSet;
use std::path::Path;

use serde_json::{Map, Value};

use super::channel::ChannelGenSpec;
use crate::error::{Error, Result};
use crate::model::SystemConfig;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConfigFile {
    pub system: SystemConfig,
    pub channel: ChannelGenSpec,
    /// Keys present in the file, so experiment defaults never override
    /// something the user wrote.
    pub explicit: BTreeSet<String>,
}

impl ConfigFile {
    pub fn is_explicit(&self, key: &str) -> bool {
        self.explicit.contains(key)
    }
}

fn field_names<T: serde::Serialize>(value: &T) -> BTreeSet<String> {
    match serde_json::to_value(value) {
        Ok(Value::Object(map)) => map.keys().cloned().collect(),
        _ => BTreeSet::new(),
    }
}

pub fn parse_config(text: &str) -> Result<ConfigFile> {
    let root: Value = serde_json::from_str(text)?;
    let Value::Object(root) = root else {
        return Err(Error::invalid("configuration must be a JSON object"));
    };
    let system_keys = field_names(&SystemConfig::default());
    let channel_keys = field_names(&ChannelGenSpec::default());
    let mut system = Map::new();
    let mut channel = Map::new();
    let mut explicit = BTreeSet::new();
    for (key, value) in root {
        if system_keys.contains(&key) {
            system.insert(key.clone(), value);
        } else if channel_keys.contains(&key) {
            channel.insert(key.clone(), value);
        } else {
            return Err(Error::invalid(format!("unknown configuration key `{key}`")));
        }
        explicit.insert(key);
    }
    let system: SystemConfig = serde_json::from_value(Value::Object(system))?;
    let channel: ChannelGenSpec = serde_json::from_value(Value::Object(channel))?;
    Ok(ConfigFile {
        system,
        channel,
        explicit,
    })
}

pub fn load_config(path: &Path) -> Result<ConfigFile> {
    parse_config(&std::fs::read_to_string(path)?)
}
