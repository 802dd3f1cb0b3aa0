use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::Failure;

pub fn load(path: &Path) -> Result<Map<String, Value>, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", path.display())))?;
    match serde_json::from_str(&text) {
        Ok(Value::Object(map)) => Ok(map),
        Ok(_) => Err(Failure::Usage(format!(
            "{}: config must be a JSON object",
            path.display()
        ))),
        Err(e) => Err(Failure::Usage(format!("{}: {e}", path.display()))),
    }
}

/// Fills flags that were not given on the command line from `config`.
/// Keys the subcommand does not know are rejected.
pub fn merge<T: Serialize + DeserializeOwned>(
    args: T,
    config: Option<Map<String, Value>>,
) -> Result<T, Failure> {
    let Some(config) = config else {
        return Ok(args);
    };
    let Value::Object(mut flags) = serde_json::to_value(&args).expect("flag structs serialize")
    else {
        unreachable!("flag structs serialize to objects")
    };
    for (key, value) in config {
        match flags.get_mut(&key) {
            None => return Err(Failure::Usage(format!("unknown config key `{key}`"))),
            Some(slot) if slot.is_null() => *slot = value,
            Some(_) => {}
        }
    }
    serde_json::from_value(Value::Object(flags)).map_err(|e| Failure::Usage(format!("config: {e}")))
}
