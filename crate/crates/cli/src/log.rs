//! One JSON object per line on stderr.

use serde_json::{Map, Value};

pub fn event(name: &str, fields: Value) {
    emit("info", name, fields);
}

pub fn warn(name: &str, fields: Value) {
    emit("warn", name, fields);
}

pub fn error(name: &str, fields: Value) {
    emit("error", name, fields);
}

fn emit(level: &str, name: &str, fields: Value) {
    let mut line = Map::new();
    line.insert("level".into(), level.into());
    line.insert("event".into(), name.into());
    match fields {
        Value::Object(map) => line.extend(map),
        Value::Null => {}
        other => {
            line.insert("value".into(), other);
        }
    }
    eprintln!("{}", Value::Object(line));
}
