use std::collections::HashMap;

use stexquiz_app::config::{BackendMode, PartialSettings, Settings};

fn env(pairs: &[(&str, &str)]) -> impl Fn(&str) -> Option<String> {
    let map: HashMap<String, String> = pairs
        .iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
    move |k| map.get(k).cloned()
}

#[test]
fn defaults() {
    let s = Settings::resolve(PartialSettings::default());
    assert_eq!(s.backend, BackendMode::Replay);
    assert_eq!(s.model, "gpt-4");
    assert_eq!(s.temperature, 1.0);
    assert_eq!(s.max_output_tokens, 4096);
    assert!(s.search_tool);
    assert_eq!(s.listen, "127.0.0.1:8080");
}

#[test]
fn flags_over_env_over_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("stexquiz.toml");
    std::fs::write(
        &path,
        "store = \"data\"\nmodel = \"file-model\"\ntemperature = 0.2\nbackend = \"live\"\nlisten = \"0.0.0.0:1\"\n",
    )
    .unwrap();
    let file = PartialSettings::from_file(&path).unwrap();
    assert_eq!(file.store, Some(dir.path().join("data")));

    let env = PartialSettings::from_env(env(&[
        ("STEXQUIZ_MODEL", "env-model"),
        ("STEXQUIZ_TEMPERATURE", "0.5"),
        ("STEXQUIZ_SEARCH_TOOL", "0"),
        ("STEXQUIZ_BACKEND", ""),
    ]))
    .unwrap();
    let flags = PartialSettings {
        temperature: Some(0.0),
        ..Default::default()
    };
    let s = Settings::resolve(flags.or(env).or(file));
    assert_eq!(s.temperature, 0.0);
    assert_eq!(s.model, "env-model");
    assert!(!s.search_tool);
    // empty variables count as unset
    assert_eq!(s.backend, BackendMode::Live);
    assert_eq!(s.listen, "0.0.0.0:1");
    assert_eq!(s.store, dir.path().join("data"));
}

#[test]
fn bad_values() {
    assert!(PartialSettings::from_env(env(&[("STEXQUIZ_BACKEND", "cloud")])).is_err());
    assert!(PartialSettings::from_env(env(&[("STEXQUIZ_TEMPERATURE", "hot")])).is_err());
    assert!(PartialSettings::from_env(env(&[("STEXQUIZ_SEARCH_TOOL", "maybe")])).is_err());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.toml");
    std::fs::write(&path, "colour = \"red\"\n").unwrap();
    assert!(PartialSettings::from_file(&path).is_err());
    assert!(PartialSettings::from_file(&dir.path().join("absent.toml")).is_err());
}
