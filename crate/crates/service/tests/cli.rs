use std::process::Command;

fn sp() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sp"))
}

fn fixture(name: &str) -> String {
    format!(
        "{}/../core/tests/fixtures/{name}",
        env!("CARGO_MANIFEST_DIR")
    )
}

#[test]
fn align_prints_json() {
    let out = sp()
        .args([
            "align",
            &fixture("dictionary.sp"),
            &fixture("spelling_new.sp"),
        ])
        .args(["--top", "1", "--format", "json"])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 1);
    assert_eq!(v[0]["alignment"]["code"], serde_json::json!(["E3"]));
}

#[test]
fn learn_writes_a_loadable_knowledge_file() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus.txt");
    let kb = dir.path().join("learned.sp");
    let text = ["j o h n r u n s", "m a r y r u n s"]
        .repeat(4)
        .join("\n\n");
    std::fs::write(&corpus, text).unwrap();
    let out = sp()
        .arg("learn")
        .arg(&corpus)
        .arg("-o")
        .arg(&kb)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let store = sp_core::parse_knowledge_file(&std::fs::read_to_string(&kb).unwrap()).unwrap();
    assert!(!store.is_empty());
    assert!(store
        .patterns()
        .iter()
        .any(|p| p.text().contains("r u n s")));
}

#[test]
fn missing_file_fails_cleanly() {
    let out = sp()
        .args(["diagnose", "/no/such/kb.sp", "/no/such/findings"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("reading /no/such/kb.sp"));
}
