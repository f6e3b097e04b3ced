use std::path::PathBuf;
use std::process::Command;

const EXAMPLES: &[&str] = &[
    "spectral_basics",
    "corollary_data",
    "smallness_condition",
    "linear_decay",
    "paired_run",
    "checkpoint_resume",
    "inequality_lab",
    "config_sweep",
];

fn example_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_sqg"))
        .parent()
        .unwrap()
        .join("examples")
}

#[test]
fn every_example_runs() {
    let dir = example_dir();
    for name in EXAMPLES {
        let exe = dir.join(format!("{name}{}", std::env::consts::EXE_SUFFIX));
        assert!(exe.exists(), "{} not built", exe.display());
        let out = Command::new(&exe).output().unwrap();
        assert!(
            out.status.success(),
            "{name}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        assert!(!out.stdout.is_empty(), "{name} printed nothing");
    }
}

#[test]
fn list_matches_the_directory() {
    let mut on_disk: Vec<String> = std::fs::read_dir(concat!(env!("CARGO_MANIFEST_DIR"), "/examples"))
        .unwrap()
        .map(|e| {
            e.unwrap()
                .path()
                .file_stem()
                .unwrap()
                .to_string_lossy()
                .into_owned()
        })
        .collect();
    on_disk.sort();
    let mut listed: Vec<String> = EXAMPLES.iter().map(|s| s.to_string()).collect();
    listed.sort();
    assert_eq!(on_disk, listed);
}
