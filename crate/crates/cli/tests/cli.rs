use std::path::Path;
use std::process::Command;

const QUICK: &str = "\
episodes = 2
episode_length = 10
eval_steps = 8
heatmap_step_m = 1.0

[hp]
buffer = 10
minibatch = 5
";

fn run(args: &[&str], dir: &Path) -> String {
    let out = Command::new(env!("CARGO_BIN_EXE_focalray")).args(args).current_dir(dir).output().unwrap();
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn train_then_evaluate_and_map() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("quick.toml"), QUICK).unwrap();
    let common = ["--config", "quick.toml", "--out", "out"];

    let text = run(&[&["train"][..], &common].concat(), d);
    assert!(text.contains("trained ma_focus for 2 episodes"), "{text}");
    let metrics = std::fs::read_to_string(d.join("out/metrics.csv")).unwrap();
    assert!(metrics.starts_with("episode,mean_reward"));
    assert_eq!(metrics.lines().count(), 3);

    let text = run(&[&["eval", "--checkpoint", "out/model.json"][..], &common].concat(), d);
    assert!(text.contains("\"scheme\":\"ma_focus\""), "{text}");
    assert!(d.join("out/eval.csv").exists() && d.join("out/summary.json").exists());

    let text = run(&[&["baseline", "--checkpoint", "out/model.json"][..], &common].concat(), d);
    assert_eq!(text.lines().count(), 3, "{text}");
    assert!(text.contains("\"scheme\":\"none\"") && text.contains("\"scheme\":\"flat\""));

    let text = run(&[&["sweep-users", "--checkpoint", "out/model.json", "--users", "2,4"][..], &common].concat(), d);
    assert!(text.contains("\"users\":2") && text.contains("\"users\":4"), "{text}");

    run(&[&["heatmap", "--checkpoint", "out/model.json"][..], &common].concat(), d);
    for f in ["heatmap.csv", "heatmap.pgm", "heatmap_users.csv"] {
        assert!(d.join("out").join(f).exists(), "{f}");
    }
}

#[test]
fn training_is_reproducible_from_the_command_line() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("quick.toml"), QUICK).unwrap();
    run(&["train", "--config", "quick.toml", "--seed", "9", "--out", "a"], d);
    run(&["train", "--config", "quick.toml", "--seed", "9", "--out", "b"], d);
    let a = std::fs::read(d.join("a/metrics.csv")).unwrap();
    let b = std::fs::read(d.join("b/metrics.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn rejects_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = Command::new(env!("CARGO_BIN_EXE_focalray"))
        .args(["eval", "--scheme", "best", "--out", "o"])
        .current_dir(d)
        .output()
        .unwrap();
    assert!(!out.status.success());
    let out = Command::new(env!("CARGO_BIN_EXE_focalray"))
        .args(["eval", "--scheme", "ma_focus", "--out", "o"])
        .current_dir(d)
        .output()
        .unwrap();
    assert!(!out.status.success(), "a learned scheme needs a checkpoint");
}
