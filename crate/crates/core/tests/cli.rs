use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_freqlab"))
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn out_dir(tag: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("freqlab-cli-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    d
}

#[test]
fn run_harmonic_passes() {
    let out = out_dir("run");
    let st = bin().args(["run"]).arg(config("harmonic.toml")).arg("--out").arg(&out).output().unwrap();
    assert_eq!(st.status.code(), Some(0), "{}", String::from_utf8_lossy(&st.stderr));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("checks.json")).unwrap()).unwrap();
    let names: Vec<&str> = json.as_array().unwrap().iter().map(|c| c["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["H-prime", "order"]);
    let csv = std::fs::read_to_string(out.join("profile_harmonic_k1_h128_c0.csv")).unwrap();
    assert!(csv.starts_with("r,H,I1,I2,I3,I4,I5,I_form1,I_form2,h,N\n"));
}

#[test]
fn verbs_write_their_own_files() {
    let v = out_dir("verify");
    assert_eq!(bin().arg("verify").arg(config("harmonic.toml")).arg("--out").arg(&v).output().unwrap().status.code(), Some(0));
    let files: Vec<_> = std::fs::read_dir(&v).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(files, ["checks.json"]);

    let p = out_dir("profile");
    assert_eq!(bin().arg("profile").arg(config("harmonic.toml")).arg("--out").arg(&p).output().unwrap().status.code(), Some(0));
    assert!(!p.join("checks.json").exists());
    assert!(p.join("plot_r_N_harmonic_k1_h128_c0.dat").exists());

    let s = out_dir("solve");
    assert_eq!(bin().arg("solve").arg(config("solve.toml")).arg("--out").arg(&s).output().unwrap().status.code(), Some(0));
    let dump = std::fs::read_to_string(s.join("field_solve_h64.txt")).unwrap();
    let mut lines = dump.lines();
    assert_eq!(lines.next(), Some("2,65,0.5"));
    assert_eq!(lines.count(), 65 * 65);
}

#[test]
fn zero_solution_is_a_runtime_error() {
    let out = out_dir("zero");
    let st = bin().arg("run").arg(config("zero.toml")).arg("--out").arg(&out).output().unwrap();
    assert_eq!(st.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&st.stderr).contains("field vanishes beyond resolution"));
}

#[test]
fn invalid_configs_exit_with_two() {
    let dir = out_dir("bad");
    std::fs::create_dir_all(&dir).unwrap();
    let cases = [
        ("unknown_key.toml", "checks = [\"order\"]\ncolour = 1\n[case]\nkind = \"builtin\"\nname = \"constant\"\n[grid]\nextent = 0.5\nresolutions = [64]\n"),
        ("unknown_case.toml", "checks = [\"order\"]\n[case]\nkind = \"builtin\"\nname = \"nope\"\n[grid]\nextent = 0.5\nresolutions = [64]\n"),
        ("too_big.toml", "checks = [\"order\"]\n[case]\nkind = \"builtin\"\nname = \"constant\"\n[grid]\nextent = 0.25\nresolutions = [64]\n"),
    ];
    for (name, body) in cases {
        let path = dir.join(name);
        std::fs::write(&path, body).unwrap();
        let st = bin().arg("run").arg(&path).arg("--out").arg(dir.join("o")).output().unwrap();
        assert_eq!(st.status.code(), Some(2), "{name}: {}", String::from_utf8_lossy(&st.stderr));
    }
    let st = bin().arg("solve").arg(config("harmonic.toml")).arg("--out").arg(dir.join("o")).output().unwrap();
    assert_eq!(st.status.code(), Some(2));
}

#[test]
fn failing_check_exits_with_one() {
    let dir = out_dir("fail");
    std::fs::create_dir_all(&dir).unwrap();
    // H′ on x₁ at ratio ≈ 1.1 has a truncation mismatch near 0.9%.
    let body = "checks = [\"h-prime\"]\n[case]\nkind = \"builtin\"\nname = \"harmonic_k1\"\n[grid]\nextent = 0.5625\nresolutions = [128]\n[radii]\ncount = 12\n[tolerances]\nh_prime = 0.001\n";
    let path = dir.join("strict.toml");
    std::fs::write(&path, body).unwrap();
    let st = bin().arg("verify").arg(&path).arg("--out").arg(dir.join("o")).output().unwrap();
    assert_eq!(st.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&st.stdout).contains("FAIL H-prime"));
}

#[test]
fn unwritable_output_exits_with_three() {
    let blocker = out_dir("blocked");
    std::fs::write(&blocker, "a file, not a directory").unwrap();
    let st = bin().arg("verify").arg(config("harmonic.toml")).arg("--out").arg(blocker.join("sub")).output().unwrap();
    assert_eq!(st.status.code(), Some(3));
    std::fs::remove_file(&blocker).unwrap();
}
