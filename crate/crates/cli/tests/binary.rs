use std::fs;
use std::process::Command;

const BIN: &str = env!("CARGO_BIN_EXE_mblbfgs");

fn mblbfgs() -> Command {
    let mut c = Command::new(BIN);
    c.env_remove("MBLBFGS_OUT");
    c
}

fn code(c: &mut Command) -> i32 {
    c.output().unwrap().status.code().unwrap()
}

const SMALL: [&str; 6] = ["--synthetic", "300,8,4,0", "--epochs", "2", "--batch-frac", "0.2"];

#[test]
fn success_writes_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let status = code(mblbfgs().args(SMALL).args(["--step", "constant:0.5", "--seed", "1,2", "--out"]).arg(&out));
    assert_eq!(status, 0);
    assert!(out.join("manifest.csv").exists());
    assert!(out.join("robust_lbfgs_r0.2_o0.2_a0.5_p0_s2.csv").exists());
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(code(mblbfgs().arg("--help")), 0);
    assert_eq!(code(mblbfgs().arg("--version")), 0);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(mblbfgs().arg("--bogus")), 1);
    assert_eq!(code(&mut mblbfgs()), 1);
    assert_eq!(code(mblbfgs().args(SMALL).args(["--method", "newton"])), 1);
    assert_eq!(code(mblbfgs().args(SMALL).args(["--step", "constant:0"])), 1);
    assert_eq!(code(mblbfgs().args(["--synthetic", "300,8,4"])), 1);
}

#[test]
fn bad_data_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.svm");
    fs::write(&path, "+1 1:1\n+1 1:zz\n").unwrap();
    let out = mblbfgs().arg("--dataset").arg(&path).arg("--out").arg(dir.path().join("o")).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2, column 6"));
    assert_eq!(code(mblbfgs().arg("--dataset").arg(dir.path().join("missing"))), 2);
}

#[test]
fn abort_in_any_cell_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let status = code(mblbfgs().args(SMALL).args(["--step", "constant:1e8", "--step", "constant:0.5", "--out"]).arg(&out));
    assert_eq!(status, 3);
    assert_eq!(fs::read_to_string(out.join("manifest.csv")).unwrap().lines().count(), 3);
}

#[test]
fn dataset_file_runs() {
    let dir = tempfile::tempdir().unwrap();
    let data = mblbfgs_core::synthetic::make_synthetic(200, 6, 3, 1, 0.5).unwrap();
    let path = dir.path().join("train.svm");
    mblbfgs::libsvm::write_libsvm(&path, &data).unwrap();
    let out = dir.path().join("o");
    let status = code(
        mblbfgs()
            .arg("--dataset")
            .arg(&path)
            .args(["--objective", "sigmoid_lsq", "--method", "robust_lbfgs,multibatch_gd", "--step", "constant:0.1"])
            .args(["--batch-frac", "0.25", "--epochs", "2", "--out"])
            .arg(&out),
    );
    assert_eq!(status, 0);
    assert_eq!(fs::read_dir(&out).unwrap().count(), 3);
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let from_file = dir.path().join("from_file");
    let cfg = dir.path().join("run.conf");
    fs::write(
        &cfg,
        format!(
            "# small grid\nsynthetic = 300,8,4,0\nepochs = 2\nbatch_frac = 0.2\nseed = 7\nstep = constant:0.5\nout = {}\n",
            from_file.display()
        ),
    )
    .unwrap();
    assert_eq!(code(mblbfgs().arg("--config").arg(&cfg)), 0);
    assert!(from_file.join("robust_lbfgs_r0.2_o0.2_a0.5_p0_s7.csv").exists());

    let flag_out = dir.path().join("flag");
    assert_eq!(code(mblbfgs().arg("--config").arg(&cfg).args(["--seed", "8", "--out"]).arg(&flag_out)), 0);
    assert!(flag_out.join("robust_lbfgs_r0.2_o0.2_a0.5_p0_s8.csv").exists());
    assert!(!from_file.join("robust_lbfgs_r0.2_o0.2_a0.5_p0_s8.csv").exists());
}

#[test]
fn env_var_overrides_file_but_not_flag() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    fs::write(&cfg, format!("synthetic = 300,8,4,0\nepochs = 1\nbatch_frac = 0.2\nstep = constant:0.5\nout = {}\n", dir.path().join("file").display()))
        .unwrap();
    let env_out = dir.path().join("env");
    assert_eq!(code(mblbfgs().arg("--config").arg(&cfg).env("MBLBFGS_OUT", &env_out)), 0);
    assert!(env_out.join("manifest.csv").exists());
    assert!(!dir.path().join("file").exists());
    let flag_out = dir.path().join("flag");
    assert_eq!(code(mblbfgs().arg("--config").arg(&cfg).env("MBLBFGS_OUT", &env_out).arg("--out").arg(&flag_out)), 0);
    assert!(flag_out.join("manifest.csv").exists());
}
