//! End-to-end checks of the command-line interface.

use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mimo-snc"))
}

#[test]
fn capacity_command_writes_csv_to_stdout() {
    let out = bin()
        .args(["capacity", "--n-antennas", "2", "--samples", "2000", "--snr-db", "16"])
        .output()
        .expect("run capacity");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "n_antennas,class,pi,rate_bits_per_s_hz,rate_blocks_per_slot,std_err_bits"
    );
    assert_eq!(text.lines().count(), 5); // 3 classes + foc row
}

#[test]
fn same_seed_reruns_are_byte_identical() {
    let run = || {
        let out = bin()
            .args([
                "delay-bound",
                "--n-antennas",
                "2",
                "--samples",
                "2000",
                "--snr-db",
                "16",
                "--seed",
                "9",
            ])
            .output()
            .expect("run delay-bound");
        assert!(out.status.success());
        out.stdout
    };
    assert_eq!(run(), run());
}

#[test]
fn config_file_and_out_flag() {
    let dir = std::env::temp_dir().join(format!("mimo-snc-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let cfg_path = dir.join("exp.cfg");
    let out_path = dir.join("rows.csv");
    std::fs::write(
        &cfg_path,
        "n_mc_samples = 2000\nsnr_db = 16\nepsilon = 1e-2,1e-4\n# comment\n",
    )
    .unwrap();
    let out = bin()
        .args([
            "delay-bound",
            "--config",
            cfg_path.to_str().unwrap(),
            "--out",
            out_path.to_str().unwrap(),
        ])
        .output()
        .expect("run with config");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&out_path).unwrap();
    assert!(text.starts_with("sweep_var,value,d_slots,d_ms,theta_star,feasible"));
    assert_eq!(text.lines().count(), 3); // header + 2 epsilon rows
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn infeasible_only_sweep_exits_with_2() {
    let out = bin()
        .args([
            "delay-bound",
            "--n-antennas",
            "2",
            "--samples",
            "2000",
            "--snr-db",
            "16",
            "--rate-mbps",
            "900",
        ])
        .output()
        .expect("run infeasible");
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_flag_value_exits_with_error() {
    let out = bin()
        .args(["delay-bound", "--epsilon", "2.0"])
        .output()
        .expect("run bad epsilon");
    assert_eq!(out.status.code(), Some(1));
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
}

#[test]
fn show_config_prints_hash() {
    let out = bin().args(["show-config"]).output().expect("show-config");
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("period_slots = 10"));
    assert!(text.contains("# sha256 = "));
}
