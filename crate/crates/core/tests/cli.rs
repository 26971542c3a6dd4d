use std::path::Path;
use std::process::{Command, Output};

use afdm::channel::read_matrix_csv;
use afdm::harness::HEADER;

fn afdm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_afdm")).args(args).output().unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("exp.toml");
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

const SMALL: &str = r#"
[waveform]
n_subcarriers = 16
[channel]
num_paths = 3
[[detectors]]
kind = "mmse"
[[detectors]]
kind = "ep-af"
[sweep]
snr_db = [4.0, 8.0]
min_frames = 3
max_frames = 6
target_errors = 10
seed = 9
"#;

#[test]
fn ber_writes_identical_csv_twice() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        let o = afdm(&["ber", "--config", &cfg, "--out", out.to_str().unwrap(), "--quiet"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text.lines().next(), Some(HEADER));
    assert_eq!(text.lines().count(), 5);
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());
}

#[test]
fn ber_prints_to_stdout_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let o = afdm(&["ber", "--config", &cfg]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).starts_with(HEADER));
    assert!(String::from_utf8_lossy(&o.stderr).contains("mmse"));
}

#[test]
fn config_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &SMALL.replace("seed = 9", "seed = 9\nbogus = 1"));
    let o = afdm(&["ber", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bogus"));
    let o = afdm(&["ber", "--config", "/nonexistent/exp.toml"]);
    assert_eq!(o.status.code(), Some(1));
    let o = afdm(&["complexity", "--config", &write_config(dir.path(), &SMALL.replace("[4.0, 8.0]", "[8.0, 4.0]"))]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn matrix_dump_is_quasi_banded() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ht.csv");
    let o = afdm(&[
        "matrix", "--channel", "ds", "--what", "ht", "--n", "32", "--paths", "4", "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m = read_matrix_csv(std::io::BufReader::new(std::fs::File::open(&out).unwrap())).unwrap();
    assert_eq!((m.nrows(), m.ncols()), (32, 32));
    for i in 0..32 {
        for j in 0..32 {
            let d = (i + 32 - j) % 32;
            if d > 3 {
                assert!(m[(i, j)].norm() < 1e-12, "({i}, {j})");
            }
        }
    }
    let gram = dir.path().join("gram.csv");
    let o = afdm(&[
        "matrix", "--channel", "fs", "--what", "gram", "--n", "16", "--paths", "3", "--out", gram.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let g = read_matrix_csv(std::io::BufReader::new(std::fs::File::open(&gram).unwrap())).unwrap();
    for i in 0..16 {
        assert!(g[(i, i)].im.abs() < 1e-12 && g[(i, i)].re > 0.0);
    }
}

#[test]
fn inv_bench_and_complexity_print_tables() {
    let o = afdm(&["inv-bench", "--n", "32", "--lmax", "3", "--k", "2"]);
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("phi 6") && text.contains("Psi inverse"));

    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let o = afdm(&["complexity", "--config", &cfg]);
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    assert_eq!(text.lines().count(), 3);
    assert!(text.contains("ep-af"));
}
