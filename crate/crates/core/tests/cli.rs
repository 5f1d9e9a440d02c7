//! End-to-end checks of the `vofem` binary: exit codes, output formats,
//! and byte-stable tables.

use std::path::Path;
use std::process::Command;

fn vofem() -> Command {
    Command::new(env!("CARGO_BIN_EXE_vofem"))
}

#[test]
fn check_passes_for_the_transition_family() {
    let out = vofem()
        .args(["check", "--alpha0", "0.6", "--alpha1", "0.4"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.matches("PASS").count(), 4, "{text}");
    assert!(text.contains("overall: PASS"));
}

#[test]
fn invalid_order_is_a_config_error() {
    let out = vofem()
        .args(["check", "--alpha0", "1.5"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("alpha0"), "{err}");
}

#[test]
fn zero_problem_reports_zero_error_and_writes_fields() {
    let dir = std::env::temp_dir().join("vofem-cli-zero");
    std::fs::create_dir_all(&dir).unwrap();
    let field = dir.join("field.txt");
    let binary = dir.join("field.bin");
    let out = vofem()
        .args([
            "solve",
            "--problem",
            "zero",
            "--dim",
            "1",
            "--cells",
            "8",
            "--steps",
            "4",
            "--out",
            field.to_str().unwrap(),
            "--bin",
            binary.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("sup error = 0.00000e0"), "{text}");

    let field_text = std::fs::read_to_string(&field).unwrap();
    assert_eq!(field_text.lines().count(), 9); // lattice vertices
    for line in field_text.lines() {
        let cols: Vec<&str> = line.split_whitespace().collect();
        assert_eq!(cols.len(), 2);
        assert_eq!(cols[1].parse::<f64>().unwrap(), 0.0);
    }

    let raw = std::fs::read(&binary).unwrap();
    assert_eq!(&raw[..4], b"VOFM");
    let dim = u64::from_le_bytes(raw[4..12].try_into().unwrap());
    let cells = u64::from_le_bytes(raw[12..20].try_into().unwrap());
    assert_eq!((dim, cells), (1, 8));
    assert_eq!(raw.len(), 20 + 9 * 8);
}

#[test]
fn manufactured_solve_reports_errors() {
    let out = vofem()
        .args([
            "solve", "--dim", "1", "--cells", "64", "--steps", "8", "--alpha0", "0.6",
            "--alpha1", "0.4", "--grading", "auto",
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("grading r = 3.33333e0"), "{text}");
    assert!(text.contains("sup error = "), "{text}");
    assert!(text.contains("final error = "), "{text}");
}

#[test]
fn convergence_tables_are_byte_identical_across_runs() {
    let run = |path: &Path| {
        let out = vofem()
            .args([
                "convergence",
                "--dim",
                "1",
                "--cells",
                "128",
                "--sweep",
                "temporal",
                "--steps-list",
                "4,8,16",
                "--alpha0",
                "0.6",
                "--alpha1",
                "0.4",
                "--csv",
                path.to_str().unwrap(),
            ])
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        std::fs::read(path).unwrap()
    };
    let dir = std::env::temp_dir().join("vofem-cli-csv");
    std::fs::create_dir_all(&dir).unwrap();
    let a = run(&dir.join("a.csv"));
    let b = run(&dir.join("b.csv"));
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("# axis=Temporal d=1 alpha0=6.00000e-1"), "{text}");
    assert_eq!(text.lines().count(), 3 + 3); // 2 header comments + column row + 3 rows
}

#[test]
fn convergence_reproduces_the_graded_reference_column() {
    // Full 3D study through the binary: four rows, rate column near
    // (-, 0.92, 0.97, 0.98).
    let dir = std::env::temp_dir().join("vofem-cli-3d");
    std::fs::create_dir_all(&dir).unwrap();
    let csv_path = dir.join("graded.csv");
    let out = vofem()
        .args([
            "convergence",
            "--dim",
            "3",
            "--cells",
            "32",
            "--sweep",
            "temporal",
            "--steps-list",
            "8,16,32,64",
            "--alpha0",
            "0.6",
            "--alpha1",
            "0.4",
            "--grading",
            "auto",
            "--csv",
            csv_path.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv_path).unwrap();
    let rows: Vec<&str> = text.lines().skip(3).collect();
    assert_eq!(rows.len(), 4, "{text}");
    let rates: Vec<f64> = rows
        .iter()
        .skip(1)
        .map(|line| line.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    for (got, want) in rates.iter().zip([0.92, 0.97, 0.98]) {
        assert!(
            (got - want).abs() <= 0.1,
            "rate {got} expected near {want}; table:\n{text}"
        );
    }
}

#[test]
fn json_plan_documents_drive_sweeps() {
    let dir = std::env::temp_dir().join("vofem-cli-plan");
    std::fs::create_dir_all(&dir).unwrap();
    let plan = dir.join("plan.json");
    std::fs::write(
        &plan,
        r#"{"axis":"temporal","points":[
            {"steps":4,"cells":64,"grading":3.3333333333333335},
            {"steps":8,"cells":64},
            {"steps":16,"cells":64}
        ]}"#,
    )
    .unwrap();
    let json_out = dir.join("table.json");
    let out = vofem()
        .args([
            "convergence",
            "--dim",
            "1",
            "--alpha0",
            "0.6",
            "--plan",
            plan.to_str().unwrap(),
            "--json",
            json_out.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&json_out).unwrap()).unwrap();
    assert_eq!(doc["rows"].as_array().unwrap().len(), 3);
    assert_eq!(doc["rows"][1]["steps"], 8);
    assert!(doc["rows"][1]["rate"].as_f64().is_some());
}

#[test]
fn thread_count_does_not_change_results() {
    // Per-element accumulation order is fixed, so worker count must not
    // perturb a single bit of the emitted table.
    let dir = std::env::temp_dir().join("vofem-cli-threads");
    std::fs::create_dir_all(&dir).unwrap();
    let run = |threads: &str, path: &Path| {
        let out = vofem()
            .env("VOFEM_THREADS", threads)
            .args([
                "convergence",
                "--dim",
                "1",
                "--cells",
                "128",
                "--sweep",
                "temporal",
                "--steps-list",
                "4,8,16",
                "--alpha0",
                "0.6",
                "--alpha1",
                "0.4",
                "--csv",
                path.to_str().unwrap(),
            ])
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        std::fs::read(path).unwrap()
    };
    let single = run("1", &dir.join("t1.csv"));
    let multi = run("4", &dir.join("t4.csv"));
    assert_eq!(single, multi);
}

#[test]
fn config_files_round_trip_through_the_binary() {
    let dir = std::env::temp_dir().join("vofem-cli-config");
    std::fs::create_dir_all(&dir).unwrap();
    let config = dir.join("run.conf");
    std::fs::write(
        &config,
        "mode = check\nalpha0 = 0.6\nalpha1 = 0.4\nsamples = 32\n",
    )
    .unwrap();
    let out = vofem()
        .args(["--config", config.to_str().unwrap(), "check"])
        .output()
        .unwrap();
    assert!(out.status.success());
}

#[test]
fn unknown_config_keys_fail_with_code_2() {
    let dir = std::env::temp_dir().join("vofem-cli-badconfig");
    std::fs::create_dir_all(&dir).unwrap();
    let config = dir.join("bad.conf");
    std::fs::write(&config, "definitely_not_a_key = 1\n").unwrap();
    let out = vofem()
        .args(["--config", config.to_str().unwrap(), "check"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
