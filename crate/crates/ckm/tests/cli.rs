//! End-to-end checks of the command-line binary and the bundled data files.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ckm::io::read_sample_csv;
use ckm::simulation::generate_draw;
use ckm::survival::kaplan_meier;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ckm"))
}

fn repo_file(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn temp_file(name: &str, contents: &str) -> PathBuf {
    let path = std::env::temp_dir().join(format!("ckm-cli-{}-{name}", std::process::id()));
    std::fs::write(&path, contents).unwrap();
    path
}

fn stdout_of(output: &Output) -> String {
    assert!(
        output.status.success(),
        "command failed: {}\n{}",
        output.status,
        String::from_utf8_lossy(&output.stderr)
    );
    String::from_utf8(output.stdout.clone()).unwrap()
}

/// Data lines of a CSV output: everything past the manifest and header.
fn data_lines(csv: &str) -> Vec<Vec<String>> {
    csv.lines()
        .skip(2)
        .map(|line| line.split(',').map(str::to_string).collect())
        .collect()
}

fn header_of(csv: &str) -> &str {
    csv.lines().nth(1).unwrap()
}

#[test]
fn bundled_example_data_matches_the_generator() {
    let draw = generate_draw(40, 7).unwrap();
    let tmp = std::env::temp_dir().join(format!("ckm-gen-{}.csv", std::process::id()));
    ckm::io::write_sample_csv(&tmp, &draw.sample).unwrap();
    let expected_sample = std::fs::read_to_string(&tmp).unwrap();
    std::fs::remove_file(&tmp).ok();
    let mut expected_xstar = String::from("x1,x2\n");
    for row in draw.xstar.rows() {
        expected_xstar.push_str(&format!("{},{}\n", row[0], row[1]));
    }
    let sample_path = repo_file("data/sample.csv");
    let xstar_path = repo_file("data/xstar.csv");
    // CKM_REGEN_DATA=1 rewrites the bundled files from the generator
    if std::env::var_os("CKM_REGEN_DATA").is_some() {
        std::fs::write(&sample_path, &expected_sample).unwrap();
        std::fs::write(&xstar_path, &expected_xstar).unwrap();
    }
    assert_eq!(
        std::fs::read_to_string(&sample_path).unwrap(),
        expected_sample,
        "data/sample.csv is not the generator output for n = 40, seed 7"
    );
    assert_eq!(
        std::fs::read_to_string(&xstar_path).unwrap(),
        expected_xstar,
        "data/xstar.csv is not the generator output for n = 40, seed 7"
    );
}

#[test]
fn estimate_km_matches_the_library_curve() {
    let sample_path = repo_file("data/sample.csv");
    let output = bin()
        .args(["estimate", "--input"])
        .arg(&sample_path)
        .args(["--grid", "1:9:0.5", "--timestamp", "0"])
        .output()
        .unwrap();
    let text = stdout_of(&output);
    assert!(text.starts_with("# manifest {"));
    assert_eq!(header_of(&text), "t,f,f_lo,f_hi,estimator");
    let sample = read_sample_csv(&sample_path).unwrap();
    let curve = kaplan_meier(&sample);
    let rows = data_lines(&text);
    assert_eq!(rows.len(), 17);
    for row in &rows {
        let t: f64 = row[0].parse().unwrap();
        let f: f64 = row[1].parse().unwrap();
        assert_eq!(f.to_bits(), curve.eval(t).to_bits(), "t = {t}");
        assert_eq!(row[4], "km");
    }
    // bands behind the guard quantile are finite and ordered
    let first = &rows[0];
    let (f, lo, hi): (f64, f64, f64) = (
        first[1].parse().unwrap(),
        first[2].parse().unwrap(),
        first[3].parse().unwrap(),
    );
    assert!(lo <= f && f <= hi);
}

#[test]
fn estimate_beyond_the_guard_blanks_the_bands() {
    let output = bin()
        .args(["estimate", "--input"])
        .arg(repo_file("data/sample.csv"))
        .args(["--grid", "1:9:0.5", "--guard", "0.5", "--timestamp", "0"])
        .output()
        .unwrap();
    let text = stdout_of(&output);
    let rows = data_lines(&text);
    let last = &rows[rows.len() - 1];
    assert_eq!(last[2], "NaN");
    assert_eq!(last[3], "NaN");
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("inference guard"), "{stderr}");
}

#[test]
fn estimate_counterfactual_bands_come_from_paired_rows() {
    let output = bin()
        .args(["estimate", "--estimator", "counterfactual", "--input"])
        .arg(repo_file("data/sample.csv"))
        .arg("--counterfactual")
        .arg(repo_file("data/xstar.csv"))
        .args(["--grid", "2:6:0.5", "--timestamp", "0"])
        .output()
        .unwrap();
    let text = stdout_of(&output);
    assert_eq!(header_of(&text), "t,f,f_lo,f_hi,estimator");

    // an unpaired scenario still estimates, but the bands disappear
    let unpaired = temp_file("unpaired.csv", "x1,x2\n0.4,0.6\n0.5,0.5\n0.6,0.4\n");
    let output = bin()
        .args(["estimate", "--estimator", "counterfactual", "--input"])
        .arg(repo_file("data/sample.csv"))
        .arg("--counterfactual")
        .arg(&unpaired)
        .args(["--grid", "2:6:0.5", "--timestamp", "0"])
        .output()
        .unwrap();
    let text = stdout_of(&output);
    assert_eq!(header_of(&text), "t,f,estimator");
    assert!(String::from_utf8_lossy(&output.stderr).contains("bands omitted"));
    std::fs::remove_file(&unpaired).ok();
}

#[test]
fn rothe_estimate_has_no_bands() {
    let output = bin()
        .args(["estimate", "--estimator", "rothe", "--input"])
        .arg(repo_file("data/sample.csv"))
        .arg("--counterfactual")
        .arg(repo_file("data/xstar.csv"))
        .args(["--grid", "2:6:0.5", "--timestamp", "0"])
        .output()
        .unwrap();
    let text = stdout_of(&output);
    assert_eq!(header_of(&text), "t,f,estimator");
}

#[test]
fn effect_emits_the_documented_columns() {
    let output = bin()
        .args(["effect", "--input"])
        .arg(repo_file("data/sample.csv"))
        .arg("--counterfactual")
        .arg(repo_file("data/xstar.csv"))
        .args(["--grid", "2:6:0.5", "--xstar-mapped", "--timestamp", "0"])
        .output()
        .unwrap();
    let text = stdout_of(&output);
    assert_eq!(
        header_of(&text),
        "t,f_star,f_base,delta_f,delta_f_lo,delta_f_hi,\
         lambda_star,lambda_base,delta_lambda,delta_lambda_lo,delta_lambda_hi"
    );
    let rows = data_lines(&text);
    assert_eq!(rows.len(), 9);
    for row in &rows {
        let f_star: f64 = row[1].parse().unwrap();
        let f_base: f64 = row[2].parse().unwrap();
        let delta_f: f64 = row[3].parse().unwrap();
        assert!((delta_f - (f_star - f_base)).abs() < 1e-15);
    }
}

#[test]
fn effect_json_mirrors_csv_columns() {
    let common = |format: &str| {
        let output = bin()
            .args(["effect", "--input"])
            .arg(repo_file("data/sample.csv"))
            .arg("--counterfactual")
            .arg(repo_file("data/xstar.csv"))
            .args(["--grid", "2:6:1", "--timestamp", "0", "--format", format])
            .output()
            .unwrap();
        stdout_of(&output)
    };
    let csv = common("csv");
    let json = common("json");
    let doc: serde_json::Value = serde_json::from_str(&json).unwrap();
    let json_columns: Vec<&str> = doc["columns"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c.as_str().unwrap())
        .collect();
    assert_eq!(header_of(&csv), json_columns.join(","));
    let csv_rows = data_lines(&csv);
    let json_rows = doc["rows"].as_array().unwrap();
    assert_eq!(csv_rows.len(), json_rows.len());
    // spot-check one numeric cell round-trips identically
    let csv_cell: f64 = csv_rows[2][1].parse().unwrap();
    assert_eq!(json_rows[2][1].as_f64().unwrap().to_bits(), csv_cell.to_bits());
    assert_eq!(doc["manifest"]["command"], "effect");
}

#[test]
fn effect_truncates_or_fails_on_hazard_divergence() {
    // fully uncensored sample: the product-limit curve reaches one at the
    // largest duration, so a grid crossing it diverges on the neg-log scale
    let sample = temp_file(
        "diverge.csv",
        "y,delta,x1\n1,1,0.2\n2,1,0.4\n3,1,0.6\n4,1,0.8\n",
    );
    let xstar = temp_file("diverge-xstar.csv", "x1\n0.3\n0.5\n0.7\n0.9\n");
    let fail = bin()
        .args(["effect", "--input"])
        .arg(&sample)
        .arg("--counterfactual")
        .arg(&xstar)
        .args(["--grid", "1:6:1", "--timestamp", "0"])
        .output()
        .unwrap();
    assert_eq!(fail.status.code(), Some(6));
    let record: serde_json::Value =
        serde_json::from_str(String::from_utf8_lossy(&fail.stderr).lines().last().unwrap())
            .unwrap();
    assert_eq!(record["code"], 6);

    let truncated = bin()
        .args(["effect", "--input"])
        .arg(&sample)
        .arg("--counterfactual")
        .arg(&xstar)
        .args(["--grid", "1:6:1", "--truncate-on-divergence", "--timestamp", "0"])
        .output()
        .unwrap();
    let text = stdout_of(&truncated);
    assert!(data_lines(&text).len() < 6);
    assert!(String::from_utf8_lossy(&truncated.stderr).contains("truncated"));
    std::fs::remove_file(&sample).ok();
    std::fs::remove_file(&xstar).ok();
}

#[test]
fn simulate_is_deterministic_and_ordered() {
    let config = temp_file(
        "tiny.conf",
        "sizes = 60\ns = 3\nbase_seed = 4242\ngrid = 4.25:8.15:0.65\nstrict = false\nnodes = 60\n",
    );
    let run = || {
        let output = bin()
            .args(["simulate", "--config"])
            .arg(&config)
            .args(["--timestamp", "0"])
            .output()
            .unwrap();
        stdout_of(&output)
    };
    let first = run();
    let second = run();
    assert_eq!(first, second, "same manifest must give identical bytes");
    assert_eq!(
        header_of(&first),
        "target,n,estimator,miae,rmise,replications_used,replications_failed"
    );
    let rows = data_lines(&first);
    assert_eq!(rows.len(), 8);
    let order: Vec<(String, String)> = rows
        .iter()
        .map(|r| (r[0].clone(), r[2].clone()))
        .collect();
    let expected = [
        ("cdf", "km"),
        ("cdf", "counterfactual"),
        ("cdf", "oracle"),
        ("cdf", "rothe"),
        ("hazard", "km"),
        ("hazard", "counterfactual"),
        ("hazard", "oracle"),
        ("hazard", "rothe"),
    ];
    for (row, want) in order.iter().zip(expected) {
        assert_eq!((row.0.as_str(), row.1.as_str()), want);
    }

    // CLI overrides are applied: one size, fewer rows is not possible here,
    // but a different seed must change the numbers
    let reseeded = bin()
        .args(["simulate", "--config"])
        .arg(&config)
        .args(["--seed", "999", "--timestamp", "0"])
        .output()
        .unwrap();
    assert_ne!(stdout_of(&reseeded), first);
    std::fs::remove_file(&config).ok();
}

#[test]
fn exit_codes_separate_failure_classes() {
    // 9: unreadable input
    let output = bin()
        .args(["estimate", "--input", "/nonexistent.csv", "--grid", "1:2:1"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(9));

    // 3: broken schema
    let bad_header = temp_file("badheader.csv", "y,x1\n1,2\n");
    let output = bin()
        .args(["estimate", "--input"])
        .arg(&bad_header)
        .args(["--grid", "1:2:1"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(3));
    std::fs::remove_file(&bad_header).ok();

    // 4: invalid data values
    let bad_delta = temp_file("baddelta.csv", "y,delta,x1\n1,1,0.5\n2,2,0.5\n");
    let output = bin()
        .args(["estimate", "--input"])
        .arg(&bad_delta)
        .args(["--grid", "1:2:1"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(4));
    let record: serde_json::Value =
        serde_json::from_str(String::from_utf8_lossy(&output.stderr).lines().last().unwrap())
            .unwrap();
    assert!(record["error"].as_str().unwrap().contains("row 2"));
    std::fs::remove_file(&bad_delta).ok();

    // 2: usage problems the parser cannot catch
    let output = bin()
        .args(["estimate", "--input"])
        .arg(repo_file("data/sample.csv"))
        .args(["--grid", "1:2:1", "--estimator", "wat"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let output = bin()
        .args(["estimate", "--input"])
        .arg(repo_file("data/sample.csv"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2), "missing grid source");

    // 8: numeric validation
    let output = bin()
        .args(["estimate", "--input"])
        .arg(repo_file("data/sample.csv"))
        .args(["--grid", "2:1:0.5"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(8));
    let output = bin()
        .args(["estimate", "--input"])
        .arg(repo_file("data/sample.csv"))
        .args(["--grid", "1:2:1", "--alpha", "1.5"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(8));

    // 5: empty kernel neighborhood, fail policy
    let far = temp_file("far.csv", "x1,x2\n50,50\n");
    let output = bin()
        .args(["estimate", "--estimator", "counterfactual", "--input"])
        .arg(repo_file("data/sample.csv"))
        .arg("--counterfactual")
        .arg(&far)
        .args(["--grid", "2:6:1", "--bandwidth", "0.5"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(5));
    let record: serde_json::Value =
        serde_json::from_str(String::from_utf8_lossy(&output.stderr).lines().last().unwrap())
            .unwrap();
    assert!(record["error"].as_str().unwrap().contains("row 0"));
    std::fs::remove_file(&far).ok();
}

#[test]
fn drop_policy_survives_one_empty_neighborhood() {
    // first scenario row far outside the sample support, second well inside
    let mixed = temp_file("mixed.csv", "x1,x2\n50,50\n0.5,0.5\n");
    let output = bin()
        .args(["estimate", "--estimator", "counterfactual", "--input"])
        .arg(repo_file("data/sample.csv"))
        .arg("--counterfactual")
        .arg(&mixed)
        .args(["--grid", "2:6:1", "--bandwidth", "0.5", "--on-empty", "drop", "--timestamp", "0"])
        .output()
        .unwrap();
    let text = stdout_of(&output);
    assert_eq!(data_lines(&text).len(), 5);
    assert!(String::from_utf8_lossy(&output.stderr).contains("dropped 1"));
    std::fs::remove_file(&mixed).ok();
}
