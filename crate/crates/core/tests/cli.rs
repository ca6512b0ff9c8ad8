use std::process::{Command, Output};

fn jacobi2(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jacobi2"))
        .args(args)
        .env_remove("JACOBI2_TRUNC")
        .env_remove("JACOBI2_SUITE")
        .env_remove("JACOBI2_GROUP")
        .env_remove("JACOBI2_FORMAT")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).unwrap()
}

#[test]
fn series_of_a2_theta() {
    let o = jacobi2(&["series", "theta_A2_deg1", "--trunc", "5", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let j = json(&o);
    assert_eq!(j["schema"], "jacobi2.series/1");
    assert_eq!(j["kind"], "scalar");
}

#[test]
fn series_table_reports_witt_flag() {
    let o = jacobi2(&["series", "level2.K6", "--trunc", "2"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).lines().next().unwrap().contains("W = 0: yes"));
}

#[test]
fn delta_starts_with_ramanujan_values() {
    let o = jacobi2(&["series", "delta", "--trunc", "3"]);
    assert_eq!(o.status.code(), Some(0));
    let coeffs: Vec<String> = stdout(&o).lines().skip(1).map(|l| l.split_whitespace().last().unwrap().to_string()).collect();
    assert_eq!(coeffs, ["1", "-24", "252"]);
}

#[test]
fn unknown_name_is_a_config_error() {
    let o = jacobi2(&["series", "level2.X3"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("candidates:"));
}

#[test]
fn truncation_above_ceiling_is_rejected() {
    assert_eq!(jacobi2(&["verify", "level4.*", "--trunc", "9"]).status.code(), Some(2));
    assert_eq!(jacobi2(&["series", "delta", "--trunc", "0"]).status.code(), Some(2));
}

#[test]
fn verify_level_four_passes() {
    let o = jacobi2(&["verify", "level4.g04.table.*", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let j = json(&o);
    assert_eq!(j["schema"], "jacobi2.report/1");
    assert_eq!(j["summary"]["fail"], 0);
    assert_eq!(j["results"].as_array().unwrap().len(), 12);
}

#[test]
fn verify_reports_printed_errata_as_failures() {
    let o = jacobi2(&["verify", "printed.level2.slash_Z4_M1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("first failure: printed.level2.slash_Z4_M1"));
}

#[test]
fn verify_list_and_empty_filter() {
    let o = jacobi2(&["verify", "negctrl.*", "--list"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().count(), 5);
    assert_eq!(jacobi2(&["verify", "nothing.matches"]).status.code(), Some(2));
}

#[test]
fn dims_table_and_json() {
    let o = jacobi2(&["dims", "gamma0_2", "JI", "6", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let j = json(&o);
    assert_eq!(j["schema"], "jacobi2.dims/1");
    let predicted: Vec<i64> = j["rows"].as_array().unwrap().iter().map(|r| r["predicted"].as_i64().unwrap()).collect();
    assert_eq!(predicted, [0, 1, 0, 3, 0, 6]);
    let o = jacobi2(&["dims", "gamma2", "AI", "0"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(jacobi2(&["dims", "gamma7", "AI", "4"]).status.code(), Some(2));
}
