use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const SMALL: &str = r#"
name = "small"
[geometry]
domain_km = 400.0
n = 40
zeta = 2
[background]
sigma2_b = 1.0
M_b = 4
D_b_km = 60.0
[observation]
sigma2_o = 1.0
M_o = 2
D_o_km = 40.0
[ensemble]
realizations = 16
tol = 1e-8
variants = [{ kind = "true_r" }, { kind = "diagonal" }, { kind = "inflated_diagonal", upsilon = 4.0 }]
"#;

fn varcond(sub: &str, config: Option<&str>, out: &Path, extra: &[&str]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_varcond"));
    cmd.arg(sub).arg("--out").arg(out).args(extra);
    if let Some(text) = config {
        let path = out.with_extension("toml");
        fs::write(&path, text).unwrap();
        cmd.arg("--config").arg(path);
    }
    cmd.output().unwrap()
}

fn listing(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = match fs::read_dir(dir) {
        Ok(rd) => rd.map(|e| e.unwrap().file_name().into_string().unwrap()).collect(),
        Err(_) => Vec::new(),
    };
    names.sort();
    names
}

fn json(path: PathBuf) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn csv_rows(path: PathBuf) -> Vec<Vec<String>> {
    fs::read_to_string(path).unwrap().lines().map(|l| l.split(',').map(String::from).collect()).collect()
}

fn ok(o: &Output) {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

fn error_record(o: &Output) -> serde_json::Value {
    let err = String::from_utf8(o.stderr.clone()).unwrap();
    assert_eq!(err.lines().count(), 1, "{err}");
    serde_json::from_str(err.trim()).unwrap()
}

#[test]
fn malformed_config_exits_one_without_files() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("run");
    for bad in ["[background]\nD_b = 60.0\n", "[geometry]\ndomain_km = 100.0\nn = 50\nzeta = 3\n", "seed = \"x\""] {
        let o = varcond("spectrum", Some(bad), &out, &[]);
        assert_eq!(o.status.code(), Some(1));
        let rec = error_record(&o);
        assert_eq!(rec["error"], "config");
        assert_eq!(rec["exit_code"], 1);
        assert!(listing(&out).is_empty());
    }
    let o = varcond("convergence", None, &out, &["--workers", "0"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(listing(&out).is_empty());
}

#[test]
fn spectrum_on_scenario_two() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let cfg = "[observation]\nsigma2_o = 1.0\nM_o = 10\nD_o_km = 120.0\n";
    let o = varcond("spectrum", Some(cfg), &out, &[]);
    ok(&o);
    assert_eq!(listing(&out), ["resolved_config.toml", "spectrum.csv", "spectrum.json"]);
    let r = json(out.join("spectrum.json"));
    let chi = r["chi"].as_f64().unwrap();
    assert!((3e3..=3e4).contains(&chi), "χ = {chi}");
    assert_eq!(r["ones_tail"], true);
    let rows = csv_rows(out.join("spectrum.csv"));
    assert_eq!(rows[0], ["index", "eigenvalue_s", "eigenvalue_so"]);
    assert_eq!(rows.len(), 501);
    // Reported paths go to stdout, one per file.
    assert_eq!(String::from_utf8(o.stdout).unwrap().lines().count(), 3);
}

#[test]
fn full_observation_network_has_no_unit_tail() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let cfg = "[geometry]\ndomain_km = 400.0\nn = 100\nzeta = 1\n";
    ok(&varcond("spectrum", Some(cfg), &out, &[]));
    let r = json(out.join("spectrum.json"));
    assert_eq!(r["ones_tail"], false);
    assert_eq!(r["eigenvalues_s"].as_array().unwrap().len(), 100);
}

#[test]
fn single_cell_chi_map() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let cfg = "[chi_map]\nM_o = [4]\nD_o_km = [90.0]\n";
    ok(&varcond("chi-map", Some(cfg), &out, &[]));
    let rect = csv_rows(out.join("chi_map_Mb8_Db60.csv"));
    assert_eq!(rect.len(), 2);
    assert!(rect.iter().all(|r| r.len() == 2));
    assert_eq!(rect[1][0], "4");
    let chi: f64 = rect[1][1].parse().unwrap();
    assert!(chi.is_finite() && chi > 0.0);
    let long = csv_rows(out.join("chi_map_Mb8_Db60_long.csv"));
    assert_eq!(long[0], ["M_o", "D_o_km", "chi", "log10_chi"]);
    assert_eq!(long.len(), 2);
    assert!(out.join("chi_map_minima.json").exists());
}

#[test]
fn lengthscale_table() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    ok(&varcond("lengthscales", None, &out, &[]));
    let rows = csv_rows(out.join("lengthscales.csv"));
    assert_eq!(rows[0][0], "M");
    assert_eq!(rows.len(), 6);
    let m10 = rows.iter().find(|r| r[0] == "10").unwrap();
    let (l, d): (f64, f64) = (m10[4].parse().unwrap(), m10[6].parse().unwrap());
    assert!((l - 18.3).abs() <= 0.1 && (d - 75.7).abs() <= 0.1, "{l} {d}");
}

#[test]
fn bounds_are_ordered() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let cfg = "[geometry]\ndomain_km = 800.0\nn = 200\nzeta = 2\n[bounds]\ncount = 12\n";
    ok(&varcond("bounds", Some(cfg), &out, &[]));
    let rows = csv_rows(out.join("bounds.csv"));
    assert_eq!(rows.len(), 13);
    for r in &rows[1..] {
        let v: Vec<f64> = r[2..7].iter().map(|c| c.parse().unwrap()).collect();
        let (kappa, naive, infnorm, eta) = (v[0], v[2], v[3], v[4]);
        let slack = 1.0 + 1e-9;
        assert!(naive * slack >= infnorm && infnorm * slack >= kappa && eta * slack >= kappa, "{r:?}");
    }
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    ok(&varcond("convergence", Some(SMALL), &a, &["--workers", "1", "--seed", "7"]));
    ok(&varcond("convergence", Some(SMALL), &b, &["--workers", "3", "--seed", "7"]));
    let names = listing(&a);
    assert_eq!(names, ["convergence.csv", "convergence.json", "resolved_config.toml"]);
    for n in names.iter().filter(|n| n.ends_with(".csv") || n.ends_with(".json")) {
        assert_eq!(fs::read(a.join(n)).unwrap(), fs::read(b.join(n)).unwrap(), "{n}");
    }
    let doc = json(a.join("convergence.json"));
    assert_eq!(doc["seed"], 7);
    assert_eq!(doc["variants"].as_array().unwrap().len(), 3);
    let header = &csv_rows(a.join("convergence.csv"))[0];
    assert_eq!(header, &["iter", "true_r", "diagonal", "inflated_4"]);
}

#[test]
fn realizations_flag_and_resolved_config() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("r");
    ok(&varcond("convergence", Some(SMALL), &out, &["--realizations", "5"]));
    let resolved = fs::read_to_string(out.join("resolved_config.toml")).unwrap();
    let back: toml::Value = toml::from_str(&resolved).unwrap();
    assert_eq!(back["ensemble"]["realizations"].as_integer(), Some(5));
    assert_eq!(json(out.join("convergence.json"))["realizations"], 5);
    // Nothing is written outside the output directory except the config we placed there.
    assert_eq!(listing(tmp.path()), ["r", "r.toml"]);
}

#[test]
fn numerical_failures_exit_two() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("x");
    let big = "[geometry]\ndomain_km = 2400.0\nn = 600\nzeta = 2\n[bounds]\ncount = 3\n";
    let o = varcond("bounds", Some(big), &out, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_record(&o)["error"], "size_guard");
    assert!(listing(&out).is_empty());

    let narrow = format!("{SMALL}\n[inflation]\nscan_ratio = 1.5\ntol = 0.25\nupper_limit = 1.2\n");
    let o = varcond("inflation", Some(&narrow), &out, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_record(&o)["error"], "search_range");
    assert!(listing(&out).is_empty());
}

#[test]
fn inflation_search_reports_optimum() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    ok(&varcond("inflation", Some(SMALL), &out, &[]));
    let doc = json(out.join("inflation.json"));
    let u = doc["upsilon_star"].as_f64().unwrap();
    assert!(u >= 1.0 / 1.5 && u <= 1e3);
    let rows = csv_rows(out.join("inflation.csv"));
    assert_eq!(rows[0], ["upsilon", "sigma_a_star"]);
    let us: Vec<f64> = rows[1..].iter().map(|r| r[0].parse().unwrap()).collect();
    assert!(us.windows(2).all(|w| w[0] <= w[1]));
}
