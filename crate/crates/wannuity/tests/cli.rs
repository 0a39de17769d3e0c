use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const REFERENCE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/reference.json");

fn wannuity(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wannuity")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// Reference configuration with one top-level field replaced.
fn variant(dir: &TempDir, key: &str, value: serde_json::Value) -> String {
    let mut cfg: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(REFERENCE).unwrap()).unwrap();
    cfg[key] = value;
    let path = dir.path().join(format!("{key}.json"));
    std::fs::write(&path, serde_json::to_string(&cfg).unwrap()).unwrap();
    path.to_str().unwrap().to_string()
}

fn json_field(o: &Output, key: &str) -> f64 {
    let v: serde_json::Value = serde_json::from_str(&stdout(o)).unwrap();
    v[key].as_f64().unwrap()
}

#[test]
fn bond_at_its_own_maturity_is_one() {
    let o = wannuity(&["price-bond", "--config", REFERENCE, "--maturity", "0"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(json_field(&o, "value"), 1.0);
}

#[test]
fn spot_annuity_is_below_payment_count() {
    let o = wannuity(&["price-annuity", "--config", REFERENCE]);
    assert_eq!(o.status.code(), Some(0));
    let a = json_field(&o, "value");
    assert!(a > 4.0 && a < 5.0, "{a}");
}

#[test]
fn price_gao_reports_method_and_value() {
    let o = wannuity(&["price-gao", "--config", REFERENCE, "--method", "gamma"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["method"], "gamma");
    assert!(v["value"].as_f64().unwrap() > 0.0);
}

#[test]
fn invalid_parameter_exits_with_config_code() {
    let dir = TempDir::new().unwrap();
    let cfg = variant(&dir, "beta", 2.0.into());
    let o = wannuity(&["price-gao", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("beta"));
}

#[test]
fn unknown_key_exits_with_config_code() {
    let dir = TempDir::new().unwrap();
    let cfg = variant(&dir, "gamma", 1.0.into());
    let o = wannuity(&["price-bond", "--config", &cfg, "--maturity", "1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unknown_flag_exits_with_config_code() {
    let o = wannuity(&["price-bond", "--config", REFERENCE, "--maturity", "1", "--bogus"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn damping_outside_domain_exits_with_numerical_code() {
    let dir = TempDir::new().unwrap();
    let cfg = variant(&dir, "z_i", (-50.0).into());
    // the put leg of the parity check needs |z_i| below a finite bound
    let o = wannuity(&["validate", "--config", &cfg, "--paths", "2000"]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn dist_csv_has_metadata_header_and_monotone_cdf() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("dist.csv");
    let o = wannuity(&[
        "dist",
        "intensity",
        "--config",
        REFERENCE,
        "--grid",
        "0.001:0.08:25",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("# wannuity ") && lines[0].contains("config_sha256="));
    assert_eq!(lines[1], "z,cdf,pdf");
    let cdf: Vec<f64> = lines[2..27].iter().map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert!(cdf.windows(2).all(|w| w[1] >= w[0] - 1e-10));
    assert!(lines[27].starts_with("mean,") && lines[28].starts_with("variance,"));
}

#[test]
fn csv_metadata_hash_matches_canonical_form() {
    use sha2::{Digest, Sha256};
    let canon = wannuity(&["canonical", "--config", REFERENCE]);
    assert_eq!(canon.status.code(), Some(0));
    let hash = format!("{:x}", Sha256::digest(stdout(&canon).as_bytes()));
    let o = wannuity(&["independence", "--config", REFERENCE, "--g-grid", "0.22:0.23:2"]);
    let text = stdout(&o);
    assert!(text.lines().next().unwrap().contains(&format!("config_sha256={hash}")));
}

#[test]
fn canonical_output_is_a_fixed_point() {
    let dir = TempDir::new().unwrap();
    let first = stdout(&wannuity(&["canonical", "--config", REFERENCE]));
    assert_eq!(first, std::fs::read_to_string(REFERENCE).unwrap());
    let path = dir.path().join("c.json");
    std::fs::write(&path, &first).unwrap();
    let second = stdout(&wannuity(&["canonical", "--config", path.to_str().unwrap()]));
    assert_eq!(first, second);
}

#[test]
fn schema_lists_every_config_field() {
    let schema: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/model-config.schema.json")).unwrap(),
    )
    .unwrap();
    let cfg: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(REFERENCE).unwrap()).unwrap();
    let props = schema["properties"].as_object().unwrap();
    for (k, v) in cfg.as_object().unwrap() {
        assert!(props.contains_key(k), "schema misses {k}");
        if let Some(inner) = v.as_object() {
            let sub = props[k]["properties"].as_object().unwrap();
            for key in inner.keys() {
                assert!(sub.contains_key(key), "schema misses {k}.{key}");
            }
        }
    }
    assert_eq!(schema["properties"]["version"]["const"], 1);
}
