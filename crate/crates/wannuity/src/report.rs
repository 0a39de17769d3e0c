//! CSV output with a leading metadata comment line.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::config::ModelConfig;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// `# wannuity <version> config_sha256=<hash> abs_tol=.. rel_tol=.. [extra]`
pub fn metadata_line(cfg: &ModelConfig, extra: &[(&str, String)]) -> String {
    let mut line = format!(
        "# wannuity {TOOL_VERSION} config_sha256={} abs_tol={:e} rel_tol={:e}",
        cfg.sha256(),
        cfg.quadrature.abs_tol,
        cfg.quadrature.rel_tol
    );
    for (k, v) in extra {
        line.push_str(&format!(" {k}={v}"));
    }
    line
}

/// Serializes `rows` (header taken from the field names) below the metadata line.
pub fn csv_string<R: Serialize>(meta: &str, rows: &[R]) -> csv::Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let body = String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("csv output is utf-8");
    Ok(format!("{meta}\n{body}"))
}

/// Writes to `out`, or to stdout when no path is given.
pub fn emit(text: &str, out: Option<&Path>) -> std::io::Result<()> {
    match out {
        Some(p) => std::fs::write(p, text),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::reference;

    #[derive(Serialize)]
    struct Row {
        z: f64,
        cdf: f64,
    }

    #[test]
    fn csv_has_metadata_and_header() {
        let cfg = reference();
        let meta = metadata_line(&cfg, &[("paths", "10".to_string())]);
        let s = csv_string(&meta, &[Row { z: 0.5, cdf: 0.25 }]).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert!(lines[0].starts_with("# wannuity "));
        assert!(lines[0].contains(&cfg.sha256()));
        assert!(lines[0].ends_with("paths=10"));
        assert_eq!(lines[1], "z,cdf");
        assert_eq!(lines[2], "0.5,0.25");
    }
}
