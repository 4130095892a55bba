//! Suite manifests: several experiment configs run concurrently, summarized in one table.
//!
//! ```toml
//! workers = 4
//! [[run]]
//! name = "wedge"
//! [run.config]
//! kind = "spectrum"
//! spectrum = { cone = "cone:circle:theta=3.141592653589793", modes = 8 }
//! ```

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ConfigError, ExperimentConfig};
use crate::experiments;
use crate::report::{self, Stopwatch};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    /// Pool size when `--workers` is not given.
    #[serde(default)]
    workers: Option<usize>,
    #[serde(default)]
    run: Vec<Member>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Member {
    name: String,
    config: ExperimentConfig,
}

#[derive(Serialize)]
struct MemberSummary {
    name: String,
    kind: &'static str,
    passed: bool,
    verdicts: usize,
    failed: Vec<String>,
    report: Option<String>,
    error: Option<String>,
}

fn parse_manifest(path: &Path) -> Result<Manifest, ConfigError> {
    let text = fs::read_to_string(path)
        .map_err(|e| ConfigError::new("--config", format!("cannot read {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| {
        let field = e
            .message()
            .strip_prefix("unknown field `")
            .and_then(|r| r.split('`').next())
            .unwrap_or("manifest")
            .to_string();
        ConfigError::new(field, e.message().to_string())
    })
}

fn member_dir_name(name: &str) -> bool {
    !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

type Members = Vec<(String, ExperimentConfig)>;

/// Resolves every member before anything runs, so one bad entry stops the whole suite.
fn validate(manifest: Manifest, seed: Option<u64>) -> Result<(Option<usize>, Members), ConfigError> {
    let mut members = Vec::with_capacity(manifest.run.len());
    for (i, m) in manifest.run.into_iter().enumerate() {
        if !member_dir_name(&m.name) {
            return Err(ConfigError::new(format!("run[{i}].name"), "use letters, digits, '-' or '_'"));
        }
        if members.iter().any(|(n, _): &(String, _)| *n == m.name) {
            return Err(ConfigError::new(format!("run[{i}].name"), format!("duplicate member `{}`", m.name)));
        }
        let mut cfg = m.config;
        if let Some(s) = seed {
            cfg.seed = s;
        }
        let cfg = cfg
            .resolve(None)
            .map_err(|e| ConfigError::new(format!("{}.{}", m.name, e.field), e.message))?;
        members.push((m.name, cfg));
    }
    Ok((manifest.workers, members))
}

fn run_member(name: &str, cfg: &ExperimentConfig, root: &Path) -> MemberSummary {
    let mut clock = Stopwatch::start();
    let dir = root.join(name);
    let mut summary = MemberSummary {
        name: name.to_string(),
        kind: cfg.kind().name(),
        passed: false,
        verdicts: 0,
        failed: Vec::new(),
        report: None,
        error: None,
    };
    match experiments::run(cfg, &mut clock) {
        Ok(outcome) => {
            summary.verdicts = outcome.verdicts.len();
            summary.failed = outcome.verdicts.iter().filter(|v| !v.pass).map(|v| v.name.clone()).collect();
            match report::write_run(&dir, cfg, &outcome, &clock) {
                Ok((path, passed)) => {
                    summary.passed = passed;
                    summary.report = path.strip_prefix(root).ok().map(|p| p.display().to_string());
                }
                Err(e) => summary.error = Some(format!("{e:#}")),
            }
        }
        Err(e) => summary.error = Some(format!("{}: {}", e.kind(), e.message())),
    }
    summary
}

fn write_summary(root: &Path, rows: &[MemberSummary]) -> anyhow::Result<()> {
    fs::create_dir_all(root)?;
    let passed = rows.iter().all(|r| r.passed);
    let body = serde_json::json!({
        "schema_version": report::SCHEMA_VERSION,
        "tool_version": env!("CARGO_PKG_VERSION"),
        "passed": passed,
        "members": rows,
    });
    fs::write(root.join("suite.json"), serde_json::to_string_pretty(&body)? + "\n")?;
    let mut w = csv::Writer::from_path(root.join("suite.csv"))?;
    w.write_record(["name", "kind", "status", "verdicts", "failed"])?;
    for r in rows {
        let status = if r.passed { "pass" } else if r.error.is_some() { "error" } else { "fail" };
        w.write_record([r.name.as_str(), r.kind, status, &r.verdicts.to_string(), &r.failed.join(";")])?;
    }
    w.flush()?;
    Ok(())
}

pub fn run_suite(manifest: Option<&Path>, out: Option<&Path>, seed: Option<u64>, workers: Option<usize>) -> ExitCode {
    let fail = |e: ConfigError| {
        eprintln!("{}", serde_json::json!({ "error": "config", "field": e.field, "message": e.message }));
        ExitCode::from(2)
    };
    let Some(path) = manifest else {
        return fail(ConfigError::new("--config", "suite needs a manifest"));
    };
    let (manifest_workers, members) = match parse_manifest(path).and_then(|m| validate(m, seed)) {
        Ok(v) => v,
        Err(e) => return fail(e),
    };
    let root = out.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("lab-out"));
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(k) = workers.or(manifest_workers) {
        builder = builder.num_threads(k.max(1));
    }
    let pool = match builder.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("{}", serde_json::json!({ "error": "runtime", "message": e.to_string() }));
            return ExitCode::from(1);
        }
    };
    let rows: Vec<MemberSummary> =
        pool.install(|| members.par_iter().map(|(name, cfg)| run_member(name, cfg, &root)).collect());

    println!("{:<24} {:<16} {:<6} {:>8}  failed", "member", "kind", "status", "verdicts");
    for r in &rows {
        let status = if r.passed { "pass" } else if r.error.is_some() { "error" } else { "FAIL" };
        let detail = r.error.clone().unwrap_or_else(|| r.failed.join(", "));
        println!("{:<24} {:<16} {:<6} {:>8}  {detail}", r.name, r.kind, status, r.verdicts);
    }
    if let Err(e) = write_summary(&root, &rows) {
        eprintln!("{}", serde_json::json!({ "error": "io", "message": format!("{e:#}") }));
        return ExitCode::from(1);
    }
    let failed: Vec<&str> = rows.iter().filter(|r| !r.passed).map(|r| r.name.as_str()).collect();
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        eprintln!("{}", serde_json::json!({ "error": "assertion", "members": failed }));
        ExitCode::from(1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn manifest(text: &str) -> Manifest {
        toml::from_str(text).unwrap()
    }

    #[test]
    fn members_are_validated_before_running() {
        let m = manifest("[[run]]\nname = \"a\"\n[run.config]\nkind = \"cutoff\"\ncutoff = { tol = -1.0 }\n");
        let e = validate(m, None).unwrap_err();
        assert!(e.field.starts_with("a."), "{}", e.field);
    }

    #[test]
    fn duplicate_names_are_rejected() {
        let m = manifest(
            "[[run]]\nname = \"a\"\nconfig = { kind = \"spectrum\" }\n[[run]]\nname = \"a\"\nconfig = { kind = \"cutoff\" }\n",
        );
        assert!(validate(m, None).is_err());
    }

    #[test]
    fn seed_flag_overrides_members() {
        let m = manifest("[[run]]\nname = \"a\"\nconfig = { kind = \"spectrum\", seed = 5 }\n");
        let (_, members) = validate(m, Some(9)).unwrap();
        assert_eq!(members[0].1.seed, 9);
    }
}
