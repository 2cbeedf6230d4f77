use anyhow::Result;
use clap::Args;
use freqatt::attention::Variant;
use freqatt::model::{audit_all, audit_checks, ModelConfig};

use super::{ensure_dir, load_config};
use crate::manifest::Manifest;
use crate::{Common, Outcome};

#[derive(Args, Debug)]
pub struct AuditArgs {}

pub fn run(common: &Common, _args: AuditArgs) -> Result<Outcome> {
    let cfg = load_config(common.config.as_deref())?;
    let reports = audit_all(&cfg)?;
    let base = reports.iter().find(|r| r.variant == Variant::Baseline).map_or(0, |r| r.total);
    let defaults = ModelConfig { variant: Variant::Baseline, ..cfg.clone() } == ModelConfig::default();
    let mut text = String::new();
    for r in &reports {
        let parts: Vec<String> = r.components.iter().map(|(k, v)| format!("{k}={v}")).collect();
        text.push_str(&format!(
            "variant={} total={} delta={} {}\n",
            r.variant,
            r.total,
            r.total as i64 - base as i64,
            parts.join(" ")
        ));
    }
    let checks = audit_checks(&reports, defaults);
    for c in &checks {
        text.push_str(&format!(
            "check.{}={} expected={} status={}\n",
            c.name,
            c.value,
            c.expected,
            if c.passed { "pass" } else { "FAIL" }
        ));
    }
    let ok = checks.iter().all(|c| c.passed);
    text.push_str(&format!("reference_targets={}\naudit={}\n", defaults, if ok { "pass" } else { "FAIL" }));
    print!("{text}");
    if let Some(dir) = &common.out {
        ensure_dir(dir)?;
        std::fs::write(dir.join("audit.txt"), &text)?;
        let mut m = Manifest::new("audit", common.config.as_deref(), common.seed);
        m.output(dir.join("audit.txt"));
        m.write(dir)?;
    }
    Ok(if ok { Outcome::Ok } else { Outcome::ChecksFailed })
}
