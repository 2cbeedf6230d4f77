use anyhow::{bail, Result};
use clap::Args;
use freqatt::attention::Variant;
use freqatt::gradcheck::{run_suite, CheckTarget, TOLERANCE};

use super::ensure_dir;
use crate::manifest::Manifest;
use crate::{Common, Outcome};

#[derive(Args, Debug)]
pub struct GradcheckArgs {
    /// A variant (se, fwse, tfwse+se, fdy, ...), an op (conv2d, linear, relu,
    /// sigmoid, softmax, avgpool), or `all`.
    #[arg(long, default_value = "all")]
    variant: String,
    #[arg(long, default_value_t = 20)]
    instances: usize,
    /// Basis count for FDY checks.
    #[arg(long)]
    basis: Option<usize>,
}

fn targets(name: &str) -> Result<Vec<CheckTarget>> {
    if name.eq_ignore_ascii_case("all") {
        return Ok(CheckTarget::OPS.iter().chain(&CheckTarget::ATTENTION).copied().collect());
    }
    if let Ok(t) = name.parse::<CheckTarget>() {
        return Ok(vec![t]);
    }
    match name.parse::<Variant>() {
        Ok(v) => Ok(CheckTarget::for_variant(v)),
        Err(_) => bail!("unknown gradient-check target {name:?}"),
    }
}

pub fn run(common: &Common, args: GradcheckArgs) -> Result<Outcome> {
    if args.instances == 0 {
        bail!("--instances must be positive");
    }
    let mut list = targets(&args.variant)?;
    if let Some(k) = args.basis {
        for t in &mut list {
            if let CheckTarget::Fdy { basis } = t {
                *basis = k;
            }
        }
    }
    let mut text = String::new();
    let mut ok = true;
    for t in list {
        let report = run_suite(t, common.seed, args.instances)?;
        let passed = report.passed(TOLERANCE);
        ok &= passed;
        text.push_str(&format!(
            "target={} instances={} max_rel_error={:.3e} status={}\n",
            report.target,
            report.instance_errors.len(),
            report.max_error(),
            if passed { "pass" } else { "FAIL" }
        ));
        for (name, err) in &report.tensor_errors {
            text.push_str(&format!("  tensor.{name}={err:.3e}\n"));
        }
    }
    text.push_str(&format!("tolerance={TOLERANCE:e}\ngradcheck={}\n", if ok { "pass" } else { "FAIL" }));
    print!("{text}");
    if let Some(dir) = &common.out {
        ensure_dir(dir)?;
        std::fs::write(dir.join("gradcheck.txt"), &text)?;
        let mut m = Manifest::new("gradcheck", None, common.seed);
        m.field("target", &args.variant).field("instances", args.instances);
        m.output(dir.join("gradcheck.txt"));
        m.write(dir)?;
    }
    Ok(if ok { Outcome::Ok } else { Outcome::ChecksFailed })
}
