//! Closed-form parameter accounting.

use std::time::Duration;

use crate::attention::{self, FdyParams, ParamBreakdown, Variant};
use crate::error::Result;
use crate::ops::Conv2dSpec;

use super::config::{BlockActivation, ModelConfig};
use super::gru::BiGru;

#[derive(Clone, Debug, PartialEq)]
pub struct CostReport {
    pub variant: Variant,
    /// `(component, trainable scalars)` in a stable order.
    pub components: Vec<(&'static str, usize)>,
    pub attention: ParamBreakdown,
    pub total: usize,
    pub latency: Option<Duration>,
}

impl CostReport {
    pub fn component(&self, name: &str) -> Option<usize> {
        self.components.iter().find(|(n, _)| *n == name).map(|&(_, v)| v)
    }
}

/// Counts every trainable scalar of `config` without allocating weights.
pub fn param_audit(config: &ModelConfig) -> Result<CostReport> {
    config.validate()?;
    let mut conv = 0;
    for layer in 0..config.blocks() {
        let spec = Conv2dSpec::same(config.in_channels(layer), config.channels[layer], config.kernel);
        conv += if config.uses_fdy(layer) { FdyParams::<f64>::count(&spec, config.fdy_basis) } else { spec.param_count() };
    }
    let bn = 2 * config.channels.iter().sum::<usize>();
    let gate = match config.activation {
        BlockActivation::ContextGating => config.channels.iter().map(|c| c * c + c).sum(),
        BlockActivation::Relu => 0,
    };
    let points: Vec<(usize, usize)> = config.attach_points().iter().map(|p| (p.channels, p.freqs)).collect();
    let attention = attention::param_count(config.variant, &points, &config.attention)?;
    let gru = BiGru::<f64>::count(config.gru_input(), config.gru_hidden, config.gru_layers);
    let head = 2 * config.gru_hidden * config.n_classes + config.n_classes;
    let components = vec![
        ("conv", conv),
        ("batchnorm", bn),
        ("gating", gate),
        ("attention", attention.total),
        ("gru", gru),
        ("strong_head", head),
        ("weak_head", head),
    ];
    let total = components.iter().map(|(_, v)| v).sum();
    Ok(CostReport { variant: config.variant, components, attention, total, latency: None })
}

/// Audits every variant on top of `base` (its own variant is ignored).
pub fn audit_all(base: &ModelConfig) -> Result<Vec<CostReport>> {
    Variant::ALL
        .iter()
        .map(|&variant| param_audit(&ModelConfig { variant, ..base.clone() }))
        .collect()
}

/// Published parameter totals the default configuration is held to.
pub mod reference {
    pub const BASELINE_TOTAL: f64 = 4_428_000.0;
    pub const BASELINE_TOL: f64 = 0.05;
    pub const FDY_TOTAL: f64 = 11_061_000.0;
    pub const FDY_TOL: f64 = 0.03;
    pub const FDY_GROWTH: (f64, f64) = (1.40, 1.60);
    pub const SE_DELTA: usize = 109_056;
    pub const FWSE_DELTA: usize = 10_920;
    pub const SE_TFWSE_DELTA: usize = 119_976;
    pub const C2D_DELTA: (usize, usize) = (900, 1_500);
}

#[derive(Clone, Debug, PartialEq)]
pub struct AuditCheck {
    pub name: String,
    pub value: f64,
    pub expected: String,
    pub passed: bool,
}

/// Internal consistency for any config: each variant's delta equals its
/// attention count. With `reference_targets`, also the published totals and
/// deltas (meaningful only for the default widths).
pub fn audit_checks(reports: &[CostReport], reference_targets: bool) -> Vec<AuditCheck> {
    let base = reports.iter().find(|r| r.variant == Variant::Baseline).map(|r| r.total);
    let get = |v: Variant| reports.iter().find(|r| r.variant == v).map(|r| r.total);
    let mut out = Vec::new();
    let Some(base) = base else { return out };
    for r in reports.iter().filter(|r| !matches!(r.variant, Variant::Baseline | Variant::Fdy)) {
        let delta = r.total - base;
        out.push(AuditCheck {
            name: format!("delta_matches_attention.{}", r.variant),
            value: delta as f64,
            expected: format!("{}", r.attention.total),
            passed: delta == r.attention.total,
        });
    }
    if !reference_targets {
        return out;
    }
    let exact = |out: &mut Vec<AuditCheck>, name: &str, v: Variant, want: usize| {
        if let Some(t) = get(v) {
            let d = t - base;
            out.push(AuditCheck { name: name.into(), value: d as f64, expected: want.to_string(), passed: d == want });
        }
    };
    exact(&mut out, "delta.se", Variant::Se, reference::SE_DELTA);
    exact(&mut out, "delta.fwse", Variant::FwSe, reference::FWSE_DELTA);
    exact(&mut out, "delta.se+tfwse", Variant::SeThenTfwSe, reference::SE_TFWSE_DELTA);
    exact(&mut out, "delta.tfwse+se", Variant::TfwSeThenSe, reference::SE_TFWSE_DELTA);
    if let Some(t) = get(Variant::C2dAtt) {
        let d = t - base;
        let (lo, hi) = reference::C2D_DELTA;
        out.push(AuditCheck {
            name: "delta.c2datt".into(),
            value: d as f64,
            expected: format!("[{lo}, {hi}]"),
            passed: (lo..=hi).contains(&d),
        });
    }
    let rel = |v: f64, r: f64| (v - r) / r;
    out.push(AuditCheck {
        name: "total.baseline".into(),
        value: base as f64,
        expected: format!("{} ± {}%", reference::BASELINE_TOTAL, reference::BASELINE_TOL * 100.0),
        passed: rel(base as f64, reference::BASELINE_TOTAL).abs() <= reference::BASELINE_TOL,
    });
    if let Some(fdy) = get(Variant::Fdy) {
        out.push(AuditCheck {
            name: "total.fdy".into(),
            value: fdy as f64,
            expected: format!("{} ± {}%", reference::FDY_TOTAL, reference::FDY_TOL * 100.0),
            passed: rel(fdy as f64, reference::FDY_TOTAL).abs() <= reference::FDY_TOL,
        });
        let growth = fdy as f64 / base as f64 - 1.0;
        let (lo, hi) = reference::FDY_GROWTH;
        out.push(AuditCheck {
            name: "growth.fdy".into(),
            value: growth,
            expected: format!("[{lo}, {hi}]"),
            passed: (lo..=hi).contains(&growth),
        });
    }
    out
}
