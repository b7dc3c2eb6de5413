use std::f64::consts::PI;
use std::fmt::Write as _;

use anyhow::{bail, Result};
use serde_json::json;

use tbsim::analysis::{correlation_e, fit_sinusoid_and_choose_phases, g2_between_windows_exact, CoincidenceTable, SweepCurve};
use tbsim::experiments::{
    bell_result, calibrated_bell_config, cross_correlations, reference_config, run_calibration,
    run_thermal_g2, sweep_curves, witness,
};
use tbsim::model::{load_config, ExperimentConfig, ExperimentKind};
use tbsim::protocol::{click_records_table, rate_budget as budget, run_experiment, ExperimentOutput, Window};
use tbsim::waveguide::curve_table;

use crate::manifest::RunDir;
use crate::oracle::{self, OracleScale};
use crate::{OracleArgs, RunArgs, SweepArgs};

/// Bad command-line input that clap cannot catch.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Debug)]
struct OracleFailure(Vec<String>);

impl std::fmt::Display for OracleFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "oracle checks failed: {}", self.0.join("; "))
    }
}

impl std::error::Error for OracleFailure {}

fn load(args: &RunArgs, extra: &[String]) -> Result<(ExperimentConfig, Vec<String>)> {
    let mut overrides = args.all_overrides();
    overrides.extend_from_slice(extra);
    let cfg = load_config(&args.config, &overrides)?;
    Ok((cfg, overrides))
}

fn start(args: &RunArgs, command: &str, cfg: &ExperimentConfig, overrides: &[String]) -> Result<RunDir> {
    let mut run = RunDir::create(&args.out, command)?;
    run.record_config(&args.config, overrides, cfg)?;
    Ok(run)
}

fn counts_table(out: &ExperimentOutput, idx: usize) -> Option<String> {
    let s = &out.settings[idx];
    let c = s.counts.as_ref()?;
    let mut t = format!("# trials {}\n# pattern\tcount\n", c.trials);
    for (p, &n) in c.counts.iter().enumerate() {
        if n > 0 {
            let _ = writeln!(t, "{}\t{n}", s.exact.pattern_label(p));
        }
    }
    Some(t)
}

/// Exact tables, sampled counts and click records of every setting.
fn write_setting_files(run: &mut RunDir, out: &ExperimentOutput, prefix: &str) -> Result<()> {
    for (i, s) in out.settings.iter().enumerate() {
        run.write(&format!("{prefix}exact_{}.tsv", s.label), s.exact.to_table(0.0).as_bytes())?;
        if let Some(t) = counts_table(out, i) {
            run.write(&format!("{prefix}counts_{}.tsv", s.label), t.as_bytes())?;
        }
        if let Some(r) = &s.records {
            run.write(&format!("{prefix}clicks_{}.tsv", s.label), click_records_table(r).as_bytes())?;
        }
    }
    Ok(())
}

fn sweep_table(curves: &[SweepCurve]) -> String {
    let mut t = String::from("# phi_r\tphi_w\tE\tsigma\n");
    for c in curves {
        for (i, (&w, &e)) in c.phi_w.iter().zip(&c.e).enumerate() {
            let _ = writeln!(t, "{:.12}\t{:.12}\t{:.9}\t{:.9}", c.phi_r, w, e, c.sigma.get(i).copied().unwrap_or(f64::NAN));
        }
    }
    t
}

pub fn simulate(args: &RunArgs) -> Result<()> {
    let (cfg, overrides) = load(args, &[])?;
    let mut run = start(args, "simulate", &cfg, &overrides)?;
    let summary = match cfg.kind {
        ExperimentKind::ThermalG2Tau => {
            let t = run_thermal_g2(&cfg)?;
            run.write("g2_tau.tsv", curve_table("delay_s\tg2", &t.delays, &t.g2).as_bytes())?;
            json!({
                "kind": cfg.kind.name(),
                "tau": t.tau,
                "packet_fwhm": t.packet_fwhm,
                "revival_height": t.revival_height,
                "g2_zero_single_mode": t.g2_zero_single_mode,
            })
        }
        ExperimentKind::DoubleCrossCorrelation => {
            let out = run_experiment(&cfg)?;
            write_setting_files(&mut run, &out, "")?;
            json!({ "kind": cfg.kind.name(), "trials": cfg.trials, "g2": cross_correlations(&out)? })
        }
        ExperimentKind::TimeBinEntanglement => {
            let out = run_experiment(&cfg)?;
            write_setting_files(&mut run, &out, "")?;
            run.write("sweep.tsv", sweep_table(&sweep_curves(&out)?).as_bytes())?;
            let reference = run_experiment(&reference_config(&cfg))?;
            write_setting_files(&mut run, &reference, "reference_")?;
            json!({ "kind": cfg.kind.name(), "trials": cfg.trials, "witness": witness(&out, &reference)? })
        }
        ExperimentKind::BellTest => {
            let out = run_experiment(&cfg)?;
            write_setting_files(&mut run, &out, "")?;
            let settings: Vec<_> = out.settings.iter().map(|s| json!({"label": s.label, "phi_w": s.phi_w, "phi_r": s.phi_r})).collect();
            json!({ "kind": cfg.kind.name(), "trials": cfg.trials, "settings": settings, "chsh": bell_result(&out)? })
        }
        ExperimentKind::Calibration => {
            let out = run_experiment(&cfg)?;
            write_setting_files(&mut run, &out, "")?;
            let curves = sweep_curves(&out)?;
            run.write("sweep.tsv", sweep_table(&curves).as_bytes())?;
            let fit = match curves.as_slice() {
                [a, b, ..] => Some(fit_sinusoid_and_choose_phases(a, b)?),
                _ => None,
            };
            json!({ "kind": cfg.kind.name(), "trials": cfg.trials, "calibration": fit })
        }
    };
    run.write_json("results.json", &summary)?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    run.finish()?;
    Ok(())
}

fn list_in_pi(values: &[f64]) -> String {
    let items: Vec<String> = values.iter().map(|v| format!("{v:?}")).collect();
    format!("[{}]", items.join(", "))
}

pub fn sweep(args: &SweepArgs) -> Result<()> {
    if let Some(phi_w) = &args.phi_w {
        if phi_w.is_empty() {
            bail!(UsageError("--phi-w needs at least one value".into()));
        }
        let phi_r = args.phi_r.clone().unwrap_or_else(|| vec![0.0]);
        if phi_r.is_empty() {
            bail!(UsageError("--phi-r needs at least one value".into()));
        }
        let extra = [
            "kind=\"TimeBinEntanglement\"".to_string(),
            format!("phases.phi_w_sweep={}", list_in_pi(phi_w)),
            format!("phases.phi_r_curves={}", list_in_pi(&phi_r)),
        ];
        let (cfg, overrides) = load(&args.run, &extra)?;
        let mut run = start(&args.run, "sweep", &cfg, &overrides)?;
        let out = run_experiment(&cfg)?;
        let curves = sweep_curves(&out)?;
        let table = sweep_table(&curves);
        run.write("sweep.tsv", table.as_bytes())?;
        if let [a, b, ..] = curves.as_slice() {
            run.write_json("fit.json", &fit_sinusoid_and_choose_phases(a, b)?)?;
        }
        print!("{table}");
        run.finish()?;
        return Ok(());
    }

    let (Some(key), Some(values)) = (&args.set, &args.values) else {
        bail!(UsageError("give either --phi-w LIST or --set KEY --values LIST".into()));
    };
    if values.is_empty() {
        bail!(UsageError("--values needs at least one value".into()));
    }
    let (cfg0, overrides) = load(&args.run, &[format!("{key}={}", values[0])])?;
    let mut run = start(&args.run, "sweep", &cfg0, &overrides)?;
    let mut table = format!("# {key}\tsetting\tphi_w\tphi_r\tE\tsigma\tg2_overlap_exact\n");
    for v in values {
        let (cfg, _) = load(&args.run, &[format!("{key}={v}")])?;
        if cfg.kind == ExperimentKind::ThermalG2Tau {
            bail!(UsageError("value sweeps need a pulsed experiment".into()));
        }
        let out = run_experiment(&cfg)?;
        for s in &out.settings {
            let t = CoincidenceTable::from_distribution(&s.exact, cfg.trials as f64, Window::WriteOverlap, Window::ReadOverlap)?;
            let (e, sigma) = match correlation_e(&t) {
                Ok(r) => (r.value, r.sigma),
                Err(_) => (f64::NAN, f64::NAN),
            };
            let g2 = g2_between_windows_exact(&s.exact, Window::WriteOverlap, Window::ReadOverlap);
            let _ = writeln!(table, "{v}\t{}\t{:.9}\t{:.9}\t{e:.9}\t{sigma:.9}\t{g2:.6}", s.label, s.phi_w, s.phi_r);
        }
    }
    run.write("sweep.tsv", table.as_bytes())?;
    print!("{table}");
    run.finish()?;
    Ok(())
}

pub fn calibrate(args: &RunArgs) -> Result<()> {
    let (cfg, overrides) = load(args, &[])?;
    let mut run = start(args, "calibrate", &cfg, &overrides)?;
    let (cal, curves) = run_calibration(&cfg)?;
    run.write("calibration_sweep.tsv", sweep_table(&curves).as_bytes())?;
    run.write_json("calibration.json", &cal)?;
    run.write("bell_calibrated.toml", calibrated_bell_config(&cfg, &cal).to_toml().as_bytes())?;
    println!("phi_0 = {:.4} ± {:.4} rad ({:.4} π)", cal.phi_0.value, cal.phi_0.sigma, cal.phi_0.value / PI);
    for (name, (w, r)) in ["w0r0", "w1r0", "w0r1", "w1r1"].iter().zip(cal.settings) {
        println!("{name}: phi_w = {:.4} π, phi_r = {:.4} π", w / PI, r / PI);
    }
    println!("epsilon = [{:.4}, {:.4}] rad, expected S = {:.3}", cal.epsilon[0], cal.epsilon[1], cal.expected_s);
    run.finish()?;
    Ok(())
}

pub fn oracle_check(args: &OracleArgs) -> Result<()> {
    let scale = OracleScale {
        circuits: args.circuits,
        max_modes: args.max_modes,
        truncation: args.truncation,
        tolerance: args.tolerance,
        seed: args.seed,
    };
    if scale.max_modes < 2 || scale.truncation < 1 {
        bail!(UsageError("--max-modes must be at least 2 and --truncation at least 1".into()));
    }
    let mut run = RunDir::create(&args.out, "oracle-check")?;
    let lines = oracle::run_all(scale)?;
    let mut failed = Vec::new();
    for l in &lines {
        println!("{} {}: max deviation {:.3e} (tolerance {:.1e})", if l.pass { "PASS" } else { "FAIL" }, l.name, l.deviation, l.tolerance);
        if !l.pass {
            println!("  worst case: {}", l.worst_case);
            failed.push(l.name.clone());
        }
    }
    run.write_json("oracle.json", &lines)?;
    run.finish()?;
    if !failed.is_empty() {
        bail!(OracleFailure(failed));
    }
    Ok(())
}

pub fn rate_budget(args: &RunArgs) -> Result<()> {
    let (cfg, overrides) = load(args, &[])?;
    let mut run = start(args, "rate-budget", &cfg, &overrides)?;
    let b = budget(&cfg)?;
    println!("{b}");
    let factors: Vec<_> = b
        .factors
        .iter()
        .map(|f| json!({"name": f.name, "value": f.value, "coincidence_only": f.coincidence_only}))
        .collect();
    run.write_json(
        "rate_budget.json",
        &json!({
            "factors": factors,
            "herald_per_hour": b.herald_per_hour(),
            "coincidence_per_hour": b.coincidence_per_hour(),
        }),
    )?;
    run.assume("rates depend on the assumed detector efficiency and dark-count probability");
    run.finish()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_table_parses_back() {
        let c = SweepCurve { phi_r: 0.5, phi_w: vec![0.0, 1.0], e: vec![0.1, -0.2], sigma: vec![0.01, 0.02] };
        let back = tbsim::analysis::parse_sweep(&sweep_table(&[c.clone()])).unwrap();
        assert_eq!(back.len(), 1);
        assert!((back[0].e[1] - c.e[1]).abs() < 1e-9);
        assert_eq!(list_in_pi(&[0.0, 0.5]), "[0.0, 0.5]");
    }
}
