//! Study runners. Every emitted number traces to a library operation; this
//! layer only selects, formats, and aggregates.

use std::fmt::Write as _;

use serde_json::json;
use spinboson::fock;
use spinboson::gsb;
use spinboson::linalg::HermitianEig;
use spinboson::renorm;
use spinboson::report::{self, fmt_float};
use spinboson::resolvent::{self, ResolventContext};
use spinboson::sample;

use crate::config::RunConfig;

pub struct StudyOutcome {
    pub name: &'static str,
    pub pass: bool,
    pub summary: String,
    pub csv: String,
    pub json: String,
}

/// Threshold for the block-formula/dense-inverse agreement.
pub const RESOLVENT_CHECK_TOL: f64 = 1e-8;

pub fn run_study(name: &str, config: &RunConfig) -> Result<StudyOutcome, String> {
    match name {
        "validate" => validate_study(config),
        "spectrum" => spectrum_study(config),
        "resolvent-check" => resolvent_check_study(config),
        "converge" => converge_study(config),
        "dress" => dress_study(config),
        "vanish" => vanish_study(config),
        other => Err(format!("unknown study `{other}`")),
    }
}

fn validate_study(config: &RunConfig) -> Result<StudyOutcome, String> {
    let spec = config.build_model()?;
    let report = gsb::validate_interaction(&spec.spin);

    let mut csv = String::from("item,j,l,value\n");
    for (j, d) in report.normal_defects.iter().enumerate() {
        let _ = writeln!(csv, "normal_defect,{j},,{}", fmt_float(*d));
    }
    for &(j, l, d) in &report.commutator_defects {
        let _ = writeln!(csv, "commutator_defect,{j},{l},{}", fmt_float(d));
    }
    let _ = writeln!(csv, "joint_kernel_margin,,,{}", fmt_float(report.joint_kernel_margin));

    let json = serde_json::to_string_pretty(&report).map_err(|e| e.to_string())?;

    let pass = !config.studies.require_assumption || report.verdict;
    let mut failures = Vec::new();
    if !report.all_normal() {
        failures.push("normality fails");
    }
    if !report.all_commuting() {
        failures.push("commutation fails");
    }
    if !report.joint_kernel_trivial() {
        failures.push("joint kernel is nontrivial");
    }
    let summary = if report.verdict {
        "interaction assumption satisfied".to_string()
    } else {
        format!("interaction assumption violated: {}", failures.join("; "))
    };
    Ok(StudyOutcome {
        name: "validate",
        pass,
        summary,
        csv,
        json,
    })
}

fn spectrum_study(config: &RunConfig) -> Result<StudyOutcome, String> {
    let spec = config.build_model()?;
    let h_free = gsb::assemble_free(&spec).map_err(|e| e.to_string())?;
    let h_full = gsb::assemble_hamiltonian(&spec).map_err(|e| e.to_string())?;
    let herm_defect = h_full.hermiticity_defect();

    let free_eig = HermitianEig::new(&h_free.matrix, 1e-10).map_err(|e| e.to_string())?;
    let full_eig = HermitianEig::new(&h_full.matrix, 1e-10).map_err(|e| e.to_string())?;

    // independent route: the free spectrum is the set-sum of the level
    // energies and the field energies
    let k_eig = HermitianEig::new(spec.spin.energy(), 1e-10).map_err(|e| e.to_string())?;
    let dg = fock::second_quantize(&spec.grid, &spec.basis).map_err(|e| e.to_string())?;
    let mut setsum: Vec<f64> = Vec::with_capacity(spec.total_dim());
    for &kappa in &k_eig.values {
        for i in 0..spec.basis.len() {
            setsum.push(kappa + dg.matrix[(i, i)].re);
        }
    }
    setsum.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let setsum_defect = free_eig
        .values
        .iter()
        .zip(&setsum)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);

    let mut csv = String::from("index,free_eigenvalue,full_eigenvalue\n");
    for (i, (f, h)) in free_eig.values.iter().zip(&full_eig.values).enumerate() {
        let _ = writeln!(csv, "{i},{},{}", fmt_float(*f), fmt_float(*h));
    }
    let json = serde_json::to_string_pretty(&json!({
        "dimension": spec.total_dim(),
        "hermiticity_defect": herm_defect,
        "setsum_defect": setsum_defect,
        "free_min": free_eig.min_value(),
        "free_max": free_eig.max_value(),
        "full_min": full_eig.min_value(),
        "full_max": full_eig.max_value(),
    }))
    .map_err(|e| e.to_string())?;

    let pass = herm_defect == 0.0 && setsum_defect < 1e-9;
    Ok(StudyOutcome {
        name: "spectrum",
        pass,
        summary: format!(
            "spectrum [{:.6}, {:.6}], hermiticity defect {herm_defect:.1e}, set-sum defect {setsum_defect:.1e}",
            full_eig.min_value(),
            full_eig.max_value()
        ),
        csv,
        json,
    })
}

fn resolvent_check_study(config: &RunConfig) -> Result<StudyOutcome, String> {
    let spec = config.build_model()?;
    let ctx = ResolventContext::from_model(&spec, config.probe.z0).map_err(|e| e.to_string())?;
    let h_full = gsb::assemble_hamiltonian(&spec).map_err(|e| e.to_string())?;

    let mut csv = String::from("z_re,z_im,rel_error,invertibility_margin\n");
    let mut worst = 0.0f64;
    let mut rows = Vec::new();
    for z in config.z_set() {
        let krein = ctx.krein_resolvent(z).map_err(|e| e.to_string())?;
        let direct = resolvent::resolvent_direct(&h_full, z).map_err(|e| e.to_string())?;
        let rel = (&krein - &direct).operator_norm() / direct.operator_norm();
        let margin = ctx.invertibility_margin(z).map_err(|e| e.to_string())?;
        worst = worst.max(rel);
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            fmt_float(z.re),
            fmt_float(z.im),
            fmt_float(rel),
            fmt_float(margin)
        );
        rows.push(json!({"z_re": z.re, "z_im": z.im, "rel_error": rel, "margin": margin}));
    }

    // seeded spot-check that the split application of H agrees with the
    // assembled matrix
    let mut rng = sample::rng(config.output.seed);
    let mut apply_defect = 0.0f64;
    for _ in 0..8 {
        let psi = sample::random_vector(&mut rng, ctx.dim());
        let split = ctx.apply_hamiltonian(&psi);
        let direct = h_full.apply(&psi);
        apply_defect = apply_defect.max((split - &direct).norm() / direct.norm().max(1.0));
    }

    let degenerate = rows
        .iter()
        .filter(|r| r["margin"].as_f64().unwrap_or(0.0) < 1e-14)
        .count();
    let pass = worst < RESOLVENT_CHECK_TOL && apply_defect < 1e-11;
    let json = serde_json::to_string_pretty(&json!({
        "max_rel_error": worst,
        "apply_defect": apply_defect,
        "tolerance": RESOLVENT_CHECK_TOL,
        "degenerate_margins": degenerate,
        "points": rows,
    }))
    .map_err(|e| e.to_string())?;
    let mut summary = format!(
        "block formula vs dense inverse: max relative error {worst:.3e} (tolerance {RESOLVENT_CHECK_TOL:.0e})"
    );
    if degenerate > 0 {
        summary.push_str(&format!("; degenerate invertibility margin at {degenerate} point(s)"));
    }
    Ok(StudyOutcome {
        name: "resolvent-check",
        pass,
        summary,
        csv,
        json,
    })
}

fn converge_study(config: &RunConfig) -> Result<StudyOutcome, String> {
    let spec = config.build_model()?;
    let cutoffs = config.cutoff_schedule(&spec.grid);
    let report = renorm::convergence_study(&spec, &cutoffs, &config.z_set())
        .map_err(|e| e.to_string())?;
    let csv = report::convergence_csv(&report);
    let json = serde_json::to_string_pretty(&report).map_err(|e| e.to_string())?;
    let pass = report.verdict;
    let summary = format!(
        "{} rungs, strictly decreasing: {}, rate stable within factor 3: {}",
        report.rungs.len(),
        report.fits.iter().all(|f| f.strictly_decreasing),
        report
            .fits
            .iter()
            .all(|f| f.ratio_max / f.ratio_min < 3.0)
    );
    Ok(StudyOutcome {
        name: "converge",
        pass,
        summary,
        csv,
        json,
    })
}

fn dress_study(config: &RunConfig) -> Result<StudyOutcome, String> {
    let spec = config.build_model()?;
    let n_top = spec.basis.n_max();
    let mut ladder: Vec<usize> = vec![(n_top / 4).max(2), (n_top / 2).max(3), n_top];
    ladder.sort_unstable();
    ladder.dedup();
    ladder.retain(|&n| n <= n_top);
    let mut reports = Vec::new();
    for &n_max in &ladder {
        let basis = fock::build_basis_capped(spec.grid.len(), n_max, config.truncation.size_cap)
            .map_err(|e| e.to_string())?;
        let rung_spec = spinboson::gsb::ModelSpec::new(
            spec.spin.clone(),
            spec.grid.clone(),
            spec.factors.clone(),
            basis,
        )
        .map_err(|e| e.to_string())?;
        reports.push(renorm::van_hove_dressing_for(&rung_spec).map_err(|e| e.to_string())?);
    }
    let csv = report::dressing_csv(&reports);
    let json = serde_json::to_string_pretty(&reports).map_err(|e| e.to_string())?;

    let top = reports.last().unwrap();
    let unitary_ok = top.unitarity_defect < 1e-12;
    let monotone = reports
        .windows(2)
        .all(|w| w[1].conjugation_defect <= w[0].conjugation_defect);
    let ground_gap = (top.ground_energy - (spec.spin.energy()[(0, 0)].re + top.self_energy)).abs();
    let pass = unitary_ok && monotone;
    Ok(StudyOutcome {
        name: "dress",
        pass,
        summary: format!(
            "self-energy {:.6}, ground gap {ground_gap:.3e}, unitarity defect {:.3e}, residual ladder {:?}",
            top.self_energy,
            top.unitarity_defect,
            reports.iter().map(|r| r.conjugation_defect).collect::<Vec<_>>()
        ),
        csv,
        json,
    })
}

fn vanish_study(config: &RunConfig) -> Result<StudyOutcome, String> {
    let spec = config.build_model()?;
    let ctx = ResolventContext::from_model(&spec, config.probe.z0).map_err(|e| e.to_string())?;
    let zs = config.vanish_points();

    let mut csv = String::from("s,z_re,z_im,dist,norm_measured,norm_bound\n");
    let mut entries = Vec::new();
    let mut all_bounded = true;
    for &s in &config.probe.vanish_s {
        let report =
            resolvent::resolvent_vanishing_study(&ctx, s, &zs).map_err(|e| e.to_string())?;
        all_bounded = all_bounded && report.all_within_bound();
        for r in &report.rows {
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{}",
                fmt_float(s),
                fmt_float(r.z_re),
                fmt_float(r.z_im),
                fmt_float(r.dist),
                fmt_float(r.norm_measured),
                fmt_float(r.norm_bound)
            );
        }
        entries.push(json!({
            "s": s,
            "fitted_exponent": report.fitted_exponent,
            "within_bound": report.all_within_bound(),
        }));
    }
    let json = serde_json::to_string_pretty(&json!({
        "series": entries,
        "all_within_bound": all_bounded,
    }))
    .map_err(|e| e.to_string())?;
    // the decay *rate* matches -1 + s/2 only while the free spectrum
    // populates the maximizing window, so the gate here is the envelope
    // bound; fitted exponents are reported for inspection
    Ok(StudyOutcome {
        name: "vanish",
        pass: all_bounded,
        summary: format!("weighted resolvent norms within the spectral envelope: {all_bounded}"),
        csv,
        json,
    })
}
