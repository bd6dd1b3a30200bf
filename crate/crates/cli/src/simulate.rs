use std::fmt::Write as _;
use std::path::Path;

use cace_core::{IntervalMethod, SimulationSummary, StudyOutput};

fn opt(v: Option<f64>, digits: usize) -> String {
    v.map(|x| format!("{x:.digits$}"))
        .unwrap_or_else(|| "-".into())
}

pub fn render_text(s: &SimulationSummary) -> String {
    let c = &s.config;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "n = {}, p_co = {}, rho = {}, K = {}, reps = {}, seed = {}, alpha = {}",
        c.n, c.p_co, c.rho, c.k, c.reps, c.seed, c.alpha
    );
    let _ = writeln!(
        out,
        "true tau_CACE = {:.3}, compliers = {} ({:.3})",
        s.true_tau_cace, s.n_compliers, s.true_p_co
    );

    let _ = writeln!(out, "\nProportion of abnormal results");
    for m in &s.methods {
        let _ = writeln!(
            out,
            "  {:<12} {:>8.3}",
            m.method.label(),
            m.abnormal_proportion
        );
    }

    let _ = writeln!(out, "\nMedian absolute error");
    for (label, m) in [
        ("Wald", IntervalMethod::WaldDelta),
        ("Reg", IntervalMethod::RegEhw),
    ] {
        let _ = writeln!(out, "  {:<12} {:>8}", label, opt(s.method(m).mae, 3));
    }

    let level = 1.0 - c.alpha;
    let _ = writeln!(out, "\nCoverage, 100 x (CRate - {level})");
    for m in &s.methods {
        let _ = writeln!(
            out,
            "  {:<12} {:>8}   (rate {})",
            m.method.label(),
            opt(m.coverage_deviation, 3),
            opt(m.coverage_rate, 3)
        );
    }

    let _ = writeln!(out, "\nMedian length of {}% intervals", 100.0 * level);
    for m in &s.methods {
        let _ = writeln!(
            out,
            "  {:<12} {:>8}",
            m.method.label(),
            opt(m.median_length, 3)
        );
    }

    let d = &s.diagnostics;
    let _ = writeln!(out, "\nDiagnostics");
    let _ = writeln!(out, "  Var(tau_B) exact      {:.4}", d.true_var_tau_b);
    let _ = writeln!(out, "  Var+                  {:.4}", d.var_plus);
    let _ = writeln!(out, "  Var+ given x          {:.4}", d.var_plus_given_x);
    let _ = writeln!(out, "  PRIL limit            {:.3}", d.pril_limit);
    let _ = writeln!(out, "  PRIL observed         {}", opt(d.empirical_pril, 3));
    out
}

/// Writes one CSV row per replicate and method.
pub fn dump_replicates(out: &StudyOutput, path: &Path) -> csv::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "replicate",
        "method",
        "estimate",
        "length",
        "covered",
        "abnormal",
    ])?;
    for r in &out.replicates {
        for (m, o) in IntervalMethod::ALL.iter().zip(&r.outcomes) {
            w.write_record([
                r.index.to_string(),
                m.as_str().to_string(),
                o.estimate.map(|e| format!("{e:.17e}")).unwrap_or_default(),
                if o.length.is_finite() {
                    format!("{:.17e}", o.length)
                } else {
                    "inf".into()
                },
                o.covered.to_string(),
                o.abnormal.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
