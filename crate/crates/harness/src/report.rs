use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{HarnessError, Result};
use crate::record::{RunRecord, Timings};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Json,
    Markdown,
    Csv,
}

impl Format {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Format::Json),
            "markdown" | "md" => Ok(Format::Markdown),
            "csv" => Ok(Format::Csv),
            other => Err(HarnessError::Validation(format!(
                "unknown report format `{other}` (json, markdown, csv)"
            ))),
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Markdown => "md",
            Format::Csv => "csv",
        }
    }
}

pub fn render(record: &RunRecord, format: Format) -> Result<String> {
    match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(record).map_err(|e| HarnessError::Report(e.to_string()))?;
            s.push('\n');
            Ok(s)
        }
        Format::Markdown => {
            let mut s = String::new();
            markdown(record, 1, &mut s);
            Ok(s)
        }
        Format::Csv => csv_text(record),
    }
}

pub fn parse_json(text: &str) -> Result<RunRecord> {
    serde_json::from_str(text).map_err(|e| HarnessError::Report(e.to_string()))
}

fn slug(name: &str) -> String {
    let s: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '-' })
        .collect();
    let s = s.trim_matches('-').to_string();
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        if !(c == '-' && out.ends_with('-')) {
            out.push(c);
        }
    }
    out
}

/// Writes `<dir>/<scenario>.<ext>` and returns its path.
pub fn emit_report(record: &RunRecord, format: Format, dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir.display().to_string(), e))?;
    let path = dir.join(format!("{}.{}", slug(&record.scenario), format.extension()));
    let text = render(record, format)?;
    std::fs::write(&path, text).map_err(|e| HarnessError::io(path.display().to_string(), e))?;
    Ok(path)
}

/// Writes `<dir>/<scenario>.timings.json`.
pub fn emit_timings(timings: &Timings, dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir.display().to_string(), e))?;
    let path = dir.join(format!("{}.timings.json", slug(&timings.scenario)));
    let text = serde_json::to_string_pretty(timings).map_err(|e| HarnessError::Report(e.to_string()))?;
    std::fs::write(&path, text + "\n").map_err(|e| HarnessError::io(path.display().to_string(), e))?;
    Ok(path)
}

fn yes(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

fn opt(v: &Option<usize>) -> String {
    v.map_or_else(|| "-".to_string(), |x| x.to_string())
}

fn markdown(r: &RunRecord, depth: usize, s: &mut String) {
    let h = "#".repeat(depth);
    let h2 = "#".repeat(depth + 1);
    let _ = writeln!(s, "{h} {}\n", r.scenario);
    let _ = writeln!(s, "- triple: `{}`", r.triple);
    let _ = writeln!(s, "- scenario hash: `{}`", r.scenario_hash);
    let _ = writeln!(s, "- tool version: {}", r.tool_version);
    let _ = writeln!(s, "- seed: {}\n", r.seed);
    if let Some(d) = &r.dirac {
        for deg in &d.degrees {
            let _ = writeln!(s, "{h2} dirac, degree {}\n", deg.degree);
            let _ = writeln!(
                s,
                "budget {}; {} words, {} junk words, kernel {}; omega = {}, stabilized: {}{}\n",
                d.budget,
                deg.words,
                deg.junk_words,
                deg.kernel_dim,
                deg.omega,
                yes(deg.stabilized),
                deg.rerun_level.map_or(String::new(), |l| format!(", rerun at level {l}"))
            );
            let _ = writeln!(s, "| level | dim pi(Omega) | junk | dim Omega_D | marginal | sketched |");
            let _ = writeln!(s, "|---|---|---|---|---|---|");
            for l in &deg.levels {
                let _ = writeln!(
                    s,
                    "| {} | {} | {} | {} | {} | {} |",
                    l.level,
                    l.pi_omega,
                    l.junk,
                    l.omega,
                    yes(l.marginal),
                    yes(l.sketched)
                );
            }
            s.push('\n');
        }
    }
    if let Some(t) = &r.theorem {
        let _ = writeln!(s, "{h2} suspension one-forms\n");
        let _ = writeln!(s, "| base dim Omega^1 | base dim A | c | L | predicted | realized |");
        let _ = writeln!(s, "|---|---|---|---|---|---|");
        let _ = writeln!(
            s,
            "| {} | {} | {} | {} | {} | {} |\n",
            t.base_omega1, t.base_algebra, t.index_cap, t.laurent_cap, t.predicted, t.realized
        );
    }
    if let Some(d) = &r.differentials {
        let _ = writeln!(s, "{h2} differentials\n");
        let _ = writeln!(s, "| samples | max delta0 residual | max delta1 delta0 | failures |");
        let _ = writeln!(s, "|---|---|---|---|");
        let _ = writeln!(
            s,
            "| {} | {} | {} | {} |\n",
            d.samples, d.max_formula_residual, d.max_square_residual, d.failures
        );
    }
    if let Some(c) = &r.cohomology {
        let b = &c.base;
        let _ = writeln!(s, "{h2} cohomology\n");
        let _ = writeln!(
            s,
            "base: dim A = {}, rank d0 = {}, H0 = {}, dim Omega^1 = {}, dim ker d1 = {}, H1 = {}\n",
            b.dim_algebra, b.rank_d0, b.h0, b.dim_omega1, b.ker_d1, b.h1
        );
        if !c.rows.is_empty() {
            let _ = writeln!(s, "| degree | realized | predicted | stabilized | per level |");
            let _ = writeln!(s, "|---|---|---|---|---|");
            for row in &c.rows {
                let per: Vec<String> = row.levels.iter().map(|(l, d)| format!("{l}:{d}")).collect();
                let _ = writeln!(
                    s,
                    "| {} | {} | {} | {} | {} |",
                    row.degree,
                    row.realized,
                    row.predicted,
                    yes(row.stabilized),
                    per.join(" ")
                );
            }
            s.push('\n');
        }
    }
    if let Some(f) = &r.fgr {
        for d in &f.degrees {
            let _ = writeln!(s, "{h2} fgr, degree {}\n", d.degree);
            let _ = writeln!(
                s,
                "budget {}; nodes {}; ratio {}; order {}; k_tol {}; refined: {}\n",
                f.budget,
                f.t_values.join(", "),
                f.ratio,
                f.order,
                f.k_tol,
                yes(f.refined)
            );
            let _ = writeln!(
                s,
                "| words | reduced | gram rank | dim K | rank dK | dim K+dK | full quotient | targets | dim Omega~ | marginal | min eig | max eig | threshold | gram error |"
            );
            let _ = writeln!(s, "|---|---|---|---|---|---|---|---|---|---|---|---|---|---|");
            let _ = writeln!(
                s,
                "| {} | {} | {} | {} | {} | {} | {} | {} | {} | {} | {} | {} | {} | {} |\n",
                d.words,
                yes(d.reduced),
                d.gram_rank,
                d.kernel_dim,
                d.dk_rank,
                d.k_plus_dk,
                d.omega_full,
                d.targets,
                d.omega,
                d.marginal,
                d.min_eigenvalue,
                d.max_eigenvalue,
                d.threshold,
                d.gram_error
            );
        }
        if let Some(k) = &f.k0 {
            let _ = writeln!(s, "{h2} fgr, degree-0 kernel\n");
            let _ = writeln!(
                s,
                "| finite words | max seminorm | Laurent words | min eigenvalue | threshold | contains finite | excludes Laurent |"
            );
            let _ = writeln!(s, "|---|---|---|---|---|---|---|");
            let _ = writeln!(
                s,
                "| {} | {} | {} | {} | {} | {} | {} |\n",
                k.finite_words,
                k.finite_max_seminorm,
                k.laurent_words,
                k.laurent_min_eigenvalue,
                k.threshold,
                yes(k.contains_finite),
                yes(k.excludes_laurent)
            );
        }
    }
    if let Some(c) = &r.cross_terms {
        let _ = writeln!(s, "{h2} cross terms\n");
        let _ = writeln!(s, "threshold {}\n", c.threshold);
        let _ = writeln!(s, "| sample | value | error | pass |");
        let _ = writeln!(s, "|---|---|---|---|");
        for row in &c.rows {
            let _ = writeln!(s, "| {} | {} | {} | {} |", row.sample, row.value.value, row.value.error, yes(row.pass));
        }
        s.push('\n');
    }
    if let Some(p) = &r.summability {
        let _ = writeln!(s, "{h2} summability\n");
        let dims: Vec<String> = p.level.iter().map(|d| d.to_string()).collect();
        let _ = writeln!(
            s,
            "p = {}, intercept {}, residual {}, factor dims {}\n",
            p.p,
            p.intercept,
            p.residual,
            dims.join("x")
        );
        let _ = writeln!(s, "| t | Tr exp(-t abs(D)) |");
        let _ = writeln!(s, "|---|---|");
        for (t, v) in &p.points {
            let _ = writeln!(s, "| {t} | {v} |");
        }
        s.push('\n');
    }
    if let Some(hi) = &r.heat_identity {
        let _ = writeln!(s, "{h2} heat trace of the identity\n");
        let _ = writeln!(s, "| limit | error | nodes | order |");
        let _ = writeln!(s, "|---|---|---|---|");
        let _ = writeln!(
            s,
            "| {} | {} | {} | {} |\n",
            hi.limit.value, hi.limit.error, hi.limit.nodes, hi.limit.order
        );
    }
    if let Some(c) = &r.comparison {
        let _ = writeln!(s, "{h2} comparison\n");
        let _ = writeln!(s, "bases: {}\n", c.bases.join(", "));
        let _ = writeln!(s, "| degree | dirac | fgr | fgr constant | dirac varies | flagged |");
        let _ = writeln!(s, "|---|---|---|---|---|---|");
        for row in &c.rows {
            let d: Vec<String> = row.dirac.iter().map(opt).collect();
            let f: Vec<String> = row.fgr.iter().map(opt).collect();
            let _ = writeln!(
                s,
                "| {} | {} | {} | {} | {} | {} |",
                row.degree,
                d.join(" / "),
                f.join(" / "),
                yes(row.fgr_constant),
                yes(row.dirac_varies),
                yes(row.flagged)
            );
        }
        let _ = writeln!(s, "\nverdict: {}\n", c.verdict);
    }
    if !r.checks.is_empty() {
        let _ = writeln!(s, "{h2} checks\n");
        let _ = writeln!(s, "| check | result | detail |");
        let _ = writeln!(s, "|---|---|---|");
        for c in &r.checks {
            let _ = writeln!(s, "| {} | {} | {} |", c.name, if c.passed { "pass" } else { "FAIL" }, c.detail);
        }
        s.push('\n');
    }
    for m in &r.runs {
        markdown(m, depth + 1, s);
    }
}

const CSV_HEADER: [&str; 10] = [
    "scenario", "module", "degree", "level", "words", "rank", "kernel", "omega", "stabilized", "marginal",
];

/// One row per Dirac (degree, level) and one per FGR degree, whose only
/// level is the extrapolated limit.
fn csv_text(r: &RunRecord) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| HarnessError::Report(e.to_string());
    w.write_record(CSV_HEADER).map_err(err)?;
    csv_rows(r, &mut w)?;
    let bytes = w.into_inner().map_err(|e| HarnessError::Report(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| HarnessError::Report(e.to_string()))
}

fn csv_rows(r: &RunRecord, w: &mut csv::Writer<Vec<u8>>) -> Result<()> {
    let err = |e: csv::Error| HarnessError::Report(e.to_string());
    if let Some(d) = &r.dirac {
        for deg in &d.degrees {
            for l in &deg.levels {
                w.write_record([
                    r.scenario.clone(),
                    "dirac".into(),
                    deg.degree.to_string(),
                    l.level.to_string(),
                    deg.words.to_string(),
                    l.pi_omega.to_string(),
                    l.junk.to_string(),
                    l.omega.to_string(),
                    yes(deg.stabilized).into(),
                    yes(l.marginal).into(),
                ])
                .map_err(err)?;
            }
        }
    }
    if let Some(f) = &r.fgr {
        for d in &f.degrees {
            w.write_record([
                r.scenario.clone(),
                "fgr".into(),
                d.degree.to_string(),
                "limit".into(),
                d.words.to_string(),
                d.gram_rank.to_string(),
                d.kernel_dim.to_string(),
                d.omega.to_string(),
                String::new(),
                yes(d.marginal > 0).into(),
            ])
            .map_err(err)?;
        }
    }
    for m in &r.runs {
        csv_rows(m, w)?;
    }
    Ok(())
}
