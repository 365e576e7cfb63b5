//! Fixed-width text report and its delimiter-separated companion.
//!
//! Both only format fields of the run records; nothing is recomputed.

use std::fmt::Write as _;
use std::io;

use crate::pipeline::Pipeline;
use crate::record::{Formulation, RunRecord};

const W: usize = 9;

fn num(x: f64) -> String {
    format!("{:>W$.4}", if x.abs() < 5e-5 { 0.0 } else { x })
}

fn status(r: &RunRecord) -> String {
    let mut s = format!("{} {}", r.formulation, if r.certified { "certified" } else { "FAILED" });
    if let Some(start) = &r.settings.start {
        let _ = write!(s, " (start {start})");
    }
    if let Some(e) = &r.error {
        let _ = write!(s, ": {e}");
    }
    s
}

fn price_names(f: Formulation) -> (&'static str, &'static str) {
    match f {
        Formulation::Ac => ("Lam_p", "Lam_q"),
        Formulation::Sdp => ("lam_p", "lam_q"),
        Formulation::Socp => ("rho_p", "rho_q"),
    }
}

/// Renders the per-bus table followed by the summary sections.
pub fn render_text(p: &Pipeline) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "case {}", p.case);
    for r in &p.records {
        let _ = writeln!(out, "  {}", status(r));
    }
    let solved: Vec<&RunRecord> = p.records.iter().filter(|r| r.solution.is_some()).collect();
    if solved.is_empty() {
        return out;
    }

    let mut header = format!("\n{:>4}", "bus");
    for r in &solved {
        let (pp, pq) = price_names(r.formulation);
        let f = r.formulation.to_string().to_uppercase();
        for col in [format!("pG {f}"), format!("qG {f}"), pp.to_string(), pq.to_string(), format!("|V|2 {f}")] {
            let _ = write!(header, " {col:>W$}");
        }
    }
    let _ = writeln!(out, "{header}");
    let _ = writeln!(out, "{}", "-".repeat(header.trim_start_matches('\n').len()));
    let n = solved[0].solution.as_ref().map_or(0, |s| s.p_gen.len());
    for k in 0..n {
        let _ = write!(out, "{:>4}", k + 1);
        for r in &solved {
            let s = r.solution.as_ref().expect("filtered");
            for x in [s.p_gen[k], s.q_gen[k], s.duals.lmp_p[k], s.duals.lmp_q[k], s.v_sq[k]] {
                let _ = write!(out, " {}", num(x));
            }
        }
        let _ = writeln!(out);
    }

    let _ = writeln!(out);
    for r in &solved {
        let s = r.solution.as_ref().expect("filtered");
        let mut line = format!("{:<5} objective {}", r.formulation.to_string(), num(s.objective));
        if let Some(rank) = s.rank {
            let _ = write!(line, "  rank {rank}{}", if rank == 1 { " (exact)" } else { " (not exact)" });
        }
        if r.formulation == Formulation::Socp {
            let _ = write!(line, "  {}", if s.exact { "exact" } else { "not exact" });
        }
        if let Some(st) = &r.settlement {
            let _ = write!(line, "  MS {}  closed form {}", num(st.ms), num(st.ms_formula));
            if let Some(a) = &st.revenue_adequacy {
                let _ = write!(line, "  adequacy {a}");
            }
        }
        let _ = writeln!(out, "{line}");
    }
    for (name, value) in solved.iter().flat_map(|r| {
        let s = r.solution.as_ref().expect("filtered");
        s.residuals.iter().map(move |(k, v)| (format!("{} {k}", r.formulation), *v))
    }) {
        let _ = writeln!(out, "  residual {name:<24} {value:.3e}");
    }

    for r in &p.records {
        if let Some(g) = &r.gap {
            let _ = writeln!(out, "\ngap decomposition (AC dispatch at SDP optimal duals)");
            let _ = writeln!(out, "  J_AC {}  J_SDP {}  gap {}", num(g.ac_objective), num(g.sdp_objective), num(g.gap));
            let _ = writeln!(out, "  LOC {}  PRS {}  residual {:.3e}  {}", num(g.loc), num(g.prs), g.residual, if g.consistent { "consistent" } else { "INCONSISTENT" });
            let paid: Vec<String> = g
                .side_payments
                .iter()
                .enumerate()
                .filter(|(_, &s)| s > 1e-8)
                .map(|(k, s)| format!("bus {} {}", k + 1, num(*s).trim()))
                .collect();
            let _ = writeln!(out, "  side payments at SDP prices: {}", if paid.is_empty() { "none".to_string() } else { paid.join(", ") });
        }
        if let Some(c) = &r.radial {
            let _ = writeln!(out, "\nradial comparison (SDP vs branch-flow SOCP)");
            let _ = writeln!(
                out,
                "  J_SDP {}  J_SOCP {}  |dJ| {:.3e}  max|d price p| {:.3e}  max|d price q| {:.3e}  {}",
                num(c.sdp_objective),
                num(c.socp_objective),
                c.objective_gap,
                c.price_gap_p,
                c.price_gap_q,
                if c.passed { "equal" } else { "DIFFERENT" }
            );
        }
    }
    out
}

/// Payments and profits of one settled record.
pub fn render_settlement(r: &RunRecord) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "case {}\n  {}", r.case, status(r));
    let (Some(s), Some(st)) = (&r.solution, &r.settlement) else {
        return out;
    };
    let (pp, pq) = price_names(r.formulation);
    let cols = [pp, pq, "pay_gen", "pay_dem", "profit_so", "profit_opt", "side_pay"];
    let mut header = format!("\n{:>4}", "bus");
    for c in cols {
        let _ = write!(header, " {c:>W$}");
    }
    let _ = writeln!(out, "{header}");
    let _ = writeln!(out, "{}", "-".repeat(header.len() - 1));
    for k in 0..st.pay_gen.len() {
        let _ = write!(out, "{:>4}", k + 1);
        for x in [s.duals.lmp_p[k], s.duals.lmp_q[k], st.pay_gen[k], st.pay_dem[k], st.profit_so[k], st.profit_opt[k], st.side_payments[k]] {
            let _ = write!(out, " {}", num(x));
        }
        let _ = writeln!(out);
    }
    let _ = writeln!(out, "\nMS {}  closed form {}  LOC {}", num(st.ms), num(st.ms_formula), num(st.loc));
    if let Some(a) = &st.revenue_adequacy {
        let _ = writeln!(out, "revenue adequacy {a}");
    }
    out
}

/// Long format: `formulation,bus,quantity,value`, with an empty bus for
/// scalar quantities.
pub fn write_csv<W: io::Write>(p: &Pipeline, w: W) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["formulation", "bus", "quantity", "value"])?;
    for r in &p.records {
        let f = r.formulation.to_string();
        let mut row = |bus: Option<usize>, q: &str, v: f64| {
            out.write_record([f.as_str(), &bus.map(|b| b.to_string()).unwrap_or_default(), q, &format!("{v:.10e}")])
        };
        row(None, "certified", if r.certified { 1.0 } else { 0.0 })?;
        let Some(s) = &r.solution else { continue };
        row(None, "objective", s.objective)?;
        if let Some(rank) = s.rank {
            row(None, "rank", rank as f64)?;
        }
        for k in 0..s.p_gen.len() {
            let b = Some(k + 1);
            row(b, "p_gen", s.p_gen[k])?;
            row(b, "q_gen", s.q_gen[k])?;
            row(b, "price_p", s.duals.lmp_p[k])?;
            row(b, "price_q", s.duals.lmp_q[k])?;
            row(b, "v_sq", s.v_sq[k])?;
        }
        if let Some(st) = &r.settlement {
            row(None, "ms", st.ms)?;
            row(None, "ms_formula", st.ms_formula)?;
            row(None, "loc", st.loc)?;
            for (k, x) in st.side_payments.iter().enumerate() {
                row(Some(k + 1), "side_payment", *x)?;
            }
        }
        if let Some(g) = &r.gap {
            row(None, "gap", g.gap)?;
            row(None, "gap_loc", g.loc)?;
            row(None, "gap_prs", g.prs)?;
            row(None, "gap_residual", g.residual)?;
            for (k, x) in g.side_payments.iter().enumerate() {
                row(Some(k + 1), "gap_side_payment", *x)?;
            }
        }
        if let Some(c) = &r.radial {
            row(None, "radial_objective_gap", c.objective_gap)?;
            row(None, "radial_price_gap_p", c.price_gap_p)?;
            row(None, "radial_price_gap_q", c.price_gap_q)?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Per-bus price table with header `bus,rho_p,rho_q`, ordered by bus id.
pub fn emit_heatmap_data<W: io::Write>(price_p: &[f64], price_q: &[f64], w: W) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["bus", "rho_p", "rho_q"])?;
    for (k, (p, q)) in price_p.iter().zip(price_q).enumerate() {
        out.write_record([(k + 1).to_string(), format!("{p:.10}"), format!("{q:.10}")])?;
    }
    out.flush()?;
    Ok(())
}
