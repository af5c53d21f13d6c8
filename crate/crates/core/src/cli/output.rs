//! CSV rows and the gnuplot script. Floats use Rust's shortest round-trip formatting, so output
//! is locale-free and byte-identical across runs.

use std::fmt::Write;

use crate::flow::DiagnosticsRecord;

pub fn diagnostics_header(k: usize) -> String {
    let mut h = String::from("t,E_total,E_bending,E_tension,E_penalty,energy_identity_residual,z1");
    for mu in 1..=2 * k - 2 {
        let _ = write!(h, ",max_jump_mu{mu}");
    }
    h.push_str(",balancing_residual,constraint_violation\n");
    h
}

/// Shortest round-trip form, scientific outside `[1e-4, 1e6)`.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || ((1e-4..1e6).contains(&a)) || !x.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

pub fn diagnostics_row(r: &DiagnosticsRecord) -> String {
    let e = &r.energy;
    let fields = [r.t, e.total, e.bending, e.tension, e.penalty, r.energy_identity_residual, r.z1];
    let mut s = fields.iter().map(|&x| num(x)).collect::<Vec<_>>().join(",");
    for &j in &r.max_junction_jump {
        let _ = write!(s, ",{}", num(j));
    }
    let _ = writeln!(s, ",{},{}", num(r.balancing_residual), num(r.constraint_violation));
    s
}

/// Energy history and the final curve from `diagnostics.csv` / `trajectory.csv`.
pub fn gnuplot_script(dim: usize) -> String {
    let (x, y) = if dim >= 2 { (4, 5) } else { (3, 4) };
    let mut s = String::new();
    s.push_str("set datafile separator ','\n");
    s.push_str("set key autotitle columnhead\n");
    s.push_str("set terminal pngcairo size 1200,500\n");
    s.push_str("set output 'plot.png'\n");
    s.push_str("set multiplot layout 1,2\n");
    s.push_str("set logscale y\nset xlabel 't'\nplot 'diagnostics.csv' using 1:2 with lines, '' using 1:7 with lines\n");
    s.push_str("unset logscale y\n");
    let _ = writeln!(
        s,
        "stats 'trajectory.csv' using {} nooutput\nset xlabel '{}'\nplot 'trajectory.csv' using {x}:(column({}) == STATS_max ? column({y}) : 1/0) with points pt 7 ps 0.4 title 'final'",
        dim + 4,
        if dim >= 2 { "coord_1" } else { "x" },
        dim + 4
    );
    s.push_str("unset multiplot\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::EnergyBreakdown;

    #[test]
    fn header_and_row_widths_match() {
        let r = DiagnosticsRecord {
            t: 0.5,
            energy: EnergyBreakdown { bending: 1.0, tension: 0.0, penalty: 0.25, total: 1.25 },
            energy_identity_residual: 1e-3,
            z1: 2e-2,
            max_junction_jump: vec![0.0; 4],
            balancing_residual: 0.1,
            constraint_violation: 0.0,
        };
        let h = diagnostics_header(3);
        let row = diagnostics_row(&r);
        assert_eq!(h.split(',').count(), row.split(',').count());
        assert!(h.contains("max_jump_mu4,balancing_residual"));
        assert!(row.starts_with("0.5,1.25,1,0,0.25,0.001,0.02,"));
        assert_eq!(num(7.8e-14), "7.8e-14");
        assert_eq!(num(-2.5e7), "-2.5e7");
    }

    #[test]
    fn plot_references_csvs() {
        let s = gnuplot_script(2);
        assert!(s.contains("diagnostics.csv") && s.contains("trajectory.csv"));
    }
}
