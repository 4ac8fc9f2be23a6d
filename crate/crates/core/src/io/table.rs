//! Study tables as CSV and as aligned text.

use std::fmt::Write as _;

use crate::experiments::{EocTable, Metric};

fn opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:?}")).unwrap_or_default()
}

/// One row per resolution: errors and orders per metric, penalty terms and
/// the run status. Missing values are empty cells.
pub fn eoc_csv(table: &EocTable) -> String {
    let mut head = vec!["n".to_string(), "h".into(), "dt".into(), "eps".into()];
    for m in Metric::ALL {
        head.push(m.name().into());
        head.push(format!("eoc_{}", m.name()));
    }
    head.extend(["penalty", "solid_velocity", "newton_iters", "status"].map(String::from));
    let mut s = head.join(",") + "\n";
    for r in &table.rows {
        let mut cells = vec![
            r.n.to_string(),
            format!("{:?}", r.h),
            format!("{:?}", r.dt),
            format!("{:?}", r.eps),
        ];
        for m in Metric::ALL {
            cells.push(opt(r.error(m)));
            cells.push(opt(r.order(m)));
        }
        cells.push(opt(r.penalty));
        cells.push(opt(r.solid_velocity));
        cells.push(r.newton_iters.to_string());
        cells.push(match &r.failure {
            None => "ok".into(),
            Some(e) => format!("\"failed: {}\"", e.replace('"', "'").replace('\n', " ")),
        });
        s += &cells.join(",");
        s.push('\n');
    }
    s
}

/// Human-readable table; orders that are undefined print as `-`.
pub fn eoc_text(table: &EocTable) -> String {
    let mut s = String::new();
    let _ = write!(s, "{:>5} {:>10}", "n", "h");
    for m in Metric::ALL {
        let _ = write!(s, " {:>14} {:>6}", m.name(), "eoc");
    }
    let _ = writeln!(s, " {:>12} {:>12}", "penalty", "solid_u");
    for r in &table.rows {
        let _ = write!(s, "{:>5} {:>10.4e}", r.n, r.h);
        if let Some(e) = &r.failure {
            let _ = writeln!(s, "  failed: {e}");
            continue;
        }
        for m in Metric::ALL {
            let e = r
                .error(m)
                .map(|v| format!("{v:.4e}"))
                .unwrap_or_else(|| "-".into());
            let o = r
                .order(m)
                .map(|v| format!("{v:.2}"))
                .unwrap_or_else(|| "-".into());
            let _ = write!(s, " {e:>14} {o:>6}");
        }
        let p = r
            .penalty
            .map(|v| format!("{v:.4e}"))
            .unwrap_or_else(|| "-".into());
        let u = r
            .solid_velocity
            .map(|v| format!("{v:.4e}"))
            .unwrap_or_else(|| "-".into());
        let _ = writeln!(s, " {p:>12} {u:>12}");
    }
    s
}
