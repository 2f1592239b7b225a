use std::fmt::Display;
use std::fs;
use std::path::Path;

use gtv_core::jsonfmt::fmt_f64;
use gtv_core::rightinv::DiscreteMeasure;

/// Key/value report followed by pass/fail lines.
#[derive(Debug, Default)]
pub(crate) struct Report {
    rows: Vec<(String, String)>,
    checks: Vec<(String, bool)>,
}

impl Report {
    pub fn row(&mut self, key: &str, value: impl Display) {
        self.rows.push((key.to_string(), value.to_string()));
    }

    pub fn num(&mut self, key: &str, value: f64) {
        self.row(key, fmt_f64(value));
    }

    pub fn check(&mut self, what: String, pass: bool) {
        self.checks.push((what, pass));
    }

    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.1)
    }

    pub fn render(&self) -> String {
        let width = self.rows.iter().map(|r| r.0.len()).max().unwrap_or(0);
        let mut out = String::new();
        for (k, v) in &self.rows {
            out.push_str(&format!("{k:<width$}  {v}\n"));
        }
        for (what, pass) in &self.checks {
            out.push_str(&format!("{}  {what}\n", if *pass { "PASS" } else { "FAIL" }));
        }
        out
    }
}

pub(crate) fn write(dir: &Path, name: &str, text: &str) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), text)
}

/// `knot,weight` rows; planar knots get `knot_x,knot_y,weight`.
pub(crate) fn innovation_csv(m: &DiscreteMeasure) -> String {
    let planar = m.atoms().first().is_some_and(|a| a.0.dim() == 2);
    let mut out = String::from(if planar { "knot_x,knot_y,weight\n" } else { "knot,weight\n" });
    for (p, w) in m.atoms() {
        if planar {
            out.push_str(&format!("{},{},{}\n", fmt_f64(p.x()), fmt_f64(p.y()), fmt_f64(*w)));
        } else {
            out.push_str(&format!("{},{}\n", fmt_f64(p.x()), fmt_f64(*w)));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use gtv_core::Point;

    #[test]
    fn report_layout() {
        let mut r = Report::default();
        r.row("M", 3);
        r.num("beta", 2.0);
        r.check("K <= M".into(), true);
        assert_eq!(r.render(), "M     3\nbeta  2.0000000000000000e0\nPASS  K <= M\n");
        r.check("other".into(), false);
        assert!(!r.pass());
    }

    #[test]
    fn innovation_columns() {
        let m = DiscreteMeasure::new(vec![(Point::from(0.5), -1.0)]).unwrap();
        assert_eq!(innovation_csv(&m), "knot,weight\n5.0000000000000000e-1,-1.0000000000000000e0\n");
        assert_eq!(innovation_csv(&DiscreteMeasure::default()), "knot,weight\n");
    }
}
