//! CSV layouts of the published tables. Headers are fixed so downstream
//! tooling (and the schema tests) can rely on them.

use effx_core::stats::Describe;

pub const PANEL_A_HEADER: [&str; 7] =
    ["row", "TE", "TEBC", "TEBC lower bound", "TEBC upper bound", "Bootstrap performance", "N"];
pub const STRATA_HEADER: [&str; 8] = ["panel", "stratum", "Mean", "SD", "IQR", "Min", "Max", "N"];
pub const SCORES_HEADER: [&str; 10] =
    ["id", "group", "stratum", "te_farrell", "te", "tebc", "bias", "ci_low", "ci_high", "performance"];
pub const DIFFERENCES_HEADER: [&str; 6] = ["stratum", "mean_a", "mean_b", "difference", "p_value", "significant_10pct"];
pub const TABLE5_ROWS: [&str; 3] = ["Test statistic", "Critical-value", "P-value"];
pub const A1_HEADER: [&str; 7] =
    ["arm", "model", "Chosen parameters", "AUROC score", "AUPRC score", "CV AUROC score", "CV AUPRC score"];
pub const RANKING_HEADER: [&str; 4] = ["rank", "feature_index", "feature", "mean_abs_shap"];
pub const DENSITY_HEADER: [&str; 3] = ["group", "x", "density"];
pub const CDF_HEADER: [&str; 5] = ["z", "cdf_a", "cdf_b", "integrated_cdf_a", "integrated_cdf_b"];

/// Plain decimal with round-trip precision; `NA` for NaN.
pub fn num(v: f64) -> String {
    if v.is_nan() {
        "NA".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        v.to_string()
    }
}

pub struct Csv {
    w: csv::Writer<Vec<u8>>,
}

impl Csv {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(header.iter().map(|s| s.as_ref())).expect("in-memory write");
        Csv { w }
    }

    pub fn row<S: AsRef<str>>(&mut self, fields: &[S]) {
        self.w.write_record(fields.iter().map(|s| s.as_ref())).expect("in-memory write");
    }

    pub fn finish(self) -> Vec<u8> {
        self.w.into_inner().expect("in-memory flush")
    }
}

pub struct PanelARow {
    pub label: String,
    pub te: f64,
    pub tebc: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub performance: f64,
    pub n: usize,
}

pub fn panel_a(rows: &[PanelARow]) -> Vec<u8> {
    let mut c = Csv::new(&PANEL_A_HEADER);
    for r in rows {
        c.row(&[r.label.clone(), num(r.te), num(r.tebc), num(r.ci_low), num(r.ci_high), num(r.performance), r.n.to_string()]);
    }
    c.finish()
}

pub fn strata(rows: &[(String, String, Describe)]) -> Vec<u8> {
    let mut c = Csv::new(&STRATA_HEADER);
    for (panel, stratum, d) in rows {
        c.row(&[panel.clone(), stratum.clone(), num(d.mean), num(d.sd), num(d.iqr), num(d.min), num(d.max), d.n.to_string()]);
    }
    c.finish()
}

/// Column headers of the dominance table: one column per outcome set and order.
pub fn table5_header(frontiers: &[String]) -> Vec<String> {
    let mut h = vec!["H0".to_string(), "row".to_string()];
    for f in frontiers {
        for s in 1..=2 {
            h.push(format!("{f} s={s}"));
        }
    }
    h
}

pub fn c1_header(a: &str, b: &str) -> Vec<String> {
    vec![
        "panel".into(),
        "stratum".into(),
        format!("{a} Efficiency difference (%)"),
        format!("{a} Delta N"),
        format!("{b} Efficiency difference (%)"),
        format!("{b} Delta N"),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_and_quoting() {
        assert_eq!(num(f64::NAN), "NA");
        assert_eq!(num(0.1), "0.1");
        assert_eq!(num(1.0), "1");
        let mut c = Csv::new(&["a", "b"]);
        c.row(&["x, y", "1"]);
        assert_eq!(String::from_utf8(c.finish()).unwrap(), "a,b\n\"x, y\",1\n");
    }

    #[test]
    fn headers() {
        assert_eq!(table5_header(&["cog".into()]), ["H0", "row", "cog s=1", "cog s=2"]);
        assert_eq!(c1_header("A", "B")[2], "A Efficiency difference (%)");
        assert_eq!(&STRATA_HEADER[2..], ["Mean", "SD", "IQR", "Min", "Max", "N"]);
    }
}
