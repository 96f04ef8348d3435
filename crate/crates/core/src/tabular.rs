//! Unit-level data model, CSV ingestion, grouping, label construction and
//! group summaries.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::stats;

/// Cells treated as a missing covariate.
pub const MISSING_TOKENS: [&str; 2] = ["", "NA"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DmuRecord {
    pub id: String,
    pub group: String,
    pub inputs: Vec<f64>,
    pub outputs: Vec<f64>,
    /// `NaN` marks a missing value.
    pub covariates: Vec<f64>,
}

impl DmuRecord {
    /// Checks the record invariants; returns the offending column index
    /// (within inputs or outputs) and a message on failure.
    fn check(&self) -> std::result::Result<(), (Role, usize, &'static str)> {
        for (j, &x) in self.inputs.iter().enumerate() {
            if !x.is_finite() {
                return Err((Role::Input, j, "input must be a finite number"));
            }
            if x < 0.0 {
                return Err((Role::Input, j, "input must be nonnegative"));
            }
        }
        if !self.inputs.iter().any(|&x| x > 0.0) {
            return Err((Role::Input, 0, "at least one input must be strictly positive"));
        }
        for (j, &y) in self.outputs.iter().enumerate() {
            if !y.is_finite() {
                return Err((Role::Output, j, "output must be a finite number"));
            }
            if y <= 0.0 {
                return Err((Role::Output, j, "output must be strictly positive"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Role {
    Input,
    Output,
}

/// Column-role mapping for [`load_csv`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub id: String,
    pub group: String,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    #[serde(default)]
    pub covariates: Vec<String>,
}

impl Schema {
    fn validate(&self) -> Result<()> {
        if self.inputs.is_empty() || self.outputs.is_empty() {
            return Err(Error::Schema("at least one input and one output column required".into()));
        }
        let mut seen = HashSet::new();
        let all = [&self.id, &self.group]
            .into_iter()
            .chain(&self.inputs)
            .chain(&self.outputs)
            .chain(&self.covariates);
        for name in all {
            if !seen.insert(name.as_str()) {
                return Err(Error::Schema(format!("column '{name}' assigned more than one role")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DmuPanel {
    pub records: Vec<DmuRecord>,
    pub input_names: Vec<String>,
    pub output_names: Vec<String>,
    pub covariate_names: Vec<String>,
}

impl DmuPanel {
    /// Builds a panel, validating shapes, id uniqueness and record invariants.
    pub fn new(
        records: Vec<DmuRecord>,
        input_names: Vec<String>,
        output_names: Vec<String>,
        covariate_names: Vec<String>,
    ) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::invalid("panel needs at least one record"));
        }
        let (m, s, p) = (input_names.len(), output_names.len(), covariate_names.len());
        let mut ids = HashSet::new();
        for (i, r) in records.iter().enumerate() {
            if r.inputs.len() != m || r.outputs.len() != s || r.covariates.len() != p {
                return Err(Error::invalid(format!("record {} ('{}') has mismatched dimensions", i, r.id)));
            }
            if !ids.insert(r.id.as_str()) {
                return Err(Error::Data { row: i + 1, column: "id".into(), message: format!("duplicate id '{}'", r.id) });
            }
            if let Err((role, j, msg)) = r.check() {
                let column = match role {
                    Role::Input => input_names[j].clone(),
                    Role::Output => output_names[j].clone(),
                };
                return Err(Error::Data { row: i + 1, column, message: msg.into() });
            }
        }
        Ok(DmuPanel { records, input_names, output_names, covariate_names })
    }

    /// Convenience constructor from raw input/output rows, ids `"0"`, `"1"`, ...
    pub fn from_matrices(inputs: &[Vec<f64>], outputs: &[Vec<f64>]) -> Result<Self> {
        if inputs.len() != outputs.len() || inputs.is_empty() {
            return Err(Error::invalid("inputs and outputs must have the same nonzero row count"));
        }
        let m = inputs[0].len();
        let s = outputs[0].len();
        let records = inputs
            .iter()
            .zip(outputs)
            .enumerate()
            .map(|(i, (x, y))| DmuRecord {
                id: i.to_string(),
                group: "all".into(),
                inputs: x.clone(),
                outputs: y.clone(),
                covariates: Vec::new(),
            })
            .collect();
        Self::new(
            records,
            (0..m).map(|j| format!("x{j}")).collect(),
            (0..s).map(|j| format!("y{j}")).collect(),
            Vec::new(),
        )
    }

    pub fn n(&self) -> usize {
        self.records.len()
    }
    pub fn m(&self) -> usize {
        self.input_names.len()
    }
    pub fn s(&self) -> usize {
        self.output_names.len()
    }
    pub fn p(&self) -> usize {
        self.covariate_names.len()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.records.iter().map(|r| r.id.as_str())
    }

    /// Distinct group labels in order of first appearance.
    pub fn groups(&self) -> Vec<String> {
        let mut seen = HashSet::new();
        self.records
            .iter()
            .filter(|r| seen.insert(r.group.as_str()))
            .map(|r| r.group.clone())
            .collect()
    }

    /// Sub-panel with the records whose group equals `label`, order preserved.
    pub fn split_by_group(&self, label: &str) -> Result<DmuPanel> {
        let records: Vec<DmuRecord> = self.records.iter().filter(|r| r.group == label).cloned().collect();
        if records.is_empty() {
            return Err(Error::invalid(format!("group label '{label}' not present in panel")));
        }
        Ok(DmuPanel { records, ..self.empty_like() })
    }

    /// Same column layout, no records.
    fn empty_like(&self) -> DmuPanel {
        DmuPanel {
            records: Vec::new(),
            input_names: self.input_names.clone(),
            output_names: self.output_names.clone(),
            covariate_names: self.covariate_names.clone(),
        }
    }

    /// Keeps the records for which `keep` returns true.
    pub fn filter(&self, mut keep: impl FnMut(usize, &DmuRecord) -> bool) -> Result<DmuPanel> {
        let records: Vec<DmuRecord> =
            self.records.iter().enumerate().filter(|(i, r)| keep(*i, r)).map(|(_, r)| r.clone()).collect();
        if records.is_empty() {
            return Err(Error::invalid("filter removed every record"));
        }
        Ok(DmuPanel { records, ..self.empty_like() })
    }

    /// Covariate matrix (row-major, `NaN` = missing).
    pub fn covariate_matrix(&self) -> Vec<Vec<f64>> {
        self.records.iter().map(|r| r.covariates.clone()).collect()
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["id".to_string(), "group".to_string()];
        header.extend(self.input_names.iter().cloned());
        header.extend(self.output_names.iter().cloned());
        header.extend(self.covariate_names.iter().cloned());
        w.write_record(&header)?;
        for r in &self.records {
            let mut row = vec![r.id.clone(), r.group.clone()];
            row.extend(r.inputs.iter().map(|v| v.to_string()));
            row.extend(r.outputs.iter().map(|v| v.to_string()));
            row.extend(r.covariates.iter().map(|v| if v.is_nan() { "NA".to_string() } else { v.to_string() }));
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::Io { path: path.display().to_string(), source: e })?;
        Ok(())
    }

    /// Schema matching the layout produced by [`DmuPanel::write_csv`].
    pub fn schema(&self) -> Schema {
        Schema {
            id: "id".into(),
            group: "group".into(),
            inputs: self.input_names.clone(),
            outputs: self.output_names.clone(),
            covariates: self.covariate_names.clone(),
        }
    }
}

fn parse_required(tok: &str, row: usize, column: &str) -> Result<f64> {
    let t = tok.trim();
    if t.is_empty() {
        return Err(Error::Data { row, column: column.into(), message: "empty cell".into() });
    }
    t.parse::<f64>().map_err(|_| Error::Data {
        row,
        column: column.into(),
        message: format!("non-numeric token '{t}'"),
    })
}

fn parse_optional(tok: &str, row: usize, column: &str) -> Result<f64> {
    let t = tok.trim();
    if MISSING_TOKENS.contains(&t) {
        return Ok(f64::NAN);
    }
    let v = t.parse::<f64>().map_err(|_| Error::Data {
        row,
        column: column.into(),
        message: format!("non-numeric token '{t}'"),
    })?;
    if v.is_nan() {
        return Ok(f64::NAN);
    }
    Ok(v)
}

/// Reads a header-first, comma-separated UTF-8 file into a validated panel.
/// Row numbers in errors are 1-based file lines (the header is line 1).
pub fn load_csv(path: impl AsRef<Path>, schema: &Schema) -> Result<DmuPanel> {
    let path = path.as_ref();
    schema.validate()?;
    let file = std::fs::File::open(path).map_err(|e| Error::Io { path: path.display().to_string(), source: e })?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(std::io::BufReader::new(file));
    let headers = rdr.headers()?.clone();
    let index: HashMap<&str, usize> = headers.iter().enumerate().map(|(i, h)| (h.trim(), i)).collect();
    let col = |name: &str| -> Result<usize> {
        index.get(name).copied().ok_or_else(|| Error::Schema(format!("unknown column '{name}'")))
    };
    let id_col = col(&schema.id)?;
    let group_col = col(&schema.group)?;
    let in_cols = schema.inputs.iter().map(|c| col(c)).collect::<Result<Vec<_>>>()?;
    let out_cols = schema.outputs.iter().map(|c| col(c)).collect::<Result<Vec<_>>>()?;
    let cov_cols = schema.covariates.iter().map(|c| col(c)).collect::<Result<Vec<_>>>()?;

    let mut records = Vec::new();
    let mut ids: HashMap<String, usize> = HashMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec?;
        let get = |c: usize| rec.get(c).unwrap_or("");
        let id = get(id_col).trim().to_string();
        if id.is_empty() {
            return Err(Error::Data { row, column: schema.id.clone(), message: "empty id".into() });
        }
        if let Some(prev) = ids.insert(id.clone(), row) {
            return Err(Error::Data {
                row,
                column: schema.id.clone(),
                message: format!("duplicate id '{id}' (first seen on row {prev})"),
            });
        }
        let inputs = in_cols
            .iter()
            .zip(&schema.inputs)
            .map(|(&c, name)| parse_required(get(c), row, name))
            .collect::<Result<Vec<_>>>()?;
        let outputs = out_cols
            .iter()
            .zip(&schema.outputs)
            .map(|(&c, name)| parse_required(get(c), row, name))
            .collect::<Result<Vec<_>>>()?;
        let covariates = cov_cols
            .iter()
            .zip(&schema.covariates)
            .map(|(&c, name)| parse_optional(get(c), row, name))
            .collect::<Result<Vec<_>>>()?;
        let record = DmuRecord { id, group: get(group_col).trim().to_string(), inputs, outputs, covariates };
        if let Err((role, j, msg)) = record.check() {
            let column = match role {
                Role::Input => schema.inputs[j].clone(),
                Role::Output => schema.outputs[j].clone(),
            };
            return Err(Error::Data { row, column, message: msg.into() });
        }
        records.push(record);
    }
    DmuPanel::new(records, schema.inputs.clone(), schema.outputs.clone(), schema.covariates.clone())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    Output,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Rts {
    Crs,
    Vrs,
}

/// Which panel columns enter a frontier, and under which returns to scale.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrontierSpec {
    pub orientation: Orientation,
    pub rts: Rts,
    pub input_columns: Vec<usize>,
    pub output_columns: Vec<usize>,
}

impl FrontierSpec {
    /// Output-oriented spec using every input and output column of `panel`.
    pub fn all_columns(panel: &DmuPanel, rts: Rts) -> Self {
        FrontierSpec {
            orientation: Orientation::Output,
            rts,
            input_columns: (0..panel.m()).collect(),
            output_columns: (0..panel.s()).collect(),
        }
    }

    pub fn with_rts(&self, rts: Rts) -> Self {
        FrontierSpec { rts, ..self.clone() }
    }

    pub fn validate(&self, panel: &DmuPanel) -> Result<()> {
        fn check(cols: &[usize], bound: usize, what: &str) -> Result<()> {
            if cols.is_empty() {
                return Err(Error::invalid(format!("{what} column list is empty")));
            }
            let mut seen = HashSet::new();
            for &c in cols {
                if c >= bound {
                    return Err(Error::invalid(format!("{what} column {c} out of bounds ({bound})")));
                }
                if !seen.insert(c) {
                    return Err(Error::invalid(format!("{what} column {c} listed twice")));
                }
            }
            Ok(())
        }
        check(&self.input_columns, panel.m(), "input")?;
        check(&self.output_columns, panel.s(), "output")
    }

    /// Selected `(inputs, outputs)` rows of every record.
    pub fn extract(&self, panel: &DmuPanel) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let xs = panel.records.iter().map(|r| self.input_columns.iter().map(|&c| r.inputs[c]).collect()).collect();
        let ys = panel.records.iter().map(|r| self.output_columns.iter().map(|&c| r.outputs[c]).collect()).collect();
        (xs, ys)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMode {
    /// Unweighted mean of the pooled score vector.
    RegionalMean,
    Explicit(f64),
}

/// `1` where the score is strictly above the threshold.
pub fn binarize_efficiency(scores: &[f64], mode: ThresholdMode) -> Result<Vec<u8>> {
    if scores.is_empty() {
        return Err(Error::invalid("cannot binarize an empty score vector"));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::invalid("scores must be finite"));
    }
    let t = match mode {
        ThresholdMode::RegionalMean => stats::mean(scores),
        ThresholdMode::Explicit(t) => t,
    };
    Ok(scores.iter().map(|&s| u8::from(s > t)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableSummary {
    pub variable: String,
    pub mean_a: f64,
    pub sd_a: f64,
    pub n_a: usize,
    pub mean_b: f64,
    pub sd_b: f64,
    pub n_b: usize,
    pub difference: f64,
    pub t_statistic: Option<f64>,
    pub p_value: Option<f64>,
    /// `None` when a group has fewer than two non-missing values.
    pub significant: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub group_a: String,
    pub group_b: String,
    pub level: f64,
    pub variables: Vec<VariableSummary>,
}

pub const SUMMARY_LEVEL: f64 = 0.10;

/// Two-sided Welch t-test. Returns `(t, p)`; `None` when undefined.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Option<(f64, f64)> {
    if a.len() < 2 || b.len() < 2 {
        return None;
    }
    let (va, vb) = (stats::variance(a) / a.len() as f64, stats::variance(b) / b.len() as f64);
    let diff = stats::mean(a) - stats::mean(b);
    let se2 = va + vb;
    if se2 <= 0.0 {
        // both groups constant
        return Some(if diff == 0.0 { (0.0, 1.0) } else { (diff.signum() * f64::INFINITY, 0.0) });
    }
    let t = diff / se2.sqrt();
    let df = se2 * se2 / (va * va / (a.len() - 1) as f64 + vb * vb / (b.len() - 1) as f64);
    let dist = StudentsT::new(0.0, 1.0, df).ok()?;
    let p = 2.0 * (1.0 - dist.cdf(t.abs()));
    Some((t, p.clamp(0.0, 1.0)))
}

/// Per-variable means, SDs and Welch significance at 10% for two groups.
pub fn group_summary(panel: &DmuPanel, group_a: &str, group_b: &str) -> Result<GroupSummary> {
    let a = panel.split_by_group(group_a)?;
    let b = panel.split_by_group(group_b)?;
    let mut variables = Vec::new();
    let columns = panel
        .input_names
        .iter()
        .enumerate()
        .map(|(j, n)| (n, Box::new(move |r: &DmuRecord| r.inputs[j]) as Box<dyn Fn(&DmuRecord) -> f64>))
        .chain(panel.output_names.iter().enumerate().map(|(j, n)| {
            (n, Box::new(move |r: &DmuRecord| r.outputs[j]) as Box<dyn Fn(&DmuRecord) -> f64>)
        }))
        .chain(panel.covariate_names.iter().enumerate().map(|(j, n)| {
            (n, Box::new(move |r: &DmuRecord| r.covariates[j]) as Box<dyn Fn(&DmuRecord) -> f64>)
        }));
    for (name, get) in columns {
        let va: Vec<f64> = a.records.iter().map(&get).filter(|v| !v.is_nan()).collect();
        let vb: Vec<f64> = b.records.iter().map(&get).filter(|v| !v.is_nan()).collect();
        let (mean_a, mean_b) = (stats::mean(&va), stats::mean(&vb));
        let test = welch_t_test(&va, &vb);
        variables.push(VariableSummary {
            variable: name.clone(),
            mean_a,
            sd_a: stats::std_dev(&va),
            n_a: va.len(),
            mean_b,
            sd_b: stats::std_dev(&vb),
            n_b: vb.len(),
            difference: mean_a - mean_b,
            t_statistic: test.map(|t| t.0),
            p_value: test.map(|t| t.1),
            significant: test.map(|t| t.1 < SUMMARY_LEVEL),
        });
    }
    Ok(GroupSummary { group_a: group_a.into(), group_b: group_b.into(), level: SUMMARY_LEVEL, variables })
}

impl GroupSummary {
    /// CSV with one row per variable.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("variable,mean_a,sd_a,n_a,mean_b,sd_b,n_b,difference,t,p_value,significant_10pct\n");
        for v in &self.variables {
            let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_else(|| "NA".into());
            let sig = match v.significant {
                Some(true) => "yes",
                Some(false) => "no",
                None => "untestable",
            };
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                v.variable,
                v.mean_a,
                v.sd_a,
                v.n_a,
                v.mean_b,
                v.sd_b,
                v.n_b,
                v.difference,
                opt(v.t_statistic),
                opt(v.p_value),
                sig
            );
        }
        out
    }

    /// Markdown rendering in the summary-table layout: non-significant
    /// differences are shown in bold.
    pub fn render_table(&self) -> String {
        let mut out = format!(
            "| Variable | {a} mean | {a} SD | {b} mean | {b} SD | Difference |\n|---|---|---|---|---|---|\n",
            a = self.group_a,
            b = self.group_b
        );
        for v in &self.variables {
            let diff = match v.significant {
                Some(true) => format!("{:.3}", v.difference),
                Some(false) => format!("**{:.3}**", v.difference),
                None => format!("{:.3} (untestable)", v.difference),
            };
            let _ = writeln!(
                out,
                "| {} | {:.3} | {:.3} | {:.3} | {:.3} | {} |",
                v.variable, v.mean_a, v.sd_a, v.mean_b, v.sd_b, diff
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn schema_1x1() -> Schema {
        Schema {
            id: "id".into(),
            group: "type".into(),
            inputs: vec!["x".into()],
            outputs: vec!["y".into()],
            covariates: vec!["c".into()],
        }
    }

    fn write(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn minimal_file_loads() {
        let f = write("id,type,x,y,c\na,public,1,1,0.5\nb,public,2,4,NA\nc,private,3,3,\n");
        let p = load_csv(f.path(), &schema_1x1()).unwrap();
        assert_eq!((p.n(), p.m(), p.s(), p.p()), (3, 1, 1, 1));
        assert!(p.records[1].covariates[0].is_nan());
        assert!(p.records[2].covariates[0].is_nan());
    }

    #[test]
    fn empty_output_cell_names_row_and_column() {
        let f = write("id,type,x,y,c\na,public,1,1,0\nb,public,2,,0\n");
        match load_csv(f.path(), &schema_1x1()) {
            Err(Error::Data { row, column, .. }) => {
                assert_eq!(row, 3);
                assert_eq!(column, "y");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn load_errors() {
        assert!(matches!(load_csv("/nonexistent/file.csv", &schema_1x1()), Err(Error::Io { .. })));
        let f = write("id,type,x,y\na,public,1,1\n");
        assert!(matches!(load_csv(f.path(), &schema_1x1()), Err(Error::Schema(_))));
        let f = write("id,type,x,y,c\na,public,abc,1,0\n");
        assert!(matches!(load_csv(f.path(), &schema_1x1()), Err(Error::Data { row: 2, .. })));
        let f = write("id,type,x,y,c\na,public,1,1,0\na,public,1,2,0\n");
        assert!(matches!(load_csv(f.path(), &schema_1x1()), Err(Error::Data { row: 3, .. })));
        let f = write("id,type,x,y,c\na,public,1,0,0\n");
        assert!(matches!(load_csv(f.path(), &schema_1x1()), Err(Error::Data { .. })));
        let f = write("id,type,x,y,c\na,public,0,1,0\n");
        assert!(matches!(load_csv(f.path(), &schema_1x1()), Err(Error::Data { .. })));
    }

    #[test]
    fn split_by_group_subsets() {
        let f = write("id,type,x,y,c\na,public,1,1,0\nb,private,2,4,0\nc,public,3,3,0\n");
        let p = load_csv(f.path(), &schema_1x1()).unwrap();
        let pubs = p.split_by_group("public").unwrap();
        assert_eq!(pubs.n(), 2);
        assert_eq!(pubs.ids().collect::<Vec<_>>(), vec!["a", "c"]);
        assert!(p.split_by_group("charter").is_err());
        let total: usize = p.groups().iter().map(|g| p.split_by_group(g).unwrap().n()).sum();
        assert_eq!(total, p.n());
    }

    #[test]
    fn binarize_examples() {
        assert_eq!(binarize_efficiency(&[0.7, 0.9], ThresholdMode::RegionalMean).unwrap(), vec![0, 1]);
        assert_eq!(binarize_efficiency(&[0.8; 4], ThresholdMode::RegionalMean).unwrap(), vec![0; 4]);
        assert_eq!(binarize_efficiency(&[0.1, 0.5, 0.9], ThresholdMode::Explicit(0.5)).unwrap(), vec![0, 0, 1]);
        assert!(binarize_efficiency(&[], ThresholdMode::RegionalMean).is_err());
    }

    #[test]
    fn frontier_spec_validation() {
        let p = DmuPanel::from_matrices(&[vec![1.0, 2.0]], &[vec![1.0]]).unwrap();
        let mut spec = FrontierSpec::all_columns(&p, Rts::Vrs);
        assert!(spec.validate(&p).is_ok());
        spec.input_columns = vec![0, 0];
        assert!(spec.validate(&p).is_err());
        spec.input_columns = vec![2];
        assert!(spec.validate(&p).is_err());
        spec.input_columns = vec![];
        assert!(spec.validate(&p).is_err());
    }

    #[test]
    fn welch_closed_form() {
        // a = b + 10 with identical spread: t = 10 / sqrt(2 s^2 / n)
        let b: Vec<f64> = (0..100).map(|i| ((i * 37) % 100) as f64 / 100.0 * 3.4).collect();
        let a: Vec<f64> = b.iter().map(|v| v + 10.0).collect();
        let (t, p) = welch_t_test(&a, &b).unwrap();
        let s2 = stats::variance(&b);
        let expected = 10.0 / (2.0 * s2 / 100.0).sqrt();
        assert!((t - expected).abs() < 1e-9);
        assert!(p < 1e-10);
    }
}
