//! Long-format data model, CSV ingestion, and the variance-regime map.
//!
//! A dataset is a collection of per-subject biomarker series sharing one
//! basis. When observations carry period labels, each label becomes a
//! variance regime: observations map to regimes directly, and basis
//! coefficients map to the regime containing their Greville abscissa.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::basis::{build_knots, BasisSpec, SparseRow};
use crate::error::{Error, Result};

/// One subject's observed series plus its cross-sectional outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectSeries {
    pub id: String,
    /// Observation times in seconds, strictly increasing.
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// Per-observation period labels; `None` for the uniform model.
    pub periods: Option<Vec<String>>,
    pub outcome: Option<u8>,
    pub covariates: Vec<f64>,
}

/// Mapping of observations and basis coefficients to variance regimes.
#[derive(Debug, Clone, PartialEq)]
pub struct RegimeMap {
    /// Regime names in first-appearance order across the dataset.
    pub names: Vec<String>,
    /// Per subject, per observation: regime index.
    pub obs: Vec<Vec<usize>>,
    /// Per subject, per basis coefficient: regime index.
    pub coef: Vec<Vec<usize>>,
}

impl RegimeMap {
    pub fn count(&self) -> usize {
        self.names.len()
    }
}

/// Validated dataset: subjects, the shared basis, and the regime map.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub subjects: Vec<SubjectSeries>,
    pub basis: BasisSpec,
    pub regimes: RegimeMap,
}

/// Column names for the long CSV; defaults match the documented schema.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ColumnMap {
    pub subject: String,
    pub time: String,
    pub value: String,
    pub period: String,
}

impl Default for ColumnMap {
    fn default() -> Self {
        Self {
            subject: "subject_id".into(),
            time: "time".into(),
            value: "value".into(),
            period: "period".into(),
        }
    }
}

/// Ingestion settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoadOptions {
    pub percentile_step: f64,
    pub degree: usize,
    /// Subjects with fewer observations are rejected (and reported).
    pub min_obs: usize,
    /// Honor period labels when present; `false` forces the uniform model.
    pub use_periods: bool,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            percentile_step: 2.0,
            degree: 3,
            min_obs: 2,
            use_periods: true,
        }
    }
}

/// What ingestion dropped or flagged, keyed by subject.
#[derive(Debug, Clone, Default)]
pub struct LoadReport {
    pub rejected: Vec<(String, String)>,
    pub warnings: Vec<String>,
}

fn parse_f64(s: &str, what: &str, path: &Path) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|_| Error::Schema {
        path: path.into(),
        message: format!("cannot parse {what} value {s:?}"),
    })
}

/// Read the long CSV (`subject_id,time,value[,period]`) and, if given, the
/// outcome CSV (`subject_id,outcome[,z1,z2,...]`), returning a validated
/// dataset plus a report of rejected subjects.
pub fn load_long_csv(
    long_path: &Path,
    outcome_path: Option<&Path>,
    columns: &ColumnMap,
    opts: &LoadOptions,
) -> Result<(Dataset, LoadReport)> {
    let mut reader = csv_reader(long_path)?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let subject_idx = col(&columns.subject).ok_or_else(|| Error::Schema {
        path: long_path.into(),
        message: format!("missing column {:?}", columns.subject),
    })?;
    let time_idx = col(&columns.time).ok_or_else(|| Error::Schema {
        path: long_path.into(),
        message: format!("missing column {:?}", columns.time),
    })?;
    let value_idx = col(&columns.value).ok_or_else(|| Error::Schema {
        path: long_path.into(),
        message: format!("missing column {:?}", columns.value),
    })?;
    let period_idx = if opts.use_periods {
        col(&columns.period)
    } else {
        None
    };

    let mut order: Vec<String> = Vec::new();
    let mut by_subject: BTreeMap<String, SubjectSeries> = BTreeMap::new();
    for record in reader.records() {
        let record = record?;
        let id = record.get(subject_idx).unwrap_or("").to_string();
        if id.is_empty() {
            return Err(Error::Schema {
                path: long_path.into(),
                message: "empty subject id".into(),
            });
        }
        let t = parse_f64(record.get(time_idx).unwrap_or(""), "time", long_path)?;
        let x = parse_f64(record.get(value_idx).unwrap_or(""), "value", long_path)?;
        let entry = by_subject.entry(id.clone()).or_insert_with(|| {
            order.push(id.clone());
            SubjectSeries {
                id,
                times: Vec::new(),
                values: Vec::new(),
                periods: period_idx.map(|_| Vec::new()),
                outcome: None,
                covariates: Vec::new(),
            }
        });
        entry.times.push(t);
        entry.values.push(x);
        if let (Some(pi), Some(periods)) = (period_idx, entry.periods.as_mut()) {
            periods.push(record.get(pi).unwrap_or("").trim().to_string());
        }
    }
    let mut subjects: Vec<SubjectSeries> = order
        .iter()
        .map(|id| by_subject.remove(id).unwrap())
        .collect();

    if let Some(path) = outcome_path {
        attach_outcomes(path, &mut subjects)?;
    }

    let mut report = LoadReport::default();
    let mut kept = Vec::with_capacity(subjects.len());
    for mut s in subjects {
        sort_by_time(&mut s);
        if s.times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Data(format!(
                "subject {:?}: times not strictly increasing",
                s.id
            )));
        }
        if s.times.len() < opts.min_obs {
            report.rejected.push((
                s.id.clone(),
                format!("{} observation(s), need {}", s.times.len(), opts.min_obs),
            ));
            continue;
        }
        kept.push(s);
    }
    if kept.is_empty() {
        return Err(Error::Data("no subjects left after validation".into()));
    }

    let dataset = Dataset::build(kept, opts, &mut report)?;
    Ok((dataset, report))
}

fn attach_outcomes(path: &Path, subjects: &mut [SubjectSeries]) -> Result<()> {
    let mut reader = csv_reader(path)?;
    let headers = reader.headers()?.clone();
    let subject_idx = headers
        .iter()
        .position(|h| h == "subject_id")
        .ok_or_else(|| Error::Schema {
            path: path.into(),
            message: "missing column \"subject_id\"".into(),
        })?;
    let outcome_idx = headers
        .iter()
        .position(|h| h == "outcome")
        .ok_or_else(|| Error::Schema {
            path: path.into(),
            message: "missing column \"outcome\"".into(),
        })?;
    let z_idx: Vec<usize> = (0..headers.len())
        .filter(|&i| i != subject_idx && i != outcome_idx)
        .collect();
    let mut table: BTreeMap<String, (u8, Vec<f64>)> = BTreeMap::new();
    for record in reader.records() {
        let record = record?;
        let id = record.get(subject_idx).unwrap_or("").to_string();
        let raw = record.get(outcome_idx).unwrap_or("").trim();
        let y = match raw {
            "0" => 0u8,
            "1" => 1u8,
            other => {
                return Err(Error::Data(format!(
                    "subject {id:?}: outcome must be 0 or 1, got {other:?}"
                )))
            }
        };
        let mut z = Vec::with_capacity(z_idx.len());
        for &i in &z_idx {
            z.push(parse_f64(record.get(i).unwrap_or(""), "covariate", path)?);
        }
        table.insert(id, (y, z));
    }
    for s in subjects.iter_mut() {
        if let Some((y, z)) = table.get(&s.id) {
            s.outcome = Some(*y);
            s.covariates = z.clone();
        }
    }
    Ok(())
}

fn sort_by_time(s: &mut SubjectSeries) {
    let mut idx: Vec<usize> = (0..s.times.len()).collect();
    idx.sort_by(|&a, &b| s.times[a].partial_cmp(&s.times[b]).unwrap());
    if idx.windows(2).all(|w| w[0] < w[1]) {
        return;
    }
    s.times = idx.iter().map(|&i| s.times[i]).collect();
    s.values = idx.iter().map(|&i| s.values[i]).collect();
    if let Some(p) = &s.periods {
        s.periods = Some(idx.iter().map(|&i| p[i].clone()).collect());
    }
}

impl Dataset {
    /// Build the shared basis and regime map from validated subjects.
    pub fn build(
        subjects: Vec<SubjectSeries>,
        opts: &LoadOptions,
        report: &mut LoadReport,
    ) -> Result<Self> {
        let mut pooled: Vec<f64> = subjects.iter().flat_map(|s| s.times.iter().copied()).collect();
        pooled.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let basis = build_knots(&pooled, opts.percentile_step, opts.degree)?;
        let regimes = build_regime_map(&subjects, &basis, opts, report)?;
        Ok(Self {
            subjects,
            basis,
            regimes,
        })
    }

    /// Precompute design rows and flatten regime indices for the samplers.
    pub fn prepare(&self) -> Result<Prepared> {
        let n_covariates = self
            .subjects
            .iter()
            .map(|s| s.covariates.len())
            .max()
            .unwrap_or(0);
        let mut subjects = Vec::with_capacity(self.subjects.len());
        for (i, s) in self.subjects.iter().enumerate() {
            if s.covariates.len() != n_covariates && !s.covariates.is_empty() {
                return Err(Error::Data(format!(
                    "subject {:?}: expected {n_covariates} covariates, found {}",
                    s.id,
                    s.covariates.len()
                )));
            }
            let mut rows = Vec::with_capacity(s.times.len());
            for &t in &s.times {
                rows.push(self.basis.design_row(t)?);
            }
            let mut covariates = s.covariates.clone();
            covariates.resize(n_covariates, 0.0);
            subjects.push(PreparedSubject {
                id: s.id.clone(),
                values: s.values.clone(),
                rows,
                obs_regime: self.regimes.obs[i].clone(),
                coef_regime: self.regimes.coef[i].clone(),
                outcome: s.outcome.ok_or_else(|| {
                    Error::Data(format!("subject {:?}: missing outcome", s.id))
                })?,
                covariates,
            });
        }
        Ok(Prepared {
            subjects,
            basis: self.basis.clone(),
            regime_names: self.regimes.names.clone(),
            n_covariates,
        })
    }
}

fn build_regime_map(
    subjects: &[SubjectSeries],
    basis: &BasisSpec,
    opts: &LoadOptions,
    report: &mut LoadReport,
) -> Result<RegimeMap> {
    let labeled = opts.use_periods && subjects.iter().any(|s| s.periods.is_some());
    if !labeled {
        let names = vec!["all".to_string()];
        let obs = subjects.iter().map(|s| vec![0; s.times.len()]).collect();
        let coef = subjects
            .iter()
            .map(|_| vec![0; basis.basis_count()])
            .collect();
        return Ok(RegimeMap { names, obs, coef });
    }
    let mut names: Vec<String> = Vec::new();
    let mut obs = Vec::with_capacity(subjects.len());
    for s in subjects {
        let periods = s.periods.as_ref().ok_or_else(|| {
            Error::Data(format!(
                "subject {:?}: period labels missing while other subjects are labeled",
                s.id
            ))
        })?;
        let mut indices = Vec::with_capacity(periods.len());
        let mut seen: Vec<&str> = Vec::new();
        for label in periods {
            if !names.iter().any(|n| n == label) {
                names.push(label.clone());
            }
            let idx = names.iter().position(|n| n == label).unwrap();
            // Contiguity: a label may not reappear after another label.
            match seen.last() {
                Some(&last) if last == label.as_str() => {}
                _ => {
                    if seen.contains(&label.as_str()) {
                        return Err(Error::Data(format!(
                            "subject {:?}: period {label:?} is not contiguous",
                            s.id
                        )));
                    }
                    seen.push(label);
                }
            }
            indices.push(idx);
        }
        obs.push(indices);
    }
    let mut coef = Vec::with_capacity(subjects.len());
    for (s, obs_regime) in subjects.iter().zip(&obs) {
        coef.push(assign_coef_regimes(basis, &s.times, obs_regime));
    }
    // Flag Greville points outside a subject's observed range (assigned to
    // the nearest regime).
    for (s, coefs) in subjects.iter().zip(&coef) {
        let (t0, t1) = (s.times[0], *s.times.last().unwrap());
        let outside = (0..basis.basis_count())
            .filter(|&l| {
                let g = basis.greville(l);
                g < t0 || g > t1
            })
            .count();
        if outside > 0 {
            report.warnings.push(format!(
                "subject {:?}: {outside} coefficient(s) outside labeled range, assigned nearest regime (regimes: {:?})",
                s.id,
                coefs.iter().collect::<std::collections::BTreeSet<_>>()
            ));
        }
    }
    Ok(RegimeMap { names, obs, coef })
}

/// Assign each basis coefficient the regime containing its Greville
/// abscissa; points falling between regime runs (or outside the labeled
/// range) get the nearest regime.
pub fn assign_coef_regimes(
    basis: &BasisSpec,
    times: &[f64],
    obs_regime: &[usize],
) -> Vec<usize> {
    // Contiguous runs of equal regime index, with their time extents.
    let mut runs: Vec<(usize, f64, f64)> = Vec::new();
    for (j, &r) in obs_regime.iter().enumerate() {
        match runs.last_mut() {
            Some(run) if run.0 == r => run.2 = times[j],
            _ => runs.push((r, times[j], times[j])),
        }
    }
    // Boundary between run k and k+1: midpoint of the inter-run gap.
    let boundaries: Vec<f64> = runs
        .windows(2)
        .map(|w| 0.5 * (w[0].2 + w[1].1))
        .collect();
    (0..basis.basis_count())
        .map(|l| {
            let g = basis.greville(l);
            let k = boundaries.partition_point(|&b| b < g);
            runs[k].0
        })
        .collect()
}

/// Everything the likelihood and sampler need, with design rows precomputed.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub subjects: Vec<PreparedSubject>,
    pub basis: BasisSpec,
    pub regime_names: Vec<String>,
    pub n_covariates: usize,
}

impl Prepared {
    pub fn n_regimes(&self) -> usize {
        self.regime_names.len()
    }
}

#[derive(Debug, Clone)]
pub struct PreparedSubject {
    pub id: String,
    pub values: Vec<f64>,
    pub rows: Vec<SparseRow>,
    pub obs_regime: Vec<usize>,
    pub coef_regime: Vec<usize>,
    pub outcome: u8,
    pub covariates: Vec<f64>,
}

impl PreparedSubject {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn csv_reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    Ok(csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)?)
}

/// Write the long CSV in canonical form (optionally prefixed with a
/// `# key=value` comment line).
pub fn save_long_csv(path: &Path, subjects: &[SubjectSeries], comment: Option<&str>) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    if let Some(c) = comment {
        writeln!(file, "# {c}")?;
    }
    let has_periods = subjects.iter().any(|s| s.periods.is_some());
    let mut w = csv::Writer::from_writer(file);
    if has_periods {
        w.write_record(["subject_id", "time", "value", "period"])?;
    } else {
        w.write_record(["subject_id", "time", "value"])?;
    }
    for s in subjects {
        for j in 0..s.times.len() {
            let t = s.times[j].to_string();
            let v = s.values[j].to_string();
            if has_periods {
                let p = s
                    .periods
                    .as_ref()
                    .map(|p| p[j].as_str())
                    .unwrap_or("");
                w.write_record([s.id.as_str(), &t, &v, p])?;
            } else {
                w.write_record([s.id.as_str(), &t, &v])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Write the outcome CSV (`subject_id,outcome[,z1,...]`).
pub fn save_outcome_csv(
    path: &Path,
    subjects: &[SubjectSeries],
    comment: Option<&str>,
) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    if let Some(c) = comment {
        writeln!(file, "# {c}")?;
    }
    let n_z = subjects.iter().map(|s| s.covariates.len()).max().unwrap_or(0);
    let mut w = csv::Writer::from_writer(file);
    let mut header = vec!["subject_id".to_string(), "outcome".to_string()];
    for k in 0..n_z {
        header.push(format!("z{}", k + 1));
    }
    w.write_record(&header)?;
    for s in subjects {
        let Some(y) = s.outcome else { continue };
        let mut rec = vec![s.id.clone(), y.to_string()];
        for k in 0..n_z {
            rec.push(s.covariates.get(k).copied().unwrap_or(0.0).to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn write(path: &Path, contents: &str) {
        fs::write(path, contents).unwrap();
    }

    fn toy_long() -> &'static str {
        "subject_id,time,value\n\
         a,0,70.5\na,1,71\na,2,70\na,3,72\na,4,71.5\n\
         b,0,80\nb,1,81\nb,2,79\nb,3,80.5\nb,4,80\n"
    }

    fn toy_outcomes() -> &'static str {
        "subject_id,outcome\na,1\nb,0\n"
    }

    #[test]
    fn load_save_roundtrip_is_byte_stable() {
        let dir = tempfile::tempdir().unwrap();
        let long = dir.path().join("long.csv");
        let out = dir.path().join("outcome.csv");
        write(&long, toy_long());
        write(&out, toy_outcomes());
        let opts = LoadOptions {
            percentile_step: 25.0,
            ..LoadOptions::default()
        };
        let (ds, report) =
            load_long_csv(&long, Some(&out), &ColumnMap::default(), &opts).unwrap();
        assert!(report.rejected.is_empty());

        let long2 = dir.path().join("long2.csv");
        let out2 = dir.path().join("outcome2.csv");
        save_long_csv(&long2, &ds.subjects, None).unwrap();
        save_outcome_csv(&out2, &ds.subjects, None).unwrap();
        let (ds2, _) = load_long_csv(&long2, Some(&out2), &ColumnMap::default(), &opts).unwrap();
        let long3 = dir.path().join("long3.csv");
        let out3 = dir.path().join("outcome3.csv");
        save_long_csv(&long3, &ds2.subjects, None).unwrap();
        save_outcome_csv(&out3, &ds2.subjects, None).unwrap();
        assert_eq!(fs::read(&long2).unwrap(), fs::read(&long3).unwrap());
        assert_eq!(fs::read(&out2).unwrap(), fs::read(&out3).unwrap());
        assert_eq!(ds.subjects, ds2.subjects);
    }

    #[test]
    fn single_observation_subject_is_rejected_and_reported() {
        let dir = tempfile::tempdir().unwrap();
        let long = dir.path().join("long.csv");
        write(
            &long,
            "subject_id,time,value\na,0,70\na,1,71\na,2,70\nlonely,5,60\n",
        );
        let opts = LoadOptions {
            percentile_step: 50.0,
            ..LoadOptions::default()
        };
        let (ds, report) = load_long_csv(&long, None, &ColumnMap::default(), &opts).unwrap();
        assert_eq!(ds.subjects.len(), 1);
        assert_eq!(report.rejected.len(), 1);
        assert_eq!(report.rejected[0].0, "lonely");
    }

    #[test]
    fn missing_column_is_schema_error() {
        let dir = tempfile::tempdir().unwrap();
        let long = dir.path().join("long.csv");
        write(&long, "subject,time,value\na,0,70\n");
        let err = load_long_csv(
            &long,
            None,
            &ColumnMap::default(),
            &LoadOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Schema { .. }));
    }

    #[test]
    fn duplicate_times_within_subject_is_data_error() {
        let dir = tempfile::tempdir().unwrap();
        let long = dir.path().join("long.csv");
        write(&long, "subject_id,time,value\na,0,70\na,0,71\na,1,72\n");
        let err = load_long_csv(
            &long,
            None,
            &ColumnMap::default(),
            &LoadOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Data(_)));
    }

    #[test]
    fn bad_outcome_value_is_data_error() {
        let dir = tempfile::tempdir().unwrap();
        let long = dir.path().join("long.csv");
        let out = dir.path().join("outcome.csv");
        write(&long, toy_long());
        write(&out, "subject_id,outcome\na,2\nb,0\n");
        let err = load_long_csv(
            &long,
            Some(&out),
            &ColumnMap::default(),
            &LoadOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Data(_)));
    }

    #[test]
    fn five_period_labels_in_first_appearance_order() {
        let dir = tempfile::tempdir().unwrap();
        let long = dir.path().join("long.csv");
        let mut body = String::from("subject_id,time,value,period\n");
        let schedule = [
            ("p", 0..10),
            ("m1", 10..15),
            ("s", 15..25),
            ("m2", 25..30),
            ("r", 30..35),
        ];
        for (label, range) in schedule {
            for t in range {
                body.push_str(&format!("a,{t},70,{label}\n"));
            }
        }
        write(&long, &body);
        let opts = LoadOptions {
            percentile_step: 10.0,
            ..LoadOptions::default()
        };
        let (ds, _) = load_long_csv(&long, None, &ColumnMap::default(), &opts).unwrap();
        assert_eq!(ds.regimes.names, vec!["p", "m1", "s", "m2", "r"]);
        // Partition invariant: regime counts sum to n_i.
        let counts = ds.regimes.obs[0].len();
        assert_eq!(counts, ds.subjects[0].times.len());
    }

    #[test]
    fn noncontiguous_period_is_data_error() {
        let dir = tempfile::tempdir().unwrap();
        let long = dir.path().join("long.csv");
        write(
            &long,
            "subject_id,time,value,period\na,0,70,p\na,1,70,s\na,2,70,p\n",
        );
        let err = load_long_csv(
            &long,
            None,
            &ColumnMap::default(),
            &LoadOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Data(_)));
    }

    #[test]
    fn uniform_model_assigns_single_regime() {
        let times: Vec<f64> = (0..40).map(|i| i as f64).collect();
        let basis = build_knots(&times, 10.0, 3).unwrap();
        let obs_regime = vec![0; times.len()];
        let coefs = assign_coef_regimes(&basis, &times, &obs_regime);
        assert!(coefs.iter().all(|&r| r == 0));
    }

    #[test]
    fn two_equal_regimes_split_monotonically_near_boundary() {
        // Symmetric knots over [0, 40); regimes split at t = 20.
        let times: Vec<f64> = (0..40).map(|i| i as f64).collect();
        let basis = build_knots(&times, 10.0, 3).unwrap();
        let obs_regime: Vec<usize> = (0..40).map(|i| usize::from(i >= 20)).collect();
        let coefs = assign_coef_regimes(&basis, &times, &obs_regime);
        assert!(coefs.windows(2).all(|w| w[0] <= w[1]), "{coefs:?}");
        assert_eq!(coefs[0], 0);
        assert_eq!(*coefs.last().unwrap(), 1);
        // Hand check: the switch happens at the first Greville point past
        // the boundary midpoint (19.5).
        let switch = coefs.iter().position(|&r| r == 1).unwrap();
        assert!(basis.greville(switch) > 19.5);
        assert!(basis.greville(switch - 1) <= 19.5);
    }

    #[test]
    fn tsst_layout_has_all_five_coefficient_regimes() {
        // 35-minute schedule at 4 obs/minute: each period spans several knots.
        let n = 35 * 4;
        let times: Vec<f64> = (0..n).map(|i| i as f64 * 15.0).collect();
        let basis = build_knots(&times, 2.0, 3).unwrap();
        let marks = [0.0, 10.0, 15.0, 25.0, 30.0, 35.0].map(|m| m * 60.0);
        let obs_regime: Vec<usize> = times
            .iter()
            .map(|&t| marks[1..5].iter().filter(|&&m| t >= m).count())
            .collect();
        let coefs = assign_coef_regimes(&basis, &times, &obs_regime);
        let distinct: std::collections::BTreeSet<usize> = coefs.iter().copied().collect();
        assert_eq!(distinct.len(), 5);
        assert!(coefs.windows(2).all(|w| w[0] <= w[1]));
    }
}
