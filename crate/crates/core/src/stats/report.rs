use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{
    bland_altman, mbe, mean, mmrv, pearson, sample_sd, BlandAltman, Correlation, MeanBiasError,
};

/// Success rate of one policy on one task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SrEntry {
    pub policy_id: String,
    pub task: String,
    pub sr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedEvaluation {
    pub policy_id: String,
    pub task: String,
    pub sim_sr: f64,
    pub real_sr: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct UnmatchedPair {
    pub method: String,
    pub policy_id: String,
    pub task: String,
    /// Which side has a value: `sim` or `real`.
    pub present_in: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskCorrelation {
    pub task: String,
    pub n: usize,
    pub pearson: Option<Correlation>,
    pub mmrv: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub sd: f64,
    pub n: usize,
}

impl Summary {
    /// Mean and sample sd, `None` for an empty slice.
    pub fn of(xs: &[f64]) -> Option<Self> {
        (!xs.is_empty()).then(|| Summary {
            mean: mean(xs),
            sd: sample_sd(xs),
            n: xs.len(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: String,
    pub pairs: Vec<PairedEvaluation>,
    pub per_task: Vec<TaskCorrelation>,
    /// Mean ± sd of the per-task Pearson r over tasks where it is defined.
    pub pearson_avg: Option<Summary>,
    pub mmrv_avg: Option<Summary>,
    /// Pearson over all pairs pooled across tasks.
    pub pooled: Option<Correlation>,
    pub mbe: Option<MeanBiasError>,
    pub bland_altman: Option<BlandAltman>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub methods: Vec<MethodReport>,
    /// Inter-rater ICC(2,1) over manually labelled rollouts, when available.
    pub icc: Option<f64>,
    pub unmatched: Vec<UnmatchedPair>,
}

fn task_correlation(task: &str, pairs: &[&PairedEvaluation]) -> TaskCorrelation {
    let sim: Vec<f64> = pairs.iter().map(|p| p.sim_sr).collect();
    let real: Vec<f64> = pairs.iter().map(|p| p.real_sr).collect();
    let mut notes = Vec::new();
    let pearson = pearson(&sim, &real)
        .map_err(|e| notes.push(format!("pearson: {e}")))
        .ok();
    let mmrv = mmrv(&sim, &real)
        .map_err(|e| notes.push(format!("mmrv: {e}")))
        .ok();
    TaskCorrelation {
        task: task.to_owned(),
        n: pairs.len(),
        pearson,
        mmrv,
        note: (!notes.is_empty()).then(|| notes.join("; ")),
    }
}

fn method_report(method: &str, pairs: Vec<PairedEvaluation>) -> MethodReport {
    let mut by_task: BTreeMap<&str, Vec<&PairedEvaluation>> = BTreeMap::new();
    for p in &pairs {
        by_task.entry(p.task.as_str()).or_default().push(p);
    }
    let per_task: Vec<TaskCorrelation> = by_task
        .iter()
        .map(|(task, ps)| task_correlation(task, ps))
        .collect();
    let rs: Vec<f64> = per_task
        .iter()
        .filter_map(|t| t.pearson.map(|c| c.r))
        .collect();
    let ms: Vec<f64> = per_task.iter().filter_map(|t| t.mmrv).collect();
    let sim: Vec<f64> = pairs.iter().map(|p| p.sim_sr).collect();
    let real: Vec<f64> = pairs.iter().map(|p| p.real_sr).collect();
    MethodReport {
        method: method.to_owned(),
        per_task,
        pearson_avg: Summary::of(&rs),
        mmrv_avg: Summary::of(&ms),
        pooled: pearson(&sim, &real).ok(),
        mbe: mbe(&sim, &real).ok(),
        bland_altman: bland_altman(&sim, &real).ok(),
        pairs,
    }
}

/// Pairs each method's simulated success rates with the real ones by
/// `(policy, task)` and computes per-task and aggregate statistics.
/// Entries without a partner are listed in `unmatched`.
pub fn campaign_report(
    methods: &[(String, Vec<SrEntry>)],
    real: &[SrEntry],
    icc: Option<f64>,
) -> CampaignReport {
    let real_map: BTreeMap<(&str, &str), f64> = real
        .iter()
        .map(|e| ((e.policy_id.as_str(), e.task.as_str()), e.sr))
        .collect();
    let mut unmatched = BTreeSet::new();
    let mut reports = Vec::new();
    for (method, sim) in methods {
        let sim_map: BTreeMap<(&str, &str), f64> = sim
            .iter()
            .map(|e| ((e.policy_id.as_str(), e.task.as_str()), e.sr))
            .collect();
        let mut pairs = Vec::new();
        for (&(policy, task), &sim_sr) in &sim_map {
            match real_map.get(&(policy, task)) {
                Some(&real_sr) => pairs.push(PairedEvaluation {
                    policy_id: policy.to_owned(),
                    task: task.to_owned(),
                    sim_sr,
                    real_sr,
                }),
                None => {
                    unmatched.insert(UnmatchedPair {
                        method: method.clone(),
                        policy_id: policy.to_owned(),
                        task: task.to_owned(),
                        present_in: "sim".into(),
                    });
                }
            }
        }
        for &(policy, task) in real_map.keys() {
            if !sim_map.contains_key(&(policy, task)) {
                unmatched.insert(UnmatchedPair {
                    method: method.clone(),
                    policy_id: policy.to_owned(),
                    task: task.to_owned(),
                    present_in: "real".into(),
                });
            }
        }
        reports.push(method_report(method, pairs));
    }
    CampaignReport {
        methods: reports,
        icc,
        unmatched: unmatched.into_iter().collect(),
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl CampaignReport {
    pub fn method(&self, name: &str) -> Option<&MethodReport> {
        self.methods.iter().find(|m| m.method == name)
    }

    /// One row per (method, task), plus `average` and `pooled` rows.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let write = |w: &mut csv::Writer<Vec<u8>>, row: [String; 11]| {
            w.write_record(&row).expect("in-memory csv write");
        };
        write(
            &mut w,
            [
                "method",
                "scope",
                "n",
                "pearson_r",
                "p_value",
                "mmrv",
                "pearson_sd",
                "mmrv_sd",
                "mbe",
                "mbe_ci_low",
                "mbe_ci_high",
            ]
            .map(String::from),
        );
        for m in &self.methods {
            for t in &m.per_task {
                write(
                    &mut w,
                    [
                        m.method.clone(),
                        t.task.clone(),
                        t.n.to_string(),
                        opt(t.pearson.map(|c| c.r)),
                        opt(t.pearson.map(|c| c.p_value)),
                        opt(t.mmrv),
                        String::new(),
                        String::new(),
                        String::new(),
                        String::new(),
                        String::new(),
                    ],
                );
            }
            write(
                &mut w,
                [
                    m.method.clone(),
                    "average".into(),
                    m.per_task.len().to_string(),
                    opt(m.pearson_avg.map(|s| s.mean)),
                    String::new(),
                    opt(m.mmrv_avg.map(|s| s.mean)),
                    opt(m.pearson_avg.map(|s| s.sd)),
                    opt(m.mmrv_avg.map(|s| s.sd)),
                    opt(m.mbe.map(|b| b.mbe)),
                    opt(m.mbe.map(|b| b.ci95_low)),
                    opt(m.mbe.map(|b| b.ci95_high)),
                ],
            );
            write(
                &mut w,
                [
                    m.method.clone(),
                    "pooled".into(),
                    m.pairs.len().to_string(),
                    opt(m.pooled.map(|c| c.r)),
                    opt(m.pooled.map(|c| c.p_value)),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                ],
            );
        }
        String::from_utf8(w.into_inner().expect("in-memory csv flush")).expect("utf8 csv")
    }

    /// `policy,task,sim_sr,real_sr` rows for one method.
    pub fn scatter_csv(&self, method: &str) -> Option<String> {
        let m = self.method(method)?;
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["policy", "task", "sim_sr", "real_sr"])
            .ok()?;
        for p in &m.pairs {
            w.write_record([
                p.policy_id.clone(),
                p.task.clone(),
                p.sim_sr.to_string(),
                p.real_sr.to_string(),
            ])
            .ok()?;
        }
        String::from_utf8(w.into_inner().ok()?).ok()
    }
}
