use hmmob::hmm::{all_permutations, mixing_profile, simulate, two_state_mixing, HmmParams};
use hmmob::marginals::weighted_distance;
use hmmob::order::{posterior_order, OrderPosterior, RateKind, ThresholdSchedule};
use hmmob::sampler::{fmt_f64, load_trace, run_chain, save_trace, PosteriorTrace};
use hmmob::Exec;
use serde::{Deserialize, Serialize};
use statrs::statistics::{Data, OrderStatistics};

use crate::config::{ExperimentConfig, Task};
use crate::error::{CliError, CliResult};
use crate::files::*;

/// Probabilities reported by every quantile table.
pub const QUANTILES: [f64; 5] = [0.05, 0.25, 0.5, 0.75, 0.95];

pub fn quantiles(values: &[f64]) -> Vec<f64> {
    let mut d = Data::new(values.to_vec());
    QUANTILES.iter().map(|&p| d.quantile(p)).collect()
}

pub fn median(values: &[f64]) -> f64 {
    Data::new(values.to_vec()).quantile(0.5)
}

/// Runs `f` on each task in parallel; the first error in task order wins.
fn for_tasks<T, F>(tasks: &[Task], f: F) -> CliResult<Vec<T>>
where
    T: Send,
    F: Fn(&Task) -> CliResult<T> + Sync + Send,
{
    Exec::Parallel.map_slice(tasks, |t| f(t).map_err(|e| e.context(format!("dataset {}", t.stem())))).into_iter().collect()
}

pub fn cmd_simulate(cfg: &ExperimentConfig) -> CliResult<Manifest> {
    let hash = cfg.hash();
    let dir = subdir(cfg, "data");
    create_dir(&dir)?;
    let tasks = cfg.tasks();
    for_tasks(&tasks, |t| {
        let obs = simulate(&cfg.theta_true, t.n, cfg.data_seed(t))?;
        write_dataset(&data_path(cfg, t), &hash, &obs.y, obs.x_true.as_deref().unwrap_or_default())
    })?;
    let mut echo = cfg.clone();
    echo.output_dir = Default::default();
    let manifest = Manifest {
        config_hash: hash,
        config: echo,
        theta_true: Some(cfg.theta_true.clone()),
        datasets: tasks
            .iter()
            .map(|t| DatasetEntry {
                n: t.n,
                replicate: t.replicate,
                data_seed: cfg.data_seed(t),
                chain_seed: cfg.chain_seed(t),
                file: format!("data/{}.csv", t.stem()),
            })
            .collect(),
    };
    write_json(&cfg.output_dir.join(MANIFEST), &manifest)?;
    Ok(manifest)
}

fn manifest_tasks(cfg: &ExperimentConfig, m: &Manifest) -> CliResult<Vec<Task>> {
    let tasks = cfg.tasks();
    let listed: Vec<(usize, usize)> = m.datasets.iter().map(|d| (d.n, d.replicate)).collect();
    if listed != tasks.iter().map(|t| (t.n, t.replicate)).collect::<Vec<_>>() {
        return Err(CliError::config("manifest datasets do not match the config grid"));
    }
    Ok(tasks)
}

/// Fits every dataset listed in the manifest and writes one trace per dataset.
pub fn cmd_fit(cfg: &ExperimentConfig) -> CliResult<Vec<(Task, PosteriorTrace)>> {
    let m = load_manifest(cfg)?;
    let tasks = manifest_tasks(cfg, &m)?;
    let hash = m.config_hash;
    let dir = subdir(cfg, "traces");
    create_dir(&dir)?;
    let model = cfg.model();
    for_tasks(&tasks, |t| {
        let (y, _) = read_dataset(&data_path(cfg, t), &hash)?;
        let trace = run_chain(&y, &model, &cfg.sampler.with_seed(cfg.chain_seed(t)))?;
        save_trace(&dir, &t.stem(), &trace, &model, Some(&hash))?;
        Ok((*t, trace))
    })
}

/// Loads the traces written by [`cmd_fit`], checking their hashes.
pub fn load_traces(cfg: &ExperimentConfig) -> CliResult<Vec<(Task, PosteriorTrace)>> {
    let m = load_manifest(cfg)?;
    let tasks = manifest_tasks(cfg, &m)?;
    let dir = subdir(cfg, "traces");
    tasks
        .iter()
        .map(|t| {
            let (trace, side) = load_trace(&dir, &t.stem()).map_err(|e| CliError::from(e).context(t.stem()))?;
            check_hash(side.config_hash.as_deref(), &m.config_hash, &dir.join(t.stem()))?;
            Ok((*t, trace))
        })
        .collect()
}

pub fn schedule_for(cfg: &ExperimentConfig, n: usize) -> CliResult<ThresholdSchedule> {
    let d = cfg.theta_true.emission().dim();
    let kind = RateKind::for_prior(&cfg.transition_prior(), cfg.fit_k, d)?;
    Ok(ThresholdSchedule::new(n, kind, cfg.schedule)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderReport {
    pub config_hash: String,
    pub n: usize,
    pub replicate: usize,
    pub k0: usize,
    pub schedule_valid: bool,
    pub posterior: OrderPosterior,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderRow {
    pub n: usize,
    pub replicate: usize,
    pub mode: usize,
    pub p_true_order: f64,
    pub emptied_all_count: usize,
}

pub const ORDER_HEADER: [&str; 5] = ["n", "replicate", "mode_L", "p_L_eq_k0", "emptied_all_count"];

impl OrderRow {
    pub fn from_report(r: &OrderReport) -> Self {
        OrderRow {
            n: r.n,
            replicate: r.replicate,
            mode: r.posterior.mode,
            p_true_order: r.posterior.prob(r.k0),
            emptied_all_count: r.posterior.emptied_all_count,
        }
    }

    fn record(&self) -> Vec<String> {
        vec![
            self.n.to_string(),
            self.replicate.to_string(),
            self.mode.to_string(),
            fmt_f64(self.p_true_order),
            self.emptied_all_count.to_string(),
        ]
    }
}

/// Order posteriors of the given traces.
pub fn order_reports(cfg: &ExperimentConfig, traces: &[(Task, PosteriorTrace)]) -> CliResult<Vec<OrderReport>> {
    if traces.is_empty() {
        return Err(CliError::config("no traces to summarize"));
    }
    let hash = cfg.hash();
    traces
        .iter()
        .map(|(t, trace)| {
            let schedule = schedule_for(cfg, t.n)?;
            Ok(OrderReport {
                config_hash: hash.clone(),
                n: t.n,
                replicate: t.replicate,
                k0: cfg.k0(),
                schedule_valid: schedule.is_valid(),
                posterior: posterior_order(trace, &schedule, Exec::Parallel)?,
            })
        })
        .collect()
}

pub fn cmd_order(cfg: &ExperimentConfig) -> CliResult<Vec<OrderRow>> {
    let traces = load_traces(cfg)?;
    let reports = order_reports(cfg, &traces)?;
    let dir = subdir(cfg, "order");
    create_dir(&dir)?;
    for r in &reports {
        write_json(&dir.join(format!("n{}_r{}.json", r.n, r.replicate)), r)?;
    }
    let rows: Vec<OrderRow> = reports.iter().map(OrderRow::from_report).collect();
    let records: Vec<Vec<String>> = rows.iter().map(OrderRow::record).collect();
    write_csv(&dir.join("summary.csv"), &cfg.hash(), &ORDER_HEADER, &records)?;
    Ok(rows)
}

/// Parameter errors after aligning labels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamError {
    /// `max_{i,j} |q̂_ij − q⁰_ij|`.
    pub q_err: f64,
    /// `‖γ̂ − γ⁰‖`.
    pub gamma_err: f64,
}

/// Errors under the relabeling of `theta` that minimizes the larger of the two.
pub fn permutation_minimized_error(theta: &HmmParams, theta0: &HmmParams) -> CliResult<ParamError> {
    if theta.k() != theta0.k() {
        return Err(CliError::config(format!("cannot align {} states with {}", theta.k(), theta0.k())));
    }
    let mut best: Option<ParamError> = None;
    for perm in all_permutations(theta.k()) {
        let p = theta.permute(&perm)?;
        let q_err = p
            .transition()
            .iter()
            .zip(theta0.transition())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let gamma_err = p
            .gammas()
            .iter()
            .zip(theta0.gammas())
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        let e = ParamError { q_err, gamma_err };
        if best.is_none_or(|b| e.q_err.max(e.gamma_err) < b.q_err.max(b.gamma_err)) {
            best = Some(e);
        }
    }
    Ok(best.expect("at least one permutation"))
}

/// At most `max` evenly spaced indices into `0..len`.
pub fn thinned_indices(len: usize, max: usize) -> Vec<usize> {
    if len <= max {
        return (0..len).collect();
    }
    (0..max).map(|i| i * len / max).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceRow {
    pub n: usize,
    pub replicate: usize,
    pub n_evals: usize,
    pub l1_median: f64,
    pub weighted_median: f64,
    pub q_err_median: Option<f64>,
    pub gamma_err_median: Option<f64>,
}

struct SampleDistance {
    iter: usize,
    l1: f64,
    l1_std_err: f64,
    tau: f64,
    weighted: f64,
    err: Option<ParamError>,
}

fn trace_distances(cfg: &ExperimentConfig, theta0: &HmmParams, t: &Task, trace: &PosteriorTrace) -> CliResult<Vec<SampleDistance>> {
    let seed = cfg.distance_seed(t);
    let idx = thinned_indices(trace.len(), cfg.distance.max_evals);
    let aligned = cfg.fit_k == theta0.k();
    Exec::Parallel
        .map_slice(&idx, |&i| {
            let s = &trace.samples[i];
            let w = weighted_distance(s, theta0, cfg.marginal_l, cfg.distance.n_mc, seed, Exec::Sequential)?;
            Ok(SampleDistance {
                iter: trace.iterations[i],
                l1: w.distance.value,
                l1_std_err: w.distance.std_err,
                tau: w.tau,
                weighted: w.value,
                err: if aligned { Some(permutation_minimized_error(s, theta0)?) } else { None },
            })
        })
        .into_iter()
        .collect()
}

pub const DISTANCE_HEADER: [&str; 7] = [
    "n",
    "replicate",
    "n_evals",
    "l1_median",
    "weighted_median",
    "q_err_median",
    "gamma_err_median",
];

/// Distances from posterior samples to the true parameter.
pub fn cmd_distance(cfg: &ExperimentConfig) -> CliResult<Vec<DistanceRow>> {
    let m = load_manifest(cfg)?;
    let theta0 = m
        .theta_true
        .clone()
        .ok_or_else(|| CliError::config("manifest has no theta_true"))?;
    let traces = load_traces(cfg)?;
    let hash = m.config_hash;
    let dir = subdir(cfg, "distance");
    create_dir(&dir)?;
    let mut rows = Vec::with_capacity(traces.len());
    let mut pooled: Vec<(usize, Vec<Vec<f64>>)> = Vec::new();
    for (t, trace) in &traces {
        let ds = trace_distances(cfg, &theta0, t, trace).map_err(|e| e.context(t.stem()))?;
        let records: Vec<Vec<String>> = ds
            .iter()
            .map(|d| {
                vec![
                    d.iter.to_string(),
                    fmt_f64(d.l1),
                    fmt_f64(d.l1_std_err),
                    fmt_f64(d.tau),
                    fmt_f64(d.weighted),
                    fmt_opt(d.err.map(|e| e.q_err)),
                    fmt_opt(d.err.map(|e| e.gamma_err)),
                ]
            })
            .collect();
        write_csv(
            &dir.join(format!("{}.csv", t.stem())),
            &hash,
            &["iter", "l1", "l1_std_err", "tau", "weighted", "q_err", "gamma_err"],
            &records,
        )?;
        let l1: Vec<f64> = ds.iter().map(|d| d.l1).collect();
        let weighted: Vec<f64> = ds.iter().map(|d| d.weighted).collect();
        let q_err: Vec<f64> = ds.iter().filter_map(|d| d.err.map(|e| e.q_err)).collect();
        let gamma_err: Vec<f64> = ds.iter().filter_map(|d| d.err.map(|e| e.gamma_err)).collect();
        let opt_median = |v: &[f64]| if v.is_empty() { None } else { Some(median(v)) };
        rows.push(DistanceRow {
            n: t.n,
            replicate: t.replicate,
            n_evals: ds.len(),
            l1_median: median(&l1),
            weighted_median: median(&weighted),
            q_err_median: opt_median(&q_err),
            gamma_err_median: opt_median(&gamma_err),
        });
        match pooled.last_mut() {
            Some((n, acc)) if *n == t.n => {
                for (a, v) in acc.iter_mut().zip([l1, weighted, q_err, gamma_err]) {
                    a.extend(v);
                }
            }
            _ => pooled.push((t.n, vec![l1, weighted, q_err, gamma_err])),
        }
    }
    let summary: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.n.to_string(),
                r.replicate.to_string(),
                r.n_evals.to_string(),
                fmt_f64(r.l1_median),
                fmt_f64(r.weighted_median),
                fmt_opt(r.q_err_median),
                fmt_opt(r.gamma_err_median),
            ]
        })
        .collect();
    write_csv(&dir.join("summary.csv"), &hash, &DISTANCE_HEADER, &summary)?;
    let mut quant = Vec::new();
    for (n, metrics) in &pooled {
        for (name, values) in ["l1", "weighted", "q_err", "gamma_err"].iter().zip(metrics) {
            if values.is_empty() {
                continue;
            }
            let mut rec = vec![n.to_string(), name.to_string()];
            rec.extend(quantiles(values).into_iter().map(fmt_f64));
            quant.push(rec);
        }
    }
    write_csv(
        &dir.join("quantiles.csv"),
        &hash,
        &["n", "metric", "q05", "q25", "q50", "q75", "q95"],
        &quant,
    )?;
    Ok(rows)
}

/// Two-state fit to one-state data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoStateReport {
    pub config_hash: String,
    pub n: usize,
    pub replicate: usize,
    pub data_seed: u64,
    pub chain_seed: u64,
    pub eps_n: f64,
    /// Posterior mass of `{p/(p+q) ≤ ε_n or q/(p+q) ≤ ε_n}`.
    pub a_n_mass: f64,
    /// Posterior mass of `|γ_1 − γ_2| ≤ merge_tol`.
    pub merge_event_mass: f64,
    /// Quantiles of `|γ_1 − γ_2|` at [`QUANTILES`].
    pub merge_quantiles: Vec<f64>,
    /// Quantiles of `(p + q) ∧ (2 − (p + q))`.
    pub mixing_quantiles: Vec<f64>,
    /// Quantiles of the Doeblin mass.
    pub doeblin_quantiles: Vec<f64>,
}

pub fn two_state_report(cfg: &ExperimentConfig, t: &Task, trace: &PosteriorTrace) -> CliResult<TwoStateReport> {
    let eps = cfg.eps_n.at(t.n);
    let mut emptied = 0usize;
    let mut merged = 0usize;
    let mut gaps = Vec::with_capacity(trace.len());
    let mut mixing = Vec::with_capacity(trace.len());
    let mut doeblin = Vec::with_capacity(trace.len());
    for s in &trace.samples {
        let (p, q) = s
            .two_state_pq()
            .ok_or_else(|| CliError::config("two-state report needs k = 2"))?;
        if p / (p + q) <= eps || q / (p + q) <= eps {
            emptied += 1;
        }
        let gap = (s.gamma(0) - s.gamma(1)).abs();
        if gap <= cfg.merge_tol {
            merged += 1;
        }
        gaps.push(gap);
        mixing.push(two_state_mixing(s)?);
        doeblin.push(mixing_profile(s).s);
    }
    let len = trace.len() as f64;
    Ok(TwoStateReport {
        config_hash: cfg.hash(),
        n: t.n,
        replicate: t.replicate,
        data_seed: cfg.data_seed(t),
        chain_seed: cfg.chain_seed(t),
        eps_n: eps,
        a_n_mass: emptied as f64 / len,
        merge_event_mass: merged as f64 / len,
        merge_quantiles: quantiles(&gaps),
        mixing_quantiles: quantiles(&mixing),
        doeblin_quantiles: quantiles(&doeblin),
    })
}

pub const TWOSTATE_HEADER: [&str; 10] = [
    "n",
    "replicate",
    "eps_n",
    "a_n_mass",
    "merge_event_mass",
    "merge_q05",
    "merge_q50",
    "merge_q95",
    "mixing_q50",
    "doeblin_q50",
];

/// Simulates, fits a two-state model and reports emptying against merging.
pub fn cmd_twostate(cfg: &ExperimentConfig) -> CliResult<Vec<TwoStateReport>> {
    if cfg.fit_k != 2 {
        return Err(CliError::config(format!("twostate needs fit_k = 2, got {}", cfg.fit_k)));
    }
    let dir = subdir(cfg, "twostate");
    create_dir(&dir)?;
    let model = cfg.model();
    let reports = for_tasks(&cfg.tasks(), |t| {
        let y = simulate(&cfg.theta_true, t.n, cfg.data_seed(t))?.y;
        let trace = run_chain(&y, &model, &cfg.sampler.with_seed(cfg.chain_seed(t)))?;
        let report = two_state_report(cfg, t, &trace)?;
        write_json(&dir.join(format!("{}.json", t.stem())), &report)?;
        Ok(report)
    })?;
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            vec![
                r.n.to_string(),
                r.replicate.to_string(),
                fmt_f64(r.eps_n),
                fmt_f64(r.a_n_mass),
                fmt_f64(r.merge_event_mass),
                fmt_f64(r.merge_quantiles[0]),
                fmt_f64(r.merge_quantiles[2]),
                fmt_f64(r.merge_quantiles[4]),
                fmt_f64(r.mixing_quantiles[2]),
                fmt_f64(r.doeblin_quantiles[2]),
            ]
        })
        .collect();
    write_csv(&dir.join("summary.csv"), &cfg.hash(), &TWOSTATE_HEADER, &rows)?;
    Ok(reports)
}
