//! The five subcommands. Each returns Ok(true) when every check or
//! convergence condition holds, Ok(false) for a clean run with failed checks,
//! and Err for usage or I/O problems — main maps these to exit codes 0/1/2.

use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::{bail, Context, Result};

use credence_core::dataset::Dataset;
use credence_core::instances::{convex_catalog, logistic_pair_1d, quadratic_1d};
use credence_core::loss::LossBundle;
use credence_core::model::{softmax, DifferentiableModel};
use credence_core::report::fmt_f64;
use credence_core::rng::StreamRng;
use credence_core::robustness::{
    alpha_for_coverage, classify_credibility, classify_softmax, coverage_curve, gamma_sweep,
    pgd_attack, record_for_sample, AttackConfig, CredibilityRecord, ScoreSource,
};
use credence_core::solver::{
    solve_counterfactual, SolverConfig, SolverStatus, WeightSpec,
};
use credence_core::verify::{
    compromise_check, fixed_point_residual, grid_solve_pi, kkt_residuals, map_check,
    oracle_profile_1d, sensitivity_check, CheckRow, GridSolution, PiInstance,
};

use crate::config::RunConfig;
use crate::records::{read_records, records_to_csv};

/// Index-keyed parallel map; the output order is independent of scheduling.
fn parallel_map<T, R, F>(items: &[T], jobs: usize, f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> Result<R> + Sync,
{
    let jobs = jobs.max(1).min(items.len().max(1));
    if jobs == 1 {
        return items
            .iter()
            .enumerate()
            .map(|(i, item)| f(i, item))
            .collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<R>>>> =
        Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let out = f(i, &items[i]);
                slots.lock().expect("worker poisoned the results")[i] = Some(out);
            });
        }
    });
    slots
        .into_inner()
        .expect("workers finished")
        .into_iter()
        .map(|slot| slot.expect("every index visited"))
        .collect()
}

fn write_file(path: &Path, body: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)
                .with_context(|| format!("creating {}", parent.display()))?;
        }
    }
    fs::write(path, body).with_context(|| format!("writing {}", path.display()))
}

fn load_model(cfg: &RunConfig) -> Result<DifferentiableModel> {
    let path = cfg
        .model
        .as_ref()
        .context("this command needs a model path (config field 'model')")?;
    let body =
        fs::read_to_string(path).with_context(|| format!("reading model {}", path.display()))?;
    let model: DifferentiableModel = serde_json::from_str(&body)
        .with_context(|| format!("parsing model {}", path.display()))?;
    model.validate()?;
    Ok(model)
}

fn load_dataset(cfg: &RunConfig, num_classes: usize, input_dim: usize) -> Result<Dataset> {
    let path = cfg
        .dataset
        .as_ref()
        .context("this command needs a dataset path (config field 'dataset')")?;
    let ds = Dataset::read_csv(path)?;
    ds.validate(num_classes)?;
    if ds.num_features() != input_dim {
        bail!(
            "dataset has {} features, model expects {}",
            ds.num_features(),
            input_dim
        );
    }
    Ok(ds)
}

fn load_problem(cfg: &RunConfig) -> Result<(DifferentiableModel, LossBundle, Dataset, WeightSpec)> {
    let model = load_model(cfg)?;
    let bundle = match &cfg.loss {
        Some(b) => b.clone(),
        None => LossBundle::cross_entropy(model.output_dim),
    };
    bundle.validate(model.output_dim)?;
    let dataset = load_dataset(cfg, bundle.num_classes, model.input_dim)?;
    let weights = cfg.weights.to_spec(bundle.num_classes)?;
    Ok((model, bundle, dataset, weights))
}

fn solve_all_records(
    cfg: &RunConfig,
    model: &DifferentiableModel,
    bundle: &LossBundle,
    dataset: &Dataset,
    weights: &WeightSpec,
) -> Result<Vec<CredibilityRecord>> {
    let items: Vec<(Vec<f64>, usize)> = dataset
        .features
        .iter()
        .cloned()
        .zip(dataset.labels.iter().copied())
        .collect();
    parallel_map(&items, cfg.jobs, |i, (x, label)| {
        record_for_sample(model, bundle, x, *label, i, weights, &cfg.solver).map_err(Into::into)
    })
}

/// Per-sample credibility profiles → credibility.csv.
pub fn cmd_credibility(cfg: &RunConfig) -> Result<bool> {
    let (model, bundle, dataset, weights) = load_problem(cfg)?;
    let records = solve_all_records(cfg, &model, &bundle, &dataset, &weights)?;
    let out = cfg.out_dir().join("credibility.csv");
    write_file(&out, &records_to_csv(&records)?)?;
    let nonconverged = records
        .iter()
        .filter(|r| r.status != SolverStatus::Converged)
        .count();
    let rate = nonconverged as f64 / records.len() as f64;
    println!(
        "credibility: {} samples, {} non-converged ({:.1}%), wrote {}",
        records.len(),
        nonconverged,
        100.0 * rate,
        out.display()
    );
    Ok(rate <= cfg.max_nonconverged_rate)
}

/// Coverage/filtered-accuracy curves for both score sources.
pub fn cmd_filter_curve(cfg: &RunConfig) -> Result<bool> {
    let records = match &cfg.records {
        Some(path) => read_records(path)?,
        None => {
            let (model, bundle, dataset, weights) = load_problem(cfg)?;
            solve_all_records(cfg, &model, &bundle, &dataset, &weights)?
        }
    };
    let out_dir = cfg.out_dir();
    for (source, name) in [
        (ScoreSource::Softmax, "filter_softmax.csv"),
        (ScoreSource::Credibility, "filter_credibility.csv"),
    ] {
        let report = coverage_curve(&records, &cfg.alphas, source)?;
        write_file(&out_dir.join(name), &report.to_csv(records.len()))?;
    }
    if let Some(targets) = &cfg.coverage_targets {
        let mut out =
            String::from("source,target,alpha,coverage,filtered_accuracy,n_classified,n_total\n");
        for source in [ScoreSource::Softmax, ScoreSource::Credibility] {
            for &target in targets {
                let alpha = alpha_for_coverage(&records, source, target)?;
                let row = &coverage_curve(&records, &[alpha], source)?.rows[0];
                out.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    match source {
                        ScoreSource::Softmax => "softmax",
                        ScoreSource::Credibility => "credibility",
                    },
                    fmt_f64(target),
                    fmt_f64(alpha),
                    fmt_f64(row.coverage),
                    row.filtered_accuracy.map(fmt_f64).unwrap_or_default(),
                    row.n_classified,
                    records.len(),
                ));
            }
        }
        write_file(&out_dir.join("filter_calibrated.csv"), &out)?;
    }
    println!(
        "filter-curve: {} records over {} thresholds, wrote {}",
        records.len(),
        cfg.alphas.len(),
        out_dir.display()
    );
    Ok(true)
}

struct AttackedSample {
    strongest: Vec<f64>,
    per_restart_softmax_ok: Vec<bool>,
    per_restart_cred_ok: Vec<bool>,
    strongest_softmax_ok: bool,
    strongest_cred_ok: bool,
    nonconverged: usize,
}

/// PGD sweep: adversarial datasets plus an accuracy summary per ε and
/// classifier, with best/worst accuracy across restarts.
pub fn cmd_attack(cfg: &RunConfig) -> Result<bool> {
    let (model, bundle, dataset, weights) = load_problem(cfg)?;
    let input_box = dataset
        .feature_range
        .clone()
        .unwrap_or_else(|| dataset.bounding_box());
    let out_dir = cfg.out_dir();
    fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;

    // clean accuracies first
    let clean = solve_all_records(cfg, &model, &bundle, &dataset, &weights)?;
    let n = clean.len() as f64;
    let clean_sm = clean
        .iter()
        .filter(|r| classify_softmax(&r.softmax) == r.label)
        .count() as f64
        / n;
    let clean_cr = clean
        .iter()
        .filter(|r| {
            r.status == SolverStatus::Converged && classify_credibility(&r.c_dagger) == r.label
        })
        .count() as f64
        / n;

    let mut summary = String::from(
        "epsilon,classifier,clean_accuracy,adv_accuracy,adv_accuracy_best_restart,adv_accuracy_worst_restart\n",
    );
    let mut total_nonconverged = 0usize;
    let mut total_solves = 0usize;

    let items: Vec<(Vec<f64>, usize)> = dataset
        .features
        .iter()
        .cloned()
        .zip(dataset.labels.iter().copied())
        .collect();

    for &eps in &cfg.attack.epsilons {
        let attacked: Vec<AttackedSample> = parallel_map(&items, cfg.jobs, |i, (x, label)| {
            let acfg = AttackConfig {
                epsilon: eps,
                steps: cfg.attack.steps,
                step_size: cfg.attack.step_size,
                restarts: cfg.attack.restarts,
                input_box: Some(input_box.clone()),
                seed: StreamRng::new(cfg.seed, "attack-seed", i as u64).next_u64(),
            };
            let outcome = pgd_attack(&model, &bundle, x, *label, &acfg)?;
            let mut per_restart_softmax_ok = Vec::with_capacity(outcome.per_restart.len());
            let mut per_restart_cred_ok = Vec::with_capacity(outcome.per_restart.len());
            let mut nonconverged = 0usize;
            let mut classify_at = |probe: &[f64]| -> Result<(bool, bool)> {
                let z = model.forward(probe)?;
                let sm_ok = classify_softmax(&softmax(&z)) == *label;
                let solved = solve_counterfactual(&model, &bundle, probe, &weights, &cfg.solver)?;
                let cred_ok = solved.status == SolverStatus::Converged
                    && classify_credibility(&solved.c_dagger) == *label;
                if solved.status != SolverStatus::Converged {
                    nonconverged += 1;
                }
                Ok((sm_ok, cred_ok))
            };
            for restart in &outcome.per_restart {
                let (sm_ok, cred_ok) = classify_at(&restart.x)?;
                per_restart_softmax_ok.push(sm_ok);
                per_restart_cred_ok.push(cred_ok);
            }
            let (strongest_softmax_ok, strongest_cred_ok) = classify_at(&outcome.x_adv)?;
            Ok(AttackedSample {
                strongest: outcome.x_adv,
                per_restart_softmax_ok,
                per_restart_cred_ok,
                strongest_softmax_ok,
                strongest_cred_ok,
                nonconverged,
            })
        })?;

        total_nonconverged += attacked.iter().map(|a| a.nonconverged).sum::<usize>();
        total_solves += attacked.len() * (cfg.attack.restarts as usize + 1);

        let adv = Dataset {
            features: attacked.iter().map(|a| a.strongest.clone()).collect(),
            labels: dataset.labels.clone(),
            feature_range: dataset.feature_range.clone(),
        };
        let eps_name = format!("{eps}").replace('.', "p");
        adv.write_csv(&out_dir.join(format!("adversarial_eps_{eps_name}.csv")))
            .with_context(|| "writing adversarial dataset")?;

        let restarts = cfg.attack.restarts as usize;
        let acc_over = |pick: &dyn Fn(&AttackedSample) -> bool| {
            attacked.iter().filter(|a| pick(a)).count() as f64 / n
        };
        let restart_accs = |field: &dyn Fn(&AttackedSample, usize) -> bool| {
            (0..restarts)
                .map(|r| attacked.iter().filter(|a| field(a, r)).count() as f64 / n)
                .collect::<Vec<f64>>()
        };
        for (name, clean_acc, strongest, per_restart) in [
            (
                "softmax",
                clean_sm,
                acc_over(&|a: &AttackedSample| a.strongest_softmax_ok),
                restart_accs(&|a: &AttackedSample, r| a.per_restart_softmax_ok[r]),
            ),
            (
                "credibility",
                clean_cr,
                acc_over(&|a: &AttackedSample| a.strongest_cred_ok),
                restart_accs(&|a: &AttackedSample, r| a.per_restart_cred_ok[r]),
            ),
        ] {
            let best = per_restart.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let worst = per_restart.iter().cloned().fold(f64::INFINITY, f64::min);
            summary.push_str(&format!(
                "{},{},{},{},{},{}\n",
                fmt_f64(eps),
                name,
                fmt_f64(clean_acc),
                fmt_f64(strongest),
                fmt_f64(best),
                fmt_f64(worst),
            ));
        }
    }
    write_file(&out_dir.join("attack_summary.csv"), &summary)?;
    let rate = if total_solves == 0 {
        0.0
    } else {
        total_nonconverged as f64 / total_solves as f64
    };
    println!(
        "attack: {} epsilons × {} samples, {:.1}% non-converged solves, wrote {}",
        cfg.attack.epsilons.len(),
        dataset.len(),
        100.0 * rate,
        out_dir.display()
    );
    Ok(rate <= cfg.max_nonconverged_rate)
}

/// Risk-aversion sweep over W = γI.
pub fn cmd_gamma_sweep(cfg: &RunConfig) -> Result<bool> {
    let (model, bundle, dataset, _) = load_problem(cfg)?;
    let report = gamma_sweep(&model, &bundle, &dataset.features, &cfg.gammas, &cfg.solver)?;
    let path = cfg.out_dir().join("gamma_sweep.csv");
    write_file(&path, &report.to_csv())?;
    let all_reliable = report.rows.iter().all(|r| r.reliable);
    println!(
        "gamma-sweep: {} gammas × {} samples{}, wrote {}",
        cfg.gammas.len(),
        dataset.len(),
        if all_reliable { "" } else { " (UNRELIABLE rows present)" },
        path.display()
    );
    Ok(all_reliable)
}

/// Built-in verification suite over the instance catalog.
pub fn cmd_verify(cfg: &RunConfig) -> Result<bool> {
    let solver = SolverConfig::default().with_tolerances(1e-10);
    let trials = cfg.verify_trials;
    let mut rows: Vec<CheckRow> = Vec::new();

    for inst in convex_catalog() {
        let r = solve_counterfactual(&inst.model, &inst.bundle, &inst.x_origin, &inst.weights, &solver)?;
        if r.status != SolverStatus::Converged {
            rows.push(CheckRow::within(inst.id, "converged", 1.0, 0.0));
            continue;
        }
        rows.push(CheckRow::within(
            inst.id,
            "fixed_point",
            r.residuals.fixed_point,
            1e-6,
        ));
        rows.push(CheckRow::within(
            inst.id,
            "counterfactual_coupling",
            fixed_point_residual(&r.c_dagger, &r.lambda, &inst.weights),
            0.0,
        ));
        let pi = PiInstance::new(
            inst.model.clone(),
            inst.bundle.clone(),
            inst.x_origin.clone(),
            r.c_dagger.clone(),
        )?;
        let kkt = kkt_residuals(&pi, &r.x_dagger, &r.lambda)?;
        rows.push(CheckRow::within(inst.id, "kkt_stationarity", kkt.stationarity, 1e-5));
        rows.push(CheckRow::within(inst.id, "kkt_comp_slack", kkt.comp_slack, 1e-5));
        rows.push(CheckRow::within(inst.id, "kkt_primal_feasibility", kkt.primal_feas, 1e-6));
        rows.push(CheckRow::within(
            inst.id,
            "dual_feasibility",
            if kkt.dual_feas { 0.0 } else { 1.0 },
            0.0,
        ));

        let r_star = grid_solve_pi(&pi, &inst.grid_box, inst.grid_step)?
            .r_star()
            .map(|v| (v - r.risk).abs());
        rows.push(CheckRow::within(
            inst.id,
            "grid_risk_gap",
            r_star.unwrap_or(f64::INFINITY),
            1e-3,
        ));

        let comp = compromise_check(
            &inst.model,
            &inst.bundle,
            &inst.x_origin,
            &inst.weights,
            &r,
            trials,
            0.5,
            cfg.seed,
        )?;
        rows.push(CheckRow::within(
            inst.id,
            "compromise_violations",
            comp.violations as f64,
            0.0,
        ));

        let verdicts = map_check(
            &inst.model,
            &inst.bundle,
            &inst.x_origin,
            &inst.weights,
            &r,
            &cfg.t_schedule,
            trials,
            1e-2,
            cfg.seed,
        )?;
        let last = verdicts.last().expect("schedule validated non-empty");
        rows.push(CheckRow::within(inst.id, "map_margin", -last.margin, 1e-8));

        if credence_core::instances::sensitivity_catalog_ids().contains(&inst.id) {
            let sens = sensitivity_check(
                &pi,
                &r.c_dagger,
                0.05,
                &inst.grid_box,
                inst.grid_step,
                &solver,
            )?;
            rows.push(CheckRow::within(inst.id, "dual_sensitivity", sens.max_abs_diff, 1e-2));
        }
    }

    // closed-form quadratic and the bisection oracle for the logistic pair
    {
        let inst = quadratic_1d(2.0, 2.0);
        let r = solve_counterfactual(&inst.model, &inst.bundle, &inst.x_origin, &inst.weights, &solver)?;
        let err = (r.x_dagger[0] - 1.0)
            .abs()
            .max((r.lambda[0] - 1.0).abs())
            .max((r.c_dagger[0] + 1.0).abs());
        rows.push(CheckRow::within("quad-closed-form", "closed_form_gap", err, 1e-4));

        let pair = logistic_pair_1d(1.0, 1.0, 1.0);
        let rp = solve_counterfactual(&pair.model, &pair.bundle, &pair.x_origin, &pair.weights, &solver)?;
        let oracle = oracle_profile_1d(&pair.model, &pair.bundle, 0.0, &pair.weights, (-5.0, 5.0), 1e-2)?;
        rows.push(CheckRow::within(
            "logistic-pair",
            "bisection_oracle_gap",
            (rp.x_dagger[0] - oracle.x).abs(),
            1e-4,
        ));
    }

    // infeasible-credence probe: positive credence must be reported infeasible
    {
        let inst = quadratic_1d(2.0, 2.0);
        let pi = PiInstance::new(
            inst.model.clone(),
            inst.bundle.clone(),
            inst.x_origin.clone(),
            vec![0.5],
        )?;
        let infeasible = matches!(
            grid_solve_pi(&pi, &inst.grid_box, inst.grid_step)?,
            GridSolution::Infeasible
        );
        rows.push(CheckRow::within(
            "infeasible-probe",
            "grid_reports_infeasible",
            if infeasible { 0.0 } else { 1.0 },
            0.0,
        ));
    }

    // negative control: a corrupted dual vector must trip the fixed-point check
    {
        let inst = quadratic_1d(2.0, 2.0);
        let r = solve_counterfactual(&inst.model, &inst.bundle, &inst.x_origin, &inst.weights, &solver)?;
        let mut corrupted = r.lambda.clone();
        corrupted[0] += 0.25;
        let defect = fixed_point_residual(&r.c_dagger, &corrupted, &inst.weights);
        rows.push(CheckRow {
            instance_id: "corrupted-lambda".into(),
            check: "fixed_point_check_catches_corruption".into(),
            residual: defect,
            tolerance: 1e-6,
            pass: defect > 1e-6,
        });
    }

    let mut out = String::from(CheckRow::CSV_HEADER);
    out.push('\n');
    for row in &rows {
        out.push_str(&row.to_csv_row());
        out.push('\n');
    }
    let path = cfg.out_dir().join("verify_report.csv");
    write_file(&path, &out)?;

    let failures: Vec<&CheckRow> = rows.iter().filter(|r| !r.pass).collect();
    for f in &failures {
        eprintln!(
            "verify FAIL: {} {} residual {} tol {}",
            f.instance_id, f.check, f.residual, f.tolerance
        );
    }
    println!(
        "verify: {} checks, {} failed, wrote {}",
        rows.len(),
        failures.len(),
        path.display()
    );
    Ok(failures.is_empty())
}

