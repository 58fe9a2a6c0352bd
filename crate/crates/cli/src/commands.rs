use std::path::Path;

use serde_json::{json, Value};
use turnover_core::clusters::{knee_estimate, lower_bound_f, prepare_for_sweep, residual_correlation_sweep, BinaryLoadings};
use turnover_core::factor_model::{
    binary_eigensystem, dense_eigenstructure, dense_rho_star, optimal_allocation, reduce_nonbinary,
    reduce_nondiagonal_assigned, rho_star_binary, secular_largest,
};
use turnover_core::format::sig17;
use turnover_core::panel::{load_factors, load_panel, CorrelationMatrix};
use turnover_core::synth::{gen_model, gen_panel, FactorCorrelation, SizeScheme};
use turnover_core::{analyze_correlation, analyze_panel, AnalysisOptions, EigenStructure, FactorModel, SynthConfig};

use crate::error::{CliError, CliResult};
use crate::output::{emit, in_dir, json_bytes, to_bytes, write_atomic};
use crate::{
    AnalyzeArgs, ClustersArgs, Command, EigenArgs, FtestArgs, ModelAction, RhoCurveArgs, RhoMethod, RhoStarArgs,
    SizesArg, SweepFArgs, SynthArgs,
};

pub fn run(command: Command) -> CliResult<()> {
    match command {
        Command::Analyze(a) => analyze(a),
        Command::Clusters(a) => clusters(a),
        Command::Model(m) => match m.action {
            ModelAction::Eigen(a) => eigen(a),
            ModelAction::RhoStar(a) => rho_star(a),
            ModelAction::RhoCurve(a) => rho_curve(a),
            ModelAction::SweepF(a) => sweep_f(a),
        },
        Command::Synth(a) => synth(a),
        Command::Ftest(a) => ftest(a),
    }
}

fn load_corr(path: &Path) -> CliResult<CorrelationMatrix> {
    CorrelationMatrix::load(path).map_err(|e| CliError::from(e).at_stage("load"))
}

fn analyze(a: AnalyzeArgs) -> CliResult<()> {
    let opts = AnalysisOptions {
        min_overlap: a.min_overlap,
        deform: a.deform,
        noise_floor: a.noise_floor,
        canonicalize: !a.no_canonicalize,
    };
    let report = match (&a.corr, &a.panel) {
        (Some(corr), _) => analyze_correlation(&load_corr(corr)?, &opts)?,
        (None, Some(path)) => {
            let panel = load_panel(path, a.na.into()).map_err(|e| e.at_stage("load"))?;
            let factors = match &a.factors {
                Some(f) => Some(load_factors(f, a.na.into()).map_err(|e| e.at_stage("load-factors"))?),
                None => None,
            };
            analyze_panel(&panel, factors.as_ref(), &opts)?
        }
        (None, None) => return Err(CliError::Usage("give a panel CSV or --corr".into())),
    };
    let value = serde_json::to_value(&report).expect("report serialises");
    emit(a.out.as_deref(), &json_bytes(&value))
}

fn clusters(a: ClustersArgs) -> CliResult<()> {
    let corr = load_corr(&a.corr)?;
    let (corr, deformed) = if a.deform {
        prepare_for_sweep(&corr, a.noise_floor).map_err(|e| e.at_stage("deform"))?
    } else {
        (corr, false)
    };
    let curve = residual_correlation_sweep(&corr, a.kmax).map_err(|e| e.at_stage("sweep"))?;
    // too few points for the knee rule is reported, not an error
    let knee = if curve.len() > a.window {
        Some(knee_estimate(&curve, a.rel_drop, a.window).map_err(|e| e.at_stage("knee"))?)
    } else {
        None
    };
    let bound = lower_bound_f(&corr);
    let summary = json!({
        "n": corr.n(),
        "k_max": a.kmax,
        "knee": knee.map(|k| k.knee),
        "flat": knee.map(|k| k.flat),
        "rel_drop": a.rel_drop,
        "window": a.window,
        "psi_star": bound.psi_star,
        "lower_bound": bound.lower_bound,
        "lower_bound_ceil": bound.lower_bound_ceil,
        "deformed": deformed,
        "skipped_k": curve.skipped,
    });
    let csv = to_bytes(|buf| curve.write_csv(buf))?;
    write_atomic(&in_dir(&a.out_dir, "sweep.csv")?, &csv)?;
    let bytes = json_bytes(&summary);
    write_atomic(&in_dir(&a.out_dir, "knee.json")?, &bytes)?;
    emit(None, &bytes)
}

fn load_model(path: &Path) -> CliResult<FactorModel> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let value: Value =
        serde_json::from_str(&text).map_err(|source| CliError::Json { path: path.display().to_string(), source })?;
    FactorModel::from_json(&value).map_err(|e| CliError::from(e).at_stage("model"))
}

/// Cheapest exact route for the model's eigenstructure.
fn model_eigen(model: &FactorModel) -> turnover_core::Result<(EigenStructure, &'static str)> {
    if let Some(spec) = model.cluster_spec() {
        return Ok((binary_eigensystem(&spec), "closed-form"));
    }
    if !model.has_specific_risk() {
        if let Some(assign) = model.assignment() {
            let e = reduce_nondiagonal_assigned(assign, model.n_factors(), &model.factor_correlation())?;
            return Ok((e, "reduced-nondiagonal"));
        }
        return Ok((reduce_nonbinary(model)?, "reduced-nonbinary"));
    }
    Ok((dense_eigenstructure(model)?, "dense"))
}

fn eigen(a: EigenArgs) -> CliResult<()> {
    let model = load_model(&a.model)?;
    let (e, method) = if a.dense {
        (dense_eigenstructure(&model)?, "dense")
    } else {
        model_eigen(&model)?
    };
    let mut value = e.to_json();
    value["method"] = json!(method);
    emit(a.out.as_deref(), &json_bytes(&value))
}

fn rho_star(a: RhoStarArgs) -> CliResult<()> {
    let model = load_model(&a.model)?;
    let value = match (a.method, model.cluster_spec()) {
        (RhoMethod::Dense, _) => json!({"rho_star": dense_rho_star(&model)?.rho_star, "method": "dense"}),
        (RhoMethod::Auto, Some(spec)) => {
            let (rho, top) = rho_star_binary(&spec);
            json!({"rho_star": rho, "method": "closed-form", "top_cluster": top + 1})
        }
        (RhoMethod::Auto, None) => {
            let (e, method) = model_eigen(&model)?;
            json!({"rho_star": e.rho_star, "method": method, "top_cluster": e.top_cluster + 1})
        }
    };
    emit(a.out.as_deref(), &json_bytes(&value))
}

fn rho_curve(a: RhoCurveArgs) -> CliResult<()> {
    let model = load_model(&a.model)?;
    let sizes = model
        .sizes()
        .ok_or_else(|| CliError::Usage(format!("{}: rho-curve needs a binary model", a.model.display())))?;
    let grid = if a.grid.is_empty() { (0..100).map(|k| k as f64 / 100.0).collect() } else { a.grid };
    let mut csv = String::from("rho,psi_star\n");
    for rho in grid {
        let psi = secular_largest(&sizes, rho)?;
        csv.push_str(&format!("{},{}\n", sig17(rho), sig17(psi)));
    }
    emit(a.out.as_deref(), csv.as_bytes())
}

fn sweep_f(a: SweepFArgs) -> CliResult<()> {
    let model = load_model(&a.model)?;
    let mut csv = String::from("F,rho_star_min\n");
    for f in 1..=a.fmax {
        let plan = optimal_allocation(model.n(), f)?;
        csv.push_str(&format!("{f},{}\n", sig17(plan.rho_star_min)));
    }
    emit(a.out.as_deref(), csv.as_bytes())
}

fn synth(a: SynthArgs) -> CliResult<()> {
    let factor_rho = match a.factor_rho.as_str() {
        "random" => FactorCorrelation::RandomSpd,
        s => FactorCorrelation::Uniform(
            s.parse().map_err(|_| CliError::Usage(format!("--factor-rho: expected a number or `random`, got {s:?}")))?,
        ),
    };
    let config = SynthConfig {
        seed: a.seed,
        n_alphas: a.n_alphas,
        n_clusters: a.n_clusters,
        n_obs: a.n_obs,
        phi_range: a.phi_range,
        xi_range: a.xi_range,
        factor_rho,
        size_scheme: match a.sizes {
            SizesArg::Equal => SizeScheme::Equal,
            SizesArg::Random => SizeScheme::RandomMultinomial,
        },
    };
    let model = gen_model(&config).map_err(|e| e.at_stage("model"))?;
    let panel = gen_panel(&model, config.n_obs, config.seed).map_err(|e| e.at_stage("panel"))?;
    let panel_path = in_dir(&a.out_dir, "panel.csv")?;
    let model_path = in_dir(&a.out_dir, "model.json")?;
    write_atomic(&panel_path, &to_bytes(|buf| panel.write_csv(buf, Default::default()))?)?;
    write_atomic(&model_path, &json_bytes(&model.to_json()))?;
    let summary = json!({
        "panel": panel_path.display().to_string(),
        "model": model_path.display().to_string(),
        "sizes": model.sizes(),
        "config": config,
    });
    emit(None, &json_bytes(&summary))
}

fn ftest(a: FtestArgs) -> CliResult<()> {
    let load = |p: &Path| load_panel(p, a.na.into()).map_err(|e| CliError::from(e).at_stage("load"));
    let loadings = |p: &Path| BinaryLoadings::load(p).map_err(|e| CliError::from(e).at_stage("load"));
    let panel = load(&a.panel)?;
    let omega_old = loadings(&a.omega_old)?;
    let panel_new = load(&a.panel_new)?;
    let omega_new = loadings(&a.omega_new)?;
    let report = turnover_core::clusters::new_cluster_ftest(&panel, &omega_old, &panel_new, &omega_new, a.winsor)
        .map_err(|e| e.at_stage("ftest"))?;
    write_atomic(&in_dir(&a.out_dir, "ftest.csv")?, &to_bytes(|buf| report.write_csv(buf))?)?;
    let bytes = json_bytes(&report.summary_json());
    write_atomic(&in_dir(&a.out_dir, "verdict.json")?, &bytes)?;
    emit(None, &bytes)
}
