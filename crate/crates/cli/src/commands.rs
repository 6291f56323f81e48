//! Subcommand implementations: parse a config, run the corresponding
//! pipeline, write outputs plus a manifest under the output directory.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_complex::Complex;
use rand::Rng;
use serde_json::json;

use gsr_core::discretization::{
    g_matrix, incoherence_estimate, rip_check, unconditionality_estimate, verify_usd, RipNorm,
    SearchConfig, SystemNorm,
};
use gsr_core::experiments::{
    lebesgue_ensemble, lebesgue_table_csv, lebesgue_table_json, linear_baseline, manifest_json,
    member_json, rate_table_csv, rate_table_json, rate_table_svg, recovery_pipeline, trace_json,
    RateTable,
};
use gsr_core::greedy::{
    bv_best_vterm_recovery, sigma_v_bruteforce, wcga_run, SampledSystem, WcgaParams,
};
use gsr_core::lp::{LpExponent, SampledFunction};
use gsr_core::points::{draw_random_points, DiscreteMeasure, PointSet};
use gsr_core::trig::{eval_coeffs, CoefficientVector, TrigSystem};
use gsr_core::classes::{sample_member, ClassSpec, MemberMode};
use gsr_core::rng::stream;

use crate::configs::*;

/// Error carrying the intended process exit code.
#[derive(Debug)]
pub struct CmdError {
    pub code: i32,
    pub message: String,
}

impl CmdError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    pub fn failure(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }
}

impl From<gsr_core::Error> for CmdError {
    fn from(e: gsr_core::Error) -> Self {
        CmdError::failure(e.to_string())
    }
}

impl From<std::io::Error> for CmdError {
    fn from(e: std::io::Error) -> Self {
        CmdError::failure(format!("io error: {}", e))
    }
}

pub type CmdResult = Result<(), CmdError>;

pub struct Ctx {
    pub config_path: PathBuf,
    pub config_text: String,
    pub out_dir: PathBuf,
    pub seed_override: Option<u64>,
}

impl Ctx {
    pub fn parse<T: serde::de::DeserializeOwned>(&self) -> Result<T, CmdError> {
        serde_json::from_str(&self.config_text).map_err(|e| {
            CmdError::usage(format!(
                "malformed config {}: {} (line {}, column {})",
                self.config_path.display(),
                e,
                e.line(),
                e.column()
            ))
        })
    }

    pub fn resolve_seed(&self, config_seed: u64) -> u64 {
        self.seed_override.unwrap_or(config_seed)
    }

    pub fn write(&self, name: &str, bytes: &[u8]) -> Result<String, CmdError> {
        fs::create_dir_all(&self.out_dir)?;
        let path = self.out_dir.join(name);
        fs::write(&path, bytes)?;
        Ok(name.to_string())
    }

    pub fn write_json(&self, name: &str, value: &serde_json::Value) -> Result<String, CmdError> {
        let mut text = serde_json::to_string_pretty(value)
            .map_err(|e| CmdError::failure(format!("serialization: {}", e)))?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    pub fn finish(
        &self,
        subcommand: &str,
        seed: u64,
        outputs: Vec<String>,
        extra: serde_json::Value,
    ) -> CmdResult {
        let manifest = manifest_json(subcommand, &self.config_text, seed, &outputs, extra);
        self.write_json("manifest.json", &manifest)?;
        Ok(())
    }
}

fn load_or_draw_points(
    dim: usize,
    m: Option<usize>,
    points_csv: &Option<String>,
    seed: u64,
) -> Result<PointSet<f64>, CmdError> {
    match points_csv {
        Some(path) => {
            let file = fs::File::open(Path::new(path))
                .map_err(|e| CmdError::usage(format!("points file {}: {}", path, e)))?;
            Ok(PointSet::read_csv(std::io::BufReader::new(file))?)
        }
        None => {
            let m = m.ok_or_else(|| {
                CmdError::usage("config needs either m or points_csv".to_string())
            })?;
            Ok(draw_random_points::<f64>(dim, m, seed)?)
        }
    }
}

pub fn discretize(ctx: &Ctx) -> CmdResult {
    let cfg: DiscretizeConfig = ctx.parse()?;
    let seed = ctx.resolve_seed(cfg.seed);
    let points = draw_random_points::<f64>(cfg.dim, cfg.m, seed)?;
    let mut csv = Vec::new();
    points.write_csv(&mut csv)?;
    let out = ctx.write("points.csv", &csv)?;
    ctx.finish("discretize", seed, vec![out], json!({ "dim": cfg.dim, "m": cfg.m }))
}

pub fn verify_usd_cmd(ctx: &Ctx) -> CmdResult {
    let cfg: VerifyUsdConfig = ctx.parse()?;
    let seed = ctx.resolve_seed(cfg.seed);
    let system = TrigSystem::new(cfg.dim, cfg.level)?;
    let p = LpExponent::new(cfg.p)?;
    let points = match cfg.grid {
        Some(per_axis) => gsr_core::points::uniform_grid(cfg.dim, per_axis)?,
        None => load_or_draw_points(cfg.dim, cfg.m, &cfg.points_csv, seed)?,
    };
    let report = verify_usd(
        &system,
        &points,
        cfg.sparsity,
        p,
        &SearchConfig::new(cfg.trials, cfg.refine_cycles, seed),
    )?;
    let out = ctx.write_json("usd_report.json", &report.to_json())?;
    let pass = report.pass;
    ctx.finish(
        "verify-usd",
        seed,
        vec![out],
        json!({
            "pass": pass,
            "lower_ratio": report.lower_ratio,
            "upper_ratio": report.upper_ratio,
        }),
    )?;
    if pass {
        Ok(())
    } else {
        Err(CmdError::failure(format!(
            "universal discretization certificate failed: ratios [{}, {}]",
            report.lower_ratio, report.upper_ratio
        )))
    }
}

pub fn rip_check_cmd(ctx: &Ctx) -> CmdResult {
    let cfg: RipCheckConfig = ctx.parse()?;
    let seed = ctx.resolve_seed(cfg.seed);
    let system = Arc::new(TrigSystem::new(cfg.dim, cfg.level)?);
    let p = LpExponent::new(cfg.p)?;
    let points = load_or_draw_points(cfg.dim, cfg.m, &cfg.points_csv, seed)?;
    let columns = g_matrix(&system, &points, p);
    let norm = match cfg.norm {
        RipNormKind::Euclidean => RipNorm::Euclidean,
        RipNormKind::Synthesis => RipNorm::TrigSynthesis {
            system: Arc::clone(&system),
        },
    };
    let report = rip_check(
        &columns,
        &norm,
        p,
        cfg.v,
        &SearchConfig::new(cfg.trials, cfg.refine_cycles, seed),
    )?;
    let out = ctx.write_json("rip_report.json", &report.to_json())?;
    ctx.finish(
        "rip-check",
        seed,
        vec![out],
        json!({ "delta_estimate": report.delta_estimate }),
    )
}

pub fn incoherence_cmd(ctx: &Ctx) -> CmdResult {
    let cfg: IncoherenceConfig = ctx.parse()?;
    let seed = ctx.resolve_seed(cfg.seed);
    let system = Arc::new(TrigSystem::new(cfg.dim, cfg.level)?);
    let p = LpExponent::new(cfg.p)?;
    let norm = match &cfg.context {
        NormContextConfig::Continuous => SystemNorm::ContinuousTrig {
            system: Arc::clone(&system),
            p,
        },
        NormContextConfig::Discrete { m } => {
            let points = draw_random_points::<f64>(cfg.dim, *m, seed)?;
            let measure = Arc::new(DiscreteMeasure::uniform(points));
            SystemNorm::OnMeasure {
                system: SampledSystem::trig(Arc::clone(&system), measure)?,
                p,
            }
        }
        NormContextConfig::Mixed { m } => {
            let points = draw_random_points::<f64>(cfg.dim, *m, seed)?;
            let empirical = DiscreteMeasure::uniform(points);
            let quad = DiscreteMeasure::quadrature(cfg.dim, system.max_frequency())?;
            let mixed = Arc::new(DiscreteMeasure::mixed(&quad, &empirical)?);
            SystemNorm::OnMeasure {
                system: SampledSystem::trig(Arc::clone(&system), mixed)?,
                p,
            }
        }
    };
    let search = SearchConfig::new(cfg.trials, cfg.refine_cycles, seed);
    let est = incoherence_estimate(&norm, cfg.v, cfg.s, cfg.exponent_r, &search)?;
    let mut outputs = vec![ctx.write_json("incoherence.json", &est.to_json())?];
    let mut extra = json!({ "v_estimate": est.v_estimate });
    if cfg.unconditionality {
        let unc = unconditionality_estimate(&norm, cfg.v, cfg.s, &search)?;
        outputs.push(ctx.write_json("unconditionality.json", &unc.to_json())?);
        extra["u_estimate"] = json!(unc.u_estimate);
    }
    ctx.finish("incoherence", seed, outputs, extra)
}

fn build_signal(
    spec: &SignalSpec,
    system: &TrigSystem,
    seed: u64,
) -> Result<CoefficientVector<f64>, CmdError> {
    match spec {
        SignalSpec::Sparse {
            terms,
            perturbation,
        } => {
            let mut rng = stream(seed, "recover-signal", 0);
            let mut signal = CoefficientVector::<f64>::new();
            let n = system.len();
            let mut pool: Vec<usize> = (0..n).collect();
            for i in 0..(*terms).min(n) {
                let pick = rng.random_range(i..n);
                pool.swap(i, pick);
                signal.insert(
                    system.frequency(pool[i]).clone(),
                    Complex::from_polar(
                        0.5 + rng.random::<f64>(),
                        rng.random::<f64>() * std::f64::consts::TAU,
                    ),
                );
            }
            if *perturbation > 0.0 {
                let amp = perturbation / n as f64;
                for i in 0..n {
                    let z = Complex::from_polar(
                        amp * rng.random::<f64>(),
                        rng.random::<f64>() * std::f64::consts::TAU,
                    );
                    let k = system.frequency(i).clone();
                    let prev = signal.get(&k);
                    signal.insert(k, prev + z);
                }
            }
            Ok(signal)
        }
        SignalSpec::Member {
            smoothness_r,
            beta,
            density,
            level,
        } => {
            let spec = ClassSpec::<f64>::new(*smoothness_r, *beta, system.dim())?;
            Ok(sample_member(
                &spec,
                *level,
                *density,
                MemberMode::Extremal,
                seed,
                0,
            )?)
        }
    }
}

pub fn recover(ctx: &Ctx) -> CmdResult {
    let cfg: RecoverConfig = ctx.parse()?;
    let seed = ctx.resolve_seed(cfg.seed);
    let system = Arc::new(TrigSystem::new(cfg.dim, cfg.level)?);
    let p = LpExponent::new(cfg.p)?;
    let signal = build_signal(&cfg.signal, &system, seed)?;
    let points = draw_random_points::<f64>(cfg.dim, cfg.m, seed)?;
    let measure = Arc::new(DiscreteMeasure::uniform(points));
    let sampled = SampledSystem::trig(Arc::clone(&system), Arc::clone(&measure))?;
    let f0 = SampledFunction::new(eval_coeffs(&signal, measure.support()), Arc::clone(&measure))?;
    let mut params = WcgaParams::new(p, cfg.t);
    params.max_iter = cfg.max_iter;
    params.stop_tol = cfg.stop_tol;
    let trace = wcga_run(&f0, &sampled, &params)?;
    let class_stub = gsr_core::experiments::ClassConfig {
        smoothness_r: 0.0,
        beta: 1.0,
        dim: cfg.dim,
    };
    let outputs = vec![
        ctx.write_json("trace.json", &trace_json(&trace, &sampled))?,
        ctx.write_json("signal.json", &member_json(&signal, &class_stub))?,
    ];
    ctx.finish(
        "recover",
        seed,
        outputs,
        json!({
            "iterations": trace.iterations(),
            "final_residual": trace.final_residual_norm(),
            "stop": format!("{:?}", trace.stop),
        }),
    )
}

pub fn rates(ctx: &Ctx) -> CmdResult {
    let cfg: RatesConfig = ctx.parse()?;
    let mut experiment = cfg.experiment.clone();
    let seed = ctx.resolve_seed(experiment.seed);
    experiment.seed = seed;
    let table = recovery_pipeline::<f64>(&experiment)?;
    let mut outputs = vec![
        ctx.write("rates.csv", rate_table_csv(&table).as_bytes())?,
        ctx.write_json("rates.json", &rate_table_json(&table))?,
        ctx.write(
            "rates.svg",
            rate_table_svg(&table, cfg.reference_slope).as_bytes(),
        )?,
    ];
    let mut extra = json!({
        "slope": table.fit.as_ref().map(|f| f.slope),
        "certified_rows": table.rows.iter().filter(|r| r.gate.certified).count(),
    });
    if cfg.with_linear {
        let linear = linear_baseline::<f64>(&experiment)?;
        outputs.push(ctx.write("linear_rates.csv", rate_table_csv(&linear).as_bytes())?);
        outputs.push(ctx.write_json("linear_rates.json", &rate_table_json(&linear))?);
        outputs.push(ctx.write(
            "linear_rates.svg",
            rate_table_svg(&linear, cfg.reference_slope.map(|_| -1.0)).as_bytes(),
        )?);
        extra["linear_slope"] = json!(linear.fit.as_ref().map(|f| f.slope));
    }
    let any_uncertified = table.rows.iter().any(|r| !r.gate.certified);
    ctx.finish("rates", seed, outputs, extra)?;
    if any_uncertified {
        Err(CmdError::failure(
            "one or more cells failed certification; see rates.json".to_string(),
        ))
    } else {
        Ok(())
    }
}

pub fn lebesgue(ctx: &Ctx) -> CmdResult {
    let mut cfg: LebesgueConfig = ctx.parse()?;
    let seed = ctx.resolve_seed(cfg.seed);
    cfg.seed = seed;
    let table = lebesgue_ensemble::<f64>(&cfg)?;
    let outputs = vec![
        ctx.write("lebesgue.csv", lebesgue_table_csv(&table).as_bytes())?,
        ctx.write_json("lebesgue.json", &lebesgue_table_json(&table))?,
    ];
    ctx.finish(
        "lebesgue",
        seed,
        outputs,
        json!({
            "ratio_quantiles": table.ratio_quantiles,
            "bv_no_worse_fraction": table.bv_no_worse_fraction,
        }),
    )
}

pub fn oracle_compare(ctx: &Ctx) -> CmdResult {
    let cfg: OracleCompareConfig = ctx.parse()?;
    let seed = ctx.resolve_seed(cfg.seed);
    let system = Arc::new(TrigSystem::new(cfg.dim, cfg.level)?);
    let p = LpExponent::new(cfg.p)?;
    let cap = cfg.oracle_cap as u128;
    let mut rows = Vec::new();
    let mut pass = true;
    for instance in 0..cfg.instances {
        let inst_seed = seed ^ gsr_core::rng::fnv1a(format!("oracle:{}", instance).as_bytes());
        let signal = build_signal(
            &SignalSpec::Sparse {
                terms: cfg.sparse_terms,
                perturbation: cfg.perturbation,
            },
            &system,
            inst_seed,
        )?;
        let points = draw_random_points::<f64>(cfg.dim, cfg.m, inst_seed)?;
        let measure = Arc::new(DiscreteMeasure::uniform(points));
        let sampled = SampledSystem::trig(Arc::clone(&system), Arc::clone(&measure))?;
        let f0 =
            SampledFunction::new(eval_coeffs(&signal, measure.support()), Arc::clone(&measure))?;
        let mut params = WcgaParams::new(p, 1.0);
        params.max_iter = cfg.v_max;
        let trace = wcga_run(&f0, &sampled, &params)?;
        for u in 1..=cfg.v_max.min(trace.iterations()) {
            let sigma = sigma_v_bruteforce(&f0, &sampled, u, p, cap)?;
            let bv = bv_best_vterm_recovery(&f0, &sampled, u, p, cap)?;
            let wcga_err = trace.residual_norms[u];
            let dominated = wcga_err >= sigma.error - 1e-9;
            let bv_equal = bv.error == sigma.error && bv.support == sigma.support;
            pass &= dominated && bv_equal;
            rows.push(json!({
                "instance": instance,
                "u": u,
                "wcga_error": wcga_err,
                "sigma_error": sigma.error,
                "bv_error": bv.error,
                "dominated": dominated,
                "bv_equals_sigma": bv_equal,
            }));
        }
    }
    let report = json!({ "rows": rows, "pass": pass });
    let out = ctx.write_json("oracle_compare.json", &report)?;
    ctx.finish("oracle-compare", seed, vec![out], json!({ "pass": pass }))?;
    if pass {
        Ok(())
    } else {
        Err(CmdError::failure(
            "oracle comparison found a violation; see oracle_compare.json".to_string(),
        ))
    }
}

pub fn plot(ctx: &Ctx) -> CmdResult {
    let cfg: PlotConfig = ctx.parse()?;
    let seed = ctx.resolve_seed(cfg.seed);
    let text = fs::read_to_string(Path::new(&cfg.table))
        .map_err(|e| CmdError::usage(format!("table {}: {}", cfg.table, e)))?;
    let table: RateTable = serde_json::from_str(&text)
        .map_err(|e| CmdError::usage(format!("table {}: {}", cfg.table, e)))?;
    let out = ctx.write(
        "plot.svg",
        rate_table_svg(&table, cfg.reference_slope).as_bytes(),
    )?;
    ctx.finish("plot", seed, vec![out], json!({ "source": cfg.table }))
}
