//! One function per mode. Each computes every output in memory and writes
//! the files only at the end, so a failure leaves no partial output.

use std::path::Path;
use std::thread;
use std::time::Instant;

use trust_core::copula::{
    copula_dic, copula_log_density_rows, dependence_report, fit_copula_mcmc, pair_posterior, pseudo_observations,
    CopulaData,
};
use trust_core::inference::{dic, run_mcmc, run_mcmc_standardized, PosteriorDraws, Theta};
use trust_core::numkernel::RngStream;
use trust_core::trust::{
    log_pdf_conditional, log_pdf_joint, log_pdf_location_scale, log_pdf_marginal_block, sample, MarginalTable, Partition,
};
use trust_core::{DMatrix, TrustParams};

use crate::config::{DataScale, GridScale, Mode, ParamSpec, RunConfig};
use crate::error::{CliError, CliResult};
use crate::io::{csv_string, load_csv, matrix_csv, Outputs};
use crate::summary::*;

pub const DRAWS_FILE: &str = "draws.csv";
pub const LATENTS_FILE: &str = "latents.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const PSEUDO_OBS_FILE: &str = "pseudo_obs.csv";
pub const DEPENDENCE_FILE: &str = "dependence.json";
pub const KAPPA_GRID_FILE: &str = "kappa_grid.csv";
pub const SCORES_FILE: &str = "scores.csv";
pub const GRID_FILE: &str = "grid.csv";

/// Runs the configured command and writes its outputs.
pub fn run(cfg: &RunConfig) -> CliResult<Outputs> {
    cfg.validate()?;
    let outputs = match cfg.mode {
        Mode::Simulate => cmd_simulate(cfg)?,
        Mode::FitDist => cmd_fit_dist(cfg)?,
        Mode::FitCopula => cmd_fit_copula(cfg)?,
        Mode::PseudoObs => cmd_pseudo_obs(cfg)?,
        Mode::Dependence => cmd_dependence(cfg)?,
        Mode::Score => cmd_score(cfg)?,
        Mode::DensityGrid => cmd_density_grid(cfg)?,
    };
    outputs.write_all(&cfg.out_dir())?;
    Ok(outputs)
}

fn json<T: serde::Serialize>(v: &T) -> CliResult<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

fn default_names(prefix: &str, d: usize) -> Vec<String> {
    (1..=d).map(|j| format!("{prefix}_{j}")).collect()
}

fn empty_summary(cfg: &RunConfig, d: usize, q: usize, columns: Vec<String>, n_obs: usize) -> RunSummary {
    RunSummary {
        mode: cfg.mode,
        d,
        q,
        columns,
        n_obs,
        n_draws: 0,
        parameters: vec![],
        acceptance: vec![],
        dic: None,
        point_estimate: None,
        dependence: vec![],
        sample_moments: None,
        wall_clock_seconds: None,
        versions: Versions::current(),
        config: cfg.clone(),
    }
}

fn moments(y: &DMatrix<f64>) -> Moments {
    let (n, d) = (y.nrows() as f64, y.ncols());
    let mean: Vec<f64> = (0..d).map(|j| y.column(j).sum() / n).collect();
    let cov = |a: usize, b: usize| {
        y.column(a).iter().zip(y.column(b).iter()).map(|(x, z)| (x - mean[a]) * (z - mean[b])).sum::<f64>() / (n - 1.0)
    };
    let sd: Vec<f64> = (0..d).map(|j| cov(j, j).sqrt()).collect();
    let corr = (0..d).map(|a| (0..d).map(|b| cov(a, b) / (sd[a] * sd[b])).collect()).collect();
    Moments { mean, sd, corr }
}

pub fn cmd_simulate(cfg: &RunConfig) -> CliResult<Outputs> {
    let spec = cfg.params.as_ref().expect("validated");
    let p = spec.params(cfg.prior.eps)?;
    let ls = spec.loc_scale()?;
    let mut rng = RngStream::new(cfg.seed(), 0);
    let s = sample(&p, ls.as_ref(), cfg.n, &mut rng)?;
    let names = default_names("y", p.dim());
    let mut out = Outputs::default();
    out.add(DRAWS_FILE, matrix_csv(&names, &s.draws));
    if cfg.write_latents {
        let mut lat_names = default_names("l", p.q());
        lat_names.push("w".into());
        let rows = (0..cfg.n).map(|i| {
            let mut r: Vec<f64> = s.l.row(i).iter().copied().collect();
            r.push(s.w[i]);
            r
        });
        out.add(LATENTS_FILE, csv_string(&lat_names, rows));
    }
    let mut summary = empty_summary(cfg, p.dim(), p.q(), names, cfg.n);
    summary.point_estimate = Some(spec.clone());
    summary.sample_moments = Some(moments(&s.draws));
    out.add(SUMMARY_FILE, json(&summary)?);
    Ok(out)
}

/// Runs `cfg.chains` chains on disjoint streams and concatenates them in
/// chain order.
fn run_chains(cfg: &RunConfig, f: impl Fn(&mut RngStream) -> trust_core::Result<PosteriorDraws> + Sync) -> CliResult<PosteriorDraws> {
    let seed = cfg.seed();
    let results: Vec<trust_core::Result<PosteriorDraws>> = thread::scope(|s| {
        let handles: Vec<_> = (0..cfg.chains)
            .map(|c| {
                let f = &f;
                s.spawn(move || f(&mut RngStream::new(seed, 1 + c as u64)))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("chain worker panicked")).collect()
    });
    let mut merged: Option<PosteriorDraws> = None;
    let chains = results.len() as f64;
    for r in results {
        let d = r?;
        match merged.as_mut() {
            None => merged = Some(d),
            Some(m) => {
                m.theta.extend(d.theta);
                m.ext_loglik.extend(d.ext_loglik);
                m.loglik.extend(d.loglik);
                for (a, b) in m.acceptance.iter_mut().zip(&d.acceptance) {
                    *a += b;
                }
            }
        }
    }
    let mut m = merged.expect("at least one chain");
    m.acceptance.iter_mut().for_each(|a| *a /= chains);
    Ok(m)
}

fn draws_csv(draws: &PosteriorDraws) -> String {
    csv_string(&draws.names(), draws.flattened())
}

fn fit_summary(cfg: &RunConfig, draws: &PosteriorDraws, columns: Vec<String>, n_obs: usize, d: &trust_core::inference::DicResult) -> RunSummary {
    let mut s = empty_summary(cfg, draws.d, draws.q, columns, n_obs);
    s.n_draws = draws.len();
    s.parameters = param_stats(draws);
    s.acceptance = acceptance(draws);
    s.dic = Some(DicSummary::from(d));
    s.point_estimate = Some(param_spec(&d.point.theta));
    s
}

pub fn cmd_fit_dist(cfg: &RunConfig) -> CliResult<Outputs> {
    let t0 = Instant::now();
    let table = load_csv(cfg.data.as_ref().expect("validated"))?;
    let mcmc = cfg.mcmc_config();
    let fit = if cfg.fix_loc_scale { run_mcmc_standardized } else { run_mcmc };
    let draws = run_chains(cfg, |rng| fit(&table.data, cfg.q, &mcmc, &cfg.prior, rng))?;
    let d = dic(&draws, &table.data)?;
    let mut summary = fit_summary(cfg, &draws, table.names.clone(), table.data.nrows(), &d);
    if cfg.record_timing {
        summary.wall_clock_seconds = Some(t0.elapsed().as_secs_f64());
    }
    let mut out = Outputs::default();
    out.add(DRAWS_FILE, draws_csv(&draws));
    out.add(SUMMARY_FILE, json(&summary)?);
    Ok(out)
}

fn copula_input(cfg: &RunConfig, path: &Path) -> CliResult<(Vec<String>, CopulaData)> {
    let table = load_csv(path)?;
    let u = match cfg.data_scale {
        DataScale::Raw => pseudo_observations(&table.data)?,
        DataScale::Uniform => CopulaData::new(table.data)?,
    };
    Ok((table.names, u))
}

pub fn cmd_fit_copula(cfg: &RunConfig) -> CliResult<Outputs> {
    let t0 = Instant::now();
    let (names, u) = copula_input(cfg, cfg.data.as_ref().expect("validated"))?;
    let mcmc = cfg.mcmc_config();
    let draws = run_chains(cfg, |rng| fit_copula_mcmc(&u, cfg.q, &mcmc, &cfg.prior, rng))?;
    let d = copula_dic(&draws, &u)?;
    let mut summary = fit_summary(cfg, &draws, names, u.n(), &d);
    if cfg.dependence_draws > 0 {
        let every = (draws.len() / cfg.dependence_draws).max(1);
        for i in 0..u.d() {
            for j in 0..i {
                let pp = pair_posterior(&draws, (j, i), cfg.kappa, every)?;
                let st = |s: trust_core::copula::PosteriorSummary| Stat { mean: s.mean, sd: s.sd };
                summary.dependence.push(PairSummary {
                    pair: (i + 1, j + 1),
                    kendall: st(pp.kendall),
                    spearman: st(pp.spearman),
                    lambda_major: st(pp.lambda_major),
                    lambda_minor: st(pp.lambda_minor),
                });
            }
        }
    }
    if cfg.record_timing {
        summary.wall_clock_seconds = Some(t0.elapsed().as_secs_f64());
    }
    let mut out = Outputs::default();
    out.add(DRAWS_FILE, draws_csv(&draws));
    out.add(SUMMARY_FILE, json(&summary)?);
    Ok(out)
}

pub fn cmd_pseudo_obs(cfg: &RunConfig) -> CliResult<Outputs> {
    let table = load_csv(cfg.data.as_ref().expect("validated"))?;
    let u = pseudo_observations(&table.data)?;
    let mut out = Outputs::default();
    out.add(PSEUDO_OBS_FILE, matrix_csv(&table.names, u.u()));
    Ok(out)
}

pub fn read_summary(path: &Path) -> CliResult<RunSummary> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::validation(format!("cannot read {}: {e}", path.display())))?;
    Ok(serde_json::from_str(&text)?)
}

/// The parameter point of a command: explicit, or a summary's plug-in point.
fn point(cfg: &RunConfig) -> CliResult<(ParamSpec, Option<RunSummary>)> {
    if let Some(p) = &cfg.params {
        return Ok((p.clone(), None));
    }
    let s = read_summary(cfg.summary.as_ref().expect("validated"))?;
    let p = s
        .point_estimate
        .clone()
        .ok_or_else(|| CliError::validation("summary has no point estimate"))?;
    Ok((p, Some(s)))
}

pub fn cmd_dependence(cfg: &RunConfig) -> CliResult<Outputs> {
    let (spec, _) = point(cfg)?;
    let p = spec.params(cfg.prior.eps)?;
    if p.dim() < 2 {
        return Err(CliError::validation("dependence needs at least two margins"));
    }
    let mut kappas = cfg.kappas.clone();
    if !kappas.contains(&cfg.kappa) {
        kappas.push(cfg.kappa);
        kappas.sort_by(f64::total_cmp);
    }
    let report = dependence_report(&p, &kappas)?;
    let mut rows = Vec::new();
    for pd in &report.pairs {
        for (k, qd) in pd.quadrants.iter().enumerate() {
            rows.push(vec![
                pd.pair.0 as f64,
                pd.pair.1 as f64,
                qd.kappa,
                qd.ll,
                qd.ur,
                qd.lr,
                qd.ul,
                pd.lambda_major[k],
                pd.lambda_minor[k],
            ]);
        }
    }
    let names: Vec<String> = ["i", "j", "kappa", "lambda_ll", "lambda_ur", "lambda_lr", "lambda_ul", "lambda_major", "lambda_minor"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let mut out = Outputs::default();
    out.add(DEPENDENCE_FILE, json(&report)?);
    out.add(KAPPA_GRID_FILE, csv_string(&names, rows));
    Ok(out)
}

/// Per-row log scores of the held-out data under a fitted summary.
fn scores_for(cfg: &RunConfig, s: &RunSummary, held_out: &Path) -> CliResult<Vec<f64>> {
    let spec = s
        .point_estimate
        .as_ref()
        .ok_or_else(|| CliError::validation("summary has no point estimate"))?;
    let p = spec.params(s.config.prior.eps)?;
    match s.mode {
        Mode::FitCopula => {
            let (_, u) = copula_input(cfg, held_out)?;
            if u.d() != s.d {
                return Err(CliError::validation(format!("held-out data has {} columns, the fit has {}", u.d(), s.d)));
            }
            Ok(copula_log_density_rows(&u, &p)?)
        }
        Mode::FitDist | Mode::Simulate => {
            let t = load_csv(held_out)?;
            if t.data.ncols() != s.d {
                return Err(CliError::validation(format!("held-out data has {} columns, the fit has {}", t.data.ncols(), s.d)));
            }
            let ls = spec.loc_scale()?.unwrap_or_else(|| trust_core::LocationScale::standard(s.d));
            (0..t.data.nrows())
                .map(|i| Ok(log_pdf_location_scale(&t.data.row(i).iter().copied().collect::<Vec<_>>(), &ls, &p)?))
                .collect()
        }
        m => Err(CliError::validation(format!("cannot score against a {m:?} summary"))),
    }
}

fn cumulative(v: &[f64]) -> Vec<f64> {
    v.iter()
        .scan(0.0, |a, x| {
            *a += x;
            Some(*a)
        })
        .collect()
}

pub fn cmd_score(cfg: &RunConfig) -> CliResult<Outputs> {
    let held_out = cfg.data.as_ref().expect("validated");
    let a = scores_for(cfg, &read_summary(cfg.summary.as_ref().expect("validated"))?, held_out)?;
    let ca = cumulative(&a);
    let (names, rows): (Vec<&str>, Vec<Vec<f64>>) = match &cfg.compare_summary {
        None => (
            vec!["row", "score", "cumulative"],
            (0..a.len()).map(|i| vec![(i + 1) as f64, a[i], ca[i]]).collect(),
        ),
        Some(path) => {
            let b = scores_for(cfg, &read_summary(path)?, held_out)?;
            let cb = cumulative(&b);
            (
                vec!["row", "score", "cumulative", "score_b", "cumulative_b", "difference", "cumulative_difference"],
                (0..a.len())
                    .map(|i| vec![(i + 1) as f64, a[i], ca[i], b[i], cb[i], a[i] - b[i], ca[i] - cb[i]])
                    .collect(),
            )
        }
    };
    let names: Vec<String> = names.iter().map(|s| s.to_string()).collect();
    let mut out = Outputs::default();
    out.add(SCORES_FILE, csv_string(&names, rows));
    Ok(out)
}

/// log density of (z_i, z_j): the joint when d = 2, a conditional slice
/// when the other coordinates are given, and the bivariate margin otherwise.
fn pair_log_density(p: &TrustParams, pair: (usize, usize), z: [f64; 2], cond: Option<&[f64]>) -> trust_core::Result<f64> {
    let d = p.dim();
    let rest: Vec<usize> = (0..d).filter(|&k| k != pair.0 && k != pair.1).collect();
    if rest.is_empty() {
        let mut full = [0.0; 2];
        full[pair.0] = z[0];
        full[pair.1] = z[1];
        return log_pdf_joint(&full, p);
    }
    match cond {
        Some(c) => log_pdf_conditional(&z, c, &Partition::new(vec![pair.0, pair.1], rest, d)?, p),
        None => log_pdf_marginal_block(&z, &[pair.0, pair.1], p),
    }
}

pub fn cmd_density_grid(cfg: &RunConfig) -> CliResult<Outputs> {
    let g = cfg.grid.as_ref().expect("validated");
    let (spec, _) = point(cfg)?;
    let p = spec.params(cfg.prior.eps)?;
    let d = p.dim();
    let [a, b] = g.pair;
    if a == b || a == 0 || b == 0 || a > d || b > d {
        return Err(CliError::validation(format!("invalid grid pair ({a}, {b}) for d = {d}")));
    }
    if g.points < 2 || !(g.lo < g.hi) {
        return Err(CliError::validation("grid needs at least two points and lo < hi"));
    }
    let pair = (a - 1, b - 1);
    let cond = g.conditioning.as_deref();
    if let Some(c) = cond {
        if c.len() != d - 2 {
            return Err(CliError::validation(format!("conditioning needs {} values", d - 2)));
        }
        if g.scale == GridScale::U {
            return Err(CliError::validation("conditional slices are given on the z scale only"));
        }
    }
    let n = g.points;
    let nodes: Vec<f64> = match g.scale {
        GridScale::Z => (0..n).map(|k| g.lo + (g.hi - g.lo) * k as f64 / (n - 1) as f64).collect(),
        // cell midpoints of (0, 1)
        GridScale::U => (0..n).map(|k| (k as f64 + 0.5) / n as f64).collect(),
    };
    let mut rows = Vec::with_capacity(n * n);
    match g.scale {
        GridScale::Z => {
            for &x in &nodes {
                for &y in &nodes {
                    rows.push(vec![x, y, pair_log_density(&p, pair, [x, y], cond)?.exp()]);
                }
            }
        }
        GridScale::U => {
            let (ta, tb) = (MarginalTable::cached(&p, pair.0)?, MarginalTable::cached(&p, pair.1)?);
            let za: Vec<f64> = nodes.iter().map(|&u| ta.quantile(u)).collect::<trust_core::Result<_>>()?;
            let zb: Vec<f64> = nodes.iter().map(|&u| tb.quantile(u)).collect::<trust_core::Result<_>>()?;
            for (ia, &x) in nodes.iter().enumerate() {
                for (ib, &y) in nodes.iter().enumerate() {
                    let lf = pair_log_density(&p, pair, [za[ia], zb[ib]], None)? - ta.log_pdf(za[ia]) - tb.log_pdf(zb[ib]);
                    rows.push(vec![x, y, lf.exp()]);
                }
            }
        }
    }
    let prefix = if g.scale == GridScale::Z { "z" } else { "u" };
    let names = vec![format!("{prefix}_{a}"), format!("{prefix}_{b}"), "density".to_string()];
    let mut out = Outputs::default();
    out.add(GRID_FILE, csv_string(&names, rows));
    Ok(out)
}

/// Stored draws rebuilt from a draws CSV (for external tooling and tests).
pub fn theta_from_row(d: usize, q: usize, with_loc_scale: bool, row: &[f64]) -> CliResult<Theta> {
    Ok(Theta::unflatten(d, q, with_loc_scale, row)?)
}
