use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use robsparse::analysis::{
    default_grid, deviation_metrics, frequency_response, is_hurwitz, link_density, nnz, sample_uncertainty, DeviationMetrics, DifferenceSystem,
    RobustnessReport,
};
use robsparse::matops::SymMatrix;
use robsparse::power::{link_uncertainty, lqr_baseline, swing_model, PowerNetwork};
use robsparse::sparsifier::{self, RankCertificate, Recertification, RunStatus, SparsifierOptions};
use robsparse::system::{StructureSet, UncertainLti};

use crate::files::{gain_json, matrix_csv, parse_links, parse_rho_list, read_gain, Staged, SWEEP_SCHEMA_VERSION};
use crate::{AnalyzeArgs, DesignArgs, Inputs, SweepArgs, Tuning};

pub const REPORT_SCHEMA_VERSION: u32 = 1;
const ROBUSTNESS_SAMPLES: usize = 200;

struct Problem {
    sys: UncertainLti,
    k_hat: DMatrix<f64>,
    net: Option<PowerNetwork>,
    link: Option<LinkInfo>,
}

#[derive(Debug, Clone, Serialize)]
struct LinkInfo {
    /// 1-based generator indices.
    i: usize,
    j: usize,
    rho_rel: f64,
    rho: f64,
    fallback: bool,
}

fn lqr_default(sys: &UncertainLti) -> Result<DMatrix<f64>> {
    let r = SymMatrix::new(DMatrix::identity(sys.m(), sys.m()) * 10.0)?;
    Ok(lqr_baseline(sys, &SymMatrix::identity(sys.n()), &r).context("LQR baseline")?)
}

fn load_network(path: &Path) -> Result<PowerNetwork> {
    PowerNetwork::load(path).with_context(|| format!("loading network {}", path.display()))
}

/// Builds the plant and reference gain. `reference` overrides the LQR
/// default for networks and is required for plain systems.
fn load_problem(inputs: &Inputs, reference: Option<&Path>, link: Option<(usize, usize, f64)>) -> Result<Problem> {
    match (&inputs.system, &inputs.network) {
        (Some(path), None) => {
            if link.is_some() {
                bail!("--links applies to --network inputs only");
            }
            let sys = UncertainLti::load(path).with_context(|| format!("loading system {}", path.display()))?;
            let Some(r) = reference else {
                bail!("a reference gain file is required with --system");
            };
            let k_hat = read_gain(r)?;
            if k_hat.shape() != (sys.m(), sys.q()) {
                bail!("reference gain is {}x{}, system needs {}x{}", k_hat.nrows(), k_hat.ncols(), sys.m(), sys.q());
            }
            Ok(Problem { sys, k_hat, net: None, link: None })
        }
        (None, Some(path)) => {
            let net = load_network(path)?;
            let nominal = swing_model(&net)?;
            let k_hat = match reference {
                Some(r) => read_gain(r)?,
                None => lqr_default(&nominal)?,
            };
            if k_hat.shape() != (nominal.m(), nominal.q()) {
                bail!("reference gain is {}x{}, network needs {}x{}", k_hat.nrows(), k_hat.ncols(), nominal.m(), nominal.q());
            }
            let (sys, link) = match link {
                Some((i, j, rho_rel)) => {
                    let u = link_uncertainty(&net, i, j, rho_rel)?;
                    let info = LinkInfo {
                        i: i + 1,
                        j: j + 1,
                        rho_rel,
                        rho: u.rho,
                        fallback: u.fallback,
                    };
                    (u.apply(&nominal)?, Some(info))
                }
                None => (nominal, None),
            };
            Ok(Problem {
                sys,
                k_hat,
                net: Some(net),
                link,
            })
        }
        (None, None) => bail!("one of --system or --network is required"),
        (Some(_), Some(_)) => unreachable!("clap rejects both"),
    }
}

fn options(t: &Tuning) -> SparsifierOptions {
    SparsifierOptions {
        lambda1: t.lambda1,
        lambda2: t.lambda2,
        nu: t.nu,
        xi: t.xi,
        eps_star: t.eps_star,
        truncation_threshold: t.truncate,
        max_outer_iters: t.max_outer,
        ..SparsifierOptions::default()
    }
}

#[derive(Serialize)]
struct OptionsEcho {
    lambda1: f64,
    lambda2: f64,
    nu: f64,
    xi: f64,
    eps_star: f64,
    truncation_threshold: f64,
    reweight_iters: usize,
    max_outer_iters: usize,
}

impl From<&SparsifierOptions> for OptionsEcho {
    fn from(o: &SparsifierOptions) -> Self {
        OptionsEcho {
            lambda1: o.lambda1,
            lambda2: o.lambda2,
            nu: o.nu,
            xi: o.xi,
            eps_star: o.eps_star,
            truncation_threshold: o.truncation_threshold,
            reweight_iters: o.reweight_iters,
            max_outer_iters: o.max_outer_iters,
        }
    }
}

#[derive(Serialize)]
struct DesignReport {
    schema_version: u32,
    status: RunStatus,
    infeasible_family: Option<String>,
    iterations: usize,
    runtime_s: f64,
    options: OptionsEcho,
    link: Option<LinkInfo>,
    k_hat: Vec<Vec<f64>>,
    k_final: Vec<Vec<f64>>,
    nnz: usize,
    nnz_reference: usize,
    eps_s: f64,
    eps_y: f64,
    /// `√ε_S / ‖Ŝ‖_H2`, the certified bound on the relative H2 deviation.
    r2_certified: Option<f64>,
    metrics: Option<DeviationMetrics>,
    certificate: Option<RankCertificate>,
    recertification: Option<Recertification>,
    robustness: Option<RobustnessReport>,
    truncation_skipped: Vec<(usize, usize)>,
}

struct DesignOutcome {
    code: u8,
    files: Staged,
    status: RunStatus,
    k: DMatrix<f64>,
    metrics: Option<DeviationMetrics>,
}

fn run_design(p: &Problem, opts: &SparsifierOptions, seed: u64) -> Result<DesignOutcome> {
    let t0 = Instant::now();
    let s = StructureSet::full(p.sys.m(), p.sys.q());
    let res = sparsifier::run(&p.sys, &p.k_hat, &s, opts)?;
    let runtime_s = t0.elapsed().as_secs_f64();
    let metrics = res.recert.as_ref().and_then(|r| r.metrics);
    let stable = res.recert.as_ref().is_some_and(|r| r.nominal_stable);
    let robustness = if stable && res.status != RunStatus::Infeasible {
        Some(sample_uncertainty(&p.sys, &p.k_hat, &res.k_final, ROBUSTNESS_SAMPLES, seed)?)
    } else {
        None
    };
    let report = DesignReport {
        schema_version: REPORT_SCHEMA_VERSION,
        status: res.status,
        infeasible_family: res.infeasible_family.clone(),
        iterations: res.history.len(),
        runtime_s,
        options: opts.into(),
        link: p.link.clone(),
        k_hat: robsparse::serde_mat::to_rows(&p.k_hat),
        k_final: robsparse::serde_mat::to_rows(&res.k_final),
        nnz: nnz(&res.k_final),
        nnz_reference: nnz(&p.k_hat),
        eps_s: res.eps_s,
        eps_y: res.eps_y,
        r2_certified: metrics.map(|m| res.eps_s.max(0.0).sqrt() / m.h2_ref),
        metrics,
        certificate: res.certificate.clone(),
        recertification: res.recert.clone(),
        robustness,
        truncation_skipped: res.truncation_skipped.clone(),
    };
    let mut files = Staged::default();
    files.add("gain.json", gain_json(&res.k_final));
    files.add("gain.csv", matrix_csv("gain", &res.k_final));
    files.add("history.csv", res.history_csv());
    files.add("report.json", serde_json::to_string_pretty(&report)?);
    if let Some(net) = &p.net {
        let g = net.n_gen;
        if res.k_final.shape() == (g, 2 * g) {
            let f = link_density(&res.k_final.columns(0, g).into_owned())? + link_density(&res.k_final.columns(g, g).into_owned())?;
            files.add("link_density.csv", matrix_csv("link-density", &f));
        }
    }
    let code = match res.status {
        RunStatus::Converged => 0,
        RunStatus::Infeasible => 2,
        RunStatus::MaxIters | RunStatus::Stalled => 3,
    };
    Ok(DesignOutcome {
        code,
        files,
        status: res.status,
        k: res.k_final,
        metrics,
    })
}

fn single_link(net_given: bool, links: Option<&str>, rhos: Option<&str>, n_gen: usize) -> Result<Option<(usize, usize, f64)>> {
    let links = links.map(|l| parse_links(l, n_gen)).transpose()?.unwrap_or_default();
    let rhos = rhos.map(parse_rho_list).transpose()?.unwrap_or_default();
    if !net_given && !(links.is_empty() && rhos.is_empty()) {
        bail!("--links and --rho-rel-list need --network");
    }
    if links.len() > 1 || rhos.len() > 1 {
        bail!("this command takes at most one link and one rho_rel; use `sweep` for more");
    }
    match (links.first(), rhos.first()) {
        (Some(&(i, j)), Some(&r)) => Ok(Some((i, j, r))),
        (Some(&(i, j)), None) => Ok(Some((i, j, 0.0))),
        (None, Some(_)) => bail!("--rho-rel-list needs --links"),
        (None, None) => Ok(None),
    }
}

fn n_gen_of(inputs: &Inputs) -> Result<Option<usize>> {
    inputs.network.as_deref().map(|p| load_network(p).map(|n| n.n_gen)).transpose()
}

pub fn design(a: &DesignArgs) -> Result<u8> {
    let n_gen = n_gen_of(&a.inputs)?;
    let link = single_link(n_gen.is_some(), a.links.as_deref(), a.rho_rel_list.as_deref(), n_gen.unwrap_or(0))?;
    let p = load_problem(&a.inputs, a.inputs.gain.as_deref(), link)?;
    let opts = options(&a.tuning);
    let out = run_design(&p, &opts, a.inputs.seed)?;
    out.files.commit(&a.inputs.out)?;
    match out.metrics {
        Some(m) => eprintln!(
            "{:?}: nnz {} / {}, R2 {:.4}, Rinf {:.4}",
            out.status,
            nnz(&out.k),
            nnz(&p.k_hat),
            m.r2,
            m.r_inf
        ),
        None => eprintln!("{:?}: nnz {} / {}", out.status, nnz(&out.k), nnz(&p.k_hat)),
    }
    Ok(out.code)
}

#[derive(Debug, Clone, Serialize)]
struct SweepRow {
    i: usize,
    j: usize,
    rho_rel: f64,
    rho: f64,
    fallback: bool,
    status: String,
    nnz: usize,
    r2: f64,
    r_inf: f64,
    cardinality: f64,
    error: String,
}

fn case_dir(i: usize, j: usize, rho_rel: f64) -> String {
    format!("case_{}-{}_rho{}", i + 1, j + 1, rho_rel)
}

pub fn sweep(a: &SweepArgs) -> Result<u8> {
    let Some(net_path) = &a.inputs.network else {
        bail!("sweep needs --network");
    };
    let net = load_network(net_path)?;
    let links = parse_links(&a.links, net.n_gen)?;
    let rhos = parse_rho_list(&a.rho_rel_list)?;
    let nominal = swing_model(&net)?;
    let k_hat = match &a.inputs.gain {
        Some(r) => read_gain(r)?,
        None => lqr_default(&nominal)?,
    };
    let opts = options(&a.tuning);
    let cases: Vec<(usize, usize, f64)> = links.iter().flat_map(|&(i, j)| rhos.iter().map(move |&r| (i, j, r))).collect();
    std::fs::create_dir_all(&a.inputs.out).with_context(|| format!("creating {}", a.inputs.out.display()))?;

    let rows: Vec<SweepRow> = cases
        .par_iter()
        .map(|&(i, j, rho_rel)| {
            let mut row = SweepRow {
                i: i + 1,
                j: j + 1,
                rho_rel,
                rho: f64::NAN,
                fallback: false,
                status: "error".into(),
                nnz: 0,
                r2: f64::NAN,
                r_inf: f64::NAN,
                cardinality: f64::NAN,
                error: String::new(),
            };
            let res = (|| -> Result<()> {
                let u = link_uncertainty(&net, i, j, rho_rel)?;
                row.rho = u.rho;
                row.fallback = u.fallback;
                let p = Problem {
                    sys: u.apply(&nominal)?,
                    k_hat: k_hat.clone(),
                    net: Some(net.clone()),
                    link: Some(LinkInfo {
                        i: i + 1,
                        j: j + 1,
                        rho_rel,
                        rho: u.rho,
                        fallback: u.fallback,
                    }),
                };
                let out = run_design(&p, &opts, a.inputs.seed)?;
                row.status = format!("{:?}", out.status);
                row.nnz = nnz(&out.k);
                if let Some(m) = out.metrics {
                    row.r2 = m.r2;
                    row.r_inf = m.r_inf;
                    row.cardinality = m.cardinality_ratio;
                }
                out.files.commit(&a.inputs.out.join(case_dir(i, j, rho_rel)))?;
                Ok(())
            })();
            if let Err(e) = res {
                row.error = format!("{e:#}").replace([',', '\n'], ";");
            }
            row
        })
        .collect();

    let mut table = format!("# robsparse sweep v{SWEEP_SCHEMA_VERSION}\ni,j,rho_rel,rho,fallback,status,nnz,r2,r_inf,cardinality,error\n");
    for r in &rows {
        table.push_str(&format!(
            "{},{},{},{:.9e},{},{},{},{:.9e},{:.9e},{:.9e},{}\n",
            r.i, r.j, r.rho_rel, r.rho, r.fallback, r.status, r.nnz, r.r2, r.r_inf, r.cardinality, r.error
        ));
    }
    let mut files = Staged::default();
    files.add("sweep.csv", table);
    files.add("sweep.json", serde_json::to_string_pretty(&rows)?);
    files.commit(&a.inputs.out)?;
    let failed = rows.iter().filter(|r| !r.error.is_empty()).count();
    eprintln!("{} cases, {failed} failed", rows.len());
    Ok(0)
}

#[derive(Serialize)]
struct AnalyzeReport {
    schema_version: u32,
    link: Option<LinkInfo>,
    nominal_abscissa: f64,
    reference_abscissa: f64,
    nnz: usize,
    nnz_reference: usize,
    metrics: DeviationMetrics,
    robustness: RobustnessReport,
}

pub fn analyze(a: &AnalyzeArgs) -> Result<u8> {
    let n_gen = n_gen_of(&a.inputs)?;
    let link = single_link(n_gen.is_some(), a.links.as_deref(), a.rho_rel_list.as_deref(), n_gen.unwrap_or(0))?;
    let Some(gain_path) = &a.inputs.gain else {
        bail!("analyze needs --gain");
    };
    let p = load_problem(&a.inputs, a.baseline.as_deref(), link)?;
    let k = read_gain(gain_path)?;
    if k.shape() != p.k_hat.shape() {
        bail!("gain is {}x{}, expected {}x{}", k.nrows(), k.ncols(), p.k_hat.nrows(), p.k_hat.ncols());
    }
    let (ref_stable, ref_abs) = is_hurwitz(&p.sys.closed_loop_a(&p.k_hat, None));
    if !ref_stable {
        eprintln!("reference closed loop is not Hurwitz: spectral abscissa {ref_abs:.6e}");
        return Ok(2);
    }
    let (stable, abs) = is_hurwitz(&p.sys.closed_loop_a(&k, None));
    if !stable {
        eprintln!("closed loop is not Hurwitz: spectral abscissa {abs:.6e}");
        return Ok(2);
    }
    let grid = default_grid();
    let reference = frequency_response(&p.sys.closed_loop_a(&p.k_hat, None), &p.sys.b2, &p.sys.c, &grid)?;
    let design = frequency_response(&p.sys.closed_loop_a(&k, None), &p.sys.b2, &p.sys.c, &grid)?;
    let (da, db, dc) = DifferenceSystem::new(&p.sys, &p.k_hat, &k, None).realization();
    let deviation = frequency_response(&da, &db, &dc, &grid)?;
    let report = AnalyzeReport {
        schema_version: REPORT_SCHEMA_VERSION,
        link: p.link.clone(),
        nominal_abscissa: abs,
        reference_abscissa: ref_abs,
        nnz: nnz(&k),
        nnz_reference: nnz(&p.k_hat),
        metrics: deviation_metrics(&p.sys, &p.k_hat, &k)?,
        robustness: sample_uncertainty(&p.sys, &p.k_hat, &k, ROBUSTNESS_SAMPLES, a.inputs.seed)?,
    };
    let mut files = Staged::default();
    files.add("freq_reference.csv", reference.to_csv());
    files.add("freq_design.csv", design.to_csv());
    files.add("freq_deviation.csv", deviation.to_csv());
    files.add("analysis.json", serde_json::to_string_pretty(&report)?);
    files.commit(&a.inputs.out)?;
    eprintln!("R2 {:.4}, Rinf {:.4}, unstable samples {}", report.metrics.r2, report.metrics.r_inf, report.robustness.unstable);
    Ok(0)
}
