use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::Serialize;

use potts_magic::experiments::{
    alpha_profile, field_sweep, subsystem_scan, sudden_death_alpha, toy_mana, twopoint_scan, write_subsystem_csv,
    write_twopoint_csv, GroundStateSource, ScanSpec,
};
use potts_magic::meanfield::{meanfield_scan, transition_theta, write_meanfield_csv, Transition};
use potts_magic::mera::{counted_mana_density, domain_counts, finite_mana_prediction, quasi_mera_prediction};
use potts_magic::mps::GroundStateCache;
use potts_magic::potts::PottsParams;
use potts_magic::qudit::{DenseOperator, PrimeDim, C64};
use potts_magic::selftest::{run_selftest, Fault, SelfTestOptions, SelfTestReport};
use potts_magic::wigner::DensityMatrix;

use crate::config::{RunConfig, ScanSection};
use crate::error::CliError;
use crate::manifest::Recorder;

/// Settings shared by every subcommand once flags and config are merged.
pub struct Context {
    pub config: RunConfig,
    pub cache_dir: PathBuf,
    pub quiet: bool,
}

impl Context {
    fn source(&self) -> GroundStateSource {
        GroundStateSource {
            dmrg: self.config.dmrg,
            cache: Some(GroundStateCache::new(&self.cache_dir)),
            allow_compute: self.config.allow_compute.unwrap_or(true),
        }
    }

    fn say(&self, line: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", line.as_ref());
        }
    }

    fn recorder(&self, command: &str) -> Recorder {
        Recorder::new(self.config.out_dir(), command, self.config.clone())
    }
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> potts_magic::Result<()>) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

#[derive(Serialize)]
struct GroundStateSummary {
    n: usize,
    theta: f64,
    lambda: f64,
    energy: f64,
    mid_entropy: f64,
    max_bond: usize,
    cache_hit: bool,
    cache_file: String,
}

pub fn cmd_groundstate(ctx: &Context) -> Result<(), CliError> {
    let g = &ctx.config.groundstate;
    let p = PottsParams::new(g.n, g.theta, g.lambda)?;
    ctx.config.dmrg.validate()?;
    for &l in &g.lambdas {
        PottsParams::new(g.n, g.theta, l)?;
    }
    let source = ctx.source();
    let mut rec = ctx.recorder("groundstate");
    let (energy, mut state, hit) = rec.stage("dmrg", || Ok(source.symmetry_broken(&p)?))?;
    let mid_entropy = state.bond_entropy(g.n / 2 - 1)?;
    let summary = GroundStateSummary {
        n: g.n,
        theta: g.theta,
        lambda: g.lambda,
        energy,
        mid_entropy,
        max_bond: state.max_bond(),
        cache_hit: hit,
        cache_file: GroundStateCache::new(&ctx.cache_dir).path_for(&source.key(&p)).display().to_string(),
    };
    ctx.say(format!("energy {energy}"));
    ctx.say(format!("midpoint entropy {mid_entropy}"));
    ctx.say(format!("max bond dimension {}", summary.max_bond));
    ctx.say(format!("cache {} {}", if hit { "hit" } else { "stored" }, summary.cache_file));
    rec.emit_json("groundstate.json", &summary)?;
    if !g.lambdas.is_empty() {
        let rows = rec.stage("field-sweep", || Ok(field_sweep(g.n, g.theta, &g.lambdas, &ctx.config.dmrg)?))?;
        let mut csv = String::from("lambda,energy,mid_entropy,z_field\n");
        for r in &rows {
            csv.push_str(&format!("{},{},{},{}\n", r.lambda, r.energy, r.mid_entropy, r.z_field));
        }
        rec.emit("field.csv", csv.as_bytes())?;
    }
    rec.finish()?;
    Ok(())
}

fn scan_spec(s: &ScanSection) -> ScanSpec {
    ScanSpec {
        n: s.n,
        thetas: s.thetas.clone(),
        ells: s.ells.clone(),
        dxs: s.dxs.clone(),
        base_site: s.base_site,
        block: s.block,
        symmetrization: s.symmetrization,
    }
}

pub fn cmd_subsystem_scan(ctx: &Context) -> Result<(), CliError> {
    let spec = scan_spec(&ctx.config.subsystem);
    spec.validate()?;
    if spec.ells.is_empty() {
        return Err(CliError::Validation("subsystem scan needs at least one ell".into()));
    }
    ctx.config.dmrg.validate()?;
    let source = ctx.source();
    let mut rec = ctx.recorder("scan-subsystem");
    let rows = rec.stage("scan", || Ok(subsystem_scan(&spec, &source)?))?;
    let path = rec.emit("subsystem.csv", &csv_bytes(|b| write_subsystem_csv(&rows, b))?)?;
    ctx.say(format!("{} rows -> {}", rows.len(), path.display()));
    rec.finish()?;
    Ok(())
}

pub fn cmd_twopoint(ctx: &Context) -> Result<(), CliError> {
    let spec = scan_spec(&ctx.config.twopoint);
    spec.validate()?;
    ctx.config.dmrg.validate()?;
    let source = ctx.source();
    let mut rec = ctx.recorder("scan-twopoint");
    let rows = rec.stage("scan", || Ok(twopoint_scan(&spec, &source)?))?;
    let path = rec.emit("twopoint.csv", &csv_bytes(|b| write_twopoint_csv(&rows, b))?)?;
    // first dead separation per θ, keyed by the θ text for a stable ordering
    let mut death: BTreeMap<String, Option<usize>> = BTreeMap::new();
    for &t in &spec.thetas {
        death.insert(t.to_string(), potts_magic::experiments::sudden_death_distance(&rows, t));
    }
    rec.emit_json("twopoint_summary.json", &death)?;
    ctx.say(format!("{} rows -> {}", rows.len(), path.display()));
    rec.finish()?;
    Ok(())
}

fn rho1_from_diag(d: [f64; 3]) -> Result<DensityMatrix, CliError> {
    if d.iter().any(|&x| !(x >= 0.0)) || (d.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(CliError::Validation("rho1_diag must be non-negative and sum to 1".into()));
    }
    let diag = potts_magic::qudit::DenseState::from_iterator(3, d.iter().map(|&x| C64::new(x, 0.0)));
    let m = DenseOperator::from_diagonal(&diag);
    Ok(DensityMatrix::new(PrimeDim::QUTRIT, m)?)
}

#[derive(Serialize)]
struct ToySummary {
    alpha0: f64,
    bracket: (f64, f64),
}

pub fn cmd_toy(ctx: &Context) -> Result<(), CliError> {
    let t = &ctx.config.toy;
    let rho1 = rho1_from_diag(t.rho1_diag)?;
    if t.alphas.iter().any(|a| !(0.0..=1.0).contains(a)) {
        return Err(CliError::Validation("toy alphas must lie in [0, 1]".into()));
    }
    if !(t.width > 0.0) {
        return Err(CliError::Validation("toy width must be positive".into()));
    }
    let mut rec = ctx.recorder("toy");
    let rows = rec.stage("sweep", || {
        t.alphas.iter().map(|&a| Ok((a, toy_mana(a, &rho1)?))).collect::<Result<Vec<_>, CliError>>()
    })?;
    let mut csv = String::from("alpha,mana\n");
    for (a, m) in &rows {
        csv.push_str(&format!("{a},{m}\n"));
    }
    rec.emit("toy.csv", csv.as_bytes())?;
    let sd = rec.stage("edge", || Ok(sudden_death_alpha(&rho1, t.width)?))?;
    ctx.say(format!("zero-mana edge alpha0 = {}", sd.alpha0));
    rec.emit_json("toy.json", &ToySummary { alpha0: sd.alpha0, bracket: sd.bracket })?;
    if let Some(p) = &t.profile {
        let mut csv = String::from("dx,alpha\n");
        for &dx in &p.dxs {
            csv.push_str(&format!("{dx},{}\n", alpha_profile(p.theta, dx, &p.fit)));
        }
        rec.emit("toy_profile.csv", csv.as_bytes())?;
    }
    rec.finish()?;
    Ok(())
}

#[derive(Serialize)]
struct MeraSummary {
    asymptote: f64,
}

pub fn cmd_mera_predict(ctx: &Context) -> Result<(), CliError> {
    let m = &ctx.config.mera;
    m.params.validate()?;
    if m.k_max > 30 {
        return Err(CliError::Validation("k_max must be at most 30".into()));
    }
    let mut rec = ctx.recorder("mera-predict");
    let mut csv = String::from("k,ell,n_tri,n_sq,counted_density,prediction\n");
    for k in 0..=m.k_max {
        let c = domain_counts(k);
        let pred = finite_mana_prediction(c.ell as f64, &m.params)?;
        csv.push_str(&format!("{},{},{},{},{},{}\n", k, c.ell, c.n_tri, c.n_sq, counted_mana_density(k, &m.params), pred));
    }
    rec.emit("mera_counts.csv", csv.as_bytes())?;
    if !m.ells.is_empty() {
        let mut csv = String::from("ell,prediction\n");
        for &ell in &m.ells {
            csv.push_str(&format!("{ell},{}\n", finite_mana_prediction(ell, &m.params)?));
        }
        rec.emit("mera_curve.csv", csv.as_bytes())?;
    }
    if m.params.nu.is_some() {
        let mut csv = String::from("theta,prediction\n");
        for &t in &m.thetas {
            csv.push_str(&format!("{t},{}\n", quasi_mera_prediction(t, &m.params)?));
        }
        rec.emit("quasi_mera.csv", csv.as_bytes())?;
    }
    let asymptote = finite_mana_prediction(f64::INFINITY, &m.params)?;
    ctx.say(format!("asymptotic mana density {asymptote}"));
    rec.emit_json("mera.json", &MeraSummary { asymptote })?;
    rec.finish()?;
    Ok(())
}

pub fn cmd_meanfield(ctx: &Context) -> Result<(), CliError> {
    let mf = &ctx.config.meanfield;
    if mf.qs.is_empty() {
        return Err(CliError::Validation("meanfield needs at least one q".into()));
    }
    if !(mf.transition_step > 0.0 && mf.transition_step < 0.1) {
        return Err(CliError::Validation("transition_step must be in (0, 0.1)".into()));
    }
    for &q in &mf.qs {
        mf.config_for(q).validate()?;
    }
    let mut rec = ctx.recorder("meanfield");
    let mut transitions: Vec<Transition> = Vec::new();
    for &q in &mf.qs {
        let cfg = mf.config_for(q);
        let pts = rec.stage(&format!("scan q={q}"), || Ok(meanfield_scan(&cfg)?))?;
        rec.emit(&format!("meanfield_q{q}.csv"), &csv_bytes(|b| write_meanfield_csv(&pts, b))?)?;
        let tr = rec.stage(&format!("transition q={q}"), || Ok(transition_theta(q, mf.k, mf.transition_step)?))?;
        ctx.say(format!("q = {q}: theta_c = {:.6} ({:?}, jump {:.3e})", tr.theta_c, tr.order, tr.jump));
        transitions.push(tr);
    }
    rec.emit_json("meanfield.json", &transitions)?;
    rec.finish()?;
    Ok(())
}

pub fn cmd_selftest(ctx: &Context, inject_fault: bool) -> Result<SelfTestReport, CliError> {
    let opts = SelfTestOptions {
        seed: ctx.config.seed,
        random_states: ctx.config.selftest.random_states,
        fault: inject_fault.then_some(Fault::PerturbPhasePoint { digit: 4, eps: 1e-6 }),
    };
    let mut rec = ctx.recorder("selftest");
    let report = rec.stage("selftest", || Ok(run_selftest(&opts)?))?;
    println!("{report}");
    rec.emit_json("selftest.json", &report)?;
    if !report.passed() {
        let names: Vec<&str> = report.failures().map(|c| c.name.as_str()).collect();
        return Err(CliError::Numerical(format!("selftest failed: {}", names.join(", "))));
    }
    rec.finish()?;
    Ok(report)
}
