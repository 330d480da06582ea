use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use wfh_core::analysis::{
    fit_exponential_with, residual_metric, scaling_analysis, transition_scan_with, DataSource, FitMethod,
    Reference,
};
use wfh_core::calibration::{calibrate, CoincidenceCounts, MeanPhotonNumbers};
use wfh_core::classical::{classical_full_with, ShiftConvention};
use wfh_core::ingest::{self, Channel, RunConfig};
use wfh_core::nonclassicality::{witness_reports, EventTally};
use wfh_core::quantum::{heralded_diff, heralded_joint};
use wfh_core::states::{
    engineered_herald_dist, fano_of_dist, g2_of_dist, heralded_signal_dist, quadrature_dist, wigner,
    PhaseSpacePoint,
};
use wfh_core::{ExperimentParams, PhotonDist};

use crate::{io_err, Cli, CliError, Command, GlobalOpts, Method, Preset, RefModel, Shift};

type Result<T> = std::result::Result<T, CliError>;

/// What a command produced besides its stdout output.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Outcome {
    /// Files written, in write order.
    pub files: Vec<PathBuf>,
    /// Pre-normalization deficit of every model distribution computed.
    pub deficits: Vec<(String, f64)>,
}

struct Ctx<'a> {
    global: &'a GlobalOpts,
    config: RunConfig,
    params: ExperimentParams,
    convention: ShiftConvention,
    outcome: Outcome,
}

impl Ctx<'_> {
    fn deficit(&mut self, name: String, deficit: f64) {
        self.outcome.deficits.push((name, deficit));
    }

    /// Writes to `--out` if given, otherwise to stdout.
    fn emit(
        &mut self,
        stdout: &mut (dyn Write + Send),
        body: impl FnOnce(&mut dyn Write) -> Result<()>,
    ) -> Result<()> {
        match &self.global.out {
            Some(path) => {
                let path = path.clone();
                write_file(&path, body)?;
                self.outcome.files.push(path);
                Ok(())
            }
            None => body(stdout),
        }
    }

    fn out_dir(&self) -> Result<PathBuf> {
        let dir = self.global.out_dir.clone().unwrap_or_else(|| self.config.output_dir.clone());
        std::fs::create_dir_all(&dir).map_err(io_err(dir.display().to_string()))?;
        Ok(dir)
    }

    fn write_in_dir(&mut self, dir: &Path, name: &str, body: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
        let path = dir.join(name);
        write_file(&path, body)?;
        self.outcome.files.push(path);
        Ok(())
    }
}

fn write_file(path: &Path, body: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let file = File::create(path).map_err(io_err(path.display().to_string()))?;
    let mut w = BufWriter::new(file);
    body(&mut w)?;
    w.flush().map_err(io_err(path.display().to_string()))
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(io_err(path.display().to_string()))
}

fn json<T: Serialize>(out: &mut dyn Write, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, value).map_err(|e| CliError::Core(wfh_core::Error::Format(e.to_string())))?;
    writeln!(out).map_err(io_err("<output>"))
}

fn non_empty<T>(grid: &[T], what: &str) -> Result<()> {
    if grid.is_empty() {
        return Err(CliError::Usage(format!("{what} must not be empty")));
    }
    Ok(())
}

pub(crate) fn dispatch(cli: &Cli, stdout: &mut (dyn Write + Send)) -> Result<Outcome> {
    let g = &cli.global;
    let config = match &g.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let params = match (g.preset, &g.config) {
        (Some(Preset::Ideal), _) => ExperimentParams::ideal(0.0),
        (Some(Preset::Table1), _) => ExperimentParams::table1(0.0),
        (None, Some(_)) => config.params,
        (None, None) => ExperimentParams::ideal(0.0),
    };
    let convention = match g.shift_convention {
        Some(Shift::CountingDifference) => ShiftConvention::CountingDifference,
        Some(Shift::AsPrinted) => ShiftConvention::AsPrinted,
        None => config.shift_convention,
    };
    let mut ctx = Ctx { global: g, config, params, convention, outcome: Outcome::default() };

    match &cli.command {
        Command::ModelQuantum { j, alpha_sq } => {
            let dist = heralded_diff(*j, &ctx.params.with_alpha_sq(*alpha_sq))?;
            ctx.deficit(format!("model-quantum j={j} alpha_sq={alpha_sq}"), dist.deficit());
            ctx.emit(stdout, |w| Ok(ingest::write_diff_csv(w, &dist)?))?;
        }
        Command::ModelClassical { j, alpha_sq } => {
            let dist = classical_full_with(*j, &ctx.params.with_alpha_sq(*alpha_sq), ctx.convention)?;
            ctx.deficit(format!("model-classical j={j} alpha_sq={alpha_sq}"), dist.deficit());
            ctx.emit(stdout, |w| Ok(ingest::write_diff_csv(w, &dist)?))?;
        }
        Command::TransitionScan { j, grid, observed, reference } => {
            let grid = if grid.is_empty() { ctx.config.alpha_sq_grid.clone() } else { grid.clone() };
            let source = if observed.is_empty() {
                DataSource::Model
            } else {
                DataSource::Observed(
                    observed.iter().map(|p| Ok(ingest::read_diff_csv(open(p)?)?)).collect::<Result<_>>()?,
                )
            };
            let reference = match reference {
                RefModel::Classical => Reference::Classical,
                RefModel::Quantum => Reference::Quantum,
            };
            let points = transition_scan_with(*j, &grid, &ctx.params, &source, reference, ctx.convention)?;
            ctx.emit(stdout, |w| Ok(ingest::write_transition_csv(w, &points)?))?;
        }
        Command::FitAlphaMin { input, threshold, lower_cut, method } => {
            let points = ingest::read_transition_csv(open(input)?)?;
            let method = match method {
                Method::LogLinear => FitMethod::LogLinear,
                Method::GaussNewton => FitMethod::GaussNewton,
            };
            let fit = fit_exponential_with(
                &points,
                threshold.unwrap_or(ctx.config.threshold),
                lower_cut.unwrap_or(ctx.config.lower_cut),
                method,
            )?;
            ctx.emit(stdout, |w| json(w, &fit))?;
        }
        Command::Scaling { js, grid, threshold, lower_cut } => {
            let js = if js.is_empty() { ctx.config.herald_outcomes.clone() } else { js.clone() };
            let grid = if grid.is_empty() { ctx.config.alpha_sq_grid.clone() } else { grid.clone() };
            non_empty(&js, "herald outcomes")?;
            let result = scaling_analysis(
                &js,
                &grid,
                &ctx.params,
                threshold.unwrap_or(ctx.config.threshold),
                lower_cut.unwrap_or(ctx.config.lower_cut),
            )?;
            ctx.emit(stdout, |w| json(w, &result))?;
        }
        Command::Nonclassicality { tally, max_outcome, resamples, seed } => {
            let max_outcome = max_outcome.unwrap_or(ctx.config.max_outcome);
            let tally = ingest::read_tally_csv(open(tally)?, max_outcome)?;
            let resamples = resamples.unwrap_or(ctx.config.resamples);
            let seed = seed.unwrap_or(ctx.config.seed);
            let reports = witness_reports(&tally, resamples, seed)?;
            #[derive(Serialize)]
            struct Report<'a> {
                sign_convention: &'static str,
                max_outcome: u32,
                resamples: usize,
                seed: u64,
                herald_outcomes: &'a [wfh_core::nonclassicality::WitnessReport],
            }
            let report = Report { sign_convention: "subtract", max_outcome, resamples, seed, herald_outcomes: &reports };
            ctx.emit(stdout, |w| json(w, &report))?;
        }
        Command::ModelTally { js, alpha_sq, events, max_outcome } => {
            let js = if js.is_empty() { ctx.config.herald_outcomes.clone() } else { js.clone() };
            let mut tally = EventTally::new(max_outcome.unwrap_or(ctx.config.max_outcome));
            let params = ctx.params.with_alpha_sq(*alpha_sq);
            for j in js {
                let joint = heralded_joint(j, &params)?;
                ctx.deficit(format!("model-tally j={j} alpha_sq={alpha_sq}"), joint.deficit());
                tally.add_expected(j, &joint, *events)?;
            }
            ctx.emit(stdout, |w| Ok(ingest::write_tally_csv(w, &tally)?))?;
        }
        Command::Engineer { m, n, alpha_sq, no_interference } => {
            let dist = engineered_herald_dist(*m, *n, &ctx.params.with_alpha_sq(*alpha_sq), !no_interference)?;
            ctx.deficit(format!("engineer m={m} n={n} alpha_sq={alpha_sq}"), dist.deficit());
            #[derive(Serialize)]
            struct Summary {
                m: u32,
                n: u32,
                alpha_sq: f64,
                interfering: bool,
                g2: Option<f64>,
                mean: f64,
                deficit: f64,
                distribution: Option<Vec<(u32, f64)>>,
            }
            let mut summary = Summary {
                m: *m,
                n: *n,
                alpha_sq: *alpha_sq,
                interfering: !no_interference,
                g2: g2_of_dist(&dist).ok(),
                mean: dist.mean(),
                deficit: dist.deficit(),
                distribution: None,
            };
            match ctx.global.out.clone() {
                Some(path) => {
                    write_file(&path, |w| Ok(ingest::write_photon_csv(w, &dist)?))?;
                    ctx.outcome.files.push(path);
                }
                None => summary.distribution = Some(dist.iter().collect()),
            }
            json(stdout, &summary)?;
        }
        Command::Calibrate { counts } => {
            #[derive(Deserialize)]
            struct CountSummary {
                #[serde(flatten)]
                counts: CoincidenceCounts,
                #[serde(default)]
                mean_photons: MeanPhotonNumbers,
            }
            let summary: CountSummary = serde_json::from_reader(open(counts)?)
                .map_err(|e| CliError::Core(wfh_core::Error::Format(format!("{}: {e}", counts.display()))))?;
            let report = calibrate(&summary.counts, &summary.mean_photons)?;
            ctx.emit(stdout, |w| json(w, &report))?;
        }
        Command::States { j, wigner_grid, quadrature_grid } => {
            states(&mut ctx, stdout, *j, wigner_grid.as_deref(), quadrature_grid.as_deref())?;
        }
        Command::BinPulses { input, max_outcome } => {
            let max_outcome = max_outcome.unwrap_or(ctx.config.max_outcome);
            bin_pulses(&mut ctx, stdout, input, max_outcome)?;
        }
        Command::ResidualMetric { observed, model } => {
            let a = ingest::read_diff_csv(open(observed)?)?;
            let b = ingest::read_diff_csv(open(model)?)?;
            let (s_classical, nu) = residual_metric(&a, &b);
            #[derive(Serialize)]
            struct Metric {
                s_classical: f64,
                nu: usize,
            }
            ctx.emit(stdout, |w| json(w, &Metric { s_classical, nu }))?;
        }
    }
    Ok(ctx.outcome)
}

fn linspace(spec: Option<&[f64]>, default_half_width: f64, default_points: usize) -> Result<Vec<f64>> {
    let (lo, hi, n) = match spec {
        Some([lo, hi, n]) => (*lo, *hi, *n),
        Some(_) => return Err(CliError::Usage("grids take min,max,points".into())),
        None => (-default_half_width, default_half_width, default_points as f64),
    };
    if !(n >= 2.0) || n.fract() != 0.0 || !(hi > lo) {
        return Err(CliError::Usage(format!("invalid grid {lo},{hi},{n}")));
    }
    let n = n as usize;
    Ok((0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect())
}

fn states(ctx: &mut Ctx, stdout: &mut (dyn Write + Send), j: u32, wigner_grid: Option<&[f64]>, quad_grid: Option<&[f64]>) -> Result<()> {
    use rayon::prelude::*;
    let dist: PhotonDist = heralded_signal_dist(j, &ctx.params.source, &ctx.params.trunc);
    ctx.deficit(format!("states j={j}"), dist.deficit());
    let half_width = (4.0 * (2.0 * dist.mean() + 1.0).sqrt()).ceil();
    let xs = linspace(quad_grid, half_width, 401)?;
    let ws = linspace(wigner_grid, half_width, 101)?;
    let dir = ctx.out_dir()?;

    ctx.write_in_dir(&dir, "photon_number.csv", |w| Ok(ingest::write_photon_csv(w, &dist)?))?;
    let quad: Vec<f64> = xs.par_iter().map(|&x| quadrature_dist(&dist, x)).collect();
    ctx.write_in_dir(&dir, "quadrature.csv", |w| {
        writeln!(w, "x,density").map_err(io_err("quadrature.csv"))?;
        for (x, d) in xs.iter().zip(&quad) {
            writeln!(w, "{},{}", ingest::format_number(*x), ingest::format_number(*d)).map_err(io_err("quadrature.csv"))?;
        }
        Ok(())
    })?;
    let rows: Vec<Vec<f64>> = ws
        .par_iter()
        .map(|&x| ws.iter().map(|&p| wigner(&dist, PhaseSpacePoint::new(x, p))).collect())
        .collect();
    ctx.write_in_dir(&dir, "wigner.csv", |w| {
        writeln!(w, "x,p,w").map_err(io_err("wigner.csv"))?;
        for (x, row) in ws.iter().zip(&rows) {
            for (p, v) in ws.iter().zip(row) {
                writeln!(w, "{},{},{}", ingest::format_number(*x), ingest::format_number(*p), ingest::format_number(*v))
                    .map_err(io_err("wigner.csv"))?;
            }
        }
        Ok(())
    })?;

    #[derive(Serialize)]
    struct Manifest {
        j: u32,
        mean: f64,
        g2: Option<f64>,
        fano: Option<f64>,
        deficit: f64,
        files: Vec<String>,
    }
    let manifest = Manifest {
        j,
        mean: dist.mean(),
        g2: g2_of_dist(&dist).ok(),
        fano: fano_of_dist(&dist).ok(),
        deficit: dist.deficit(),
        files: file_names(&ctx.outcome.files),
    };
    json(stdout, &manifest)
}

fn file_names(files: &[PathBuf]) -> Vec<String> {
    files
        .iter()
        .map(|p| p.file_name().map_or_else(|| p.display().to_string(), |n| n.to_string_lossy().into_owned()))
        .collect()
}

fn bin_pulses(ctx: &mut Ctx, stdout: &mut (dyn Write + Send), input: &Path, max_outcome: u32) -> Result<()> {
    let records = ingest::read_pulse_csv(open(input)?)?;
    let channels = [Channel::Herald, Channel::C, Channel::D];
    let mut binnings = Vec::new();
    for ch in channels {
        if records.iter().any(|r| r.channel == ch) {
            let b = ingest::bin_pulse_energies(&records, ch)?;
            for w in &b.warnings {
                log::warn!("{w}");
            }
            binnings.push(b);
        }
    }
    if binnings.is_empty() {
        return Err(CliError::Core(wfh_core::Error::InsufficientData("no pulse records".into())));
    }
    let dir = ctx.out_dir()?;
    ctx.write_in_dir(&dir, "labels.csv", |w| {
        writeln!(w, "trial,channel,label,overflow").map_err(io_err("labels.csv"))?;
        for b in &binnings {
            let name = match b.channel {
                Channel::Herald => "herald",
                Channel::C => "c",
                Channel::D => "d",
            };
            let overflow: std::collections::BTreeSet<u64> = b.overflow.iter().copied().collect();
            for (trial, label) in &b.labels {
                writeln!(w, "{trial},{name},{label},{}", overflow.contains(trial)).map_err(io_err("labels.csv"))?;
            }
        }
        Ok(())
    })?;
    if binnings.len() == 3 {
        let tally = ingest::build_tally(&binnings[0].labels, &binnings[1].labels, &binnings[2].labels, max_outcome)?;
        ctx.write_in_dir(&dir, "tally.csv", |w| Ok(ingest::write_tally_csv(w, &tally)?))?;
    } else {
        log::warn!("tally needs herald, c and d channels; only labels were written");
    }

    #[derive(Serialize)]
    struct ChannelSummary {
        channel: Channel,
        boundaries: Vec<f64>,
        peaks: Vec<f64>,
        bin_width: f64,
        records: usize,
        overflow: usize,
        warnings: Vec<String>,
    }
    #[derive(Serialize)]
    struct Manifest {
        channels: Vec<ChannelSummary>,
        files: Vec<String>,
    }
    let manifest = Manifest {
        channels: binnings
            .into_iter()
            .map(|b| ChannelSummary {
                channel: b.channel,
                records: b.labels.len(),
                overflow: b.overflow.len(),
                boundaries: b.boundaries,
                peaks: b.peaks,
                bin_width: b.bin_width,
                warnings: b.warnings,
            })
            .collect(),
        files: file_names(&ctx.outcome.files),
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    ctx.write_in_dir(&dir, "binning.json", |w| writeln!(w, "{text}").map_err(io_err("binning.json")))?;
    writeln!(stdout, "{text}").map_err(io_err("<stdout>"))
}
