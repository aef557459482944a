use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use circsearch::engine::{empirical_forney_curve, monte_carlo, SearchParams, Strategy, SweepStats, SWEEP_CSV_HEADER};
use circsearch::geometry::{default_grid, enumerate_trajectories, partition_size, DEFAULT_TABLE_CAP};
use circsearch::infotheory::{curve_bundle, curves_to_csv, fmt_fixed6, CurveMeta, ExponentCurve, PointQuality, RatePoint};
use circsearch::{CurveId, VelocityMode};

use crate::config::{parse_strategy, Flags, RunConfig};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Curves,
    Simulate,
    Sweep,
    Trajectories,
}

/// Loads the configuration and runs `command`. Returns the text meant for
/// standard output.
pub fn run(command: Command, flags: &Flags) -> Result<String, CliError> {
    let cfg = RunConfig::load(flags)?;
    match command {
        Command::Curves => cmd_curves(&cfg),
        Command::Simulate => cmd_simulate(&cfg),
        Command::Sweep => cmd_sweep(&cfg),
        Command::Trajectories => cmd_trajectories(&cfg),
    }
}

/// Writes `text` to `path` through a temporary file, or returns it when no
/// path is set.
fn emit(path: Option<&Path>, text: String) -> Result<String, CliError> {
    match path {
        Some(p) => {
            write_atomic(p, &text)?;
            Ok(String::new())
        }
        None => Ok(text),
    }
}

fn write_atomic(path: &Path, text: &str) -> Result<(), CliError> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, text)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn cmd_curves(cfg: &RunConfig) -> Result<String, CliError> {
    let model = cfg.model()?;
    let kappa = cfg.velocity()?.kappa();
    let rates = cfg.rate_values()?;
    let empirical = match &cfg.empirical {
        Some(path) => Some(read_empirical(path, &model, kappa)?),
        None => None,
    };
    let curves = if rates.is_empty() {
        // Header only, plus any merged empirical points.
        empirical.into_iter().collect()
    } else {
        curve_bundle(&model, kappa, &rates, empirical).map_err(CliError::from_core)?
    };
    emit(cfg.out.as_deref(), curves_to_csv(&curves))
}

/// Reads the decision-feedback rows of a `curve_id,R,E` file.
fn read_empirical(path: &Path, model: &circsearch::NoiseModel, kappa: circsearch::Kappa) -> Result<ExponentCurve, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("empirical {}: {e}", path.display())))?;
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("curve_id,R,E") {
        return Err(CliError::Config(format!("empirical {}: missing curve_id,R,E header", path.display())));
    }
    let bad = |l: &str| CliError::Config(format!("empirical {}: malformed row `{l}`", path.display()));
    let parse = |s: &str| -> Option<f64> {
        match s {
            "inf" => Some(f64::INFINITY),
            _ => s.parse().ok(),
        }
    };
    let mut points = Vec::new();
    for line in lines.filter(|l| !l.trim().is_empty()) {
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 3 {
            return Err(bad(line));
        }
        if CurveId::parse(cols[0]) != Some(CurveId::DecisionFeedbackEmpirical) {
            continue;
        }
        let (r, e) = (parse(cols[1]).ok_or_else(|| bad(line))?, parse(cols[2]).ok_or_else(|| bad(line))?);
        points.push(RatePoint {
            rate: r,
            exponent: e,
            quality: PointQuality::Exact,
        });
    }
    Ok(ExponentCurve {
        id: CurveId::DecisionFeedbackEmpirical,
        points,
        meta: CurveMeta {
            model: model.clone(),
            kappa,
            q_star: circsearch::infotheory::optimal_q(model, kappa).q,
        },
    })
}

fn summary(s: &SweepStats) -> String {
    format!(
        "{} {} N={} R={} delta={}: {} of {} trials failed, eps_hat={} [{}, {}], mean tau={} (sd {}), retries/trial={}, erasure rate={}, capped={}\n",
        s.strategy.as_str(),
        s.velocity.as_str(),
        s.n,
        fmt_fixed6(s.rate),
        s.delta,
        s.failures,
        s.trials,
        fmt_fixed6(s.eps_hat),
        fmt_fixed6(s.ci_lo),
        fmt_fixed6(s.ci_hi),
        fmt_fixed6(s.mean_tau),
        fmt_fixed6(s.sd_tau),
        fmt_fixed6(s.retries_mean),
        fmt_fixed6(s.erasure_rate),
        s.capped
    )
}

pub fn cmd_simulate(cfg: &RunConfig) -> Result<String, CliError> {
    let seed = cfg.seed()?;
    let trials = cfg.trials()?;
    let strategy = cfg.strategy()?;
    let params = cfg.search_params(strategy, cfg.n()?, cfg.rate, None)?;
    let curve = match &cfg.curve_thresholds {
        Some(ts) => {
            let path = cfg
                .curve_out
                .clone()
                .ok_or_else(|| CliError::Config("curve_out: required with curve_thresholds".into()))?;
            params.validate(Strategy::Forney).map_err(CliError::from_core)?;
            Some((path, ts.clone()))
        }
        None => None,
    };
    let stats = monte_carlo(strategy, &params, trials, seed, cfg.workers()).map_err(CliError::from_core)?;
    if let Some((path, ts)) = curve {
        let c = empirical_forney_curve(&params, &ts, trials, seed, cfg.workers()).map_err(CliError::from_core)?;
        write_atomic(&path, &curves_to_csv(&[c]))?;
    }
    let table = format!("{SWEEP_CSV_HEADER}\n{}\n", stats.to_csv_row());
    let mut out = summary(&stats);
    if cfg.out.is_none() {
        out.push_str(&table);
    } else {
        emit(cfg.out.as_deref(), table)?;
    }
    Ok(out)
}

/// Cells of a sweep in output order: strategy, then N, R, T as listed.
fn sweep_cells(cfg: &RunConfig) -> Result<Vec<(Strategy, SearchParams)>, CliError> {
    let spec = cfg.sweep.clone().unwrap_or_default();
    let strategies = match &spec.strategy {
        Some(list) => list.iter().map(|s| parse_strategy(s)).collect::<Result<Vec<_>, _>>()?,
        None => vec![cfg.strategy()?],
    };
    let ns = spec.n.clone().map_or_else(|| cfg.n().map(|n| vec![n]), Ok)?;
    let rates: Vec<Option<f64>> = match &spec.rate {
        Some(list) => list.iter().copied().map(Some).collect(),
        None => vec![cfg.rate],
    };
    let ts: Vec<Option<f64>> = match &spec.threshold {
        Some(list) => list.iter().copied().map(Some).collect(),
        None => vec![None],
    };
    let mut cells = Vec::new();
    for &s in &strategies {
        for &n in &ns {
            for &r in &rates {
                for &t in &ts {
                    cells.push((s, cfg.search_params(s, n, r, t)?));
                }
            }
        }
    }
    Ok(cells)
}

/// Identity of a row: every parameter column plus the seed.
fn row_key(row: &str) -> Option<String> {
    let cols: Vec<&str> = row.split(',').collect();
    (cols.len() == 18).then(|| format!("{}|{}", cols[..9].join(","), cols[17]))
}

fn cell_key(strategy: Strategy, p: &SearchParams, trials: u64, seed: u64) -> String {
    let f = fmt_fixed6;
    format!(
        "{},{},{},{},{},{},{},{},{}|{}",
        strategy.as_str(),
        p.velocity.as_str(),
        p.n,
        f(p.effective_rate()),
        f(p.delta),
        f(p.threshold),
        f(p.lambda_for(strategy)),
        f(p.alpha),
        trials,
        seed
    )
}

/// Runs every cell of the sweep not already present in the output file and
/// rewrites the file, in cell order, after each one.
pub fn cmd_sweep(cfg: &RunConfig) -> Result<String, CliError> {
    let seed = cfg.seed()?;
    let trials = cfg.trials()?;
    let out = cfg
        .out
        .clone()
        .ok_or_else(|| CliError::Config("out: required for sweep (pass --out)".into()))?;
    let cells = sweep_cells(cfg)?;
    let keys: Vec<String> = cells.iter().map(|(s, p)| cell_key(*s, p, trials, seed)).collect();
    let mut rows: Vec<Option<String>> = vec![None; cells.len()];
    if let Ok(existing) = fs::read_to_string(&out) {
        for line in existing.lines().skip(1) {
            if let Some(k) = row_key(line) {
                if let Some(i) = keys.iter().position(|x| *x == k) {
                    rows[i] = Some(line.to_string());
                }
            }
        }
    }
    let mut log = String::new();
    let render = |rows: &[Option<String>]| {
        let mut text = format!("{SWEEP_CSV_HEADER}\n");
        for r in rows.iter().flatten() {
            text.push_str(r);
            text.push('\n');
        }
        text
    };
    for (i, (strategy, params)) in cells.iter().enumerate() {
        if rows[i].is_some() {
            let _ = writeln!(log, "skip {} (present)", keys[i]);
            continue;
        }
        let stats = monte_carlo(*strategy, params, trials, seed, cfg.workers()).map_err(CliError::from_core)?;
        log.push_str(&summary(&stats));
        rows[i] = Some(stats.to_csv_row());
        write_atomic(&out, &render(&rows))?;
    }
    write_atomic(&out, &render(&rows))?;
    Ok(log)
}

pub fn cmd_trajectories(cfg: &RunConfig) -> Result<String, CliError> {
    let n = cfg.n()?;
    if n == 0 {
        return Err(CliError::Config("N: must be at least 1".into()));
    }
    let m = match (cfg.m, cfg.delta, cfg.rate) {
        (Some(m), _, _) => m,
        (None, Some(d), None) if d > 0.0 && d < 1.0 => partition_size(n, d),
        (None, None, Some(r)) if r > 0.0 => partition_size(n, (-(n as f64) * r).exp2()),
        _ => return Err(CliError::Config("M: required (or exactly one valid delta or R)".into())),
    };
    if m == 0 || m > u16::MAX as usize + 1 {
        return Err(CliError::Config(format!("M: {m} is outside 1..=65536")));
    }
    let (gw, gv) = match cfg.velocity()? {
        VelocityMode::Known => (cfg.grid_w.unwrap_or(4 * m as u64), 1),
        VelocityMode::Unknown => {
            let (w, v) = default_grid(n, m);
            (cfg.grid_w.unwrap_or(w), cfg.grid_v.unwrap_or(v))
        }
    };
    let cap = cfg.table_cap.unwrap_or(DEFAULT_TABLE_CAP);
    let table = enumerate_trajectories(n, m, gw, gv, cap).map_err(|e| match e {
        circsearch::Error::TableCapExceeded { .. } => CliError::Runtime(e.to_string()),
        other => CliError::from_core(other),
    })?;
    let growth = table.growth_exponent().map_or_else(|| "n/a".to_string(), fmt_fixed6);
    let line = format!("N={n} M={m} trajectories={} growth_exponent={growth}\n", table.len());
    let csv = table.to_csv();
    match cfg.out.as_deref() {
        Some(p) => {
            write_atomic(p, &csv)?;
            Ok(line)
        }
        None => Ok(format!("{line}{csv}")),
    }
}
