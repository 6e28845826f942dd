use std::fs::File;
use std::io::{BufWriter, Write};

use qbranch_core::fitting::{eid_sweep, fit_gamma, EidConfig, FitWindow};
use qbranch_core::rabi::{freq_ladder, trace, DistParams, Model, ProbabilityTrace, RabiParams};
use qbranch_core::splitter::{
    derive_channels, stats_closed, stats_enumerate, stats_lossless_closed, stats_partition_binomial,
    stats_partition_multinomial, Convention, EfficiencySpec, OccupationStats, SplitterSpec,
};
use qbranch_core::Error;
use serde_json::{json, Map, Value};

use crate::output::{csv_error, csv_writer, fmt_f64, write_json};
use crate::verify;
use crate::{
    CliError, CliResult, ConventionArg, EidArgs, FitArgs, Format, Method, ModelArg, SplitterArgs, TraceArgs, VerifyArgs,
};

fn method_name(m: Method) -> &'static str {
    match m {
        Method::Closed => "closed",
        Method::Binomial => "binomial",
        Method::Multinomial => "multinomial",
        Method::Enumerate => "enumerate",
        Method::All => "all",
    }
}

pub(crate) fn splitter(args: &SplitterArgs, out: &mut dyn Write) -> CliResult<()> {
    let spec = SplitterSpec::from_reflect(args.r)?;
    let eff = EfficiencySpec::new(args.eps_r, args.eps_t, args.w_b)?;
    let convention = match args.convention {
        ConventionArg::All => Convention::AllPrepared,
        ConventionArg::Scattered => Convention::ScatteredOnly,
    };
    let channels = derive_channels(&spec, &eff, convention)?;
    let lossless = channels.loss == 0.0;

    let methods = match args.method {
        Method::All if lossless => vec![Method::Closed, Method::Binomial, Method::Multinomial, Method::Enumerate],
        Method::All => vec![Method::Closed, Method::Multinomial, Method::Enumerate],
        Method::Binomial if !lossless => {
            return Err(CliError::Usage("the binomial route needs lossless channels".into()))
        }
        m => vec![m],
    };
    let mut rows: Vec<(Method, OccupationStats)> = Vec::new();
    for m in methods {
        let stats = match m {
            Method::Closed if lossless => stats_lossless_closed(args.n, &spec)?,
            Method::Closed => stats_closed(args.n, &channels)?,
            Method::Binomial => stats_partition_binomial(args.n, &spec)?,
            Method::Multinomial => stats_partition_multinomial(args.n, &channels)?,
            Method::Enumerate => stats_enumerate(args.n, &channels)?,
            Method::All => unreachable!("expanded above"),
        };
        rows.push((m, stats));
    }

    match args.format {
        Format::Csv => {
            let mut w = csv_writer(out);
            let mut header = vec!["method", "n"];
            header.extend(OccupationStats::FIELDS);
            w.write_record(&header).map_err(csv_error)?;
            for (m, s) in &rows {
                let mut record = vec![method_name(*m).to_owned(), args.n.to_string()];
                record.extend(s.as_array().map(fmt_f64));
                w.write_record(&record).map_err(csv_error)?;
            }
            w.flush()?;
        }
        Format::Json => {
            let results: Vec<Value> = rows
                .iter()
                .map(|(m, s)| {
                    let mut obj = Map::new();
                    obj.insert("method".into(), json!(method_name(*m)));
                    for (name, v) in OccupationStats::FIELDS.iter().zip(s.as_array()) {
                        obj.insert((*name).into(), json!(v));
                    }
                    Value::Object(obj)
                })
                .collect();
            let report = json!({
                "params": {
                    "n": args.n,
                    "r": args.r,
                    "eps_r": args.eps_r,
                    "eps_t": args.eps_t,
                    "w_b": args.w_b,
                    "convention": match convention {
                        Convention::AllPrepared => "all",
                        Convention::ScatteredOnly => "scattered",
                    },
                    "method": method_name(args.method),
                },
                "channels": channels,
                "results": results,
            });
            write_json(out, &report)?;
        }
    }
    Ok(())
}

fn require(name: &str, value: Option<f64>, model: &str) -> CliResult<f64> {
    value.ok_or_else(|| CliError::Usage(format!("--{name} is required for the {model} model")))
}

fn build_model(args: &TraceArgs) -> CliResult<Model> {
    let model = match args.model {
        ModelArg::Closed => Model::Closed { omega: args.omega },
        ModelArg::Indist | ModelArg::Approx => {
            let label = if args.model == ModelArg::Indist { "indist" } else { "approx" };
            if args.eta.is_some() {
                return Err(CliError::Usage(format!("--eta does not apply to the {label} model")));
            }
            let params =
                RabiParams::new(args.omega, require("dt", args.dt, label)?, require("beta", args.beta, label)?)?;
            if args.model == ModelArg::Indist {
                Model::Indist { params, depth: args.depth }
            } else {
                Model::Approx { params }
            }
        }
        ModelArg::Dist => {
            if args.beta.is_some() {
                return Err(CliError::Usage("--beta does not apply to the dist model".into()));
            }
            Model::Dist {
                params: DistParams::new(
                    args.omega,
                    require("dt", args.dt, "dist")?,
                    require("eta", args.eta, "dist")?,
                )?,
            }
        }
    };
    Ok(model)
}

fn write_trace<W: Write>(sink: W, tr: &ProbabilityTrace) -> CliResult<()> {
    let mut w = csv_writer(sink);
    w.write_record(["t", "p_g", "p_e"]).map_err(csv_error)?;
    for &(t, p) in &tr.samples {
        w.write_record([fmt_f64(t), fmt_f64(p), fmt_f64(1.0 - p)]).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn rabi_trace(args: &TraceArgs, out: &mut dyn Write) -> CliResult<()> {
    let model = build_model(args)?;
    let tr = trace(&model, args.t_max, args.samples)?;
    match &args.out {
        Some(path) => {
            let file = File::create(path)?;
            write_trace(BufWriter::new(file), &tr)
        }
        None => write_trace(out, &tr),
    }
}

/// Reads `t` and `p_g` columns from a trace CSV.
fn read_trace(path: &std::path::Path) -> CliResult<ProbabilityTrace> {
    let malformed = |msg: String| CliError::Usage(format!("malformed trace {}: {msg}", path.display()));
    let mut reader = csv::Reader::from_path(path).map_err(|e| malformed(e.to_string()))?;
    let headers = reader.headers().map_err(|e| malformed(e.to_string()))?.clone();
    let column = |name: &str| {
        headers.iter().position(|h| h.trim() == name).ok_or_else(|| malformed(format!("missing column `{name}`")))
    };
    let (t_col, p_col) = (column("t")?, column("p_g")?);
    let mut samples = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| malformed(e.to_string()))?;
        let field = |col: usize| -> CliResult<f64> {
            let raw = record.get(col).ok_or_else(|| malformed(format!("row {}: short record", i + 1)))?;
            raw.trim().parse().map_err(|_| malformed(format!("row {}: `{raw}` is not a number", i + 1)))
        };
        samples.push((field(t_col)?, field(p_col)?));
    }
    ProbabilityTrace::new(samples).map_err(|e| malformed(e.to_string()))
}

pub(crate) fn fit(args: &FitArgs, out: &mut dyn Write) -> CliResult<()> {
    let tr = read_trace(&args.input)?;
    let last = tr.samples.last().map(|s| s.0).ok_or_else(|| CliError::Usage("trace is empty".into()))?;
    let window = FitWindow::new(args.t_min, args.t_max.unwrap_or(last))?;
    let gamma_hi = args.gamma_hi.unwrap_or(args.omega);
    let fit = fit_gamma(&tr, args.omega, window, gamma_hi)?;
    let report = json!({
        "gamma": fit.gamma,
        "gamma_over_omega": fit.gamma_over_omega(),
        "rms": fit.rms,
        "window": { "t_min": window.t_min, "t_max": window.t_max },
        "converged": fit.converged,
        "params": {
            "input": args.input.display().to_string(),
            "omega": args.omega,
            "t_min": window.t_min,
            "t_max": window.t_max,
            "gamma_hi": gamma_hi,
        },
    });
    write_json(out, &report)?;
    if fit.converged {
        Ok(())
    } else {
        Err(CliError::Unconverged(format!("damping fit ended on a bound of [0, {gamma_hi}]")))
    }
}

fn parse_levels(spec: &str) -> CliResult<Vec<usize>> {
    let bad = || CliError::Usage(format!("--levels `{spec}`: expected `A..B` or a comma list"));
    if let Some((a, b)) = spec.split_once("..") {
        let (a, b): (usize, usize) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
        if a > b {
            return Err(bad());
        }
        return Ok((a..=b).collect());
    }
    let levels: Vec<usize> = spec.split(',').map(|s| s.trim().parse().map_err(|_| bad())).collect::<CliResult<_>>()?;
    let mut sorted = levels.clone();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != levels.len() {
        return Err(CliError::Usage(format!("--levels `{spec}` repeats a level")));
    }
    Ok(levels)
}

fn parse_window(spec: &str) -> CliResult<(usize, FitWindow)> {
    let bad = || CliError::Usage(format!("--window `{spec}`: expected LEVEL:T_MIN:T_MAX"));
    let parts: Vec<&str> = spec.split(':').collect();
    let [level, t_min, t_max] = parts[..] else { return Err(bad()) };
    let level = level.trim().parse().map_err(|_| bad())?;
    let t_min = t_min.trim().parse().map_err(|_| bad())?;
    let t_max = t_max.trim().parse().map_err(|_| bad())?;
    Ok((level, FitWindow::new(t_min, t_max)?))
}

pub(crate) fn eid(args: &EidArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    let levels = parse_levels(&args.levels)?;
    let mut config = EidConfig::new(args.depth, levels.clone());
    config.samples_per_period = args.samples_per_period;
    for spec in &args.windows {
        let (level, window) = parse_window(spec)?;
        let slot = levels
            .iter()
            .position(|&l| l == level)
            .ok_or_else(|| CliError::Usage(format!("--window names level {level}, which is not swept")))?;
        config.windows[slot] = Some(window);
    }
    let prefactor = args.omega0 / freq_ladder(1.0, 0);
    let base = RabiParams::new(prefactor, args.dt, args.beta)?;
    let result = match eid_sweep(&base, &config) {
        Ok(r) => r,
        Err(Error::Unconverged { levels }) => {
            return Err(CliError::Unconverged(format!(
                "no damping found at level(s) {levels:?}: the fit ended on a bound"
            )))
        }
        Err(e) => return Err(e.into()),
    };
    if result.exponent.is_none() {
        writeln!(err, "warning: a single level leaves the exponent undefined")?;
    }

    match args.format {
        Format::Csv => {
            let mut w = csv_writer(out);
            w.write_record(["level", "omega_n", "gamma_n", "ratio"]).map_err(csv_error)?;
            for i in 0..result.levels.len() {
                w.write_record([
                    result.levels[i].to_string(),
                    fmt_f64(result.omegas[i]),
                    fmt_f64(result.gammas[i]),
                    fmt_f64(result.ratios[i]),
                ])
                .map_err(csv_error)?;
            }
            w.flush()?;
        }
        Format::Json => {
            let table: Vec<Value> = (0..result.levels.len())
                .map(|i| {
                    json!({
                        "level": result.levels[i],
                        "omega_n": result.omegas[i],
                        "gamma_n": result.gammas[i],
                        "ratio": result.ratios[i],
                        "window": result.fits[i].window,
                        "rms": result.fits[i].rms,
                    })
                })
                .collect();
            let report = json!({
                "levels": table,
                "exponent": result.exponent,
                "exponent_stderr": result.exponent_stderr,
                "params": {
                    "omega0": args.omega0,
                    "dt": args.dt,
                    "beta": args.beta,
                    "depth": args.depth,
                    "levels": levels,
                    "windows": args.windows,
                    "samples_per_period": args.samples_per_period,
                },
            });
            write_json(out, &report)?;
        }
    }
    Ok(())
}

pub(crate) fn verify(args: &VerifyArgs, out: &mut dyn Write) -> CliResult<()> {
    let known = verify::SUITES.iter().map(|s| s.name).collect::<Vec<_>>();
    for name in args.suites.iter().chain(&args.inject_fault) {
        if !known.contains(&name.as_str()) {
            return Err(CliError::Usage(format!("unknown suite `{name}`; known: {}", known.join(", "))));
        }
    }
    let mut failed = Vec::new();
    for suite in verify::SUITES {
        if !args.suites.is_empty() && !args.suites.iter().any(|s| s == suite.name) {
            continue;
        }
        let fault = if args.inject_fault.as_deref() == Some(suite.name) { verify::FAULT } else { 0.0 };
        match (suite.run)(args.quick, fault) {
            Ok(()) => writeln!(out, "PASS {}", suite.name)?,
            Err(detail) => {
                writeln!(out, "FAIL {}: {detail}", suite.name)?;
                failed.push(suite.name.to_owned());
            }
        }
    }
    if failed.is_empty() {
        writeln!(out, "all suites passed")?;
        Ok(())
    } else {
        Err(CliError::VerifyFailed(failed))
    }
}
