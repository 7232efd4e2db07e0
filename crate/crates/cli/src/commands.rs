use std::path::{Path, PathBuf};

use plc_core::competition::{fisher_pry, run_competition, substitution_rate};
use plc_core::config::{load_config, ConfigFile, Scenario};
use plc_core::fit::{
    default_floor_grid, fit_gompertz, fit_plc, fit_price_decline, FitResult, GompertzFitOptions,
    PlcData, PlcFitOptions, PlcPrior,
};
use plc_core::io::{
    emit_components, emit_fit, load_csv, write_table, write_text, DatasetKind, EmitFormat, Schema,
    Units,
};
use plc_core::market::MarketVolumeParams;
use plc_core::scenario::PlcParams;
use plc_core::sizes::{gibrat_simulate, normality_test, GibratConfig, IncrementDistribution};
use plc_core::{PlcError, SalesSeries};

use crate::{Cli, Command, Failure, FitArgs, FitKind, Format, ScenarioArgs};

type Outcome = std::result::Result<(), Failure>;

pub fn run(cli: &Cli) -> Outcome {
    let config = match &cli.config {
        Some(path) => load_config(path)?,
        None => ConfigFile::default(),
    };
    std::fs::create_dir_all(&cli.out).map_err(|e| PlcError::Io {
        path: cli.out.clone(),
        source: e,
    })?;
    let ctx = Context { cli, config };
    match &cli.command {
        Command::Simulate(a) => ctx.simulate(&a.scenario, a.dt, a.horizon),
        Command::Fit(a) => ctx.fit(a),
        Command::Compete(a) => ctx.compete(a.steps),
        Command::Sizedist(a) => ctx.sizedist(a),
        Command::Volume(a) => ctx.volume(a),
        Command::Substitute(a) => ctx.substitute(a),
    }
}

struct Context<'a> {
    cli: &'a Cli,
    config: ConfigFile,
}

impl Context<'_> {
    fn format(&self) -> EmitFormat {
        match self.cli.format {
            Format::Csv => EmitFormat::Csv,
            Format::PlotData => EmitFormat::PlotData,
        }
    }

    fn ext(&self) -> &'static str {
        match self.cli.format {
            Format::Csv => "csv",
            Format::PlotData => "dat",
        }
    }

    fn path(&self, stem: &str) -> PathBuf {
        self.cli.out.join(format!("{stem}.{}", self.ext()))
    }

    fn csv_path(&self, stem: &str) -> PathBuf {
        self.cli.out.join(format!("{stem}.csv"))
    }

    /// Scenario from `--scenario`, `--preset`, or the only config section.
    fn scenario(&self, args: &ScenarioArgs) -> Result<Scenario, PlcError> {
        if let Some(name) = &args.scenario {
            return self.config.scenario(name);
        }
        if let Some(name) = &args.preset {
            let params = PlcParams::preset(name).ok_or_else(|| {
                PlcError::Config(format!(
                    "unknown preset `{name}`, expected one of {:?}",
                    PlcParams::PRESETS
                ))
            })?;
            return Ok(Scenario {
                name: name.clone(),
                params,
                dt: 0.05,
                horizon: PlcParams::preset_horizon(name).expect("preset horizon"),
                fixed: Vec::new(),
            });
        }
        match self.config.scenario.len() {
            1 => {
                let name = self.config.scenario.keys().next().expect("one scenario");
                self.config.scenario(name)
            }
            0 => Err(PlcError::Config(
                "no scenario: pass --preset, or --config with a [scenario.<name>] section".into(),
            )),
            _ => Err(PlcError::Config(
                "several scenarios configured: choose one with --scenario".into(),
            )),
        }
    }

    fn simulate(&self, args: &ScenarioArgs, dt: Option<f64>, horizon: Option<f64>) -> Outcome {
        let s = self.scenario(args)?;
        let dt = dt.unwrap_or(s.dt);
        let horizon = horizon.unwrap_or(s.horizon);
        let c = s.params.assemble(dt, horizon)?;
        let m = s.params.market_potential;
        let total = c.total.scaled(m);
        let bass_first = c.bass_first.scaled(m);
        let bass_branch = c.bass_branch.scaled(m);
        let gompertz_first = c.gompertz_first.scaled(m);
        let gompertz_branch = c.gompertz_branch.scaled(m);
        emit_components(
            &[
                ("total", &total),
                ("bass_first", &bass_first),
                ("bass_branch", &bass_branch),
                ("gompertz_first", &gompertz_first),
                ("gompertz_branch", &gompertz_branch),
                ("penetration", &c.penetration),
                ("relative_price", &c.relative_price),
            ],
            self.path(&format!("{}_plc", s.name)),
            self.format(),
        )?;
        let peaks: Vec<String> = c
            .total
            .peak_times()
            .iter()
            .map(|t| format!("{t:.2}"))
            .collect();
        println!("{}: sales peaks at {}", s.name, peaks.join(", "));
        Ok(())
    }

    fn load(&self, path: &Path, kind: DatasetKind, units: Units) -> Result<SalesSeries, PlcError> {
        let d = load_csv(path, Schema::new(kind, units))?;
        if d.resampled {
            eprintln!(
                "plc: {} has a non-uniform grid; resampled to dt = {}",
                path.display(),
                d.series.dt
            );
        }
        Ok(d.series)
    }

    fn fit(&self, a: &FitArgs) -> Outcome {
        let need = |p: &Option<PathBuf>, what: &str| {
            p.clone().ok_or_else(|| {
                PlcError::Config(format!("`--kind {}` needs --{what}", kind_name(a.kind)))
            })
        };
        let (stem, result) = match a.kind {
            FitKind::Price => {
                let prices = self.load(
                    &need(&a.prices, "prices")?,
                    DatasetKind::Price,
                    Units::Currency,
                )?;
                (
                    "price_fit",
                    fit_price_decline(&prices, &default_floor_grid())?,
                )
            }
            FitKind::Gompertz => {
                let pen = self.load(
                    &need(&a.penetration, "penetration")?,
                    DatasetKind::Penetration,
                    Units::Fraction,
                )?;
                let background = match (
                    &a.scenario.scenario,
                    &a.scenario.preset,
                    self.config.scenario.is_empty(),
                ) {
                    (None, None, true) => None,
                    _ => {
                        let s = self.scenario(&a.scenario)?;
                        s.params.has_bass().then(|| s.params.bass()).transpose()?
                    }
                };
                let mut opts = GompertzFitOptions {
                    background,
                    ..GompertzFitOptions::default()
                };
                if let Some(n) = a.max_evals {
                    opts.simplex.max_evals = n;
                }
                ("gompertz_fit", fit_gompertz(&pen, a.decline_rate, &opts)?)
            }
            FitKind::Plc => {
                let sales =
                    self.load(&need(&a.sales, "sales")?, DatasetKind::Sales, Units::Count)?;
                let penetration = a
                    .penetration
                    .as_ref()
                    .map(|p| self.load(p, DatasetKind::Penetration, Units::Fraction))
                    .transpose()?;
                let prices = a
                    .prices
                    .as_ref()
                    .map(|p| self.load(p, DatasetKind::Price, Units::Currency))
                    .transpose()?;
                let s = self.scenario(&a.scenario)?;
                let mut prior: PlcPrior = s.prior();
                for f in &a.fix {
                    prior = prior.fix(f.trim());
                }
                let data = PlcData {
                    sales,
                    penetration,
                    prices,
                };
                let mut opts = PlcFitOptions::default();
                if let Some(n) = a.max_evals {
                    opts.stage.max_evals = n;
                    opts.polish.max_evals = n;
                }
                let r = fit_plc(&data, &prior, &opts)?;
                let fitted = prior.params.with_values(&r.parameters)?;
                let curve = fitted
                    .assemble_n(data.sales.dt, data.sales.len())?
                    .total
                    .scaled(fitted.market_potential);
                emit_components(
                    &[("observed", &data.sales), ("fitted", &curve)],
                    self.path("plc_curve"),
                    self.format(),
                )?;
                ("plc_fit", r)
            }
        };
        self.report_fit(stem, &result)
    }

    fn report_fit(&self, stem: &str, r: &FitResult) -> Outcome {
        emit_fit(r, self.path(stem), self.format())?;
        write_text(
            self.cli.out.join(format!("{stem}.json")),
            &(r.to_json() + "\n"),
        )?;
        for (k, v) in &r.parameters {
            println!("{k} = {v}");
        }
        println!("loss = {}", r.loss);
        for n in &r.notes {
            println!("note: {n}");
        }
        if r.converged {
            Ok(())
        } else {
            Err(Failure::NotConverged(stem.replace('_', " ")))
        }
    }

    fn compete(&self, steps: Option<usize>) -> Outcome {
        let section = self.config.competition.as_ref().ok_or_else(|| {
            PlcError::Config("`compete` needs a [competition] section in --config".into())
        })?;
        let mut cfg = section.to_config()?;
        if let Some(seed) = self.cli.seed {
            cfg.seed = seed;
        }
        if let Some(n) = steps {
            cfg.steps = n;
        }
        let run = run_competition(&cfg)?;
        write_table(
            self.csv_path("trajectory"),
            &["t", "brand_id", "share", "price", "sales"],
            run.rows.iter().map(|r| {
                vec![
                    r.t.to_string(),
                    r.brand_id.to_string(),
                    r.share.to_string(),
                    r.price.to_string(),
                    r.sales.to_string(),
                ]
            }),
        )?;
        write_table(
            self.csv_path("mean_price"),
            &["tau", "t", "mean_price", "variance"],
            run.mean_price.iter().map(|p| {
                vec![
                    p.tau.to_string(),
                    p.t.to_string(),
                    p.mean_price.to_string(),
                    p.variance.to_string(),
                ]
            }),
        )?;
        let last = run.mean_price.last().expect("initial point is recorded");
        println!(
            "{} brands, {} steps, {} jumps; mean price {} -> {}",
            cfg.brands.len(),
            cfg.steps,
            run.jumps_applied,
            run.mean_price[0].mean_price,
            last.mean_price
        );
        Ok(())
    }

    fn sizedist(&self, a: &crate::SizedistArgs) -> Outcome {
        let mut cfg = self.config.sizes.unwrap_or(GibratConfig {
            n_units: 10_000,
            horizon: 400,
            drift: 0.0,
            volatility: 0.05,
            seed: 0,
            initial_size: 1.0,
            increments: IncrementDistribution::Normal,
        });
        if let Some(v) = a.units {
            cfg.n_units = v;
        }
        if let Some(v) = a.steps {
            cfg.horizon = v;
        }
        if let Some(v) = a.drift {
            cfg.drift = v;
        }
        if let Some(v) = a.volatility {
            cfg.volatility = v;
        }
        if let Some(seed) = self.cli.seed {
            cfg.seed = seed;
        }
        let sample = gibrat_simulate(&cfg)?;
        write_table(
            self.csv_path("sizes"),
            &["unit_id", "size"],
            sample
                .sizes
                .iter()
                .enumerate()
                .map(|(i, y)| vec![i.to_string(), y.to_string()]),
        )?;
        let r = normality_test(&sample.sizes)?;
        let rows = [
            ("n", r.n as f64),
            ("mean_log", r.mean),
            ("variance_log", r.variance),
            ("skewness", r.skewness),
            ("excess_kurtosis", r.excess_kurtosis),
            ("ks_distance", r.ks_distance),
            ("ks_critical_95", r.ks_critical_95),
            ("upper_tail_residual", r.upper_tail_residual),
            ("ks_passes", f64::from(u8::from(r.ks_passes()))),
            ("resampled_draws", sample.resampled as f64),
        ];
        write_table(
            self.csv_path("size_report"),
            &["statistic", "value"],
            rows.iter().map(|(k, v)| vec![k.to_string(), v.to_string()]),
        )?;
        for (k, v) in rows {
            println!("{k} = {v}");
        }
        Ok(())
    }

    fn volume(&self, a: &crate::VolumeArgs) -> Outcome {
        let mv = MarketVolumeParams::new(a.potential, a.upper, a.natural_price, a.width)?;
        if !(a.step > 0.0 && a.to >= a.from && a.from >= 0.0) {
            return Err(
                PlcError::Config("price grid needs 0 <= from <= to and step > 0".into()).into(),
            );
        }
        let n = ((a.to - a.from) / a.step).round() as usize;
        write_table(
            self.csv_path("volume"),
            &["mu", "volume", "density"],
            (0..=n).map(|i| {
                let mu = a.from + a.step * i as f64;
                vec![
                    mu.to_string(),
                    mv.volume(mu).to_string(),
                    mv.density(mu).to_string(),
                ]
            }),
        )?;
        println!(
            "natural price {}: volume {}",
            mv.natural_price,
            mv.volume(mv.natural_price)
        );
        Ok(())
    }

    fn substitute(&self, a: &crate::SubstituteArgs) -> Outcome {
        if !(a.initial_share > 0.0 && a.initial_share < 1.0) {
            return Err(PlcError::Config("initial share must lie in (0, 1)".into()).into());
        }
        if !(a.dt > 0.0 && a.horizon >= 0.0) {
            return Err(PlcError::Config("need dt > 0 and horizon >= 0".into()).into());
        }
        let theta = substitution_rate(a.f1, a.f2, a.epsilon);
        let c_m = (a.initial_share / (1.0 - a.initial_share)).ln();
        let n = (a.horizon / a.dt).round() as usize;
        let t: Vec<f64> = (0..=n).map(|i| i as f64 * a.dt).collect();
        let share = SalesSeries::new(0.0, a.dt, fisher_pry(&t, theta, c_m))?;
        emit_components(
            &[("share", &share)],
            self.path("substitution"),
            self.format(),
        )?;
        if theta != 0.0 {
            println!("theta = {theta}; half-share time {}", -c_m / theta);
        } else {
            println!("theta = 0; shares stay constant");
        }
        Ok(())
    }
}

fn kind_name(k: FitKind) -> &'static str {
    match k {
        FitKind::Plc => "plc",
        FitKind::Gompertz => "gompertz",
        FitKind::Price => "price",
    }
}
