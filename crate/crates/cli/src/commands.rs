//! Implementation of each subcommand.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use metaoptics::export::{write_atomic, write_field_csv, write_moments_csv, write_revivals_csv};
use metaoptics::field::CONVERGENCE_TOLERANCE;
use metaoptics::oracle::{resample, run_scenario_oracle};
use metaoptics::{
    boundary_trace, detect_revivals, echo_field, l2_error, moments_series, nondimensionalize, parse_scenario,
    validate_scenario, ComplexField, Diagnostic, Error, FieldKind, Region, Result, RevivalReport, Scenario,
    SpaceTimeGrid, UnitsMode, WavepacketEngine,
};

use crate::manifest::{scenario_hash, RunManifest, Stage};
use crate::{Cli, Command};

/// Sub-lattice used for the node-doubling convergence check.
const CONVERGENCE_ROWS: usize = 41;
const CONVERGENCE_COLS: usize = 21;

struct Run<'a> {
    cli: &'a Cli,
    scenario: Scenario,
    hash: String,
    out_dir: PathBuf,
    outputs: Vec<PathBuf>,
    timing: Vec<Stage>,
    clock: Instant,
}

impl Run<'_> {
    fn stage(&mut self, name: &str) {
        let now = Instant::now();
        self.timing.push(Stage { name: name.into(), seconds: (now - self.clock).as_secs_f64() });
        self.clock = now;
    }

    fn path(&self, suffix: &str) -> PathBuf {
        self.out_dir.join(format!("{}_{suffix}", self.scenario.name()))
    }

    fn say(&self, msg: impl AsRef<str>) {
        if !self.cli.quiet {
            println!("{}", msg.as_ref());
        }
    }

    /// Maps a field computed in dimensionless units back to SI unless the
    /// user asked for dimensionless output.
    fn exported(&self, mut f: ComplexField, computed: &Scenario) -> ComplexField {
        if let (UnitsMode::Dimensionless(sc), false) = (computed.units_mode, self.cli.dimensionless) {
            let g = f.grid;
            f.grid = SpaceTimeGrid {
                x_min: g.x_min * sc.length,
                x_max: g.x_max * sc.length,
                t_min: g.t_min * sc.time,
                t_max: g.t_max * sc.time,
                ..g
            };
        }
        f
    }

    fn write_field(&mut self, f: &ComplexField, kind: &str) -> Result<()> {
        let p = self.path(&format!("{kind}.csv"));
        write_atomic(&p, |w| write_field_csv(f, w))?;
        self.outputs.push(p);
        Ok(())
    }

    fn write_text(&mut self, suffix: &str, text: &str) -> Result<()> {
        let p = self.path(suffix);
        write_atomic(&p, |w| w.write_all(text.as_bytes()))?;
        self.outputs.push(p);
        Ok(())
    }

    fn engine(&self, scenario: &Scenario) -> Result<WavepacketEngine> {
        let e = WavepacketEngine::new(scenario)?;
        let change = e.convergence(CONVERGENCE_ROWS, CONVERGENCE_COLS)?;
        if change > CONVERGENCE_TOLERANCE {
            return Err(Error::Convergence { change, tolerance: CONVERGENCE_TOLERANCE });
        }
        self.say(format!("quadrature: {} nodes, doubling changes the field by {change:.2e}", e.node_count()));
        Ok(e)
    }

    fn oracle_scenario(&self) -> Result<Scenario> {
        if self.scenario.oracle.is_none() {
            return Err(Error::invalid("scenario has no [oracle] section"));
        }
        match self.scenario.units_mode {
            UnitsMode::Si => nondimensionalize(&self.scenario),
            UnitsMode::Dimensionless(_) => Ok(self.scenario.clone()),
        }
    }
}

fn scenario_error(path: &Path, message: String) -> Error {
    Error::Scenario(vec![Diagnostic { origin: Some(path.to_path_buf()), line: None, message }])
}

pub fn run(cli: &Cli) -> Result<()> {
    if cli.command == Command::Validate {
        let diags = validate_scenario(&cli.scenario).map_err(|e| scenario_error(&cli.scenario, e.to_string()))?;
        if diags.is_empty() {
            if !cli.quiet {
                println!("{}: ok", cli.scenario.display());
            }
            return Ok(());
        }
        return Err(Error::Scenario(diags));
    }
    let text = std::fs::read_to_string(&cli.scenario)
        .map_err(|e| scenario_error(&cli.scenario, format!("cannot read scenario: {e}")))?;
    let mut scenario = parse_scenario(&text, Some(&cli.scenario))?;
    if let Some(n) = cli.nquad {
        scenario.spectrum.n_quad = n;
        scenario.validate()?;
    }
    if cli.dimensionless {
        scenario = nondimensionalize(&scenario)?;
    }
    let out_dir = cli
        .out
        .clone()
        .or_else(|| scenario.output.directory.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
    let mut run = Run {
        cli,
        hash: scenario_hash(&text),
        scenario,
        out_dir,
        outputs: Vec::new(),
        timing: Vec::new(),
        clock: Instant::now(),
    };
    run.stage("setup");
    let name = match cli.command {
        Command::Field => field(&mut run),
        Command::Oracle => oracle(&mut run),
        Command::Compare => compare(&mut run),
        Command::Analyze => analyze(&mut run),
        Command::Validate => unreachable!("handled above"),
    }
    .map(|()| format!("{:?}", cli.command).to_lowercase())?;
    let manifest = RunManifest {
        command: name,
        scenario: cli.scenario.clone(),
        scenario_sha256: run.hash.clone(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        dimensionless: cli.dimensionless,
        n_quad: run.scenario.spectrum.n_quad,
        outputs: run.outputs.clone(),
        timing: std::mem::take(&mut run.timing),
    };
    let p = run.path(&format!("{}_manifest.json", manifest.command));
    manifest.write(&p)?;
    run.say(format!("wrote {} files and {}", manifest.outputs.len(), p.display()));
    Ok(())
}

fn field(run: &mut Run) -> Result<()> {
    let scenario = run.scenario.clone();
    let engine = run.engine(&scenario)?;
    run.stage("convergence");
    for kind in scenario.output.fields.clone() {
        let f = match kind {
            FieldKind::Psi0 => engine.psi0_field()?,
            FieldKind::Psi => engine.psi_field()?,
            FieldKind::FreeSpace => engine.freespace_field()?,
            FieldKind::Echo => {
                let trace = engine.pulse_induced_trace()?;
                let echo = echo_field(&trace, &scenario)?;
                run.say(format!("echo: discarded spectral weight {:.2e}", echo.discarded_weight));
                echo.field
            }
        };
        run.write_field(&f, kind.name())?;
        run.stage(kind.name());
        run.say(format!("{}: max |psi| = {:.4e}", kind.name(), f.max_abs()));
    }
    Ok(())
}

fn describe_peaks(r: &RevivalReport) -> String {
    if r.peaks.is_empty() {
        return "none".into();
    }
    r.peaks
        .iter()
        .map(|p| format!("{:.6e} ({:.4e})", p.time, p.intensity))
        .collect::<Vec<_>>()
        .join(", ")
}

fn oracle(run: &mut Run) -> Result<()> {
    let scenario = run.oracle_scenario()?;
    let engine = WavepacketEngine::new(&scenario)?;
    let result = run_scenario_oracle(&engine, None)?;
    run.stage("solve");
    let on_grid = resample(&result.field, &scenario.grid_positive)?;
    let exported = run.exported(on_grid, &scenario);
    run.write_field(&exported, "oracle")?;
    let mut report = String::new();
    let g = result.field.grid;
    let steps_per_row = (result.norms.len() - 1) / (g.nt - 1).max(1);
    let _ = writeln!(report, "# Crank-Nicolson run report");
    let _ = writeln!(report, "# scenario_sha256 = {}", run.hash);
    let _ = writeln!(report, "# steps = {}, max_step_drift = {:.6e}", result.norms.len() - 1, result.max_step_drift);
    let _ = writeln!(report, "# step, norm, relative_change_from_start");
    let n0 = result.norms[0];
    for (s, n) in result.norms.iter().enumerate().step_by(steps_per_row.max(1)) {
        let _ = writeln!(report, "{s}, {n:.16e}, {:.6e}", n / n0 - 1.0);
    }
    run.write_text("oracle_report.txt", &report)?;
    run.stage("export");
    run.say(format!("oracle: {} steps, max per-step norm change {:.2e}", result.norms.len() - 1, result.max_step_drift));
    Ok(())
}

fn compare(run: &mut Run) -> Result<()> {
    let scenario = run.oracle_scenario()?;
    let engine = WavepacketEngine::new(&scenario)?;
    let analytic = engine.psi_field()?;
    run.stage("analytic");
    let restricted = scenario.oracle.map_or(true, |o| o.restrict_pulse);
    let primary = run_scenario_oracle(&engine, Some(restricted))?;
    run.stage("oracle");
    let oracle = resample(&primary.field, &scenario.grid_positive)?;
    let region = Region::whole(&analytic.grid);
    let err = l2_error(&analytic, &oracle, region)?;
    let t_after = scenario.revival_after();
    let threshold = scenario.analysis.revival_threshold;
    let ta = boundary_trace(&analytic)?;
    let to = boundary_trace(&oracle)?;
    let ra = detect_revivals(&ta, t_after, threshold)?;
    let ro = detect_revivals(&to, t_after, threshold)?;
    let mut report = String::new();
    let _ = writeln!(report, "# analytic field versus direct Crank-Nicolson solve");
    let _ = writeln!(report, "scenario_sha256 = {}", run.hash);
    let _ = writeln!(report, "units = dimensionless (hbar = m = k0 = 1)");
    let _ = writeln!(
        report,
        "region = x in [{:.6e}, {:.6e}], t in [{:.6e}, {:.6e}]",
        region.x_min, region.x_max, region.t_min, region.t_max
    );
    let _ = writeln!(report, "l2_error = {err:.6e}");
    let _ = writeln!(report, "max_step_norm_drift = {:.6e}", primary.max_step_drift);
    let _ = writeln!(report, "analytic_revivals = {}", describe_peaks(&ra));
    let _ = writeln!(report, "oracle_revivals = {}", describe_peaks(&ro));
    if !scenario.pulses.is_empty() {
        let other = run_scenario_oracle(&engine, Some(!restricted))?;
        run.stage("oracle_unrestricted");
        let tb = boundary_trace(&resample(&other.field, &scenario.grid_positive)?)?;
        let peak = to.intensity.iter().fold(0.0_f64, |m, &v| m.max(v));
        let change = to.intensity.iter().zip(&tb.intensity).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        let _ = writeln!(
            report,
            "half_space_restriction = {restricted}; boundary trace change when toggled = {:.6e} of its peak",
            change / peak
        );
    }
    run.write_text("compare.txt", &report)?;
    run.say(report.trim_end());
    Ok(())
}

fn analyze(run: &mut Run) -> Result<()> {
    let scenario = run.scenario.clone();
    let engine = run.engine(&scenario)?;
    let psi = engine.psi_field()?;
    run.stage("field");
    let trace = boundary_trace(&psi)?;
    let report = detect_revivals(&trace, scenario.revival_after(), scenario.analysis.revival_threshold)?;
    let p = run.path("revivals.csv");
    let hash = run.hash.clone();
    write_atomic(&p, |w| write_revivals_csv(&report, &hash, w))?;
    run.outputs.push(p);
    let series = moments_series(&psi);
    let p = run.path("moments.csv");
    write_atomic(&p, |w| write_moments_csv(&series, w))?;
    run.outputs.push(p);
    run.stage("analysis");
    run.say(format!("revivals after {:.4e}: {}", scenario.revival_after(), describe_peaks(&report)));
    Ok(())
}
