//! Acceptance gate: one pass/fail line per criterion, tolerances pinned here.

mod common;

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use metaoptics::export::write_field_csv;
use metaoptics::oracle::{cn_evolve, compare_with_oracle, initial_packet, step_potential, OracleConfig};
use metaoptics::quadrature::gauss_legendre_on;
use metaoptics::{
    approximation_ratio, boundary_trace, comoving_phase, detect_revivals, echo_field, kappa, moments_series,
    nondimensionalize, phi_pro, reflection, transmission, Barrier, Complex64, FieldKind, MomentumSpectrum,
    QuantumUnits, Result, Scenario, ScatteringAmplitudes, SpaceTimeGrid, WavepacketEngine,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Revival threshold as a fraction of the pre-pulse reference intensity.
const REVIVAL_FRACTION: f64 = 0.01;

/// First revival times frozen from validated runs, in seconds, checked to
/// within two rows of each scenario's time grid.
const FROZEN_FIRST_REVIVAL: [(&str, f64); 6] = [
    ("fig3a", 0.23e-6),
    ("fig3b", 0.41e-6),
    ("fig3c", 0.41e-6),
    ("fig4a", 0.50e-6),
    ("fig4b", 0.50e-6),
    ("fig4c", 0.50e-6),
];
const FROZEN_ROWS: f64 = 2.0;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self { pass, detail: detail.into() }
    }
}

fn all(parts: Vec<Outcome>) -> Outcome {
    let pass = parts.iter().all(|o| o.pass);
    let detail = parts
        .iter()
        .map(|o| format!("[{}] {}", if o.pass { "ok" } else { "FAIL" }, o.detail))
        .collect::<Vec<_>>()
        .join("; ");
    Outcome { pass, detail }
}

// 1. Scattering invariants.
fn scattering() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let a = 2.244e9;
    let mut worst_r = 0.0_f64;
    let mut worst_flux = 0.0_f64;
    for _ in 0..1000 {
        let k = a * rng.gen_range(1e-6..1.0);
        if k < a {
            worst_r = worst_r.max((reflection(k, a)?.norm() - 1.0).abs());
        }
        let k = a * rng.gen_range(1.0..20.0);
        if k > a {
            let s = ScatteringAmplitudes::new(k, a)?;
            worst_flux = worst_flux.max((s.reflected_flux() + s.transmitted_flux() - 1.0).abs());
        }
    }
    let t_a = transmission(a, a)?;
    Ok(all(vec![
        Outcome::new(worst_r < 1e-12, format!("max ||R| - 1| = {worst_r:.2e} (< 1e-12)")),
        Outcome::new(worst_flux < 1e-12, format!("max flux defect = {worst_flux:.2e} (< 1e-12)")),
        Outcome::new(t_a == Complex64::new(2.0, 0.0), format!("T(a) = {t_a}")),
    ]))
}

fn trace_revivals(s: &Scenario) -> Result<metaoptics::RevivalReport> {
    let psi = WavepacketEngine::new(s)?.psi_field()?;
    detect_revivals(&boundary_trace(&psi)?, s.revival_after(), REVIVAL_FRACTION)
}

// 2. Pure evanescent packet.
fn pure_evanescent() -> Result<Outcome> {
    let s = common::bundled("fig2b");
    let psi0 = WavepacketEngine::new(&s)?.psi0_field()?;
    let g = psi0.grid;
    let kap0 = kappa(s.spectrum.k0, s.barrier.a)?.re;
    let j0 = psi0.time_index(0.0)?;
    let pts: Vec<(f64, f64)> = (0..g.nx)
        .map(|i| (g.x(i), psi0.values[[j0, i]].norm().ln()))
        .filter(|(x, _)| *x <= 2.0 / kap0)
        .collect();
    let n = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / n, sy / n);
    let slope = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / pts.iter().map(|(x, _)| (x - mx).powi(2)).sum::<f64>();
    let slope_err = (slope / -kap0 - 1.0).abs();

    // Below exp(-n_sigma^2) of the peak the truncated spectral window sets a
    // noise floor on the intensity, so monotonicity is judged above it.
    let tr = boundary_trace(&psi0)?;
    let peak = (0..tr.intensity.len()).max_by(|&a, &b| tr.intensity[a].total_cmp(&tr.intensity[b])).unwrap_or(0);
    let floor = (-s.spectrum.n_sigma.powi(2)).exp() * tr.intensity[peak];
    let rises = tr.intensity[peak..].windows(2).filter(|w| w[1] > w[0] && w[1] > floor).count();

    let total = |t: f64| -> Result<f64> {
        let j = psi0.time_index(t)?;
        Ok(psi0.row(j).iter().map(|v| v.norm_sqr()).sum())
    };
    let late = total(1e-6)? / total(0.0)?;
    Ok(all(vec![
        Outcome::new(
            slope_err < 0.05,
            format!("log slope {slope:.4e} vs -kappa(k0) {:.4e}, rel. error {slope_err:.2e} (< 5%)", -kap0),
        ),
        Outcome::new(
            rises == 0,
            format!("{rises} rises in the boundary intensity after its peak above the floor {floor:.1e}"),
        ),
        Outcome::new(late < 0.1, format!("total intensity at 1 us / at 0 = {late:.2e} (< 0.1)")),
    ]))
}

// 3. Semi-evanescent packet.
fn semi_evanescent() -> Result<Outcome> {
    let s = common::bundled("fig2a");
    let psi0 = WavepacketEngine::new(&s)?.psi0_field()?;
    let start = s.revival_after();
    let series: Vec<_> = moments_series(&psi0).into_iter().filter(|(t, _)| *t >= start).collect();
    let n = series.len() as f64;
    let mt = series.iter().map(|(t, _)| t).sum::<f64>() / n;
    let mc = series.iter().map(|(_, m)| m.centroid).sum::<f64>() / n;
    let velocity = series.iter().map(|(t, m)| (t - mt) * (m.centroid - mc)).sum::<f64>()
        / series.iter().map(|(t, _)| (t - mt).powi(2)).sum::<f64>();
    let shrinks = series.windows(2).filter(|w| w[1].1.rms_width <= w[0].1.rms_width).count();
    Ok(all(vec![
        Outcome::new(velocity > 0.0, format!("centroid velocity {velocity:.3e} m/s over t >= {start:.3e} s")),
        Outcome::new(
            shrinks == 0 && series.len() > 2,
            format!("rms width non-increasing in {shrinks} of {} steps", series.len().saturating_sub(1)),
        ),
    ]))
}

fn frozen_check(name: &str, s: &Scenario, r: &metaoptics::RevivalReport) -> Outcome {
    let Some(&(_, t)) = FROZEN_FIRST_REVIVAL.iter().find(|(n, _)| *n == name) else {
        return Outcome::new(false, format!("{name}: no frozen revival time"));
    };
    let tol = FROZEN_ROWS * s.grid_positive.dt();
    match r.peaks.first() {
        Some(p) => Outcome::new(
            (p.time - t).abs() <= tol,
            format!("{name}: first revival at {:.4e} s, frozen {t:.4e} s", p.time),
        ),
        None => Outcome::new(false, format!("{name}: no revival to compare with frozen {t:.4e} s")),
    }
}

// 4. Echo existence.
fn echo_existence() -> Result<Outcome> {
    let mut parts = Vec::new();
    for name in ["fig3a", "fig4a", "fig3b"] {
        let clock = Instant::now();
        let s = common::bundled(name);
        let r = trace_revivals(&s)?;
        let mut off = s.clone();
        off.pulses.iter_mut().for_each(|p| p.amplitude_c = 0.0);
        let r0 = trace_revivals(&off)?;
        let secs = clock.elapsed().as_secs_f64();
        parts.push(Outcome::new(
            !r.peaks.is_empty() && r0.peaks.is_empty() && secs < 60.0,
            format!("{name}: {} peaks with pulse, {} without, {secs:.1} s", r.peaks.len(), r0.peaks.len()),
        ));
        parts.push(frozen_check(name, &s, &r));
    }
    Ok(all(parts))
}

// 5. Multi-echo counting.
fn multi_echo() -> Result<Outcome> {
    let mut parts = Vec::new();
    for (name, exact) in [("fig3c", true), ("fig4b", true), ("fig4c", false)] {
        let s = common::bundled(name);
        let r = trace_revivals(&s)?;
        let n = r.peaks.len();
        let ok = if exact { n == 2 } else { n >= 2 };
        let times: Vec<String> = r.peaks.iter().map(|p| format!("{:.3e}", p.time)).collect();
        parts.push(Outcome::new(
            ok,
            format!("{name}: {n} revivals [{}], need {}2", times.join(", "), if exact { "" } else { ">= " }),
        ));
        parts.push(frozen_check(name, &s, &r));
    }
    Ok(all(parts))
}

// 6. Validity ratio of the slowly varying approximation.
fn approximation_validity() -> Result<Outcome> {
    let s = common::bundled("fig3a");
    let units = s.quantum_units();
    let (k0, dk, a) = (s.spectrum.k0, s.spectrum.delta_k, s.barrier.a);
    let base = s.pulses[0];
    let ts: Vec<f64> = [0.1, 0.3, 0.5, 0.7, 0.9].iter().map(|f| base.t_start + f * base.tau1).collect();
    let xs = [0.05e-6, 0.3e-6, 0.6e-6, 0.9e-6, 1.2e-6, 1.45e-6];
    let lattice = |delta: f64, offsets: &[f64]| -> Result<Vec<(f64, f64)>> {
        let p = metaoptics::ComovingPulse { delta_offset: delta, ..base };
        let mut out = Vec::new();
        for &o in offsets {
            for sign in [-1.0, 1.0] {
                let k = k0 + sign * o * dk;
                for &t in &ts {
                    for &x in &xs {
                        out.push((o, approximation_ratio(k, a, t, x, &p, units)?.ratio));
                    }
                }
            }
        }
        Ok(out)
    };
    let shifted = lattice(PI / 10.0, &[0.06, 0.1, 0.25, 0.5, 1.0, 2.0, 4.0])?;
    let worst_shifted = shifted.iter().map(|&(_, r)| r).fold(f64::INFINITY, f64::min);
    let plain_inside = lattice(0.0, &[0.05, 0.25, 0.5, 0.9])?;
    let plain_outside = lattice(0.0, &[1.05, 1.2])?;
    let max_inside = plain_inside.iter().map(|&(_, r)| r).fold(0.0, f64::max);
    let min_outside = plain_outside.iter().map(|&(_, r)| r).fold(f64::INFINITY, f64::min);
    let share = |v: &[(f64, f64)], ok: fn(f64) -> bool| {
        let n = v.iter().filter(|&&(_, r)| ok(r)).count();
        format!("{n}/{} lattice points comply", v.len())
    };
    Ok(all(vec![
        Outcome::new(
            worst_shifted > 10.0,
            format!(
                "delta = pi/10, |k - k0| > dk/20: smallest ratio {worst_shifted:.3e} (> 10), {}",
                share(&shifted, |r| r > 10.0)
            ),
        ),
        Outcome::new(
            max_inside <= 1.0,
            format!(
                "delta = 0, |k - k0| < dk: largest ratio {max_inside:.3e} (<= 1), {}",
                share(&plain_inside, |r| r <= 1.0)
            ),
        ),
        Outcome::new(
            min_outside > 1.0,
            format!(
                "delta = 0, |k - k0| in (dk, 1.2 dk]: smallest ratio {min_outside:.3e} (> 1), {}",
                share(&plain_outside, |r| r > 1.0)
            ),
        ),
    ]))
}

// 7. Propagating limit of the comoving phase.
fn propagating_limit() -> Result<Outcome> {
    let s = common::bundled("fig3a");
    let units = s.quantum_units();
    let p = s.pulses[0];
    let a = s.barrier.a;
    let k = 1.05 * a;
    let kp = (k * k - a * a).sqrt();
    let v = units.velocity(kp);
    let times: Vec<f64> = [0.2, 0.5, 0.8, 1.0, 1.5].iter().map(|f| p.t_start + f * p.tau1).collect();
    // u = t - x/v and w = t + x/v on the propagating branch; x = v t (1 - r)/(1 + r) gives |u| = r |w|.
    let error_at = |r: f64| -> Result<f64> {
        let mut worst = 0.0_f64;
        for &t in &times {
            let x = v * t * (1.0 - r) / (1.0 + r);
            let phi = comoving_phase(k, a, t, x, &p, units)?;
            let pro = phi_pro(kp, t, &p, units)?;
            worst = worst.max((phi - pro).norm() / pro.abs());
        }
        Ok(worst)
    };
    let near: Vec<(f64, f64)> = [0.0, 1e-3, 3e-3, 9e-3].iter().map(|&r| error_at(r).map(|e| (r, e))).collect::<Result<_>>()?;
    let far: Vec<(f64, f64)> = [0.01, 0.03, 0.1].iter().map(|&r| error_at(r).map(|e| (r, e))).collect::<Result<_>>()?;
    let near_ok = near.iter().all(|&(_, e)| e < 1e-3);
    let monotone = far.windows(2).all(|w| w[1].1 > w[0].1);
    let show = |v: &[(f64, f64)]| v.iter().map(|(r, e)| format!("{r:.0e}: {e:.2e}")).collect::<Vec<_>>().join(", ");
    Ok(all(vec![
        Outcome::new(near_ok, format!("|u|/|v| < 0.01 relative errors {} (< 1e-3)", show(&near))),
        Outcome::new(monotone, format!("growth at |u|/|v| = {}", show(&far))),
    ]))
}

// 8. Cross-validation against the direct solver at desk scale.
const DESK_DK: f64 = 0.02;
const U: QuantumUnits = QuantumUnits { hbar: 1.0, mass: 1.0 };

fn desk_spectrum() -> MomentumSpectrum {
    MomentumSpectrum { k0: 1.0, delta_k: DESK_DK, n_sigma: 5.0, n_quad: 401 }
}

fn desk_config(grid: SpaceTimeGrid, dt: f64) -> OracleConfig {
    OracleConfig {
        grid,
        dt,
        absorbing_margin: 0.0,
        absorber_strength: 0.0,
        restrict_pulse_to_positive_x: true,
        dt_safety: 50.0,
    }
}

fn norm_conservation() -> Result<Vec<Outcome>> {
    let grid = SpaceTimeGrid::new(-600.0, 600.0, 12001, 0.0, 200.0, 2)?;
    let psi = initial_packet(&desk_spectrum(), -300.0, &grid.xs())?;
    let v = step_potential(Barrier { a: 1.0 }, &[], U, true);
    let run = cn_evolve(&psi, &v, &desk_config(grid, 0.02), U)?;
    let steps = run.norms.len() - 1;
    let drift = (run.norms[steps] / run.norms[0] - 1.0).abs();
    Ok(vec![Outcome::new(
        drift <= 1e-7 && steps == 10_000,
        format!("(a) norm drift {drift:.2e} over {steps} steps (<= 1e-7)"),
    )])
}

fn free_spreading() -> Result<Vec<Outcome>> {
    let grid = SpaceTimeGrid::new(-700.0, 1400.0, 42001, 0.0, 1500.0, 3)?;
    let psi = initial_packet(&desk_spectrum(), -300.0, &grid.xs())?;
    let run = cn_evolve(&psi, &|_, _| 0.0, &desk_config(grid, 0.05), U)?;
    let mut worst = 0.0_f64;
    for j in 0..grid.nt {
        let row = run.field.row(j);
        let w: Vec<f64> = row.iter().map(|v| v.norm_sqr()).collect();
        let s0: f64 = w.iter().sum();
        let c = w.iter().enumerate().map(|(i, w)| w * grid.x(i)).sum::<f64>() / s0;
        let var = w.iter().enumerate().map(|(i, w)| w * (grid.x(i) - c).powi(2)).sum::<f64>() / s0;
        let t = grid.t(j);
        let expect = (1.0 + (DESK_DK * DESK_DK * t).powi(2)).sqrt() / (2f64.sqrt() * DESK_DK);
        worst = worst.max((var.sqrt() / expect - 1.0).abs());
    }
    Ok(vec![Outcome::new(worst < 1e-3, format!("(b) free width vs closed form, worst rel. error {worst:.2e} (< 1e-3)"))])
}

fn step_reflection() -> Result<Vec<Outcome>> {
    let spectrum = desk_spectrum();
    let expected = |a: f64| -> Result<f64> {
        let (lo, hi) = spectrum.window();
        let (k, w) = gauss_legendre_on(4001, lo, hi)?;
        let (mut num, mut den) = (0.0, 0.0);
        for (&k, &w) in k.iter().zip(&w) {
            let p = w * spectrum.amplitude(k).powi(2);
            num += p * reflection(k, a)?.norm_sqr();
            den += p;
        }
        Ok(num / den)
    };
    let measured = |a: f64| -> Result<f64> {
        let grid = SpaceTimeGrid::new(-700.0, 500.0, 40001, 0.0, 700.0, 2)?;
        let psi = initial_packet(&spectrum, -300.0, &grid.xs())?;
        let v = step_potential(Barrier { a }, &[], U, true);
        let run = cn_evolve(&psi, &v, &desk_config(grid, 0.028), U)?;
        let row = run.field.row(1);
        let left: f64 = (0..grid.nx).filter(|&i| grid.x(i) < 0.0).map(|i| row[i].norm_sqr()).sum();
        Ok(left / row.iter().map(|v| v.norm_sqr()).sum::<f64>())
    };
    let mut parts = Vec::new();
    for a in [1.15, 0.9] {
        let (m, e) = (measured(a)?, expected(a)?);
        parts.push(Outcome::new(
            (m - e).abs() < 1e-3,
            format!("(c) a = {a}: reflected {m:.6} vs spectrum-averaged |R|^2 {e:.6} (within 1e-3)"),
        ));
    }
    Ok(parts)
}

fn desk_comparison() -> Result<Vec<Outcome>> {
    let mut parts = Vec::new();
    for name in ["desk_free", "desk_fig3a"] {
        let s = nondimensionalize(&common::bundled(name))?;
        let engine = WavepacketEngine::new(&s)?;
        let c = compare_with_oracle(&engine)?;
        let ra = detect_revivals(&boundary_trace(&c.analytic)?, s.revival_after(), REVIVAL_FRACTION)?;
        let ro = detect_revivals(&boundary_trace(&c.oracle)?, s.revival_after(), REVIVAL_FRACTION)?;
        let window = s.pulses.first().map_or(f64::INFINITY, |p| 0.1 * p.tau1);
        let times_ok = ra.peaks.len() == ro.peaks.len()
            && ra.peaks.iter().zip(&ro.peaks).all(|(p, q)| (p.time - q.time).abs() <= window);
        parts.push(Outcome::new(
            times_ok,
            format!("(d) {name}: {} analytic vs {} direct revivals", ra.peaks.len(), ro.peaks.len()),
        ));
        parts.push(Outcome::new(c.l2_error < 0.1, format!("(d) {name}: l2 error {:.3e} (< 0.1)", c.l2_error)));
    }
    Ok(parts)
}

fn oracle_cross_validation() -> Result<Outcome> {
    // An error fails only the sub-check that raised it.
    let checks: [(&str, fn() -> Result<Vec<Outcome>>); 4] = [
        ("(a)", norm_conservation),
        ("(b)", free_spreading),
        ("(c)", step_reflection),
        ("(d)", desk_comparison),
    ];
    let parts = checks
        .into_iter()
        .flat_map(|(label, check)| check().unwrap_or_else(|e| vec![Outcome::new(false, format!("{label} error: {e}"))]))
        .collect();
    Ok(all(parts))
}

// 9. Determinism.
fn csv_bytes(s: &Scenario) -> Result<Vec<Vec<u8>>> {
    let engine = WavepacketEngine::new(s)?;
    let mut out = Vec::new();
    for kind in &s.output.fields {
        let f = match kind {
            FieldKind::Psi0 => engine.psi0_field()?,
            FieldKind::Psi => engine.psi_field()?,
            FieldKind::FreeSpace => engine.freespace_field()?,
            FieldKind::Echo => echo_field(&engine.pulse_induced_trace()?, s)?.field,
        };
        let mut buf = Vec::new();
        write_field_csv(&f, &mut buf).map_err(|e| metaoptics::Error::io("memory", e))?;
        out.push(buf);
    }
    Ok(out)
}

fn determinism() -> Result<Outcome> {
    let mut differing = Vec::new();
    for name in common::BUNDLED {
        let s = common::bundled(name);
        if csv_bytes(&s)? != csv_bytes(&s)? {
            differing.push(name);
        }
    }
    Ok(Outcome::new(
        differing.is_empty(),
        format!("{} bundled scenarios rerun, differing: {:?}", common::BUNDLED.len(), differing),
    ))
}

type Criterion = (u8, &'static str, f64, fn() -> Result<Outcome>);

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        (1, "scattering invariants", 1.0, scattering),
        (2, "pure evanescent decay", 30.0, pure_evanescent),
        (3, "semi-evanescent ridge", 30.0, semi_evanescent),
        (4, "echo existence", 180.0, echo_existence),
        (5, "multi-echo counting", 180.0, multi_echo),
        (6, "approximation ratio", 10.0, approximation_validity),
        (7, "propagating limit", 5.0, propagating_limit),
        (8, "direct-solver cross-check", 300.0, oracle_cross_validation),
        (9, "determinism", f64::INFINITY, determinism),
    ];
    let filter: Vec<u8> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (n, title, limit, run) in criteria {
        if !filter.is_empty() && !filter.contains(&n) {
            continue;
        }
        let clock = Instant::now();
        let outcome = run().unwrap_or_else(|e| Outcome::new(false, format!("error: {e}")));
        let secs = clock.elapsed().as_secs_f64();
        let pass = outcome.pass && secs < limit;
        if !pass {
            failed += 1;
        }
        let budget = if limit.is_finite() { format!(" of {limit:.0} s") } else { String::new() };
        println!(
            "criterion {n} ({title}): {} in {secs:.1} s{budget}: {}",
            if pass { "PASS" } else { "FAIL" },
            outcome.detail
        );
    }
    println!("acceptance: {failed} criteria failed");
    if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
