//! Reader for the line-based `key = value` scenario format.
//!
//! Sections are `[species]`, `[spectrum]`, `[barrier]`, `[pulse.N]`, `[grid]`,
//! `[output]`, `[analysis]` and `[oracle]`. Dimensioned values carry a unit
//! suffix; numbers may be written with `pi`, e.g. `pi/10 rad`.

use std::cell::Cell;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use super::{
    AnalysisConfig, Barrier, FieldKind, MomentumSpectrum, OracleSettings, OutputConfig, Scenario, SpaceTimeGrid,
};
use crate::error::{Diagnostic, Error, Result};
use crate::pulse::ComovingPulse;
use crate::units::{pulse_amplitude, AtomSpecies, UnitsMode, ATOMIC_MASS_UNIT, GAUSS};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Wavenumber,
    Length,
    Time,
    Mass,
    Energy,
    Field,
    Angle,
    Number,
}

impl Kind {
    fn units(self) -> &'static [(&'static str, f64)] {
        match self {
            Kind::Wavenumber => &[("/m", 1.0), ("/um", 1e6), ("/nm", 1e9)],
            Kind::Length => &[("m", 1.0), ("mm", 1e-3), ("um", 1e-6), ("nm", 1e-9)],
            Kind::Time => &[("s", 1.0), ("ms", 1e-3), ("us", 1e-6), ("ns", 1e-9)],
            Kind::Mass => &[("kg", 1.0), ("u", ATOMIC_MASS_UNIT)],
            Kind::Energy => &[("J", 1.0)],
            Kind::Field => &[("T", 1.0), ("G", GAUSS)],
            Kind::Angle => &[("rad", 1.0), ("deg", std::f64::consts::PI / 180.0)],
            Kind::Number => &[],
        }
    }

    fn describe(self) -> String {
        let names: Vec<&str> = self.units().iter().map(|u| u.0).collect();
        format!("one of {}", names.join(", "))
    }
}

struct Entry {
    key: String,
    value: String,
    line: usize,
    used: Cell<bool>,
}

struct Section {
    name: String,
    line: usize,
    entries: Vec<Entry>,
}

impl Section {
    fn get(&self, key: &str) -> Option<&Entry> {
        let e = self.entries.iter().find(|e| e.key == key)?;
        e.used.set(true);
        Some(e)
    }
}

struct Reader {
    origin: Option<PathBuf>,
    diags: Vec<Diagnostic>,
}

impl Reader {
    fn err(&mut self, line: usize, msg: impl Into<String>) {
        self.diags.push(Diagnostic::at(self.origin.clone(), line, msg));
    }

    fn quantity(&mut self, sec: &Section, key: &str, kind: Kind) -> Option<f64> {
        let e = sec.get(key)?;
        let mut parts = e.value.split_whitespace();
        let Some(num) = parts.next() else {
            self.err(e.line, format!("[{}] {key}: missing value", sec.name));
            return None;
        };
        let unit: Vec<&str> = parts.collect();
        let Some(v) = eval_number(num) else {
            self.err(e.line, format!("[{}] {key}: cannot parse number '{num}'", sec.name));
            return None;
        };
        match (kind, unit.as_slice()) {
            (Kind::Number, []) => Some(v),
            (Kind::Number, u) => {
                self.err(e.line, format!("[{}] {key}: dimensionless value takes no unit, found '{}'", sec.name, u.join(" ")));
                None
            }
            (_, []) => {
                self.err(e.line, format!("[{}] {key}: missing unit, expected {}", sec.name, kind.describe()));
                None
            }
            (_, [u]) => match kind.units().iter().find(|(n, _)| n == u) {
                Some((_, f)) => Some(v * f),
                None => {
                    self.err(e.line, format!("[{}] {key}: unit '{u}' does not match, expected {}", sec.name, kind.describe()));
                    None
                }
            },
            (_, u) => {
                self.err(e.line, format!("[{}] {key}: malformed unit '{}'", sec.name, u.join(" ")));
                None
            }
        }
    }

    fn required(&mut self, sec: &Section, key: &str, kind: Kind) -> Option<f64> {
        if sec.get(key).is_none() {
            self.err(sec.line, format!("[{}] missing required key '{key}'", sec.name));
            return None;
        }
        self.quantity(sec, key, kind)
    }

    fn integer(&mut self, sec: &Section, key: &str) -> Option<i64> {
        let e = sec.get(key)?;
        match e.value.trim().parse::<i64>() {
            Ok(v) => Some(v),
            Err(_) => {
                self.err(e.line, format!("[{}] {key}: expected an integer, found '{}'", sec.name, e.value));
                None
            }
        }
    }

    fn count(&mut self, sec: &Section, key: &str, required: bool) -> Option<usize> {
        if required && sec.get(key).is_none() {
            self.err(sec.line, format!("[{}] missing required key '{key}'", sec.name));
            return None;
        }
        let line = sec.get(key).map(|e| e.line)?;
        let v = self.integer(sec, key)?;
        match usize::try_from(v) {
            Ok(n) => Some(n),
            Err(_) => {
                self.err(line, format!("[{}] {key}: must be non-negative, got {v}", sec.name));
                None
            }
        }
    }

    fn text(&mut self, sec: &Section, key: &str) -> Option<String> {
        let e = sec.get(key)?;
        let v = e.value.trim();
        Some(v.strip_prefix('"').and_then(|s| s.strip_suffix('"')).unwrap_or(v).to_string())
    }

    fn boolean(&mut self, sec: &Section, key: &str) -> Option<bool> {
        let e = sec.get(key)?;
        match e.value.trim() {
            "true" => Some(true),
            "false" => Some(false),
            other => {
                self.err(e.line, format!("[{}] {key}: expected true or false, found '{other}'", sec.name));
                None
            }
        }
    }

    fn finish(&mut self, sec: &Section) {
        for e in &sec.entries {
            if !e.used.get() {
                self.err(e.line, format!("[{}] unknown key '{}'", sec.name, e.key));
            }
        }
    }
}

/// Evaluates a product/quotient of decimal numbers and `pi`.
fn eval_number(s: &str) -> Option<f64> {
    let mut acc = None;
    let mut op = '*';
    let mut rest = s;
    loop {
        let end = rest.find(['*', '/']).unwrap_or(rest.len());
        let tok = &rest[..end];
        let v = match tok {
            "pi" => std::f64::consts::PI,
            _ => tok.parse::<f64>().ok()?,
        };
        acc = Some(match (acc, op) {
            (None, _) => v,
            (Some(a), '*') => a * v,
            (Some(a), _) => a / v,
        });
        if end == rest.len() {
            break;
        }
        op = rest.as_bytes()[end] as char;
        rest = &rest[end + 1..];
    }
    acc.filter(|v: &f64| v.is_finite())
}

fn strip_comment(line: &str) -> &str {
    let mut quoted = false;
    for (i, c) in line.char_indices() {
        match c {
            '"' => quoted = !quoted,
            '#' if !quoted => return &line[..i],
            _ => {}
        }
    }
    line
}

fn lex(text: &str, r: &mut Reader) -> Vec<Section> {
    let mut sections: Vec<Section> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let l = strip_comment(raw).trim();
        if l.is_empty() {
            continue;
        }
        if let Some(name) = l.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            let name = name.trim().to_string();
            if sections.iter().any(|s| s.name == name) {
                r.err(line, format!("duplicate section [{name}]"));
            }
            sections.push(Section { name, line, entries: Vec::new() });
            continue;
        }
        let Some((k, v)) = l.split_once('=') else {
            r.err(line, format!("expected 'key = value', found '{l}'"));
            continue;
        };
        let Some(sec) = sections.last_mut() else {
            r.err(line, "key outside of any section");
            continue;
        };
        let key = k.trim().to_string();
        if sec.entries.iter().any(|e| e.key == key) {
            r.err(line, format!("[{}] duplicate key '{key}'", sec.name));
            continue;
        }
        sec.entries.push(Entry { key, value: v.trim().to_string(), line, used: Cell::new(false) });
    }
    sections
}

fn read_species(r: &mut Reader, sec: Option<&Section>) -> AtomSpecies {
    let mut sp = AtomSpecies::argon_metastable();
    let Some(sec) = sec else { return sp };
    if let Some(v) = r.text(sec, "label") {
        sp.label = v;
    }
    if let Some(v) = r.quantity(sec, "mass", Kind::Mass) {
        sp.mass = v;
    }
    if let Some(v) = r.quantity(sec, "lande_g", Kind::Number) {
        sp.lande_g = v;
    }
    if let Some(v) = r.integer(sec, "magnetic_m") {
        sp.magnetic_m = v as i32;
    }
    if let Some(v) = r.integer(sec, "spin_j") {
        sp.spin_j = v as i32;
    }
    if let Err(m) = sp.check() {
        r.err(sec.line, format!("[species] {m}"));
    }
    r.finish(sec);
    sp
}

fn read_spectrum(r: &mut Reader, sec: &Section) -> Option<MomentumSpectrum> {
    let k0 = r.required(sec, "k0", Kind::Wavenumber);
    let delta_k = r.required(sec, "delta_k", Kind::Wavenumber);
    let n_sigma = r.quantity(sec, "n_sigma", Kind::Number).unwrap_or(MomentumSpectrum::DEFAULT_N_SIGMA);
    let n_quad = r.count(sec, "n_quad", false).unwrap_or(MomentumSpectrum::DEFAULT_N_QUAD);
    r.finish(sec);
    let s = MomentumSpectrum { k0: k0?, delta_k: delta_k?, n_sigma, n_quad };
    if let Err(m) = s.check() {
        r.err(sec.line, format!("[spectrum] {m}"));
    }
    Some(s)
}

fn read_pulse(r: &mut Reader, sec: &Section, species: &AtomSpecies) -> Option<ComovingPulse> {
    let amplitude = r.quantity(sec, "amplitude", Kind::Energy);
    let b_max = r.quantity(sec, "b_max", Kind::Field);
    let amplitude_c = match (amplitude, b_max) {
        (Some(c), None) => Some(c),
        (None, Some(b)) => match pulse_amplitude(species, b) {
            Ok(c) => Some(c),
            Err(e) => {
                r.err(sec.get("b_max").map_or(sec.line, |e| e.line), format!("[{}] b_max: {e}", sec.name));
                None
            }
        },
        (Some(_), Some(_)) => {
            r.err(sec.line, format!("[{}] give either amplitude or b_max, not both", sec.name));
            None
        }
        (None, None) => {
            if sec.get("amplitude").is_none() && sec.get("b_max").is_none() {
                r.err(sec.line, format!("[{}] missing required key 'amplitude' or 'b_max'", sec.name));
            }
            None
        }
    };
    let epsilon = r.required(sec, "epsilon", Kind::Time);
    let tau = r.required(sec, "tau", Kind::Time);
    let tau1 = r.required(sec, "tau1", Kind::Time);
    let lambda_spatial = r.required(sec, "lambda", Kind::Length);
    let delta_offset = r.quantity(sec, "delta", Kind::Angle).unwrap_or(std::f64::consts::PI / 10.0);
    let t_start = r.quantity(sec, "t_start", Kind::Time).unwrap_or(0.0);
    r.finish(sec);
    let p = ComovingPulse {
        amplitude_c: amplitude_c?,
        epsilon: epsilon?,
        tau: tau?,
        tau1: tau1?,
        lambda_spatial: lambda_spatial?,
        delta_offset,
        t_start,
    };
    if let Err(m) = p.check() {
        let key = ["epsilon", "tau1", "tau", "lambda", "delta", "amplitude", "b_max"]
            .into_iter()
            .find(|k| m.contains(&format!(" {k} ")))
            .and_then(|k| sec.get(k))
            .map_or(sec.line, |e| e.line);
        r.err(key, format!("[{}] {m}", sec.name));
    }
    Some(p)
}

fn read_grids(r: &mut Reader, sec: &Section) -> (Option<SpaceTimeGrid>, Option<SpaceTimeGrid>) {
    let x_min = r.required(sec, "x_min", Kind::Length);
    let x_max = r.required(sec, "x_max", Kind::Length);
    let nx = r.count(sec, "nx", true);
    let t_min = r.required(sec, "t_min", Kind::Time);
    let t_max = r.required(sec, "t_max", Kind::Time);
    let nt = r.count(sec, "nt", true);
    let nxm = r.quantity(sec, "neg_x_min", Kind::Length);
    let nxx = r.quantity(sec, "neg_x_max", Kind::Length);
    let nnx = r.count(sec, "neg_nx", false);
    r.finish(sec);
    let pos = match (x_min, x_max, nx, t_min, t_max, nt) {
        (Some(a), Some(b), Some(n), Some(c), Some(d), Some(m)) => {
            Some(SpaceTimeGrid { x_min: a, x_max: b, nx: n, t_min: c, t_max: d, nt: m })
        }
        _ => None,
    };
    let neg = match (nxm, nxx, nnx, pos) {
        (None, None, None, _) => None,
        (Some(a), Some(b), Some(n), Some(p)) => Some(SpaceTimeGrid { x_min: a, x_max: b, nx: n, ..p }),
        (_, _, _, None) => None,
        _ => {
            r.err(sec.line, "[grid] neg_x_min, neg_x_max and neg_nx must be given together");
            None
        }
    };
    (pos, neg)
}

fn read_output(r: &mut Reader, sec: &Section) -> Option<OutputConfig> {
    let name = r.text(sec, "name");
    if name.is_none() {
        r.err(sec.line, "[output] missing required key 'name'");
    }
    let mut fields = Vec::new();
    if let Some(e) = sec.get("fields") {
        for f in e.value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match FieldKind::from_name(f) {
                Some(k) if !fields.contains(&k) => fields.push(k),
                Some(_) => r.err(e.line, format!("[output] fields: '{f}' listed twice")),
                None => r.err(e.line, format!("[output] fields: unknown field '{f}' (psi0, psi, freespace, echo)")),
            }
        }
    } else {
        fields = vec![FieldKind::Psi0, FieldKind::Psi];
    }
    let directory = r.text(sec, "dir").map(PathBuf::from);
    r.finish(sec);
    Some(OutputConfig { name: name?, fields, directory })
}

fn read_analysis(r: &mut Reader, sec: Option<&Section>) -> AnalysisConfig {
    let mut a = AnalysisConfig::default();
    let Some(sec) = sec else { return a };
    if let Some(v) = r.quantity(sec, "revival_threshold", Kind::Number) {
        a.revival_threshold = v;
    }
    a.revival_after = r.quantity(sec, "revival_after", Kind::Time);
    a.echo_x = r.quantity(sec, "echo_x", Kind::Length);
    r.finish(sec);
    a
}

fn read_oracle(r: &mut Reader, sec: &Section) -> Option<OracleSettings> {
    let x_min = r.required(sec, "x_min", Kind::Length);
    let x_max = r.required(sec, "x_max", Kind::Length);
    let nx = r.count(sec, "nx", true);
    let dt = r.required(sec, "dt", Kind::Time);
    let t_start = r.required(sec, "t_start", Kind::Time);
    let o = OracleSettings {
        x_min: x_min?,
        x_max: x_max?,
        nx: nx?,
        dt: dt?,
        t_start: t_start?,
        absorbing_margin: r
            .quantity(sec, "absorbing_margin", Kind::Number)
            .unwrap_or(OracleSettings::DEFAULT_ABSORBING_MARGIN),
        absorber_strength: r
            .quantity(sec, "absorber_strength", Kind::Number)
            .unwrap_or(OracleSettings::DEFAULT_ABSORBER_STRENGTH),
        restrict_pulse: r.boolean(sec, "restrict_pulse").unwrap_or(true),
        dt_safety: r.quantity(sec, "dt_safety", Kind::Number).unwrap_or(OracleSettings::DEFAULT_DT_SAFETY),
    };
    r.finish(sec);
    Some(o)
}

/// Parses scenario text and checks every invariant, collecting all problems.
pub fn validate_text(text: &str, origin: Option<&Path>) -> (Option<Scenario>, Vec<Diagnostic>) {
    let mut r = Reader { origin: origin.map(Path::to_path_buf), diags: Vec::new() };
    let sections = lex(text, &mut r);
    let mut by_name: BTreeMap<&str, &Section> = BTreeMap::new();
    let mut pulses: Vec<(u32, &Section)> = Vec::new();
    for s in &sections {
        match s.name.as_str() {
            "species" | "spectrum" | "barrier" | "grid" | "output" | "analysis" | "oracle" => {
                by_name.entry(s.name.as_str()).or_insert(s);
            }
            n => match n.strip_prefix("pulse.").and_then(|i| i.parse::<u32>().ok()) {
                Some(i) => pulses.push((i, s)),
                None => r.err(s.line, format!("unknown section [{n}]")),
            },
        }
    }
    pulses.sort_by_key(|p| p.0);

    let species = read_species(&mut r, by_name.get("species").copied());
    let need = |r: &mut Reader, name: &str| {
        let s = by_name.get(name).copied();
        if s.is_none() {
            r.diags.push(Diagnostic { origin: r.origin.clone(), line: None, message: format!("missing section [{name}]") });
        }
        s
    };
    let spectrum = need(&mut r, "spectrum").and_then(|s| read_spectrum(&mut r, s));
    let barrier = need(&mut r, "barrier").and_then(|s| {
        let a = r.required(s, "a", Kind::Wavenumber);
        r.finish(s);
        a.map(|a| Barrier { a })
    });
    let (grid_positive, grid_negative) = match need(&mut r, "grid") {
        Some(s) => read_grids(&mut r, s),
        None => (None, None),
    };
    let output = need(&mut r, "output").and_then(|s| read_output(&mut r, s));
    let analysis = read_analysis(&mut r, by_name.get("analysis").copied());
    let oracle = by_name.get("oracle").and_then(|s| read_oracle(&mut r, s));
    let pulse_list: Vec<Option<ComovingPulse>> = pulses.iter().map(|(_, s)| read_pulse(&mut r, s, &species)).collect();
    for w in 0..pulses.len().saturating_sub(1) {
        if let (Some(a), Some(b)) = (pulse_list[w], pulse_list[w + 1]) {
            if b.t_start < a.t_end() {
                let (ia, sa) = pulses[w];
                let (ib, sb) = pulses[w + 1];
                r.err(
                    sb.line,
                    format!(
                        "[pulse.{ib}] overlaps or precedes [pulse.{ia}] (line {}): starts at {:e} s before the earlier pulse ends at {:e} s",
                        sa.line,
                        b.t_start,
                        a.t_end()
                    ),
                );
            }
        }
    }

    let (Some(spectrum), Some(barrier), Some(grid_positive), Some(output)) = (spectrum, barrier, grid_positive, output) else {
        return (None, r.diags);
    };
    if pulse_list.iter().any(Option::is_none) {
        return (None, r.diags);
    }
    let scenario = Scenario {
        species,
        spectrum,
        barrier,
        pulses: pulse_list.into_iter().flatten().collect(),
        grid_positive,
        grid_negative,
        units_mode: UnitsMode::Si,
        output,
        analysis,
        oracle,
    };
    // Invariants already reported with line numbers are not repeated.
    let reported: Vec<String> = r.diags.iter().map(|d| d.message.clone()).collect();
    for d in scenario.diagnostics() {
        let dup = reported.iter().any(|m| m.ends_with(&d.message)) || d.message.starts_with("pulses overlap");
        if !dup {
            r.diags.push(Diagnostic { origin: r.origin.clone(), ..d });
        }
    }
    (Some(scenario), r.diags)
}

/// Parses scenario text; any diagnostic makes this an error.
pub fn parse_scenario(text: &str, origin: Option<&Path>) -> Result<Scenario> {
    match validate_text(text, origin) {
        (Some(s), d) if d.is_empty() => Ok(s),
        (_, d) => Err(Error::Scenario(d)),
    }
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_scenario(&text, Some(path))
}

/// All invariant violations in a scenario file; fails only if it cannot be read.
pub fn validate_scenario(path: &Path) -> Result<Vec<Diagnostic>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(validate_text(&text, Some(path)).1)
}

/// Scenario text with comments, blank lines and insignificant whitespace removed.
pub fn canonical_text(text: &str) -> String {
    let mut out = String::new();
    for raw in text.lines() {
        let l = strip_comment(raw).trim();
        if l.is_empty() {
            continue;
        }
        let l = match l.split_once('=') {
            Some((k, v)) => format!("{} = {}", k.trim(), v.split_whitespace().collect::<Vec<_>>().join(" ")),
            None => l.split_whitespace().collect::<Vec<_>>().join(""),
        };
        out.push_str(&l);
        out.push('\n');
    }
    out
}
