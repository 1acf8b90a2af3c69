//! Line-oriented sequence language (`.nvs` files).
//!
//! ```text
//! # P(|11>) readout
//! init ideal
//! u180e
//! delay tau
//! u180e
//! cleanup V
//! laser 5us
//! measure fluor
//! sweep tau 0us 10us 101
//! ```
//!
//! One directive per line, `#` starts a comment. Directives are
//! case-insensitive. Times need the `us` suffix and Rabi frequencies the
//! `MHz` suffix. The parser reports every problem it finds, each with a
//! 1-based line and column.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::engine::{
    linspace, CleanupKind, DelayTime, InitKind, Mode, Observable, PulseElement, Sequence,
    ShotNoise, SimOptions, Transition,
};

#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseDiagnostic {
    pub line: usize,
    pub column: usize,
    pub message: String,
    pub token: String,
}

impl fmt::Display for ParseDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.column, self.message)?;
        if !self.token.is_empty() {
            write!(f, " (at `{}`)", self.token)?;
        }
        Ok(())
    }
}

impl fmt::Debug for ParseDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub start_us: f64,
    pub stop_us: f64,
    pub points: usize,
}

impl SweepSpec {
    pub fn taus(&self) -> Vec<f64> {
        linspace(self.start_us, self.stop_us, self.points)
    }
}

/// A parsed source file: the sequence plus the optional run settings.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Program {
    pub sequence: Sequence,
    pub init: Option<InitKind>,
    pub measure: Option<Observable>,
    pub sweep: Option<SweepSpec>,
    pub mode: Option<Mode>,
    pub seed: Option<u64>,
    pub shots: Option<u64>,
}

impl Program {
    /// Options with this file's `mode`, `seed` and `shots` laid over `base`.
    pub fn apply(&self, base: SimOptions) -> SimOptions {
        let mut opts = base;
        if let Some(mode) = self.mode {
            opts.mode = mode;
        }
        if let Some(shots) = self.shots {
            let seed = self.seed.or(opts.shot_noise.map(|n| n.seed)).unwrap_or(0);
            opts.shot_noise = Some(ShotNoise { shots, seed });
        } else if let (Some(seed), Some(noise)) = (self.seed, opts.shot_noise.as_mut()) {
            noise.seed = seed;
        }
        opts
    }
}

impl FromStr for Program {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        parse(s).map_err(crate::Error::Parse)
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&serialize(self))
    }
}

struct Token<'a> {
    text: &'a str,
    column: usize,
}

fn tokenize(line: &str) -> Vec<Token<'_>> {
    let mut out = Vec::new();
    let mut start: Option<(usize, usize)> = None;
    for (col, (byte, ch)) in line.char_indices().enumerate() {
        if ch.is_whitespace() {
            if let Some((b, c)) = start.take() {
                out.push(Token { text: &line[b..byte], column: c + 1 });
            }
        } else if start.is_none() {
            start = Some((byte, col));
        }
    }
    if let Some((b, c)) = start {
        out.push(Token { text: &line[b..], column: c + 1 });
    }
    out
}

struct Parser {
    line: usize,
    diagnostics: Vec<ParseDiagnostic>,
}

impl Parser {
    fn error(&mut self, tok: &Token<'_>, message: impl Into<String>) {
        self.diagnostics.push(ParseDiagnostic {
            line: self.line,
            column: tok.column,
            message: message.into(),
            token: tok.text.to_string(),
        });
    }

    fn number(&mut self, tok: &Token<'_>, text: &str) -> Option<f64> {
        match text.parse::<f64>() {
            Ok(v) if v.is_finite() => Some(v),
            Ok(_) => {
                self.error(tok, "number must be finite");
                None
            }
            Err(_) => {
                self.error(tok, format!("malformed number `{text}`"));
                None
            }
        }
    }

    fn integer(&mut self, tok: &Token<'_>) -> Option<u64> {
        match tok.text.parse::<u64>() {
            Ok(v) => Some(v),
            Err(_) => {
                self.error(tok, "expected a non-negative integer");
                None
            }
        }
    }

    /// `<float>` followed by a case-insensitive unit suffix.
    fn quantity(&mut self, tok: &Token<'_>, text: &str, unit: &str) -> Option<f64> {
        let n = text.len();
        let has_unit = n >= unit.len()
            && text.is_char_boundary(n - unit.len())
            && text[n - unit.len()..].eq_ignore_ascii_case(unit);
        if !has_unit {
            if text.parse::<f64>().is_ok() {
                self.error(tok, format!("missing `{unit}` unit suffix"));
            } else {
                self.error(tok, format!("expected a number with `{unit}` suffix"));
            }
            return None;
        }
        self.number(tok, &text[..n - unit.len()])
    }

    fn time(&mut self, tok: &Token<'_>) -> Option<f64> {
        let t = self.quantity(tok, tok.text, "us")?;
        if t < 0.0 {
            self.error(tok, "time must be non-negative");
            return None;
        }
        Some(t)
    }

    /// Checks the argument count; reports missing or surplus tokens.
    fn arity(&mut self, toks: &[Token<'_>], want: usize, usage: &str) -> bool {
        if toks.len() - 1 < want {
            let last = &toks[toks.len() - 1];
            self.diagnostics.push(ParseDiagnostic {
                line: self.line,
                column: last.column + last.text.chars().count(),
                message: format!("missing argument; usage: {usage}"),
                token: String::new(),
            });
            return false;
        }
        for extra in &toks[want + 1..] {
            self.error(extra, format!("unexpected token; usage: {usage}"));
        }
        true
    }
}

fn set_once<T>(p: &mut Parser, slot: &mut Option<(T, usize)>, value: T, tok: &Token<'_>) {
    if let Some((_, first)) = slot {
        let first = *first;
        p.error(tok, format!("duplicate `{}` directive (first on line {first})", tok.text.to_lowercase()));
    } else {
        *slot = Some((value, p.line));
    }
}

fn parse_mw(p: &mut Parser, toks: &[Token<'_>]) -> Option<PulseElement> {
    let usage = "mw t=0,-1|0,+1 amp=<float>MHz ang=<float> ph=<float>";
    let mut transition = None;
    let mut amp = None;
    let mut ang = None;
    let mut ph = None;
    let mut ok = true;
    for tok in &toks[1..] {
        let Some((key, value)) = tok.text.split_once('=') else {
            p.error(tok, format!("expected key=value; usage: {usage}"));
            ok = false;
            continue;
        };
        let key = key.to_ascii_lowercase();
        let seen = match key.as_str() {
            "t" => transition.is_some(),
            "amp" => amp.is_some(),
            "ang" => ang.is_some(),
            "ph" => ph.is_some(),
            _ => {
                p.error(tok, format!("unknown pulse field `{key}`"));
                ok = false;
                continue;
            }
        };
        if seen {
            p.error(tok, format!("duplicate pulse field `{key}`"));
            ok = false;
            continue;
        }
        match key.as_str() {
            "t" => match Transition::from_label(value) {
                Some(t) => transition = Some(t),
                None => {
                    p.error(tok, format!("unknown transition `{value}` (expected 0,-1 or 0,+1)"));
                    ok = false;
                }
            },
            "amp" => match p.quantity(tok, value, "MHz") {
                Some(v) if v > 0.0 => amp = Some(v),
                Some(_) => {
                    p.error(tok, "Rabi frequency must be positive");
                    ok = false;
                }
                None => ok = false,
            },
            "ang" => match p.number(tok, value) {
                Some(v) => ang = Some(v),
                None => ok = false,
            },
            _ => match p.number(tok, value) {
                Some(v) => ph = Some(v),
                None => ok = false,
            },
        }
    }
    let head = &toks[0];
    for (name, missing) in [
        ("t", transition.is_none()),
        ("amp", amp.is_none()),
        ("ang", ang.is_none()),
        ("ph", ph.is_none()),
    ] {
        // Fields that failed to parse already have a diagnostic.
        let mentioned = toks[1..].iter().any(|t| {
            t.text.split_once('=').is_some_and(|(k, _)| k.eq_ignore_ascii_case(name))
        });
        if missing && !mentioned {
            p.error(head, format!("missing pulse field `{name}`; usage: {usage}"));
            ok = false;
        }
    }
    if !ok {
        return None;
    }
    Some(PulseElement::MwPulse {
        transition: transition?,
        rabi_mhz: amp?,
        phase_deg: ph?,
        angle_deg: ang?,
    })
}

/// Parses UTF-8 source. Either a complete program or every diagnostic found.
pub fn parse(src: &str) -> Result<Program, Vec<ParseDiagnostic>> {
    let mut p = Parser { line: 0, diagnostics: Vec::new() };
    let mut elements = Vec::new();
    let mut init = None;
    let mut measure = None;
    let mut sweep: Option<(SweepSpec, usize)> = None;
    let mut mode = None;
    let mut seed = None;
    let mut shots = None;
    let mut tau_lines: Vec<(usize, usize)> = Vec::new();

    for (n, raw) in src.split('\n').enumerate() {
        p.line = n + 1;
        let raw = raw.strip_suffix('\r').unwrap_or(raw);
        let code = raw.split('#').next().unwrap_or("");
        let toks = tokenize(code);
        let Some(head) = toks.first() else { continue };
        let directive = head.text.to_lowercase();
        match directive.as_str() {
            "init" => {
                if p.arity(&toks, 1, "init ideal|paper") {
                    let kind = match toks[1].text.to_lowercase().as_str() {
                        "ideal" => Some(InitKind::Ideal),
                        "paper" => Some(InitKind::Paper),
                        _ => {
                            p.error(&toks[1], "expected `ideal` or `paper`");
                            None
                        }
                    };
                    if let Some(k) = kind {
                        set_once(&mut p, &mut init, k, head);
                    }
                }
            }
            "delay" => {
                if p.arity(&toks, 1, "delay <float>us | delay tau") {
                    if toks[1].text.eq_ignore_ascii_case("tau") {
                        tau_lines.push((p.line, toks[1].column));
                        elements.push(PulseElement::Delay(DelayTime::Tau));
                    } else if let Some(t) = p.time(&toks[1]) {
                        elements.push(PulseElement::delay(t));
                    }
                }
            }
            "mw" => {
                if toks.len() == 1 {
                    p.arity(&toks, 4, "mw t=0,-1|0,+1 amp=<float>MHz ang=<float> ph=<float>");
                } else if let Some(e) = parse_mw(&mut p, &toks) {
                    elements.push(e);
                }
            }
            "u180e" => {
                p.arity(&toks, 0, "u180e");
                elements.push(PulseElement::U180e);
            }
            "swap" => {
                p.arity(&toks, 0, "swap");
                elements.push(PulseElement::SwapEn);
            }
            "cleanup" => {
                if p.arity(&toks, 1, "cleanup U|V") {
                    match toks[1].text {
                        "U" | "u" => elements.push(PulseElement::Cleanup(CleanupKind::U)),
                        "V" | "v" => elements.push(PulseElement::Cleanup(CleanupKind::V)),
                        _ => p.error(&toks[1], "expected `U` or `V`"),
                    }
                }
            }
            "laser" => {
                if p.arity(&toks, 1, "laser <float>us") {
                    if let Some(t) = p.time(&toks[1]) {
                        elements.push(PulseElement::Laser { duration_us: t });
                    }
                }
            }
            "measure" => {
                if p.arity(&toks, 1, "measure fluor|populations|tomo") {
                    match toks[1].text.to_lowercase().as_str() {
                        "fluor" => set_once(&mut p, &mut measure, Observable::Fluorescence, head),
                        "populations" => set_once(&mut p, &mut measure, Observable::Populations, head),
                        "tomo" => set_once(&mut p, &mut measure, Observable::Tomography, head),
                        _ => p.error(&toks[1], "expected `fluor`, `populations` or `tomo`"),
                    }
                }
            }
            "sweep" => {
                let usage = "sweep tau <start>us <stop>us <points>";
                if p.arity(&toks, 4, usage) {
                    let var_ok = toks[1].text.eq_ignore_ascii_case("tau");
                    if !var_ok {
                        p.error(&toks[1], "only `tau` can be swept");
                    }
                    let start = p.time(&toks[2]);
                    let stop = p.time(&toks[3]);
                    let points = match p.integer(&toks[4]) {
                        Some(0) => {
                            p.error(&toks[4], "sweep needs at least one point");
                            None
                        }
                        Some(k) => usize::try_from(k).ok(),
                        None => None,
                    };
                    if let (true, Some(start_us), Some(stop_us), Some(points)) = (var_ok, start, stop, points) {
                        set_once(&mut p, &mut sweep, SweepSpec { start_us, stop_us, points }, head);
                    }
                }
            }
            "mode" => {
                if p.arity(&toks, 1, "mode ideal|full") {
                    match toks[1].text.to_lowercase().as_str() {
                        "ideal" => set_once(&mut p, &mut mode, Mode::Ideal, head),
                        "full" => set_once(&mut p, &mut mode, Mode::Full, head),
                        _ => p.error(&toks[1], "expected `ideal` or `full`"),
                    }
                }
            }
            "seed" => {
                if p.arity(&toks, 1, "seed <int>") {
                    if let Some(v) = p.integer(&toks[1]) {
                        set_once(&mut p, &mut seed, v, head);
                    }
                }
            }
            "shots" => {
                if p.arity(&toks, 1, "shots <int>") {
                    match p.integer(&toks[1]) {
                        Some(0) => p.error(&toks[1], "shot count must be positive"),
                        Some(v) => set_once(&mut p, &mut shots, v, head),
                        None => {}
                    }
                }
            }
            _ => p.error(head, format!("unknown directive `{}`", head.text)),
        }
    }

    for &(line, column) in tau_lines.iter().skip(1) {
        p.diagnostics.push(ParseDiagnostic {
            line,
            column,
            message: format!("only one `delay tau` is allowed (first on line {})", tau_lines[0].0),
            token: "tau".into(),
        });
    }
    match (&sweep, tau_lines.first()) {
        (Some((_, line)), None) => p.diagnostics.push(ParseDiagnostic {
            line: *line,
            column: 1,
            message: "sweep given but the sequence has no `delay tau`".into(),
            token: "sweep".into(),
        }),
        (None, Some(&(line, column))) => p.diagnostics.push(ParseDiagnostic {
            line,
            column,
            message: "`delay tau` needs a `sweep tau` directive".into(),
            token: "tau".into(),
        }),
        _ => {}
    }

    if !p.diagnostics.is_empty() {
        p.diagnostics.sort_by_key(|d| (d.line, d.column));
        return Err(p.diagnostics);
    }
    Ok(Program {
        sequence: Sequence::new("", elements),
        init: init.map(|(v, _)| v),
        measure: measure.map(|(v, _)| v),
        sweep: sweep.map(|(v, _)| v),
        mode: mode.map(|(v, _)| v),
        seed: seed.map(|(v, _)| v),
        shots: shots.map(|(v, _)| v),
    })
}

/// Like [`parse`], reporting invalid UTF-8 as a diagnostic.
pub fn parse_bytes(bytes: &[u8]) -> Result<Program, Vec<ParseDiagnostic>> {
    match std::str::from_utf8(bytes) {
        Ok(src) => parse(src),
        Err(e) => {
            let valid = std::str::from_utf8(&bytes[..e.valid_up_to()]).unwrap_or_default();
            let line = valid.matches('\n').count() + 1;
            let column = valid.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
            Err(vec![ParseDiagnostic {
                line,
                column,
                message: "invalid UTF-8".into(),
                token: String::new(),
            }])
        }
    }
}

/// Rounds to six significant digits and prints the shortest exact form.
pub fn format_number(v: f64) -> String {
    let q: f64 = format!("{v:.5e}").parse().unwrap_or(v);
    if q == 0.0 {
        "0".into()
    } else {
        format!("{q}")
    }
}

fn element_line(e: &PulseElement) -> String {
    match e {
        PulseElement::Delay(DelayTime::Fixed(t)) => format!("delay {}us", format_number(*t)),
        PulseElement::Delay(DelayTime::Tau) => "delay tau".into(),
        PulseElement::MwPulse { transition, rabi_mhz, phase_deg, angle_deg } => format!(
            "mw t={} amp={}MHz ang={} ph={}",
            transition.label(),
            format_number(*rabi_mhz),
            format_number(*angle_deg),
            format_number(*phase_deg)
        ),
        PulseElement::Laser { duration_us } => format!("laser {}us", format_number(*duration_us)),
        PulseElement::SwapEn => "swap".into(),
        PulseElement::Cleanup(CleanupKind::U) => "cleanup U".into(),
        PulseElement::Cleanup(CleanupKind::V) => "cleanup V".into(),
        PulseElement::U180e => "u180e".into(),
    }
}

/// Canonical source text. LF line endings, settings first, then the
/// sequence, then measurement and sweep.
pub fn serialize(program: &Program) -> String {
    let mut lines = Vec::new();
    if let Some(init) = program.init {
        lines.push(format!("init {}", match init {
            InitKind::Ideal => "ideal",
            InitKind::Paper => "paper",
        }));
    }
    if let Some(mode) = program.mode {
        lines.push(format!("mode {mode}"));
    }
    if let Some(seed) = program.seed {
        lines.push(format!("seed {seed}"));
    }
    if let Some(shots) = program.shots {
        lines.push(format!("shots {shots}"));
    }
    lines.extend(program.sequence.elements.iter().map(element_line));
    if let Some(m) = program.measure {
        lines.push(format!("measure {}", m.keyword()));
    }
    if let Some(s) = program.sweep {
        lines.push(format!(
            "sweep tau {}us {}us {}",
            format_number(s.start_us),
            format_number(s.stop_us),
            s.points
        ));
    }
    let mut out = lines.join("\n");
    out.push('\n');
    out
}
