//! Scenario DSL: a line-oriented, timestamped event timeline (objects,
//! distances, taps, lighting) compiled into the environment signals the
//! peripherals sample.
//!
//! Grammar (one event per line, `#` comments, whitespace-separated):
//!
//! ```text
//! battery <volts>          # header: initial terminal voltage
//! seed <u64>               # header: detector RNG seed (CLI can override)
//! at <s> object <name|id> score=<0..1> prob=<0..1>
//! at <s> clear
//! at <s> distance <mm>
//! at <s> distance ramp <from_mm> <to_mm> over <s>
//! at <s> tap
//! at <s> light <multiplier>
//! at <s> end
//! ```
//!
//! Parsing collects every error with line and column instead of stopping at
//! the first.

use std::fmt;

use crate::kernel::{Tick, TICKS_PER_SEC};
use crate::peripherals::{object_id, object_name};

pub const DEFAULT_BATTERY_V: f64 = 12.89;
pub const DEFAULT_DISTANCE_MM: f64 = 255.0;
const MIN_BATTERY_V: f64 = 9.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EventKind {
    Object { id: u8, score: f64, prob: f64 },
    Clear,
    DistanceSet(f64),
    DistanceRamp { from_mm: f64, to_mm: f64, over_s: f64 },
    Tap,
    Light(f64),
    End,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioEvent {
    pub at_s: f64,
    pub kind: EventKind,
}

impl ScenarioEvent {
    pub fn at_tick(&self) -> Tick {
        seconds_to_tick(self.at_s)
    }
}

pub fn seconds_to_tick(s: f64) -> Tick {
    (s * TICKS_PER_SEC as f64).round() as Tick
}

/// A parsed, immutable timeline.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    /// Events stably sorted by time.
    pub events: Vec<ScenarioEvent>,
    pub duration_s: f64,
    pub initial_battery_v: f64,
    pub seed: Option<u64>,
}

impl Scenario {
    pub fn duration_ticks(&self) -> Tick {
        seconds_to_tick(self.duration_s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (line {}, col {})", self.message, self.line, self.col)
    }
}

impl std::error::Error for ParseError {}

/// Environment signals at one instant, derived by folding the timeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvState {
    pub visible_object: Option<u8>,
    pub object_score: f64,
    /// Object probability × lighting multiplier, clamped to [0, 1].
    pub detect_prob: f64,
    pub true_distance_mm: f64,
    /// True only at the tick containing a tap event.
    pub tap_pending: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvQueryError {
    pub t_s: f64,
    pub duration_s: f64,
}

impl fmt::Display for EnvQueryError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "query time {} s outside scenario [0, {}] s",
            self.t_s, self.duration_s
        )
    }
}

impl std::error::Error for EnvQueryError {}

fn tokenize(line: &str) -> Vec<(usize, &str)> {
    let mut tokens = Vec::new();
    let mut start = None;
    for (i, ch) in line.char_indices() {
        if ch.is_whitespace() {
            if let Some(s) = start.take() {
                tokens.push((s + 1, &line[s..i]));
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        tokens.push((s + 1, &line[s..]));
    }
    tokens
}

struct LineParser<'a> {
    line_no: usize,
    tokens: Vec<(usize, &'a str)>,
    pos: usize,
    errors: &'a mut Vec<ParseError>,
}

impl<'a> LineParser<'a> {
    fn error_at(&mut self, col: usize, message: String) {
        self.errors.push(ParseError {
            line: self.line_no,
            col,
            message,
        });
    }

    fn next(&mut self, what: &str) -> Option<(usize, &'a str)> {
        match self.tokens.get(self.pos) {
            Some(&tok) => {
                self.pos += 1;
                Some(tok)
            }
            None => {
                let col = self
                    .tokens
                    .last()
                    .map(|(c, t)| c + t.len())
                    .unwrap_or(1);
                self.error_at(col, format!("expected {what}"));
                None
            }
        }
    }

    fn f64(&mut self, what: &str) -> Option<(usize, f64)> {
        let (col, tok) = self.next(what)?;
        match tok.parse::<f64>() {
            Ok(v) if v.is_finite() => Some((col, v)),
            _ => {
                self.error_at(col, format!("invalid {what} {tok:?}"));
                None
            }
        }
    }

    fn finish(&mut self) {
        if let Some(&(col, tok)) = self.tokens.get(self.pos) {
            self.error_at(col, format!("unexpected trailing token {tok:?}"));
        }
    }
}

/// Parse scenario text, collecting all diagnostics.
pub fn parse_scenario(text: &str) -> Result<Scenario, Vec<ParseError>> {
    let mut errors = Vec::new();
    // (line, event) so ordering checks can point at the offending line.
    let mut events: Vec<(usize, ScenarioEvent)> = Vec::new();
    let mut battery_v = DEFAULT_BATTERY_V;
    let mut seed = None;

    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw_line.find('#') {
            Some(cut) => &raw_line[..cut],
            None => raw_line,
        };
        let tokens = tokenize(line);
        if tokens.is_empty() {
            continue;
        }
        let mut p = LineParser {
            line_no,
            tokens,
            pos: 0,
            errors: &mut errors,
        };
        let (kw_col, keyword) = p.next("keyword").expect("nonempty line");
        match keyword {
            "battery" => {
                if let Some((col, v)) = p.f64("battery voltage") {
                    if v > MIN_BATTERY_V && v <= DEFAULT_BATTERY_V {
                        battery_v = v;
                    } else {
                        p.error_at(
                            col,
                            format!(
                                "battery voltage {v} outside ({MIN_BATTERY_V}, {DEFAULT_BATTERY_V}]"
                            ),
                        );
                    }
                }
                p.finish();
            }
            "seed" => {
                if let Some((col, tok)) = p.next("seed value") {
                    match tok.parse::<u64>() {
                        Ok(v) => seed = Some(v),
                        Err(_) => p.error_at(col, format!("invalid seed {tok:?}")),
                    }
                }
                p.finish();
            }
            "at" => {
                let at = match p.f64("event time") {
                    Some((col, v)) if v >= 0.0 => Some((col, v)),
                    Some((col, v)) => {
                        p.error_at(col, format!("negative event time {v}"));
                        None
                    }
                    None => None,
                };
                let kind = parse_event_kind(&mut p);
                if let (Some((_, at_s)), Some(kind)) = (at, kind) {
                    p.finish();
                    events.push((line_no, ScenarioEvent { at_s, kind }));
                }
            }
            other => {
                p.error_at(kw_col, format!("unknown keyword {other:?}"));
            }
        }
    }

    // Stable by-time ordering preserves file order among equal timestamps.
    events.sort_by(|a, b| a.1.at_s.partial_cmp(&b.1.at_s).expect("finite times"));

    let mut end_line = None;
    let mut duration = events.last().map(|(_, e)| e.at_s).unwrap_or(0.0);
    for (line, event) in &events {
        if event.kind == EventKind::End {
            if end_line.is_some() {
                errors.push(ParseError {
                    line: *line,
                    col: 1,
                    message: "duplicate end event".into(),
                });
            }
            end_line = Some((*line, event.at_s));
        }
    }
    if let Some((line, end_at)) = end_line {
        if events.iter().any(|(_, e)| e.at_s > end_at) {
            errors.push(ParseError {
                line,
                col: 1,
                message: "unsorted end: events occur after it".into(),
            });
        }
        duration = end_at;
    }

    if errors.is_empty() {
        Ok(Scenario {
            events: events.into_iter().map(|(_, e)| e).collect(),
            duration_s: duration,
            initial_battery_v: battery_v,
            seed,
        })
    } else {
        Err(errors)
    }
}

fn parse_event_kind(p: &mut LineParser<'_>) -> Option<EventKind> {
    let (kind_col, kind) = p.next("event kind")?;
    match kind {
        "object" => {
            let (obj_col, obj_tok) = p.next("object name or id")?;
            let id = match obj_tok.parse::<u8>() {
                Ok(n) if (1..=6).contains(&n) => Some(n),
                Ok(n) => {
                    p.error_at(obj_col, format!("object id {n} outside 1..6"));
                    None
                }
                Err(_) => match object_id(obj_tok) {
                    Some(n) => Some(n),
                    None => {
                        p.error_at(obj_col, format!("unknown object '{obj_tok}'"));
                        None
                    }
                },
            };
            let mut score = 1.0;
            let mut prob = 1.0;
            while let Some(&(col, tok)) = p.tokens.get(p.pos) {
                p.pos += 1;
                match tok.split_once('=') {
                    Some(("score", v)) => match parse_unit_interval(v) {
                        Some(x) => score = x,
                        None => p.error_at(col, format!("score {v:?} outside [0, 1]")),
                    },
                    Some(("prob", v)) => match parse_unit_interval(v) {
                        Some(x) => prob = x,
                        None => p.error_at(col, format!("prob {v:?} outside [0, 1]")),
                    },
                    _ => p.error_at(col, format!("unexpected trailing token {tok:?}")),
                }
            }
            Some(EventKind::Object {
                id: id?,
                score,
                prob,
            })
        }
        "clear" => Some(EventKind::Clear),
        "distance" => {
            let (first_col, first) = p.next("distance value or 'ramp'")?;
            if first == "ramp" {
                let from = p.f64("ramp start distance")?;
                let to = p.f64("ramp end distance")?;
                let (over_col, over_kw) = p.next("'over'")?;
                if over_kw != "over" {
                    p.error_at(over_col, format!("expected 'over', found {over_kw:?}"));
                    return None;
                }
                let (dur_col, over_s) = p.f64("ramp duration")?;
                if from.1 < 0.0 {
                    p.error_at(from.0, format!("negative distance {}", from.1));
                    return None;
                }
                if to.1 < 0.0 {
                    p.error_at(to.0, format!("negative distance {}", to.1));
                    return None;
                }
                if over_s <= 0.0 {
                    p.error_at(dur_col, format!("ramp duration {over_s} must be positive"));
                    return None;
                }
                Some(EventKind::DistanceRamp {
                    from_mm: from.1,
                    to_mm: to.1,
                    over_s,
                })
            } else {
                match first.parse::<f64>() {
                    Ok(mm) if mm >= 0.0 => Some(EventKind::DistanceSet(mm)),
                    Ok(mm) => {
                        p.error_at(first_col, format!("negative distance {mm}"));
                        None
                    }
                    Err(_) => {
                        p.error_at(first_col, format!("invalid distance {first:?}"));
                        None
                    }
                }
            }
        }
        "tap" => Some(EventKind::Tap),
        "light" => {
            let (col, mult) = p.f64("light multiplier")?;
            if (0.0..=1.0).contains(&mult) {
                Some(EventKind::Light(mult))
            } else {
                p.error_at(col, format!("light multiplier {mult} outside [0, 1]"));
                None
            }
        }
        "end" => Some(EventKind::End),
        other => {
            p.error_at(kind_col, format!("unknown event kind {other:?}"));
            None
        }
    }
}

fn parse_unit_interval(text: &str) -> Option<f64> {
    match text.parse::<f64>() {
        Ok(v) if (0.0..=1.0).contains(&v) => Some(v),
        _ => None,
    }
}

/// Render a scenario back to DSL text. Re-parsing the output yields an
/// identical event list, battery voltage, and seed.
pub fn format_scenario(s: &Scenario) -> String {
    let mut out = String::new();
    out.push_str(&format!("battery {}\n", s.initial_battery_v));
    if let Some(seed) = s.seed {
        out.push_str(&format!("seed {seed}\n"));
    }
    for event in &s.events {
        let at = event.at_s;
        match event.kind {
            EventKind::Object { id, score, prob } => {
                let name = object_name(id).expect("valid object id");
                out.push_str(&format!("at {at} object {name} score={score} prob={prob}\n"));
            }
            EventKind::Clear => out.push_str(&format!("at {at} clear\n")),
            EventKind::DistanceSet(mm) => out.push_str(&format!("at {at} distance {mm}\n")),
            EventKind::DistanceRamp {
                from_mm,
                to_mm,
                over_s,
            } => out.push_str(&format!("at {at} distance ramp {from_mm} {to_mm} over {over_s}\n")),
            EventKind::Tap => out.push_str(&format!("at {at} tap\n")),
            EventKind::Light(mult) => out.push_str(&format!("at {at} light {mult}\n")),
            EventKind::End => out.push_str(&format!("at {at} end\n")),
        }
    }
    out
}

#[derive(Debug, Clone, Copy)]
enum DistanceSpec {
    Fixed(f64),
    Ramp {
        from_mm: f64,
        to_mm: f64,
        start_s: f64,
        over_s: f64,
    },
}

impl DistanceSpec {
    fn value_at(&self, t_s: f64) -> f64 {
        match *self {
            DistanceSpec::Fixed(mm) => mm,
            DistanceSpec::Ramp {
                from_mm,
                to_mm,
                start_s,
                over_s,
            } => {
                if t_s >= start_s + over_s {
                    to_mm
                } else {
                    from_mm + (to_mm - from_mm) * (t_s - start_s) / over_s
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct FoldState {
    object: Option<(u8, f64, f64)>,
    light: f64,
    distance: DistanceSpec,
}

impl Default for FoldState {
    fn default() -> Self {
        Self {
            object: None,
            light: 1.0,
            distance: DistanceSpec::Fixed(DEFAULT_DISTANCE_MM),
        }
    }
}

impl FoldState {
    fn apply(&mut self, event: &ScenarioEvent) {
        match event.kind {
            EventKind::Object { id, score, prob } => self.object = Some((id, score, prob)),
            EventKind::Clear => self.object = None,
            EventKind::DistanceSet(mm) => self.distance = DistanceSpec::Fixed(mm),
            EventKind::DistanceRamp {
                from_mm,
                to_mm,
                over_s,
            } => {
                self.distance = DistanceSpec::Ramp {
                    from_mm,
                    to_mm,
                    start_s: event.at_s,
                    over_s,
                }
            }
            EventKind::Light(mult) => self.light = mult,
            EventKind::Tap | EventKind::End => {}
        }
    }

    fn snapshot(&self, t_s: f64, tap_pending: bool) -> EnvState {
        let (visible_object, object_score, detect_prob) = match self.object {
            Some((id, score, prob)) => (Some(id), score, (prob * self.light).clamp(0.0, 1.0)),
            None => (None, 0.0, 0.0),
        };
        EnvState {
            visible_object,
            object_score,
            detect_prob,
            true_distance_mm: self.distance.value_at(t_s),
            tap_pending,
        }
    }
}

/// Environment at time `t_s`, folding every event with `at ≤ t`.
/// Pure: identical inputs give identical results.
pub fn env_at(s: &Scenario, t_s: f64) -> Result<EnvState, EnvQueryError> {
    if t_s < 0.0 || !t_s.is_finite() || seconds_to_tick(t_s) > s.duration_ticks() {
        return Err(EnvQueryError {
            t_s,
            duration_s: s.duration_s,
        });
    }
    // Event times live on the 1 ms tick grid; fold at tick granularity so
    // sweeping queries agree with [`EnvCursor`].
    let tick = seconds_to_tick(t_s);
    let mut fold = FoldState::default();
    let mut tap_pending = false;
    for event in s.events.iter().take_while(|e| e.at_tick() <= tick) {
        fold.apply(event);
        if event.kind == EventKind::Tap && event.at_tick() == tick {
            tap_pending = true;
        }
    }
    Ok(fold.snapshot(t_s, tap_pending))
}

/// Incremental equivalent of [`env_at`] for tick-sequential sweeps; the
/// simulation loop uses this to stay O(1) per tick. Equivalence with the
/// pure fold is property-tested.
#[derive(Debug, Clone)]
pub struct EnvCursor<'a> {
    scenario: &'a Scenario,
    next_event: usize,
    fold: FoldState,
}

impl<'a> EnvCursor<'a> {
    pub fn new(scenario: &'a Scenario) -> Self {
        Self {
            scenario,
            next_event: 0,
            fold: FoldState::default(),
        }
    }

    /// Advance to tick `t` (must be called with non-decreasing ticks) and
    /// return the environment there.
    pub fn at_tick(&mut self, t: Tick) -> EnvState {
        let t_s = t as f64 / TICKS_PER_SEC as f64;
        let mut tap_pending = false;
        while let Some(event) = self.scenario.events.get(self.next_event) {
            if event.at_tick() > t {
                break;
            }
            self.fold.apply(event);
            if event.kind == EventKind::Tap && event.at_tick() == t {
                tap_pending = true;
            }
            self.next_event += 1;
        }
        self.fold.snapshot(t_s, tap_pending)
    }
}
