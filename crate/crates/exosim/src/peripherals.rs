//! Simulated plant and sensors: coulomb-counted battery, time-of-flight
//! ranger, tap-latching accelerometer, scenario-driven object detector stub,
//! laser indicator, and the pneumatic hand plant with its current-draw
//! profile.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::firmware::MotorPhase;
use crate::kernel::{Tick, TICK_MS};

/// Object classes the detector can report. Id 0 is reserved for "nothing".
pub const OBJECT_CLASSES: [&str; 6] = ["ball", "bottle", "cube", "cup", "pen", "spoon"];

pub fn object_name(id: u8) -> Option<&'static str> {
    (1..=6).contains(&id).then(|| OBJECT_CLASSES[id as usize - 1])
}

pub fn object_id(name: &str) -> Option<u8> {
    OBJECT_CLASSES
        .iter()
        .position(|c| *c == name)
        .map(|i| i as u8 + 1)
}

// ---------------------------------------------------------------------------
// Battery
// ---------------------------------------------------------------------------

/// Linear coulomb-counted battery: terminal voltage falls proportionally to
/// consumed charge. The slope is calibrated from the hold-state discharge
/// measurement (1.54 V over 690 mAh).
#[derive(Debug, Clone, Copy)]
pub struct BatteryState {
    pub capacity_mah: f64,
    pub consumed_mah: f64,
    pub v_full: f64,
    pub slope_v_per_mah: f64,
}

impl Default for BatteryState {
    fn default() -> Self {
        Self {
            capacity_mah: 1300.0,
            consumed_mah: 0.0,
            v_full: 12.89,
            slope_v_per_mah: 2.2319e-3,
        }
    }
}

impl BatteryState {
    /// Battery at a chosen starting terminal voltage (same cell, partially
    /// discharged).
    ///
    /// A pack booting below the voltage the rated capacity maps to has
    /// plainly outlived its rating; its usable charge is widened to the 9 V
    /// regulator cutoff so discharge keeps lowering the terminal voltage.
    pub fn starting_at(v0: f64) -> Self {
        let mut b = Self::default();
        b.consumed_mah = ((b.v_full - v0) / b.slope_v_per_mah).max(0.0);
        if b.consumed_mah > b.capacity_mah {
            b.capacity_mah = (b.v_full - 9.0) / b.slope_v_per_mah;
        }
        b
    }

    pub fn voltage(&self) -> f64 {
        self.v_full - self.slope_v_per_mah * self.consumed_mah
    }

    /// Integrate `current_ma` over `dt_hours`. Consumed charge clamps at
    /// capacity rather than failing.
    pub fn step_hours(&mut self, current_ma: f64, dt_hours: f64) {
        debug_assert!(current_ma >= 0.0 && dt_hours >= 0.0);
        self.consumed_mah = (self.consumed_mah + current_ma * dt_hours).min(self.capacity_mah);
    }

    /// Tick-granularity variant used by the simulation loop.
    pub fn step_ticks(&mut self, current_ma: f64, dt_ticks: u64) {
        let hours = (dt_ticks * TICK_MS) as f64 / 3_600_000.0;
        self.step_hours(current_ma, hours);
    }
}

/// One voltage reading taken by the battery task.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatterySample {
    pub voltage: f64,
    pub tick: Tick,
}

// ---------------------------------------------------------------------------
// Range sensor
// ---------------------------------------------------------------------------

/// Time-of-flight ranger with an 8-bit range register: readings saturate at
/// `max_range_mm`.
#[derive(Debug, Clone, Copy)]
pub struct RangeSensor {
    pub max_range_mm: u16,
}

impl Default for RangeSensor {
    fn default() -> Self {
        Self { max_range_mm: 255 }
    }
}

impl RangeSensor {
    /// Reading in integer millimetres: `min(round(distance), max_range)`.
    pub fn read(&self, true_distance_mm: f64) -> u16 {
        debug_assert!(true_distance_mm >= 0.0);
        let rounded = true_distance_mm.round().max(0.0) as u64;
        rounded.min(self.max_range_mm as u64) as u16
    }
}

// ---------------------------------------------------------------------------
// Tap latch
// ---------------------------------------------------------------------------

/// Accelerometer tap-detected register: a sticky one-bit latch, set by a tap
/// while detection is enabled, cleared explicitly.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TapLatch {
    pub enabled: bool,
    pub latched: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TapEvent {
    Tap,
    Clear,
    Enable,
    Disable,
}

impl TapLatch {
    pub fn service(&mut self, event: TapEvent) {
        match event {
            TapEvent::Tap => {
                if self.enabled {
                    self.latched = true;
                }
            }
            TapEvent::Clear => self.latched = false,
            TapEvent::Enable => self.enabled = true,
            TapEvent::Disable => self.enabled = false,
        }
    }
}

// ---------------------------------------------------------------------------
// Detector stub
// ---------------------------------------------------------------------------

/// One detector output frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionFrame {
    /// 0 = nothing detected; 1..=6 map to [`OBJECT_CLASSES`].
    pub object_id: u8,
    pub score: f64,
    /// Tick at which the frame was captured.
    pub frame_tick: Tick,
}

/// What the detector can see at a capture instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorInput {
    pub visible_object: Option<(u8, f64)>,
    /// Detection probability for the visible object (object prob × lighting).
    pub detect_prob: f64,
}

/// Stand-in for the on-device vision model.
///
/// Frames are captured on a fixed cadence anchored at tick 0 (one per
/// `frame_period`) and become available to the consumer exactly `latency`
/// after capture. Detection succeeds with the scenario's per-object
/// probability; one RNG draw is made per capture while an object is visible,
/// so the hit/miss stream depends only on the seed and the capture schedule.
/// An unconsumed frame is overwritten when the next one matures.
#[derive(Debug, Clone)]
pub struct Detector {
    pub frame_period_ticks: u64,
    pub latency_ticks: u64,
    next_capture: Tick,
    in_flight: Option<DetectionFrame>,
    latest: Option<DetectionFrame>,
    rng: ChaCha8Rng,
}

pub const DEFAULT_FRAME_PERIOD_TICKS: u64 = 100;
pub const DEFAULT_LATENCY_TICKS: u64 = 51;

impl Detector {
    pub fn new(frame_period_ticks: u64, latency_ticks: u64, rng: ChaCha8Rng) -> Self {
        Self {
            frame_period_ticks: frame_period_ticks.max(1),
            latency_ticks,
            next_capture: 0,
            in_flight: None,
            latest: None,
            rng,
        }
    }

    /// Cadence for a frame rate in frames per second.
    pub fn period_ticks_for_fps(fps: f64) -> u64 {
        ((1000.0 / TICK_MS as f64) / fps).round().max(1.0) as u64
    }

    /// Advance the free-running camera to `now`. Call once per tick.
    pub fn step(&mut self, now: Tick, input: DetectorInput) {
        if now >= self.next_capture && self.in_flight.is_none() {
            // Stepped every tick, so captures land exactly on the cadence
            // grid unless a still-pending frame pushed this one out.
            let captured = now;
            let (object_id, score) = match input.visible_object {
                Some((id, score)) => {
                    let hit = self.rng.gen::<f64>() < input.detect_prob;
                    if hit {
                        (id, score)
                    } else {
                        (0, 0.0)
                    }
                }
                None => (0, 0.0),
            };
            self.in_flight = Some(DetectionFrame {
                object_id,
                score,
                frame_tick: captured,
            });
            self.next_capture = captured + self.frame_period_ticks;
        }
        if let Some(frame) = self.in_flight {
            if now >= frame.frame_tick + self.latency_ticks {
                self.latest = Some(frame);
                self.in_flight = None;
            }
        }
    }

    /// Consume the newest available frame, if any. `None` means pending.
    pub fn poll(&mut self) -> Option<DetectionFrame> {
        self.latest.take()
    }

    /// Ticks until the next frame could become available; used by the
    /// inference task to block instead of spinning.
    pub fn ticks_until_frame(&self, now: Tick) -> u64 {
        if self.latest.is_some() {
            return 0;
        }
        let avail = match self.in_flight {
            Some(frame) => frame.frame_tick + self.latency_ticks,
            None => self.next_capture.max(now) + self.latency_ticks,
        };
        avail.saturating_sub(now)
    }
}

// ---------------------------------------------------------------------------
// Hand plant
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HandState {
    Rest,
    Opening,
    Open,
    Closing,
    Closed,
}

impl HandState {
    pub fn as_str(&self) -> &'static str {
        match self {
            HandState::Rest => "Rest",
            HandState::Opening => "Opening",
            HandState::Open => "Open",
            HandState::Closing => "Closing",
            HandState::Closed => "Closed",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlantCommand {
    Open,
    Close,
    Rest,
}

/// Pneumatic glove plant. Opening and closing are timed transitions; venting
/// to rest (atmospheric pressure) is instantaneous. A command issued during a
/// transition restarts the new transition from zero.
#[derive(Debug, Clone, Copy)]
pub struct HandPlant {
    pub state: HandState,
    pub transition_elapsed_ticks: u64,
    pub t_open_ticks: u64,
    pub t_close_ticks: u64,
    pub laser_on: bool,
}

pub const DEFAULT_TRANSITION_TICKS: u64 = 2000;

impl Default for HandPlant {
    fn default() -> Self {
        Self {
            state: HandState::Rest,
            transition_elapsed_ticks: 0,
            t_open_ticks: DEFAULT_TRANSITION_TICKS,
            t_close_ticks: DEFAULT_TRANSITION_TICKS,
            // No detection has happened yet, so the aiming laser starts on.
            laser_on: true,
        }
    }
}

impl HandPlant {
    pub fn command(&mut self, cmd: PlantCommand) {
        self.transition_elapsed_ticks = 0;
        self.state = match cmd {
            PlantCommand::Open => HandState::Opening,
            PlantCommand::Close => HandState::Closing,
            PlantCommand::Rest => HandState::Rest,
        };
    }

    pub fn step(&mut self, dt_ticks: u64) {
        match self.state {
            HandState::Opening => {
                self.transition_elapsed_ticks += dt_ticks;
                if self.transition_elapsed_ticks >= self.t_open_ticks {
                    self.state = HandState::Open;
                    self.transition_elapsed_ticks = 0;
                }
            }
            HandState::Closing => {
                self.transition_elapsed_ticks += dt_ticks;
                if self.transition_elapsed_ticks >= self.t_close_ticks {
                    self.state = HandState::Closed;
                    self.transition_elapsed_ticks = 0;
                }
            }
            HandState::Rest | HandState::Open | HandState::Closed => {}
        }
    }
}

// ---------------------------------------------------------------------------
// Current profile
// ---------------------------------------------------------------------------

/// Measured system draws in each hand phase, in milliamps.
#[derive(Debug, Clone, Copy)]
pub struct CurrentProfile {
    pub idle_ma: f64,
    pub opening_ma: f64,
    pub closing_ma: f64,
    pub holding_ma: f64,
}

impl Default for CurrentProfile {
    fn default() -> Self {
        Self {
            idle_ma: 100.0,
            opening_ma: 250.0,
            closing_ma: 625.0,
            holding_ma: 230.0,
        }
    }
}

/// Total system draw for the current controller/plant state.
pub fn system_current(_motor: MotorPhase, hand: &HandPlant, profile: &CurrentProfile) -> f64 {
    match hand.state {
        HandState::Opening => profile.opening_ma,
        HandState::Closing => profile.closing_ma,
        HandState::Closed => profile.holding_ma,
        HandState::Rest | HandState::Open => profile.idle_ma,
    }
}
