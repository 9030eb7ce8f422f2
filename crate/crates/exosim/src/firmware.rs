//! The four control tasks and their shared state: the grasp state machine,
//! detection debounce and trigger, sensor polling into global buffers, and
//! the battery runtime estimator with hibernation.

use std::fmt;

use crate::kernel::{TaskApi, TaskId, Tick, TICKS_PER_SEC};
use crate::peripherals::{
    BatterySample, BatteryState, CurrentProfile, DetectionFrame, Detector, HandPlant, PlantCommand,
    RangeSensor, TapEvent, TapLatch,
};

/// Grasp threshold: an object closer than this is considered in hand.
pub const RANGE_GRASP_THRESHOLD_MM: u16 = 30;
/// The open hand gives up waiting for an object after this long.
pub const OPEN_TIMEOUT_TICKS: u64 = 10 * TICKS_PER_SEC;
/// Motor task re-check cadence while opening or closed.
pub const MOTOR_POLL_TICKS: u64 = 100;
/// Motor task wait cadence while idle, watching for a trigger.
pub const MOTOR_IDLE_POLL_TICKS: u64 = 10;
/// Sensor task polling cadence.
pub const SENSOR_POLL_TICKS: u64 = 50;
/// Battery voltage sampling cadence.
pub const BATTERY_SAMPLE_TICKS: u64 = 60 * TICKS_PER_SEC;
/// Samples per estimator window.
pub const ESTIMATOR_WINDOW: usize = 10;
/// Regulator drop-out voltage; the runtime estimate extrapolates to here.
pub const CUTOFF_VOLTAGE: f64 = 9.0;
/// Estimated runtime below this suspends everything but the battery task.
pub const HIBERNATE_THRESHOLD_MIN: f64 = 30.0;
/// A range buffer older than this draws a staleness warning.
pub const RANGE_STALE_TICKS: u64 = TICKS_PER_SEC;
/// Consecutive equal detections required to trigger a grasp.
pub const DEBOUNCE_TRIGGER_COUNT: u32 = 6;

/// Controller state of the motor task.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MotorPhase {
    Idle,
    OpenHand,
    CloseHand,
}

impl MotorPhase {
    pub fn as_str(&self) -> &'static str {
        match self {
            MotorPhase::Idle => "Idle",
            MotorPhase::OpenHand => "OpenHand",
            MotorPhase::CloseHand => "CloseHand",
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MotorState {
    pub phase: MotorPhase,
    /// Tick at which OpenHand was entered; `None` outside OpenHand.
    pub open_entry_tick: Option<Tick>,
}

impl Default for MotorState {
    fn default() -> Self {
        Self {
            phase: MotorPhase::Idle,
            open_entry_tick: None,
        }
    }
}

/// Consecutive-detection counter feeding the grasp trigger.
#[derive(Debug, Clone, Copy, Default)]
pub struct DebounceState {
    pub last_object_id: u8,
    /// Length of the current run of frames sharing `last_object_id` (nonzero
    /// ids only); 0 after a trigger or an empty frame.
    pub object_count: u32,
}

/// Latest sensor readings, written only by the sensor task.
#[derive(Debug, Clone, Copy, Default)]
pub struct SensorBuffers {
    pub range_mm: u16,
    pub range_tick: Tick,
    pub tap_latched: bool,
}

/// Rolling voltage window for the runtime estimator.
#[derive(Debug, Clone)]
pub struct RuntimeEstimatorState {
    pub samples: Vec<BatterySample>,
    pub window_start_tick: Tick,
    pub cutoff_voltage: f64,
    pub hibernate_threshold_min: f64,
}

impl Default for RuntimeEstimatorState {
    fn default() -> Self {
        Self {
            samples: Vec::with_capacity(ESTIMATOR_WINDOW),
            window_start_tick: 0,
            cutoff_voltage: CUTOFF_VOLTAGE,
            hibernate_threshold_min: HIBERNATE_THRESHOLD_MIN,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EstimatorError {
    WrongSampleCount(usize),
    ZeroElapsed,
}

impl fmt::Display for EstimatorError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EstimatorError::WrongSampleCount(n) => {
                write!(f, "estimator needs {ESTIMATOR_WINDOW} samples, got {n}")
            }
            EstimatorError::ZeroElapsed => write!(f, "estimator window has zero duration"),
        }
    }
}

impl std::error::Error for EstimatorError {}

/// Firmware-level events surfaced in the trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimEvent {
    /// Debounce satisfied; inference set the motor state to OpenHand.
    Trigger,
    /// Object within grasp range; hand commanded to close.
    Grasp,
    /// Tap detected while holding; hand released to rest.
    Release,
    /// Open hand timed out without an object approaching.
    Timeout,
    /// Estimated runtime under threshold; other tasks suspended.
    Hibernate,
    /// Range buffer older than the staleness bound when consulted.
    RangeStale,
}

impl SimEvent {
    pub fn as_str(&self) -> &'static str {
        match self {
            SimEvent::Trigger => "trigger",
            SimEvent::Grasp => "grasp",
            SimEvent::Release => "release",
            SimEvent::Timeout => "timeout",
            SimEvent::Hibernate => "hibernate",
            SimEvent::RangeStale => "range_stale",
        }
    }
}

/// Kernel ids of the four firmware tasks.
#[derive(Debug, Clone, Copy)]
pub struct TaskHandles {
    pub motor: TaskId,
    pub battery: TaskId,
    pub inference: TaskId,
    pub sensor: TaskId,
}

/// Everything the tasks read and write: peripherals, controller state, and
/// the global buffers. One instance per simulation; tasks receive it each
/// scheduling slice.
pub struct World {
    pub battery: BatteryState,
    pub range: RangeSensor,
    pub tap: TapLatch,
    pub detector: Detector,
    pub hand: HandPlant,
    pub profile: CurrentProfile,
    pub motor: MotorState,
    pub debounce: DebounceState,
    pub buffers: SensorBuffers,
    pub estimator: RuntimeEstimatorState,
    pub tasks: TaskHandles,
    /// True distance from palm to object this tick, from the scenario.
    pub true_distance_mm: f64,
    /// Most recently consumed detector frame.
    pub last_frame: Option<DetectionFrame>,
    /// Firmware events emitted this tick; drained by the simulation loop.
    pub events: Vec<SimEvent>,
    pub hibernated: bool,
}

impl World {
    pub fn new(battery: BatteryState, detector: Detector, tasks: TaskHandles) -> Self {
        let range = RangeSensor::default();
        Self {
            battery,
            range,
            tap: TapLatch::default(),
            detector,
            hand: HandPlant::default(),
            profile: CurrentProfile::default(),
            motor: MotorState::default(),
            debounce: DebounceState::default(),
            // One synchronous boot-time read so the buffers never hold the
            // dangerous zero-range default.
            buffers: SensorBuffers {
                range_mm: range.max_range_mm,
                range_tick: 0,
                tap_latched: false,
            },
            estimator: RuntimeEstimatorState::default(),
            tasks,
            true_distance_mm: range.max_range_mm as f64,
            last_frame: None,
            events: Vec::new(),
            hibernated: false,
        }
    }

    pub fn push_event(&mut self, event: SimEvent) {
        self.events.push(event);
    }

    /// Firmware-visible state after a watchdog reset: controller back to
    /// idle, hand vented, detection disarmed. The battery is physical and
    /// keeps its charge.
    pub fn firmware_reset(&mut self) {
        self.motor = MotorState::default();
        self.debounce = DebounceState::default();
        self.buffers = SensorBuffers {
            range_mm: self.range.max_range_mm,
            range_tick: 0,
            tap_latched: false,
        };
        self.estimator = RuntimeEstimatorState::default();
        self.tap = TapLatch::default();
        self.hand.command(PlantCommand::Rest);
        self.hand.laser_on = true;
        self.last_frame = None;
        self.hibernated = false;
    }
}

/// Fold one detector frame into the debounce state.
///
/// A nonzero id extends or starts a run; an empty frame breaks it. The
/// trigger fires when the run reaches [`DEBOUNCE_TRIGGER_COUNT`] and the
/// motor is not already in OpenHand (so a slow suspension cannot re-trigger),
/// and the count restarts after firing.
pub fn debounce_update(
    d: &mut DebounceState,
    frame: &DetectionFrame,
    motor: MotorPhase,
) -> bool {
    if frame.object_id != 0 && frame.object_id == d.last_object_id {
        d.object_count += 1;
    } else {
        d.last_object_id = frame.object_id;
        d.object_count = if frame.object_id != 0 { 1 } else { 0 };
    }
    let trigger = d.object_count >= DEBOUNCE_TRIGGER_COUNT && motor != MotorPhase::OpenHand;
    if trigger {
        d.object_count = 0;
    }
    trigger
}

/// Linear runtime estimate from a full sample window.
///
/// Returns `None` when the voltage did not decline across the window (no
/// meaningful slope). Runtime is minutes until the cutoff voltage at the
/// window's average discharge rate.
pub fn estimate_runtime(
    samples: &[BatterySample],
    elapsed_ticks: u64,
) -> Result<Option<f64>, EstimatorError> {
    if samples.len() != ESTIMATOR_WINDOW {
        return Err(EstimatorError::WrongSampleCount(samples.len()));
    }
    if elapsed_ticks == 0 {
        return Err(EstimatorError::ZeroElapsed);
    }
    let v_first = samples[0].voltage;
    let v_last = samples[samples.len() - 1].voltage;
    if v_first <= v_last {
        return Ok(None);
    }
    let elapsed_min = elapsed_ticks as f64 / (60.0 * TICKS_PER_SEC as f64);
    let slope_v_per_min = (v_first - v_last) / elapsed_min;
    Ok(Some((v_last - CUTOFF_VOLTAGE) / slope_v_per_min))
}

/// MotorTask: drives the grasp cycle.
///
/// Idle waits for the inference trigger. On entering OpenHand it suspends
/// inference, opens the hand, and records the entry tick; it then watches the
/// range buffer every 100 ms, closing on an object within 30 mm or resting
/// after 10 s. CloseHand polls the tap latch every 100 ms and releases to
/// rest on a tap.
pub fn motor_task_step(w: &mut World, api: &mut TaskApi) {
    match w.motor.phase {
        MotorPhase::Idle => api.delay_ms(MOTOR_IDLE_POLL_TICKS),
        MotorPhase::OpenHand => {
            let entry = match w.motor.open_entry_tick {
                Some(t) => t,
                None => {
                    api.suspend(w.tasks.inference);
                    w.hand.command(PlantCommand::Open);
                    w.motor.open_entry_tick = Some(api.now);
                    api.now
                }
            };
            if api.now.saturating_sub(w.buffers.range_tick) > RANGE_STALE_TICKS {
                w.push_event(SimEvent::RangeStale);
            }
            if w.buffers.range_mm < RANGE_GRASP_THRESHOLD_MM {
                w.tap.service(TapEvent::Clear);
                w.motor.phase = MotorPhase::CloseHand;
                w.motor.open_entry_tick = None;
                w.hand.command(PlantCommand::Close);
                w.push_event(SimEvent::Grasp);
                api.delay_ms(MOTOR_POLL_TICKS);
            } else if api.now - entry >= OPEN_TIMEOUT_TICKS {
                w.hand.command(PlantCommand::Rest);
                api.resume(w.tasks.inference);
                w.motor.phase = MotorPhase::Idle;
                w.motor.open_entry_tick = None;
                w.push_event(SimEvent::Timeout);
                api.delay_ms(MOTOR_IDLE_POLL_TICKS);
            } else {
                api.delay_ms(MOTOR_POLL_TICKS);
            }
        }
        MotorPhase::CloseHand => {
            if w.tap.latched {
                w.hand.command(PlantCommand::Rest);
                api.resume(w.tasks.inference);
                w.motor.phase = MotorPhase::Idle;
                w.push_event(SimEvent::Release);
                api.delay_ms(MOTOR_IDLE_POLL_TICKS);
            } else {
                api.delay_ms(MOTOR_POLL_TICKS);
            }
        }
    }
}

/// InferenceTask: consumes detector frames, manages the laser, and fires the
/// grasp trigger through the debounce.
///
/// On a trigger it enables tap detection before setting the motor state, so
/// the release gesture is armed by the time the hand is moving. Between
/// frames the task blocks until the detector can have one ready.
pub fn inference_task_step(w: &mut World, api: &mut TaskApi) {
    if let Some(frame) = w.detector.poll() {
        w.last_frame = Some(frame);
        let last_before = w.debounce.last_object_id;
        if frame.object_id != 0 {
            if last_before != 0 {
                w.hand.laser_on = false;
            }
        } else if w.motor.phase == MotorPhase::Idle {
            w.hand.laser_on = true;
        }
        if debounce_update(&mut w.debounce, &frame, w.motor.phase) {
            w.tap.service(TapEvent::Enable);
            w.motor.phase = MotorPhase::OpenHand;
            w.push_event(SimEvent::Trigger);
        }
    }
    api.delay_ms(w.detector.ticks_until_frame(api.now).max(1));
}

/// SensorTask: copies the ranger and tap latch into the global buffers and
/// feeds the watchdog. Lowest priority: if this runs, everything runs.
pub fn sensor_task_step(w: &mut World, api: &mut TaskApi) {
    w.buffers.range_mm = w.range.read(w.true_distance_mm);
    w.buffers.range_tick = api.now;
    w.buffers.tap_latched = w.tap.latched;
    api.kick_watchdog();
    api.delay_ms(SENSOR_POLL_TICKS);
}

/// BatteryTask: samples the terminal voltage once per minute; every ten
/// samples it estimates remaining runtime and hibernates the system when the
/// estimate drops under the threshold. Sampling continues afterwards; there
/// is no wake-up path.
pub fn battery_task_step(w: &mut World, api: &mut TaskApi) {
    if w.estimator.samples.is_empty() {
        w.estimator.window_start_tick = api.now;
    }
    w.estimator.samples.push(BatterySample {
        voltage: w.battery.voltage(),
        tick: api.now,
    });
    if w.estimator.samples.len() == ESTIMATOR_WINDOW {
        let elapsed = api.now - w.estimator.window_start_tick;
        if let Ok(Some(estimate)) = estimate_runtime(&w.estimator.samples, elapsed) {
            if estimate < w.estimator.hibernate_threshold_min && !w.hibernated {
                w.hibernated = true;
                api.suspend(w.tasks.motor);
                api.suspend(w.tasks.inference);
                api.suspend(w.tasks.sensor);
                w.push_event(SimEvent::Hibernate);
            }
        }
        w.estimator.samples.clear();
    }
    api.delay_ms(BATTERY_SAMPLE_TICKS);
}
