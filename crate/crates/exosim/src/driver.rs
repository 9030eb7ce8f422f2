//! Numerical transient model of the MOSFET motor/solenoid driver: RC gate
//! soft start, quasi-static square-law MOSFET, series RL load (with back-EMF
//! and inertia for the motor), flyback clamping at turn-off, and dissipation
//! reporting.
//!
//! The switch node is resolved quasi-statically each step: while the device
//! can conduct the series current in its triode region the drain voltage
//! comes from a monotone 1-D root-find of the square law; when the gate
//! limits conduction the drain rides the load line and the current hugs the
//! saturation ceiling.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoadKind {
    Motor,
    Solenoid,
}

/// Electrical (and, for the motor, mechanical) load parameters.
///
/// Motor friction and inertia are derived at construction so that the steady
/// running current matches the measured target and the rotor spins up over
/// roughly `spinup_s`.
#[derive(Debug, Clone, Copy)]
pub struct LoadParams {
    pub kind: LoadKind,
    pub resistance_ohm: f64,
    pub inductance_h: f64,
    pub supply_v: f64,
    /// Back-EMF / torque constant, V·s/rad. Zero for the solenoid.
    pub back_emf: f64,
    pub steady_current_target_a: f64,
    /// Viscous friction, derived from the current calibration.
    pub friction: f64,
    /// Rotor inertia, derived from the spin-up target.
    pub inertia: f64,
}

const MOTOR_BACK_EMF: f64 = 0.01;
const MOTOR_SPINUP_S: f64 = 0.3;

impl LoadParams {
    fn motor(target_a: f64) -> Self {
        let resistance = 3.99;
        let supply = 5.0;
        let rds = MosfetParams::irlml6244().rds_on_ref_ohm;
        let k = MOTOR_BACK_EMF;
        // Steady state: V = I·(R + rds + K²/B)  ⇒  B from the target current.
        let friction = k * k / (supply / target_a - resistance - rds);
        // Linearized mechanical time constant J / (B + K²/R_total).
        let inertia = MOTOR_SPINUP_S * (friction + k * k / (resistance + rds));
        Self {
            kind: LoadKind::Motor,
            resistance_ohm: resistance,
            inductance_h: 2e-3,
            supply_v: supply,
            back_emf: k,
            steady_current_target_a: target_a,
            friction,
            inertia,
        }
    }

    /// Vacuum pump opening the hand: 250 mA running draw at 5 V.
    pub fn motor_open() -> Self {
        Self::motor(0.250)
    }

    /// Vacuum pump closing the hand: 395 mA running draw at 5 V.
    pub fn motor_close() -> Self {
        Self::motor(0.395)
    }

    /// Inlet/outlet solenoid: plain RL at 3.3 V. The component values predict
    /// ≈143 mA steady; the 130 mA bench figure is not fitted.
    pub fn solenoid() -> Self {
        let resistance = 23.1;
        let supply = 3.3;
        let rds = MosfetParams::irlml6244().rds_on_ref_ohm;
        Self {
            kind: LoadKind::Solenoid,
            resistance_ohm: resistance,
            inductance_h: 6.73e-3,
            supply_v: supply,
            back_emf: 0.0,
            steady_current_target_a: supply / (resistance + rds),
            friction: 0.0,
            inertia: 1.0,
        }
    }

    /// Electrical time constant L/R, ignoring the switch.
    pub fn electrical_tau_s(&self) -> f64 {
        self.inductance_h / self.resistance_ohm
    }
}

/// Square-law switch parameters, fitted to the vendor operating point:
/// threshold at the middle of the datasheet band and gain reproducing the
/// 53 mΩ triode resistance at V_GS = 1.8 V.
#[derive(Debug, Clone, Copy)]
pub struct MosfetParams {
    pub v_th: f64,
    pub k_gain_a_per_v2: f64,
    pub rds_on_ref_ohm: f64,
    pub p_max_w: f64,
}

impl MosfetParams {
    pub fn irlml6244() -> Self {
        Self {
            v_th: 0.8,
            k_gain_a_per_v2: 9.43,
            rds_on_ref_ohm: 0.053,
            p_max_w: 1.3,
        }
    }

    pub fn with_v_th(mut self, v_th: f64) -> Self {
        self.v_th = v_th;
        self
    }
}

/// Gate drive: either an ideal logic step or the RC-filtered soft start.
#[derive(Debug, Clone, Copy)]
pub struct GateDrive {
    pub v_logic: f64,
    pub soft_start: bool,
    pub r_gate_ohm: f64,
    pub c_gate_f: f64,
}

impl GateDrive {
    pub fn soft() -> Self {
        Self {
            v_logic: 1.8,
            soft_start: true,
            r_gate_ohm: 100e3,
            c_gate_f: 1e-6,
        }
    }

    pub fn hard() -> Self {
        Self {
            soft_start: false,
            ..Self::soft()
        }
    }

    pub fn rc_seconds(&self) -> f64 {
        self.r_gate_ohm * self.c_gate_f
    }
}

/// Gate voltage at time `t`: RC rise when soft-started, ideal step otherwise.
pub fn gate_voltage(t: f64, drive: &GateDrive) -> f64 {
    debug_assert!(t >= 0.0);
    if drive.soft_start {
        drive.v_logic * (1.0 - (-t / drive.rc_seconds()).exp())
    } else if t > 0.0 {
        drive.v_logic
    } else {
        0.0
    }
}

/// Quasi-static drain current: cutoff, triode, or saturation.
pub fn mosfet_current(v_gs: f64, v_ds: f64, m: &MosfetParams) -> f64 {
    debug_assert!(v_ds >= 0.0);
    let vov = v_gs - m.v_th;
    if vov <= 0.0 {
        0.0
    } else if v_ds > vov {
        m.k_gain_a_per_v2 * vov * vov
    } else {
        m.k_gain_a_per_v2 * (2.0 * vov * v_ds - v_ds * v_ds)
    }
}

/// One uniformly spaced point of a transient series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransientSample {
    pub t: f64,
    pub v_gs: f64,
    pub v_ds: f64,
    pub i_d: f64,
    pub p_fet: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DriverError {
    /// dt does not resolve the electrical time constant.
    StepTooLarge { dt: f64, max: f64 },
    /// t_end does not cover the soft-start gate ramp.
    RunTooShort { t_end: f64, min: f64 },
    /// The switch-node solve produced a non-finite state.
    NonConvergent { step: usize },
    EmptySeries,
}

impl fmt::Display for DriverError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DriverError::StepTooLarge { dt, max } => {
                write!(f, "dt {dt:.3e} s exceeds L/R/20 = {max:.3e} s")
            }
            DriverError::RunTooShort { t_end, min } => {
                write!(f, "t_end {t_end:.3} s under 5 gate time constants ({min:.3} s)")
            }
            DriverError::NonConvergent { step } => {
                write!(f, "switch-node solve diverged at step {step}")
            }
            DriverError::EmptySeries => write!(f, "empty transient series"),
        }
    }
}

impl std::error::Error for DriverError {}

/// Monotone bisection for the triode drain voltage carrying current `i`.
/// The bracket [0, vov] always contains the root when `i < I_sat`.
fn triode_vds(i: f64, v_gs: f64, m: &MosfetParams) -> f64 {
    let vov = v_gs - m.v_th;
    let (mut lo, mut hi) = (0.0, vov);
    for _ in 0..64 {
        let mid = 0.5 * (lo + hi);
        if mosfet_current(v_gs, mid, m) < i {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Drain voltage consistent with the series current and the device law.
///
/// `v_line` is the instantaneous load line `V − R·i − K·ω`. When the device
/// cannot conduct `i` in triode (gate-limited), the drain rides the load
/// line, never below the saturation boundary.
fn drain_voltage(i: f64, v_gs: f64, m: &MosfetParams, v_line: f64) -> f64 {
    let vov = (v_gs - m.v_th).max(0.0);
    let i_sat = m.k_gain_a_per_v2 * vov * vov;
    if vov > 0.0 && i < i_sat {
        triode_vds(i.max(0.0), v_gs, m)
    } else {
        v_line.max(vov).max(0.0)
    }
}

#[derive(Debug, Clone, Copy)]
struct CircuitState {
    current: f64,
    speed: f64,
}

fn derivatives(t: f64, s: CircuitState, load: &LoadParams, m: &MosfetParams, drive: &GateDrive) -> CircuitState {
    let v_gs = gate_voltage(t, drive);
    let v_line = load.supply_v - load.resistance_ohm * s.current - load.back_emf * s.speed;
    let v_ds = drain_voltage(s.current, v_gs, m, v_line);
    let di = (v_line - v_ds) / load.inductance_h;
    let dw = match load.kind {
        LoadKind::Motor => (load.back_emf * s.current - load.friction * s.speed) / load.inertia,
        LoadKind::Solenoid => 0.0,
    };
    CircuitState {
        current: di,
        speed: dw,
    }
}

fn rk4_step(
    t: f64,
    s: CircuitState,
    dt: f64,
    load: &LoadParams,
    m: &MosfetParams,
    drive: &GateDrive,
) -> CircuitState {
    let k1 = derivatives(t, s, load, m, drive);
    let half = CircuitState {
        current: s.current + 0.5 * dt * k1.current,
        speed: s.speed + 0.5 * dt * k1.speed,
    };
    let k2 = derivatives(t + 0.5 * dt, half, load, m, drive);
    let half2 = CircuitState {
        current: s.current + 0.5 * dt * k2.current,
        speed: s.speed + 0.5 * dt * k2.speed,
    };
    let k3 = derivatives(t + 0.5 * dt, half2, load, m, drive);
    let full = CircuitState {
        current: s.current + dt * k3.current,
        speed: s.speed + dt * k3.speed,
    };
    let k4 = derivatives(t + dt, full, load, m, drive);
    CircuitState {
        current: s.current
            + dt * (k1.current + 2.0 * k2.current + 2.0 * k3.current + k4.current) / 6.0,
        speed: s.speed + dt * (k1.speed + 2.0 * k2.speed + 2.0 * k3.speed + k4.speed) / 6.0,
    }
}

fn sample(t: f64, s: CircuitState, load: &LoadParams, m: &MosfetParams, drive: &GateDrive) -> TransientSample {
    let v_gs = gate_voltage(t, drive);
    let v_line = load.supply_v - load.resistance_ohm * s.current - load.back_emf * s.speed;
    let v_ds = drain_voltage(s.current, v_gs, m, v_line);
    TransientSample {
        t,
        v_gs,
        v_ds,
        i_d: s.current,
        p_fet: v_ds * s.current,
    }
}

/// Simulate switch turn-on from rest over `[0, t_end]` at fixed step `dt`.
pub fn transient_simulate(
    load: &LoadParams,
    m: &MosfetParams,
    drive: &GateDrive,
    t_end: f64,
    dt: f64,
) -> Result<Vec<TransientSample>, DriverError> {
    let dt_max = load.electrical_tau_s() / 20.0;
    if !(dt > 0.0) || dt > dt_max {
        return Err(DriverError::StepTooLarge { dt, max: dt_max });
    }
    if drive.soft_start {
        let min = 5.0 * drive.rc_seconds();
        if t_end < min {
            return Err(DriverError::RunTooShort { t_end, min });
        }
    }
    let steps = (t_end / dt).ceil() as usize;
    let mut series = Vec::with_capacity(steps + 1);
    let mut state = CircuitState {
        current: 0.0,
        speed: 0.0,
    };
    series.push(sample(0.0, state, load, m, drive));
    for step in 0..steps {
        let t = step as f64 * dt;
        state = rk4_step(t, state, dt, load, m, drive);
        state.current = state.current.max(0.0);
        if !state.current.is_finite() || !state.speed.is_finite() {
            return Err(DriverError::NonConvergent { step });
        }
        series.push(sample(t + dt, state, load, m, drive));
    }
    Ok(series)
}

/// Diode forward drop used by the flyback clamp.
pub const FLYBACK_DIODE_DROP_V: f64 = 0.7;
/// Open-switch proxy resistance when no flyback diode is fitted.
pub const OPEN_SWITCH_OHM: f64 = 1e6;

/// Simulate switch turn-off from `initial_current_a`.
///
/// With a flyback diode the drain clamps at `supply + 0.7 V` while the
/// inductor current freewheels and decays; without one the current is forced
/// through a 1 MΩ open-switch proxy, reporting the overvoltage it implies.
/// In this series `i_d` is the inductive loop current (the diode path when
/// the clamp conducts) and `p_fet = v_ds × i_d` bounds the clamp-path
/// dissipation.
pub fn turnoff_transient(
    load: &LoadParams,
    initial_current_a: f64,
    flyback: bool,
) -> Vec<TransientSample> {
    debug_assert!(initial_current_a >= 0.0);
    let r = load.resistance_ohm;
    let l = load.inductance_h;
    let k = load.back_emf;
    // Steady rotor speed consistent with the running current.
    let mut speed = if load.kind == LoadKind::Motor && load.friction > 0.0 {
        k * initial_current_a / load.friction
    } else {
        0.0
    };
    let (r_loop, tau) = if flyback {
        (r, l / r)
    } else {
        (r + OPEN_SWITCH_OHM, l / (r + OPEN_SWITCH_OHM))
    };
    let dt = tau / 20.0;
    let steps = (12.0 * tau / dt).ceil() as usize;
    let mut series = Vec::with_capacity(steps + 1);
    let mut current = initial_current_a;
    let snapshot = |t: f64, i: f64, w: f64| -> TransientSample {
        let v_ds = if flyback {
            if i > 0.0 {
                load.supply_v + FLYBACK_DIODE_DROP_V
            } else {
                load.supply_v - k * w
            }
        } else {
            i * OPEN_SWITCH_OHM
        };
        TransientSample {
            t,
            v_gs: 0.0,
            v_ds,
            i_d: i,
            p_fet: v_ds * i,
        }
    };
    series.push(snapshot(0.0, current, speed));
    for step in 0..steps {
        let di = |i: f64, w: f64| -> f64 {
            if flyback {
                if i <= 0.0 {
                    return 0.0;
                }
                -(FLYBACK_DIODE_DROP_V + r * i + k * w) / l
            } else {
                (load.supply_v - r_loop * i - k * w) / l
            }
        };
        let dw = |i: f64, w: f64| -> f64 {
            if load.kind == LoadKind::Motor {
                (k * i - load.friction * w) / load.inertia
            } else {
                0.0
            }
        };
        let (i0, w0) = (current, speed);
        let (k1i, k1w) = (di(i0, w0), dw(i0, w0));
        let (k2i, k2w) = (
            di(i0 + 0.5 * dt * k1i, w0 + 0.5 * dt * k1w),
            dw(i0 + 0.5 * dt * k1i, w0 + 0.5 * dt * k1w),
        );
        let (k3i, k3w) = (
            di(i0 + 0.5 * dt * k2i, w0 + 0.5 * dt * k2w),
            dw(i0 + 0.5 * dt * k2i, w0 + 0.5 * dt * k2w),
        );
        let (k4i, k4w) = (di(i0 + dt * k3i, w0 + dt * k3w), dw(i0 + dt * k3i, w0 + dt * k3w));
        current = i0 + dt * (k1i + 2.0 * k2i + 2.0 * k3i + k4i) / 6.0;
        speed = w0 + dt * (k1w + 2.0 * k2w + 2.0 * k3w + k4w) / 6.0;
        if flyback && current < 0.0 {
            current = 0.0;
        }
        series.push(snapshot((step + 1) as f64 * dt, current, speed));
    }
    series
}

/// Largest instantaneous switch dissipation in a series.
pub fn peak_dissipation(series: &[TransientSample]) -> Result<f64, DriverError> {
    if series.is_empty() {
        return Err(DriverError::EmptySeries);
    }
    Ok(series.iter().map(|s| s.p_fet).fold(0.0_f64, f64::max))
}
