//! Deterministic virtual-clock task kernel.
//!
//! Reproduces the scheduling semantics the firmware relies on: fixed-priority
//! preemption at tick granularity, round-robin rotation among equal
//! priorities, task states (ready/running/blocked/suspended), millisecond
//! delays, suspend/resume, and an 8-second watchdog. Everything is
//! single-threaded and driven by [`Kernel::advance_tick`]; two runs with the
//! same inputs produce identical schedules.

use std::collections::VecDeque;
use std::fmt;

/// Scheduling quantum. All firmware timing constants are integral multiples.
pub const TICK_MS: u64 = 1;
/// Ticks per simulated second.
pub const TICKS_PER_SEC: u64 = 1000 / TICK_MS;
/// Watchdog timeout: 8 seconds of missed kicks.
pub const WATCHDOG_TIMEOUT_TICKS: u64 = 8 * TICKS_PER_SEC;

/// Simulation time in ticks since start.
pub type Tick = u64;

/// Stable handle for a spawned task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TaskId(pub usize);

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskState {
    Ready,
    Running,
    Blocked,
    Suspended,
}

#[derive(Debug, Clone, PartialEq)]
pub enum KernelError {
    DuplicateTaskName(String),
    UnknownTask(TaskId),
    /// The requested state change is not legal from the task's current state.
    InvalidTransition {
        task: TaskId,
        from: TaskState,
        request: &'static str,
    },
}

impl fmt::Display for KernelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelError::DuplicateTaskName(name) => {
                write!(f, "task name {name:?} already registered")
            }
            KernelError::UnknownTask(id) => write!(f, "unknown task id {id}"),
            KernelError::InvalidTransition {
                task,
                from,
                request,
            } => write!(f, "cannot {request} task {task} in state {from:?}"),
        }
    }
}

impl std::error::Error for KernelError {}

/// Events the kernel emits into the trace stream.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelEvent {
    /// The running task changed relative to the previous tick.
    TaskSwitch(Option<TaskId>),
    TaskSuspend(TaskId),
    TaskResume(TaskId),
    WatchdogExpired,
    /// A step requested an invalid state transition; kernel state is unchanged.
    Fault(String),
}

/// Monotonic tick counter; `time = tick_count × 1 ms` exactly.
#[derive(Debug, Clone, Copy, Default)]
pub struct SimClock {
    tick_count: Tick,
}

impl SimClock {
    pub fn now(&self) -> Tick {
        self.tick_count
    }

    pub fn seconds(&self) -> f64 {
        self.tick_count as f64 * (TICK_MS as f64 / 1000.0)
    }

    fn advance(&mut self) -> Tick {
        self.tick_count += 1;
        self.tick_count
    }
}

/// Ready tasks organized by priority, FIFO within a level.
///
/// Round-robin rotation: the task selected for a slice is popped from the
/// front of its level and reinserted at the tail when it is still ready
/// afterwards, so equal-priority tasks take strict turns. Insertion order is
/// preserved between rotations.
#[derive(Debug, Default, Clone)]
pub struct ReadyLists {
    levels: Vec<VecDeque<TaskId>>,
}

impl ReadyLists {
    fn ensure_level(&mut self, priority: u8) {
        if self.levels.len() <= priority as usize {
            self.levels.resize_with(priority as usize + 1, VecDeque::new);
        }
    }

    fn insert_tail(&mut self, id: TaskId, priority: u8) {
        self.ensure_level(priority);
        self.levels[priority as usize].push_back(id);
    }

    fn remove(&mut self, id: TaskId, priority: u8) {
        if let Some(level) = self.levels.get_mut(priority as usize) {
            level.retain(|t| *t != id);
        }
    }

    /// Highest-priority-first selection; front of the level is next in the
    /// rotation. Pure: does not modify the lists.
    pub fn pick_next(&self) -> Option<TaskId> {
        self.levels
            .iter()
            .rev()
            .find_map(|level| level.front().copied())
    }

    /// Ready ids at one priority level, in rotation order. Test/trace helper.
    pub fn at_priority(&self, priority: u8) -> Vec<TaskId> {
        self.levels
            .get(priority as usize)
            .map(|l| l.iter().copied().collect())
            .unwrap_or_default()
    }

    pub fn contains(&self, id: TaskId, priority: u8) -> bool {
        self.levels
            .get(priority as usize)
            .is_some_and(|l| l.contains(&id))
    }
}

/// Kicked-or-expired liveness timer. Once expired it stays expired until the
/// kernel is reset.
#[derive(Debug, Clone, Copy)]
pub struct Watchdog {
    pub timeout_ticks: u64,
    pub last_kick_tick: Tick,
    pub expired: bool,
}

impl Watchdog {
    pub fn new(timeout_ticks: u64) -> Self {
        Self {
            timeout_ticks,
            last_kick_tick: 0,
            expired: false,
        }
    }

    pub fn kick(&mut self, now: Tick) {
        self.last_kick_tick = now;
    }

    /// True iff `now − last_kick ≥ timeout`. Does not latch.
    pub fn check(&self, now: Tick) -> bool {
        now.saturating_sub(self.last_kick_tick) >= self.timeout_ticks
    }
}

/// One scheduling slice's interface back into the kernel.
///
/// Steps run to completion and may not mutate the kernel directly; state
/// changes are queued here and applied in order after the step returns. An
/// invalid request becomes a [`KernelEvent::Fault`] instead of corrupting
/// kernel state.
pub struct TaskApi {
    pub now: Tick,
    pub task_id: TaskId,
    requests: Vec<Request>,
}

#[derive(Debug, Clone)]
enum Request {
    DelayMs(u64),
    Suspend(TaskId),
    Resume(TaskId),
    KickWatchdog,
}

impl TaskApi {
    /// Block the calling task for `ms` milliseconds (rounded up to ticks).
    pub fn delay_ms(&mut self, ms: u64) {
        self.requests.push(Request::DelayMs(ms));
    }

    pub fn suspend(&mut self, target: TaskId) {
        self.requests.push(Request::Suspend(target));
    }

    pub fn resume(&mut self, target: TaskId) {
        self.requests.push(Request::Resume(target));
    }

    pub fn kick_watchdog(&mut self) {
        self.requests.push(Request::KickWatchdog);
    }
}

type StepFn<W> = Box<dyn FnMut(&mut W, &mut TaskApi)>;

struct Task<W> {
    name: String,
    priority: u8,
    state: TaskState,
    wake_tick: Tick,
    // Taken out while the step runs so the kernel stays borrowable.
    step: Option<StepFn<W>>,
}

/// Result of one [`Kernel::advance_tick`].
#[derive(Debug, Clone, PartialEq)]
pub struct TickOutcome {
    pub now: Tick,
    /// Task that received this tick's slice, if any was ready.
    pub ran: Option<TaskId>,
    pub events: Vec<KernelEvent>,
}

/// The simulated kernel: clock, task table, ready lists, watchdog.
///
/// Generic over a world type `W` handed to every task step; the kernel itself
/// knows nothing about the firmware.
pub struct Kernel<W> {
    clock: SimClock,
    tasks: Vec<Task<W>>,
    ready: ReadyLists,
    watchdog: Watchdog,
    last_ran: Option<TaskId>,
}

impl<W> Kernel<W> {
    pub fn new() -> Self {
        Self {
            clock: SimClock::default(),
            tasks: Vec::new(),
            ready: ReadyLists::default(),
            watchdog: Watchdog::new(WATCHDOG_TIMEOUT_TICKS),
            last_ran: None,
        }
    }

    pub fn now(&self) -> Tick {
        self.clock.now()
    }

    pub fn clock(&self) -> SimClock {
        self.clock
    }

    pub fn watchdog(&self) -> &Watchdog {
        &self.watchdog
    }

    pub fn ready_lists(&self) -> &ReadyLists {
        &self.ready
    }

    /// Register a task in the Ready state. Names must be unique.
    pub fn spawn_task(
        &mut self,
        name: &str,
        priority: u8,
        step: impl FnMut(&mut W, &mut TaskApi) + 'static,
    ) -> Result<TaskId, KernelError> {
        if self.tasks.iter().any(|t| t.name == name) {
            return Err(KernelError::DuplicateTaskName(name.to_string()));
        }
        let id = TaskId(self.tasks.len());
        self.tasks.push(Task {
            name: name.to_string(),
            priority,
            state: TaskState::Ready,
            wake_tick: 0,
            step: Some(Box::new(step)),
        });
        self.ready.insert_tail(id, priority);
        Ok(id)
    }

    pub fn task_name(&self, id: TaskId) -> &str {
        &self.tasks[id.0].name
    }

    pub fn task_priority(&self, id: TaskId) -> u8 {
        self.tasks[id.0].priority
    }

    pub fn task_state(&self, id: TaskId) -> TaskState {
        self.tasks[id.0].state
    }

    /// Wake deadline of a Blocked task; meaningless in other states.
    pub fn task_wake_tick(&self, id: TaskId) -> Tick {
        self.tasks[id.0].wake_tick
    }

    pub fn task_count(&self) -> usize {
        self.tasks.len()
    }

    pub fn find_task(&self, name: &str) -> Option<TaskId> {
        self.tasks.iter().position(|t| t.name == name).map(TaskId)
    }

    fn check_known(&self, id: TaskId) -> Result<(), KernelError> {
        if id.0 < self.tasks.len() {
            Ok(())
        } else {
            Err(KernelError::UnknownTask(id))
        }
    }

    /// Block a Ready or Running task until `now + ceil(ms / tick)`.
    pub fn delay_task(&mut self, id: TaskId, ms: u64) -> Result<(), KernelError> {
        self.check_known(id)?;
        let task = &mut self.tasks[id.0];
        match task.state {
            TaskState::Ready | TaskState::Running => {
                let ticks = ms.div_ceil(TICK_MS);
                task.wake_tick = self.clock.now() + ticks;
                if task.state == TaskState::Ready {
                    self.ready.remove(id, task.priority);
                }
                self.tasks[id.0].state = TaskState::Blocked;
                Ok(())
            }
            from => Err(KernelError::InvalidTransition {
                task: id,
                from,
                request: "delay",
            }),
        }
    }

    /// Remove a task from scheduling until it is resumed.
    pub fn suspend_task(&mut self, id: TaskId) -> Result<Option<KernelEvent>, KernelError> {
        self.check_known(id)?;
        let task = &mut self.tasks[id.0];
        match task.state {
            TaskState::Suspended => Ok(None),
            TaskState::Ready => {
                self.ready.remove(id, task.priority);
                self.tasks[id.0].state = TaskState::Suspended;
                Ok(Some(KernelEvent::TaskSuspend(id)))
            }
            TaskState::Running | TaskState::Blocked => {
                task.state = TaskState::Suspended;
                Ok(Some(KernelEvent::TaskSuspend(id)))
            }
        }
    }

    /// Reinsert a Suspended task at the tail of its priority list.
    /// Resuming a task that is not suspended is a no-op.
    pub fn resume_task(&mut self, id: TaskId) -> Result<Option<KernelEvent>, KernelError> {
        self.check_known(id)?;
        let task = &mut self.tasks[id.0];
        if task.state != TaskState::Suspended {
            return Ok(None);
        }
        task.state = TaskState::Ready;
        let priority = task.priority;
        self.ready.insert_tail(id, priority);
        Ok(Some(KernelEvent::TaskResume(id)))
    }

    pub fn kick_watchdog(&mut self) {
        let now = self.clock.now();
        self.watchdog.kick(now);
    }

    /// Rearm the watchdog and return every task to Ready, as after a hardware
    /// reset. The clock keeps counting.
    pub fn reset_after_watchdog(&mut self) {
        let now = self.clock.now();
        self.watchdog = Watchdog::new(self.watchdog.timeout_ticks);
        self.watchdog.kick(now);
        self.ready = ReadyLists::default();
        for (idx, task) in self.tasks.iter_mut().enumerate() {
            task.state = TaskState::Ready;
            task.wake_tick = 0;
            self.ready.insert_tail(TaskId(idx), task.priority);
        }
        self.last_ran = None;
    }

    /// Advance one tick: promote due delays, run the highest-priority ready
    /// task's slice, apply its requests, then check the watchdog.
    pub fn advance_tick(&mut self, world: &mut W) -> TickOutcome {
        let now = self.clock.advance();
        let mut events = Vec::new();

        // Wake delayed tasks whose deadline has arrived, in id order.
        for idx in 0..self.tasks.len() {
            let task = &mut self.tasks[idx];
            if task.state == TaskState::Blocked && task.wake_tick <= now {
                task.state = TaskState::Ready;
                let priority = task.priority;
                self.ready.insert_tail(TaskId(idx), priority);
            }
        }

        let picked = self.ready.pick_next();
        if picked != self.last_ran {
            events.push(KernelEvent::TaskSwitch(picked));
        }
        self.last_ran = picked;

        if let Some(id) = picked {
            let priority = self.tasks[id.0].priority;
            self.ready.remove(id, priority);
            self.tasks[id.0].state = TaskState::Running;

            let mut api = TaskApi {
                now,
                task_id: id,
                requests: Vec::new(),
            };
            let mut step = self.tasks[id.0].step.take().expect("step in place");
            step(world, &mut api);
            self.tasks[id.0].step = Some(step);

            for request in api.requests {
                match self.apply(id, request) {
                    Ok(Some(event)) => events.push(event),
                    Ok(None) => {}
                    Err(err) => events.push(KernelEvent::Fault(err.to_string())),
                }
            }

            // A slice that did not block or suspend itself rotates to the
            // tail of its priority level.
            if self.tasks[id.0].state == TaskState::Running {
                self.tasks[id.0].state = TaskState::Ready;
                self.ready.insert_tail(id, priority);
            }
        }

        if !self.watchdog.expired && self.watchdog.check(now) {
            self.watchdog.expired = true;
            events.push(KernelEvent::WatchdogExpired);
        }

        TickOutcome {
            now,
            ran: picked,
            events,
        }
    }

    fn apply(&mut self, caller: TaskId, request: Request) -> Result<Option<KernelEvent>, KernelError> {
        match request {
            Request::DelayMs(ms) => self.delay_task(caller, ms).map(|_| None),
            Request::Suspend(target) => self.suspend_task(target),
            Request::Resume(target) => self.resume_task(target),
            Request::KickWatchdog => {
                self.kick_watchdog();
                Ok(None)
            }
        }
    }
}

impl<W> Default for Kernel<W> {
    fn default() -> Self {
        Self::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn idle_step(_: &mut (), _: &mut TaskApi) {}

    #[test]
    fn spawn_registers_ready_with_stable_ids() {
        let mut k: Kernel<()> = Kernel::new();
        let id = k.spawn_task("MotorTask", 3, idle_step).unwrap();
        assert_eq!(id, TaskId(0));
        assert_eq!(k.task_state(id), TaskState::Ready);
    }

    #[test]
    fn equal_priority_tasks_keep_insertion_order() {
        let mut k: Kernel<()> = Kernel::new();
        let a = k.spawn_task("A", 3, idle_step).unwrap();
        let b = k.spawn_task("B", 3, idle_step).unwrap();
        assert_eq!(k.ready_lists().at_priority(3), vec![a, b]);
    }

    #[test]
    fn duplicate_name_is_rejected() {
        let mut k: Kernel<()> = Kernel::new();
        k.spawn_task("MotorTask", 3, idle_step).unwrap();
        let err = k.spawn_task("MotorTask", 3, idle_step).unwrap_err();
        assert_eq!(err, KernelError::DuplicateTaskName("MotorTask".into()));
    }

    #[test]
    fn pick_next_returns_sole_ready_task() {
        let mut k: Kernel<()> = Kernel::new();
        let a = k.spawn_task("A", 2, idle_step).unwrap();
        assert_eq!(k.ready_lists().pick_next(), Some(a));
    }

    #[test]
    fn pick_next_prefers_higher_priority() {
        let mut k: Kernel<()> = Kernel::new();
        let a = k.spawn_task("A", 3, idle_step).unwrap();
        let _b = k.spawn_task("B", 1, idle_step).unwrap();
        assert_eq!(k.ready_lists().pick_next(), Some(a));
    }

    #[test]
    fn equal_priority_round_robin_alternates() {
        let mut k: Kernel<()> = Kernel::new();
        let a = k.spawn_task("A", 2, idle_step).unwrap();
        let b = k.spawn_task("B", 2, idle_step).unwrap();
        // A runs the first slice, after which B is at the front.
        assert_eq!(k.advance_tick(&mut ()).ran, Some(a));
        assert_eq!(k.ready_lists().pick_next(), Some(b));
        assert_eq!(k.advance_tick(&mut ()).ran, Some(b));
        assert_eq!(k.advance_tick(&mut ()).ran, Some(a));
    }

    #[test]
    fn all_suspended_still_advances_clock() {
        let mut k: Kernel<()> = Kernel::new();
        let a = k.spawn_task("A", 2, idle_step).unwrap();
        k.suspend_task(a).unwrap();
        let outcome = k.advance_tick(&mut ());
        assert_eq!(outcome.ran, None);
        assert_eq!(k.now(), 1);
    }

    #[test]
    fn blocked_task_with_wake_tick_now_runs_this_tick() {
        let mut k: Kernel<()> = Kernel::new();
        let a = k.spawn_task("A", 2, idle_step).unwrap();
        k.delay_task(a, 1).unwrap();
        assert_eq!(k.task_state(a), TaskState::Blocked);
        let outcome = k.advance_tick(&mut ());
        assert_eq!(outcome.ran, Some(a));
    }

    #[test]
    fn delay_rounds_up_and_uses_now() {
        let mut k: Kernel<()> = Kernel::new();
        let a = k.spawn_task("A", 2, idle_step).unwrap();
        k.delay_task(a, 100).unwrap();
        assert_eq!(k.tasks[a.0].wake_tick, 100);
        // BatteryTask cadence: one minute.
        let b = k.spawn_task("B", 2, idle_step).unwrap();
        k.delay_task(b, 60_000).unwrap();
        assert_eq!(k.tasks[b.0].wake_tick, 60_000);
    }

    #[test]
    fn delay_zero_is_ready_again_next_tick() {
        let mut k: Kernel<()> = Kernel::new();
        let a = k.spawn_task("A", 2, idle_step).unwrap();
        k.delay_task(a, 0).unwrap();
        let outcome = k.advance_tick(&mut ());
        assert_eq!(outcome.ran, Some(a));
    }

    #[test]
    fn delaying_a_suspended_task_is_a_state_error() {
        let mut k: Kernel<()> = Kernel::new();
        let a = k.spawn_task("A", 2, idle_step).unwrap();
        k.suspend_task(a).unwrap();
        let err = k.delay_task(a, 10).unwrap_err();
        assert!(matches!(err, KernelError::InvalidTransition { .. }));
    }

    #[test]
    fn suspend_removes_from_ready_lists() {
        let mut k: Kernel<()> = Kernel::new();
        let a = k.spawn_task("InferenceTask", 2, idle_step).unwrap();
        k.suspend_task(a).unwrap();
        assert!(!k.ready_lists().contains(a, 2));
        assert_eq!(k.task_state(a), TaskState::Suspended);
    }

    #[test]
    fn resume_reinserts_at_tail() {
        let mut k: Kernel<()> = Kernel::new();
        let a = k.spawn_task("A", 2, idle_step).unwrap();
        let b = k.spawn_task("B", 2, idle_step).unwrap();
        k.suspend_task(a).unwrap();
        k.resume_task(a).unwrap();
        assert_eq!(k.ready_lists().at_priority(2), vec![b, a]);
    }

    #[test]
    fn resume_of_ready_task_is_noop() {
        let mut k: Kernel<()> = Kernel::new();
        let a = k.spawn_task("A", 2, idle_step).unwrap();
        let b = k.spawn_task("B", 2, idle_step).unwrap();
        assert_eq!(k.resume_task(a).unwrap(), None);
        assert_eq!(k.ready_lists().at_priority(2), vec![a, b]);
    }

    #[test]
    fn unknown_task_id_is_a_lookup_error() {
        let mut k: Kernel<()> = Kernel::new();
        let err = k.suspend_task(TaskId(7)).unwrap_err();
        assert_eq!(err, KernelError::UnknownTask(TaskId(7)));
    }

    #[test]
    fn suspended_task_never_runs_until_resumed() {
        let mut k: Kernel<()> = Kernel::new();
        let a = k.spawn_task("A", 2, idle_step).unwrap();
        k.suspend_task(a).unwrap();
        for _ in 0..100 {
            assert_eq!(k.advance_tick(&mut ()).ran, None);
        }
        k.resume_task(a).unwrap();
        assert_eq!(k.advance_tick(&mut ()).ran, Some(a));
    }

    #[test]
    fn watchdog_boundary_is_exact() {
        let mut w = Watchdog::new(WATCHDOG_TIMEOUT_TICKS);
        w.kick(0);
        assert!(!w.check(7_999));
        assert!(w.check(8_000));
    }

    #[test]
    fn watchdog_kicked_every_tick_never_expires_over_24h() {
        let mut w = Watchdog::new(WATCHDOG_TIMEOUT_TICKS);
        for now in 0..(24 * 3600 * TICKS_PER_SEC) {
            assert!(!w.check(now));
            w.kick(now);
        }
    }

    #[test]
    fn watchdog_expiry_event_fires_once_at_timeout() {
        let mut k: Kernel<()> = Kernel::new();
        let mut expiries = Vec::new();
        for _ in 0..WATCHDOG_TIMEOUT_TICKS + 100 {
            let outcome = k.advance_tick(&mut ());
            if outcome.events.contains(&KernelEvent::WatchdogExpired) {
                expiries.push(outcome.now);
            }
        }
        assert_eq!(expiries, vec![WATCHDOG_TIMEOUT_TICKS]);
        assert!(k.watchdog().expired);
    }

    #[test]
    fn watchdog_expiry_matches_arbitrary_kick_schedules() {
        // Oracle: expiry tick is last kick + timeout, for random kick gaps.
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let mut k: Kernel<()> = Kernel::new();
            let mut last_kick = 0u64;
            let mut expected: Option<Tick> = None;
            let mut observed: Option<Tick> = None;
            let mut next_kick = 1 + rng.gen_range(0..6000);
            for _ in 0..40_000u64 {
                let outcome = k.advance_tick(&mut ());
                let now = outcome.now;
                if outcome.events.contains(&KernelEvent::WatchdogExpired) {
                    observed = Some(now);
                    break;
                }
                if now == next_kick {
                    k.kick_watchdog();
                    last_kick = now;
                    next_kick = now + 1 + rng.gen_range(0..12_000);
                }
                if expected.is_none() && now + 1 - last_kick >= WATCHDOG_TIMEOUT_TICKS {
                    expected = Some(now + 1);
                }
            }
            if let Some(exp) = expected {
                assert_eq!(observed, Some(exp));
                assert_eq!(exp, last_kick + WATCHDOG_TIMEOUT_TICKS);
            }
        }
    }

    #[test]
    fn step_requests_apply_after_slice() {
        let mut k: Kernel<Vec<Tick>> = Kernel::new();
        let a = k
            .spawn_task("A", 2, |log: &mut Vec<Tick>, api: &mut TaskApi| {
                log.push(api.now);
                api.delay_ms(10);
            })
            .unwrap();
        let mut log = Vec::new();
        for _ in 0..25 {
            k.advance_tick(&mut log);
        }
        assert_eq!(log, vec![1, 11, 21]);
        assert_eq!(k.task_state(a), TaskState::Blocked);
    }

    #[test]
    fn invalid_request_from_step_becomes_fault_event() {
        let mut k: Kernel<()> = Kernel::new();
        let _a = k
            .spawn_task("A", 2, |_: &mut (), api: &mut TaskApi| {
                let me = api.task_id;
                api.suspend(me);
                api.delay_ms(5); // now suspended: invalid
            })
            .unwrap();
        let outcome = k.advance_tick(&mut ());
        assert!(outcome
            .events
            .iter()
            .any(|e| matches!(e, KernelEvent::Fault(_))));
        assert_eq!(k.task_state(TaskId(0)), TaskState::Suspended);
    }

    #[test]
    fn task_switch_events_on_change_only() {
        let mut k: Kernel<()> = Kernel::new();
        let a = k.spawn_task("A", 2, idle_step).unwrap();
        let o1 = k.advance_tick(&mut ());
        assert_eq!(o1.events, vec![KernelEvent::TaskSwitch(Some(a))]);
        let o2 = k.advance_tick(&mut ());
        assert!(o2.events.is_empty());
    }

    #[test]
    fn reset_after_watchdog_rearms_and_readies_all() {
        let mut k: Kernel<()> = Kernel::new();
        let a = k.spawn_task("A", 2, idle_step).unwrap();
        k.suspend_task(a).unwrap();
        for _ in 0..WATCHDOG_TIMEOUT_TICKS {
            k.advance_tick(&mut ());
        }
        assert!(k.watchdog().expired);
        k.reset_after_watchdog();
        assert!(!k.watchdog().expired);
        assert_eq!(k.task_state(a), TaskState::Ready);
        assert_eq!(k.advance_tick(&mut ()).ran, Some(a));
    }
}
