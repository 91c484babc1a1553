use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use super::{EventCounts, SimConfig};
use crate::error::{Error, Result};
use crate::models::{Primitive, NUM_STATES};
use crate::shs::{RateSymbol, ShsModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Event {
    LocationArrival,
    AppArrival,
    WriteDone(u64),
    ReadDone(u64),
}

impl Event {
    fn symbol(&self) -> RateSymbol {
        match self {
            Event::LocationArrival => RateSymbol::LambdaHat,
            Event::AppArrival => RateSymbol::Lambda,
            Event::WriteDone(_) => RateSymbol::MuHat,
            Event::ReadDone(_) => RateSymbol::Mu,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Scheduled {
    time: f64,
    seq: u64,
    event: Event,
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Scheduled {}

impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scheduled {
    // Reversed so that BinaryHeap pops the earliest (time, seq) first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// A location update handed to the writer.
#[derive(Debug, Clone, Copy)]
struct LocationPayload {
    version: u64,
    generated: f64,
}

#[derive(Debug, Clone, Copy)]
struct ActiveRead {
    /// Arrival time of the app update the read will address.
    payload: f64,
    /// FIB version captured at read start (RCU only; RWL reads the live FIB).
    snapshot: Option<u64>,
}

/// Physical state of the forwarder. Ages are derived from the timestamps:
/// `x̂0 = t − mobile_ts`, `x̂1 = t − fib_ts`, `x0 = t − app_ts`,
/// `x1 = t − delivered_ts`.
#[derive(Debug, Clone)]
struct Forwarder {
    primitive: Primitive,
    preemptive: bool,
    mobile_version: u64,
    mobile_ts: f64,
    fib_version: u64,
    fib_ts: f64,
    writing: Option<LocationPayload>,
    writer_pending: Option<LocationPayload>,
    reading: Option<ActiveRead>,
    /// Arrival time of an app update waiting for the read lock (RWL only).
    reader_pending: Option<f64>,
    app_ts: f64,
    delivered_ts: f64,
}

impl Forwarder {
    fn new(primitive: Primitive, preemptive: bool) -> Self {
        Self {
            primitive,
            preemptive,
            mobile_version: 0,
            mobile_ts: 0.0,
            fib_version: 0,
            fib_ts: 0.0,
            writing: None,
            writer_pending: None,
            reading: None,
            reader_pending: None,
            app_ts: 0.0,
            delivered_ts: 0.0,
        }
    }

    /// Discrete state of the SHS chain induced by the physical state.
    fn classify(&self) -> usize {
        match self.primitive {
            Primitive::Rcu => match (&self.writing, &self.reading) {
                (None, None) => 0,
                (Some(_), None) => 1,
                (Some(_), Some(_)) => 2,
                (None, Some(read)) if read.snapshot == Some(self.mobile_version) => 3,
                (None, Some(_)) => 4,
            },
            Primitive::Rwl => {
                if self.writing.is_some() {
                    if self.reader_pending.is_some() {
                        2
                    } else {
                        1
                    }
                } else if self.reading.is_some() {
                    if self.writer_pending.is_some() {
                        4
                    } else {
                        3
                    }
                } else {
                    0
                }
            }
        }
    }

    fn app_ages(&self, now: f64) -> [f64; 2] {
        [now - self.app_ts, now - self.delivered_ts]
    }

    fn location_ages(&self, now: f64) -> [f64; 2] {
        [now - self.mobile_ts, now - self.fib_ts]
    }

    fn check_invariants(&self, now: f64) -> Result<()> {
        let fail = |what: &str| {
            Err(Error::SimInvariant {
                time: now,
                what: what.to_string(),
            })
        };
        if self.fib_version > self.mobile_version {
            return fail("FIB holds a version newer than the mobile's");
        }
        if self.primitive == Primitive::Rwl && self.writing.is_some() && self.reading.is_some() {
            return fail("RWL reader and writer are active together");
        }
        if self.primitive == Primitive::Rcu
            && (self.writer_pending.is_some() || self.reader_pending.is_some())
        {
            return fail("RCU never queues reads or writes");
        }
        if self.writing.is_none() && self.writer_pending.is_none() && self.fib_version != self.mobile_version
        {
            return fail("idle writer with an outdated FIB");
        }
        Ok(())
    }
}

/// Time-weighted accumulators for one batch.
#[derive(Debug, Clone, Default)]
pub(super) struct BatchTotals {
    pub area_app: f64,
    pub area_location: f64,
    pub state_time: [f64; NUM_STATES],
    pub app_arrivals: u64,
    pub app_delivered: u64,
}

#[derive(Debug)]
pub(super) struct RunOutput {
    pub batches: Vec<BatchTotals>,
    pub batch_len: f64,
    pub counts: EventCounts,
    pub transition_counts: BTreeMap<u32, u64>,
}

struct Recorder {
    start: f64,
    end: f64,
    batch_len: f64,
    batches: Vec<BatchTotals>,
}

impl Recorder {
    fn batch_index(&self, t: f64) -> Option<usize> {
        if t < self.start || t >= self.end {
            return None;
        }
        let i = ((t - self.start) / self.batch_len) as usize;
        Some(i.min(self.batches.len() - 1))
    }

    /// Integrates the sawtooth ages over `[t0, t1)` in `state`; both ages grow
    /// at unit rate, so the area is exact.
    fn integrate(&mut self, t0: f64, t1: f64, state: usize, delivered_ts: f64, fib_ts: f64) {
        let mut a = t0.max(self.start);
        let b = t1.min(self.end);
        while a < b {
            let i = self.batch_index(a).expect("inside the recorded window");
            let batch_end = if i + 1 == self.batches.len() {
                self.end
            } else {
                self.start + (i + 1) as f64 * self.batch_len
            };
            let seg_end = b.min(batch_end);
            if seg_end <= a {
                // Rounding put `a` exactly on a boundary owned by the next batch.
                break;
            }
            let width = seg_end - a;
            let mid = 0.5 * (a + seg_end);
            let totals = &mut self.batches[i];
            totals.area_app += width * (mid - delivered_ts);
            totals.area_location += width * (mid - fib_ts);
            totals.state_time[state] += width;
            a = seg_end;
        }
    }
}

fn approx_eq(x: [f64; 2], y: [f64; 2]) -> bool {
    x.iter()
        .zip(&y)
        .all(|(a, b)| (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs())))
}

pub(super) struct Simulator<'m> {
    config: SimConfig,
    model: &'m ShsModel,
    rng: ChaCha8Rng,
    location_gap: Exp<f64>,
    app_gap: Exp<f64>,
    write_time: Exp<f64>,
    read_time: Exp<f64>,
    calendar: BinaryHeap<Scheduled>,
    seq: u64,
    now: f64,
    fwd: Forwarder,
    write_token: u64,
    read_token: u64,
    counts: EventCounts,
    transition_counts: BTreeMap<u32, u64>,
    recorder: Recorder,
}

impl<'m> Simulator<'m> {
    pub fn new(config: SimConfig, model: &'m ShsModel) -> Result<Self> {
        let p = config.params;
        let exp = |rate: f64, name: &str| {
            Exp::new(rate).map_err(|e| Error::InvalidConfig(format!("{name} = {rate}: {e}")))
        };
        let start = config.warmup_fraction * config.horizon;
        let batch_len = (config.horizon - start) / config.batches as f64;
        Ok(Self {
            model,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            location_gap: exp(p.lambda_hat, "lambda_hat")?,
            app_gap: exp(p.lambda, "lambda")?,
            write_time: exp(p.mu_hat, "mu_hat")?,
            read_time: exp(p.mu, "mu")?,
            calendar: BinaryHeap::new(),
            seq: 0,
            now: 0.0,
            fwd: Forwarder::new(config.kind.primitive, config.kind.preemptive),
            write_token: 0,
            read_token: 0,
            counts: EventCounts::default(),
            transition_counts: BTreeMap::new(),
            recorder: Recorder {
                start,
                end: config.horizon,
                batch_len,
                batches: vec![BatchTotals::default(); config.batches],
            },
            config,
        })
    }

    fn schedule(&mut self, delay: f64, event: Event) {
        self.seq += 1;
        self.calendar.push(Scheduled {
            time: self.now + delay,
            seq: self.seq,
            event,
        });
    }

    fn start_write(&mut self, payload: LocationPayload) {
        if self.fwd.writing.is_some() {
            self.counts.writes_preempted += 1;
        }
        self.fwd.writing = Some(payload);
        self.write_token += 1;
        let delay = self.write_time.sample(&mut self.rng);
        self.schedule(delay, Event::WriteDone(self.write_token));
    }

    fn start_read(&mut self, payload: f64) {
        let snapshot = match self.fwd.primitive {
            Primitive::Rcu => Some(self.fwd.fib_version),
            Primitive::Rwl => None,
        };
        self.fwd.reading = Some(ActiveRead { payload, snapshot });
        self.read_token += 1;
        let delay = self.read_time.sample(&mut self.rng);
        self.schedule(delay, Event::ReadDone(self.read_token));
    }

    fn on_location_arrival(&mut self) {
        self.counts.location_arrivals += 1;
        self.fwd.mobile_version += 1;
        self.fwd.mobile_ts = self.now;
        let payload = LocationPayload {
            version: self.fwd.mobile_version,
            generated: self.now,
        };
        let blocked = self.fwd.primitive == Primitive::Rwl && self.fwd.reading.is_some();
        if blocked {
            self.fwd.writer_pending = Some(payload);
        } else {
            self.start_write(payload);
        }
        let gap = self.location_gap.sample(&mut self.rng);
        self.schedule(gap, Event::LocationArrival);
    }

    /// Returns false when the arrival was discarded.
    fn on_app_arrival(&mut self) -> bool {
        self.counts.app_arrivals += 1;
        if let Some(i) = self.recorder.batch_index(self.now) {
            self.recorder.batches[i].app_arrivals += 1;
        }
        let now = self.now;
        let accepted = if let Some(read) = self.fwd.reading.as_mut() {
            // Reader busy: the fresher update takes over the in-flight read.
            if self.fwd.preemptive {
                read.payload = now;
                self.counts.app_preempted += 1;
                true
            } else {
                false
            }
        } else if self.fwd.writing.is_some() && self.fwd.primitive == Primitive::Rwl {
            // Write lock held: wait for the read lock.
            match self.fwd.reader_pending {
                Some(_) if !self.fwd.preemptive => false,
                Some(_) => {
                    self.counts.app_preempted += 1;
                    self.fwd.reader_pending = Some(now);
                    true
                }
                None => {
                    self.fwd.reader_pending = Some(now);
                    true
                }
            }
        } else {
            self.start_read(now);
            true
        };
        if accepted {
            self.fwd.app_ts = now;
        } else {
            self.counts.app_discarded += 1;
        }
        let gap = self.app_gap.sample(&mut self.rng);
        self.schedule(gap, Event::AppArrival);
        accepted
    }

    fn on_write_done(&mut self) -> Result<()> {
        let payload = self.fwd.writing.take().expect("write completion without a write");
        if payload.generated < self.fwd.fib_ts {
            return Err(Error::SimInvariant {
                time: self.now,
                what: "FIB timestamp moved backwards".into(),
            });
        }
        self.fwd.fib_version = payload.version;
        self.fwd.fib_ts = payload.generated;
        self.counts.writes_completed += 1;
        if let Some(app) = self.fwd.reader_pending.take() {
            self.start_read(app);
        }
        Ok(())
    }

    fn on_read_done(&mut self) -> Result<()> {
        let read = self.fwd.reading.take().expect("read completion without a read");
        self.counts.reads_completed += 1;
        let address = read.snapshot.unwrap_or(self.fwd.fib_version);
        if address == self.fwd.mobile_version {
            if read.payload < self.fwd.delivered_ts {
                return Err(Error::SimInvariant {
                    time: self.now,
                    what: "delivered an app update older than the last delivery".into(),
                });
            }
            self.fwd.delivered_ts = read.payload;
            self.counts.app_delivered += 1;
            if let Some(i) = self.recorder.batch_index(read.payload) {
                self.recorder.batches[i].app_delivered += 1;
            }
        } else {
            self.counts.app_misaddressed += 1;
        }
        if let Some(payload) = self.fwd.writer_pending.take() {
            self.start_write(payload);
        }
        Ok(())
    }

    /// Finds the table transition matching the observed state change and age
    /// resets.
    fn match_transition(
        &self,
        from: usize,
        symbol: RateSymbol,
        to: usize,
        before: ([f64; 2], [f64; 2]),
        after: ([f64; 2], [f64; 2]),
    ) -> Result<u32> {
        self.model
            .transitions
            .iter()
            .find(|t| {
                t.from == from
                    && t.to == to
                    && t.rate == symbol
                    && approx_eq(t.reset_app.apply(before.0), after.0)
                    && approx_eq(t.reset_loc.apply(before.1), after.1)
            })
            .map(|t| t.id)
            .ok_or_else(|| Error::UnlistedTransition {
                model: self.model.name.clone(),
                from,
                to,
                symbol,
                time: self.now,
            })
    }

    pub fn run(mut self) -> Result<RunOutput> {
        let gap = self.location_gap.sample(&mut self.rng);
        self.schedule(gap, Event::LocationArrival);
        let gap = self.app_gap.sample(&mut self.rng);
        self.schedule(gap, Event::AppArrival);

        let horizon = self.config.horizon;
        while let Some(next) = self.calendar.pop() {
            let stale = match next.event {
                Event::WriteDone(token) => token != self.write_token || self.fwd.writing.is_none(),
                Event::ReadDone(token) => token != self.read_token || self.fwd.reading.is_none(),
                _ => false,
            };
            if stale {
                continue;
            }
            let t = next.time.min(horizon);
            let state = self.fwd.classify();
            self.recorder
                .integrate(self.now, t, state, self.fwd.delivered_ts, self.fwd.fib_ts);
            self.now = t;
            if next.time > horizon {
                break;
            }

            let before = (self.fwd.app_ages(t), self.fwd.location_ages(t));
            let changed = match next.event {
                Event::LocationArrival => {
                    self.on_location_arrival();
                    true
                }
                Event::AppArrival => self.on_app_arrival(),
                Event::WriteDone(_) => {
                    self.on_write_done()?;
                    true
                }
                Event::ReadDone(_) => {
                    self.on_read_done()?;
                    true
                }
            };
            self.fwd.check_invariants(t)?;
            let post = self.fwd.classify();
            let after = (self.fwd.app_ages(t), self.fwd.location_ages(t));
            if changed {
                self.counts.transitions += 1;
                let id = self.match_transition(state, next.event.symbol(), post, before, after)?;
                *self.transition_counts.entry(id).or_default() += 1;
            } else if post != state || !approx_eq(before.0, after.0) || !approx_eq(before.1, after.1)
            {
                return Err(Error::SimInvariant {
                    time: t,
                    what: "a discarded arrival changed the state".into(),
                });
            }
        }

        Ok(RunOutput {
            batch_len: self.recorder.batch_len,
            batches: self.recorder.batches,
            counts: self.counts,
            transition_counts: self.transition_counts,
        })
    }
}
