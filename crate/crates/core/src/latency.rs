//! Classical-control latency: the Processor pipeline, per-protocol budgets
//! and an event timeline of the decoding sequence.

use std::cmp::Ordering;
use std::fmt;
use std::io::{self, Write};

use crate::device::DeviceParams;
use crate::protocol::ProtocolKind;

/// Processor aggregation and forwarding of one REC cycle's syndrome.
pub const REC_FEEDBACK_NS: u64 = 400;
/// Conditional correction and ancilla reset pulses of one REC cycle.
pub const REC_CORRECTION_RESET_NS: u64 = 160;
/// Corrective X gates after a decoder call (three simultaneous slots).
pub const CORRECTIVE_GATES_NS: u64 = 120;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Actor {
    Processor,
    Receiver,
    PulseSequencer,
}

impl fmt::Display for Actor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Processor => "Processor",
            Self::Receiver => "Receiver",
            Self::PulseSequencer => "PulseSequencer",
        })
    }
}

/// One stage of the path from state assignment to a played pulse.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PipelineStep {
    pub name: String,
    pub actor: Actor,
    pub duration_ns: u64,
}

const DEFAULT_STAGES: [(&str, Actor, u64); 6] = [
    ("Receiver to Processor interface", Actor::Receiver, 20),
    ("Measurement storage in RAM", Actor::Processor, 50),
    (
        "Engine initialization and calculation",
        Actor::Processor,
        150,
    ),
    (
        "Processor to PS module interface (8 bytes)",
        Actor::Processor,
        210,
    ),
    (
        "PS branching and waveform preparation",
        Actor::PulseSequencer,
        130,
    ),
    ("DAC output", Actor::PulseSequencer, 30),
];

/// The measured pipeline, 590 ns in total.
pub fn default_pipeline() -> Vec<PipelineStep> {
    pipeline_with_durations(DEFAULT_STAGES.map(|(_, _, d)| d))
}

/// The six pipeline stages with custom durations.
pub fn pipeline_with_durations(durations: [u64; 6]) -> Vec<PipelineStep> {
    DEFAULT_STAGES
        .iter()
        .zip(durations)
        .map(|(&(name, actor, _), duration_ns)| PipelineStep {
            name: name.to_string(),
            actor,
            duration_ns,
        })
        .collect()
}

/// Time from state assignment to the pulse emitted on the Processor's result.
/// An empty table falls back to the default pipeline.
pub fn processor_roundtrip(steps: &[PipelineStep]) -> u64 {
    if steps.is_empty() {
        return processor_roundtrip(&default_pipeline());
    }
    steps.iter().map(|s| s.duration_ns).sum()
}

/// Fixed latency, where `Offline` marks post-processing on the measurement
/// computer (over 1 ms) and orders after every finite value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FixedLatency {
    Ns(u64),
    Offline,
}

impl Ord for FixedLatency {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Self::Ns(a), Self::Ns(b)) => a.cmp(b),
            (Self::Ns(_), Self::Offline) => Ordering::Less,
            (Self::Offline, Self::Ns(_)) => Ordering::Greater,
            (Self::Offline, Self::Offline) => Ordering::Equal,
        }
    }
}

impl PartialOrd for FixedLatency {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for FixedLatency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Ns(v) => write!(f, "{v}"),
            Self::Offline => f.write_str("offline (>1e6)"),
        }
    }
}

/// Latency added on top of the uncorrected protocol.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct LatencyBudget {
    pub per_cycle: u64,
    pub fixed: FixedLatency,
}

impl LatencyBudget {
    /// Latency the control hardware adds in real time for `n` cycles;
    /// offline processing is not part of it.
    pub fn realtime_total(&self, n: usize) -> u64 {
        let fixed = match self.fixed {
            FixedLatency::Ns(v) => v,
            FixedLatency::Offline => 0,
        };
        self.per_cycle * n as u64 + fixed
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimelineEvent {
    /// Position in the decoding sequence, 1 to 16.
    pub step_id: u8,
    pub actor: Actor,
    pub name: String,
    pub start_ns: f64,
    pub end_ns: f64,
}

/// Latency accounting for a given Processor pipeline.
#[derive(Clone, Debug)]
pub struct LatencyModel {
    steps: Vec<PipelineStep>,
}

impl Default for LatencyModel {
    fn default() -> Self {
        Self {
            steps: default_pipeline(),
        }
    }
}

impl LatencyModel {
    pub fn with_durations(durations: [u64; 6]) -> Self {
        Self {
            steps: pipeline_with_durations(durations),
        }
    }

    pub fn steps(&self) -> &[PipelineStep] {
        &self.steps
    }

    pub fn roundtrip(&self) -> u64 {
        processor_roundtrip(&self.steps)
    }

    /// Closed-form budget per protocol.
    pub fn protocol_latency(&self, p: ProtocolKind) -> LatencyBudget {
        let engine = self.roundtrip();
        match p {
            ProtocolKind::Rec => LatencyBudget {
                per_cycle: REC_FEEDBACK_NS + REC_CORRECTION_RESET_NS,
                fixed: FixedLatency::Offline,
            },
            // one engine call to decode, one for the majority, plus gates
            ProtocolKind::Dec => LatencyBudget {
                per_cycle: 0,
                fixed: FixedLatency::Ns(2 * engine + CORRECTIVE_GATES_NS),
            },
            ProtocolKind::DecPfu => LatencyBudget {
                per_cycle: 0,
                fixed: FixedLatency::Ns(2 * engine),
            },
            ProtocolKind::Uncorrected | ProtocolKind::PostProcessed | ProtocolKind::FreeDecay => {
                LatencyBudget {
                    per_cycle: 0,
                    fixed: FixedLatency::Offline,
                }
            }
        }
    }

    /// Event sequence of an `n`-cycle run, sorted by start time.
    ///
    /// Cycles are the entangling gates and ancilla readout, separated by
    /// cavity depletion; the run ends with the data readout and, for the
    /// decoding protocols, the majority engine call. Syndrome storage of a
    /// cycle overlaps the next one.
    pub fn build_timeline(
        &self,
        p: ProtocolKind,
        n: usize,
        params: &DeviceParams,
    ) -> Vec<TimelineEvent> {
        let mut tl = Timeline::default();
        let decoding = matches!(p, ProtocolKind::Dec | ProtocolKind::DecPfu);
        if decoding {
            tl.instant(1, Actor::Processor, "Initialize decoder", 0.0);
        }

        let mut now = 0.0;
        if p == ProtocolKind::FreeDecay {
            let span = n as f64 * (params.tau1() + params.tau2() + params.t_m)
                + n.saturating_sub(1) as f64 * params.t_depl;
            now = tl.push(2, Actor::PulseSequencer, "Idle (equal duration)", now, span);
        } else {
            for k in 0..n {
                now = tl.push(
                    2,
                    Actor::PulseSequencer,
                    "Entangling gates",
                    now,
                    params.tau1() + params.tau2(),
                );
                now = tl.push(
                    3,
                    Actor::PulseSequencer,
                    "Ancilla measurement",
                    now,
                    params.t_m,
                );
                let last = k + 1 == n;
                if decoding {
                    let stored = self.storage(&mut tl, 4, now);
                    if last {
                        now = self.decode_chain(&mut tl, stored, p == ProtocolKind::Dec);
                    }
                } else if p == ProtocolKind::Rec {
                    now = tl.push(
                        8,
                        Actor::Processor,
                        "Aggregate syndrome and forward",
                        now,
                        REC_FEEDBACK_NS as f64,
                    );
                    now = tl.push(
                        9,
                        Actor::PulseSequencer,
                        "Correction and ancilla reset",
                        now,
                        REC_CORRECTION_RESET_NS as f64,
                    );
                }
                if !last {
                    now = tl.push(
                        3,
                        Actor::PulseSequencer,
                        "Cavity depletion",
                        now,
                        params.t_depl,
                    );
                }
            }
        }

        if decoding {
            tl.instant(10, Actor::Processor, "Initialize majority", now);
        }
        now = tl.push(
            11,
            Actor::PulseSequencer,
            "Data measurement",
            now,
            params.t_m,
        );
        if decoding {
            let stored = self.storage(&mut tl, 12, now);
            tl.instant(13, Actor::Processor, "Load data bits", stored);
            let s = &self.steps;
            let mut t = tl.push(14, s[2].actor, &s[2].name, stored, s[2].duration_ns as f64);
            t = tl.push(15, s[3].actor, &s[3].name, t, s[3].duration_ns as f64);
            for step in &s[4..] {
                t = tl.push(16, step.actor, &step.name, t, step.duration_ns as f64);
            }
        }
        tl.finish()
    }

    /// Receiver link and RAM storage after an assignment; returns the time
    /// the result is stored.
    fn storage(&self, tl: &mut Timeline, step_id: u8, at: f64) -> f64 {
        self.steps[..2].iter().fold(at, |t, s| {
            tl.push(step_id, s.actor, &s.name, t, s.duration_ns as f64)
        })
    }

    /// Decoder engine call through to the played corrections; returns when
    /// the data readout may start.
    fn decode_chain(&self, tl: &mut Timeline, stored: f64, active: bool) -> f64 {
        let s = &self.steps;
        tl.instant(6, Actor::Processor, "Load stored syndromes", stored);
        let mut t = tl.push(7, s[2].actor, &s[2].name, stored, s[2].duration_ns as f64);
        t = tl.push(8, s[3].actor, &s[3].name, t, s[3].duration_ns as f64);
        for step in &s[4..] {
            t = tl.push(9, step.actor, &step.name, t, step.duration_ns as f64);
        }
        if active {
            t = tl.push(
                9,
                Actor::PulseSequencer,
                "Corrective X gates",
                t,
                CORRECTIVE_GATES_NS as f64,
            );
        }
        t
    }
}

#[derive(Default)]
struct Timeline {
    events: Vec<TimelineEvent>,
}

impl Timeline {
    fn push(&mut self, step_id: u8, actor: Actor, name: &str, start: f64, duration: f64) -> f64 {
        let end = start + duration;
        self.events.push(TimelineEvent {
            step_id,
            actor,
            name: name.to_string(),
            start_ns: start,
            end_ns: end,
        });
        end
    }

    fn instant(&mut self, step_id: u8, actor: Actor, name: &str, at: f64) {
        self.push(step_id, actor, name, at, 0.0);
    }

    fn finish(mut self) -> Vec<TimelineEvent> {
        self.events
            .sort_by(|a, b| a.start_ns.total_cmp(&b.start_ns));
        self.events
    }
}

/// End time of the last event.
pub fn timeline_end(events: &[TimelineEvent]) -> f64 {
    events.iter().map(|e| e.end_ns).fold(0.0, f64::max)
}

/// Real-time latency a protocol's timeline adds over the uncorrected run.
pub fn added_latency(
    model: &LatencyModel,
    p: ProtocolKind,
    n: usize,
    params: &DeviceParams,
) -> f64 {
    let base = timeline_end(&model.build_timeline(ProtocolKind::Uncorrected, n, params));
    timeline_end(&model.build_timeline(p, n, params)) - base
}

/// CSV with columns `step_id,actor,name,start_ns,end_ns`.
pub fn write_timeline_csv<W: Write>(events: &[TimelineEvent], mut out: W) -> io::Result<()> {
    writeln!(out, "step_id,actor,name,start_ns,end_ns")?;
    for e in events {
        writeln!(
            out,
            "{},{},\"{}\",{},{}",
            e.step_id, e.actor, e.name, e.start_ns, e.end_ns
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_pipeline_sums_to_590() {
        let steps = default_pipeline();
        let durations: Vec<u64> = steps.iter().map(|s| s.duration_ns).collect();
        assert_eq!(durations, [20, 50, 150, 210, 130, 30]);
        assert_eq!(processor_roundtrip(&steps), 590);
        assert_eq!(processor_roundtrip(&[]), 590);
        let zero = PipelineStep {
            name: "noop".into(),
            actor: Actor::Processor,
            duration_ns: 0,
        };
        assert_eq!(processor_roundtrip(&[zero]), 0);
    }

    #[test]
    fn protocol_budgets() {
        let m = LatencyModel::default();
        let rec = m.protocol_latency(ProtocolKind::Rec);
        assert_eq!(rec.per_cycle, 560);
        assert_eq!(rec.fixed, FixedLatency::Offline);
        let dec = m.protocol_latency(ProtocolKind::Dec);
        assert_eq!((dec.per_cycle, dec.fixed), (0, FixedLatency::Ns(1300)));
        let pfu = m.protocol_latency(ProtocolKind::DecPfu);
        assert_eq!((pfu.per_cycle, pfu.fixed), (0, FixedLatency::Ns(1180)));
        assert_eq!(m.protocol_latency(ProtocolKind::Uncorrected).per_cycle, 0);
    }

    #[test]
    fn custom_pipeline_recomposes() {
        let m = LatencyModel::with_durations([100, 100, 200, 200, 70, 30]);
        assert_eq!(m.roundtrip(), 700);
        assert_eq!(
            m.protocol_latency(ProtocolKind::Dec).fixed,
            FixedLatency::Ns(1520)
        );
    }

    #[test]
    fn offline_orders_last() {
        assert!(FixedLatency::Offline > FixedLatency::Ns(u64::MAX));
        assert!(FixedLatency::Ns(1180) < FixedLatency::Ns(1300));
    }

    #[test]
    fn dec_corrections_start_590_after_assignment() {
        let params = DeviceParams::table_s1();
        let events = LatencyModel::default().build_timeline(ProtocolKind::Dec, 2, &params);
        let last_assignment = events
            .iter()
            .filter(|e| e.name == "Ancilla measurement")
            .map(|e| e.end_ns)
            .fold(0.0, f64::max);
        let engine = events
            .iter()
            .find(|e| e.step_id == 7)
            .expect("decoder engine event");
        assert_eq!(engine.start_ns, last_assignment + 70.0);
        let gates = events
            .iter()
            .find(|e| e.name == "Corrective X gates")
            .unwrap();
        assert_eq!(gates.start_ns, last_assignment + 590.0);
    }

    #[test]
    fn rec_inserts_feedback_every_cycle() {
        let params = DeviceParams::table_s1();
        let events = LatencyModel::default().build_timeline(ProtocolKind::Rec, 3, &params);
        let inserts: Vec<&TimelineEvent> = events.iter().filter(|e| e.step_id == 8).collect();
        assert_eq!(inserts.len(), 3);
        for e in &inserts {
            let next = events
                .iter()
                .find(|x| x.step_id == 9 && x.start_ns == e.end_ns)
                .unwrap();
            assert_eq!(next.end_ns - e.start_ns, 560.0);
        }
    }

    #[test]
    fn uncorrected_has_no_classical_events() {
        let params = DeviceParams::table_s1();
        for n in 1..=8 {
            let events =
                LatencyModel::default().build_timeline(ProtocolKind::Uncorrected, n, &params);
            assert!(events.iter().all(|e| matches!(e.step_id, 2 | 3 | 11)));
        }
    }

    #[test]
    fn timeline_matches_closed_forms() {
        let params = DeviceParams::table_s1();
        for model in [
            LatencyModel::default(),
            LatencyModel::with_durations([1, 2, 3, 4, 5, 6]),
        ] {
            for p in ProtocolKind::ALL {
                for n in 1..=8 {
                    let added = added_latency(&model, p, n, &params);
                    let closed = model.protocol_latency(p).realtime_total(n);
                    assert_eq!(added, closed as f64, "{p} n={n}");
                }
            }
        }
    }

    #[test]
    fn events_are_well_formed() {
        let params = DeviceParams::table_s1();
        for p in ProtocolKind::ALL {
            let events = LatencyModel::default().build_timeline(p, 4, &params);
            assert!(events
                .iter()
                .all(|e| e.end_ns >= e.start_ns && (1..=16).contains(&e.step_id)));
            assert!(events.windows(2).all(|w| w[0].start_ns <= w[1].start_ns));
        }
    }

    #[test]
    fn csv_export() {
        let params = DeviceParams::table_s1();
        let events = LatencyModel::default().build_timeline(ProtocolKind::Dec, 2, &params);
        let mut out = Vec::new();
        write_timeline_csv(&events, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("step_id,actor,name,start_ns,end_ns\n"));
        assert_eq!(text.lines().count(), events.len() + 1);
    }
}
