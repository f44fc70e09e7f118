//! Monte Carlo runner.
//!
//! Every round draws from its own counter-based stream keyed by
//! `(seed, round_index)`, so a run is reproducible and independent runs can
//! execute in parallel without changing any result.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::adversary::AttackStrategy;
use crate::driver::{pick_by_uniform, DrawSite, Driver};
use crate::oracle::{mutual_information, InfoError};
use crate::protocol::{run_round, ConfigError, Decoded, EngineError, ModeKind, ProtocolConfig, RoundRecord};
use crate::rational::Rational;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BitSource {
    UniformRandom,
    /// Cycled over message rounds.
    FixedPattern(Vec<u8>),
}

impl BitSource {
    pub fn describe(&self) -> String {
        match self {
            BitSource::UniformRandom => "random".to_string(),
            BitSource::FixedPattern(bits) => {
                let s: String = bits.iter().map(|b| if *b == 0 { '0' } else { '1' }).collect();
                format!("pattern:{s}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunConfig {
    pub protocol: ProtocolConfig,
    pub strategy: AttackStrategy,
    pub rounds: u64,
    pub seed: u64,
    pub bits: BitSource,
    pub stop_on_detection: bool,
}

impl RunConfig {
    pub fn new(protocol: ProtocolConfig, strategy: AttackStrategy, rounds: u64, seed: u64) -> Self {
        RunConfig {
            protocol,
            strategy,
            rounds,
            seed,
            bits: BitSource::UniformRandom,
            stop_on_detection: false,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.protocol.validate()?;
        if self.rounds == 0 {
            return Err(ConfigError::InvalidRun("rounds must be at least 1".into()));
        }
        if let BitSource::FixedPattern(bits) = &self.bits {
            if bits.is_empty() {
                return Err(ConfigError::InvalidRun("bit pattern is empty".into()));
            }
            if bits.iter().any(|b| *b > 1) {
                return Err(ConfigError::InvalidRun("bit pattern may only contain 0 and 1".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("round {round}: {source}")]
    Engine { round: u64, source: EngineError },
}

/// Uniform draws for one round.
pub struct RoundStream(ChaCha8Rng);

impl RoundStream {
    /// A uniform draw in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.0.random::<f64>()
    }
}

/// The stream for `round_index` under `seed`: ChaCha8 keyed by the seed,
/// with the round index selecting the stream.
pub fn substream(seed: u64, round_index: u64) -> RoundStream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(round_index);
    RoundStream(rng)
}

/// Samples every decision of one round. The mode coins and the message-bit
/// draw are taken up front, in that order, whether or not they are used;
/// measurement outcomes follow in the order they are requested.
pub struct SampledDriver {
    stream: RoundStream,
    u_control: f64,
    u_split: f64,
    u_bit: f64,
    pattern_bit: Option<u8>,
}

impl SampledDriver {
    pub fn new(seed: u64, round_index: u64, pattern_bit: Option<u8>) -> Self {
        let mut stream = substream(seed, round_index);
        let u_control = stream.uniform();
        let u_split = stream.uniform();
        let u_bit = stream.uniform();
        SampledDriver {
            stream,
            u_control,
            u_split,
            u_bit,
            pattern_bit,
        }
    }
}

impl Driver for SampledDriver {
    fn coin(&mut self, site: DrawSite, p_true: &Rational) -> bool {
        let u = match site {
            DrawSite::ControlMode => self.u_control,
            DrawSite::ControlSplit => self.u_split,
            _ => self.stream.uniform(),
        };
        u < p_true.to_f64()
    }

    fn message_bit(&mut self) -> u8 {
        self.pattern_bit.unwrap_or((self.u_bit >= 0.5) as u8)
    }

    fn born(&mut self, _site: DrawSite, probs: &[f64]) -> Result<usize, EngineError> {
        let u = self.stream.uniform();
        pick_by_uniform(probs, u)
    }
}

/// Aggregate counters of a run.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunStats {
    pub rounds_executed: u64,
    pub message_rounds: u64,
    pub control_measure_rounds: u64,
    pub control_sendback_rounds: u64,
    pub bit_errors: u64,
    pub anomalies: u64,
    pub detections: u64,
    pub detections_control_measure: u64,
    pub detections_sendback: u64,
    pub stalls: u64,
    pub stalls_message: u64,
    pub stalls_sendback: u64,
    /// 1-based index of the first detected round.
    pub first_detection_round: Option<u64>,
    /// `[alice_bit][decoded_bit]` over message rounds that decoded to a bit.
    pub joint_ab: [[u64; 2]; 2],
    /// `[alice_bit][eve_bit]` over message rounds in which Eve saw a bit.
    pub joint_ae: [[u64; 2]; 2],
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

impl RunStats {
    pub fn record(&mut self, rec: &RoundRecord) {
        self.rounds_executed += 1;
        match rec.mode.kind() {
            ModeKind::Message => self.message_rounds += 1,
            ModeKind::ControlMeasure => self.control_measure_rounds += 1,
            ModeKind::ControlSendBack => self.control_sendback_rounds += 1,
        }
        if let Some(a) = rec.alice_bit {
            match rec.decoded {
                Some(Decoded::Bit(b)) => {
                    self.joint_ab[a as usize][b as usize] += 1;
                    if a != b {
                        self.bit_errors += 1;
                    }
                }
                Some(Decoded::Anomaly) => self.anomalies += 1,
                None => {}
            }
            if let Some(e) = rec.eve_bit() {
                self.joint_ae[a as usize][e as usize] += 1;
            }
        }
        if rec.detected {
            self.detections += 1;
            match rec.mode.kind() {
                ModeKind::ControlMeasure => self.detections_control_measure += 1,
                ModeKind::ControlSendBack => self.detections_sendback += 1,
                ModeKind::Message => {}
            }
            self.first_detection_round.get_or_insert(rec.round_index + 1);
        }
        if rec.stalled {
            self.stalls += 1;
            match rec.mode.kind() {
                ModeKind::Message => self.stalls_message += 1,
                ModeKind::ControlSendBack => self.stalls_sendback += 1,
                ModeKind::ControlMeasure => {}
            }
        }
    }

    pub fn decoded_rounds(&self) -> u64 {
        self.joint_ab.iter().flatten().sum()
    }

    pub fn eve_observations(&self) -> u64 {
        self.joint_ae.iter().flatten().sum()
    }

    /// Bit errors over all message rounds.
    pub fn ber(&self) -> Option<f64> {
        ratio(self.bit_errors, self.message_rounds)
    }

    pub fn detection_rate(&self) -> Option<f64> {
        ratio(self.detections, self.rounds_executed)
    }

    pub fn stall_rate(&self) -> Option<f64> {
        ratio(self.stalls, self.rounds_executed)
    }

    pub fn message_rate(&self) -> Option<f64> {
        ratio(self.message_rounds, self.rounds_executed)
    }

    pub fn control_measure_rate(&self) -> Option<f64> {
        ratio(self.control_measure_rounds, self.rounds_executed)
    }

    pub fn control_sendback_rate(&self) -> Option<f64> {
        ratio(self.control_sendback_rounds, self.rounds_executed)
    }

    pub fn anomaly_rate(&self) -> Option<f64> {
        ratio(self.anomalies, self.message_rounds)
    }

    pub fn conditional_detection_control_measure(&self) -> Option<f64> {
        ratio(self.detections_control_measure, self.control_measure_rounds)
    }

    pub fn conditional_detection_sendback(&self) -> Option<f64> {
        ratio(self.detections_sendback, self.control_sendback_rounds)
    }

    pub fn conditional_stall_message(&self) -> Option<f64> {
        ratio(self.stalls_message, self.message_rounds)
    }

    pub fn conditional_stall_sendback(&self) -> Option<f64> {
        ratio(self.stalls_sendback, self.control_sendback_rounds)
    }

    pub fn eve_agreement(&self) -> Option<f64> {
        ratio(self.joint_ae[0][0] + self.joint_ae[1][1], self.eve_observations())
    }

    /// Plug-in `I(A;B)`; zero when nothing was decoded.
    pub fn mi_ab_bits(&self) -> f64 {
        empirical_mutual_information(&self.joint_ab).unwrap_or(0.0)
    }

    /// Plug-in `I(A;E)`; zero when Eve saw nothing.
    pub fn mi_ae_bits(&self) -> f64 {
        empirical_mutual_information(&self.joint_ae).unwrap_or(0.0)
    }

    pub fn merge(&mut self, other: &RunStats) {
        let offset = self.rounds_executed;
        self.rounds_executed += other.rounds_executed;
        self.message_rounds += other.message_rounds;
        self.control_measure_rounds += other.control_measure_rounds;
        self.control_sendback_rounds += other.control_sendback_rounds;
        self.bit_errors += other.bit_errors;
        self.anomalies += other.anomalies;
        self.detections += other.detections;
        self.detections_control_measure += other.detections_control_measure;
        self.detections_sendback += other.detections_sendback;
        self.stalls += other.stalls;
        self.stalls_message += other.stalls_message;
        self.stalls_sendback += other.stalls_sendback;
        if self.first_detection_round.is_none() {
            self.first_detection_round = other.first_detection_round.map(|r| r + offset);
        }
        for a in 0..2 {
            for b in 0..2 {
                self.joint_ab[a][b] += other.joint_ab[a][b];
                self.joint_ae[a][b] += other.joint_ae[a][b];
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationOutput {
    pub stats: RunStats,
    /// Present when requested.
    pub transcript: Option<Vec<RoundRecord>>,
}

fn execute(config: &RunConfig, keep_transcript: bool, stop_on_abort: bool) -> Result<SimulationOutput, SimError> {
    config.validate()?;
    let mut stats = RunStats::default();
    let mut transcript = keep_transcript.then(Vec::new);
    let mut message_cursor = 0usize;
    for round in 0..config.rounds {
        let pattern_bit = match &config.bits {
            BitSource::UniformRandom => None,
            BitSource::FixedPattern(bits) => Some(bits[message_cursor % bits.len()]),
        };
        let mut driver = SampledDriver::new(config.seed, round, pattern_bit);
        let rec = run_round(&config.protocol, config.strategy, round, &mut driver)
            .map_err(|source| SimError::Engine { round, source })?;
        if rec.mode.kind() == ModeKind::Message {
            message_cursor += 1;
        }
        stats.record(&rec);
        let abort = rec.stalled || (rec.detected && config.stop_on_detection);
        if let Some(t) = transcript.as_mut() {
            t.push(rec);
        }
        if abort && stop_on_abort {
            break;
        }
    }
    Ok(SimulationOutput { stats, transcript })
}

/// Runs the protocol for up to `config.rounds` rounds. A stalled round
/// always ends the run; a detected one ends it when `stop_on_detection`.
pub fn run_simulation(config: &RunConfig, keep_transcript: bool) -> Result<SimulationOutput, SimError> {
    execute(config, keep_transcript, true)
}

/// Executes exactly `config.rounds` rounds, opening a fresh session after
/// every aborted one. Round indices keep counting across sessions, so every
/// round still gets its own stream. Used to estimate per-round rates of
/// strategies that abort the communication quickly.
pub fn run_sessions(config: &RunConfig) -> Result<RunStats, SimError> {
    execute(config, false, false).map(|o| o.stats)
}

/// One run per seed, in parallel; results are returned in seed order and do
/// not depend on the thread count.
pub fn run_seed_sweep(
    config: &RunConfig,
    seeds: impl IntoParallelIterator<Item = u64>,
) -> Result<Vec<RunStats>, SimError> {
    seeds
        .into_par_iter()
        .map(|seed| {
            let cfg = RunConfig { seed, ..config.clone() };
            run_simulation(&cfg, false).map(|o| o.stats)
        })
        .collect()
}

/// Plug-in mutual information of a 2x2 contingency table, in bits.
pub fn empirical_mutual_information(counts: &[[u64; 2]; 2]) -> Result<f64, InfoError> {
    let total: u64 = counts.iter().flatten().sum();
    if total == 0 {
        return Err(InfoError::EmptyCounts);
    }
    let n = total as f64;
    mutual_information(&counts.map(|row| row.map(|c| c as f64 / n)))
}

/// Normal-approximation interval `p ± z sqrt(p(1-p)/n)`, clamped to [0, 1].
pub fn confidence_interval(p_hat: f64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let half = z * (p_hat * (1.0 - p_hat) / n as f64).sqrt();
    ((p_hat - half).max(0.0), (p_hat + half).min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn substreams_are_deterministic_and_distinct() {
        let a: Vec<f64> = {
            let mut s = substream(42, 7);
            (0..8).map(|_| s.uniform()).collect()
        };
        let b: Vec<f64> = {
            let mut s = substream(42, 7);
            (0..8).map(|_| s.uniform()).collect()
        };
        assert_eq!(a, b);
        assert_ne!(substream(42, 0).uniform(), substream(42, 1).uniform());
        assert_ne!(substream(1, 0).uniform(), substream(2, 0).uniform());
    }

    #[test]
    fn substream_mean_is_one_half() {
        let mut s = substream(2024, 0);
        let n = 1_000_000;
        let mean = (0..n).map(|_| s.uniform()).sum::<f64>() / n as f64;
        // 4 sigma of a uniform mean: 4 * sqrt(1/12 / 1e6) ~ 0.00115
        assert!((mean - 0.5).abs() < 0.002, "mean {mean}");
    }

    #[test]
    fn draws_are_in_unit_interval() {
        let mut s = substream(0, 0);
        assert!((0..10_000).map(|_| s.uniform()).all(|u| (0.0..1.0).contains(&u)));
    }

    #[test]
    fn plug_in_mutual_information() {
        assert_eq!(empirical_mutual_information(&[[500, 0], [0, 500]]).unwrap(), 1.0);
        assert_eq!(empirical_mutual_information(&[[250, 250], [250, 250]]).unwrap(), 0.0);
        assert!(matches!(
            empirical_mutual_information(&[[0, 0], [0, 0]]),
            Err(InfoError::EmptyCounts)
        ));
    }

    #[test]
    fn normal_interval() {
        // 0.5 +- 1.96 * 0.05
        let (lo, hi) = confidence_interval(0.5, 100, 1.96);
        assert!((lo - 0.402).abs() < 1e-12 && (hi - 0.598).abs() < 1e-12);
        assert_eq!(confidence_interval(0.0, 10, 1.96), (0.0, 0.0));
        assert_eq!(confidence_interval(1.0, 10, 1.96), (1.0, 1.0));
    }

    #[test]
    fn honest_pattern_run() {
        let mut cfg = RunConfig::new(ProtocolConfig::default(), AttackStrategy::None, 1000, 3);
        cfg.bits = BitSource::FixedPattern(vec![0, 1]);
        let out = run_simulation(&cfg, true).unwrap();
        let s = &out.stats;
        assert_eq!(s.rounds_executed, 1000);
        assert_eq!(s.ber(), Some(0.0));
        assert_eq!(s.detections, 0);
        // H(A) of a near-balanced 0101... pattern
        assert!((s.mi_ab_bits() - 1.0).abs() < 1e-4);
        let transcript = out.transcript.unwrap();
        let bits: Vec<u8> = transcript.iter().filter_map(|r| r.alice_bit).take(6).collect();
        assert_eq!(bits, vec![0, 1, 0, 1, 0, 1]);
    }

    #[test]
    fn invalid_run_configs() {
        let mut cfg = RunConfig::new(ProtocolConfig::default(), AttackStrategy::None, 0, 0);
        assert!(matches!(run_simulation(&cfg, false), Err(SimError::Config(_))));
        cfg.rounds = 5;
        cfg.bits = BitSource::FixedPattern(vec![]);
        assert!(run_simulation(&cfg, false).is_err());
        cfg.bits = BitSource::FixedPattern(vec![2]);
        assert!(run_simulation(&cfg, false).is_err());
    }

    #[test]
    fn stall_terminates_run() {
        let protocol = ProtocolConfig::modified(Rational::half(), Rational::half(), true);
        let cfg = RunConfig::new(protocol, AttackStrategy::HoldUntilAnnounce, 500, 9);
        let s = run_simulation(&cfg, false).unwrap().stats;
        assert_eq!(s.stalls, 1);
        assert!(s.rounds_executed < 500);
        let all = run_sessions(&cfg).unwrap();
        assert_eq!(all.rounds_executed, 500);
        assert!(all.stalls > 1);
    }
}
