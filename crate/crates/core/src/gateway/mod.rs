//! CAN-to-NDN bridging: frame naming, the Data content codec, the producer
//! and consumer halves of a gateway, and latency statistics.

pub mod codec;
mod consumer;
pub mod naming;
mod producer;
mod stats;

pub use codec::{decode_frame, encode_frame, CodecError};
pub use consumer::{Consumer, ConsumerAction, ConsumerConfig, ConsumerCounters, DataOutcome, Subscription};
pub use naming::{aid_seq_name, default_prefix, frame_to_name, parse_name, NameError};
pub use producer::{FrameOutcome, Producer, ProducerConfig, ProducerCounters, ProducerMode, ProducerReply};
pub use stats::{quantize, InsufficientSamples, LatencyStats, LatencySummary, COST_QUANTUM_US, MIN_LATENCY_SAMPLES};

use serde::Serialize;

/// Latency of one mode/signing cell, in seconds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LatencyCell {
    pub mode: ProducerMode,
    pub signing: bool,
    pub producer: LatencySummary,
    pub consumer: LatencySummary,
}

/// Summarizes one run's producer and consumer timings, refusing cells
/// with fewer than [`MIN_LATENCY_SAMPLES`] samples.
pub fn measure_latency(producer: &Producer, consumer: &Consumer) -> Result<LatencyCell, InsufficientSamples> {
    Ok(LatencyCell {
        mode: producer.mode(),
        signing: producer.signing(),
        producer: producer.create_stats().measure()?,
        consumer: consumer.latency().measure()?,
    })
}
