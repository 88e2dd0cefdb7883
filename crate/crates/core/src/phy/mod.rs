//! Bits to bits: OOK, TR precoding, channel, noise and energy detection.

mod detect;
mod link;
mod modulation;

pub use detect::{
    ber_theoretical_ook, energy_detect, ook_energy_for_ber, optimize_threshold, q_function, DetectionRecord,
};
pub use link::{
    add_awgn, build_filters, first_peak_time, link_bits, modulate_link, precode_tx, propagate, propagate_noiseless,
    simulate, LinkResult, LinkScenario, LinkSpec, ScenarioResult, BOLTZMANN, DEFAULT_NOISE_TEMPERATURE,
};
pub use modulation::{gen_bits, gen_bits_stream, ook_modulate, BitStream};
