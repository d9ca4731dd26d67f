//! Wireless link model.
//!
//! Each camera streams to the edge server over its own frequency band, so a
//! link is fully described by its bandwidth `B`, transmit power `P_t`,
//! linear channel gain `G` and noise power spectral density `N_0`:
//!
//! ```text
//! SNR = P_t · G / (N_0 · B)          (narrowband AWGN)
//! C   = B · log2(1 + SNR)            (Shannon capacity, bits/s)
//! d_T = D / C                        (transmission delay for D bits)
//! d   = d_T + d_I                    (plus fixed inference delay)
//! ```
//!
//! Channel gains come from a log-distance path-loss model with log-normal
//! shadowing; ambient interference raises the effective noise floor.
//! Packet losses are i.i.d. Bernoulli draws from a seeded process. Gains
//! are kept in linear scale everywhere; dB appears only when converting at
//! the edges of the API.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

/// Speed of light in vacuum, m/s.
const SPEED_OF_LIGHT_M_S: f64 = 2.997_924_58e8;

/// Bits per kilobyte: payload sizes quoted in KB are binary kilobytes
/// (1 KB = 1024 bytes = 8192 bits).
pub const BITS_PER_KB: f64 = 8192.0;

/// Errors from link-parameter validation and delay computation.
#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    /// A parameter that must be strictly positive was not.
    #[error("{name} must be strictly positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    /// A parameter left its documented range.
    #[error("{name} must lie in [{min}, {max}], got {value}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },
    /// A positive payload cannot be delivered over a zero-capacity link.
    #[error("link capacity is zero but payload is {packet_bits} bits")]
    UnreachableLink { packet_bits: f64 },
}

/// Parameters of one camera-to-server link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkParams {
    /// Allocated bandwidth `B`, Hz.
    pub bandwidth_hz: f64,
    /// Transmit power `P_t`, W.
    pub tx_power_w: f64,
    /// Noise power spectral density `N_0`, W/Hz (interference included).
    pub noise_psd_w_per_hz: f64,
    /// Linear (dimensionless) channel gain `G`.
    pub channel_gain: f64,
    /// Fixed per-update inference delay `d_I`, s.
    pub inference_delay_s: f64,
}

impl LinkParams {
    /// Validates the invariants: positive bandwidth, power and noise PSD,
    /// non-negative gain and inference delay.
    pub fn validate(&self) -> Result<(), ChannelError> {
        for (name, value) in [
            ("bandwidth_hz", self.bandwidth_hz),
            ("tx_power_w", self.tx_power_w),
            ("noise_psd_w_per_hz", self.noise_psd_w_per_hz),
        ] {
            if !(value > 0.0) {
                return Err(ChannelError::NonPositive { name, value });
            }
        }
        for (name, value) in [
            ("channel_gain", self.channel_gain),
            ("inference_delay_s", self.inference_delay_s),
        ] {
            if !(value >= 0.0) {
                return Err(ChannelError::OutOfRange {
                    name,
                    value,
                    min: 0.0,
                    max: f64::INFINITY,
                });
            }
        }
        Ok(())
    }

    /// Returns a copy with a different bandwidth (used by grid searches).
    pub fn with_bandwidth(&self, bandwidth_hz: f64) -> Self {
        Self {
            bandwidth_hz,
            ..*self
        }
    }
}

/// Log-distance path-loss and interference environment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathLossConfig {
    /// Carrier frequency, Hz.
    pub carrier_freq_hz: f64,
    /// Path-loss exponent (free space is 2).
    pub path_loss_exponent: f64,
    /// Log-normal shadowing standard deviation, dB.
    pub shadowing_sigma_db: f64,
    /// Reference distance for the log-distance model, m.
    pub reference_distance_m: f64,
    /// Ambient interferer density, devices per 100 m².
    pub interferer_density_per_100m2: f64,
    /// Per-interferer transmit power, W.
    pub interferer_power_w: f64,
    /// Representative interferer distance used by the noise-floor rule, m.
    pub mean_interferer_distance_m: f64,
}

impl Default for PathLossConfig {
    /// 2.4 GHz band, exponent 3.5, 8 dB shadowing, interference off.
    fn default() -> Self {
        Self {
            carrier_freq_hz: 2.4e9,
            path_loss_exponent: 3.5,
            shadowing_sigma_db: 8.0,
            reference_distance_m: 1.0,
            interferer_density_per_100m2: 0.0,
            interferer_power_w: 0.1,
            mean_interferer_distance_m: 20.0,
        }
    }
}

impl PathLossConfig {
    /// Validates exponent ≥ 2, sigma ≥ 0, densities and distances ≥ 0.
    pub fn validate(&self) -> Result<(), ChannelError> {
        if !(self.carrier_freq_hz > 0.0) {
            return Err(ChannelError::NonPositive {
                name: "carrier_freq_hz",
                value: self.carrier_freq_hz,
            });
        }
        if !(self.reference_distance_m > 0.0) {
            return Err(ChannelError::NonPositive {
                name: "reference_distance_m",
                value: self.reference_distance_m,
            });
        }
        if !(self.path_loss_exponent >= 2.0) {
            return Err(ChannelError::OutOfRange {
                name: "path_loss_exponent",
                value: self.path_loss_exponent,
                min: 2.0,
                max: f64::INFINITY,
            });
        }
        for (name, value) in [
            ("shadowing_sigma_db", self.shadowing_sigma_db),
            (
                "interferer_density_per_100m2",
                self.interferer_density_per_100m2,
            ),
            ("interferer_power_w", self.interferer_power_w),
            (
                "mean_interferer_distance_m",
                self.mean_interferer_distance_m,
            ),
        ] {
            if !(value >= 0.0) {
                return Err(ChannelError::OutOfRange {
                    name,
                    value,
                    min: 0.0,
                    max: f64::INFINITY,
                });
            }
        }
        Ok(())
    }

    /// Free-space gain at the reference distance (Friis, unity antennas).
    pub fn reference_gain(&self) -> f64 {
        let wavelength = SPEED_OF_LIGHT_M_S / self.carrier_freq_hz;
        let ratio = wavelength / (4.0 * std::f64::consts::PI * self.reference_distance_m);
        ratio * ratio
    }

    /// Mean (shadowing-free) linear gain at `distance_m`.
    ///
    /// Distances below the reference distance are clamped to it.
    pub fn mean_gain_at(&self, distance_m: f64) -> f64 {
        let d = distance_m.max(self.reference_distance_m);
        self.reference_gain() * (d / self.reference_distance_m).powf(-self.path_loss_exponent)
    }

    /// Aggregate interference power at the receiver, W.
    ///
    /// The paper-level inputs are only a device density and per-device
    /// power, so the combining rule is a declared model: the density count
    /// (per 100 m²) of interferers is placed at the configured mean
    /// distance and their mean-path-loss powers add:
    /// `I = density · P_I · mean_gain(mean_distance)`. Shadowing is not
    /// applied to interferers; the term is a deterministic floor.
    pub fn interference_power_w(&self) -> f64 {
        self.interferer_density_per_100m2
            * self.interferer_power_w
            * self.mean_gain_at(self.mean_interferer_distance_m)
    }

    /// Effective noise PSD: thermal floor plus interference spread over
    /// the receiver bandwidth.
    pub fn effective_noise_psd(&self, thermal_psd_w_per_hz: f64, bandwidth_hz: f64) -> f64 {
        thermal_psd_w_per_hz + self.interference_power_w() / bandwidth_hz
    }
}

/// A sampled channel gain plus a flag recording reference-distance clamping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainSample {
    /// Linear channel gain.
    pub gain: f64,
    /// True when the query distance was below the reference distance and
    /// was clamped to it.
    pub clamped: bool,
}

/// Samples a channel gain at `distance_m`: log-distance path loss plus one
/// log-normal shadowing draw from `rng`.
///
/// Deterministic for a fixed RNG state. Distances below the reference
/// distance are clamped, and the sample is flagged.
pub fn channel_gain_at<R: Rng + ?Sized>(
    distance_m: f64,
    cfg: &PathLossConfig,
    rng: &mut R,
) -> GainSample {
    let clamped = distance_m < cfg.reference_distance_m;
    let mean = cfg.mean_gain_at(distance_m);
    let gain = if cfg.shadowing_sigma_db > 0.0 {
        let normal = Normal::new(0.0, cfg.shadowing_sigma_db).expect("sigma validated ≥ 0");
        let shadow_db: f64 = normal.sample(rng);
        mean * 10f64.powf(shadow_db / 10.0)
    } else {
        mean
    };
    GainSample { gain, clamped }
}

/// Signal-to-noise ratio `P_t·G / (N_0·B)` (dimensionless, linear).
pub fn snr(link: &LinkParams) -> Result<f64, ChannelError> {
    link.validate()?;
    Ok(link.tx_power_w * link.channel_gain / (link.noise_psd_w_per_hz * link.bandwidth_hz))
}

/// Shannon capacity `B · log2(1 + SNR)` in bits/s. Zero exactly when the
/// SNR is zero.
pub fn capacity(link: &LinkParams) -> Result<f64, ChannelError> {
    Ok(link.bandwidth_hz * (1.0 + snr(link)?).log2())
}

/// Transmission delay `D / C` in seconds for a `packet_bits`-bit payload.
pub fn transmission_delay(packet_bits: f64, link: &LinkParams) -> Result<f64, ChannelError> {
    if !(packet_bits >= 0.0) {
        return Err(ChannelError::OutOfRange {
            name: "packet_bits",
            value: packet_bits,
            min: 0.0,
            max: f64::INFINITY,
        });
    }
    if packet_bits == 0.0 {
        // Zero payload takes zero time even over a dead link.
        capacity(link)?;
        return Ok(0.0);
    }
    let c = capacity(link)?;
    if c == 0.0 {
        return Err(ChannelError::UnreachableLink { packet_bits });
    }
    Ok(packet_bits / c)
}

/// Total per-update delay: transmission plus inference, `d_T + d_I`.
pub fn total_delay(packet_bits: f64, link: &LinkParams) -> Result<f64, ChannelError> {
    Ok(transmission_delay(packet_bits, link)? + link.inference_delay_s)
}

/// Builds a link for a transmitter at `distance_m` from the receiver:
/// samples the gain (path loss + shadowing) and folds interference into
/// the effective noise floor.
pub fn link_at_distance<R: Rng + ?Sized>(
    distance_m: f64,
    bandwidth_hz: f64,
    tx_power_w: f64,
    thermal_psd_w_per_hz: f64,
    inference_delay_s: f64,
    cfg: &PathLossConfig,
    rng: &mut R,
) -> LinkParams {
    let sample = channel_gain_at(distance_m, cfg, rng);
    LinkParams {
        bandwidth_hz,
        tx_power_w,
        noise_psd_w_per_hz: cfg.effective_noise_psd(thermal_psd_w_per_hz, bandwidth_hz),
        channel_gain: sample.gain,
        inference_delay_s,
    }
}

/// Seeded i.i.d. Bernoulli packet-loss process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossProcess {
    /// Per-packet loss probability, in `[0, 1]`.
    pub packet_loss_rate: f64,
    /// Seed; identical seeds give identical loss realizations.
    pub rng_seed: u64,
}

impl LossProcess {
    pub fn validate(&self) -> Result<(), ChannelError> {
        if !(0.0..=1.0).contains(&self.packet_loss_rate) {
            return Err(ChannelError::OutOfRange {
                name: "packet_loss_rate",
                value: self.packet_loss_rate,
                min: 0.0,
                max: 1.0,
            });
        }
        Ok(())
    }
}

/// Draws the loss mask for `n_packets` packets. `true` marks a lost packet.
pub fn realize_losses(n_packets: usize, proc: &LossProcess) -> Vec<bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(proc.rng_seed);
    (0..n_packets)
        .map(|_| rng.gen::<f64>() < proc.packet_loss_rate)
        .collect()
}
