//! Channel-budget-adaptive descriptor quantization.
//!
//! Before transmission, every descriptor component is quantized to `q`
//! bits, so a batch of `N` keypoints with dimension-`d` descriptors costs
//! `C = N·q·d` bits. Planning picks the largest uniform `q` that fits the
//! available budget.

use super::CalibError;

/// A uniform quantization plan for one calibration payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuantizationPlan {
    /// Bits per descriptor component, `q ≥ 1`.
    pub bits_per_component: u32,
    /// Descriptor dimension `d`.
    pub descriptor_dim: usize,
    /// Number of keypoints `N` in the payload.
    pub n_keypoints: usize,
    /// Total payload cost `N·q·d` bits.
    pub total_cost_bits: u64,
}

/// Picks the maximal uniform bit depth whose total cost fits
/// `budget_bits`. Errors when even 1 bit/component does not fit.
pub fn plan_quantization(
    descriptor_dim: usize,
    n_keypoints: usize,
    budget_bits: u64,
) -> Result<QuantizationPlan, CalibError> {
    let per_bit_cost = (descriptor_dim as u64) * (n_keypoints as u64);
    if per_bit_cost == 0 {
        return Err(CalibError::EmptyDescriptorSet);
    }
    let q = budget_bits / per_bit_cost;
    if q < 1 {
        return Err(CalibError::BudgetTooSmall {
            budget_bits,
            minimum_bits: per_bit_cost,
        });
    }
    let q = q.min(u32::MAX as u64) as u32;
    Ok(QuantizationPlan {
        bits_per_component: q,
        descriptor_dim,
        n_keypoints,
        total_cost_bits: q as u64 * per_bit_cost,
    })
}

/// Bit depth at and above which quantization over a unit-order range is
/// finer than f64 resolution and becomes the identity.
const PASSTHROUGH_BITS: u32 = 53;

/// Quantizes one descriptor component-wise on a uniform mid-rise grid
/// over `[-range, range]` with `2^bits` levels. Inputs are clamped to the
/// range first; 53 bits or more passes values through unchanged.
pub fn quantize_descriptor(descriptor: &[f64], bits: u32, range: f64) -> Vec<f64> {
    assert!(bits >= 1, "need at least one bit per component");
    assert!(range > 0.0, "quantizer range must be positive");
    if bits >= PASSTHROUGH_BITS {
        return descriptor.to_vec();
    }
    let levels = (1u64 << bits) as f64;
    let step = 2.0 * range / levels;
    descriptor
        .iter()
        .map(|&x| {
            let clamped = x.clamp(-range, range);
            let idx = ((clamped + range) / step).floor().min(levels - 1.0);
            -range + (idx + 0.5) * step
        })
        .collect()
}
