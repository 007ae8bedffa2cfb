//! Stability metrics computed from the training trace.

use crate::tensor::Matrix;

/// Number of preceding losses a spike is judged against.
pub const SPIKE_WINDOW: usize = 50;

/// L2 norm over every entry of every tensor.
pub fn global_grad_norm(layers: &[Matrix]) -> f64 {
    crate::optim::global_norm(layers)
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Whether the last entry of `history` exceeds `k` times the median of the
/// [`SPIKE_WINDOW`] finite losses before it. Returns false until that many
/// finite losses exist.
pub fn detect_loss_spike(history: &[f64], k: f64) -> bool {
    let Some((&current, before)) = history.split_last() else {
        return false;
    };
    let mut window: Vec<f64> = before
        .iter()
        .rev()
        .copied()
        .filter(|x| x.is_finite())
        .take(SPIKE_WINDOW)
        .collect();
    if window.len() < SPIKE_WINDOW {
        return false;
    }
    current > k * median(&mut window)
}

/// Count of steps flagged by [`detect_loss_spike`] over a whole trace.
pub fn count_loss_spikes(losses: &[f64], k: f64) -> usize {
    (1..=losses.len())
        .filter(|&end| detect_loss_spike(&losses[..end], k))
        .count()
}

/// First 1-based step at which the trailing mean over `window` losses is at
/// or below `target`.
pub fn steps_to_target(losses: &[f64], target: f64, window: usize) -> Option<u64> {
    let window = window.max(1);
    let mut sum = 0.0;
    for (i, &l) in losses.iter().enumerate() {
        sum += l;
        if i >= window {
            sum -= losses[i - window];
        }
        let n = (i + 1).min(window) as f64;
        if sum / n <= target {
            return Some(i as u64 + 1);
        }
    }
    None
}
