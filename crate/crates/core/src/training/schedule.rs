use crate::error::{Error, Result};

/// Linear decay from `lr0` at epoch 0 to `final_fraction * lr0` at the last
/// epoch. Fractional epochs interpolate.
pub fn lr_schedule(epoch: f64, total_epochs: usize, lr0: f64, final_fraction: f64) -> Result<f64> {
    if total_epochs == 0 || epoch.is_nan() || epoch < 0.0 || epoch > (total_epochs - 1) as f64 {
        return Err(Error::InvalidConfig(format!(
            "epoch {epoch} outside [0, {}]",
            total_epochs.saturating_sub(1)
        )));
    }
    if total_epochs == 1 {
        return Ok(lr0);
    }
    let t = epoch / (total_epochs - 1) as f64;
    Ok(lr0 * (1.0 - (1.0 - final_fraction) * t))
}
