use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameter groups that can be frozen during training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerGroup {
    Conv,
    VelocityMlp,
    Recurrent,
    Head,
}

impl LayerGroup {
    pub const ALL: [LayerGroup; 4] = [LayerGroup::Conv, LayerGroup::VelocityMlp, LayerGroup::Recurrent, LayerGroup::Head];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    /// Output channels of the stride-2 convolution stack.
    pub conv_channels: Vec<usize>,
    pub kernel: usize,
    pub stride: usize,
    pub velocity_hidden: Vec<usize>,
    /// LSTM hidden size.
    pub hidden: usize,
    pub head_hidden: usize,
    pub seq_len: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub seed: u64,
    pub use_omega: bool,
    pub use_recurrent: bool,
    pub frozen: Vec<LayerGroup>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            conv_channels: vec![8, 16, 32],
            kernel: 3,
            stride: 2,
            velocity_hidden: vec![32, 32],
            hidden: 32,
            head_hidden: 16,
            seq_len: 5,
            learning_rate: 1e-3,
            batch_size: 32,
            epochs: 100,
            patience: 10,
            seed: 0,
            use_omega: true,
            use_recurrent: true,
            frozen: Vec::new(),
        }
    }
}

impl ModelConfig {
    /// Smallest configuration exercising every layer type.
    pub fn tiny() -> Self {
        Self {
            conv_channels: vec![2, 2],
            velocity_hidden: vec![3],
            hidden: 4,
            head_hidden: 3,
            seq_len: 3,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.conv_channels.is_empty() || self.conv_channels.contains(&0) {
            return bad("model.conv_channels must be non-empty and positive".into());
        }
        if self.velocity_hidden.contains(&0) {
            return bad("model.velocity_hidden entries must be positive".into());
        }
        if self.kernel == 0 || self.kernel % 2 == 0 || self.stride == 0 {
            return bad(format!("model.kernel must be odd and stride positive, got {}/{}", self.kernel, self.stride));
        }
        if self.hidden == 0 || self.head_hidden == 0 || self.seq_len == 0 || self.batch_size == 0 {
            return bad("model dimensions, seq_len and batch_size must be >= 1".into());
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return bad(format!("model.learning_rate must be > 0, got {}", self.learning_rate));
        }
        Ok(())
    }
}
