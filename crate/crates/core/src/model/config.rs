use crate::{Error, Result};

/// Architecture settings. Every network width derives from these fields.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub height: usize,
    pub width: usize,
    /// Image channels, 1 or 3.
    pub channels: usize,
    pub latent_channels: usize,
    pub motion_channels: usize,
    /// Number of stride-2 stages in the encoders and the decoder. With 0 the
    /// encoders and decoder are single pointwise layers.
    pub depth: usize,
    /// Width of the first encoder stage; each further stage doubles it.
    pub encoder_width: usize,
    pub predictor_blocks: usize,
    pub predictor_layers: usize,
    pub predictor_growth: usize,
    /// Channels after each dense-block transition.
    pub predictor_width: usize,
    /// Number of stride-2 stages in each discriminator, at most `depth`.
    pub disc_depth: usize,
    pub disc_width: usize,
    /// Negative slope of the leaky rectifiers.
    pub slope: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            height: 64,
            width: 64,
            channels: 1,
            latent_channels: 128,
            motion_channels: 32,
            depth: 4,
            encoder_width: 16,
            predictor_blocks: 3,
            predictor_layers: 3,
            predictor_growth: 32,
            predictor_width: 128,
            disc_depth: 4,
            disc_width: 16,
            slope: 0.2,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("height", self.height),
            ("width", self.width),
            ("channels", self.channels),
            ("latent_channels", self.latent_channels),
            ("motion_channels", self.motion_channels),
            ("encoder_width", self.encoder_width),
            ("predictor_blocks", self.predictor_blocks),
            ("predictor_layers", self.predictor_layers),
            ("predictor_growth", self.predictor_growth),
            ("predictor_width", self.predictor_width),
            ("disc_width", self.disc_width),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::Config(alloc::format!("{name} must be positive")));
            }
        }
        if self.channels != 1 && self.channels != 3 {
            return Err(Error::Config("channels must be 1 or 3".into()));
        }
        let scale = 1usize
            .checked_shl(self.depth as u32)
            .ok_or_else(|| Error::Config("depth too large".into()))?;
        if self.height % scale != 0 || self.width % scale != 0 {
            return Err(Error::Config(alloc::format!(
                "image {}x{} not divisible by 2^{}",
                self.height,
                self.width,
                self.depth
            )));
        }
        if self.disc_depth > self.depth {
            return Err(Error::Config(
                "discriminator depth may not exceed encoder depth".into(),
            ));
        }
        if !(self.slope.is_finite() && self.slope >= 0.0) {
            return Err(Error::Config("slope must be a finite non-negative number".into()));
        }
        Ok(())
    }

    /// Spatial extent `(h, w)` of latent states and motion codes.
    pub fn latent_grid(&self) -> (usize, usize) {
        (self.height >> self.depth, self.width >> self.depth)
    }

    /// Spatial extent after the discriminator stages.
    pub fn disc_grid(&self) -> (usize, usize) {
        (self.height >> self.disc_depth, self.width >> self.disc_depth)
    }

    pub fn latent_shape(&self) -> [usize; 3] {
        let (h, w) = self.latent_grid();
        [self.latent_channels, h, w]
    }

    pub fn motion_shape(&self) -> [usize; 3] {
        let (h, w) = self.latent_grid();
        [self.motion_channels, h, w]
    }

    pub fn frame_shape(&self) -> [usize; 3] {
        [self.channels, self.height, self.width]
    }

    /// Encoder stage output widths, ending in `out`.
    pub(crate) fn encoder_widths(&self, out: usize) -> alloc::vec::Vec<usize> {
        let stages = self.depth.max(1);
        (0..stages)
            .map(|i| {
                if i + 1 == stages {
                    out
                } else {
                    self.encoder_width << i
                }
            })
            .collect()
    }
}
