use std::f64::consts::PI;

use rand::Rng;

/// Which half of `[0, 2]` the regression stream currently draws inputs from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SineStage {
    /// `x ∈ [0, 1]`
    One,
    /// `x ∈ [1, 2]`
    Two,
}

impl SineStage {
    pub fn interval(self) -> (f64, f64) {
        match self {
            SineStage::One => (0.0, 1.0),
            SineStage::Two => (1.0, 2.0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SineSample {
    pub x: f64,
    pub y: f64,
}

impl SineSample {
    pub fn at(x: f64) -> Self {
        SineSample {
            x,
            y: (PI * x).sin(),
        }
    }
}

pub fn sine_batch<R: Rng + ?Sized>(stage: SineStage, batch_size: usize, rng: &mut R) -> Vec<SineSample> {
    let (lo, hi) = stage.interval();
    (0..batch_size)
        .map(|_| SineSample::at(rng.gen_range(lo..=hi)))
        .collect()
}
