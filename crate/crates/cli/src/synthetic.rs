//! Synthetic test images on the 8-bit intensity scale.

use abcs::ImageVector;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SyntheticKind {
    /// Smooth ramps with a few sharp-edged regions.
    PiecewiseSmooth,
    /// Oriented stripe textures over a smooth background.
    Stripes,
    /// Smooth shading, sharp edges and one moderate-contrast striped region,
    /// loosely resembling a photograph.
    Mixed,
}

pub fn generate(kind: SyntheticKind, width: usize, height: usize) -> ImageVector<f64> {
    match kind {
        SyntheticKind::PiecewiseSmooth => piecewise_smooth(width, height),
        SyntheticKind::Stripes => stripes(width, height),
        SyntheticKind::Mixed => mixed(width, height),
    }
}

pub fn piecewise_smooth(width: usize, height: usize) -> ImageVector<f64> {
    ImageVector::from_fn(width, height, |r, c| {
        let (x, y) = (c as f64 / width as f64, r as f64 / height as f64);
        if (x - 0.55).powi(2) + (y - 0.45).powi(2) < 0.07 {
            200.0 - 30.0 * y
        } else if y > 0.75 && x < 0.4 {
            30.0 + 20.0 * x
        } else {
            60.0 + 80.0 * x + 40.0 * y
        }
    })
}

/// Two stripe fields of different period and orientation, as on a striped
/// garment, over a shaded background.
pub fn stripes(width: usize, height: usize) -> ImageVector<f64> {
    use std::f64::consts::PI;
    ImageVector::from_fn(width, height, |r, c| {
        let (x, y) = (c as f64, r as f64);
        let (u, v) = (x / width as f64, y / height as f64);
        let background = 90.0 + 60.0 * u;
        if (u - 0.3).powi(2) / 0.06 + (v - 0.55).powi(2) / 0.12 < 1.0 {
            128.0 + 90.0 * (2.0 * PI * (x + y) / 6.0).sin()
        } else if u > 0.55 && v < 0.7 {
            120.0 + 80.0 * (2.0 * PI * (0.8 * x - 0.3 * y) / 5.0).sin()
        } else {
            background
        }
    })
}

pub fn mixed(width: usize, height: usize) -> ImageVector<f64> {
    use std::f64::consts::PI;
    ImageVector::from_fn(width, height, |r, c| {
        let (x, y) = (c as f64, r as f64);
        let (u, v) = (x / width as f64, y / height as f64);
        if (u - 0.62).powi(2) + (v - 0.35).powi(2) < 0.045 {
            175.0 - 40.0 * v + 8.0 * (2.0 * PI * u).cos()
        } else if v > 0.6 && u < 0.5 {
            110.0 + 40.0 * (2.0 * PI * (x - 0.5 * y) / 7.0).sin()
        } else if u > 0.7 && v > 0.7 {
            45.0 + 25.0 * u
        } else {
            70.0 + 60.0 * u + 30.0 * v
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn images_stay_in_range() {
        for kind in [SyntheticKind::PiecewiseSmooth, SyntheticKind::Stripes, SyntheticKind::Mixed] {
            let img = generate(kind, 40, 30);
            assert_eq!((img.width(), img.height()), (40, 30));
            assert!(img.data().iter().all(|v| (0.0..=255.0).contains(v)));
        }
    }
}
