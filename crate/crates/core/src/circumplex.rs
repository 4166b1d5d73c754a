//! Points on the valence/arousal circumplex and the geometry the rest of the
//! crate needs: clamping, quadrant labels, intensity and distances.

use std::fmt;

use crate::error::{Error, Result};

/// A valence/arousal pair. Both coordinates lie in [-1, 1].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EmotionPoint {
    pub valence: f64,
    pub arousal: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QuadrantLabel {
    HighArousalPositiveValence,
    HighArousalNegativeValence,
    LowArousalNegativeValence,
    LowArousalPositiveValence,
    /// Both coordinates exactly zero.
    Origin,
    /// Exactly one coordinate is zero.
    Axis,
}

impl EmotionPoint {
    pub const ORIGIN: EmotionPoint = EmotionPoint {
        valence: 0.0,
        arousal: 0.0,
    };

    /// Builds a point, saturating each coordinate to [-1, 1].
    pub fn clamp(valence: f64, arousal: f64) -> Result<Self> {
        if !valence.is_finite() || !arousal.is_finite() {
            return Err(Error::InvalidValue(format!(
                "emotion point ({valence}, {arousal})"
            )));
        }
        Ok(EmotionPoint {
            valence: valence.clamp(-1.0, 1.0),
            arousal: arousal.clamp(-1.0, 1.0),
        })
    }

    #[cfg(test)]
    pub(crate) fn new_unchecked(valence: f64, arousal: f64) -> Self {
        EmotionPoint { valence, arousal }
    }

    pub fn quadrant(&self) -> QuadrantLabel {
        let (v, a) = (self.valence, self.arousal);
        if v == 0.0 && a == 0.0 {
            QuadrantLabel::Origin
        } else if v == 0.0 || a == 0.0 {
            QuadrantLabel::Axis
        } else if a > 0.0 {
            if v > 0.0 {
                QuadrantLabel::HighArousalPositiveValence
            } else {
                QuadrantLabel::HighArousalNegativeValence
            }
        } else if v < 0.0 {
            QuadrantLabel::LowArousalNegativeValence
        } else {
            QuadrantLabel::LowArousalPositiveValence
        }
    }

    /// Euclidean norm, in [0, sqrt(2)]. Not normalized.
    pub fn intensity(&self) -> f64 {
        self.valence.hypot(self.arousal)
    }

    pub fn distance(&self, other: &EmotionPoint) -> f64 {
        (self.valence - other.valence).hypot(self.arousal - other.arousal)
    }

    pub fn as_array(&self) -> [f64; 2] {
        [self.valence, self.arousal]
    }
}

impl fmt::Display for EmotionPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.6},{:.6}", self.valence, self.arousal)
    }
}

/// Free-function forms of the point operations.
pub fn clamp(valence: f64, arousal: f64) -> Result<EmotionPoint> {
    EmotionPoint::clamp(valence, arousal)
}

pub fn quadrant(p: &EmotionPoint) -> QuadrantLabel {
    p.quadrant()
}

pub fn intensity(p: &EmotionPoint) -> f64 {
    p.intensity()
}

pub fn distance(a: &EmotionPoint, b: &EmotionPoint) -> f64 {
    a.distance(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pt(v: f64, a: f64) -> EmotionPoint {
        EmotionPoint::clamp(v, a).unwrap()
    }

    #[test]
    fn clamp_examples() {
        assert_eq!(pt(0.3, -0.4), EmotionPoint::new_unchecked(0.3, -0.4));
        assert_eq!(pt(1.5, -2.0), EmotionPoint::new_unchecked(1.0, -1.0));
        assert_eq!(pt(0.0, 0.0), EmotionPoint::ORIGIN);
    }

    #[test]
    fn clamp_rejects_non_finite() {
        assert!(matches!(
            EmotionPoint::clamp(f64::NAN, 0.0),
            Err(Error::InvalidValue(_))
        ));
        assert!(EmotionPoint::clamp(0.0, f64::INFINITY).is_err());
    }

    #[test]
    fn quadrant_examples() {
        assert_eq!(pt(0.5, 0.5).quadrant(), QuadrantLabel::HighArousalPositiveValence);
        assert_eq!(pt(-0.5, 0.5).quadrant(), QuadrantLabel::HighArousalNegativeValence);
        assert_eq!(pt(-0.5, -0.5).quadrant(), QuadrantLabel::LowArousalNegativeValence);
        assert_eq!(pt(0.5, -0.5).quadrant(), QuadrantLabel::LowArousalPositiveValence);
        assert_eq!(pt(0.0, 0.0).quadrant(), QuadrantLabel::Origin);
        assert_eq!(pt(0.0, 0.2).quadrant(), QuadrantLabel::Axis);
        assert_eq!(pt(-0.7, 0.0).quadrant(), QuadrantLabel::Axis);
    }

    #[test]
    fn intensity_examples() {
        assert_eq!(pt(0.0, 0.0).intensity(), 0.0);
        assert!((pt(1.0, 1.0).intensity() - std::f64::consts::SQRT_2).abs() < 1e-15);
        assert!((pt(0.3, -0.4).intensity() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn distance_examples() {
        assert_eq!(distance(&EmotionPoint::ORIGIN, &EmotionPoint::ORIGIN), 0.0);
        assert_eq!(distance(&pt(1.0, 0.0), &pt(-1.0, 0.0)), 2.0);
        assert!((distance(&pt(0.3, 0.4), &EmotionPoint::ORIGIN) - 0.5).abs() < 1e-15);
    }

    fn point() -> impl Strategy<Value = EmotionPoint> {
        (-1.0f64..=1.0, -1.0f64..=1.0).prop_map(|(v, a)| EmotionPoint::new_unchecked(v, a))
    }

    proptest! {
        #[test]
        fn intensity_is_distance_to_origin(p in point()) {
            prop_assert_eq!(p.intensity(), p.distance(&EmotionPoint::ORIGIN));
        }

        #[test]
        fn triangle_inequality(a in point(), b in point(), c in point()) {
            prop_assert!(a.distance(&c) <= a.distance(&b) + b.distance(&c) + 1e-12);
        }

        #[test]
        fn distance_symmetric_and_zero_on_self(a in point(), b in point()) {
            prop_assert_eq!(a.distance(&b), b.distance(&a));
            prop_assert_eq!(a.distance(&a), 0.0);
        }

        #[test]
        fn quadrant_scale_invariant(p in point(), s in 1e-6f64..=1.0) {
            let scaled = EmotionPoint::clamp(p.valence * s, p.arousal * s).unwrap();
            // Underflow to zero would legitimately move a point onto an axis.
            prop_assume!((scaled.valence == 0.0) == (p.valence == 0.0));
            prop_assume!((scaled.arousal == 0.0) == (p.arousal == 0.0));
            prop_assert_eq!(scaled.quadrant(), p.quadrant());
        }

        #[test]
        fn clamp_idempotent(v in -5.0f64..5.0, a in -5.0f64..5.0) {
            let once = EmotionPoint::clamp(v, a).unwrap();
            let twice = EmotionPoint::clamp(once.valence, once.arousal).unwrap();
            prop_assert_eq!(once, twice);
            prop_assert!(once.valence.abs() <= 1.0 && once.arousal.abs() <= 1.0);
        }
    }
}
