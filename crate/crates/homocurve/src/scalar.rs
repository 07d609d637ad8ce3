//! Scalar abstraction: the whole library is generic over the floating
//! point type, with `f64` as the default via the aliases in the crate root.

use num_traits::{FromPrimitive, ToPrimitive};

/// Floating point scalar usable throughout the library: f32 or f64.
pub trait Scalar: nalgebra::RealField + FromPrimitive + ToPrimitive + Copy {
    /// Lossy conversion from an f64 constant.
    fn of_f64(x: f64) -> Self {
        Self::from_f64(x).expect("finite f64 constant")
    }

    /// Conversion from a count.
    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("count fits in scalar")
    }

    /// Lossy view as f64, for diagnostics.
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl<T> Scalar for T where T: nalgebra::RealField + FromPrimitive + ToPrimitive + Copy {}
