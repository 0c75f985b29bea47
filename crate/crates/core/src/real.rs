use std::fmt::{Debug, Display, LowerExp};

use nalgebra::RealField;
use simba::scalar::{SubsetOf, SupersetOf};

/// Floating-point type the solvers run in.
///
/// Everything defaults to `f64`; `f32` exists so a whole solve can be
/// replayed in single precision and compared against a double reference.
pub trait Real:
    RealField + Copy + SupersetOf<f64> + SubsetOf<f64> + Display + LowerExp + Debug + Send + Sync + 'static
{
    /// Short name used in reports ("f64" / "f32").
    const NAME: &'static str;

    fn of(x: f64) -> Self {
        nalgebra::convert(x)
    }

    fn to_f64(self) -> f64 {
        nalgebra::convert(self)
    }

    fn eps() -> Self {
        Self::default_epsilon()
    }
}

impl Real for f64 {
    const NAME: &'static str = "f64";
}

impl Real for f32 {
    const NAME: &'static str = "f32";
}
