//! Scalar abstraction shared by every solver module.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use serde::{de::DeserializeOwned, Serialize};

/// Floating point type the solvers are generic over: `f32` or `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Converts an `f64` literal. Values outside the type's range saturate to infinity.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).unwrap_or_else(|| if x > 0.0 { Self::infinity() } else { Self::neg_infinity() })
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Raises a tolerance so it stays representable: `max(tol, 100 ε)`.
    #[inline]
    fn tol_floor(tol: f64) -> Self {
        Self::lit(tol).max(Self::epsilon() * Self::lit(100.0))
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Serde adapter for extended reals: finite values as numbers, infinities as
/// the strings `"+inf"` and `"-inf"`.
pub mod extended {
    use serde::{de::Error as _, Deserialize, Deserializer, Serializer};

    use super::Real;

    pub fn serialize<T: Real, S: Serializer>(x: &T, ser: S) -> Result<S::Ok, S::Error> {
        let x = x.as_f64();
        if x.is_finite() {
            ser.serialize_f64(x)
        } else if x > 0.0 {
            ser.serialize_str("+inf")
        } else if x < 0.0 {
            ser.serialize_str("-inf")
        } else {
            ser.serialize_str("nan")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, T: Real, D: Deserializer<'de>>(de: D) -> Result<T, D::Error> {
        match Repr::deserialize(de)? {
            Repr::Num(x) => Ok(T::lit(x)),
            Repr::Text(t) => match t.as_str() {
                "+inf" | "inf" => Ok(T::infinity()),
                "-inf" => Ok(T::neg_infinity()),
                "nan" => Ok(T::nan()),
                other => Err(D::Error::custom(format!("not an extended real: {other}"))),
            },
        }
    }
}
